use hva_core::capital::sweep_alpha;
use hva_core::oracle::OracleRun;
use hva_core::trader::calibrate;
use hva_core::*;
use proptest::prelude::*;

fn flat_spec() -> impl Strategy<Value = MarketSpec> {
    (1usize..=8, 0.005f64..2.0).prop_map(|(t, last)| {
        MarketSpec::from_gamma(build_q_flat_family(t, last).unwrap()).unwrap()
    })
}

fn any_spec() -> impl Strategy<Value = MarketSpec> {
    prop::collection::vec(0.0f64..2.5, 1..=8).prop_map(|g| MarketSpec::from_gamma(g).unwrap())
}

fn discrete_law() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5i32..5, 1u32..20), 1..8).prop_map(|raw| {
        let total: u32 = raw.iter().map(|(_, w)| w).sum();
        raw.into_iter()
            .map(|(x, w)| (x as f64 * 0.5, w as f64 / total as f64))
            .collect()
    })
}

/// `(1 - alpha)^-1` times the integral of the quantile function over `[alpha, 1]`.
fn es_by_quantile_integral(law: &[(f64, f64)], alpha: f64) -> f64 {
    let mut sorted = law.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lo = 0.0;
    let mut integral = 0.0;
    for (x, p) in sorted {
        let hi = lo + p;
        let overlap = (hi.min(1.0) - lo.max(alpha)).max(0.0);
        integral += x * overlap;
        lo = hi;
    }
    integral / (1.0 - alpha)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_laws_and_nest(spec in any_spec(), seed in 0u64..1000) {
        let sp = step_probs(&spec);
        for part in [Partition::bad(&sp), Partition::nsb(&sp)] {
            let x: Vec<f64> = (0..part.len()).map(|a| ((a as u64 * 7919 + seed) % 101) as f64).collect();
            for k in 0..=spec.horizon {
                for given in 0..part.len() {
                    let law = part.law(k, given);
                    prop_assert!(law.iter().all(|p| *p >= -1e-15));
                    prop_assert!((law.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
            }
            for k in 0..spec.horizon {
                let inner: Vec<f64> = (0..part.len()).map(|a| part.expect(&x, k + 1, a).unwrap()).collect();
                for a in 0..part.len() {
                    let nested = part.expect(&inner, k, a).unwrap();
                    let direct = part.expect(&x, k, a).unwrap();
                    prop_assert!((nested - direct).abs() <= 1e-9 * direct.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn binary_prices_step_back_consistently(spec in any_spec()) {
        let sp = step_probs(&spec);
        let t = spec.horizon;
        for ell in 1..=t {
            for k in 0..ell {
                for r in [Regime::Normal, Regime::Extreme] {
                    let p = binary_price(&spec, k, ell, r).unwrap();
                    prop_assert!((0.0..=1.0).contains(&p));
                    let stepped: f64 = [Regime::Normal, Regime::Extreme]
                        .iter()
                        .map(|&s| sp.transition(k + 1, r, s) * binary_price(&spec, k + 1, ell, s).unwrap())
                        .sum();
                    prop_assert!((p - stepped).abs() <= 1e-13);
                }
                let up = binary_price(&spec, k, ell, Regime::Normal).unwrap();
                let down = binary_price(&spec, k, ell, Regime::Extreme).unwrap();
                prop_assert!(down >= up);
            }
        }
    }

    #[test]
    fn calibration_reprices_binaries(spec in flat_spec(), k_frac in 0.0f64..1.0) {
        let k = ((spec.horizon as f64) * k_frac) as usize % spec.horizon;
        let calib = calibrate(&spec, k, Regime::Normal).unwrap();
        for ell in k + 1..=spec.horizon {
            let fair = binary_price(&spec, k, ell, Regime::Normal).unwrap();
            prop_assert!((calib.binary_price(ell) - fair).abs() <= 1e-12);
        }
        prop_assert!(calib.intensities().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn flat_family_stays_flat(t in 1usize..=30, last in 1e-3f64..5.0) {
        let gamma = build_q_flat_family(t, last).unwrap();
        prop_assert!(gamma.iter().all(|g| *g > 0.0));
        prop_assert!((gamma[t - 1] - last).abs() == 0.0);
        let spec = MarketSpec::from_gamma(gamma).unwrap();
        let surf = solve_fair(&spec, &step_probs(&spec));
        prop_assert!(surf.max_normal_value().abs() <= 1e-12);
        for k in 0..t {
            prop_assert!(surf.value(k, Regime::Extreme) > 0.0);
        }
    }

    #[test]
    fn es_matches_quantile_integral(law in discrete_law(), alpha in 0.51f64..0.995) {
        let es = expected_shortfall(&law, alpha, EsConvention::AcerbiTasche).unwrap();
        let want = es_by_quantile_integral(&law, alpha);
        prop_assert!((es - want).abs() <= 1e-9 * want.abs().max(1.0));
        let tce = expected_shortfall(&law, alpha, EsConvention::TailConditional).unwrap();
        let worst = law.iter().map(|(x, _)| *x).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(tce <= worst + 1e-12 && es <= worst + 1e-12);
    }

    #[test]
    fn es_grows_with_level(law in discrete_law(), a in 0.51f64..0.99, b in 0.51f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let c = EsConvention::AcerbiTasche;
        prop_assert!(expected_shortfall(&law, lo, c).unwrap() <= expected_shortfall(&law, hi, c).unwrap() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn compensated_pnl_is_martingale(spec in flat_spec()) {
        let m = Model::build(spec).unwrap();
        for trader in [TraderType::Bad, TraderType::NotSoBad] {
            let l = xva(&m, trader).unwrap();
            prop_assert!(l.martingale_gap() <= 1e-12);
            prop_assert!((l.hva0() - l.hva0_closed_form).abs() <= 1e-12);
            prop_assert!(l.hva0_spread() <= 1e-12);
            prop_assert!(l.d_gap <= 1e-12);
            let t = l.horizon();
            prop_assert!(l.rows.iter().all(|r| r[t].hva.abs() <= 1e-12));
        }
    }

    #[test]
    fn exec_modes_agree_exactly(spec in flat_spec()) {
        let m = Model::build(spec).unwrap();
        let alphas = [0.6, 0.8, 0.9, 0.975];
        for trader in [TraderType::Bad, TraderType::NotSoBad] {
            let l = xva(&m, trader).unwrap();
            let c = EsConvention::AcerbiTasche;
            let seq = sweep_alpha(&l, &alphas, 0.1, c, Exec::Sequential).unwrap();
            let par = sweep_alpha(&l, &alphas, 0.1, c, Exec::Parallel).unwrap();
            prop_assert_eq!(seq, par);
            let a = OracleRun::run(&m, trader, Exec::Sequential).unwrap();
            let b = OracleRun::run(&m, trader, Exec::Parallel).unwrap();
            prop_assert_eq!(a.points, b.points);
        }
    }
}
