use hva_core::oracle::{enumerate_paths, monte_carlo_exit_accrual, trader_ratios_brute, OracleRun};
use hva_core::partition::regime_at;
use hva_core::trader::trader_hedge_ratios;
use hva_core::*;

fn reference() -> Model {
    Model::build(MarketSpec::reference()).unwrap()
}

#[test]
fn paths_land_in_one_atom_with_matching_mass() {
    let m = reference();
    let t = m.horizon();
    let paths = enumerate_paths(&m.spec, Exec::default()).unwrap();
    assert_eq!(paths.len(), 1024);
    assert!((paths.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-12);
    for part in [Partition::bad(&m.probs), Partition::nsb(&m.probs)] {
        let mut mass = vec![0.0; part.len()];
        for p in &paths {
            let a = part.atom_of_path(&p.path);
            let event = part.atoms()[a];
            let matching: Vec<usize> = (0..part.len())
                .filter(|&b| {
                    let e = part.atoms()[b];
                    (0..=e.horizon(t)).all(|k| regime_at(e, k, t) == Some(p.path.at(k)))
                })
                .collect();
            assert_eq!(matching, vec![a], "path {:b} in {event}", p.flips);
            mass[a] += p.weight;
        }
        for (a, w) in mass.iter().enumerate() {
            assert!((part.unconditional(a) - w).abs() < 1e-14);
        }
    }
}

#[test]
fn trader_ratios_match_their_definition() {
    let m = reference();
    for k in 0..m.horizon() {
        let engine = trader_hedge_ratios(m.traders.surface(k), &m.spec, k, Regime::Normal).unwrap();
        let brute = trader_ratios_brute(m.traders.calib(k), m.traders.surface(k));
        for (i, (a, b)) in brute.iter().enumerate() {
            let ell = k + 1 + i;
            assert!((engine.long(ell) - a).abs() < 1e-12, "k={k} ell={ell}");
            assert!((engine.short(ell) - b).abs() < 1e-12, "k={k} ell={ell}");
        }
    }
    assert!((m.static_hedge.long(3) - 0.7724).abs() < 5e-5);
}

#[test]
fn rebalanced_ratios_match_path_averages() {
    let m = reference();
    let ledger = xva_nsb(&m).unwrap();
    let run = OracleRun::run(&m, TraderType::NotSoBad, Exec::default()).unwrap();
    let mut seen = 0;
    for (i, p) in run.paths.iter().enumerate() {
        let a = ledger.partition.atom_of_path(&p.path);
        match (ledger.hedge.rebalance(a), &run.rebalance[i]) {
            (Some(engine), Some(brute)) => {
                for (j, (x, y)) in brute.iter().enumerate() {
                    let ell = run.stops[i].tau_s + 1 + j;
                    assert!((engine.long(ell) - x).abs() < 1e-12);
                    assert!((engine.short(ell) - y).abs() < 1e-12);
                }
                seen += 1;
            }
            (None, None) => {}
            (e, b) => panic!(
                "path {:b}: engine {} oracle {}",
                p.flips,
                e.is_some(),
                b.is_some()
            ),
        }
    }
    assert!(seen > 0);
}

#[test]
fn monte_carlo_brackets_exact_accrual() {
    let m = reference();
    for trader in [TraderType::Bad, TraderType::NotSoBad] {
        let ledger = xva(&m, trader).unwrap();
        let t = m.horizon();
        let exact: f64 = (0..ledger.partition.len())
            .map(|a| ledger.partition.unconditional(a) * ledger.at(a, t).accrual)
            .sum();
        let (mean, se) = monte_carlo_exit_accrual(&m, trader, 20_000, 42).unwrap();
        assert!(
            (mean - exact).abs() < 5.0 * se,
            "{trader:?}: {mean} +- {se} vs {exact}"
        );
    }
}

#[test]
fn oracle_refuses_long_horizons() {
    let spec = MarketSpec::from_gamma(build_q_flat_family(21, 0.05).unwrap()).unwrap();
    assert!(matches!(
        enumerate_paths(&spec, Exec::Sequential),
        Err(Error::PathCap { horizon: 21, .. })
    ));
}

#[test]
fn bad_trader_matches_enumeration_on_affine_specs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    for _ in 0..20 {
        let t = rng.gen_range(3..=8);
        let c0 = rng.gen_range(0.05..0.6);
        let slope = rng.gen_range(0.0..c0 / t as f64);
        let spec = MarketSpec::from_gamma(gamma_from_affine(c0, slope, t).unwrap()).unwrap();
        let Ok(m) = Model::build(spec) else { continue };
        let ledger = xva_bad(&m).unwrap();
        let profile = capital_and_kva(&ledger, 0.975, 0.1, EsConvention::AcerbiTasche).unwrap();
        let run = OracleRun::run(&m, TraderType::Bad, Exec::default()).unwrap();
        let (ec, kva0) = run
            .capital(0.975, 0.1, EsConvention::AcerbiTasche, Exec::default())
            .unwrap();
        let gap = run.compare(&m, &ledger, Some((&profile, &ec, kva0))).max();
        assert!(gap <= 1e-10, "c0={c0} slope={slope} T={t}: {gap:e}");
        assert!(ledger.martingale_gap() <= 1e-12);
        checked += 1;
    }
    assert!(checked >= 15, "only {checked} affine specs built");
}
