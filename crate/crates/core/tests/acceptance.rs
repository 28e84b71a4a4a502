//! Acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line.

use hva_core::capital::kva0_by_sum;
use hva_core::hedge::pbad_dp;
use hva_core::oracle::{
    fair_stopping_max_listed, fair_stopping_max_tree, trader_stopping_max, OracleRun,
};
use hva_core::trader::trader_price_q;
use hva_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

const NOMINAL: f64 = 100.0;
const ALPHA_GRID: [f64; 5] = [0.85, 0.90, 0.95, 0.975, 0.99];
const HURDLE: f64 = 0.10;

/// Writes straight to stderr so the line survives test output capture.
fn report(line: String) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn verdict(name: &str, ok: bool, detail: String) {
    report(format!(
        "[{}] {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    ));
    assert!(ok, "{name}: {detail}");
}

fn reference() -> Model {
    Model::build(MarketSpec::reference()).unwrap()
}

fn random_specs(count: usize, seed: u64) -> Vec<MarketSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let t = rng.gen_range(3..=8);
            let last = rng.gen_range(0.01..1.0);
            MarketSpec::from_gamma(build_q_flat_family(t, last).unwrap()).unwrap()
        })
        .collect()
}

#[test]
fn golden_hva() {
    let m = reference();
    let bad = xva_bad(&m).unwrap().hva0() * NOMINAL;
    let nsb = xva_nsb(&m).unwrap().hva0() * NOMINAL;
    let ok = (bad - 181.0).abs() <= 1.0 && (nsb - 120.0).abs() <= 1.0;
    verdict(
        "golden HVA at 0",
        ok,
        format!("bad {bad:.3} (want 181 +-1), nsb {nsb:.3} (want 120 +-1)"),
    );
}

#[test]
fn golden_switch_decomposition() {
    let m = reference();
    let ledger = xva_bad(&m).unwrap();
    let want = [(1, 335.0, -227.0), (2, 391.0, -196.0)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (lambda, slip, change) in want {
        let d = pnl_switch_decomposition(&m, &ledger, lambda).unwrap();
        let (s, c) = (d.hedge_slippage * NOMINAL, d.model_change * NOMINAL);
        ok &= (s - slip).abs() <= 1.0 && (c - change).abs() <= 1.0;
        detail.push(format!(
            "bad({lambda}) ({s:.2}, {c:.2}) want ({slip}, {change})"
        ));
    }
    verdict("pnl jump at the model switch", ok, detail.join("; "));
}

#[test]
fn exit_time_facts() {
    let m = reference();
    let t = m.horizon();
    let sched = xva_bad(&m).unwrap().schedule;
    let worst_exit = sched.times.iter().map(|s| s.tau_e).max().unwrap();
    let q22 = m.traders.surface(2).value(2, Regime::Normal);
    let q_normal = (0..=t)
        .map(|k| m.fair.value(k, Regime::Normal).abs())
        .fold(0.0, f64::max);
    let ok = worst_exit <= 2 && q22.abs() <= 1e-12 && q_normal <= 1e-12;
    verdict(
        "exit times",
        ok,
        format!("max bad exit {worst_exit}, trader value at (2, normal) {q22:e}, max fair normal value {q_normal:e}"),
    );
}

#[test]
fn kva_ordering() {
    let m = reference();
    let bad = xva_bad(&m).unwrap();
    let nsb = xva_nsb(&m).unwrap();
    let conv = EsConvention::AcerbiTasche;
    let kb = capital::sweep_alpha(&bad, &ALPHA_GRID, HURDLE, conv, Exec::default()).unwrap();
    let kn = capital::sweep_alpha(&nsb, &ALPHA_GRID, HURDLE, conv, Exec::default()).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for ((alpha, b), n) in ALPHA_GRID.iter().zip(&kb).zip(&kn) {
        let ordered = n <= b;
        let covered = bad.hva0() >= 5.0 * b && nsb.hva0() >= 5.0 * n;
        ok &= ordered && covered;
        detail.push(format!(
            "a={alpha}: bad {:.3} nsb {:.3}",
            b * NOMINAL,
            n * NOMINAL
        ));
    }
    verdict(
        "KVA ordering and HVA cover",
        ok,
        format!(
            "{} (HVA bad {:.3}, nsb {:.3})",
            detail.join(", "),
            bad.hva0() * NOMINAL,
            nsb.hva0() * NOMINAL
        ),
    );

    // informational: the tail-conditional convention and the fine grid
    let tce = EsConvention::TailConditional;
    let b = capital_and_kva(&bad, 0.85, HURDLE, tce).unwrap().kva0;
    let n = capital_and_kva(&nsb, 0.85, HURDLE, tce).unwrap().kva0;
    report(format!(
        "[INFO] tail-conditional ES at a=0.85: bad {:.3}, nsb {:.3}, ordered {}",
        b * NOMINAL,
        n * NOMINAL,
        n <= b
    ));
    let fine: Vec<f64> = (0..40).map(|i| 0.80 + 0.005 * i as f64).collect();
    let fb = capital::sweep_alpha(&bad, &fine, HURDLE, conv, Exec::default()).unwrap();
    let fn_ = capital::sweep_alpha(&nsb, &fine, HURDLE, conv, Exec::default()).unwrap();
    let hits: Vec<String> = fine
        .iter()
        .zip(fb.iter().zip(&fn_))
        .filter(|(_, (b, n))| (*b * NOMINAL).round() == 36.0 && (*n * NOMINAL).round() == 10.0)
        .map(|(a, _)| format!("{a:.3}"))
        .collect();
    report(format!(
        "[INFO] levels with rounded KVA (36, 10): {}",
        if hits.is_empty() {
            "none".into()
        } else {
            hits.join(", ")
        }
    ));
}

#[test]
fn martingale_compensation() {
    let m = reference();
    let gb = xva_bad(&m).unwrap().martingale_gap();
    let gn = xva_nsb(&m).unwrap().martingale_gap();
    verdict(
        "compensated pnl is a martingale",
        gb <= 1e-12 && gn <= 1e-12,
        format!("bad {gb:e}, nsb {gn:e}"),
    );
}

#[test]
fn probability_calculus() {
    let m = reference();
    let mut worst_neg: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    for part in [Partition::bad(&m.probs), Partition::nsb(&m.probs)] {
        for k in 0..=m.horizon() {
            for given in 0..part.len() {
                let law = part.law(k, given);
                worst_neg = law.iter().fold(worst_neg, |w, p| w.min(*p));
                worst_mass = worst_mass.max((law.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    verdict(
        "conditional laws",
        worst_neg >= -1e-15 && worst_mass <= 1e-12,
        format!("most negative {worst_neg:e}, worst mass defect {worst_mass:e}"),
    );
}

fn oracle_gap(m: &Model) -> (f64, f64) {
    let mut gap: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for trader in [TraderType::Bad, TraderType::NotSoBad] {
        let ledger = xva(m, trader).unwrap();
        let profile = capital_and_kva(&ledger, 0.975, HURDLE, EsConvention::AcerbiTasche).unwrap();
        let run = OracleRun::run(m, trader, Exec::default()).unwrap();
        let (ec, kva0) = run
            .capital(0.975, HURDLE, EsConvention::AcerbiTasche, Exec::default())
            .unwrap();
        gap = gap.max(run.compare(m, &ledger, Some((&profile, &ec, kva0))).max());
        spread = spread.max(run.within_atom_spread(&ledger));
    }
    (gap, spread)
}

#[test]
fn oracle_equivalence() {
    let (ref_gap, ref_spread) = oracle_gap(&reference());
    let mut rand_gap: f64 = 0.0;
    let mut rand_spread: f64 = 0.0;
    for spec in random_specs(20, 2024) {
        let (g, s) = oracle_gap(&Model::build(spec).unwrap());
        rand_gap = rand_gap.max(g);
        rand_spread = rand_spread.max(s);
    }
    verdict(
        "engine against path enumeration",
        ref_gap <= 1e-10 && rand_gap <= 1e-10 && ref_spread <= 1e-10 && rand_spread <= 1e-10,
        format!(
            "reference {ref_gap:e} (spread in atom {ref_spread:e}), 20 random {rand_gap:e} (spread {rand_spread:e})"
        ),
    );
}

#[test]
fn route_identities() {
    let m = reference();
    let t = m.horizon();
    let dp = pbad_dp(&m.probs, &m.static_hedge);
    let mut pbad: f64 = 0.0;
    for k in 0..=t {
        for r in [Regime::Normal, Regime::Extreme] {
            pbad = pbad.max((dp.value(k, r) - m.static_hedge.value(&m.spec, k, r)).abs());
        }
    }
    let mut hva: f64 = 0.0;
    for trader in [TraderType::Bad, TraderType::NotSoBad] {
        let l = xva(&m, trader).unwrap();
        hva = hva.max((l.hva0() - l.hva0_closed_form).abs());
    }
    let mut price: f64 = 0.0;
    for k in 0..t {
        let (surface, hedge) = trader_price_q(m.traders.surface(k), &m.spec).unwrap();
        price = price.max((surface - hedge).abs());
    }
    verdict(
        "route identities",
        pbad <= 1e-12 && hva <= 1e-12 && price <= 1e-12,
        format!("static hedge value {pbad:e}, HVA at 0 {hva:e}, trader price {price:e}"),
    );
}

#[test]
fn bad_capital_structure() {
    let m = reference();
    let ledger = xva_bad(&m).unwrap();
    let mut resolved: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for alpha in ALPHA_GRID {
        let p = capital_and_kva(&ledger, alpha, HURDLE, EsConvention::AcerbiTasche).unwrap();
        let (r, s) = p.bad_structure_gap().unwrap();
        resolved = resolved.max(r);
        spread = spread.max(s);
        assert!((kva0_by_sum(&ledger, &p) - p.kva0).abs() <= 1e-12);
    }
    verdict(
        "bad-trader capital structure",
        resolved <= 1e-12 && spread <= 1e-12,
        format!("max |EC| on resolved atoms {resolved:e}, max spread on open atoms {spread:e}"),
    );
}

#[test]
fn q_flat_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut min_gamma = f64::INFINITY;
    for _ in 0..10 {
        let last = rng.gen_range(0.001..3.0);
        let gamma = build_q_flat_family(10, last).unwrap();
        min_gamma = gamma.iter().copied().fold(min_gamma, f64::min);
        let spec = MarketSpec::from_gamma(gamma).unwrap();
        worst = worst.max(
            solve_fair(&spec, &step_probs(&spec))
                .max_normal_value()
                .abs(),
        );
    }
    verdict(
        "flat normal-regime family",
        worst <= 1e-12 && min_gamma > 0.0,
        format!("max |fair normal value| {worst:e}, min intensity {min_gamma:e}"),
    );
}

#[test]
fn small_horizon_stopping() {
    let mut specs: Vec<MarketSpec> = (1..=6)
        .map(|t| MarketSpec::from_gamma(gamma_from_affine(0.15, 0.01, t).unwrap()).unwrap())
        .collect();
    specs.push(MarketSpec::from_gamma(vec![2.0, 2.0, 0.05, 0.05]).unwrap());
    specs.push(MarketSpec::from_gamma(vec![1.0, 0.01, 0.01, 0.01, 0.01]).unwrap());
    specs.push(MarketSpec::from_gamma(vec![0.6, 0.9, 0.02, 0.3, 0.05, 0.01]).unwrap());
    specs.extend(random_specs(4, 6).into_iter().filter(|s| s.horizon <= 6));
    let mut fair_gap: f64 = 0.0;
    let mut trader_gap: f64 = 0.0;
    let mut checked = 0;
    for spec in &specs {
        let surf = solve_fair(spec, &step_probs(spec));
        let engine = surf.value(0, Regime::Normal);
        let brute = if spec.horizon <= 4 {
            fair_stopping_max_listed(spec, 0, Regime::Normal).unwrap()
        } else {
            fair_stopping_max_tree(spec, 0, Regime::Normal)
        };
        fair_gap = fair_gap.max((engine - brute).abs());
        if let Ok(book) = TraderBook::build(spec) {
            let listed = trader_stopping_max(book.calib(0)).unwrap();
            trader_gap = trader_gap.max((book.surface(0).price() - listed).abs());
            checked += 1;
        }
    }
    verdict(
        "small-horizon optimal stopping",
        fair_gap <= 1e-12 && trader_gap <= 1e-12 && checked > 0,
        format!(
            "{} specs, fair gap {fair_gap:e}, trader gap {trader_gap:e} over {checked} calibrations",
            specs.len()
        ),
    );
}
