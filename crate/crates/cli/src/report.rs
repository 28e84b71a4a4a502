use std::fs;
use std::path::Path;

use anyhow::Context;
use hva_core::capital::{kva0_by_sum, sweep_alpha};
use hva_core::oracle::{Discrepancies, OracleRun, PATH_CAP};
use hva_core::{
    binary_price, capital_and_kva, pnl_switch_decomposition, xva, CapitalProfile, EsConvention,
    Exec, Model, Partition, Regime, TraderType, XvaLedger,
};
use serde::Serialize;

use crate::config::ScenarioConfig;

pub const MARTINGALE_TOL: f64 = 1e-12;
pub const ROUTE_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub ok: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            ok: value <= tolerance,
        }
    }
}

pub struct TraderRun {
    pub trader: TraderType,
    pub ledger: XvaLedger,
    pub capital: CapitalProfile,
    pub oracle: Option<Discrepancies>,
    pub checks: Vec<Check>,
}

pub struct Analysis {
    pub config: ScenarioConfig,
    pub model: Model,
    pub runs: Vec<TraderRun>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Analysis {
    pub fn ok(&self) -> bool {
        self.checks
            .iter()
            .chain(self.runs.iter().flat_map(|r| &r.checks))
            .all(|c| c.ok)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .chain(self.runs.iter().flat_map(|r| &r.checks))
            .filter(|c| !c.ok)
            .collect()
    }
}

fn kernel_defect(part: &Partition) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..=part.horizon() {
        for given in 0..part.len() {
            let law = part.law(k, given);
            let neg = law.iter().fold(0.0f64, |w, p| w.min(*p));
            worst = worst.max((law.iter().sum::<f64>() - 1.0).abs()).max(-neg);
        }
    }
    worst
}

fn run_trader(
    model: &Model,
    trader: TraderType,
    config: &ScenarioConfig,
    oracle: bool,
) -> hva_core::Result<TraderRun> {
    let convention: EsConvention = config.es_convention.into();
    let ledger = xva(model, trader)?;
    let capital = capital_and_kva(&ledger, config.es_level, config.hurdle_rate, convention)?;
    let label = trader.label();
    let mut checks = vec![
        Check::new(
            format!("{label}: martingale gap"),
            ledger.martingale_gap(),
            MARTINGALE_TOL,
        ),
        Check::new(
            format!("{label}: HVA at 0 routes"),
            (ledger.hva0() - ledger.hva0_closed_form).abs(),
            ROUTE_TOL,
        ),
        Check::new(
            format!("{label}: KVA at 0 routes"),
            (kva0_by_sum(&ledger, &capital) - capital.kva0).abs(),
            ROUTE_TOL,
        ),
        Check::new(
            format!("{label}: D against its flat-value form"),
            ledger.d_gap,
            ROUTE_TOL,
        ),
    ];
    let oracle = if oracle && model.horizon() <= PATH_CAP {
        let run = OracleRun::run(model, trader, Exec::default())?;
        let (ec, kva0) = run.capital(
            config.es_level,
            config.hurdle_rate,
            convention,
            Exec::default(),
        )?;
        let d = run.compare(model, &ledger, Some((&capital, &ec, kva0)));
        checks.push(Check::new(
            format!("{label}: oracle discrepancy"),
            d.max(),
            ORACLE_TOL,
        ));
        checks.push(Check::new(
            format!("{label}: oracle spread within atoms"),
            run.within_atom_spread(&ledger),
            ORACLE_TOL,
        ));
        Some(d)
    } else {
        None
    };
    Ok(TraderRun {
        trader,
        ledger,
        capital,
        oracle,
        checks,
    })
}

pub fn analyze(config: ScenarioConfig) -> anyhow::Result<Analysis> {
    let spec = config.market_spec()?;
    let model = Model::build(spec)?;
    let oracle = config.emit.oracle_check;
    let traders = config.trader.traders();
    let runs = Exec::default()
        .map(&traders, |&t| run_trader(&model, t, &config, oracle))
        .into_iter()
        .collect::<hva_core::Result<Vec<_>>>()?;
    let checks = vec![
        Check::new(
            "bad kernel normalization",
            kernel_defect(&Partition::bad(&model.probs)),
            ROUTE_TOL,
        ),
        Check::new(
            "nsb kernel normalization",
            kernel_defect(&Partition::nsb(&model.probs)),
            ROUTE_TOL,
        ),
    ];
    let mut notes = Vec::new();
    if oracle && model.horizon() > PATH_CAP {
        notes.push(format!(
            "oracle check skipped: horizon {} is above the enumeration cap {PATH_CAP}",
            model.horizon()
        ));
    }
    Ok(Analysis {
        config,
        model,
        runs,
        checks,
        notes,
    })
}

#[derive(Serialize)]
struct Money {
    value: f64,
    display: f64,
}

impl Money {
    fn new(unit: f64, nominal: f64) -> Self {
        let value = unit * nominal;
        Money {
            value,
            display: value.round(),
        }
    }
}

#[derive(Serialize)]
struct TraderSummary {
    trader: &'static str,
    hva0: Money,
    kva0: Money,
    hva_to_kva: f64,
    martingale_gap: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ScenarioConfig,
    horizon: usize,
    gamma: &'a [f64],
    fair_price: Money,
    trader_price: Money,
    traders: Vec<TraderSummary>,
    checks: Vec<&'a Check>,
    notes: &'a [String],
    ok: bool,
}

#[derive(Serialize)]
struct SwitchRow {
    atom: String,
    tau_s: usize,
    hedge_slippage: Money,
    model_change: Money,
}

#[derive(Serialize)]
struct SeriesRow<'a> {
    atom: String,
    k: usize,
    quantity: &'a str,
    value: f64,
    display: String,
}

#[derive(Serialize)]
struct CurveRow {
    k: usize,
    gamma: Option<f64>,
    trader_intensity: Option<f64>,
    fair_normal: f64,
    fair_extreme: f64,
    trader_value: f64,
    binary_price: Option<f64>,
    static_long: Option<f64>,
    static_short: Option<f64>,
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn summary_json(a: &Analysis) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(&summary(a))?)
}

fn summary(a: &Analysis) -> Summary<'_> {
    let n = a.config.nominal;
    Summary {
        config: &a.config,
        horizon: a.model.horizon(),
        gamma: &a.model.spec.gamma,
        fair_price: Money::new(a.model.fair_price(), n),
        trader_price: Money::new(a.model.trader_price(), n),
        traders: a
            .runs
            .iter()
            .map(|r| TraderSummary {
                trader: r.trader.label(),
                hva0: Money::new(r.ledger.hva0(), n),
                kva0: Money::new(r.capital.kva0, n),
                hva_to_kva: r.ledger.hva0() / r.capital.kva0,
                martingale_gap: r.ledger.martingale_gap(),
            })
            .collect(),
        checks: a
            .checks
            .iter()
            .chain(a.runs.iter().flat_map(|r| &r.checks))
            .collect(),
        notes: &a.notes,
        ok: a.ok(),
    }
}

/// Writes every requested output file under the configured directory.
pub fn emit(a: &Analysis) -> anyhow::Result<Vec<String>> {
    let dir = &a.config.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let n = a.config.nominal;
    let mut written = vec!["summary.json".to_string()];
    write_json(&dir.join("summary.json"), &summary(a))?;

    if a.config.emit.tables {
        let mut switch_rows = Vec::new();
        if let Some(bad) = a.runs.iter().find(|r| r.trader == TraderType::Bad) {
            for lambda in 1..=a.model.horizon() {
                if let Ok(d) = pnl_switch_decomposition(&a.model, &bad.ledger, lambda) {
                    switch_rows.push(SwitchRow {
                        atom: format!("bad({lambda})"),
                        tau_s: d.tau_s,
                        hedge_slippage: Money::new(d.hedge_slippage, n),
                        model_change: Money::new(d.model_change, n),
                    });
                }
            }
        }
        write_json(&dir.join("switch_pnl.json"), &switch_rows)?;
        let xva_rows: Vec<_> = a
            .runs
            .iter()
            .map(|r| {
                serde_json::json!({
                    "trader": r.trader.label(),
                    "hva0": Money::new(r.ledger.hva0(), n),
                    "kva0": Money::new(r.capital.kva0, n),
                })
            })
            .collect();
        write_json(&dir.join("adjustments.json"), &xva_rows)?;
        written.extend(["switch_pnl.json".into(), "adjustments.json".into()]);
    }

    if a.config.emit.series {
        for r in &a.runs {
            let name = format!("series_{}.csv", r.trader.label());
            write_series(&dir.join(&name), r, n)?;
            written.push(name);
        }
    }

    if a.config.emit.curves {
        write_curves(&dir.join("curves.csv"), &a.model)?;
        written.push("curves.csv".into());
    }

    if a.config.emit.oracle_check {
        let report: Vec<_> = a
            .runs
            .iter()
            .map(|r| {
                serde_json::json!({
                    "trader": r.trader.label(),
                    "discrepancies": r.oracle,
                    "max": r.oracle.map(|d| d.max()),
                    "tolerance": ORACLE_TOL,
                })
            })
            .collect();
        write_json(
            &dir.join("oracle_check.json"),
            &serde_json::json!({ "traders": report, "notes": a.notes }),
        )?;
        written.push("oracle_check.json".into());
    }
    Ok(written)
}

fn write_series(path: &Path, r: &TraderRun, nominal: f64) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let t = r.ledger.horizon();
    for (a, event) in r.ledger.partition.atoms().iter().enumerate() {
        for k in 0..=t {
            let p = r.ledger.at(a, k);
            let quantities = [
                ("pnl", p.pnl),
                ("hva", p.hva),
                ("compensated", p.compensated),
                ("ec", r.capital.ec[a][k]),
                ("kva", r.capital.kva[a][k]),
            ];
            for (quantity, unit) in quantities {
                let value = unit * nominal;
                w.serialize(SeriesRow {
                    atom: event.to_string(),
                    k,
                    quantity,
                    value,
                    display: format!("{value:.2}"),
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_curves(path: &Path, model: &Model) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let t = model.horizon();
    let calib = model.traders.calib(0);
    let surf = model.traders.surface(0);
    for k in 0..=t {
        let (binary, long, short) = if k >= 1 {
            (
                Some(binary_price(&model.spec, 0, k, Regime::Normal)?),
                Some(model.static_hedge.long(k)),
                Some(model.static_hedge.short(k)),
            )
        } else {
            (None, None, None)
        };
        w.serialize(CurveRow {
            k,
            gamma: model.spec.gamma.get(k).copied(),
            trader_intensity: (k < t).then(|| calib.intensity(k)),
            fair_normal: model.fair.value(k, Regime::Normal) * model.spec.nominal,
            fair_extreme: model.fair.value(k, Regime::Extreme) * model.spec.nominal,
            trader_value: surf.value(k, Regime::Normal) * model.spec.nominal,
            binary_price: binary,
            static_long: long,
            static_short: short,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub bad: Option<f64>,
    pub nsb: Option<f64>,
    pub hit: bool,
}

/// KVA at 0 at nominal scale for each level, flagging rows whose rounded
/// values equal `target` for both traders.
pub fn sweep(
    a: &Analysis,
    grid: &[f64],
    target: Option<(f64, f64)>,
) -> anyhow::Result<Vec<SweepRow>> {
    let n = a.config.nominal;
    let conv: EsConvention = a.config.es_convention.into();
    let per = |t: TraderType| -> anyhow::Result<Option<Vec<f64>>> {
        a.runs
            .iter()
            .find(|r| r.trader == t)
            .map(|r| sweep_alpha(&r.ledger, grid, a.config.hurdle_rate, conv, Exec::default()))
            .transpose()
            .map_err(Into::into)
    };
    let bad = per(TraderType::Bad)?;
    let nsb = per(TraderType::NotSoBad)?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let b = bad.as_ref().map(|v| v[i] * n);
            let s = nsb.as_ref().map(|v| v[i] * n);
            let hit = match (target, b, s) {
                (Some((tb, ts)), Some(b), Some(s)) => b.round() == tb && s.round() == ts,
                _ => false,
            };
            SweepRow {
                alpha,
                bad: b,
                nsb: s,
                hit,
            }
        })
        .collect())
}
