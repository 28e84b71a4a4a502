//! Per-atom pnl, HVA and its decomposition, and the compensated pnl.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::{
    build_hedge_ledger, resolve_stopping, HedgeLedger, StoppingSchedule, TraderType,
};
use crate::model::Model;
use crate::partition::{regime_at, EventId, Partition, PartitionKind};
use crate::regime::Regime;

/// Cumulative range-accrual coupons to `k`, stopped at `tau_e`.
pub fn accrual_cashflow(event: EventId, k: usize, tau_e: usize, horizon: usize) -> Result<f64> {
    (1..=k.min(tau_e)).try_fold(0.0, |acc, l| {
        let regime = regime_at(event, l, horizon).ok_or(Error::RegimeUndefined { event, k: l })?;
        Ok(acc + regime.coupon())
    })
}

/// One atom at one date.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct XvaPoint {
    /// Accrued coupons, stopped at exit.
    pub accrual: f64,
    pub hedge_cash: f64,
    pub hedge_value: f64,
    pub pnl: f64,
    pub xi_pnl1: f64,
    pub xi_pnl2: f64,
    pub xi_hva: f64,
    /// Expected fair value handed back at a pre-switch call.
    pub chi1: f64,
    /// Expected fair value handed back at a post-switch exit, while alive.
    pub chi2: f64,
    /// Fair value of the coupons lost to suboptimal exercise.
    pub chi3: f64,
    pub hva: f64,
    pub xi_comp: f64,
    pub chi_comp: f64,
    pub xi_incr: f64,
    pub chi_incr: f64,
    /// HVA-compensated pnl, `-pnl + HVA - HVA_0`.
    pub compensated: f64,
}

#[derive(Debug, Clone)]
pub struct XvaLedger {
    pub trader: TraderType,
    pub partition: Partition,
    pub schedule: StoppingSchedule,
    pub hedge: HedgeLedger,
    /// `[atom][k]` for `k = 0..=T`.
    pub rows: Vec<Vec<XvaPoint>>,
    /// HVA at 0 from the closed form `q_0 - E[accrual at exit] - ...`.
    pub hva0_closed_form: f64,
    /// Largest `|D|`, which vanishes when the fair normal-regime value is flat.
    pub d_gap: f64,
}

impl XvaLedger {
    pub fn horizon(&self) -> usize {
        self.partition.horizon()
    }

    pub fn hva0(&self) -> f64 {
        self.rows[0][0].hva
    }

    pub fn at(&self, atom: usize, k: usize) -> &XvaPoint {
        &self.rows[atom][k]
    }

    pub fn series(&self, f: impl Fn(&XvaPoint) -> f64, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| f(&r[k])).collect()
    }

    /// Worst one-step failure of a per-atom process to be a martingale.
    pub fn martingale_gap_of(&self, f: impl Fn(&XvaPoint) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.horizon() {
            let next = self.series(&f, k + 1);
            for (a, row) in self.rows.iter().enumerate() {
                let gap = self.partition.expect_unchecked(&next, k, a) - f(&row[k]);
                worst = worst.max(gap.abs());
            }
        }
        worst
    }

    /// Worst martingale defect of the compensated pnl.
    pub fn martingale_gap(&self) -> f64 {
        self.martingale_gap_of(|p| p.compensated)
    }

    /// Largest `|HVA_0(atom) - HVA_0|`; zero unless the date-0 law depends on the atom.
    pub fn hva0_spread(&self) -> f64 {
        let h = self.hva0();
        self.rows
            .iter()
            .map(|r| (r[0].hva - h).abs())
            .fold(0.0, f64::max)
    }
}

pub fn xva_bad(model: &Model) -> Result<XvaLedger> {
    xva(model, TraderType::Bad)
}

pub fn xva_nsb(model: &Model) -> Result<XvaLedger> {
    xva(model, TraderType::NotSoBad)
}

pub fn xva(model: &Model, trader: TraderType) -> Result<XvaLedger> {
    let partition = match trader {
        TraderType::Bad => Partition::new(PartitionKind::Bad, &model.probs),
        TraderType::NotSoBad => Partition::new(PartitionKind::Nsb, &model.probs),
    };
    let schedule = resolve_stopping(model, &partition, trader)?;
    let hedge = build_hedge_ledger(model, &partition, &schedule)?;
    let t = model.horizon();
    let n = partition.len();
    let atoms = partition.atoms();

    // exit-time atom maps
    let mut exit_call_pre = vec![0.0; n];
    let mut exit_call_post = vec![0.0; n];
    let mut exit_accrual_and_value = vec![0.0; n];
    let mut accrual_at_exit = vec![0.0; n];
    for (a, &event) in atoms.iter().enumerate() {
        let stop = schedule.get(a);
        let regime = regime_at(event, stop.tau_e, t).ok_or(Error::RegimeUndefined {
            event,
            k: stop.tau_e,
        })?;
        let fair_exit = model.fair.value(stop.tau_e, regime);
        let accrual = accrual_cashflow(event, stop.tau_e, stop.tau_e, t)?;
        accrual_at_exit[a] = accrual;
        exit_accrual_and_value[a] = accrual + fair_exit;
        if stop.called_pre_switch() {
            exit_call_pre[a] = match trader {
                TraderType::Bad => fair_exit,
                TraderType::NotSoBad => {
                    let static_exit = model.static_values.value(stop.tau_e, regime);
                    fair_exit - (hedge.value(a, stop.tau_e) - static_exit)
                }
            };
        } else {
            exit_call_post[a] = fair_exit;
        }
    }

    let mut rows = Vec::with_capacity(n);
    for (a, &event) in atoms.iter().enumerate() {
        let stop = schedule.get(a);
        let mut row = Vec::with_capacity(t + 1);
        for k in 0..=t {
            let j = k.min(stop.tau_e);
            let regime = regime_at(event, j, t).ok_or(Error::RegimeUndefined { event, k: j })?;
            let pre_switch = j < stop.tau_s;
            let alive = k < stop.tau_e;
            let accrual = accrual_cashflow(event, k, stop.tau_e, t)?;
            let fair_now = model.fair.value(j, regime);
            let trader_now = if pre_switch {
                model.traders.surface(j).price()
            } else {
                0.0
            };
            let marked = if pre_switch { trader_now } else { fair_now };
            let (cash, value) = (hedge.cash(a, k), hedge.value(a, k));
            let static_now = model.static_values.value(j, regime);

            let chi1 = partition.expect_unchecked(&exit_call_pre, k, a);
            let expected_exit = partition.expect_unchecked(&exit_accrual_and_value, k, a);
            let chi3 = accrual + fair_now - expected_exit;
            let mut p = XvaPoint {
                accrual,
                hedge_cash: cash,
                hedge_value: value,
                chi1,
                chi3,
                ..XvaPoint::default()
            };
            match trader {
                TraderType::Bad => {
                    p.xi_pnl1 = accrual + marked - (cash + value);
                    p.xi_pnl2 = if !alive && !stop.called_pre_switch() {
                        model.fair.value(stop.tau_e, regime)
                    } else {
                        0.0
                    };
                    p.xi_hva = if pre_switch {
                        trader_now - fair_now
                    } else {
                        0.0
                    };
                    p.chi2 = if alive {
                        partition.expect_unchecked(&exit_call_post, k, a)
                    } else {
                        0.0
                    };
                    p.xi_comp = -(accrual + fair_now) + cash + value + p.xi_pnl2;
                }
                TraderType::NotSoBad => {
                    let held = if pre_switch { static_now } else { value };
                    p.xi_pnl1 = accrual + marked - (cash + held);
                    p.xi_hva = if pre_switch {
                        trader_now - fair_now - (static_now - value)
                    } else {
                        0.0
                    };
                    p.xi_comp = -(accrual + fair_now) + cash + value;
                }
            }
            p.pnl = p.xi_pnl1 - p.xi_pnl2;
            p.chi_comp = p.chi1 + p.chi2 + p.chi3;
            p.hva = p.xi_hva + p.chi_comp;
            row.push(p);
        }
        rows.push(row);
    }

    let hva0 = rows[0][0].hva;
    for row in rows.iter_mut() {
        let (xi0, chi0) = (row[0].xi_comp, row[0].chi_comp);
        for k in 0..=t {
            let next = (k + 1).min(t);
            row[k].xi_incr = row[next].xi_comp - row[k].xi_comp;
            row[k].chi_incr = row[next].chi_comp - row[k].chi_comp;
            row[k].compensated = -row[k].pnl + row[k].hva - hva0;
            debug_assert!(
                (row[k].compensated - (row[k].xi_comp + row[k].chi_comp - xi0 - chi0)).abs() < 1e-9
            );
        }
    }

    let q0 = model.trader_price();
    let mean_exit_accrual: f64 = (0..n)
        .map(|a| partition.unconditional(a) * accrual_at_exit[a])
        .sum();
    let hva0_closed_form = match trader {
        TraderType::Bad => q0 - mean_exit_accrual,
        TraderType::NotSoBad => {
            let p0 = model.static_values.value(0, Regime::Normal);
            let nsb0 = hedge.value(0, 0);
            let switch_gap: f64 = (0..n)
                .filter(|&a| schedule.get(a).called_pre_switch())
                .map(|a| {
                    let stop = schedule.get(a);
                    let r = regime_at(atoms[a], stop.tau_e, t).expect("checked above");
                    partition.unconditional(a)
                        * (hedge.value(a, stop.tau_e) - model.static_values.value(stop.tau_e, r))
                })
                .sum();
            q0 - mean_exit_accrual - (p0 - nsb0) - switch_gap
        }
    };
    let d_gap = match trader {
        TraderType::Bad => 0.0,
        TraderType::NotSoBad => rows
            .iter()
            .flat_map(|r| r.iter().map(|p| p.chi1.abs()))
            .fold(0.0, f64::max),
    };

    Ok(XvaLedger {
        trader,
        partition,
        schedule,
        hedge,
        rows,
        hva0_closed_form,
        d_gap,
    })
}

/// The jump of the pre-exit pnl across the model switch on `Bad(lambda)`,
/// split into hedge/cash-flow slippage and the loss from changing models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchDecomposition {
    pub tau_s: usize,
    pub hedge_slippage: f64,
    pub model_change: f64,
}

pub fn pnl_switch_decomposition(
    model: &Model,
    ledger: &XvaLedger,
    lambda: usize,
) -> Result<SwitchDecomposition> {
    let t = model.horizon();
    let event = EventId::Bad(lambda);
    if ledger.trader != TraderType::Bad {
        return Err(Error::NotApplicable(
            "switch decomposition needs the bad ledger".into(),
        ));
    }
    let a = ledger
        .partition
        .index_of(event)
        .ok_or_else(|| Error::IndexRange(format!("{event} outside the partition")))?;
    let stop = ledger.schedule.get(a);
    if lambda > t || stop.tau_e != stop.tau_s {
        return Err(Error::NotApplicable(format!(
            "{event} has no model switch before exit (tau_s={}, tau_e={})",
            stop.tau_s, stop.tau_e
        )));
    }
    let ts = stop.tau_s;
    // trader's value of the remaining coupons once absorbed
    let rest = (t - ts) as f64;
    let held_after: f64 = (ts + 1..=t).map(|l| model.static_hedge.long(l)).sum();
    let row = &ledger.rows[a];
    let hedge_slippage = row[ts].accrual - row[ts - 1].accrual + rest
        - model.traders.surface(ts - 1).price()
        - (row[ts].hedge_cash - row[ts - 1].hedge_cash + held_after - row[ts - 1].hedge_value);
    let model_change =
        model.fair.value(ts, Regime::Extreme) - rest - (row[ts].hedge_value - held_after);
    Ok(SwitchDecomposition {
        tau_s: ts,
        hedge_slippage,
        model_change,
    })
}
