//! Per-atom stopping times and static-hedge cash flows and values for the
//! two trader policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair::{fair_exercise_time, fair_hedge_ratios_on_atom};
use crate::model::Model;
use crate::partition::{regime_at, EventId, Partition};
use crate::ratios::HedgeRatios;
use crate::regime::{Regime, StepProbs};
use crate::trader::TraderBook;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraderType {
    /// Calls the claim and unwinds the hedge when its model stops calibrating.
    Bad,
    /// Switches to the fair model, rebalances the hedge and calls optimally.
    NotSoBad,
}

impl TraderType {
    pub fn label(self) -> &'static str {
        match self {
            TraderType::Bad => "bad",
            TraderType::NotSoBad => "nsb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stopping {
    /// Model-switch time: first extreme date, capped at `T`.
    pub tau_s: usize,
    /// First pre-switch date at which the trader's own model calls, else `tau_s`.
    pub theta_star: usize,
    /// Exit time of the trader.
    pub tau_e: usize,
}

impl Stopping {
    /// Whether the trader exited strictly before the model switch.
    pub fn called_pre_switch(&self) -> bool {
        self.tau_e < self.tau_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSchedule {
    pub trader: TraderType,
    pub times: Vec<Stopping>,
}

impl StoppingSchedule {
    pub fn get(&self, atom: usize) -> Stopping {
        self.times[atom]
    }
}

/// First date before the switch at which the recalibrated trader calls.
pub fn theta_star(event: EventId, traders: &TraderBook, horizon: usize) -> usize {
    let tau_s = event.switch_time(horizon);
    (0..tau_s)
        .find(|&k| traders.surface(k).calls_now())
        .unwrap_or(tau_s)
}

pub fn resolve_stopping(
    model: &Model,
    partition: &Partition,
    trader: TraderType,
) -> Result<StoppingSchedule> {
    let t = model.horizon();
    if trader == TraderType::NotSoBad {
        model.fair.require_q_flat()?;
    }
    let times = partition
        .atoms()
        .iter()
        .map(|&event| {
            let tau_s = event.switch_time(t);
            let theta = theta_star(event, &model.traders, t);
            let tau_e = match trader {
                TraderType::Bad => theta,
                TraderType::NotSoBad if theta < tau_s => theta,
                TraderType::NotSoBad => fair_exercise_time(&model.fair, event, tau_s)?,
            };
            Ok(Stopping {
                tau_s,
                theta_star: theta,
                tau_e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StoppingSchedule { trader, times })
}

/// Fair value of a static hedge set at 0, by regime, from backward induction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadValueSurface {
    values: Vec<[f64; 2]>,
}

impl BadValueSurface {
    #[inline]
    pub fn value(&self, k: usize, regime: Regime) -> f64 {
        self.values[k][regime.idx()]
    }
}

pub fn pbad_dp(sp: &StepProbs, ratios: &HedgeRatios) -> BadValueSurface {
    let t = sp.horizon();
    let mut values = vec![[0.0; 2]; t + 1];
    for k in (ratios.start()..t).rev() {
        let (u, v) = (sp.stay(k + 1), sp.flip(k + 1));
        let (a, b) = (ratios.long(k + 1), ratios.short(k + 1));
        let [next_up, next_down] = values[k + 1];
        values[k] = [
            v * a - u * b + u * next_up + v * next_down,
            u * a - v * b + v * next_up + u * next_down,
        ];
    }
    BadValueSurface { values }
}

fn regime_on(event: EventId, k: usize, horizon: usize) -> Result<Regime> {
    regime_at(event, k, horizon).ok_or(Error::RegimeUndefined { event, k })
}

/// Accumulated cash flow of `ratios` over maturities `from..=to` on `event`.
fn leg_cash(
    ratios: &HedgeRatios,
    event: EventId,
    from: usize,
    to: usize,
    horizon: usize,
) -> Result<f64> {
    (from..=to).try_fold(0.0, |acc, ell| {
        Ok(acc + ratios.cash(ell, regime_on(event, ell, horizon)?))
    })
}

/// Cash flow to date and fair value at `l` of the time-0 static hedge on `Bad(lambda)`.
pub fn pbad_on_atom(model: &Model, event: EventId, l: usize) -> Result<(f64, f64)> {
    let t = model.horizon();
    if !matches!(event, EventId::Bad(_)) || l > event.horizon(t) {
        return Err(Error::IndexRange(format!(
            "static hedge on {event} at l={l}"
        )));
    }
    let cash = leg_cash(&model.static_hedge, event, 1, l, t)?;
    let value = model
        .static_hedge
        .value(&model.spec, l, regime_on(event, l, t)?);
    Ok((cash, value))
}

/// Hedge cash flows and values per atom, stopped at the atom's exit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeLedger {
    pub trader: TraderType,
    horizon: usize,
    events: Vec<EventId>,
    tau_e: Vec<usize>,
    cash: Vec<Vec<f64>>,
    value: Vec<Vec<f64>>,
    rebalance: Vec<Option<HedgeRatios>>,
}

impl HedgeLedger {
    /// Cash flow to date and fair value at `k <= tau_e`.
    pub fn position(&self, atom: usize, k: usize) -> Result<(f64, f64)> {
        let tau_e = self.tau_e[atom];
        if k > tau_e {
            return Err(Error::PastExit {
                event: self.events[atom],
                k,
                tau_e,
            });
        }
        Ok((self.cash[atom][k], self.value[atom][k]))
    }

    /// Cash flow to date, stopped at exit.
    #[inline]
    pub fn cash(&self, atom: usize, k: usize) -> f64 {
        self.cash[atom][k.min(self.tau_e[atom])]
    }

    /// Fair value of the held hedge, stopped at exit.
    #[inline]
    pub fn value(&self, atom: usize, k: usize) -> f64 {
        self.value[atom][k.min(self.tau_e[atom])]
    }

    /// Post-switch fair hedge, for atoms that switch models before exit.
    pub fn rebalance(&self, atom: usize) -> Option<&HedgeRatios> {
        self.rebalance[atom].as_ref()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Worst one-step failure of the stopped hedge (cash + value) to be a martingale.
    pub fn martingale_gap(&self, partition: &Partition) -> f64 {
        let t = self.horizon;
        let mut worst: f64 = 0.0;
        for k in 0..t {
            let next: Vec<f64> = (0..partition.len())
                .map(|a| self.cash(a, k + 1) + self.value(a, k + 1))
                .collect();
            for a in 0..partition.len() {
                let gap =
                    partition.expect_unchecked(&next, k, a) - (self.cash(a, k) + self.value(a, k));
                worst = worst.max(gap.abs());
            }
        }
        worst
    }
}

pub fn build_hedge_ledger(
    model: &Model,
    partition: &Partition,
    schedule: &StoppingSchedule,
) -> Result<HedgeLedger> {
    match schedule.trader {
        TraderType::Bad => bad_ledger(model, partition, schedule),
        TraderType::NotSoBad => nsb_ledger(model, partition, schedule),
    }
}

fn bad_ledger(
    model: &Model,
    partition: &Partition,
    schedule: &StoppingSchedule,
) -> Result<HedgeLedger> {
    let t = model.horizon();
    let n = partition.len();
    let mut cash = Vec::with_capacity(n);
    let mut value = Vec::with_capacity(n);
    for (a, &event) in partition.atoms().iter().enumerate() {
        let tau_e = schedule.get(a).tau_e;
        let mut c = Vec::with_capacity(tau_e + 1);
        let mut v = Vec::with_capacity(tau_e + 1);
        for k in 0..=tau_e {
            let (ck, vk) = pbad_on_atom(model, event, k)?;
            c.push(ck);
            v.push(vk);
        }
        cash.push(c);
        value.push(v);
    }
    Ok(HedgeLedger {
        trader: TraderType::Bad,
        horizon: t,
        events: partition.atoms().to_vec(),
        tau_e: schedule.times.iter().map(|s| s.tau_e).collect(),
        cash,
        value,
        rebalance: vec![None; n],
    })
}

/// Whether the atom really enters the extreme regime at its switch time.
fn switches(event: EventId, horizon: usize) -> bool {
    regime_at(event, event.switch_time(horizon), horizon) == Some(Regime::Extreme)
}

/// Cash flow to `k` of the not-so-bad hedge on one atom: the static hedge up
/// to the switch, then the rebalanced fair hedge from the switch date on. The
/// rebalanced leg's term at the switch date is the spot binary, ratio 1.
fn nsb_cash(
    model: &Model,
    event: EventId,
    stop: Stopping,
    rebalance: Option<&HedgeRatios>,
    k: usize,
) -> Result<f64> {
    let t = model.horizon();
    let tau_s = stop.tau_s;
    let mut cash = leg_cash(&model.static_hedge, event, 1, k.min(tau_s), t)?;
    if k >= tau_s && stop.called_pre_switch() {
        cash += leg_cash(&model.static_hedge, event, tau_s + 1, k, t)?;
    }
    if k >= tau_s && !stop.called_pre_switch() && switches(event, t) {
        let ratios = rebalance
            .ok_or_else(|| Error::NotApplicable(format!("missing rebalance ratios on {event}")))?;
        cash += 1.0;
        cash += leg_cash(ratios, event, tau_s + 1, k, t)?;
    }
    Ok(cash)
}

fn nsb_ledger(
    model: &Model,
    partition: &Partition,
    schedule: &StoppingSchedule,
) -> Result<HedgeLedger> {
    let t = model.horizon();
    let n = partition.len();
    let spec = &model.spec;

    let mut rebalance = Vec::with_capacity(n);
    let mut cash = Vec::with_capacity(n);
    let mut exit_value = Vec::with_capacity(n);
    for (a, &event) in partition.atoms().iter().enumerate() {
        let stop = schedule.get(a);
        let ratios = if !stop.called_pre_switch() && switches(event, t) {
            Some(if stop.tau_s < t {
                fair_hedge_ratios_on_atom(&model.fair, spec, partition, stop.tau_s, a)?
            } else {
                HedgeRatios::new(t, Vec::new(), Vec::new())
            })
        } else {
            None
        };
        let c = (0..=stop.tau_e)
            .map(|k| nsb_cash(model, event, stop, ratios.as_ref(), k))
            .collect::<Result<Vec<_>>>()?;
        let regime_exit = regime_on(event, stop.tau_e, t)?;
        exit_value.push(match &ratios {
            Some(r) => r.value(spec, stop.tau_e, regime_exit),
            None => model.static_hedge.value(spec, stop.tau_e, regime_exit),
        });
        cash.push(c);
        rebalance.push(ratios);
    }

    // before exit: expected remaining hedge cash flow plus exit value
    let tau_e: Vec<usize> = schedule.times.iter().map(|s| s.tau_e).collect();
    let mut value = Vec::with_capacity(n);
    let mut remaining = vec![0.0; n];
    for a in 0..n {
        let mut v = Vec::with_capacity(tau_e[a] + 1);
        for k in 0..tau_e[a] {
            for b in 0..n {
                let stopped = k.min(tau_e[b]);
                remaining[b] = cash[b][tau_e[b]] - cash[b][stopped] + exit_value[b];
            }
            v.push(partition.expect_unchecked(&remaining, k, a));
        }
        v.push(exit_value[a]);
        value.push(v);
    }

    Ok(HedgeLedger {
        trader: TraderType::NotSoBad,
        horizon: t,
        events: partition.atoms().to_vec(),
        tau_e,
        cash,
        value,
        rebalance,
    })
}

/// Cash flow to date and fair value at `k` of the not-so-bad hedge on an atom.
pub fn pnsb_on_atom(ledger: &HedgeLedger, atom: usize, k: usize) -> Result<(f64, f64)> {
    if ledger.trader != TraderType::NotSoBad {
        return Err(Error::NotApplicable(
            "ledger is not a not-so-bad ledger".into(),
        ));
    }
    ledger.position(atom, k)
}
