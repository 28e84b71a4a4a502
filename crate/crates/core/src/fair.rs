//! Fair callable value by backward induction, its exercise rule, and the
//! fair hedge ratios of the binaries held until fair exercise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{regime_at, EventId, Partition, PartitionKind};
use crate::ratios::HedgeRatios;
use crate::regime::{binary_price_unchecked, MarketSpec, Regime, StepProbs};

/// Absolute tolerance for "value is zero" tests on the unit-nominal scale.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairSurface {
    values: Vec<[f64; 2]>,
    continuation: Vec<[f64; 2]>,
}

impl FairSurface {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn value(&self, k: usize, regime: Regime) -> f64 {
        self.values[k][regime.idx()]
    }

    pub fn continuation(&self, k: usize, regime: Regime) -> f64 {
        self.continuation[k][regime.idx()]
    }

    /// Holder calls at `k` in `regime` (ties go to exercise).
    #[inline]
    pub fn is_exercise(&self, k: usize, regime: Regime) -> bool {
        self.value(k, regime) <= ZERO_TOL
    }

    pub fn max_normal_value(&self) -> f64 {
        self.values.iter().map(|v| v[0].abs()).fold(0.0, f64::max)
    }

    /// Whether the value from the normal regime vanishes at every date.
    pub fn q_flat(&self) -> bool {
        self.max_normal_value() <= ZERO_TOL
    }

    pub(crate) fn require_q_flat(&self) -> Result<()> {
        if self.q_flat() {
            Ok(())
        } else {
            Err(Error::NormalValueNotFlat {
                max_value: self.max_normal_value(),
            })
        }
    }
}

pub fn solve_fair(spec: &MarketSpec, sp: &StepProbs) -> FairSurface {
    let t = spec.horizon;
    let mut values = vec![[0.0; 2]; t + 1];
    let mut continuation = vec![[0.0; 2]; t + 1];
    for k in (0..t).rev() {
        let coupon = (-2.0 * spec.gamma[k]).exp();
        let [next_up, next_down] = values[k + 1];
        let (u, v) = (sp.stay(k + 1), sp.flip(k + 1));
        let up = -coupon + u * next_up + v * next_down;
        let down = coupon + v * next_up + u * next_down;
        continuation[k] = [up, down];
        values[k] = [up.max(0.0), down.max(0.0)];
    }
    FairSurface {
        values,
        continuation,
    }
}

/// First date `l >= start` at which the fair holder calls on `event`, capped at `T`.
pub fn fair_exercise_time(surf: &FairSurface, event: EventId, start: usize) -> Result<usize> {
    let t = surf.horizon();
    for l in start..t {
        let regime = regime_at(event, l, t).ok_or(Error::RegimeUndefined { event, k: l })?;
        if surf.is_exercise(l, regime) {
            return Ok(l);
        }
    }
    Ok(t)
}

/// Fair hedge ratios at `(k, regime)`: the binaries' payoffs weighted by the
/// probability of still holding the claim, by forward propagation of the
/// surviving mass under the fair exercise rule.
pub fn fair_hedge_ratios(
    surf: &FairSurface,
    spec: &MarketSpec,
    sp: &StepProbs,
    k: usize,
    regime: Regime,
) -> Result<HedgeRatios> {
    let t = spec.horizon;
    if k >= t {
        return Err(Error::IndexRange(format!(
            "hedge ratios need k < {t}, got {k}"
        )));
    }
    let mut alive = [0.0; 2];
    alive[regime.idx()] = 1.0;
    let (mut long, mut short) = (Vec::with_capacity(t - k), Vec::with_capacity(t - k));
    for ell in k + 1..=t {
        // survive the call decision at ell-1, then move one period
        for r in [Regime::Normal, Regime::Extreme] {
            if surf.is_exercise(ell - 1, r) {
                alive[r.idx()] = 0.0;
            }
        }
        let [up, down] = alive;
        alive = [
            up * sp.stay(ell) + down * sp.flip(ell),
            down * sp.stay(ell) + up * sp.flip(ell),
        ];
        let p = binary_price_unchecked(spec, k, ell, regime);
        long.push(guarded_ratio(alive[1], p, k, ell)?);
        short.push(guarded_ratio(alive[0], 1.0 - p, k, ell)?);
    }
    Ok(HedgeRatios::new(k, long, short))
}

/// Fair hedge ratios at `k` on an `Nsb` atom in the extreme regime, as sums of
/// kernel probabilities over the atoms that still hold the claim at `ell`.
pub fn fair_hedge_ratios_on_atom(
    surf: &FairSurface,
    spec: &MarketSpec,
    partition: &Partition,
    k: usize,
    given: usize,
) -> Result<HedgeRatios> {
    let t = spec.horizon;
    if partition.kind() != PartitionKind::Nsb {
        return Err(Error::NotApplicable(
            "atom hedge ratios need the nsb partition".into(),
        ));
    }
    surf.require_q_flat()?;
    if k >= t {
        return Err(Error::IndexRange(format!(
            "hedge ratios need k < {t}, got {k}"
        )));
    }
    let event = partition.atoms()[given];
    if regime_at(event, k, t) != Some(Regime::Extreme) {
        return Err(Error::NotApplicable(format!(
            "atom hedge ratios need the extreme regime at k={k} on {event}"
        )));
    }
    let law = partition.law(k, given);
    let (mut long, mut short) = (Vec::with_capacity(t - k), Vec::with_capacity(t - k));
    for ell in k + 1..=t {
        let (mut num_long, mut num_short) = (0.0, 0.0);
        for (atom, p) in partition.atoms().iter().zip(law) {
            let EventId::Nsb(lam, mu) = *atom else {
                unreachable!()
            };
            let extreme = lam <= ell && ell < mu;
            if extreme {
                num_long += p;
            } else if ell <= mu {
                num_short += p;
            }
        }
        let p = binary_price_unchecked(spec, k, ell, Regime::Extreme);
        long.push(guarded_ratio(num_long, p, k, ell)?);
        short.push(guarded_ratio(num_short, 1.0 - p, k, ell)?);
    }
    Ok(HedgeRatios::new(k, long, short))
}

pub(crate) fn guarded_ratio(num: f64, den: f64, k: usize, ell: usize) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else if num.abs() <= ZERO_TOL {
        // leg never pays and is never held
        Ok(0.0)
    } else {
        Err(Error::DegenerateRatio { k, ell })
    }
}

/// Intensities for which the fair value from the normal regime is identically
/// zero, built backward from the last period's intensity.
pub fn build_q_flat_family(horizon: usize, gamma_last: f64) -> Result<Vec<f64>> {
    if horizon < 1 {
        return Err(Error::InvalidSpec("horizon must be at least 1".into()));
    }
    if !(gamma_last.is_finite() && gamma_last > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "last intensity {gamma_last} must be positive"
        )));
    }
    let mut gamma = vec![0.0; horizon];
    gamma[horizon - 1] = gamma_last;
    // value from the extreme regime at the date after the current period
    let mut down = 0.0;
    for k in (0..horizon).rev() {
        let g = gamma[k];
        down = (-2.0 * g).exp() + 0.5 * (1.0 + (-2.0 * g).exp()) * down;
        if k > 0 {
            gamma[k - 1] = 0.5 * (1.0 + 2.0 / down).ln();
        }
    }
    Ok(gamma)
}
