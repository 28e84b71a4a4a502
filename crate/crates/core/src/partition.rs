//! Finite event partitions on which every trader-relevant process is constant.
//!
//! `Bad(l)` is the event "extreme regime first seen at `l`" (`l = T+1`: never).
//! `Nsb(l, m)` additionally records the first return to normal at `m`
//! (`m = T+1`: never), with `Nsb(T+1, T+1)` the all-normal event.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regime::{Regime, RegimePath, StepProbs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventId {
    Bad(usize),
    Nsb(usize, usize),
}

impl EventId {
    /// Last date at which the regime on this event is determined.
    pub fn horizon(self, horizon: usize) -> usize {
        match self {
            EventId::Bad(l) => l.min(horizon),
            EventId::Nsb(_, m) => m.min(horizon),
        }
    }

    /// First extreme date capped at `T`, i.e. the model-switch time.
    pub fn switch_time(self, horizon: usize) -> usize {
        match self {
            EventId::Bad(l) | EventId::Nsb(l, _) => l.min(horizon),
        }
    }

    pub fn label(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventId::Bad(l) => write!(f, "bad({l})"),
            EventId::Nsb(l, m) => write!(f, "nsb({l},{m})"),
        }
    }
}

pub fn enumerate_bad(horizon: usize) -> Vec<EventId> {
    (1..=horizon + 1).map(EventId::Bad).collect()
}

pub fn enumerate_nsb(horizon: usize) -> Vec<EventId> {
    let mut atoms: Vec<EventId> = (1..=horizon)
        .flat_map(|l| (l + 1..=horizon + 1).map(move |m| EventId::Nsb(l, m)))
        .collect();
    atoms.push(EventId::Nsb(horizon + 1, horizon + 1));
    atoms
}

/// Regime at `k` on `event`, `None` past the event's determination horizon.
pub fn regime_at(event: EventId, k: usize, horizon: usize) -> Option<Regime> {
    if k > event.horizon(horizon) {
        return None;
    }
    let extreme = match event {
        EventId::Bad(l) => k == l,
        EventId::Nsb(l, m) => l <= k && k < m,
    };
    Some(if extreme {
        Regime::Extreme
    } else {
        Regime::Normal
    })
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Time-`k` probability of `Bad(target)` on `Bad(given)`.
pub fn cond_prob_bad(sp: &StepProbs, k: usize, target: usize, given: usize) -> f64 {
    let horizon = sp.horizon();
    if target <= horizon {
        ind(k >= target) * ind(given == target)
            + ind(k < target)
                * ind(given > k)
                * sp.stay_product(k + 1, target - 1)
                * sp.flip(target)
    } else {
        ind(given > k) * sp.stay_product(k + 1, horizon)
    }
}

/// Time-`k` probability of `Nsb(target)` on `Nsb(given)`.
pub fn cond_prob_nsb(
    sp: &StepProbs,
    k: usize,
    target: (usize, usize),
    given: (usize, usize),
) -> f64 {
    let horizon = sp.horizon();
    let (lam, mu) = target;
    let (l, m) = given;
    let first_known = k >= l.min(lam);
    if mu <= horizon {
        let compat = ind(!first_known)
            + ind(first_known)
                * ind(l == lam)
                * (ind(k < m.min(mu)) + ind(k >= m.min(mu)) * ind(m == mu));
        let tail = ind(k >= mu)
            + ind(lam <= k && k < mu) * sp.stay_product(k + 1, mu - 1) * sp.flip(mu)
            + ind(k < lam)
                * sp.stay_product(k + 1, lam - 1)
                * sp.flip(lam)
                * sp.stay_product(lam + 1, mu - 1)
                * sp.flip(mu);
        compat * tail
    } else if lam <= horizon {
        let compat = ind(!first_known) + ind(first_known) * ind(l == lam) * ind(k < m);
        let tail = ind(k >= lam) * sp.stay_product(k + 1, horizon)
            + ind(k < lam)
                * sp.stay_product(k + 1, lam - 1)
                * sp.flip(lam)
                * sp.stay_product(lam + 1, horizon);
        compat * tail
    } else {
        ind(k < l) * sp.stay_product(k + 1, horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionKind {
    Bad,
    Nsb,
}

/// Atoms of one partition with their dense conditional-probability kernel.
#[derive(Debug, Clone)]
pub struct Partition {
    kind: PartitionKind,
    horizon: usize,
    atoms: Vec<EventId>,
    // [k][given][target]
    kernel: Vec<f64>,
}

impl Partition {
    pub fn new(kind: PartitionKind, sp: &StepProbs) -> Self {
        let horizon = sp.horizon();
        let atoms = match kind {
            PartitionKind::Bad => enumerate_bad(horizon),
            PartitionKind::Nsb => enumerate_nsb(horizon),
        };
        let n = atoms.len();
        let mut kernel = Vec::with_capacity((horizon + 1) * n * n);
        for k in 0..=horizon {
            for given in &atoms {
                for target in &atoms {
                    kernel.push(match (*target, *given) {
                        (EventId::Bad(lam), EventId::Bad(l)) => cond_prob_bad(sp, k, lam, l),
                        (EventId::Nsb(lam, mu), EventId::Nsb(l, m)) => {
                            cond_prob_nsb(sp, k, (lam, mu), (l, m))
                        }
                        _ => unreachable!("atoms of one partition share a variant"),
                    });
                }
            }
        }
        Partition {
            kind,
            horizon,
            atoms,
            kernel,
        }
    }

    pub fn bad(sp: &StepProbs) -> Self {
        Self::new(PartitionKind::Bad, sp)
    }

    pub fn nsb(sp: &StepProbs) -> Self {
        Self::new(PartitionKind::Nsb, sp)
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn atoms(&self) -> &[EventId] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn index_of(&self, event: EventId) -> Option<usize> {
        let t = self.horizon;
        match (self.kind, event) {
            (PartitionKind::Bad, EventId::Bad(l)) if (1..=t + 1).contains(&l) => Some(l - 1),
            (PartitionKind::Nsb, EventId::Nsb(l, m)) if l == t + 1 && m == t + 1 => {
                Some(self.atoms.len() - 1)
            }
            (PartitionKind::Nsb, EventId::Nsb(l, m)) if 1 <= l && l < m && m <= t + 1 => {
                // rows l' < l contribute (T + 1 - l') atoms each
                let before: usize = (1..l).map(|lp| t + 1 - lp).sum();
                Some(before + (m - l - 1))
            }
            _ => None,
        }
    }

    /// Conditional law at `k` on atom `given`, as a row over target atoms.
    #[inline]
    pub fn law(&self, k: usize, given: usize) -> &[f64] {
        let n = self.atoms.len();
        let start = (k * n + given) * n;
        &self.kernel[start..start + n]
    }

    #[inline]
    pub fn prob(&self, k: usize, target: usize, given: usize) -> f64 {
        self.law(k, given)[target]
    }

    /// Unconditional probability of an atom.
    pub fn unconditional(&self, target: usize) -> f64 {
        self.prob(0, target, target)
    }

    /// `sum_atoms values(atom) * P_k[atom | given]`
    pub fn expect(&self, values: &[f64], k: usize, given: usize) -> Result<f64> {
        if values.len() != self.atoms.len() {
            return Err(Error::IncompleteAtomMap {
                expected: self.atoms.len(),
                got: values.len(),
            });
        }
        if k > self.horizon || given >= self.atoms.len() {
            return Err(Error::IndexRange(format!(
                "expectation at k={k} on atom index {given}"
            )));
        }
        Ok(self.expect_unchecked(values, k, given))
    }

    #[inline]
    pub(crate) fn expect_unchecked(&self, values: &[f64], k: usize, given: usize) -> f64 {
        self.law(k, given)
            .iter()
            .zip(values)
            .map(|(p, x)| p * x)
            .sum()
    }

    /// Atom containing a full regime path.
    pub fn atom_of_path(&self, path: &RegimePath) -> usize {
        let t = self.horizon;
        let first_extreme = (1..=t).find(|&l| path.at(l) == Regime::Extreme);
        let event = match (self.kind, first_extreme) {
            (PartitionKind::Bad, first) => EventId::Bad(first.unwrap_or(t + 1)),
            (PartitionKind::Nsb, None) => EventId::Nsb(t + 1, t + 1),
            (PartitionKind::Nsb, Some(l)) => {
                let back = (l + 1..=t).find(|&m| path.at(m) == Regime::Normal);
                EventId::Nsb(l, back.unwrap_or(t + 1))
            }
        };
        self.index_of(event)
            .expect("path atoms belong to the partition")
    }
}
