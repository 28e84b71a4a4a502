//! Economic capital as expected shortfall of the one-period compensated loss,
//! and the KVA it implies at a hurdle rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::TraderType;
use crate::par::Exec;
use crate::partition::EventId;
use crate::regime::validate_es_level;
use crate::xva::XvaLedger;

/// Relative tolerance under which two loss values are the same atom.
const TIE_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EsConvention {
    /// Mean of the upper `1 - alpha` tail, splitting the quantile atom.
    #[default]
    AcerbiTasche,
    /// `E[L | L >= VaR]` with lower-quantile VaR.
    TailConditional,
}

/// Expected shortfall at level `alpha` of a discrete loss law `(value, prob)`.
pub fn expected_shortfall(
    outcomes: &[(f64, f64)],
    alpha: f64,
    convention: EsConvention,
) -> Result<f64> {
    validate_es_level(alpha)?;
    let mut law: Vec<(f64, f64)> = Vec::with_capacity(outcomes.len());
    let mut mass = 0.0;
    for &(x, p) in outcomes {
        if !x.is_finite() || !p.is_finite() || p < -1e-15 {
            return Err(Error::InvalidDistribution(format!("outcome ({x}, {p})")));
        }
        mass += p;
        if p > 0.0 {
            law.push((x, p));
        }
    }
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidDistribution(format!("total mass {mass}")));
    }
    law.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(law.len());
    for (x, p) in law {
        match merged.last_mut() {
            Some((y, q)) if (x - *y).abs() <= TIE_TOL * y.abs().max(1.0) => {
                *y = (*y * *q + x * p) / (*q + p);
                *q += p;
            }
            _ => merged.push((x, p)),
        }
    }

    let mut cum = 0.0;
    let mut var_at = merged.len() - 1;
    for (i, (_, p)) in merged.iter().enumerate() {
        cum += p;
        if cum >= alpha - 1e-12 {
            var_at = i;
            break;
        }
    }
    let var = merged[var_at].0;
    let tail = &merged[var_at + 1..];
    Ok(match convention {
        EsConvention::AcerbiTasche => {
            let above: f64 = tail.iter().map(|(x, p)| x * p).sum();
            (above + var * (cum - alpha)) / (1.0 - alpha)
        }
        EsConvention::TailConditional => {
            let (xs, ps) = merged[var_at..]
                .iter()
                .fold((0.0, 0.0), |(s, m), (x, p)| (s + x * p, m + p));
            xs / ps
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalProfile {
    pub trader: TraderType,
    pub alpha: f64,
    pub hurdle_rate: f64,
    pub convention: EsConvention,
    pub atoms: Vec<EventId>,
    /// `[atom][k]`, economic capital for the period `(k, k+1]`; zero at `T`.
    pub ec: Vec<Vec<f64>>,
    /// `[atom][k]`, discounted cost of future capital.
    pub kva: Vec<Vec<f64>>,
    /// KVA at 0 summed over unconditional atom probabilities.
    pub kva0: f64,
}

impl CapitalProfile {
    /// Bad trader: worst `|EC|` on resolved atoms and worst spread across unresolved ones.
    pub fn bad_structure_gap(&self) -> Option<(f64, f64)> {
        if self.trader != TraderType::Bad {
            return None;
        }
        let t = self.ec[0].len() - 1;
        let (mut resolved, mut spread): (f64, f64) = (0.0, 0.0);
        for k in 0..=t {
            let open: Vec<f64> = (k + 1..=t + 1).map(|l| self.ec[l - 1][k]).collect();
            for l in 1..=k.min(t + 1) {
                resolved = resolved.max(self.ec[l - 1][k].abs());
            }
            if let Some(first) = open.first() {
                spread = open
                    .iter()
                    .map(|e| (e - first).abs())
                    .fold(spread, f64::max);
            }
        }
        Some((resolved, spread))
    }
}

/// Capital profile at level `alpha` and hurdle rate `r` for one trader's ledger.
pub fn capital_and_kva(
    ledger: &XvaLedger,
    alpha: f64,
    hurdle_rate: f64,
    convention: EsConvention,
) -> Result<CapitalProfile> {
    validate_es_level(alpha)?;
    if !(hurdle_rate.is_finite() && hurdle_rate >= 0.0) {
        return Err(Error::InvalidSpec(format!(
            "hurdle rate {hurdle_rate} must be non-negative"
        )));
    }
    let part = &ledger.partition;
    let t = ledger.horizon();
    let n = part.len();
    let mut ec = vec![vec![0.0; t + 1]; n];
    let mut outcomes = Vec::with_capacity(n);
    for k in 0..t {
        let loss: Vec<f64> = ledger
            .rows
            .iter()
            .map(|r| r[k + 1].compensated - r[k].compensated)
            .collect();
        for (a, row) in ec.iter_mut().enumerate() {
            outcomes.clear();
            outcomes.extend(loss.iter().copied().zip(part.law(k, a).iter().copied()));
            row[k] = expected_shortfall(&outcomes, alpha, convention)?;
        }
    }

    let discount = (-hurdle_rate).exp();
    let mut kva = vec![vec![0.0; t + 1]; n];
    for k in (0..t).rev() {
        let next: Vec<f64> = kva.iter().map(|r| r[k + 1]).collect();
        for a in 0..n {
            kva[a][k] = hurdle_rate * ec[a][k] + discount * part.expect_unchecked(&next, k, a);
        }
    }
    let kva0 = (0..n).map(|a| part.unconditional(a) * kva[a][0]).sum();

    Ok(CapitalProfile {
        trader: ledger.trader,
        alpha,
        hurdle_rate,
        convention,
        atoms: part.atoms().to_vec(),
        ec,
        kva,
        kva0,
    })
}

/// KVA at 0 as the discounted sum of unconditional expected capital.
pub fn kva0_by_sum(ledger: &XvaLedger, profile: &CapitalProfile) -> f64 {
    let part = &ledger.partition;
    let t = ledger.horizon();
    let r = profile.hurdle_rate;
    r * (0..t)
        .map(|k| {
            let expected: f64 = (0..part.len())
                .map(|a| profile.ec[a][k] * part.unconditional(a))
                .sum();
            (-r * k as f64).exp() * expected
        })
        .sum::<f64>()
}

/// KVA at 0 for each level of `alphas`, evaluated with `exec`.
pub fn sweep_alpha(
    ledger: &XvaLedger,
    alphas: &[f64],
    hurdle_rate: f64,
    convention: EsConvention,
    exec: Exec,
) -> Result<Vec<f64>> {
    exec.map(alphas, |&alpha| {
        capital_and_kva(ledger, alpha, hurdle_rate, convention).map(|p| p.kva0)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass() {
        for conv in [EsConvention::AcerbiTasche, EsConvention::TailConditional] {
            assert_eq!(expected_shortfall(&[(3.5, 1.0)], 0.9, conv).unwrap(), 3.5);
        }
    }

    #[test]
    fn two_atoms() {
        let law = [(0.0, 0.9), (10.0, 0.1)];
        for conv in [EsConvention::AcerbiTasche, EsConvention::TailConditional] {
            assert!((expected_shortfall(&law, 0.95, conv).unwrap() - 10.0).abs() < 1e-12);
        }
        // quantile atom straddles alpha
        let at = expected_shortfall(&law, 0.85, EsConvention::AcerbiTasche).unwrap();
        assert!((at - 1.0 / 0.15).abs() < 1e-12);
        let tce = expected_shortfall(&law, 0.85, EsConvention::TailConditional).unwrap();
        assert!((tce - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_laws() {
        let c = EsConvention::AcerbiTasche;
        assert!(expected_shortfall(&[(1.0, 0.5)], 0.9, c).is_err());
        assert!(expected_shortfall(&[(1.0, 1.2), (0.0, -0.2)], 0.9, c).is_err());
        assert!(expected_shortfall(&[(1.0, 1.0)], 0.4, c).is_err());
        assert!(expected_shortfall(&[(f64::NAN, 1.0)], 0.9, c).is_err());
    }

    #[test]
    fn near_ties_merge() {
        let law = [(1.0, 0.5), (1.0 + 1e-15, 0.3), (2.0, 0.2)];
        let tce = expected_shortfall(&law, 0.6, EsConvention::TailConditional).unwrap();
        assert!((tce - 1.2).abs() < 1e-12);
    }
}
