use serde::{Deserialize, Serialize};

use crate::regime::{binary_price_unchecked, MarketSpec, Regime};

/// Static hedge set at date `start`: long `long(ell)` binaries paying
/// `1{I_ell = -1}` and short `short(ell)` binaries paying `1{I_ell = +1}`,
/// for maturities `ell = start+1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeRatios {
    start: usize,
    long: Vec<f64>,
    short: Vec<f64>,
}

impl HedgeRatios {
    pub(crate) fn new(start: usize, long: Vec<f64>, short: Vec<f64>) -> Self {
        debug_assert_eq!(long.len(), short.len());
        HedgeRatios { start, long, short }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn horizon(&self) -> usize {
        self.start + self.long.len()
    }

    /// Ratio on the extreme-regime binary maturing at `ell > start`.
    #[inline]
    pub fn long(&self, ell: usize) -> f64 {
        self.long[ell - self.start - 1]
    }

    /// Ratio on the normal-regime binary maturing at `ell > start`.
    #[inline]
    pub fn short(&self, ell: usize) -> f64 {
        self.short[ell - self.start - 1]
    }

    pub fn longs(&self) -> &[f64] {
        &self.long
    }

    pub fn shorts(&self) -> &[f64] {
        &self.short
    }

    /// Cash flow of the hedge at maturity `ell` given the regime there.
    #[inline]
    pub fn cash(&self, ell: usize, regime: Regime) -> f64 {
        match regime {
            Regime::Extreme => self.long(ell),
            Regime::Normal => -self.short(ell),
        }
    }

    /// Fair value at `k >= start` of the legs maturing after `k`.
    pub fn value(&self, spec: &MarketSpec, k: usize, regime: Regime) -> f64 {
        (k + 1..=self.horizon())
            .map(|ell| {
                let p = binary_price_unchecked(spec, k, ell, regime);
                self.long(ell) * p - self.short(ell) * (1.0 - p)
            })
            .sum()
    }
}
