//! The trader's absorbing-state model, recalibrated at each date to the fair
//! binary term structure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair::{guarded_ratio, ZERO_TOL};
use crate::ratios::HedgeRatios;
use crate::regime::{binary_price_unchecked, MarketSpec, Regime};

/// Increments below this are calibration failures rather than rounding noise.
const NEGATIVE_INTENSITY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraderCalib {
    calib_time: usize,
    horizon: usize,
    nu: Vec<f64>,
}

impl TraderCalib {
    pub fn calib_time(&self) -> usize {
        self.calib_time
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Absorption intensity over `(l, l+1]`, `l = k..T-1`.
    #[inline]
    pub fn intensity(&self, l: usize) -> f64 {
        self.nu[l - self.calib_time]
    }

    pub fn intensities(&self) -> &[f64] {
        &self.nu
    }

    /// Model price at the calibration date of the binary maturing at `ell`.
    pub fn binary_price(&self, ell: usize) -> f64 {
        let cum: f64 = self.nu[..ell - self.calib_time].iter().sum();
        -(-cum).exp_m1()
    }
}

pub fn calibrate(spec: &MarketSpec, k: usize, regime: Regime) -> Result<TraderCalib> {
    let t = spec.horizon;
    if k > t {
        return Err(Error::IndexRange(format!(
            "calibration date {k} past horizon {t}"
        )));
    }
    if regime == Regime::Extreme {
        return Err(Error::CalibrationBreak { k });
    }
    let mut nu = Vec::with_capacity(t - k);
    let mut cum = 0.0;
    for ell in k + 1..=t {
        let p = binary_price_unchecked(spec, k, ell, Regime::Normal);
        let next = -(-p).ln_1p() - cum;
        if next < -NEGATIVE_INTENSITY_TOL {
            return Err(Error::NegativeIntensity {
                k,
                l: ell - 1,
                value: next,
            });
        }
        nu.push(next);
        cum += next;
    }
    Ok(TraderCalib {
        calib_time: k,
        horizon: t,
        nu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraderSurface {
    calib_time: usize,
    values: Vec<[f64; 2]>,
    ell_prime: usize,
}

impl TraderSurface {
    pub fn calib_time(&self) -> usize {
        self.calib_time
    }

    pub fn horizon(&self) -> usize {
        self.calib_time + self.values.len() - 1
    }

    /// Trader's callable value at `l >= k` in `regime`.
    #[inline]
    pub fn value(&self, l: usize, regime: Regime) -> f64 {
        self.values[l - self.calib_time][regime.idx()]
    }

    /// First date at which the trader calls from the normal regime.
    pub fn ell_prime(&self) -> usize {
        self.ell_prime
    }

    /// Trader's price at the calibration date.
    pub fn price(&self) -> f64 {
        self.value(self.calib_time, Regime::Normal)
    }

    pub fn calls_now(&self) -> bool {
        self.price() <= ZERO_TOL
    }
}

pub fn solve_trader(calib: &TraderCalib) -> Result<TraderSurface> {
    let (k, t) = (calib.calib_time, calib.horizon);
    let mut values = vec![[0.0; 2]; t - k + 1];
    for l in (k..t).rev() {
        let [next_up, next_down] = values[l + 1 - k];
        let survive = (-calib.intensity(l)).exp();
        let up = survive * (-1.0 + next_up) + (1.0 - survive) * (1.0 + next_down);
        values[l - k] = [up.max(0.0), (1.0 + next_down).max(0.0)];
    }
    let ell_prime = (k..=t)
        .find(|&l| values[l - k][0] <= ZERO_TOL)
        .expect("terminal value is zero");
    if let Some(positive_at) = (ell_prime..=t).find(|&l| values[l - k][0] > ZERO_TOL) {
        return Err(Error::MonotoneZeroViolation {
            k,
            zero_at: ell_prime,
            positive_at,
        });
    }
    Ok(TraderSurface {
        calib_time: k,
        values,
        ell_prime,
    })
}

/// Trader's hedge ratios at `k` from the closed forms valid under the
/// monotone-zero property of its value surface.
pub fn trader_hedge_ratios(
    surf: &TraderSurface,
    spec: &MarketSpec,
    k: usize,
    regime: Regime,
) -> Result<HedgeRatios> {
    let t = spec.horizon;
    if k != surf.calib_time() || k >= t {
        return Err(Error::IndexRange(format!(
            "trader ratios at k={k} from a surface calibrated at {}",
            surf.calib_time()
        )));
    }
    let n = t - k;
    if regime == Regime::Extreme {
        return Ok(HedgeRatios::new(k, vec![1.0; n], vec![0.0; n]));
    }
    let lp = surf.ell_prime();
    let p_at_call = binary_price_unchecked(spec, k, lp, Regime::Normal);
    let mut long = Vec::with_capacity(n);
    let mut short = Vec::with_capacity(n);
    for ell in k + 1..=t {
        if ell <= lp {
            long.push(1.0);
            short.push(1.0);
        } else {
            let p = binary_price_unchecked(spec, k, ell, Regime::Normal);
            long.push(guarded_ratio(p_at_call, p, k, ell)?);
            short.push(0.0);
        }
    }
    Ok(HedgeRatios::new(k, long, short))
}

/// Trader's price at its calibration date, from the surface and from the
/// static hedge; the two agree when the closed-form ratios are right.
pub fn trader_price_q(surf: &TraderSurface, spec: &MarketSpec) -> Result<(f64, f64)> {
    let k = surf.calib_time();
    if k == spec.horizon {
        return Ok((surf.price(), 0.0));
    }
    let ratios = trader_hedge_ratios(surf, spec, k, Regime::Normal)?;
    Ok((surf.price(), ratios.value(spec, k, Regime::Normal)))
}

/// Calibrations and value surfaces at every date `k < T` in the normal regime.
#[derive(Debug, Clone)]
pub struct TraderBook {
    calibs: Vec<TraderCalib>,
    surfaces: Vec<TraderSurface>,
}

impl TraderBook {
    pub fn build(spec: &MarketSpec) -> Result<Self> {
        let mut calibs = Vec::with_capacity(spec.horizon);
        let mut surfaces = Vec::with_capacity(spec.horizon);
        for k in 0..spec.horizon {
            let calib = calibrate(spec, k, Regime::Normal)?;
            surfaces.push(solve_trader(&calib)?);
            calibs.push(calib);
        }
        Ok(TraderBook { calibs, surfaces })
    }

    pub fn calib(&self, k: usize) -> &TraderCalib {
        &self.calibs[k]
    }

    pub fn surface(&self, k: usize) -> &TraderSurface {
        &self.surfaces[k]
    }

    pub fn surfaces(&self) -> &[TraderSurface] {
        &self.surfaces
    }

    /// Trader's own price `q^k(k,1)` at each date `k < T`.
    pub fn prices(&self) -> Vec<f64> {
        self.surfaces.iter().map(TraderSurface::price).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_calibration_curve() {
        let spec = MarketSpec::reference();
        let c = calibrate(&spec, 0, Regime::Normal).unwrap();
        let want = [
            0.134524, 0.106778, 0.083834, 0.065351, 0.050731, 0.039298, 0.030403, 0.023478,
            0.018056, 0.013766,
        ];
        for (got, want) in c.intensities().iter().zip(want) {
            assert!((got - want).abs() < 5e-7, "{got} vs {want}");
        }
        for ell in 1..=10 {
            let p = binary_price_unchecked(&spec, 0, ell, Regime::Normal);
            assert!((c.binary_price(ell) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_breaks_in_extreme_regime() {
        let spec = MarketSpec::reference();
        assert_eq!(
            calibrate(&spec, 3, Regime::Extreme),
            Err(Error::CalibrationBreak { k: 3 })
        );
        let frozen = MarketSpec::from_gamma(vec![0.0; 4]).unwrap();
        assert!(calibrate(&frozen, 0, Regime::Normal)
            .unwrap()
            .intensities()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn reference_surfaces() {
        let spec = MarketSpec::reference();
        let book = TraderBook::build(&spec).unwrap();
        let s0 = book.surface(0);
        assert!((s0.price() - 0.395691).abs() < 1e-6);
        assert_eq!(s0.ell_prime(), 2);
        for l in 0..=10 {
            assert_eq!(s0.value(l, Regime::Extreme), (10 - l) as f64);
        }
        assert!(book.surface(2).price().abs() <= ZERO_TOL);
        let (dp, hedge) = trader_price_q(s0, &spec).unwrap();
        assert!((dp - hedge).abs() < 1e-12);
    }

    #[test]
    fn ratio_shape_around_zero() {
        let spec = MarketSpec::reference();
        let book = TraderBook::build(&spec).unwrap();
        let r = trader_hedge_ratios(book.surface(0), &spec, 0, Regime::Normal).unwrap();
        assert_eq!(
            (r.long(1), r.short(1), r.long(2), r.short(2)),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!((r.long(3) - 0.7724).abs() < 1e-4);
        assert_eq!(r.short(3), 0.0);
        let dead = trader_hedge_ratios(book.surface(0), &spec, 0, Regime::Extreme).unwrap();
        assert!(dead.longs().iter().all(|a| *a == 1.0));
        assert!(dead.shorts().iter().all(|b| *b == 0.0));
    }
}
