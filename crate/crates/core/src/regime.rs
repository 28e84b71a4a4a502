//! Two-state fair regime model on a yearly grid `0..=T`.
//!
//! The regime starts normal and flips with per-period intensity `gamma[k]`
//! over `(k, k+1]`. Only flip parities matter, so a period either keeps the
//! regime (probability `stay`) or flips it (probability `flip`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `I = +1`
    Normal,
    /// `I = -1`
    Extreme,
}

impl Regime {
    pub fn sign(self) -> i8 {
        match self {
            Regime::Normal => 1,
            Regime::Extreme => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Regime::Normal => Regime::Extreme,
            Regime::Extreme => Regime::Normal,
        }
    }

    /// Range-accrual coupon earned in this regime.
    pub fn coupon(self) -> f64 {
        match self {
            Regime::Normal => -1.0,
            Regime::Extreme => 1.0,
        }
    }

    pub(crate) fn idx(self) -> usize {
        match self {
            Regime::Normal => 0,
            Regime::Extreme => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub horizon: usize,
    pub gamma: Vec<f64>,
    pub nominal: f64,
    pub hurdle_rate: f64,
    pub es_level: f64,
}

impl MarketSpec {
    pub const DEFAULT_NOMINAL: f64 = 100.0;
    pub const DEFAULT_HURDLE: f64 = 0.10;
    pub const DEFAULT_ES_LEVEL: f64 = 0.975;

    /// Spec with default nominal, hurdle rate and ES level; horizon is `gamma.len()`.
    pub fn from_gamma(gamma: Vec<f64>) -> Result<Self> {
        Self::new(
            gamma,
            Self::DEFAULT_NOMINAL,
            Self::DEFAULT_HURDLE,
            Self::DEFAULT_ES_LEVEL,
        )
    }

    pub fn new(gamma: Vec<f64>, nominal: f64, hurdle_rate: f64, es_level: f64) -> Result<Self> {
        let spec = MarketSpec {
            horizon: gamma.len(),
            gamma,
            nominal,
            hurdle_rate,
            es_level,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Ten-year scenario with the affine intensity 0.15 decaying to 0.05.
    pub fn reference() -> Self {
        let gamma = gamma_from_affine(0.15, 0.01, 10).expect("reference intensities are positive");
        Self::from_gamma(gamma).expect("reference spec is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidSpec("horizon must be at least 1".into()));
        }
        if self.gamma.len() != self.horizon {
            return Err(Error::InvalidSpec(format!(
                "expected {} intensities, got {}",
                self.horizon,
                self.gamma.len()
            )));
        }
        if let Some((k, g)) = self
            .gamma
            .iter()
            .enumerate()
            .find(|(_, g)| !g.is_finite() || **g < 0.0)
        {
            return Err(Error::InvalidSpec(format!(
                "gamma[{k}] = {g} is not a non-negative number"
            )));
        }
        if !(self.nominal.is_finite() && self.nominal > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "nominal {} must be positive",
                self.nominal
            )));
        }
        if !(self.hurdle_rate.is_finite() && self.hurdle_rate >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "hurdle rate {} must be non-negative",
                self.hurdle_rate
            )));
        }
        validate_es_level(self.es_level)
    }

    /// `sum_{l=k}^{ell-1} gamma_l`
    pub fn integrated_intensity(&self, k: usize, ell: usize) -> f64 {
        self.gamma[k..ell].iter().sum()
    }
}

pub(crate) fn validate_es_level(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "ES level {alpha} must lie in (1/2, 1)"
        )))
    }
}

/// Per-period intensities obtained by integrating `c0 - slope * s` over `[k, k+1]`.
pub fn gamma_from_affine(c0: f64, slope: f64, horizon: usize) -> Result<Vec<f64>> {
    let gamma: Vec<f64> = (0..horizon)
        .map(|k| c0 - 0.5 * slope * (2 * k + 1) as f64)
        .collect();
    match gamma.iter().position(|g| !g.is_finite() || *g < 0.0) {
        Some(k) => Err(Error::InvalidSpec(format!(
            "affine intensity ({c0}, {slope}) gives gamma[{k}] = {}",
            gamma[k]
        ))),
        None => Ok(gamma),
    }
}

/// One-period stay/flip probabilities, indexed by period end `l = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProbs {
    stay: Vec<f64>,
    flip: Vec<f64>,
}

impl StepProbs {
    pub fn horizon(&self) -> usize {
        self.stay.len()
    }

    /// Probability the regime does not flip over `(l-1, l]`.
    #[inline]
    pub fn stay(&self, l: usize) -> f64 {
        self.stay[l - 1]
    }

    /// Probability the regime flips over `(l-1, l]`.
    #[inline]
    pub fn flip(&self, l: usize) -> f64 {
        self.flip[l - 1]
    }

    /// Probability of moving from `from` at `l-1` to `to` at `l`.
    #[inline]
    pub fn transition(&self, l: usize, from: Regime, to: Regime) -> f64 {
        if from == to {
            self.stay(l)
        } else {
            self.flip(l)
        }
    }

    /// `prod_{r=from}^{to} stay(r)`, empty product is 1.
    pub fn stay_product(&self, from: usize, to: usize) -> f64 {
        (from..=to).map(|r| self.stay(r)).product()
    }
}

pub fn step_probs(spec: &MarketSpec) -> StepProbs {
    let flip: Vec<f64> = spec
        .gamma
        .iter()
        .map(|g| -0.5 * (-2.0 * g).exp_m1())
        .collect();
    let stay = flip.iter().map(|v| 1.0 - v).collect();
    StepProbs { stay, flip }
}

/// Fair time-`k` price of the binary paying `1{I_ell = -1}` at `ell`.
pub fn binary_price(spec: &MarketSpec, k: usize, ell: usize, regime: Regime) -> Result<f64> {
    if k > ell || ell > spec.horizon {
        return Err(Error::IndexRange(format!(
            "binary price needs k <= ell <= {}, got k={k}, ell={ell}",
            spec.horizon
        )));
    }
    Ok(binary_price_unchecked(spec, k, ell, regime))
}

#[inline]
pub(crate) fn binary_price_unchecked(
    spec: &MarketSpec,
    k: usize,
    ell: usize,
    regime: Regime,
) -> f64 {
    let odd = -0.5 * (-2.0 * spec.integrated_intensity(k, ell)).exp_m1();
    match regime {
        Regime::Normal => odd,
        Regime::Extreme => 1.0 - odd,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegimePath {
    states: Vec<Regime>,
}

impl RegimePath {
    /// Path whose period `l` flips iff bit `l-1` of `flips` is set.
    pub fn from_flips(flips: u64, horizon: usize) -> Self {
        let mut states = Vec::with_capacity(horizon + 1);
        let mut current = Regime::Normal;
        states.push(current);
        for l in 1..=horizon {
            if flips >> (l - 1) & 1 == 1 {
                current = current.flipped();
            }
            states.push(current);
        }
        RegimePath { states }
    }

    pub fn from_states(states: Vec<Regime>) -> Result<Self> {
        match states.first() {
            Some(Regime::Normal) => Ok(RegimePath { states }),
            _ => Err(Error::InvalidSpec(
                "regime paths start in the normal regime".into(),
            )),
        }
    }

    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    #[inline]
    pub fn at(&self, k: usize) -> Regime {
        self.states[k]
    }

    pub fn states(&self) -> &[Regime] {
        &self.states
    }

    /// Probability of this path under the fair model.
    pub fn weight(&self, sp: &StepProbs) -> f64 {
        (1..self.states.len())
            .map(|l| sp.transition(l, self.states[l - 1], self.states[l]))
            .product()
    }
}
