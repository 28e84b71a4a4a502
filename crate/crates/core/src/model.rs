use crate::error::Result;
use crate::fair::{solve_fair, FairSurface};
use crate::hedge::{pbad_dp, BadValueSurface};
use crate::ratios::HedgeRatios;
use crate::regime::{step_probs, MarketSpec, Regime, StepProbs};
use crate::trader::{trader_hedge_ratios, TraderBook};

/// Every scenario-level surface the per-atom ledgers are built from.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: MarketSpec,
    pub probs: StepProbs,
    pub fair: FairSurface,
    pub traders: TraderBook,
    /// The trader's time-0 static hedge.
    pub static_hedge: HedgeRatios,
    /// Fair value of the time-0 static hedge by regime.
    pub static_values: BadValueSurface,
}

impl Model {
    pub fn build(spec: MarketSpec) -> Result<Self> {
        spec.validate()?;
        let probs = step_probs(&spec);
        let fair = solve_fair(&spec, &probs);
        let traders = TraderBook::build(&spec)?;
        let static_hedge = trader_hedge_ratios(traders.surface(0), &spec, 0, Regime::Normal)?;
        let static_values = pbad_dp(&probs, &static_hedge);
        Ok(Model {
            spec,
            probs,
            fair,
            traders,
            static_hedge,
            static_values,
        })
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    /// Trader's time-0 price.
    pub fn trader_price(&self) -> f64 {
        self.traders.surface(0).price()
    }

    /// Fair time-0 callable value.
    pub fn fair_price(&self) -> f64 {
        self.fair.value(0, Regime::Normal)
    }
}
