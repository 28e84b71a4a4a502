//! Exact valuation-adjustment analytics for a callable range accrual traded
//! under a mis-specified, recalibrated model.
//!
//! The fair model is a two-state regime chain. The trader's model treats the
//! extreme regime as absorbing and is recalibrated to fair binary prices each
//! year until the extreme regime shows up. Every quantity is computed exactly
//! on finite event partitions, and [`oracle`] recomputes it by enumerating
//! all regime paths.
//!
//! ```
//! use hva_core::{MarketSpec, Model, TraderType, xva};
//!
//! let model = Model::build(MarketSpec::reference()).unwrap();
//! let ledger = xva(&model, TraderType::Bad).unwrap();
//! assert_eq!((ledger.hva0() * 100.0).round(), 181.0);
//! ```

pub mod capital;
pub mod error;
pub mod fair;
pub mod hedge;
pub mod model;
pub mod oracle;
pub mod par;
pub mod partition;
pub mod ratios;
pub mod regime;
pub mod trader;
pub mod xva;

pub use capital::{capital_and_kva, expected_shortfall, CapitalProfile, EsConvention};
pub use error::{Error, Result};
pub use fair::{build_q_flat_family, solve_fair, FairSurface, ZERO_TOL};
pub use hedge::{Stopping, StoppingSchedule, TraderType};
pub use model::Model;
pub use par::Exec;
pub use partition::{EventId, Partition, PartitionKind};
pub use ratios::HedgeRatios;
pub use regime::{
    binary_price, gamma_from_affine, step_probs, MarketSpec, Regime, RegimePath, StepProbs,
};
pub use trader::{TraderBook, TraderCalib, TraderSurface};
pub use xva::{pnl_switch_decomposition, xva, xva_bad, xva_nsb, XvaLedger, XvaPoint};
