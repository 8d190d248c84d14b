//! Joint ordering and financing for a cash-constrained inventory firm.
//!
//! The firm holds inventory `x` and capital `y` (both in product units), orders up
//! to a level `z` each period, and borrows or deposits the difference between `z`
//! and its net worth `x + y`. The crate solves the single-period problem in closed
//! form, the multi-period problem by backward induction on a grid, brackets the
//! optimal thresholds with two myopic policies, bounds the value function from
//! above with a one-dimensional relaxation, and simulates any policy.

// `!(a > b)` is used on purpose so NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod demand;
pub mod dp;
pub mod error;
pub mod extensions;
pub mod model;
pub mod policy;
pub mod quadrature;
pub mod sim;
pub mod single_period;
pub mod threshold;

pub use demand::{Demand, DemandKind, Moments};
pub use dp::{
    backward_induct, evaluate_policy, DpOptions, DpSolution, Grid, GridSpec, InitialBox, PolicyTable, ValueTable,
};
pub use error::{Error, Result};
pub use model::{EffectiveParams, Horizon, ModelVariant, PeriodParams, State, UnmetDemand, ValidationReport};
pub use policy::OrderPolicy;
pub use single_period::{Fractiles, SinglePeriod, ThresholdPair};
