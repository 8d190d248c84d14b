use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid demand distribution: {0}")]
    InvalidDemand(String),

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    #[error("period {period} is out of range for this operation (horizon length {horizon})")]
    PeriodOutOfRange { period: usize, horizon: usize },

    #[error("salvage value {salvage} must be below the selling price {price}")]
    SalvageAbovePrice { salvage: f64, price: f64 },

    #[error("myopic policy II undefined in period {period}: c_n(1+l_n)+h_n = {lhs} < c_(n+1) = {rhs}")]
    LiquidationCondition { period: usize, lhs: f64, rhs: f64 },

    #[error("selling-back bound undefined in period {period}: c_(n+1) = {next_cost} > c_n + h_n = {bound}")]
    SellingBackCondition { period: usize, next_cost: f64, bound: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "grid too small: reachable {axis} range [{reach_lo:.3}, {reach_hi:.3}] escapes grid \
         [{grid_lo:.3}, {grid_hi:.3}] by more than the trust width {trust:.3}"
    )]
    GridEscape {
        axis: &'static str,
        reach_lo: f64,
        reach_hi: f64,
        grid_lo: f64,
        grid_hi: f64,
        trust: f64,
    },

    #[error("threshold bracket violated in period {period} at xi = {xi}: {detail}")]
    BracketViolation { period: usize, xi: f64, detail: String },

    #[error("invalid rate schedule: {0}")]
    InvalidSchedule(String),

    #[error("policy produced a negative order quantity {quantity} in period {period}")]
    NegativeOrder { period: usize, quantity: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
