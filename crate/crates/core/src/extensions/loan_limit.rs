//! Ordering under a cap on new borrowing.

use crate::error::{Error, Result};
use crate::model::{Horizon, State};
use crate::policy::OrderPolicy;
use crate::single_period::{optimal_order, ThresholdPair};
use crate::threshold::ThresholdTable;

/// Largest loan the bank grants in a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoanLimit {
    /// Currency.
    pub amount: f64,
    /// Unit cost of the period, to express the limit in product units.
    pub cost: f64,
}

impl LoanLimit {
    pub fn new(amount: f64, cost: f64) -> Result<Self> {
        if !(amount > 0.0) || !(cost > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "loan limit and unit cost must be positive, got {amount} and {cost}"
            )));
        }
        Ok(Self { amount, cost })
    }

    /// `L' = L / c`.
    pub fn units(&self) -> f64 {
        self.amount / self.cost
    }
}

/// Order quantity at `(x, y)` given thresholds and the loan capacity `L'` in
/// product units: the unconstrained threshold order cut back to what cash on
/// hand plus the limit can buy, `q <= y^+ + L'`. With `y >= 0` this is
///
/// - `(beta - x)^+` for `xi >= beta`,
/// - `y` for `alpha <= xi < beta`,
/// - `(alpha - x)^+` for `alpha - L' <= xi < alpha`,
/// - `y + L'` below that.
pub fn loan_limited_policy(x: f64, y: f64, th: ThresholdPair, limit_units: f64) -> f64 {
    optimal_order(x, y, th).min(y.max(0.0) + limit_units)
}

/// Threshold table applied with the horizon's loan limits.
#[derive(Debug, Clone, Copy)]
pub struct LoanLimitedPolicy<'a>(pub &'a ThresholdTable);

impl OrderPolicy for LoanLimitedPolicy<'_> {
    fn order_up_to(&self, horizon: &Horizon, n: usize, s: State) -> f64 {
        let th = self.0.row(n).at(s.xi());
        let cap = horizon.loan_capacity(n).unwrap_or(f64::INFINITY);
        s.x + loan_limited_policy(s.x, s.y, th, cap)
    }

    fn label(&self) -> String {
        "loan-limited thresholds".into()
    }
}
