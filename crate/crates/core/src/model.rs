//! Problem definition shared by every solver.
//!
//! Quantities follow one convention throughout the crate: inventory `x` and
//! capital `y` are measured in product units of the current period (capital
//! divided by that period's unit cost), while value functions and realized
//! cash flows are in currency.

use crate::demand::Demand;
use crate::error::{Error, Result};
use crate::extensions::piecewise::RateSchedule;

/// Per-period economics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodParams {
    /// Selling price per unit.
    pub price: f64,
    /// Ordering cost per unit.
    pub cost: f64,
    /// Holding cost per unit carried to the next period.
    pub holding: f64,
    /// Deposit interest rate for the period.
    pub deposit_rate: f64,
    /// Loan interest rate for the period.
    pub loan_rate: f64,
}

impl PeriodParams {
    pub fn new(price: f64, cost: f64, holding: f64, deposit_rate: f64, loan_rate: f64) -> Self {
        Self {
            price,
            cost,
            holding,
            deposit_rate,
            loan_rate,
        }
    }

    /// Gross return factor on a cash balance: `1+i` when `balance >= 0`, `1+l` otherwise.
    #[inline]
    pub fn interest_factor(&self, balance: f64) -> f64 {
        if balance >= 0.0 {
            1.0 + self.deposit_rate
        } else {
            1.0 + self.loan_rate
        }
    }
}

/// A range of order-up-to levels `[lo, hi]` over which the bank pays or charges a
/// constant marginal factor per currency unit of balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankPiece {
    pub lo: f64,
    pub hi: f64,
    pub factor: f64,
    /// True when the piece borrows (`z > xi`).
    pub loan: bool,
}

/// Inventory position plus capital position, both in product units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub const ORIGIN: State = State { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Net worth in product units.
    #[inline]
    pub fn xi(&self) -> f64 {
        self.x + self.y
    }
}

/// How demand that exceeds stock is treated.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum UnmetDemand {
    #[default]
    LostSales,
    /// Backlogged at a per-unit, per-period penalty (one entry per period).
    Backorder { penalty: Vec<f64> },
}

/// Optional departures from the base model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelVariant {
    pub unmet: UnmetDemand,
    /// Maximum new loan per period, in currency.
    pub loan_limit: Option<Vec<f64>>,
    /// Tiered loan/deposit rates per period; replaces `deposit_rate`/`loan_rate`.
    pub rate_schedule: Option<Vec<RateSchedule>>,
}

impl ModelVariant {
    pub fn is_base(&self) -> bool {
        matches!(self.unmet, UnmetDemand::LostSales) && self.loan_limit.is_none() && self.rate_schedule.is_none()
    }
}

/// A finite-horizon problem instance. Periods are indexed `1..=N`.
#[derive(Debug, Clone)]
pub struct Horizon {
    periods: Vec<PeriodParams>,
    demands: Vec<Demand>,
    salvage: f64,
    variant: ModelVariant,
}

/// Normalized next-period parameters `(p', h', c')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub price: f64,
    pub holding: f64,
    pub cost: f64,
}

impl Horizon {
    pub fn new(periods: Vec<PeriodParams>, demands: Vec<Demand>, salvage: f64) -> Self {
        Self {
            periods,
            demands,
            salvage,
            variant: ModelVariant::default(),
        }
    }

    /// Replicates one parameter set and one demand over `n` periods.
    pub fn stationary(n: usize, params: PeriodParams, demand: Demand, salvage: f64) -> Self {
        Self::new(vec![params; n], vec![demand; n], salvage)
    }

    pub fn with_variant(mut self, variant: ModelVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_backorder(mut self, penalty: Vec<f64>) -> Self {
        self.variant.unmet = UnmetDemand::Backorder { penalty };
        self
    }

    pub fn with_loan_limit(mut self, limits: Vec<f64>) -> Self {
        self.variant.loan_limit = Some(limits);
        self
    }

    pub fn with_rate_schedule(mut self, schedules: Vec<RateSchedule>) -> Self {
        self.variant.rate_schedule = Some(schedules);
        self
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn salvage(&self) -> f64 {
        self.salvage
    }

    pub fn variant(&self) -> &ModelVariant {
        &self.variant
    }

    pub fn periods(&self) -> &[PeriodParams] {
        &self.periods
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    /// Parameters of period `n` (1-based).
    pub fn params(&self, n: usize) -> &PeriodParams {
        &self.periods[n - 1]
    }

    pub fn demand(&self, n: usize) -> &Demand {
        &self.demands[n - 1]
    }

    pub fn is_terminal(&self, n: usize) -> bool {
        n == self.len()
    }

    /// Holding cost of period `n`, with the terminal convention `h_N = -s`.
    pub fn holding(&self, n: usize) -> f64 {
        if self.is_terminal(n) {
            -self.salvage
        } else {
            self.params(n).holding
        }
    }

    pub fn backorder_penalty(&self, n: usize) -> Option<f64> {
        match &self.variant.unmet {
            UnmetDemand::LostSales => None,
            UnmetDemand::Backorder { penalty } => Some(penalty[n - 1]),
        }
    }

    pub fn is_backorder(&self) -> bool {
        matches!(self.variant.unmet, UnmetDemand::Backorder { .. })
    }

    /// Maximum new loan of period `n` in product units, `L_n / c_n`.
    pub fn loan_capacity(&self, n: usize) -> Option<f64> {
        self.variant
            .loan_limit
            .as_ref()
            .map(|limits| limits[n - 1] / self.params(n).cost)
    }

    pub fn rate_schedule(&self, n: usize) -> Option<&RateSchedule> {
        self.variant.rate_schedule.as_ref().map(|s| &s[n - 1])
    }

    /// `(p_n/c_{n+1}, h_n/c_{n+1}, c_n/c_{n+1})`; undefined for the terminal period.
    pub fn effective_params(&self, n: usize) -> Result<EffectiveParams> {
        if n == 0 || n >= self.len() {
            return Err(Error::PeriodOutOfRange {
                period: n,
                horizon: self.len(),
            });
        }
        let here = self.params(n);
        let next_cost = self.params(n + 1).cost;
        Ok(EffectiveParams {
            price: here.price / next_cost,
            holding: here.holding / next_cost,
            cost: here.cost / next_cost,
        })
    }

    /// True when `c_n(1+l_n) + h_n >= c_{n+1}` for every `n < N`.
    pub fn myopic_ii_valid(&self) -> bool {
        (1..self.len()).all(|n| self.liquidation_slack(n) >= 0.0)
    }

    pub(crate) fn liquidation_slack(&self, n: usize) -> f64 {
        let p = self.params(n);
        p.cost * (1.0 + p.loan_rate) + p.holding - self.params(n + 1).cost
    }

    /// Upper limit on the order-up-to level in period `n` from state `s`.
    pub fn order_cap(&self, n: usize, s: State) -> f64 {
        match self.loan_capacity(n) {
            Some(cap) => s.x + s.y.max(0.0) + cap,
            None => f64::INFINITY,
        }
    }

    /// Currency collected from operations at the end of period `n` when stock is
    /// raised to `z` and demand `d` occurs.
    #[inline]
    pub fn revenue(&self, n: usize, z: f64, d: f64) -> f64 {
        let p = self.params(n).price;
        let h = self.holding(n);
        let leftover = (z - d).max(0.0);
        match self.backorder_penalty(n) {
            None => p * z - (p + h) * leftover,
            Some(b) => (p + b) * z - (p + h + b) * leftover - b * self.demand(n).mean(),
        }
    }

    /// Currency returned by the bank at the end of period `n` when stock is raised
    /// to `z` from net worth `xi`.
    #[inline]
    pub fn bank_flow(&self, n: usize, z: f64, xi: f64) -> f64 {
        let params = self.params(n);
        let balance = params.cost * (xi - z);
        match self.rate_schedule(n) {
            Some(schedule) => schedule.settle(balance),
            None => balance * params.interest_factor(xi - z),
        }
    }

    /// Splits `[z_lo, z_hi]` into pieces of constant marginal interest for net worth `xi`.
    pub fn bank_pieces(&self, n: usize, xi: f64, z_lo: f64, z_hi: f64) -> Vec<BankPiece> {
        let params = self.params(n);
        let raw = match self.rate_schedule(n) {
            Some(schedule) => schedule.pieces(params.cost, xi),
            None => vec![
                BankPiece {
                    lo: f64::NEG_INFINITY,
                    hi: xi,
                    factor: 1.0 + params.deposit_rate,
                    loan: false,
                },
                BankPiece {
                    lo: xi,
                    hi: f64::INFINITY,
                    factor: 1.0 + params.loan_rate,
                    loan: true,
                },
            ],
        };
        raw.into_iter()
            .filter_map(|p| {
                let lo = p.lo.max(z_lo);
                let hi = p.hi.min(z_hi);
                (lo <= hi).then_some(BankPiece { lo, hi, ..p })
            })
            .collect()
    }

    /// Inventory carried into the next period.
    #[inline]
    pub fn carried_inventory(&self, z: f64, d: f64) -> f64 {
        if self.is_backorder() {
            z - d
        } else {
            (z - d).max(0.0)
        }
    }

    /// Lists every violated invariant; empty iff the horizon is usable.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.len();
        if n == 0 {
            report.violation(None, "N", "horizon must contain at least one period");
        }
        if self.demands.len() != n {
            report.violation(
                None,
                "demands",
                format!("expected {n} demand descriptors, found {}", self.demands.len()),
            );
        }
        for (k, p) in self.periods.iter().enumerate() {
            let period = Some(k + 1);
            if !(p.deposit_rate >= 0.0) {
                report.violation(period, "i", format!("deposit rate {} must be >= 0", p.deposit_rate));
            }
            if !(p.deposit_rate < p.loan_rate) {
                report.violation(
                    period,
                    "i < l",
                    format!(
                        "deposit rate {} must be below loan rate {}",
                        p.deposit_rate, p.loan_rate
                    ),
                );
            }
            if !((1.0 + p.loan_rate) * p.cost < p.price) {
                report.violation(
                    period,
                    "(1+l)c < p",
                    format!(
                        "(1+l)c = {} is not below the price {}",
                        (1.0 + p.loan_rate) * p.cost,
                        p.price
                    ),
                );
            }
            if !(p.cost >= 0.0) {
                report.violation(period, "c", format!("cost {} must be >= 0", p.cost));
            }
            if !(p.holding >= 0.0) {
                report.violation(period, "h", format!("holding cost {} must be >= 0", p.holding));
            }
            if !(p.price >= p.cost) {
                report.violation(period, "p >= c", format!("price {} below cost {}", p.price, p.cost));
            }
        }
        if let Some(last) = self.periods.last() {
            if !(self.salvage < last.price) {
                report.violation(
                    Some(n),
                    "s",
                    format!("salvage {} must be below the final price {}", self.salvage, last.price),
                );
            }
        }
        if self.salvage < 0.0 {
            report.warn(format!("salvage {} is a disposal cost", self.salvage));
        }
        if n > 1 && !self.myopic_ii_valid() {
            report.warn("c_n(1+l_n)+h_n >= c_(n+1) fails for some n; myopic policy II is undefined there");
        }
        self.validate_variant(&mut report);
        report
    }

    fn validate_variant(&self, report: &mut ValidationReport) {
        let n = self.len();
        if let UnmetDemand::Backorder { penalty } = &self.variant.unmet {
            if penalty.len() != n {
                report.violation(None, "backorder_penalty", format!("expected {n} penalties"));
            }
            if penalty.iter().any(|b| !(*b >= 0.0)) {
                report.violation(None, "backorder_penalty", "penalties must be >= 0");
            }
        }
        if let Some(limits) = &self.variant.loan_limit {
            if limits.len() != n {
                report.violation(None, "loan_limit", format!("expected {n} limits"));
            }
            if limits.iter().any(|l| !(*l > 0.0)) {
                report.violation(None, "loan_limit", "loan limits must be > 0");
            }
        }
        if let Some(schedules) = &self.variant.rate_schedule {
            if schedules.len() != n {
                report.violation(None, "rate_schedule", format!("expected {n} schedules"));
            }
            for (k, s) in schedules.iter().enumerate() {
                if let Err(e) = s.validate() {
                    report.violation(Some(k + 1), "rate_schedule", e.to_string());
                }
            }
        }
    }

    /// Fails with the report's first violation when the horizon is unusable.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        match report.violations.first() {
            None => Ok(()),
            Some(_) => Err(Error::InvalidHorizon(report.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub period: Option<usize>,
    pub field: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn violation(&mut self, period: Option<usize>, field: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            period,
            field,
            message: message.into(),
        });
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            match v.period {
                Some(n) => writeln!(f, "period {n}: [{}] {}", v.field, v.message)?,
                None => writeln!(f, "[{}] {}", v.field, v.message)?,
            }
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}
