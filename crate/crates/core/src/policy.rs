//! Ordering policies that can be evaluated or simulated.

use crate::dp::DpSolution;
use crate::error::Result;
use crate::model::{Horizon, State};
use crate::single_period::{optimal_order, ThresholdPair};
use crate::threshold::{myopic_i, myopic_ii, policy_from_thresholds, ThresholdTable};

/// Chooses the order-up-to level `z >= x` in period `n`.
pub trait OrderPolicy: Sync {
    fn order_up_to(&self, horizon: &Horizon, n: usize, s: State) -> f64;

    fn label(&self) -> String;
}

/// One fixed threshold pair per period.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticThresholds {
    pub label: String,
    pub pairs: Vec<ThresholdPair>,
}

impl StaticThresholds {
    pub fn myopic_i(horizon: &Horizon) -> Result<Self> {
        Ok(Self {
            label: "myopic I".into(),
            pairs: (1..=horizon.len())
                .map(|n| myopic_i(horizon, n))
                .collect::<Result<_>>()?,
        })
    }

    pub fn myopic_ii(horizon: &Horizon) -> Result<Self> {
        Ok(Self {
            label: "myopic II".into(),
            pairs: (1..=horizon.len())
                .map(|n| myopic_ii(horizon, n))
                .collect::<Result<_>>()?,
        })
    }
}

impl OrderPolicy for StaticThresholds {
    fn order_up_to(&self, _: &Horizon, n: usize, s: State) -> f64 {
        s.x + optimal_order(s.x, s.y, self.pairs[n - 1])
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

impl OrderPolicy for DpSolution {
    fn order_up_to(&self, _: &Horizon, n: usize, s: State) -> f64 {
        DpSolution::order_up_to(self, n, s)
    }

    fn label(&self) -> String {
        "optimal".into()
    }
}

/// Thresholds tabulated over net worth.
#[derive(Debug, Clone, Copy)]
pub struct TablePolicy<'a>(pub &'a ThresholdTable);

impl OrderPolicy for TablePolicy<'_> {
    fn order_up_to(&self, _: &Horizon, n: usize, s: State) -> f64 {
        s.x + policy_from_thresholds(self.0, s.x, s.y, n)
    }

    fn label(&self) -> String {
        "thresholds".into()
    }
}

/// Orders the same quantity every period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantOrder(pub f64);

impl OrderPolicy for ConstantOrder {
    fn order_up_to(&self, _: &Horizon, _: usize, s: State) -> f64 {
        s.x + self.0
    }

    fn label(&self) -> String {
        format!("order {}", self.0)
    }
}

/// Caps another policy at the horizon's loan capacity.
#[derive(Debug, Clone)]
pub struct Capped<P>(pub P);

impl<P: OrderPolicy> OrderPolicy for Capped<P> {
    fn order_up_to(&self, horizon: &Horizon, n: usize, s: State) -> f64 {
        self.0.order_up_to(horizon, n, s).min(horizon.order_cap(n, s)).max(s.x)
    }

    fn label(&self) -> String {
        format!("{} (capped)", self.0.label())
    }
}
