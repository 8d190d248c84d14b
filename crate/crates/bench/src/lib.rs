//! Shared fixtures for the benchmarks.

use cashinv_core::{Demand, Horizon, PeriodParams};

pub fn reference_params() -> PeriodParams {
    PeriodParams::new(2000.0, 1000.0, 500.0, 0.01, 0.15)
}

pub fn stationary(n: usize, demand: Demand) -> Horizon {
    Horizon::stationary(n, reference_params(), demand, 600.0)
}

pub fn uniform_horizon(n: usize) -> Horizon {
    stationary(n, Demand::uniform(0.0, 20.0).expect("valid demand"))
}

pub fn discrete_horizon(n: usize) -> Horizon {
    stationary(n, Demand::integer_uniform(0, 20).expect("valid demand"))
}
