//! Backlogged demand: unmet demand stays on the books as negative inventory and
//! costs a penalty `b_n` per unit.

use crate::dp::{backward_induct, DpOptions, DpSolution, GridSpec};
use crate::error::{Error, Result};
use crate::model::Horizon;
use crate::threshold::{argmax_threshold_table, ThresholdTable};

/// Per-period backorder penalties (currency per unit).
#[derive(Debug, Clone, PartialEq)]
pub struct BackorderParams {
    pub penalty: Vec<f64>,
}

impl BackorderParams {
    pub fn new(penalty: Vec<f64>) -> Result<Self> {
        if penalty.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidArgument(
                "backorder penalties must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { penalty })
    }

    pub fn stationary(n: usize, b: f64) -> Result<Self> {
        Self::new(vec![b; n])
    }
}

/// Realized revenue under backorders:
/// `(p + b) z - (p + h + b)(z - d)^+ - b E[D]`.
pub fn backorder_revenue(price: f64, holding: f64, penalty: f64, z: f64, d: f64, mean_demand: f64) -> f64 {
    (price + penalty) * z - (price + holding + penalty) * (z - d).max(0.0) - penalty * mean_demand
}

/// Extends `base` down to `-N q(0.999)` of the largest one-period demand, keeping the x spacing.
pub fn backorder_grid(horizon: &Horizon, base: &GridSpec) -> GridSpec {
    let deepest = horizon
        .demands()
        .iter()
        .map(|d| d.quantile_unchecked(0.999))
        .fold(0.0, f64::max);
    let step = (base.x_max - base.x_min) / (base.nx - 1) as f64;
    let x_min = -(deepest * horizon.len() as f64);
    let extra = ((base.x_min - x_min) / step).ceil().max(0.0) as usize;
    GridSpec {
        x_min: base.x_min - extra as f64 * step,
        nx: base.nx + extra,
        ..*base
    }
}

#[derive(Debug, Clone)]
pub struct BackorderSolution {
    pub solution: DpSolution,
    pub thresholds: ThresholdTable,
}

/// Solves `horizon` under the backorder rule with penalties `params` on the
/// backlog-extended version of `options.grid`, then extracts thresholds by argmax.
pub fn backorder_dp(horizon: &Horizon, params: &BackorderParams, options: &DpOptions) -> Result<BackorderSolution> {
    if params.penalty.len() != horizon.len() {
        return Err(Error::InvalidArgument(format!(
            "{} backorder penalties for a {}-period horizon",
            params.penalty.len(),
            horizon.len()
        )));
    }
    let h = horizon.clone().with_backorder(params.penalty.clone());
    let mut opts = options.clone();
    opts.grid = backorder_grid(&h, &options.grid);
    let solution = backward_induct(&h, &opts)?;
    let thresholds = argmax_threshold_table(&solution)?;
    Ok(BackorderSolution { solution, thresholds })
}
