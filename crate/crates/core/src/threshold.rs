//! Myopic threshold bounds and the bisection search for the optimal thresholds.

use rayon::prelude::*;

use crate::dp::stage::{Bank, Stage};
use crate::dp::{golden_max, interp_clamped, DpSolution, StageContext};
use crate::error::{Error, Result};
use crate::model::Horizon;
use crate::quadrature::GaussLegendre;
use crate::single_period::{optimal_order, ThresholdPair};

fn quantile_pair(horizon: &Horizon, n: usize, salvage: f64) -> ThresholdPair {
    let p = horizon.params(n);
    let d = horizon.demand(n);
    let denom = p.price - salvage;
    let q = |rate: f64| d.quantile_unchecked(((p.price - p.cost * (1.0 + rate)) / denom).clamp(0.0, 1.0));
    ThresholdPair::new(q(p.loan_rate), q(p.deposit_rate))
}

fn check_period(horizon: &Horizon, n: usize) -> Result<()> {
    if n == 0 || n > horizon.len() {
        return Err(Error::PeriodOutOfRange {
            period: n,
            horizon: horizon.len(),
        });
    }
    Ok(())
}

/// Lower bounds: leftover stock only pays holding cost (`s = -h_n`; `s` at the end).
pub fn myopic_i(horizon: &Horizon, n: usize) -> Result<ThresholdPair> {
    check_period(horizon, n)?;
    let salvage = if horizon.is_terminal(n) {
        horizon.salvage()
    } else {
        -horizon.params(n).holding
    };
    Ok(quantile_pair(horizon, n, salvage))
}

/// Upper bounds: leftover stock is worth next period's cost less holding
/// (`s = c_{n+1} - h_n`; `s` at the end).
pub fn myopic_ii(horizon: &Horizon, n: usize) -> Result<ThresholdPair> {
    check_period(horizon, n)?;
    if horizon.is_terminal(n) {
        return Ok(quantile_pair(horizon, n, horizon.salvage()));
    }
    let slack = horizon.liquidation_slack(n);
    if slack < 0.0 {
        let p = horizon.params(n);
        return Err(Error::LiquidationCondition {
            period: n,
            lhs: p.cost * (1.0 + p.loan_rate) + p.holding,
            rhs: horizon.params(n + 1).cost,
        });
    }
    Ok(quantile_pair(
        horizon,
        n,
        horizon.params(n + 1).cost - horizon.params(n).holding,
    ))
}

/// Lower and upper threshold pairs for every period.
#[derive(Debug, Clone, PartialEq)]
pub struct MyopicThresholds {
    pub lower: Vec<ThresholdPair>,
    pub upper: Vec<ThresholdPair>,
}

impl MyopicThresholds {
    pub fn new(horizon: &Horizon) -> Result<Self> {
        let mut lower = Vec::with_capacity(horizon.len());
        let mut upper = Vec::with_capacity(horizon.len());
        for n in 1..=horizon.len() {
            lower.push(myopic_i(horizon, n)?);
            upper.push(myopic_ii(horizon, n)?);
        }
        Ok(Self { lower, upper })
    }
}

/// Order-up-to rule of a threshold pair.
pub fn threshold_order(x: f64, y: f64, pair: ThresholdPair) -> f64 {
    optimal_order(x, y, pair)
}

/// Derivative of the next-period expected value in `z` on the borrowing branch.
pub fn phi(solution: &DpSolution, n: usize, alpha: f64, xi: f64) -> Result<f64> {
    let p = solution.horizon().params(n);
    branch_derivative(solution, n, alpha, xi, 1.0 + p.loan_rate)
}

/// Same as [`phi`] on the deposit branch.
pub fn psi(solution: &DpSolution, n: usize, beta: f64, xi: f64) -> Result<f64> {
    let p = solution.horizon().params(n);
    branch_derivative(solution, n, beta, xi, 1.0 + p.deposit_rate)
}

fn branch_derivative(solution: &DpSolution, n: usize, z: f64, xi: f64, factor: f64) -> Result<f64> {
    let h = solution.horizon();
    if n == 0 || n >= h.len() {
        return Err(Error::PeriodOutOfRange {
            period: n,
            horizon: h.len(),
        });
    }
    let rule = GaussLegendre::new(solution.options().quadrature_order);
    let stage = Stage::new(h, n, solution.value_table(n + 1), &rule)?;
    Ok(stage.derivative(z, xi, factor, &mut Vec::new()))
}

/// Result of [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    pub iterations: u32,
}

/// Root of a nonincreasing `f` on `[a, b]` to half-width `eps`. When `f` has a
/// jump across zero, the result converges to the left edge of the jump.
pub fn bisect(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, eps: f64) -> Bisection {
    let (mut a, mut b) = (a, b);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let c = 0.5 * (a + b);
        let fc = f(c);
        if fc == 0.0 || 0.5 * (b - a) <= eps {
            return Bisection { root: c, iterations };
        }
        if fc > 0.0 {
            a = c;
        } else {
            b = c;
        }
    }
}

/// `max(1, ceil(log2(width / eps)))`.
pub fn iteration_bound(width: f64, eps: f64) -> u32 {
    if width <= eps {
        1
    } else {
        ((width / eps).log2().ceil() as u32).max(1)
    }
}

/// Thresholds of one period tabulated over net worth.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub period: usize,
    pub xi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lower: ThresholdPair,
    pub upper: ThresholdPair,
    pub alpha_iterations: Vec<u32>,
    pub beta_iterations: Vec<u32>,
    /// Largest bracket-end sign error seen, in currency per unit (0 when none).
    pub worst_bracket_error: f64,
}

impl ThresholdRow {
    pub fn at(&self, xi: f64) -> ThresholdPair {
        ThresholdPair::new(
            interp_clamped(&self.xi, &self.alpha, xi),
            interp_clamped(&self.xi, &self.beta, xi),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub epsilon: f64,
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    pub fn row(&self, n: usize) -> &ThresholdRow {
        &self.rows[n - 1]
    }

    pub fn horizon_len(&self) -> usize {
        self.rows.len()
    }
}

/// Order quantity of the threshold policy at `(x, y)` in period `n`.
pub fn policy_from_thresholds(table: &ThresholdTable, x: f64, y: f64, n: usize) -> f64 {
    optimal_order(x, y, table.row(n).at(x + y))
}

const EDGE: f64 = 1e-7;

/// Settings for [`bisect_thresholds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectOptions {
    pub epsilon: f64,
    /// Allowed sign error of `phi`/`psi` at the bracket ends, relative to `c_{n+1}`.
    pub bracket_tolerance: f64,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            bracket_tolerance: 0.05,
        }
    }
}

/// Thresholds for every period and every distinct node sum of the grid.
pub fn bisect_thresholds(solution: &DpSolution, options: BisectOptions) -> Result<ThresholdTable> {
    let horizon = solution.horizon();
    let (xi, _) = solution.grid().xi_nodes();
    let bounds = MyopicThresholds::new(horizon)?;
    let n_last = horizon.len();
    let rule = GaussLegendre::new(solution.options().quadrature_order);
    let mut rows = Vec::with_capacity(n_last);
    for n in 1..n_last {
        let (lower, upper) = (bounds.lower[n - 1], bounds.upper[n - 1]);
        let p = horizon.params(n);
        let stage = Stage::new(horizon, n, solution.value_table(n + 1), &rule)?;
        let tol = options.bracket_tolerance * horizon.params(n + 1).cost;
        let cells: Vec<Result<(Bisection, Bisection, f64)>> = xi
            .par_iter()
            .map_init(
                || Vec::with_capacity(512),
                |kinks, &v| {
                    let mut solve = |lo: f64, hi: f64, factor: f64, what: &str| -> Result<(Bisection, f64)> {
                        let mut f = |z: f64| stage.derivative(z, v, factor, kinks);
                        // just outside the ends: with atoms at lo or hi the derivative jumps there
                        let (f_lo, f_hi) = (f(lo - EDGE), f(hi + EDGE));
                        let err = (-f_lo).max(f_hi).max(0.0);
                        if err > tol {
                            return Err(Error::BracketViolation {
                                period: n,
                                xi: v,
                                detail: format!("{what}: f(lower) = {f_lo:.4}, f(upper) = {f_hi:.4}"),
                            });
                        }
                        Ok((bisect(f, lo, hi, options.epsilon), err))
                    };
                    let (a, ea) = solve(lower.alpha, upper.alpha, 1.0 + p.loan_rate, "phi")?;
                    let (b, eb) = solve(lower.beta, upper.beta, 1.0 + p.deposit_rate, "psi")?;
                    Ok((a, b, ea.max(eb)))
                },
            )
            .collect();
        let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
        rows.push(ThresholdRow {
            period: n,
            xi: xi.clone(),
            alpha: cells.iter().map(|c| c.0.root).collect(),
            beta: cells.iter().map(|c| c.1.root).collect(),
            lower,
            upper,
            alpha_iterations: cells.iter().map(|c| c.0.iterations).collect(),
            beta_iterations: cells.iter().map(|c| c.1.iterations).collect(),
            worst_bracket_error: cells.iter().map(|c| c.2).fold(0.0, f64::max),
        });
    }
    let last = bounds.lower[n_last - 1];
    rows.push(ThresholdRow {
        period: n_last,
        xi: xi.clone(),
        alpha: vec![last.alpha; xi.len()],
        beta: vec![last.beta; xi.len()],
        lower: last,
        upper: bounds.upper[n_last - 1],
        alpha_iterations: vec![0; xi.len()],
        beta_iterations: vec![0; xi.len()],
        worst_bracket_error: 0.0,
    });
    Ok(ThresholdTable {
        epsilon: options.epsilon,
        rows,
    })
}

/// Thresholds as maximizers of the next-period expected value with the bank
/// factor fixed to the loan rate (`alpha`) or the deposit rate (`beta`).
pub fn argmax_thresholds(solution: &DpSolution, n: usize, xi: f64) -> Result<ThresholdPair> {
    let h = solution.horizon();
    check_period(h, n)?;
    if h.is_terminal(n) {
        return Ok(crate::dp::terminal_optimum_pair(h));
    }
    let rule = GaussLegendre::new(solution.options().quadrature_order);
    let stage = Stage::new(h, n, solution.value_table(n + 1), &rule)?;
    let ctx = StageContext::new(h, n, solution.grid(), solution.options())?;
    Ok(argmax_pair(&stage, &ctx, xi, &mut Vec::new()))
}

pub(crate) fn argmax_pair(stage: &Stage<'_>, ctx: &StageContext, xi: f64, kinks: &mut Vec<f64>) -> ThresholdPair {
    let p = stage.horizon.params(stage.n);
    let (lo, hi) = ctx.z_range();
    let tol = 1e-7;
    let mut best = |factor: f64| golden_max(|z| stage.value(z, xi, Bank::Factor(factor), kinks), lo, hi, tol, &[]).z;
    let alpha = best(1.0 + p.loan_rate);
    let beta = best(1.0 + p.deposit_rate);
    ThresholdPair::new(alpha, beta)
}

/// [`argmax_thresholds`] for every period over the grid's node sums.
pub fn argmax_threshold_table(solution: &DpSolution) -> Result<ThresholdTable> {
    let h = solution.horizon();
    let (xi, _) = solution.grid().xi_nodes();
    let bounds = MyopicThresholds::new(h);
    let rule = GaussLegendre::new(solution.options().quadrature_order);
    let mut rows = Vec::with_capacity(h.len());
    for n in 1..=h.len() {
        let (lower, upper) = match &bounds {
            Ok(b) => (b.lower[n - 1], b.upper[n - 1]),
            Err(_) => (myopic_i(h, n)?, ThresholdPair::new(f64::NAN, f64::NAN)),
        };
        let pairs: Vec<ThresholdPair> = if h.is_terminal(n) {
            let t = crate::dp::terminal_optimum_pair(h);
            vec![t; xi.len()]
        } else {
            let stage = Stage::new(h, n, solution.value_table(n + 1), &rule)?;
            let ctx = StageContext::new(h, n, solution.grid(), solution.options())?;
            xi.par_iter()
                .map_init(|| Vec::with_capacity(512), |k, &v| argmax_pair(&stage, &ctx, v, k))
                .collect()
        };
        rows.push(ThresholdRow {
            period: n,
            xi: xi.clone(),
            alpha: pairs.iter().map(|p| p.alpha).collect(),
            beta: pairs.iter().map(|p| p.beta).collect(),
            lower,
            upper,
            alpha_iterations: vec![0; xi.len()],
            beta_iterations: vec![0; xi.len()],
            worst_bracket_error: 0.0,
        });
    }
    Ok(ThresholdTable { epsilon: 0.0, rows })
}
