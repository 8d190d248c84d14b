//! Backward induction and policy evaluation on the state grid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Horizon, State};
use crate::policy::OrderPolicy;
use crate::quadrature::GaussLegendre;
use crate::threshold::{myopic_i, myopic_ii};

use super::grid::{check_reachability, reachable_boxes, Grid, GridSpec, InitialBox};
use super::optimize::{golden_max, Best};
use super::stage::{Bank, Stage};
use super::table::{PolicyTable, ValueTable};

#[derive(Debug, Clone, PartialEq)]
pub struct DpOptions {
    pub grid: GridSpec,
    /// Gauss-Legendre points per demand segment.
    pub quadrature_order: usize,
    /// Golden-section stopping width in product units.
    pub z_tolerance: f64,
    /// States the reachability check starts from.
    pub initial: InitialBox,
    /// Allowed extrapolation beyond the grid, as a fraction of each axis span.
    pub trust_fraction: f64,
    /// Demand tail probability ignored by the reachability check.
    pub tail_probability: f64,
    pub check_reachability: bool,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            quadrature_order: 2,
            z_tolerance: 1e-6,
            initial: InitialBox::default(),
            trust_fraction: 0.2,
            tail_probability: 1e-3,
            check_reachability: true,
        }
    }
}

impl DpOptions {
    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_initial(mut self, initial: InitialBox) -> Self {
        self.initial = initial;
        self
    }
}

/// Unconstrained maximizer `z*(xi)` of one period, tabulated on the distinct node sums.
#[derive(Debug, Clone, PartialEq)]
pub struct XiPolicy {
    pub xi: Vec<f64>,
    pub z: Vec<f64>,
}

impl XiPolicy {
    /// Linear interpolation in `xi`, constant beyond the ends.
    pub fn at(&self, xi: f64) -> f64 {
        interp_clamped(&self.xi, &self.z, xi)
    }
}

pub(crate) fn interp_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|v| *v <= x);
    if k == 0 {
        ys[0]
    } else if k == xs.len() {
        ys[k - 1]
    } else {
        let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        ys[k - 1] + t * (ys[k] - ys[k - 1])
    }
}

/// Tables of a solved horizon; index `n - 1` holds period `n`.
#[derive(Debug, Clone)]
pub struct DpSolution {
    horizon: Horizon,
    grid: Grid,
    options: DpOptions,
    values: Vec<ValueTable>,
    policies: Vec<PolicyTable>,
    xi_policies: Vec<XiPolicy>,
}

impl DpSolution {
    pub fn horizon(&self) -> &Horizon {
        &self.horizon
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn options(&self) -> &DpOptions {
        &self.options
    }

    pub fn values(&self) -> &[ValueTable] {
        &self.values
    }

    pub fn policies(&self) -> &[PolicyTable] {
        &self.policies
    }

    pub fn value_table(&self, n: usize) -> &ValueTable {
        &self.values[n - 1]
    }

    pub fn policy_table(&self, n: usize) -> &PolicyTable {
        &self.policies[n - 1]
    }

    pub fn xi_policy(&self, n: usize) -> &XiPolicy {
        &self.xi_policies[n - 1]
    }

    /// `V_n(x, y)` interpolated from the table.
    pub fn value(&self, n: usize, s: State) -> f64 {
        self.values[n - 1].value_at(s.x, s.y)
    }

    /// `V_n(x, y)` by one exact maximization over the next table (or the closed
    /// form at the last period) instead of interpolating `V_n` itself.
    pub fn value_exact(&self, n: usize, s: State) -> Result<f64> {
        if self.horizon.is_terminal(n) {
            return Ok(terminal_optimum(&self.horizon, s).v);
        }
        let rule = GaussLegendre::new(self.options.quadrature_order);
        let stage = Stage::new(&self.horizon, n, &self.values[n], &rule)?;
        let ctx = StageContext::new(&self.horizon, n, &self.grid, &self.options)?;
        let mut kinks = Vec::new();
        let pieces = ctx.piece_optima(&stage, s.xi(), &mut kinks);
        Ok(ctx.best_for_node(&stage, s, &pieces, &mut kinks).v)
    }

    /// Optimal order-up-to level. Uses the tabulated `z*(xi)` when the stage
    /// objective is concave in `z`, the policy table otherwise.
    pub fn order_up_to(&self, n: usize, s: State) -> f64 {
        if self.horizon.is_terminal(n) {
            return terminal_optimum(&self.horizon, s).z;
        }
        let cap = self.horizon.order_cap(n, s);
        if self.horizon.variant().rate_schedule.is_none() {
            self.xi_policies[n - 1].at(s.xi()).max(s.x).min(cap)
        } else {
            self.policies[n - 1].order_up_to(s.x, s.y).min(cap)
        }
    }
}

/// Policy-evaluation tables of a fixed policy; index `n - 1` holds period `n`.
#[derive(Debug, Clone)]
pub struct PolicyValues {
    pub label: String,
    pub values: Vec<ValueTable>,
}

impl PolicyValues {
    pub fn value(&self, n: usize, s: State) -> f64 {
        self.values[n - 1].value_at(s.x, s.y)
    }
}

/// State after period `n` for order-up-to level `z` and demand `d`.
pub fn transition(horizon: &Horizon, n: usize, s: State, z: f64, d: f64) -> Result<State> {
    if n == 0 || n >= horizon.len() {
        return Err(Error::PeriodOutOfRange {
            period: n,
            horizon: horizon.len(),
        });
    }
    Ok(transition_unchecked(horizon, n, s, z, d))
}

#[inline]
pub(crate) fn transition_unchecked(horizon: &Horizon, n: usize, s: State, z: f64, d: f64) -> State {
    let next_cost = horizon.params(n + 1).cost;
    State::new(
        horizon.carried_inventory(z, d),
        (horizon.revenue(n, z, d) + horizon.bank_flow(n, z, s.xi())) / next_cost,
    )
}

/// Expected terminal wealth `E[R_N + K_N]` for order-up-to level `z` (currency).
pub fn terminal_expected(horizon: &Horizon, z: f64, xi: f64) -> f64 {
    let n = horizon.len();
    let p = horizon.params(n);
    let b = horizon.backorder_penalty(n).unwrap_or(0.0);
    let d = horizon.demand(n);
    let top = p.price + b;
    let offset = if b > 0.0 { b * d.mean() } else { 0.0 };
    top * z - (top - horizon.salvage()) * d.loss(z) - offset + horizon.bank_flow(n, z, xi)
}

/// Terminal value of ordering `q` from state `(x, y)`.
pub fn terminal_value(horizon: &Horizon, q: f64, s: State) -> f64 {
    terminal_expected(horizon, s.x + q, s.xi())
}

/// Exact terminal optimum over `z` in `[x, order cap]`: within each piece of
/// constant marginal interest the maximizer is a demand quantile.
pub(crate) fn terminal_optimum(horizon: &Horizon, s: State) -> Best {
    let n = horizon.len();
    let p = horizon.params(n);
    let top = p.price + horizon.backorder_penalty(n).unwrap_or(0.0);
    let denom = top - horizon.salvage();
    let d = horizon.demand(n);
    let xi = s.xi();
    let cap = horizon.order_cap(n, s);
    let mut best = Best::none();
    for piece in horizon.bank_pieces(n, xi, s.x, cap) {
        let fr = (top - p.cost * piece.factor) / denom;
        let target = if fr <= 0.0 {
            piece.lo
        } else if fr >= 1.0 {
            piece.hi.min(d.support().1.max(piece.lo))
        } else {
            d.quantile_unchecked(fr)
        };
        let z = target.clamp(piece.lo, piece.hi);
        best.offer(z, terminal_expected(horizon, z, xi));
    }
    best
}

/// `E[V_{n+1}]` for order-up-to level `z = x + q`, reading `V_{n+1}` from `next`.
pub fn stage_value(
    horizon: &Horizon,
    n: usize,
    q: f64,
    s: State,
    next: &ValueTable,
    quadrature_order: usize,
) -> Result<f64> {
    let rule = GaussLegendre::new(quadrature_order);
    let stage = Stage::new(horizon, n, next, &rule)?;
    Ok(stage.value(s.x + q, s.xi(), Bank::Actual, &mut Vec::new()))
}

/// Per-period search settings shared by the grid nodes.
pub(crate) struct StageContext {
    z_lo: f64,
    z_hi: f64,
    tol: f64,
    candidates: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PieceOptimum {
    lo: f64,
    hi: f64,
    z: f64,
    v: f64,
}

impl StageContext {
    pub fn new(horizon: &Horizon, n: usize, grid: &Grid, options: &DpOptions) -> Result<Self> {
        let d = horizon.demand(n);
        let mut candidates = Vec::new();
        if let Ok(t) = myopic_i(horizon, n) {
            candidates.extend([t.alpha, t.beta]);
        }
        if let Ok(t) = myopic_ii(horizon, n) {
            candidates.extend([t.alpha, t.beta]);
        }
        Ok(Self {
            z_lo: grid.x.lo().min(0.0),
            z_hi: grid.x.hi() + d.quantile_unchecked(1.0 - options.tail_probability),
            tol: options.z_tolerance,
            candidates,
        })
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z_lo, self.z_hi)
    }

    /// Maximizer of each constant-interest piece for net worth `xi`.
    pub fn piece_optima(&self, stage: &Stage<'_>, xi: f64, kinks: &mut Vec<f64>) -> Vec<PieceOptimum> {
        stage
            .horizon
            .bank_pieces(stage.n, xi, self.z_lo, self.z_hi)
            .into_iter()
            .map(|p| {
                let b = golden_max(
                    |z| stage.value(z, xi, Bank::Actual, kinks),
                    p.lo,
                    p.hi,
                    self.tol,
                    &self.candidates,
                );
                PieceOptimum {
                    lo: p.lo,
                    hi: p.hi,
                    z: b.z,
                    v: b.v,
                }
            })
            .collect()
    }

    fn unconstrained(pieces: &[PieceOptimum]) -> f64 {
        let mut best = Best::none();
        for p in pieces {
            best.offer(p.z, p.v);
        }
        best.z
    }

    /// Best `z` in `[x, cap]` given the per-piece maximizers; the objective is
    /// concave within a piece, so clamping each maximizer is exact.
    pub fn best_for_node(&self, stage: &Stage<'_>, s: State, pieces: &[PieceOptimum], kinks: &mut Vec<f64>) -> Best {
        let cap = stage.horizon.order_cap(stage.n, s);
        let xi = s.xi();
        let mut best = Best::none();
        for p in pieces {
            let lo = p.lo.max(s.x);
            let hi = p.hi.min(cap);
            if lo > hi {
                continue;
            }
            let z = p.z.clamp(lo, hi);
            let v = if z == p.z {
                p.v
            } else {
                stage.value(z, xi, Bank::Actual, kinks)
            };
            best.offer(z, v);
        }
        if best.z.is_nan() {
            // x beyond the search range: no order
            best.offer(s.x, stage.value(s.x, xi, Bank::Actual, kinks));
        }
        best
    }
}

/// Solves the horizon by backward induction on the configured grid.
pub fn backward_induct(horizon: &Horizon, options: &DpOptions) -> Result<DpSolution> {
    horizon.ensure_valid()?;
    let grid = options.grid.build()?;
    if !horizon.is_backorder() && grid.x.lo() < 0.0 {
        return Err(Error::InvalidGrid(
            "negative inventory nodes need the backorder rule".into(),
        ));
    }
    if options.check_reachability {
        let caps: Vec<f64> = (1..=horizon.len())
            .map(|n| order_level_bound(horizon, n, options.tail_probability))
            .collect();
        let boxes = reachable_boxes(horizon, options.initial, &caps, options.tail_probability);
        check_reachability(&grid, &boxes, options.trust_fraction)?;
    }
    let rule = GaussLegendre::new(options.quadrature_order);
    let (xi_nodes, slot) = grid.xi_nodes();
    let n_last = horizon.len();

    let mut values = Vec::with_capacity(n_last);
    let mut policies = Vec::with_capacity(n_last);
    let mut xi_policies = Vec::with_capacity(n_last);

    let terminal: Vec<Best> = (0..grid.len())
        .into_par_iter()
        .map(|k| terminal_optimum(horizon, grid.state(k)))
        .collect();
    values.push(ValueTable::new(n_last, grid, terminal.iter().map(|b| b.v).collect()));
    policies.push(PolicyTable::new(n_last, grid, terminal.iter().map(|b| b.z).collect()));
    xi_policies.push(XiPolicy {
        z: xi_nodes.iter().map(|&xi| terminal_optimum_free(horizon, xi)).collect(),
        xi: xi_nodes.clone(),
    });

    for n in (1..n_last).rev() {
        let next = values.last().expect("next period solved");
        let stage = Stage::new(horizon, n, next, &rule)?;
        let ctx = StageContext::new(horizon, n, &grid, options)?;
        let per_xi: Vec<Vec<PieceOptimum>> = xi_nodes
            .par_iter()
            .map_init(
                || Vec::with_capacity(512),
                |kinks, &xi| ctx.piece_optima(&stage, xi, kinks),
            )
            .collect();
        let nodes: Vec<Best> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(512),
                |kinks, k| ctx.best_for_node(&stage, grid.state(k), &per_xi[slot[k] as usize], kinks),
            )
            .collect();
        let xi_policy = XiPolicy {
            xi: xi_nodes.clone(),
            z: per_xi.iter().map(|p| StageContext::unconstrained(p)).collect(),
        };
        values.push(ValueTable::new(n, grid, nodes.iter().map(|b| b.v).collect()));
        policies.push(PolicyTable::new(n, grid, nodes.iter().map(|b| b.z).collect()));
        xi_policies.push(xi_policy);
    }
    values.reverse();
    policies.reverse();
    xi_policies.reverse();
    Ok(DpSolution {
        horizon: horizon.clone(),
        grid,
        options: options.clone(),
        values,
        policies,
        xi_policies,
    })
}

/// Terminal maximizer over `z` without the `z >= x` constraint.
fn terminal_optimum_free(horizon: &Horizon, xi: f64) -> f64 {
    let n = horizon.len();
    let p = horizon.params(n);
    let top = p.price + horizon.backorder_penalty(n).unwrap_or(0.0);
    let denom = top - horizon.salvage();
    let d = horizon.demand(n);
    let mut best = Best::none();
    for piece in horizon.bank_pieces(n, xi, d.support().0.min(0.0), d.support().1.max(xi)) {
        let fr = (top - p.cost * piece.factor) / denom;
        let target = if fr <= 0.0 {
            piece.lo
        } else if fr >= 1.0 {
            piece.hi
        } else {
            d.quantile_unchecked(fr)
        };
        let z = target.clamp(piece.lo, piece.hi);
        best.offer(z, terminal_expected(horizon, z, xi));
    }
    best.z
}

/// Upper bound on order-up-to levels used by sensible policies in period `n`:
/// the quantile at the most generous fractile (cheapest deposit, liquidation salvage).
fn order_level_bound(horizon: &Horizon, n: usize, tail: f64) -> f64 {
    let p = horizon.params(n);
    let top = p.price + horizon.backorder_penalty(n).unwrap_or(0.0);
    let salvage = if horizon.is_terminal(n) {
        horizon.salvage()
    } else {
        horizon.params(n + 1).cost - p.holding
    };
    let min_rate = match horizon.rate_schedule(n) {
        Some(s) => s.deposit().first().map(|t| t.rate).unwrap_or(p.deposit_rate),
        None => p.deposit_rate,
    };
    let fr = (top - p.cost * (1.0 + min_rate)) / (top - salvage);
    horizon.demand(n).quantile_unchecked(if fr.is_finite() {
        fr.clamp(0.0, 1.0 - tail)
    } else {
        1.0 - tail
    })
}

/// Values of following `policy` from every grid node.
pub fn evaluate_policy(horizon: &Horizon, options: &DpOptions, policy: &dyn OrderPolicy) -> Result<PolicyValues> {
    horizon.ensure_valid()?;
    let grid = options.grid.build()?;
    let rule = GaussLegendre::new(options.quadrature_order);
    let n_last = horizon.len();
    let order = |n: usize, s: State| -> Result<f64> {
        let z = policy.order_up_to(horizon, n, s);
        if z < s.x - 1e-9 || !z.is_finite() {
            return Err(Error::NegativeOrder {
                period: n,
                quantity: z - s.x,
            });
        }
        Ok(z.max(s.x))
    };
    let terminal: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let s = grid.state(k);
            order(n_last, s).map(|z| terminal_expected(horizon, z, s.xi()))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![ValueTable::new(n_last, grid, terminal)];
    for n in (1..n_last).rev() {
        let next = values.last().expect("next period evaluated");
        let stage = Stage::new(horizon, n, next, &rule)?;
        let v: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(512),
                |kinks, k| {
                    let s = grid.state(k);
                    order(n, s).map(|z| stage.value(z, s.xi(), Bank::Actual, kinks))
                },
            )
            .collect::<Result<_>>()?;
        values.push(ValueTable::new(n, grid, v));
    }
    values.reverse();
    Ok(PolicyValues {
        label: policy.label(),
        values,
    })
}

/// Last-period thresholds; with backorders the effective price is `p + b`.
pub(crate) fn terminal_optimum_pair(horizon: &Horizon) -> crate::single_period::ThresholdPair {
    let n = horizon.len();
    let p = horizon.params(n);
    let top = p.price + horizon.backorder_penalty(n).unwrap_or(0.0);
    let d = horizon.demand(n);
    let q =
        |rate: f64| d.quantile_unchecked(((top - p.cost * (1.0 + rate)) / (top - horizon.salvage())).clamp(0.0, 1.0));
    crate::single_period::ThresholdPair::new(q(p.loan_rate), q(p.deposit_rate))
}
