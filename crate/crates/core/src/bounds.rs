//! Upper bounds on the value function from letting the firm sell inventory back
//! at cost, which collapses the state to net worth `xi = x + y`.

use rayon::prelude::*;

use crate::dp::{golden_max, terminal_optimum, Axis, Best, DpSolution, GridSpec, PolicyValues};
use crate::error::{Error, Result};
use crate::model::{Horizon, State};
use crate::quadrature::GaussLegendre;

/// Next-period net worth (in next-period units) after raising stock to `z`.
pub fn xi_transition(horizon: &Horizon, n: usize, xi: f64, z: f64, d: f64) -> Result<f64> {
    if n == 0 || n >= horizon.len() {
        return Err(Error::PeriodOutOfRange {
            period: n,
            horizon: horizon.len(),
        });
    }
    let next_cost = horizon.params(n + 1).cost;
    Ok(horizon.carried_inventory(z, d) + (horizon.revenue(n, z, d) + horizon.bank_flow(n, z, xi)) / next_cost)
}

/// One period of the selling-back bound over a uniform `xi` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct XiValueTable {
    pub period: usize,
    axis: Axis,
    values: Vec<f64>,
    /// Maximizing order-up-to level at each node.
    orders: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl XiValueTable {
    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    /// Piecewise-linear interpolation, extended linearly past the ends.
    #[inline]
    pub fn value_at(&self, xi: f64) -> f64 {
        let (k, t) = self.axis.locate(xi);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    /// Clamp rule `min(max(xi, alpha), beta)`.
    pub fn order_up_to(&self, xi: f64) -> f64 {
        xi.max(self.alpha).min(self.beta)
    }

    /// Largest decrease between neighbours (0 when nondecreasing).
    pub fn worst_decrease(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[0] - w[1]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest positive second difference (0 when discretely concave).
    pub fn worst_convexity(&self) -> f64 {
        self.values
            .windows(3)
            .map(|w| (w[0] - 2.0 * w[1] + w[2]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Value tables of the selling-back problem for periods `1..=N`.
#[derive(Debug, Clone)]
pub struct SellingBack {
    tables: Vec<XiValueTable>,
}

impl SellingBack {
    pub fn tables(&self) -> &[XiValueTable] {
        &self.tables
    }

    pub fn table(&self, n: usize) -> &XiValueTable {
        &self.tables[n - 1]
    }

    pub fn value(&self, n: usize, xi: f64) -> f64 {
        self.table(n).value_at(xi)
    }
}

/// `xi` axis with the y spacing of `grid`, covering `[y_min, x_max + y_max]`.
pub fn xi_axis_for(grid: &GridSpec) -> Result<Axis> {
    let step = (grid.y_max - grid.y_min) / (grid.ny - 1) as f64;
    let hi = grid.x_max + grid.y_max;
    let len = ((hi - grid.y_min) / step - 1e-9).ceil() as usize + 1;
    Axis::new(grid.y_min, grid.y_min + (len - 1) as f64 * step, len)
}

/// Expectation of a function of next-period net worth. The path `xi'(d)` is
/// linear on each side of `d = z`, so breaking the demand range where it
/// crosses the nodes of `axis` keeps the quadrature exact for linear interpolants.
struct XiStage<'a> {
    horizon: &'a Horizon,
    n: usize,
    axis: &'a Axis,
    rule: GaussLegendre,
    next_cost: f64,
    /// `d xi' / d d` below `z` (leftover side).
    slope: f64,
}

impl<'a> XiStage<'a> {
    fn new(horizon: &'a Horizon, n: usize, axis: &'a Axis, order: usize) -> Self {
        let p = horizon.params(n);
        let next_cost = horizon.params(n + 1).cost;
        Self {
            horizon,
            n,
            axis,
            rule: GaussLegendre::new(order),
            next_cost,
            slope: (p.price + p.holding) / next_cost - 1.0,
        }
    }

    fn expect(&self, z: f64, xi: f64, factor: Option<f64>, kinks: &mut Vec<f64>, f: impl Fn(f64) -> f64) -> f64 {
        let p = self.horizon.params(self.n);
        let bank = match factor {
            Some(g) => p.cost * (xi - z) * g,
            None => self.horizon.bank_flow(self.n, z, xi),
        };
        let top = (p.price * z + bank) / self.next_cost;
        let demand = self.horizon.demand(self.n);
        kinks.clear();
        if !demand.is_discrete() {
            let lo = demand.support().0;
            kinks.push(z);
            if z > lo && self.slope != 0.0 {
                self.axis.for_each_between(top - self.slope * (z - lo), top, |v| {
                    kinks.push(z - (top - v) / self.slope)
                });
            }
        }
        demand.expect(&self.rule, kinks, |d| f(top - self.slope * (z - d).max(0.0)))
    }
}

/// Backward induction for the selling-back bound `V^S`.
pub fn selling_back_dp(horizon: &Horizon, axis: Axis) -> Result<SellingBack> {
    horizon.ensure_valid()?;
    if horizon.is_backorder() {
        return Err(Error::InvalidArgument(
            "the selling-back bound is defined for lost sales only".into(),
        ));
    }
    for n in 1..horizon.len() {
        let p = horizon.params(n);
        let next_cost = horizon.params(n + 1).cost;
        if next_cost > p.cost + p.holding {
            return Err(Error::SellingBackCondition {
                period: n,
                next_cost,
                bound: p.cost + p.holding,
            });
        }
    }
    let n_last = horizon.len();
    let nodes: Vec<f64> = axis.nodes().collect();
    let terminal: Vec<Best> = nodes
        .par_iter()
        .map(|&xi| terminal_optimum(horizon, State::new(0.0, xi)))
        .collect();
    let mut tables = vec![finish(n_last, axis, &nodes, terminal)];
    for n in (1..n_last).rev() {
        let next = tables.last().expect("next period solved");
        let stage = XiStage::new(horizon, n, &axis, 2);
        // Past the top of the support every extra unit is left over, which loses money.
        let z_hi = horizon.demand(n).support().1;
        let best: Vec<Best> = nodes
            .par_iter()
            .map_init(
                || Vec::with_capacity(256),
                |kinks, &xi| {
                    let cap = horizon.order_cap(n, State::new(0.0, xi));
                    let mut best = Best::none();
                    for piece in horizon.bank_pieces(n, xi, 0.0, z_hi.min(cap)) {
                        let b = golden_max(
                            |z| stage.expect(z, xi, None, kinks, |v| next.value_at(v)),
                            piece.lo,
                            piece.hi,
                            1e-7,
                            &[],
                        );
                        best.offer(b.z, b.v);
                    }
                    best
                },
            )
            .collect();
        tables.push(finish(n, axis, &nodes, best));
    }
    tables.reverse();
    Ok(SellingBack { tables })
}

/// Builds a table and reads off the clamp thresholds: `alpha` is the order level
/// at the last node that still borrows, `beta` the one at the first node that deposits.
fn finish(period: usize, axis: Axis, nodes: &[f64], best: Vec<Best>) -> XiValueTable {
    let tol = 1e-6;
    let orders: Vec<f64> = best.iter().map(|b| b.z).collect();
    let alpha = nodes
        .iter()
        .zip(&orders)
        .filter(|(xi, z)| **z > **xi + tol)
        .map(|(_, z)| *z)
        .next_back()
        .unwrap_or(0.0);
    let beta = nodes
        .iter()
        .zip(&orders)
        .find(|(xi, z)| **z < **xi - tol)
        .map(|(_, z)| *z)
        .unwrap_or(f64::INFINITY);
    XiValueTable {
        period,
        axis,
        values: best.iter().map(|b| b.v).collect(),
        orders,
        alpha,
        beta: beta.max(alpha),
    }
}

/// One-step liquidation bound: `max_{z >= x} E[V_{n+1}(0, xi')]`, reading
/// `V_{n+1}` from the solved tables. For `n = N` it is the terminal value.
pub fn liquidation_bound(solution: &DpSolution, n: usize, s: State) -> Result<f64> {
    let horizon = solution.horizon();
    if n == 0 || n > horizon.len() {
        return Err(Error::PeriodOutOfRange {
            period: n,
            horizon: horizon.len(),
        });
    }
    if n == horizon.len() {
        return Ok(terminal_optimum(horizon, s).v);
    }
    let next = solution.value_table(n + 1);
    let axis = next.grid().y;
    let stage = XiStage::new(horizon, n, &axis, 2);
    let xi = s.xi();
    let cap = horizon.order_cap(n, s);
    let z_hi = horizon.demand(n).support().1.max(s.x).min(cap);
    let mut kinks = Vec::new();
    let mut best = Best::none();
    for piece in horizon.bank_pieces(n, xi, s.x, z_hi) {
        let b = golden_max(
            |z| stage.expect(z, xi, None, &mut kinks, |v| next.value_at(0.0, v)),
            piece.lo,
            piece.hi,
            1e-7,
            &[],
        );
        best.offer(b.z, b.v);
    }
    Ok(best.v)
}

/// One line of the lower/upper bound comparison at a starting state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub state: State,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl BoundRow {
    /// `V - V_lower`.
    pub fn lower_gap(&self) -> f64 {
        self.value - self.lower
    }

    pub fn lower_gap_pct(&self) -> f64 {
        100.0 * self.lower_gap() / self.value
    }

    /// `V - V^S`; nonpositive when the bound holds.
    pub fn upper_gap(&self) -> f64 {
        self.value - self.upper
    }

    pub fn upper_gap_pct(&self) -> f64 {
        100.0 * self.upper_gap() / self.value
    }

    /// True when `lower <= value <= upper` up to `tol` (relative to `value`).
    pub fn ordered(&self, tol: f64) -> bool {
        let slack = tol * self.value.abs();
        self.lower <= self.value + slack && self.value <= self.upper + slack
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    pub tolerance: f64,
}

impl BoundReport {
    pub fn violations(&self) -> Vec<&BoundRow> {
        self.rows.iter().filter(|r| !r.ordered(self.tolerance)).collect()
    }
}

/// Compares period-1 values of the lower-bound policy, the optimum and the
/// selling-back bound at each state.
pub fn compare_bounds(
    solution: &DpSolution,
    upper: &SellingBack,
    lower: &PolicyValues,
    states: &[State],
    tolerance: f64,
) -> BoundReport {
    let rows = states
        .iter()
        .map(|&s| BoundRow {
            state: s,
            lower: lower.value(1, s),
            value: solution.value(1, s),
            upper: upper.value(1, s.xi()),
        })
        .collect();
    BoundReport { rows, tolerance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::Demand;
    use crate::model::PeriodParams;
    use crate::single_period::SinglePeriod;

    fn horizon(n: usize) -> Horizon {
        Horizon::stationary(
            n,
            PeriodParams::new(2000.0, 1000.0, 500.0, 0.01, 0.15),
            Demand::uniform(0.0, 20.0).unwrap(),
            600.0,
        )
    }

    #[test]
    fn transition_examples() {
        let h = horizon(3);
        assert!((xi_transition(&h, 1, 10.0, 10.0, 4.0).unwrap() - 11.0).abs() < 1e-12);
        assert!((xi_transition(&h, 1, 7.0, 0.0, 3.0).unwrap() - 7.07).abs() < 1e-12);
        // stockout: 2z + (xi - z)(1 + i)
        assert!((xi_transition(&h, 1, 8.0, 5.0, 9.0).unwrap() - (10.0 + 3.0 * 1.01)).abs() < 1e-12);
        assert!(xi_transition(&h, 3, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn xi_axis_covers_grid_sum() {
        let a = xi_axis_for(&GridSpec::default()).unwrap();
        assert_eq!(a.lo(), -60.0);
        assert!((a.step() - 0.9).abs() < 1e-12);
        assert!(a.hi() >= 160.0 - 1e-9 && a.hi() < 161.0);
    }

    #[test]
    fn one_period_bound_is_single_period_value() {
        let h = horizon(1);
        let sb = selling_back_dp(&h, Axis::new(-20.0, 40.0, 61).unwrap()).unwrap();
        let sp = SinglePeriod::new(*h.params(1), 600.0, h.demand(1));
        for xi in [-20.0, -3.0, 0.0, 12.0, 40.0] {
            let want = sp.value(0.0, xi).unwrap();
            assert!((sb.value(1, xi) - want).abs() < 1e-6 * want.abs().max(1.0), "{xi}");
        }
        assert!((sb.table(1).alpha - 12.142857142857142).abs() < 1e-6);
        assert!((sb.table(1).beta - 14.142857142857142).abs() < 1e-6);
    }

    #[test]
    fn bound_is_monotone_concave_with_clamp_policy() {
        let h = horizon(3);
        let sb = selling_back_dp(&h, Axis::new(-40.0, 80.0, 241).unwrap()).unwrap();
        for t in sb.tables() {
            let scale = t.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(t.worst_decrease() <= 1e-9 * scale, "period {}", t.period);
            assert!(t.worst_convexity() <= 1e-6 * scale, "period {}", t.period);
            assert!(t.alpha <= t.beta);
            let step = t.axis().step();
            for (xi, z) in t.axis().nodes().zip(t.orders()) {
                assert!(
                    (z - t.order_up_to(xi)).abs() <= step + 1e-6,
                    "period {} xi {xi}: {z}",
                    t.period
                );
            }
        }
    }

    #[test]
    fn precondition_is_enforced() {
        let periods = vec![
            PeriodParams::new(2000.0, 1000.0, 100.0, 0.01, 0.15),
            PeriodParams::new(2000.0, 1200.0, 100.0, 0.01, 0.15),
        ];
        let d = Demand::uniform(0.0, 20.0).unwrap();
        let h = Horizon::new(periods, vec![d.clone(), d], 600.0);
        let err = selling_back_dp(&h, Axis::new(0.0, 10.0, 11).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SellingBackCondition { period: 1, .. }));
    }

    #[test]
    fn backorder_is_rejected() {
        let h = horizon(2).with_backorder(vec![100.0; 2]);
        assert!(selling_back_dp(&h, Axis::new(0.0, 10.0, 11).unwrap()).is_err());
    }
}
