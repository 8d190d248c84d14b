//! Uniform state grids and the reachability check that sizes them.

use crate::error::{Error, Result};
use crate::model::{Horizon, State};

/// Evenly spaced nodes `lo + k * step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    lo: f64,
    step: f64,
    len: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if len < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "axis needs at least two nodes on a finite nonempty range, got [{lo}, {hi}] with {len}"
            )));
        }
        Ok(Self {
            lo,
            step: (hi - lo) / (len - 1) as f64,
            len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn span(&self) -> f64 {
        self.hi() - self.lo
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|k| self.node(k))
    }

    /// Cell index `k` and local coordinate `t` with `v = node(k) + t * step`.
    /// Outside the axis the boundary cell is used and `t` leaves `[0, 1]`.
    #[inline]
    pub fn locate(&self, v: f64) -> (usize, f64) {
        let s = (v - self.lo) / self.step;
        let k = (s.floor().max(0.0) as usize).min(self.len - 2);
        (k, s - k as f64)
    }

    /// Node values strictly between `a` and `b` (in either order), pushed through `f`.
    #[inline]
    pub fn for_each_between(&self, a: f64, b: f64, mut f: impl FnMut(f64)) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let first = ((a - self.lo) / self.step).floor() as i64 + 1;
        let last = ((b - self.lo) / self.step).ceil() as i64 - 1;
        let first = first.max(0);
        let last = last.min(self.len as i64 - 1);
        for k in first..=last {
            let v = self.node(k as usize);
            if v > a && v < b {
                f(v);
            }
        }
    }
}

/// Grid description as it appears in configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 40.0,
            nx: 161,
            y_min: -60.0,
            y_max: 120.0,
            ny: 201,
        }
    }
}

impl GridSpec {
    /// Multiplies the node counts (not the ranges) by `factor`, keeping at least two nodes.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |n: usize| (((n - 1) as f64 * factor).round() as usize).max(1) + 1;
        Self {
            nx: scale(self.nx),
            ny: scale(self.ny),
            ..*self
        }
    }

    pub fn build(&self) -> Result<Grid> {
        Ok(Grid {
            x: Axis::new(self.x_min, self.x_max, self.nx)?,
            y: Axis::new(self.y_min, self.y_max, self.ny)?,
        })
    }
}

/// Tensor grid over `(x, y)`; node `(i, j)` is stored at `i * ny + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x: Axis,
    pub y: Axis,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.x.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.y.len() + j
    }

    #[inline]
    pub fn state(&self, idx: usize) -> State {
        let ny = self.y.len();
        State::new(self.x.node(idx / ny), self.y.node(idx % ny))
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(|k| self.state(k))
    }

    /// Distinct node sums `x + y` in increasing order, and each node's position in that list.
    pub fn xi_nodes(&self) -> (Vec<f64>, Vec<u32>) {
        let mut keyed: Vec<(f64, u32)> = (0..self.len()).map(|k| (self.state(k).xi(), k as u32)).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tol = 1e-9 * (self.x.step().min(self.y.step()));
        let mut xi = Vec::new();
        let mut slot = vec![0u32; self.len()];
        for (v, k) in keyed {
            match xi.last() {
                Some(last) if v - last <= tol => {}
                _ => xi.push(v),
            }
            slot[k as usize] = (xi.len() - 1) as u32;
        }
        (xi, slot)
    }
}

/// Set of initial states the reachability check starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Default for InitialBox {
    fn default() -> Self {
        Self::point(State::ORIGIN)
    }
}

impl InitialBox {
    pub fn point(s: State) -> Self {
        Self {
            x: (s.x, s.x),
            y: (s.y, s.y),
        }
    }

    pub fn covering(states: &[State]) -> Self {
        let mut b = Self::point(states.first().copied().unwrap_or_default());
        for s in states {
            b.x = (b.x.0.min(s.x), b.x.1.max(s.x));
            b.y = (b.y.0.min(s.y), b.y.1.max(s.y));
        }
        b
    }
}

/// Interval bounds on the state at the start of a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachBox {
    pub x: (f64, f64),
    pub xi: (f64, f64),
}

impl ReachBox {
    pub fn y(&self) -> (f64, f64) {
        (self.xi.0 - self.x.1, self.xi.1 - self.x.0)
    }
}

/// Forward interval propagation from `initial`. Order-up-to levels are bounded by
/// `max(x, z_cap[n-1])` and demand by its `tail` and `1 - tail` quantiles.
pub fn reachable_boxes(horizon: &Horizon, initial: InitialBox, z_cap: &[f64], tail: f64) -> Vec<ReachBox> {
    let mut out = Vec::with_capacity(horizon.len());
    let mut cur = ReachBox {
        x: initial.x,
        xi: (initial.x.0 + initial.y.0, initial.x.1 + initial.y.1),
    };
    out.push(cur);
    for n in 1..horizon.len() {
        let d = horizon.demand(n);
        let (d_lo, d_hi) = (d.quantile_unchecked(tail), d.quantile_unchecked(1.0 - tail));
        let z_lo = cur.x.0;
        let z_hi = cur.x.1.max(z_cap[n - 1]);
        let next_cost = horizon.params(n + 1).cost;
        let mut zs: Vec<f64> = (0..=64).map(|k| z_lo + (z_hi - z_lo) * k as f64 / 64.0).collect();
        zs.extend(
            [d_lo, d_hi, cur.xi.0, cur.xi.1]
                .iter()
                .copied()
                .filter(|z| *z >= z_lo && *z <= z_hi),
        );
        let mut xi_lo = f64::INFINITY;
        let mut xi_hi = f64::NEG_INFINITY;
        let mut x_lo = f64::INFINITY;
        let mut x_hi = f64::NEG_INFINITY;
        for &z in &zs {
            for (xi, dd) in [(cur.xi.0, d_lo), (cur.xi.1, d_hi), (cur.xi.0, d_hi), (cur.xi.1, d_lo)] {
                let xn = horizon.carried_inventory(z, dd);
                let yn = (horizon.revenue(n, z, dd) + horizon.bank_flow(n, z, xi)) / next_cost;
                xi_lo = xi_lo.min(xn + yn);
                xi_hi = xi_hi.max(xn + yn);
                x_lo = x_lo.min(xn);
                x_hi = x_hi.max(xn);
            }
        }
        cur = ReachBox {
            x: (x_lo, x_hi),
            xi: (xi_lo, xi_hi),
        };
        out.push(cur);
    }
    out
}

/// Fails when a reachable box leaves the grid by more than `trust` times the axis span.
pub fn check_reachability(grid: &Grid, boxes: &[ReachBox], trust: f64) -> Result<()> {
    for b in boxes {
        for (axis, name, (lo, hi)) in [(&grid.x, "x", b.x), (&grid.y, "y", b.y())] {
            let slack = trust * axis.span();
            if lo < axis.lo() - slack || hi > axis.hi() + slack {
                return Err(Error::GridEscape {
                    axis: name,
                    reach_lo: lo,
                    reach_hi: hi,
                    grid_lo: axis.lo(),
                    grid_hi: axis.hi(),
                    trust: slack,
                });
            }
        }
    }
    Ok(())
}
