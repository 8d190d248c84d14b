//! Value and policy tables on a grid.

use std::sync::OnceLock;

use super::grid::Grid;

/// Values of one period on the grid, in currency.
#[derive(Debug, Clone)]
pub struct ValueTable {
    period: usize,
    grid: Grid,
    values: Vec<f64>,
    partials: OnceLock<(Vec<f64>, Vec<f64>)>,
}

impl PartialEq for ValueTable {
    fn eq(&self, other: &Self) -> bool {
        self.period == other.period && self.grid == other.grid && self.values == other.values
    }
}

#[inline]
fn bilinear(values: &[f64], grid: &Grid, x: f64, y: f64) -> f64 {
    let (i, tx) = grid.x.locate(x);
    let (j, ty) = grid.y.locate(y);
    let ny = grid.y.len();
    let k = i * ny + j;
    let (v00, v01, v10, v11) = (values[k], values[k + 1], values[k + ny], values[k + ny + 1]);
    let a = v00 + ty * (v01 - v00);
    let b = v10 + ty * (v11 - v10);
    a + tx * (b - a)
}

impl ValueTable {
    pub fn new(period: usize, grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "value count must match the grid");
        Self {
            period,
            grid,
            values,
            partials: OnceLock::new(),
        }
    }

    pub fn from_fn(period: usize, grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.states().map(|s| f(s.x, s.y)).collect();
        Self::new(period, grid, values)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Bilinear inside the grid, linear continuation of the boundary cells outside.
    #[inline]
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        bilinear(&self.values, &self.grid, x, y)
    }

    /// Central differences at interior nodes, one-sided at the edges, interpolated bilinearly.
    pub fn partials(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = self.partial_fields();
        (bilinear(dx, &self.grid, x, y), bilinear(dy, &self.grid, x, y))
    }

    pub(crate) fn partial_fields(&self) -> (&[f64], &[f64]) {
        let (dx, dy) = self.partials.get_or_init(|| {
            let (nx, ny) = (self.grid.x.len(), self.grid.y.len());
            let (hx, hy) = (self.grid.x.step(), self.grid.y.step());
            let mut dx = vec![0.0; self.values.len()];
            let mut dy = vec![0.0; self.values.len()];
            for i in 0..nx {
                for j in 0..ny {
                    let k = self.grid.index(i, j);
                    let (il, ir) = (i.saturating_sub(1), (i + 1).min(nx - 1));
                    let (jl, jr) = (j.saturating_sub(1), (j + 1).min(ny - 1));
                    dx[k] = (self.node(ir, j) - self.node(il, j)) / ((ir - il) as f64 * hx);
                    dy[k] = (self.node(i, jr) - self.node(i, jl)) / ((jr - jl) as f64 * hy);
                }
            }
            (dx, dy)
        });
        (dx, dy)
    }

    /// Checks monotonicity and discrete concavity along x, y and the diagonal.
    pub fn structure(&self, tol: f64) -> StructureReport {
        let (nx, ny) = (self.grid.x.len(), self.grid.y.len());
        let mut r = StructureReport::default();
        let v = |i: usize, j: usize| self.node(i, j);
        for i in 0..nx {
            for j in 0..ny {
                if i + 1 < nx {
                    r.worst_decrease_x = r.worst_decrease_x.max(v(i, j) - v(i + 1, j));
                }
                if j + 1 < ny {
                    r.worst_decrease_y = r.worst_decrease_y.max(v(i, j) - v(i, j + 1));
                }
                if i + 2 < nx {
                    r.worst_convexity_x = r.worst_convexity_x.max(v(i, j) + v(i + 2, j) - 2.0 * v(i + 1, j));
                }
                if j + 2 < ny {
                    r.worst_convexity_y = r.worst_convexity_y.max(v(i, j) + v(i, j + 2) - 2.0 * v(i, j + 1));
                }
                if i + 2 < nx && j + 2 < ny {
                    r.worst_convexity_diag = r
                        .worst_convexity_diag
                        .max(v(i, j) + v(i + 2, j + 2) - 2.0 * v(i + 1, j + 1));
                }
            }
        }
        r.tolerance = tol;
        r
    }

    /// Largest `V(x+d, y-d) - V(x, y)` over node pairs on a constant-`xi` line,
    /// with `d` the smallest shift that is a whole number of steps on both axes.
    /// Nonpositive when capital is worth at least as much as inventory. Falls
    /// back to `(dV/dx - dV/dy) * hx` from differences when no such `d` exists
    /// within 1000 y-steps.
    pub fn capital_preference_violation(&self) -> f64 {
        let (hx, hy) = (self.grid.x.step(), self.grid.y.step());
        let (nx, ny) = (self.grid.x.len(), self.grid.y.len());
        let shift = (1..=1000usize).find_map(|ky| {
            let kx = (ky as f64 * hy / hx).round() as usize;
            (kx > 0 && (kx as f64 * hx - ky as f64 * hy).abs() <= 1e-9 * hx).then_some((kx, ky))
        });
        match shift {
            Some((kx, ky)) if kx < nx && ky < ny => {
                let mut worst = f64::NEG_INFINITY;
                for i in 0..nx - kx {
                    for j in ky..ny {
                        worst = worst.max(self.node(i + kx, j - ky) - self.node(i, j));
                    }
                }
                worst
            }
            _ => {
                let (dx, dy) = self.partial_fields();
                dx.iter().zip(dy).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max) * hx
            }
        }
    }
}

/// Worst violations found by [`ValueTable::structure`]; positive entries are violations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StructureReport {
    pub worst_decrease_x: f64,
    pub worst_decrease_y: f64,
    pub worst_convexity_x: f64,
    pub worst_convexity_y: f64,
    pub worst_convexity_diag: f64,
    pub tolerance: f64,
}

impl StructureReport {
    pub fn monotone(&self) -> bool {
        self.worst_decrease_x <= self.tolerance && self.worst_decrease_y <= self.tolerance
    }

    pub fn monotone_in_y(&self) -> bool {
        self.worst_decrease_y <= self.tolerance
    }

    pub fn concave(&self) -> bool {
        self.worst_convexity_x <= self.tolerance
            && self.worst_convexity_y <= self.tolerance
            && self.worst_convexity_diag <= self.tolerance
    }
}

/// Optimal order-up-to levels `z*(x, y)` of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    period: usize,
    grid: Grid,
    z: Vec<f64>,
}

impl PolicyTable {
    pub fn new(period: usize, grid: Grid, z: Vec<f64>) -> Self {
        assert_eq!(z.len(), grid.len(), "policy count must match the grid");
        Self { period, grid, z }
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn levels(&self) -> &[f64] {
        &self.z
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.z[self.grid.index(i, j)]
    }

    /// Interpolated order-up-to level, never below `x`.
    pub fn order_up_to(&self, x: f64, y: f64) -> f64 {
        bilinear(&self.z, &self.grid, x, y).max(x)
    }
}
