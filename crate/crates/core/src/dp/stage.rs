//! Expectations over one period's demand of quantities read off the next table.
//!
//! With order-up-to level `z` and `u = z - d`, the next state lies on the path
//! `x' = u^+` (or `u` with backorders) and `y' = y0 - k u^+`. Bilinear fields are
//! piecewise quadratic along that path, with breaks where it crosses grid lines,
//! so splitting the demand range there makes low-order Gauss-Legendre exact.

use crate::demand::Demand;
use crate::error::{Error, Result};
use crate::model::{Horizon, State};
use crate::quadrature::GaussLegendre;

use super::table::ValueTable;

pub(crate) struct Stage<'a> {
    pub horizon: &'a Horizon,
    pub n: usize,
    pub next: &'a ValueTable,
    rule: &'a GaussLegendre,
    demand: &'a Demand,
    cost: f64,
    next_cost: f64,
    /// Revenue per unit of stock when everything sells.
    top: f64,
    /// Constant revenue offset (backorder penalty on mean demand).
    offset: f64,
    /// Revenue lost per unit left over.
    slope: f64,
    backorder: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Bank {
    /// Bank flow as defined by the horizon.
    Actual,
    /// Fixed gross factor on the whole balance.
    Factor(f64),
}

impl<'a> Stage<'a> {
    pub fn new(horizon: &'a Horizon, n: usize, next: &'a ValueTable, rule: &'a GaussLegendre) -> Result<Self> {
        if n == 0 || n >= horizon.len() {
            return Err(Error::PeriodOutOfRange {
                period: n,
                horizon: horizon.len(),
            });
        }
        let p = horizon.params(n);
        let b = horizon.backorder_penalty(n).unwrap_or(0.0);
        let demand = horizon.demand(n);
        Ok(Self {
            horizon,
            n,
            next,
            rule,
            demand,
            cost: p.cost,
            next_cost: horizon.params(n + 1).cost,
            top: p.price + b,
            offset: b * demand.mean(),
            slope: p.price + p.holding + b,
            backorder: horizon.is_backorder(),
        })
    }

    #[inline]
    fn bank_flow(&self, z: f64, xi: f64, bank: Bank) -> f64 {
        match bank {
            Bank::Actual => self.horizon.bank_flow(self.n, z, xi),
            Bank::Factor(f) => self.cost * (xi - z) * f,
        }
    }

    /// `y'` when nothing is left over, in next-period units.
    #[inline]
    fn y_full(&self, z: f64, bank_currency: f64) -> f64 {
        (self.top * z - self.offset + bank_currency) / self.next_cost
    }

    #[inline]
    fn next_state(&self, z: f64, y0: f64, d: f64) -> State {
        let u = z - d;
        let k = self.slope / self.next_cost;
        if u > 0.0 {
            State::new(u, y0 - k * u)
        } else if self.backorder {
            State::new(u, y0)
        } else {
            State::new(0.0, y0)
        }
    }

    /// Pushes the demand values where the path crosses a grid line, plus `d = z`.
    fn kinks(&self, z: f64, y0: f64, kinks: &mut Vec<f64>) {
        kinks.clear();
        if self.demand.is_discrete() {
            return;
        }
        let (lo, hi) = self.demand.support();
        kinks.push(z);
        let grid = self.next.grid();
        let k = self.slope / self.next_cost;
        // u in (u_min, u_max) as d runs over the support
        let (u_min, u_max) = (z - hi, z - lo);
        if u_max > 0.0 {
            let a = u_min.max(0.0);
            grid.x.for_each_between(a, u_max, |xv| kinks.push(z - xv));
            if k != 0.0 {
                grid.y
                    .for_each_between(y0 - k * a, y0 - k * u_max, |yv| kinks.push(z - (y0 - yv) / k));
            }
        }
        if self.backorder && u_min < 0.0 {
            grid.x.for_each_between(u_min, u_max.min(0.0), |xv| kinks.push(z - xv));
        }
    }

    /// `E[V_{n+1}(x', y')]` for order-up-to level `z` and net worth `xi`.
    #[inline]
    pub fn value(&self, z: f64, xi: f64, bank: Bank, kinks: &mut Vec<f64>) -> f64 {
        let y0 = self.y_full(z, self.bank_flow(z, xi, bank));
        self.kinks(z, y0, kinks);
        self.demand.expect(self.rule, kinks, |d| {
            let s = self.next_state(z, y0, d);
            self.next.value_at(s.x, s.y)
        })
    }

    /// Derivative of [`Stage::value`] in `z` under a fixed bank factor, using the
    /// finite-difference partials of the next table.
    pub fn derivative(&self, z: f64, xi: f64, factor: f64, kinks: &mut Vec<f64>) -> f64 {
        let y0 = self.y_full(z, self.cost * (xi - z) * factor);
        self.kinks(z, y0, kinks);
        let k = self.slope / self.next_cost;
        let dy_full = (self.top - self.cost * factor) / self.next_cost;
        self.demand.expect(self.rule, kinks, |d| {
            let s = self.next_state(z, y0, d);
            let (vx, vy) = self.next.partials(s.x, s.y);
            let leftover = z > d;
            let dx = if leftover || self.backorder { 1.0 } else { 0.0 };
            let dy = if leftover { dy_full - k } else { dy_full };
            vx * dx + vy * dy
        })
    }
}
