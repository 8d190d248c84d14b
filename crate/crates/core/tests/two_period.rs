//! Two-period checks against a brute-force maximization written from the model
//! equations, with the closed-form last period.

use cashinv_core::threshold::{argmax_threshold_table, bisect_thresholds, BisectOptions};
use cashinv_core::{backward_induct, Demand, DpOptions, GridSpec, Horizon, PeriodParams, SinglePeriod, State};

const P: f64 = 2000.0;
const C: f64 = 1000.0;
const H: f64 = 500.0;
const I: f64 = 0.01;
const L: f64 = 0.15;
const S: f64 = 600.0;

fn horizon() -> Horizon {
    Horizon::stationary(
        2,
        PeriodParams::new(P, C, H, I, L),
        Demand::uniform(0.0, 20.0).unwrap(),
        S,
    )
}

/// `E[V_2(state after period 1)]` by a 4000-point midpoint rule over `U[0, 20]`.
fn first_stage(last: &SinglePeriod, x: f64, y: f64, z: f64) -> f64 {
    let xi = x + y;
    staged(last, xi, z, if xi >= z { 1.0 + I } else { 1.0 + L })
}

/// Same, with the bank factor fixed.
fn staged(last: &SinglePeriod, xi: f64, z: f64, factor: f64) -> f64 {
    let bank = C * (xi - z) * factor;
    let m = 4000;
    let mut total = 0.0;
    for k in 0..m {
        let d = 20.0 * (k as f64 + 0.5) / m as f64;
        let left = (z - d).max(0.0);
        let y2 = (P * z - (P + H) * left + bank) / C;
        total += last.value(left, y2).unwrap();
    }
    total / m as f64
}

fn brute_force(last: &SinglePeriod, x: f64, y: f64) -> f64 {
    maximize(|z| first_stage(last, x, y, z), x).1
}

/// Lattice over `[lo, lo + 40]` then golden section; returns `(argmax, max)`.
fn maximize(f: impl Fn(f64) -> f64, x: f64) -> (f64, f64) {
    let (mut best_z, mut best) = (x, f(x));
    for k in 1..=200 {
        let z = x + 0.2 * k as f64;
        let v = f(z);
        if v > best {
            (best_z, best) = (z, v);
        }
    }
    let (mut a, mut b) = ((best_z - 0.2).max(x), best_z + 0.2);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let z = 0.5 * (a + b);
    if f(z) > best {
        (z, f(z))
    } else {
        (best_z, best)
    }
}

const STATES: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.0, 9.0),
    (5.0, -4.5),
    (12.0, 18.0),
    (2.5, 45.0),
    (20.0, -30.6),
];

fn solve(scale: f64) -> cashinv_core::DpSolution {
    backward_induct(
        &horizon(),
        &DpOptions::default().with_grid(GridSpec::default().scaled(scale)),
    )
    .unwrap()
}

/// Interpolating the next-period table is second order: halving the steps cuts the error about fourfold.
#[test]
fn first_period_matches_brute_force() {
    let d = Demand::uniform(0.0, 20.0).unwrap();
    let last = SinglePeriod::new(PeriodParams::new(P, C, H, I, L), S, &d);
    let want: Vec<f64> = STATES.iter().map(|&(x, y)| brute_force(&last, x, y)).collect();
    let worst = |sol: &cashinv_core::DpSolution| {
        STATES
            .iter()
            .zip(&want)
            .map(|(&(x, y), w)| {
                let got = sol.value(1, State::new(x, y));
                assert!(got <= w + 1e-6 * w.abs(), "({x}, {y}): dp {got} above the optimum {w}");
                (got - w).abs() / w.abs()
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (worst(&solve(1.0)), worst(&solve(2.0)));
    assert!(coarse < 1e-4, "coarse grid error {coarse:.2e}");
    assert!(fine < coarse / 3.0, "errors {coarse:.2e} -> {fine:.2e}");
}

/// Both threshold routes land near the brute-force maximizers of the fixed-factor objective.
#[test]
fn threshold_routes_agree_with_brute_force() {
    let d = Demand::uniform(0.0, 20.0).unwrap();
    let last = SinglePeriod::new(PeriodParams::new(P, C, H, I, L), S, &d);
    let sol = solve(1.0);
    let bis = bisect_thresholds(
        &sol,
        BisectOptions {
            epsilon: 1e-5,
            ..Default::default()
        },
    )
    .unwrap();
    let arg = argmax_threshold_table(&sol).unwrap();
    for xi in [-20.0, -0.95, 0.975, 5.0, 10.0, 30.0] {
        let alpha = maximize(|z| staged(&last, xi, z, 1.0 + L), 0.0).0;
        let beta = maximize(|z| staged(&last, xi, z, 1.0 + I), 0.0).0;
        // beta falls by about 0.4 across the loan/deposit kink of V_2 near xi = 0,
        // inside one capital step of the grid
        let tol = if xi.abs() < 2.0 { 0.1 } else { 0.02 };
        for (route, t) in [("bisection", bis.row(1).at(xi)), ("argmax", arg.row(1).at(xi))] {
            assert!(
                (t.alpha - alpha).abs() < tol,
                "{route} alpha at {xi}: {} vs {alpha}",
                t.alpha
            );
            assert!(
                (t.beta - beta).abs() < tol,
                "{route} beta at {xi}: {} vs {beta}",
                t.beta
            );
        }
    }
}
