//! Monte Carlo evaluation of ordering policies.
//!
//! Path `k` draws its demands from a ChaCha8 stream selected by `k`, so every
//! policy run with the same seed sees the same demands (common random numbers),
//! and results do not depend on how paths are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dp::{backward_induct, evaluate_policy, transition_unchecked, DpOptions};
use crate::error::{Error, Result};
use crate::model::{Horizon, State};
use crate::policy::{OrderPolicy, StaticThresholds};

/// 97.5% standard normal quantile.
const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub paths: usize,
    pub seed: u64,
    /// Pair path `2k` with `2k + 1` using complementary uniforms.
    pub antithetic: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            paths: 100_000,
            seed: 1,
            antithetic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub label: String,
    /// Mean terminal wealth (currency).
    pub mean: f64,
    /// Half-width of the 95% confidence interval.
    pub half_width: f64,
    pub sd: f64,
    pub paths: usize,
}

impl SimResult {
    pub fn contains(&self, v: f64, slack: f64) -> bool {
        (self.mean - v).abs() <= self.half_width + slack
    }
}

/// Terminal wealth of one path.
pub fn simulate_path(horizon: &Horizon, policy: &dyn OrderPolicy, initial: State, uniforms: &[f64]) -> Result<f64> {
    let n_last = horizon.len();
    let mut s = initial;
    for (k, &u) in uniforms.iter().enumerate().take(n_last) {
        let n = k + 1;
        let z = policy.order_up_to(horizon, n, s);
        if !(z >= s.x - 1e-9) {
            return Err(Error::NegativeOrder {
                period: n,
                quantity: z - s.x,
            });
        }
        let z = z.max(s.x);
        let d = horizon.demand(n).sample_at(u);
        if n == n_last {
            return Ok(horizon.revenue(n, z, d) + horizon.bank_flow(n, z, s.xi()));
        }
        s = transition_unchecked(horizon, n, s, z, d);
    }
    Err(Error::InvalidArgument(format!(
        "need {n_last} uniforms per path, got {}",
        uniforms.len()
    )))
}

fn path_uniforms(seed: u64, stream: u64, n: usize, flip: bool, out: &mut Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    out.clear();
    out.extend((0..n).map(|_| {
        let u: f64 = rng.random();
        if flip {
            1.0 - u
        } else {
            u
        }
    }));
}

/// Sum in a fixed binary tree so the result does not depend on thread count.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Simulates `policy` from `initial`.
pub fn run_policy(
    horizon: &Horizon,
    policy: &dyn OrderPolicy,
    initial: State,
    options: &SimOptions,
) -> Result<SimResult> {
    if options.paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    horizon.ensure_valid()?;
    let n = horizon.len();
    let wealth: Vec<f64> = (0..options.paths)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, k| {
                let (stream, flip) = if options.antithetic {
                    ((k / 2) as u64, k % 2 == 1)
                } else {
                    (k as u64, false)
                };
                path_uniforms(options.seed, stream, n, flip, buf);
                simulate_path(horizon, policy, initial, buf)
            },
        )
        .collect::<Result<_>>()?;
    // With antithetic pairs the pair averages are the independent samples.
    let samples: Vec<f64> = if options.antithetic {
        wealth
            .chunks(2)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    } else {
        wealth
    };
    let m = samples.len() as f64;
    let mean = pairwise_sum(&samples) / m;
    let sq: Vec<f64> = samples.iter().map(|w| (w - mean) * (w - mean)).collect();
    let sd = if samples.len() > 1 {
        (pairwise_sum(&sq) / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SimResult {
        label: policy.label(),
        mean,
        half_width: Z_95 * sd / m.sqrt(),
        sd,
        paths: options.paths,
    })
}

/// One row of the optimal-versus-myopic comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub demand: String,
    pub cv: f64,
    pub optimal: f64,
    pub myopic_i: f64,
    pub myopic_ii: f64,
    /// Simulated myopic values, when requested.
    pub simulated: Option<(SimResult, SimResult)>,
}

impl GapRow {
    pub fn gap_i_pct(&self) -> f64 {
        100.0 * (self.optimal - self.myopic_i) / self.optimal
    }

    pub fn gap_ii_pct(&self) -> f64 {
        100.0 * (self.optimal - self.myopic_ii) / self.optimal
    }
}

/// Optimal and myopic values from `initial`, the myopic ones by exact policy
/// evaluation on the DP grid and optionally by simulation as well. Demand in
/// period 1 labels the row.
pub fn gap_report(horizon: &Horizon, options: &DpOptions, initial: State, sim: Option<&SimOptions>) -> Result<GapRow> {
    let solution = backward_induct(horizon, options)?;
    let low = StaticThresholds::myopic_i(horizon)?;
    let high = StaticThresholds::myopic_ii(horizon)?;
    let v_low = evaluate_policy(horizon, options, &low)?;
    let v_high = evaluate_policy(horizon, options, &high)?;
    let simulated = match sim {
        Some(o) => Some((
            run_policy(horizon, &low, initial, o)?,
            run_policy(horizon, &high, initial, o)?,
        )),
        None => None,
    };
    let d = horizon.demand(1);
    Ok(GapRow {
        demand: d.label(),
        cv: d.moments().cv().unwrap_or(f64::NAN),
        optimal: solution.value(1, initial),
        myopic_i: v_low.value(1, initial),
        myopic_ii: v_high.value(1, initial),
        simulated,
    })
}
