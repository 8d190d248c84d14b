//! The four subcommands. Each returns the manifest of what it wrote.

use std::fmt;
use std::io;

use cashinv_core::bounds::{selling_back_dp, xi_axis_for};
use cashinv_core::policy::StaticThresholds;
use cashinv_core::sim::{run_policy, SimOptions, SimResult};
use cashinv_core::threshold::{argmax_threshold_table, bisect_thresholds, BisectOptions, ThresholdTable};
use cashinv_core::{backward_induct, evaluate_policy, DpOptions, DpSolution, Error, Horizon, SinglePeriod, State};
use serde_json::json;

use crate::config::{Config, ConfigError, DemandSpec};
use crate::output::{sig6, unix_now, OutDir, RunManifest};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// The horizon itself is inconsistent; carries the printed validation report.
    Invalid(String),
    Solver(Error),
    Io(io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Invalid(report) => write!(f, "invalid model:\n{report}"),
            Self::Solver(e) => write!(f, "{e}"),
            Self::Io(e) => write!(f, "{e}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Invalid(_) => 2,
            Self::Solver(e) => match e {
                Error::GridEscape { .. }
                | Error::BracketViolation { .. }
                | Error::InvalidGrid(_)
                | Error::NegativeOrder { .. }
                | Error::PeriodOutOfRange { .. } => 3,
                _ => 2,
            },
            Self::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        Self::Solver(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

type Rows = Vec<Vec<String>>;

fn validated(h: Horizon) -> Result<Horizon, RunError> {
    let report = h.validate();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.is_valid() {
        Ok(h)
    } else {
        Err(RunError::Invalid(report.to_string()))
    }
}

fn dp_options(config: &Config, n: usize, extra: &[State]) -> DpOptions {
    DpOptions {
        quadrature_order: config.solver.quadrature_order,
        ..DpOptions::default()
    }
    .with_grid(config.grid_for(n))
    .with_initial(config.initial_box(extra))
}

fn settings(config: &Config) -> serde_json::Value {
    json!({
        "grid": crate::config::GridConfig::from(config.grid_for(config.horizon)),
        "solver": config.solver,
        "simulation": config.simulation,
    })
}

fn thresholds(solution: &DpSolution, epsilon: f64) -> Result<ThresholdTable, RunError> {
    if solution.horizon().variant().is_base() {
        Ok(bisect_thresholds(
            solution,
            BisectOptions {
                epsilon,
                ..Default::default()
            },
        )?)
    } else {
        Ok(argmax_threshold_table(solution)?)
    }
}

/// Value, policy and threshold tables of every period.
pub fn solve(config: &Config, out: &mut OutDir) -> Result<(), RunError> {
    let h = validated(config.build_horizon()?)?;
    let solution = backward_induct(&h, &dp_options(config, h.len(), &[]))?;
    let grid = *solution.grid();
    for n in 1..=h.len() {
        let values = solution.value_table(n).values();
        let levels = solution.policy_table(n).levels();
        let mut v_rows = Rows::with_capacity(grid.len());
        let mut p_rows = Rows::with_capacity(grid.len());
        for (k, s) in grid.states().enumerate() {
            v_rows.push(vec![sig6(s.x), sig6(s.y), sig6(values[k])]);
            p_rows.push(vec![sig6(s.x), sig6(s.y), sig6(levels[k]), sig6(levels[k] - s.x)]);
        }
        out.write_csv(&format!("value_p{n}.csv"), &["x", "y", "value"], &v_rows)?;
        out.write_csv(
            &format!("policy_p{n}.csv"),
            &["x", "y", "order_up_to", "order"],
            &p_rows,
        )?;
    }
    let table = thresholds(&solution, config.solver.epsilon)?;
    let mut t_rows = Rows::new();
    for row in &table.rows {
        for k in 0..row.xi.len() {
            t_rows.push(vec![
                row.period.to_string(),
                sig6(row.xi[k]),
                sig6(row.alpha[k]),
                sig6(row.beta[k]),
            ]);
        }
    }
    out.write_csv("thresholds.csv", &["period", "xi", "alpha", "beta"], &t_rows)?;
    let s0 = State::from(config.initial);
    out.write_csv(
        "summary.csv",
        &["period", "x", "y", "value"],
        &[vec!["1".into(), sig6(s0.x), sig6(s0.y), sig6(solution.value(1, s0))]],
    )?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    /// Optimal against the two myopic policies.
    Gap,
    /// Lower bound, value and selling-back upper bound.
    Bounds,
}

pub fn tables(config: &Config, which: Which, out: &mut OutDir) -> Result<(), RunError> {
    match which {
        Which::Gap => gap_table(config, out),
        Which::Bounds => bound_table(config, out),
    }
}

fn nonempty<'a>(demands: &'a [DemandSpec], field: &str) -> Result<&'a [DemandSpec], RunError> {
    if demands.is_empty() {
        return Err(ConfigError {
            field: field.into(),
            message: "needs at least one demand".into(),
        }
        .into());
    }
    Ok(demands)
}

fn gap_table(config: &Config, out: &mut OutDir) -> Result<(), RunError> {
    let s0 = State::from(config.initial);
    let mut rows = Rows::new();
    for spec in nonempty(&config.tables.gap_demands, "tables.gap_demands")? {
        let h = validated(config.horizon_with(config.horizon, spec)?)?;
        let options = dp_options(config, h.len(), &[]);
        let v = backward_induct(&h, &options)?.value(1, s0);
        let v_i = evaluate_policy(&h, &options, &StaticThresholds::myopic_i(&h)?)?.value(1, s0);
        let v_ii = evaluate_policy(&h, &options, &StaticThresholds::myopic_ii(&h)?)?.value(1, s0);
        let d = h.demand(1);
        let cv = d.moments().cv().map_or(String::new(), sig6);
        let gap = |w: f64| sig6(100.0 * (v - w) / v);
        rows.push(vec![d.label(), cv, sig6(v), sig6(v_i), gap(v_i), sig6(v_ii), gap(v_ii)]);
    }
    out.write_csv(
        "gap_table.csv",
        &[
            "demand",
            "cv",
            "value",
            "myopic_i",
            "gap_i_pct",
            "myopic_ii",
            "gap_ii_pct",
        ],
        &rows,
    )?;
    Ok(())
}

fn bound_table(config: &Config, out: &mut OutDir) -> Result<(), RunError> {
    let demands = nonempty(&config.tables.bound_demands, "tables.bound_demands")?;
    if config.tables.bound_horizons.is_empty() {
        return Err(ConfigError {
            field: "tables.bound_horizons".into(),
            message: "needs at least one horizon".into(),
        }
        .into());
    }
    let states: Vec<State> = config.tables.bound_x.iter().map(|&x| State::new(x, 0.0)).collect();
    let mut rows = Rows::new();
    for &n in &config.tables.bound_horizons {
        for spec in demands {
            let h = validated(config.horizon_with(n, spec)?)?;
            let options = dp_options(config, n, &states);
            let solution = backward_induct(&h, &options)?;
            let lower = evaluate_policy(&h, &options, &StaticThresholds::myopic_ii(&h)?)?;
            let upper = selling_back_dp(&h, xi_axis_for(&options.grid)?)?;
            for s in &states {
                rows.push(vec![
                    n.to_string(),
                    h.demand(1).label(),
                    sig6(s.x),
                    sig6(lower.value(1, *s)),
                    sig6(solution.value(1, *s)),
                    sig6(upper.value(1, s.xi())),
                ]);
            }
        }
    }
    out.write_csv(
        "bound_table.csv",
        &["horizon", "demand", "x", "myopic_ii", "value", "selling_back"],
        &rows,
    )?;
    Ok(())
}

/// Plot data: the one-period order curve, the first-period value surface and
/// selling-back value curves for several horizons.
pub fn figures(config: &Config, out: &mut OutDir) -> Result<(), RunError> {
    let h = validated(config.build_horizon()?)?;
    let sp = SinglePeriod::new(*h.params(h.len()), h.salvage(), h.demand(h.len()));
    let th = sp.thresholds()?;
    let mut q_rows = Rows::new();
    for k in 0..=400 {
        let y = -10.0 + 0.1 * k as f64;
        q_rows.push(vec![sig6(y), sig6(sp.optimal_order(0.0, y)?)]);
    }
    out.write_csv("order_curve.csv", &["y", "order"], &q_rows)?;
    out.write_csv(
        "order_curve_thresholds.csv",
        &["alpha", "beta"],
        &[vec![sig6(th.alpha), sig6(th.beta)]],
    )?;

    let solution = backward_induct(&h, &dp_options(config, h.len(), &[]))?;
    let grid = *solution.grid();
    let table = solution.value_table(1);
    let stride = config.figures.surface_stride;
    let mut s_rows = Rows::new();
    for i in (0..grid.x.len()).step_by(stride) {
        for j in (0..grid.y.len()).step_by(stride) {
            s_rows.push(vec![sig6(grid.x.node(i)), sig6(grid.y.node(j)), sig6(table.node(i, j))]);
        }
    }
    out.write_csv("value_surface_p1.csv", &["x", "y", "value"], &s_rows)?;

    let mut b_rows = Rows::new();
    for &n in &config.figures.selling_back_horizons {
        let hn = validated(config.horizon_with(n, &config.demand)?)?;
        let sb = selling_back_dp(&hn, xi_axis_for(&config.grid_for(n))?)?;
        let t = sb.table(1);
        for (xi, v) in t.axis().nodes().zip(t.values()) {
            b_rows.push(vec![n.to_string(), sig6(xi), sig6(*v)]);
        }
    }
    out.write_csv("selling_back.csv", &["horizon", "xi", "value"], &b_rows)?;
    Ok(())
}

fn sim_row(r: &SimResult) -> Vec<String> {
    vec![
        r.label.clone(),
        sig6(r.mean),
        sig6(r.half_width),
        sig6(r.sd),
        r.paths.to_string(),
    ]
}

/// Monte Carlo of the optimal policy and both myopic policies on common demands.
pub fn simulate(config: &Config, out: &mut OutDir) -> Result<(), RunError> {
    let h = validated(config.build_horizon()?)?;
    let s0 = State::from(config.initial);
    let solution = backward_induct(&h, &dp_options(config, h.len(), &[]))?;
    let o = SimOptions {
        paths: config.simulation.paths,
        seed: config.simulation.seed,
        antithetic: config.simulation.antithetic,
    };
    let mut rows = vec![sim_row(&run_policy(&h, &solution, s0, &o)?)];
    rows[0].push(sig6(solution.value(1, s0)));
    let mut low = sim_row(&run_policy(&h, &StaticThresholds::myopic_i(&h)?, s0, &o)?);
    low.push(String::new());
    rows.push(low);
    if h.myopic_ii_valid() {
        let mut high = sim_row(&run_policy(&h, &StaticThresholds::myopic_ii(&h)?, s0, &o)?);
        high.push(String::new());
        rows.push(high);
    }
    out.write_csv(
        "simulation.csv",
        &["policy", "mean", "half_width", "sd", "paths", "dp_value"],
        &rows,
    )?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Tables(Which),
    Figures,
    Simulate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Tables(_) => "tables",
            Self::Figures => "figures",
            Self::Simulate => "simulate",
        }
    }
}

pub fn run(command: Command, config: &Config, config_hash: String, mut out: OutDir) -> Result<RunManifest, RunError> {
    let started = unix_now();
    match command {
        Command::Solve => solve(config, &mut out)?,
        Command::Tables(which) => tables(config, which, &mut out)?,
        Command::Figures => figures(config, &mut out)?,
        Command::Simulate => simulate(config, &mut out)?,
    }
    Ok(out.finish(command.name(), config_hash, started, settings(config))?)
}
