//! Run configuration: TOML or JSON, every section optional except `demand`.

use std::fmt;
use std::path::Path;

use cashinv_core::{Demand, GridSpec, Horizon, InitialBox, PeriodParams, State};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn field_error(field: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub price: f64,
    pub cost: f64,
    pub holding: f64,
    pub deposit_rate: f64,
    pub loan_rate: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            price: 2000.0,
            cost: 1000.0,
            holding: 500.0,
            deposit_rate: 0.01,
            loan_rate: 0.15,
        }
    }
}

impl From<Params> for PeriodParams {
    fn from(p: Params) -> Self {
        PeriodParams::new(p.price, p.cost, p.holding, p.deposit_rate, p.loan_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSpec {
    Uniform { lo: f64, hi: f64 },
    IntegerUniform { lo: u32, hi: u32 },
    Zip { pi: f64, lambda: f64 },
    Empirical { values: Vec<f64>, probs: Vec<f64> },
    Constant { value: f64 },
}

impl DemandSpec {
    pub fn build(&self) -> cashinv_core::Result<Demand> {
        match self {
            Self::Uniform { lo, hi } => Demand::uniform(*lo, *hi),
            Self::IntegerUniform { lo, hi } => Demand::integer_uniform(*lo, *hi),
            Self::Zip { pi, lambda } => Demand::zip(*pi, *lambda),
            Self::Empirical { values, probs } => Demand::empirical(values, probs),
            Self::Constant { value } => Demand::constant(*value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<Point> for State {
    fn from(p: Point) -> Self {
        State::new(p.x, p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl From<GridConfig> for GridSpec {
    fn from(g: GridConfig) -> Self {
        GridSpec {
            x_min: g.x_min,
            x_max: g.x_max,
            nx: g.nx,
            y_min: g.y_min,
            y_max: g.y_max,
            ny: g.ny,
        }
    }
}

impl From<GridSpec> for GridConfig {
    fn from(g: GridSpec) -> Self {
        Self {
            x_min: g.x_min,
            x_max: g.x_max,
            nx: g.nx,
            y_min: g.y_min,
            y_max: g.y_max,
            ny: g.ny,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solver {
    pub epsilon: f64,
    pub grid_scale: f64,
    pub quadrature_order: usize,
}

impl Default for Solver {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            grid_scale: 1.0,
            quadrature_order: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Simulation {
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            paths: 100_000,
            seed: 1,
            antithetic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Extensions {
    /// Largest new loan per period, currency.
    pub loan_limit: Option<f64>,
    /// Backorder penalty per unit; lost sales when absent.
    pub backorder_penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tables {
    /// Demand rows of the optimal-versus-myopic table.
    pub gap_demands: Vec<DemandSpec>,
    /// Demand rows of the bound table.
    pub bound_demands: Vec<DemandSpec>,
    pub bound_horizons: Vec<usize>,
    /// Initial inventories of the bound table (capital 0).
    pub bound_x: Vec<f64>,
}

impl Default for Tables {
    fn default() -> Self {
        let iu = |lo, hi| DemandSpec::IntegerUniform { lo, hi };
        let zip = |pi| DemandSpec::Zip { pi, lambda: 10.0 };
        Self {
            gap_demands: vec![
                iu(0, 20),
                iu(2, 18),
                iu(4, 16),
                iu(6, 14),
                zip(0.18),
                zip(0.09),
                zip(0.02),
                zip(0.0),
            ],
            bound_demands: vec![iu(0, 20), iu(6, 14)],
            bound_horizons: vec![6, 12],
            bound_x: vec![0.0, 7.0, 14.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figures {
    pub selling_back_horizons: Vec<usize>,
    /// Every `stride`-th node of the value surface is written.
    pub surface_stride: usize,
}

impl Default for Figures {
    fn default() -> Self {
        Self {
            selling_back_horizons: vec![1, 2, 4, 6],
            surface_stride: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub horizon: usize,
    pub salvage: f64,
    pub params: Params,
    pub demand: DemandSpec,
    pub initial: Point,
    pub grid: Option<GridConfig>,
    pub solver: Solver,
    pub simulation: Simulation,
    pub extensions: Extensions,
    pub tables: Tables,
    pub figures: Figures,
}

const FIELDS: &[&str] = &[
    "horizon",
    "salvage",
    "params",
    "demand",
    "initial",
    "grid",
    "solver",
    "simulation",
    "extensions",
    "tables",
    "figures",
];

fn take<T: DeserializeOwned>(map: &serde_json::Map<String, Value>, key: &str) -> Result<Option<T>, ConfigError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| field_error(key, e)),
    }
}

impl Config {
    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        let Value::Object(map) = value else {
            return Err(field_error("<root>", "expected a table of settings"));
        };
        if let Some(k) = map.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(field_error(k, "unknown setting"));
        }
        let demand = take(&map, "demand")?.ok_or_else(|| field_error("demand", "missing"))?;
        Ok(Self {
            horizon: take(&map, "horizon")?.unwrap_or(6),
            salvage: take(&map, "salvage")?.unwrap_or(600.0),
            params: take(&map, "params")?.unwrap_or_default(),
            demand,
            initial: take(&map, "initial")?.unwrap_or(Point { x: 0.0, y: 0.0 }),
            grid: take(&map, "grid")?,
            solver: take(&map, "solver")?.unwrap_or_default(),
            simulation: take(&map, "simulation")?.unwrap_or_default(),
            extensions: take(&map, "extensions")?.unwrap_or_default(),
            tables: take(&map, "tables")?.unwrap_or_default(),
            figures: take(&map, "figures")?.unwrap_or_default(),
        })
    }

    /// Reads `.json` as JSON and anything else as TOML.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let value: Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(text).map_err(|e| field_error("<file>", e))?
        } else {
            toml::from_str(text).map_err(|e| field_error("<file>", e))?
        };
        Self::from_value(value)
    }

    /// The setup used throughout the numerical examples, with integer-uniform demand on 0..=20.
    pub fn reference() -> Self {
        Self::from_value(serde_json::json!({
            "demand": { "kind": "integer_uniform", "lo": 0, "hi": 20 }
        }))
        .expect("reference config is valid")
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(field_error("horizon", "must be at least 1"));
        }
        if !(self.solver.epsilon > 0.0) {
            return Err(field_error("solver.epsilon", "must be positive"));
        }
        if !(self.solver.grid_scale > 0.0) {
            return Err(field_error("solver.grid_scale", "must be positive"));
        }
        if self.solver.quadrature_order == 0 {
            return Err(field_error("solver.quadrature_order", "must be at least 1"));
        }
        if self.simulation.paths == 0 {
            return Err(field_error("simulation.paths", "must be at least 1"));
        }
        if self.figures.surface_stride == 0 {
            return Err(field_error("figures.surface_stride", "must be at least 1"));
        }
        self.demand.build().map_err(|e| field_error("demand", e))?;
        Ok(())
    }

    pub fn horizon_with(&self, n: usize, demand: &DemandSpec) -> Result<Horizon, ConfigError> {
        let d = demand.build().map_err(|e| field_error("demand", e))?;
        let mut h = Horizon::stationary(n, self.params.into(), d, self.salvage);
        if let Some(limit) = self.extensions.loan_limit {
            h = h.with_loan_limit(vec![limit; n]);
        }
        if let Some(b) = self.extensions.backorder_penalty {
            h = h.with_backorder(vec![b; n]);
        }
        Ok(h)
    }

    pub fn build_horizon(&self) -> Result<Horizon, ConfigError> {
        self.horizon_with(self.horizon, &self.demand)
    }

    /// The configured grid, or one sized for `n` periods, scaled by `solver.grid_scale`.
    pub fn grid_for(&self, n: usize) -> GridSpec {
        self.grid
            .map(GridSpec::from)
            .unwrap_or_else(|| default_grid(n))
            .scaled(self.solver.grid_scale)
    }

    pub fn initial_box(&self, extra: &[State]) -> InitialBox {
        let mut states = vec![State::from(self.initial)];
        states.extend_from_slice(extra);
        InitialBox::covering(&states)
    }
}

/// Default grid for an `n`-period run: 161x201 up to six periods, otherwise
/// capital in `[-(40 + 10n), 20n]` at unit spacing.
pub fn default_grid(n: usize) -> GridSpec {
    if n <= 6 {
        return GridSpec::default();
    }
    let (y_min, y_max) = (-(40.0 + 10.0 * n as f64), 20.0 * n as f64);
    GridSpec {
        y_min,
        y_max,
        ny: (y_max - y_min) as usize + 1,
        ..GridSpec::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            horizon = 4
            [demand]
            kind = "zip"
            pi = 0.18
            lambda = 10.0
            [solver]
            epsilon = 0.01
        "#;
        let json_text =
            r#"{"horizon": 4, "demand": {"kind": "zip", "pi": 0.18, "lambda": 10.0}, "solver": {"epsilon": 0.01}}"#;
        let a = Config::parse(toml_text, Path::new("a.toml")).unwrap();
        let b = Config::parse(json_text, Path::new("a.json")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.solver.grid_scale, 1.0);
        assert_eq!(a.params, Params::default());
    }

    #[test]
    fn errors_name_the_field() {
        let e = Config::parse("[demand]\nkind = \"poisson\"\n", Path::new("c.toml")).unwrap_err();
        assert_eq!(e.field, "demand");
        assert!(e.message.contains("poisson"), "{e}");
        let e = Config::parse("horizon = 3\n", Path::new("c.toml")).unwrap_err();
        assert_eq!(e.field, "demand");
        let e = Config::parse(
            "[demand]\nkind = \"constant\"\nvalue = 1.0\n[solvr]\n",
            Path::new("c.toml"),
        )
        .unwrap_err();
        assert_eq!(e.field, "solvr");
    }

    #[test]
    fn twelve_period_grid() {
        let g = default_grid(12);
        assert_eq!((g.y_min, g.y_max, g.ny), (-160.0, 240.0, 401));
        assert_eq!(default_grid(3), GridSpec::default());
    }

    #[test]
    fn reference_is_valid() {
        let c = Config::reference();
        c.check().unwrap();
        assert_eq!(c.tables.gap_demands.len(), 8);
        assert!(c.build_horizon().unwrap().validate().is_valid());
    }
}
