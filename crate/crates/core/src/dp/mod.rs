//! Backward induction over the `(x, y)` state grid.

pub mod grid;
mod optimize;
mod solver;
pub(crate) mod stage;
pub mod table;

pub use grid::{check_reachability, reachable_boxes, Axis, Grid, GridSpec, InitialBox, ReachBox};
pub use solver::{
    backward_induct, evaluate_policy, stage_value, terminal_expected, terminal_value, transition, DpOptions,
    DpSolution, PolicyValues, XiPolicy,
};
pub use table::{PolicyTable, StructureReport, ValueTable};

pub(crate) use optimize::{golden_max, Best};
pub(crate) use solver::{interp_clamped, terminal_optimum, terminal_optimum_pair, transition_unchecked, StageContext};
