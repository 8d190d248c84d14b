//! Model extensions: tiered interest, loan limits and backorders.

pub mod backorder;
pub mod loan_limit;
pub mod piecewise;
