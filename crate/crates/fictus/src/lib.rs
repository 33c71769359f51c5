//! Null-control synthesis for coupled parabolic systems with fewer controls
//! than equations.
//!
//! The pipeline has two halves. [`hum`] computes a control acting on every
//! equation (the fictitious control) by penalized optimal control with
//! Carleman weights from [`carleman`]. [`algebra`] builds a differential
//! operator that re-expresses that control through the first `c` equations
//! only, and [`compose`] glues the two together on the grid.

pub mod algebra;
pub mod carleman;
pub mod compose;
pub mod error;
pub mod hum;
pub mod linalg;
pub mod model;
pub mod pde;

pub use error::{Error, Result};
