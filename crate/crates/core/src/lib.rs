//! Numerical core for extensive (kinematic-order) chains of Vlasov-type
//! equations: distribution fields over sets of kinematic orders, their
//! moments, a semi-Lagrangian evolution of the chain, residual checks of the
//! moment laws, an H-functional for signed fields, and analytic test states.

pub mod analytic;
pub mod closure;
pub mod config;
pub mod conservation;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod field;
pub mod grid;
pub mod index;
pub mod io;
pub mod moments;
pub mod run;

mod nd;
mod transport;

pub use error::{ChainError, Result};
pub use field::{DistributionField, MeanField, ScalarField};
pub use grid::{Axis, AxisGrid, Grid};
pub use index::KinematicIndexSet;
