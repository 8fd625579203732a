//! Data-driven computational materials physics on structured grids and
//! point clouds.
//!
//! The crate covers weak-form residuals on finite-element grids, variational
//! system identification by stepwise regression, non-local derivatives on
//! graphs, integrable deep neural networks for free energies, an active
//! learning loop built on them, and reduced-order modelling of phase-field
//! dynamics.

pub mod active_learning;
pub mod dns;
pub mod error;
pub mod graph_calculus;
pub mod grid_fem;
pub mod io;
pub mod linalg;
pub mod nn;
pub mod observables;
pub mod sysid;
pub mod weak_operators;

pub use error::{Error, Result};
