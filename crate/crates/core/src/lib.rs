//! Discrete duality toolkit for controlled stochastic Schrödinger equations
//! on a rectangular grid driven by a binary Brownian filtration tree.

pub mod backward;
pub mod carleman;
pub mod coeff;
pub mod control;
pub mod error;
pub mod forward;
pub mod grid;
pub mod random;
pub mod tree;

pub use backward::{BackwardSolution, BackwardSolver, DualCoefficients, EnergyProfile, TimeScheme};
pub use coeff::CoefField;
pub use error::{Error, Result};
pub use grid::{BoundaryFunction, Gamma0, Grid, GridFunction, NormKind, C64};
pub use tree::{AdaptedField, FiltrationTree, LevelField};
