//! Immersed-boundary finite differences for acoustic waves over arbitrary
//! topography.
//!
//! Nodes whose interior stencils reach outside the domain get modified
//! stencils: field values at exterior taps are replaced by a constrained
//! Taylor extrapolant that honours the surface conditions at nearby
//! boundary points. Tables are built once, then the time loop is a plain
//! sparse update.
//!
//! The numerical core is generic over the scalar type; the aliases below
//! fix it to `f64`, which is what the solver and command line use.

pub mod basis;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod scalar;
pub mod solver;
pub mod stencilgen;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Rational, Real, Scalar};

pub type Grid = geometry::CartesianGrid<f64>;
pub type Sdf = geometry::SignedDistanceField<f64>;
pub type Matrix = linalg::DenseMatrix<f64>;
pub type BoundaryPoint = geometry::BoundaryPoint<f64>;
pub type BoundaryCondition = basis::BoundaryConditionSpec<f64>;
pub type Stencil = stencilgen::ModifiedStencil<f64>;
pub type Table = stencilgen::OperatorTable<f64>;
pub type AcousticModel = solver::Model<f64>;
pub type AcousticSolver = solver::Solver<f64>;
/// Exact rational matrices, used for stencil weights.
pub type RationalMatrix = linalg::DenseMatrix<Rational>;
