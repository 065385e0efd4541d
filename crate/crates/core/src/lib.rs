//! Schrödinger operators on star graphs with Coulomb-type and scaled
//! short-range potentials: zero-energy resonances, limiting vertex
//! conditions, and numerical solvers for the regularized and limit problems.

pub mod api;
pub mod config;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod linalg;
pub mod ode;
pub mod potentials;
pub mod report;
pub mod resonance;
pub mod solver;

pub use config::Config;
pub use coupling::{CouplingMatrices, VertexConditions};
pub use error::{Error, Result};
pub use experiments::{ConvergenceReport, SweepSpec};
pub use graph::{EdgeMesh, GraphMesh, Grading, GridFunction, StarGraph, StepPolicy};
pub use linalg::CMatrix;
pub use potentials::{CoulombSpec, Profile, RegularizedPotential, ShortRangeSpec};
pub use resonance::{ResonanceData, ResonanceOptions};
pub use solver::{Forcing, OperatorSpec, ResolventProblem};
