//! Data-driven static analysis of elastic trusses.
//!
//! Member stress-strain behavior comes straight from a raw material data set:
//! each member gets a local affine law fitted (least squares or Huber) to the
//! `k` data points nearest its current strain, and the structure is solved by
//! a fixed-point iteration between those fits and linear equilibrium solves.
//! A single-nearest-point baseline and a Monte Carlo harness are included.

pub mod benchmarks;
pub mod datagen;
pub mod harness;
pub mod ko16;
pub mod material;
pub mod regression;
pub mod solver;
pub mod truss;

pub use datagen::{GenConfig, LinearGenConfig, SigmoidGenConfig};
pub use harness::{LoadCase, Method, MonteCarloConfig, MonteCarloStats, PathConfig, PathResult};
pub use ko16::{ko16_solve, Ko16Config};
pub use material::{DataPoint, MaterialDataSet};
pub use regression::{HuberConfig, LinearLaw};
pub use solver::{dd_solve, solve_linear_state, EquilibriumState, FitMethod, SolveStatus, SolverConfig};
pub use truss::TrussModel;
