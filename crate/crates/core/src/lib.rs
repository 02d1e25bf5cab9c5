//! Distributed submodular maximization for multi-agent sensing.
//!
//! The crate is organized bottom-up:
//!
//! - [`setfun`]: ground sets, selections, simple partition matroids, discrete
//!   derivatives and an exhaustive optimum for small instances.
//! - [`objectives`]: probabilistic coverage, grid area coverage and the
//!   detection sensor model.
//! - [`solvers`]: sequential and general greedy, DAG-constrained greedy,
//!   randomized sequential partitions (with and without range limits),
//!   distributed sequential greedy assignment, auctions and baselines.
//! - [`redundancy`]: inter-agent redundancy graphs and suboptimality bounds.
//! - [`tracking`]: grid-world multi-target tracking with histogram filters and
//!   a sampled mutual information objective.
//! - [`netsim`]: communication graphs, message accounting and the
//!   synchronous epoch emulator.
//! - [`scenarios`]: seeded generators for the benchmark problem families.
//! - [`experiments`]: trial drivers shared by the CLI and the acceptance suite.
//! - [`checks`]: randomized small-instance oracle batteries.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod checks;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod geom;
pub mod netsim;
pub mod objectives;
pub mod redundancy;
pub mod rng;
pub mod scenarios;
pub mod setfun;
pub mod solvers;
pub mod stats;
pub mod tracking;

pub use error::{Error, Result};
pub use setfun::{GroundElement, Selection, SetObjective, SimplePartitionMatroid};
pub use solvers::{SolveResult, SolverSpec};
