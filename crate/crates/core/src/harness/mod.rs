//! Experiment driver: config parsing, the convergence and law-of-large-
//! numbers studies, and the command-line front end. Everything here is
//! plumbing around the library proper, built for reproducibility: seeds and
//! stream assignments are explicit, data CSVs are byte-stable across reruns,
//! and anything nondeterministic (wall-clock, runtimes) is quarantined in
//! JSON sidecars.

pub mod cli;
pub mod config;
pub mod convergence;
pub mod io;
pub mod lln;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::gridfn::GridError;
use crate::kernel::KernelError;
use crate::particles::ParticleError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failures} of {rows} sweep rows violated their bound")]
    BoundViolation { failures: usize, rows: usize },
    #[error("exceedance estimates not nonincreasing: {0}")]
    MonotonicityViolation(String),
    #[error("{frac:.1}% of replicas hit the count cap; results unreliable")]
    CapTruncationExcessive { frac: f64 },
    #[error("integrator order check failed: {0}")]
    OrderTestFailed(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Particle(#[from] ParticleError),
}
