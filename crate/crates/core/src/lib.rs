//! Reaction-diffusion dynamics on dense graphs and their continuum (graphon) limits.
//!
//! The library is organised as a pipeline:
//!
//! * [`kernel`] — symmetric kernels on the unit square: step kernels built from
//!   adjacency matrices, a small registry of analytic families, quotient
//!   (cell-average) discretisation, W-random sampling, and cut-norm machinery.
//! * [`gridfn`] — piecewise-constant functions on the uniform partition of
//!   (0,1), with the normalised Lp norms used everywhere else.
//! * [`dynamics`] — the nonlocal Laplacian, its semigroup, deterministic
//!   reaction-diffusion integration, and a posteriori checks (contraction,
//!   mass, maximum principle, mild-formulation residual, discrete-to-continuum
//!   error bounds).
//! * [`particles`] — exact event-driven simulation of the interacting particle
//!   system whose mean field is the reaction-diffusion equation, plus
//!   martingale diagnostics.
//! * [`harness`] — experiment configs, convergence / law-of-large-numbers
//!   studies, CSV/JSON emission, and the command-line interface.

pub mod dynamics;
pub mod gridfn;
pub mod harness;
pub mod kernel;
pub mod particles;
