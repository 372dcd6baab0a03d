//! Langevin simulated annealing with multiplicative (position-dependent) noise.
//!
//! The library implements the annealed SDE
//! `dY = b_{a(t)}(Y) dt + a(t) σ(Y) dW` with drift
//! `b_a(x) = -(σσᵀ∇V)(x) + a² Υ(x)`, its decreasing-step Euler-Maruyama
//! schemes (continuous and plateau cooling), the Gibbs measures ν_a it
//! targets, and Wasserstein-1 diagnostics used by the experiment harness.

pub mod diffusion;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod numdiff;
pub mod potentials;
pub mod rng;
pub mod schedules;
pub mod simulate;

pub use error::{Error, Result};
