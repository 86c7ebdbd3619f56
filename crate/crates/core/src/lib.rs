//! Simulation and statistical verification of infinitesimal random walks.
//!
//! A walk lives on the grid `{k / n_q}` of the unit interval and moves by
//! `b(t, x) dt + sigma(t, x) eps sqrt(dt)` with equiprobable independent signs
//! `eps = +-1`. The modules check the conditions such walks are expected to
//! satisfy: the scaling of squared increments, fairness and independence of the
//! signs, recovery of drift and volatility, the Markov property, stability under
//! close coefficients, diffusion regularity and weak convergence, and the
//! dimension-2 behaviour of sample paths under spatial coarse-graining.

pub mod cli;
pub mod coeffs;
pub mod diffusion;
pub mod equivalence;
pub mod error;
pub mod estimators;
pub mod markov;
pub mod scale;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
