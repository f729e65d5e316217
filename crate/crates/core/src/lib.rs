//! Bayesian shape-restricted regression with random Bernstein polynomials.
//!
//! The regression function is modelled as a Bernstein polynomial
//! `F(t) = sum_i b_i * C(n,i) (t/tau)^i (1 - t/tau)^(n-i)` whose order `n` and
//! coefficients are random. Shape restrictions (monotone, unimodal concave,
//! unimodal convex) are imposed through linear inequalities on the
//! coefficients, so priors can be sampled constructively and posteriors
//! explored with Metropolis-type samplers that never leave the constraint set.
//!
//! Module map:
//!
//! * [`bernstein`]: basis evaluation, polynomials, derivatives, shape predicates.
//! * [`priors`]: truncated Poisson order laws and the constructive prior samplers.
//! * [`model`]: datasets, test functions, likelihood, data-driven hyperparameters.
//! * [`samplers`]: independent Metropolis, reversible-jump and unimodal posterior samplers.
//! * [`analysis`]: posterior mean curves, error norms, ACF and ESS.
//! * [`experiment`]: replicated simulation studies and report files.

pub mod analysis;
pub mod bernstein;
pub mod error;
pub mod experiment;
pub mod model;
pub mod priors;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
