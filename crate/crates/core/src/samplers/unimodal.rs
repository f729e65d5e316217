//! Posterior sampler for concave and convex priors.
//!
//! The state is the vector of uniforms that generates a prior draw (see
//! [`UnimodalLatent`]). Under the prior these are i.i.d. uniform given the
//! order and the peak index, so every within-order move below is symmetric
//! and the acceptance ratio is the likelihood ratio.

use rand::Rng;

use super::{accept, move_probabilities, BalanceMode, ChainState, MoveKind, Posterior, StepOutcome};
use crate::error::{Error, Result};
use crate::priors::{unimodal_draw, PriorSpec, UnimodalLatent, UnimodalPrior};

const WALK_SD: f64 = 0.12;
const PEAK_SHIFT_PROB: f64 = 0.2;

fn reflect_unit(x: f64) -> f64 {
    let y = x.rem_euclid(2.0);
    if y > 1.0 { 2.0 - y } else { y }
}

/// One transition: an order change with the usual move probabilities, or
/// else a single-coordinate update or a peak shift.
pub fn unimodal_step<R: Rng + ?Sized>(state: &mut ChainState, post: &Posterior, rng: &mut R) -> Result<StepOutcome> {
    let prior = match &post.spec {
        PriorSpec::Unimodal(p) => p,
        PriorSpec::Monotone(_) => return Err(Error::Config("unimodal sampler needs a concave or convex prior".into())),
    };
    let latent = state
        .draw
        .latent
        .clone()
        .ok_or_else(|| Error::Config("unimodal state carries no latent uniforms".into()))?;
    let n = latent.order();
    let probs = move_probabilities(n, post.c, &prior.order);
    let u: f64 = rng.random();
    if u < probs.birth + probs.death {
        let (kind, target) = if u < probs.birth {
            (MoveKind::Birth, n + 1)
        } else {
            (MoveKind::Death, n - 1)
        };
        let proposal = UnimodalLatent::sample(prior, target, rng)?;
        let correction = match post.balance {
            BalanceMode::Paper => 0.0,
            BalanceMode::Strict => {
                let fwd = if kind == MoveKind::Birth { probs.birth } else { probs.death };
                let rev_probs = move_probabilities(target, post.c, &prior.order);
                let rev = if kind == MoveKind::Birth { rev_probs.death } else { rev_probs.birth };
                // the proposal is the conditional prior at the new order,
                // so only the order masses and move probabilities remain
                prior.order.ln_pmf(target) - prior.order.ln_pmf(n) + rev.ln() - fwd.ln()
            }
        };
        return try_latent(state, post, prior, proposal, kind, correction, rng);
    }

    let mut proposal = latent;
    if rng.random::<f64>() < PEAK_SHIFT_PROB {
        let moved = if rng.random::<bool>() {
            proposal.left.pop().map(|x| proposal.right.push(x))
        } else {
            proposal.right.pop().map(|x| proposal.left.push(x))
        };
        if moved.is_none() {
            return Ok(StepOutcome {
                kind: MoveKind::PeakShift,
                accepted: false,
            });
        }
        return try_latent(state, post, prior, proposal, MoveKind::PeakShift, 0.0, rng);
    }

    let j = rng.random_range(0..proposal.dim());
    let coord = proposal.coord_mut(j);
    *coord = if rng.random::<bool>() {
        rng.random()
    } else {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        reflect_unit(*coord + WALK_SD * z)
    };
    try_latent(state, post, prior, proposal, MoveKind::H, 0.0, rng)
}

fn try_latent<R: Rng + ?Sized>(
    state: &mut ChainState,
    post: &Posterior,
    prior: &UnimodalPrior,
    latent: UnimodalLatent,
    kind: MoveKind,
    correction: f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    let Some(coeffs) = latent.coefficients(prior) else {
        return Ok(StepOutcome { kind, accepted: false });
    };
    post.likelihood.fitted(&coeffs, &mut state.scratch);
    let loglik = post.likelihood.from_fitted(&state.scratch);
    let accepted = accept(loglik - state.cached_loglik + correction, rng);
    if accepted {
        let draw = unimodal_draw(prior, latent, post.tau)?;
        state.cached_logprior = post.log_prior(&draw);
        state.draw = draw;
        std::mem::swap(&mut state.fitted, &mut state.scratch);
        state.cached_loglik = loglik;
    }
    Ok(StepOutcome { kind, accepted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_stays_in_unit_interval() {
        for &(x, y) in &[(0.3, 0.3), (-0.2, 0.2), (1.25, 0.75), (2.1, 0.1), (-1.4, 0.6)] {
            assert!((reflect_unit(x) - y).abs() < 1e-12, "{x}");
        }
    }
}
