//! Reversible-jump moves for the monotone prior.

use rand::Rng;

use super::{accept, move_probabilities, BalanceMode, ChainState, MoveKind, Posterior, StepOutcome};
use crate::error::{Error, Result};
use crate::priors::{isotonic_prior_logdensity, MonotonePrior, OrderDistribution, PriorSpec};

fn monotone(post: &Posterior) -> Result<&MonotonePrior> {
    match &post.spec {
        PriorSpec::Monotone(p) => Ok(p),
        PriorSpec::Unimodal(_) => Err(Error::Config("monotone moves need a monotone prior".into())),
    }
}

/// Log acceptance ratio for inserting one coefficient into an order-`n` state
/// whose endpoints are `width` apart. `delta_ln_nu` is the change in log
/// posterior.
pub fn birth_log_ratio(
    delta_ln_nu: f64,
    n: usize,
    width: f64,
    order: &OrderDistribution,
    c: f64,
    balance: BalanceMode,
) -> f64 {
    let ln_n = (n as f64).ln();
    match balance {
        BalanceMode::Paper => delta_ln_nu + order.ln_pmf(n) + width.ln() - order.ln_pmf(n + 1) - ln_n,
        BalanceMode::Strict => {
            let back = move_probabilities(n + 1, c, order).death;
            let fwd = move_probabilities(n, c, order).birth;
            delta_ln_nu + back.ln() - ln_n - fwd.ln() + width.ln()
        }
    }
}

/// Log acceptance ratio for deleting one interior coefficient from an
/// order-`n` state.
pub fn death_log_ratio(
    delta_ln_nu: f64,
    n: usize,
    width: f64,
    order: &OrderDistribution,
    c: f64,
    balance: BalanceMode,
) -> f64 {
    let ln_nm1 = ((n - 1) as f64).ln();
    match balance {
        BalanceMode::Paper => delta_ln_nu + order.ln_pmf(n) + ln_nm1 - order.ln_pmf(n - 1) - width.ln(),
        BalanceMode::Strict => {
            let back = move_probabilities(n - 1, c, order).birth;
            let fwd = move_probabilities(n, c, order).death;
            delta_ln_nu + back.ln() - width.ln() - fwd.ln() + ln_nm1
        }
    }
}

/// One MHRA transition: H, H+ or H- chosen with the order-dependent
/// move probabilities.
pub fn mhra_step<R: Rng + ?Sized>(state: &mut ChainState, post: &Posterior, rng: &mut R) -> Result<StepOutcome> {
    let prior = monotone(post)?;
    let probs = move_probabilities(state.order(), post.c, &prior.order);
    let u: f64 = rng.random();
    if u < probs.birth {
        mhra_birth_move(state, post, rng)
    } else if u < probs.birth + probs.death {
        mhra_death_move(state, post, rng)
    } else {
        mhra_h_move(state, post, rng)
    }
}

/// Fixed-order update of one coefficient, drawn uniformly between its
/// neighbours (or `M1` / `M2` for an endpoint).
///
/// Endpoints are picked with probability 1/3 each and the interior indices
/// share the remaining third; at order 1 each endpoint has probability 1/2.
pub fn mhra_h_move<R: Rng + ?Sized>(state: &mut ChainState, post: &Posterior, rng: &mut R) -> Result<StepOutcome> {
    let prior = monotone(post)?;
    let n = state.order();
    let k = if n == 1 {
        if rng.random::<bool>() { 0 } else { 1 }
    } else {
        match rng.random_range(0..3) {
            0 => 0,
            1 => n,
            _ => rng.random_range(1..n),
        }
    };
    let a = state.coeffs();
    let lo = if k == 0 { post.bounds.0 } else { a[k - 1] };
    let hi = if k == n { post.bounds.1 } else { a[k + 1] };
    let outcome = |accepted| StepOutcome {
        kind: MoveKind::H,
        accepted,
    };
    if !(lo < hi) {
        return Ok(outcome(false));
    }
    let old = a[k];
    let new = lo + rng.random::<f64>() * (hi - lo);

    let mut proposal = a.to_vec();
    proposal[k] = new;
    let logprior = isotonic_prior_logdensity(&proposal, prior);
    if logprior == f64::NEG_INFINITY {
        return Ok(outcome(false));
    }
    state.scratch.clone_from(&state.fitted);
    post.likelihood.shift_fitted(n, k, new - old, &mut state.scratch);
    let loglik = post.likelihood.from_fitted(&state.scratch);

    let log_ratio = loglik + logprior - state.log_target();
    let accepted = accept(log_ratio, rng);
    if accepted {
        state.draw.poly.coeffs_vec_mut()[k] = new;
        std::mem::swap(&mut state.fitted, &mut state.scratch);
        state.cached_loglik = loglik;
        state.cached_logprior = logprior;
    }
    Ok(outcome(accepted))
}

/// H+: insert `V ~ Uniform(a_0, a_n)` in sorted position.
pub fn mhra_birth_move<R: Rng + ?Sized>(state: &mut ChainState, post: &Posterior, rng: &mut R) -> Result<StepOutcome> {
    let prior = monotone(post)?;
    let n = state.order();
    let a = state.coeffs();
    let (a0, an) = (a[0], a[n]);
    let v = a0 + rng.random::<f64>() * (an - a0);
    let pos = a.partition_point(|&c| c < v).clamp(1, n);
    let mut proposal = Vec::with_capacity(n + 2);
    proposal.extend_from_slice(&a[..pos]);
    proposal.push(v);
    proposal.extend_from_slice(&a[pos..]);
    propose_order_change(state, post, prior, proposal, MoveKind::Birth, rng)
}

/// H-: delete an interior coefficient chosen uniformly.
pub fn mhra_death_move<R: Rng + ?Sized>(state: &mut ChainState, post: &Posterior, rng: &mut R) -> Result<StepOutcome> {
    let prior = monotone(post)?;
    let n = state.order();
    if n < 2 {
        return Ok(StepOutcome {
            kind: MoveKind::Death,
            accepted: false,
        });
    }
    let k = rng.random_range(1..n);
    let mut proposal = state.coeffs().to_vec();
    proposal.remove(k);
    propose_order_change(state, post, prior, proposal, MoveKind::Death, rng)
}

fn propose_order_change<R: Rng + ?Sized>(
    state: &mut ChainState,
    post: &Posterior,
    prior: &MonotonePrior,
    proposal: Vec<f64>,
    kind: MoveKind,
    rng: &mut R,
) -> Result<StepOutcome> {
    let n = state.order();
    let width = state.coeffs()[n] - state.coeffs()[0];
    let logprior = isotonic_prior_logdensity(&proposal, prior);
    if logprior == f64::NEG_INFINITY {
        return Ok(StepOutcome { kind, accepted: false });
    }
    post.likelihood.fitted(&proposal, &mut state.scratch);
    let loglik = post.likelihood.from_fitted(&state.scratch);
    let delta = loglik + logprior - state.log_target();
    let log_ratio = match kind {
        MoveKind::Birth => birth_log_ratio(delta, n, width, &prior.order, post.c, post.balance),
        _ => death_log_ratio(delta, n, width, &prior.order, post.c, post.balance),
    };
    let accepted = accept(log_ratio, rng);
    if accepted {
        *state.draw.poly.coeffs_vec_mut() = proposal;
        std::mem::swap(&mut state.fitted, &mut state.scratch);
        state.cached_loglik = loglik;
        state.cached_logprior = logprior;
    }
    Ok(StepOutcome { kind, accepted })
}
