//! Posterior simulation over `(n, a_0..a_n)`.
//!
//! * [`ima_step`]: independent Metropolis with the prior as proposal.
//! * [`mhra_h_move`], [`mhra_birth_move`], [`mhra_death_move`]: the
//!   reversible-jump moves for monotone priors.
//! * [`unimodal_step`]: the concave / convex posterior sampler, which works
//!   on the uniforms that generate a prior draw.
//!
//! Every sampler proposes only states inside the constraint set, so the
//! chain never leaves it. [`run_chain`] drives a sampler and records a
//! [`ChainTrace`].

mod isotonic;
mod trace;
mod unimodal;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bernstein::shape_check;
use crate::error::{Error, Result};
use crate::model::{Dataset, Likelihood};
use crate::priors::{isotonic_prior_logdensity, OrderDistribution, PriorDraw, PriorSpec};
use crate::rng::{rng_from_seed, ChainRng};

pub use isotonic::{birth_log_ratio, death_log_ratio, mhra_birth_move, mhra_death_move, mhra_h_move, mhra_step};
pub use trace::{read_trace, write_trace, ChainTrace, MoveTally, TraceFile};
pub use unimodal::unimodal_step;

/// Which posterior sampler to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Independent Metropolis with prior proposals.
    Ima,
    /// Reversible-jump Metropolis-Hastings (for unimodal priors, [`unimodal_step`]).
    Mhra,
}

/// How order-changing acceptance ratios are formed.
///
/// `Paper` uses the closed-form birth/death ratios; `Strict` evaluates the
/// textbook reversible-jump ratio with explicit move-selection and proposal
/// densities. With the move probabilities of [`move_probabilities`] the two
/// agree exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceMode {
    #[default]
    Paper,
    Strict,
}

/// Move types tallied in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    /// Fixed-order coefficient update.
    H,
    /// Order `n -> n + 1`.
    Birth,
    /// Order `n -> n - 1`.
    Death,
    /// Independent prior proposal.
    Independent,
    /// Unimodal sampler: move one latent uniform between the two sides of the peak.
    PeakShift,
}

impl MoveKind {
    pub fn label(self) -> &'static str {
        match self {
            MoveKind::H => "H",
            MoveKind::Birth => "H+",
            MoveKind::Death => "H-",
            MoveKind::Independent => "IMA",
            MoveKind::PeakShift => "peak",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        [
            MoveKind::H,
            MoveKind::Birth,
            MoveKind::Death,
            MoveKind::Independent,
            MoveKind::PeakShift,
        ]
        .into_iter()
        .find(|k| k.label() == s)
    }
}

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Scale of the order-changing move probabilities, in `[0, 1/2]`.
    pub c: f64,
    /// `(M1, M2)`: outer limits for endpoint proposals in the H move.
    pub bounds: (f64, f64),
    pub updates: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    #[serde(default)]
    pub balance: BalanceMode,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.c) {
            return Err(Error::Config(format!("move scale c = {} must lie in [0, 1/2]", self.c)));
        }
        if !(self.bounds.0 < self.bounds.1) {
            return Err(Error::Config(format!(
                "bounds M1 = {} and M2 = {} must satisfy M1 < M2",
                self.bounds.0, self.bounds.1
            )));
        }
        if self.burn_in >= self.updates {
            return Err(Error::Config(format!(
                "burn-in {} must be smaller than the number of updates {}",
                self.burn_in, self.updates
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// Move-selection probabilities at order `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProbabilities {
    pub stay: f64,
    pub birth: f64,
    pub death: f64,
}

/// `P_H+ = c min(1, p(n+1)/p(n))`, `P_H- = c min(1, p(n-1)/p(n))`, zero at the
/// edges of the order support, and `P_H = 1 - P_H+ - P_H-`.
pub fn move_probabilities(n: usize, c: f64, order: &OrderDistribution) -> MoveProbabilities {
    let below = (n > order.n_min()).then(|| order.pmf_or_zero(n - 1));
    let above = (n < order.n_max()).then(|| order.pmf_or_zero(n + 1));
    selection_probabilities(c, below, order.pmf_or_zero(n), above)
}

/// Move probabilities from the order masses around the current order;
/// `None` marks a neighbour outside the support.
pub fn selection_probabilities(c: f64, below: Option<f64>, here: f64, above: Option<f64>) -> MoveProbabilities {
    let ratio = |m: Option<f64>| match m {
        Some(p) if here > 0.0 => (p / here).min(1.0),
        _ => 0.0,
    };
    let birth = c * ratio(above);
    let death = c * ratio(below);
    MoveProbabilities {
        stay: 1.0 - birth - death,
        birth,
        death,
    }
}

/// Everything a transition needs besides the current state.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub likelihood: Likelihood,
    pub spec: PriorSpec,
    pub tau: f64,
    pub bounds: (f64, f64),
    pub c: f64,
    pub balance: BalanceMode,
}

impl Posterior {
    pub fn new(likelihood: Likelihood, spec: PriorSpec, tau: f64, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if likelihood.n_max() < spec.order().n_max() {
            return Err(Error::Config(format!(
                "likelihood precomputed to order {} but prior reaches {}",
                likelihood.n_max(),
                spec.order().n_max()
            )));
        }
        Ok(Self {
            likelihood,
            spec,
            tau,
            bounds: cfg.bounds,
            c: cfg.c,
            balance: cfg.balance,
        })
    }

    /// Log prior density in the sampler's parametrisation.
    ///
    /// Monotone: the joint coefficient density. Unimodal: the density of the
    /// generating uniforms, `ln p(n) - ln(n - 1)`, or `-inf` for an
    /// inadmissible peak.
    pub fn log_prior(&self, draw: &PriorDraw) -> f64 {
        match &self.spec {
            PriorSpec::Monotone(p) => isotonic_prior_logdensity(draw.coeffs(), p),
            PriorSpec::Unimodal(p) => {
                let n = draw.order();
                let admissible = draw
                    .latent
                    .as_ref()
                    .is_some_and(|l| l.coefficients(p).is_some());
                if !admissible || !p.order.contains(n) {
                    return f64::NEG_INFINITY;
                }
                p.order.ln_pmf(n) - ((n - 1) as f64).ln()
            }
        }
    }
}

/// Current sampler state with cached likelihood pieces.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub draw: PriorDraw,
    pub(crate) fitted: Vec<f64>,
    pub(crate) scratch: Vec<f64>,
    pub cached_loglik: f64,
    pub cached_logprior: f64,
}

impl ChainState {
    pub fn new(draw: PriorDraw, post: &Posterior) -> Result<Self> {
        let mut fitted = Vec::new();
        post.likelihood.fitted(draw.coeffs(), &mut fitted);
        let cached_loglik = post.likelihood.from_fitted(&fitted);
        let cached_logprior = post.log_prior(&draw);
        if cached_logprior == f64::NEG_INFINITY {
            return Err(Error::Config("initial state lies outside the prior support".into()));
        }
        Ok(Self {
            draw,
            fitted,
            scratch: Vec::new(),
            cached_loglik,
            cached_logprior,
        })
    }

    pub fn order(&self) -> usize {
        self.draw.order()
    }

    pub fn coeffs(&self) -> &[f64] {
        self.draw.coeffs()
    }

    /// `ln nu`: unnormalised log posterior.
    pub fn log_target(&self) -> f64 {
        self.cached_loglik + self.cached_logprior
    }

    /// Largest absolute discrepancy between the caches and a full recomputation.
    pub fn cache_error(&self, post: &Posterior) -> f64 {
        let ll = post.likelihood.evaluate(self.coeffs());
        let lp = post.log_prior(&self.draw);
        (ll - self.cached_loglik).abs().max((lp - self.cached_logprior).abs())
    }
}

/// Result of one transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
}

pub(crate) fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
        return false;
    }
    rng.random::<f64>().ln() < log_ratio
}

/// Independent Metropolis: propose a fresh prior draw, accept with the likelihood ratio.
pub fn ima_step<R: Rng + ?Sized>(state: &mut ChainState, post: &Posterior, rng: &mut R) -> Result<StepOutcome> {
    let draw = post.spec.sample(post.tau, rng)?;
    let mut fitted = Vec::new();
    post.likelihood.fitted(draw.coeffs(), &mut fitted);
    let loglik = post.likelihood.from_fitted(&fitted);
    let accepted = accept(loglik - state.cached_loglik, rng);
    if accepted {
        state.cached_logprior = post.log_prior(&draw);
        state.draw = draw;
        state.fitted = fitted;
        state.cached_loglik = loglik;
    }
    Ok(StepOutcome {
        kind: MoveKind::Independent,
        accepted,
    })
}

/// One transition of the configured sampler.
pub fn step<R: Rng + ?Sized>(
    state: &mut ChainState,
    post: &Posterior,
    kind: SamplerKind,
    rng: &mut R,
) -> Result<StepOutcome> {
    match (kind, &post.spec) {
        (SamplerKind::Ima, _) => ima_step(state, post, rng),
        (SamplerKind::Mhra, PriorSpec::Monotone(_)) => mhra_step(state, post, rng),
        (SamplerKind::Mhra, PriorSpec::Unimodal(_)) => unimodal_step(state, post, rng),
    }
}

/// Runs a chain on the Gaussian posterior for `d` with noise variance `sigma_sq`.
pub fn run_chain(d: &Dataset, spec: &PriorSpec, cfg: &SamplerConfig, sigma_sq: f64) -> Result<ChainTrace> {
    let likelihood = Likelihood::gaussian(d, spec.order().n_max(), sigma_sq)?;
    let post = Posterior::new(likelihood, spec.clone(), d.tau(), cfg)?;
    run_posterior(&post, cfg)
}

/// Runs a chain on an arbitrary [`Posterior`]; the initial state is a prior draw.
pub fn run_posterior(post: &Posterior, cfg: &SamplerConfig) -> Result<ChainTrace> {
    cfg.validate()?;
    let mut rng: ChainRng = rng_from_seed(cfg.seed);
    let draw = post.spec.sample(post.tau, &mut rng)?;
    let mut state = ChainState::new(draw, post)?;
    let shape = post.spec.shape();
    let mut trace = ChainTrace::new(post.tau, cfg.burn_in, cfg.thinning);

    for it in 0..cfg.updates {
        let outcome = step(&mut state, post, cfg.kind, &mut rng)?;
        if cfg!(debug_assertions) {
            debug_assert!(shape_check(state.coeffs(), shape).unwrap_or(false), "state left the constraint set");
            if it % 4096 == 0 {
                let err = state.cache_error(post);
                debug_assert!(err < 1e-6 * (1.0 + state.cached_loglik.abs()), "stale cache: {err}");
            }
        }
        trace.record_order(state.order());
        if it >= cfg.burn_in {
            trace.tally(outcome);
            if (it - cfg.burn_in) % cfg.thinning == 0 {
                trace.push_state(state.coeffs());
            }
        }
    }
    Ok(trace)
}
