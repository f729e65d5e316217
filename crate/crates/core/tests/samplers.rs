mod common;

use approx::assert_relative_eq;
use rand::Rng;

use common::{fixed_order_check, order_frequencies, sampler_config, small_dataset};
use shapereg::bernstein::{shape_check, ShapeClass};
use shapereg::model::{empirical_hyperparams, HyperparamRule, Likelihood, TestFunction};
use shapereg::priors::{
    isotonic_prior_logdensity, sample_isotonic_order, sample_unimodal_order, Curvature, Interval, MonotonePrior,
    OrderDistribution, PriorSpec, UnimodalPrior,
};
use shapereg::rng::rng_from_seed;
use shapereg::samplers::{
    birth_log_ratio, death_log_ratio, ima_step, mhra_h_move, run_chain, run_posterior, BalanceMode, ChainState,
    MoveKind, Posterior, SamplerKind,
};

fn monotone_spec(alpha: f64, n_max: usize) -> PriorSpec {
    let order = OrderDistribution::isotonic(alpha, n_max).unwrap();
    PriorSpec::Monotone(MonotonePrior::new(order, Interval::new(-0.2, 0.5).unwrap(), Interval::new(0.5, 1.2).unwrap()).unwrap())
}

fn convex_spec(alpha: f64, n_max: usize) -> PriorSpec {
    let order = OrderDistribution::convex(alpha, n_max).unwrap();
    PriorSpec::Unimodal(UnimodalPrior::new(order, Interval::new(-0.1, 0.2).unwrap(), 1.0, 0.6, Curvature::Convex).unwrap())
}

#[test]
fn flat_likelihood_recovers_order_prior_both_modes() {
    for (spec, bounds) in [(monotone_spec(10.0, 20), (-0.2, 1.2)), (convex_spec(10.0, 20), (-1.0, 2.0))] {
        let order = spec.order().clone();
        for balance in [BalanceMode::Strict, BalanceMode::Paper] {
            let mut cfg = sampler_config(0.35, bounds, 1_000_000, 17, balance);
            cfg.thinning = 1000;
            let post = Posterior::new(Likelihood::flat(20), spec.clone(), 1.0, &cfg).unwrap();
            let trace = run_posterior(&post, &cfg).unwrap();
            for (n, p, se) in order_frequencies(trace.order_history(), order.support()) {
                let want = order.pmf(n).unwrap();
                let se = se.max((want * (1.0 - want) / 1e6).sqrt());
                assert!((p - want).abs() < 4.0 * se, "{:?} {balance:?} n={n}: {p} vs {want} (se {se})", spec.shape());
            }
        }
    }
}

#[test]
fn flat_likelihood_endpoint_means() {
    // under the prior a0 ~ U(-0.2, 0.5) and an ~ U(0.5, 1.2)
    let spec = monotone_spec(4.0, 8);
    let mut cfg = sampler_config(0.35, (-0.2, 1.2), 400_000, 3, BalanceMode::Paper);
    cfg.thinning = 10;
    let post = Posterior::new(Likelihood::flat(8), spec, 1.0, &cfg).unwrap();
    let trace = run_posterior(&post, &cfg).unwrap();
    let a0: Vec<f64> = trace.states().map(|s| s[0]).collect();
    let an: Vec<f64> = trace.states().map(|s| s[s.len() - 1]).collect();
    let (m0, s0) = common::batch_mean(&a0, 50);
    let (mn, sn) = common::batch_mean(&an, 50);
    assert!((m0 - 0.15).abs() < 4.0 * s0, "{m0} {s0}");
    assert!((mn - 0.85).abs() < 4.0 * sn, "{mn} {sn}");
}

#[test]
fn fixed_order_monotone_matches_importance_sampling() {
    let data = small_dataset(TestFunction::F1, 10, 0.3, 41);
    let hyper = empirical_hyperparams(&data, ShapeClass::Monotone, &HyperparamRule::default()).unwrap();
    let PriorSpec::Monotone(prior) = hyper.spec.clone() else { unreachable!() };
    for n in 1..=3 {
        let mut rng = rng_from_seed(n as u64);
        let start = sample_isotonic_order(&prior, n, 1.0, &mut rng).unwrap();
        let cmp = fixed_order_check(&data, &hyper.spec, hyper.bounds, 0.09, start, 400_000, 400_000, 100 + n as u64, |r| {
            sample_isotonic_order(&prior, n, 1.0, r).unwrap()
        });
        assert!(cmp.worst_z() < 3.0, "n={n}: z={}", cmp.worst_z());
    }
}

#[test]
fn fixed_order_convex_matches_importance_sampling() {
    let data = small_dataset(TestFunction::F3, 10, 0.1, 43);
    let hyper = empirical_hyperparams(&data, ShapeClass::UnimodalConvex, &HyperparamRule::default()).unwrap();
    let PriorSpec::Unimodal(prior) = hyper.spec.clone() else { unreachable!() };
    for n in 2..=3 {
        let mut rng = rng_from_seed(n as u64);
        let start = sample_unimodal_order(&prior, n, 1.0, &mut rng).unwrap();
        let cmp = fixed_order_check(&data, &hyper.spec, hyper.bounds, 0.01, start, 400_000, 400_000, 200 + n as u64, |r| {
            sample_unimodal_order(&prior, n, 1.0, r).unwrap()
        });
        assert!(cmp.worst_z() < 3.0, "n={n}: z={}", cmp.worst_z());
    }
}

#[test]
fn chains_stay_in_constraint_set() {
    let data = small_dataset(TestFunction::F4, 60, 0.1, 7);
    let hyper = empirical_hyperparams(&data, ShapeClass::UnimodalConvex, &HyperparamRule::default()).unwrap();
    let cfg = sampler_config(0.35, hyper.bounds, 100_000, 8, BalanceMode::Paper);
    let trace = run_chain(&data, &hyper.spec, &cfg, 0.01).unwrap();
    assert!(trace.states().all(|s| shape_check(s, ShapeClass::UnimodalConvex).unwrap()));

    let data = small_dataset(TestFunction::F2, 60, 0.5, 7);
    let hyper = empirical_hyperparams(&data, ShapeClass::Monotone, &HyperparamRule::default()).unwrap();
    let cfg = sampler_config(0.35, hyper.bounds, 100_000, 9, BalanceMode::Paper);
    let trace = run_chain(&data, &hyper.spec, &cfg, 0.25).unwrap();
    assert!(trace.states().all(|s| shape_check(s, ShapeClass::Monotone).unwrap()));
    assert!(trace.order_history().iter().all(|&n| (1..=20).contains(&n)));
}

#[test]
fn same_seed_same_trace() {
    let data = small_dataset(TestFunction::F1, 30, 1.0, 1);
    let hyper = empirical_hyperparams(&data, ShapeClass::Monotone, &HyperparamRule::default()).unwrap();
    let cfg = sampler_config(0.35, hyper.bounds, 5_000, 77, BalanceMode::Paper);
    let a = run_chain(&data, &hyper.spec, &cfg, 1.0).unwrap();
    let b = run_chain(&data, &hyper.spec, &cfg, 1.0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_state_after_burn_in() {
    let data = small_dataset(TestFunction::F1, 30, 1.0, 1);
    let hyper = empirical_hyperparams(&data, ShapeClass::Monotone, &HyperparamRule::default()).unwrap();
    let mut cfg = sampler_config(0.35, hyper.bounds, 101, 5, BalanceMode::Paper);
    cfg.burn_in = 100;
    let trace = run_chain(&data, &hyper.spec, &cfg, 1.0).unwrap();
    assert_eq!(trace.len(), 1);
    assert_eq!(trace.order_history().len(), 101);
}

#[test]
fn strict_and_paper_chains_are_identical() {
    let data = small_dataset(TestFunction::F1, 40, 0.5, 2);
    let hyper = empirical_hyperparams(&data, ShapeClass::Monotone, &HyperparamRule::default()).unwrap();
    let paper = sampler_config(0.35, hyper.bounds, 20_000, 6, BalanceMode::Paper);
    let strict = sampler_config(0.35, hyper.bounds, 20_000, 6, BalanceMode::Strict);
    let a = run_chain(&data, &hyper.spec, &paper, 0.25).unwrap();
    let b = run_chain(&data, &hyper.spec, &strict, 0.25).unwrap();
    assert_eq!(a.order_history(), b.order_history());
}

#[test]
fn birth_death_pair_cancels() {
    let order = OrderDistribution::isotonic(10.0, 20).unwrap();
    for n in 1..20 {
        for balance in [BalanceMode::Paper, BalanceMode::Strict] {
            let up = birth_log_ratio(0.0, n, 0.8, &order, 0.35, balance);
            let down = death_log_ratio(0.0, n + 1, 0.8, &order, 0.35, balance);
            assert_relative_eq!(up + down, 0.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn endpoint_move_matches_full_recompute() {
    // slow oracle: accept probability from a full density evaluation
    let data = small_dataset(TestFunction::F1, 20, 0.4, 3);
    let spec = monotone_spec(10.0, 20);
    let PriorSpec::Monotone(prior) = spec.clone() else { unreachable!() };
    let lik = Likelihood::gaussian(&data, 20, 0.16).unwrap();
    let cfg = sampler_config(0.0, (-0.2, 1.2), 10, 1, BalanceMode::Paper);
    let post = Posterior::new(lik.clone(), spec, 1.0, &cfg).unwrap();
    let mut rng = rng_from_seed(11);
    for _ in 0..200 {
        let start = sample_isotonic_order(&prior, 4, 1.0, &mut rng).unwrap();
        let mut state = ChainState::new(start.clone(), &post).unwrap();
        let before = lik.evaluate(start.coeffs()) + isotonic_prior_logdensity(start.coeffs(), &prior);
        let mut r = rng_from_seed(rng.random());
        let out = mhra_h_move(&mut state, &post, &mut r).unwrap();
        assert_eq!(out.kind, MoveKind::H);
        if out.accepted {
            let after = lik.evaluate(state.coeffs()) + isotonic_prior_logdensity(state.coeffs(), &prior);
            assert_relative_eq!(state.log_target(), after, max_relative = 1e-9);
            assert!(state.cache_error(&post) < 1e-9);
        } else {
            assert_eq!(state.coeffs(), start.coeffs());
            assert_relative_eq!(state.log_target(), before, max_relative = 1e-12);
        }
    }
}

#[test]
fn ima_acceptance_matches_exact_ratio() {
    let data = shapereg::model::Dataset::from_pairs(vec![0.1, 0.5, 0.9], vec![0.2, 0.4, 0.95], 1.0).unwrap();
    let spec = monotone_spec(2.0, 3);
    let lik = Likelihood::gaussian(&data, 3, 0.05).unwrap();
    let mut cfg = sampler_config(0.35, (-0.2, 1.2), 10, 1, BalanceMode::Paper);
    cfg.kind = SamplerKind::Ima;
    let post = Posterior::new(lik.clone(), spec.clone(), 1.0, &cfg).unwrap();
    let start = spec.sample(1.0, &mut rng_from_seed(2)).unwrap();
    let current = ChainState::new(start, &post).unwrap();

    let trials = 100_000;
    let mut rng = rng_from_seed(3);
    let (mut hits, mut expected) = (0usize, 0.0);
    for _ in 0..trials {
        let proposal = spec.sample(1.0, &mut rng.clone()).unwrap();
        expected += (lik.evaluate(proposal.coeffs()) - current.cached_loglik).exp().min(1.0);
        let mut state = current.clone();
        hits += usize::from(ima_step(&mut state, &post, &mut rng).unwrap().accepted);
    }
    let p = expected / trials as f64;
    let freq = hits as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((freq - p).abs() < 4.0 * se, "{freq} vs {p}");
}

#[test]
fn ima_accepts_everything_under_flat_likelihood() {
    let spec = monotone_spec(3.0, 6);
    let mut cfg = sampler_config(0.35, (-0.2, 1.2), 2000, 4, BalanceMode::Paper);
    cfg.kind = SamplerKind::Ima;
    let post = Posterior::new(Likelihood::flat(6), spec, 1.0, &cfg).unwrap();
    let trace = run_posterior(&post, &cfg).unwrap();
    assert_eq!(trace.acceptance_rate_of(MoveKind::Independent), Some(1.0));
}
