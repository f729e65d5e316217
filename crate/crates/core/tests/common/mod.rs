//! Shared oracles for the integration tests.
#![allow(dead_code)]

use shapereg::model::{generate_dataset, Dataset, Likelihood, NoiseModel, TestFunction};
use shapereg::priors::{PriorDraw, PriorSpec};
use shapereg::samplers::{step, BalanceMode, ChainState, Posterior, SamplerConfig, SamplerKind};
use shapereg::rng::rng_from_seed;

/// Mean and batch-means standard error.
pub fn batch_mean(series: &[f64], batches: usize) -> (f64, f64) {
    let m = series.len();
    let b = m / batches;
    let means: Vec<f64> = (0..batches)
        .map(|j| series[j * b..(j + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let mean = series.iter().sum::<f64>() / m as f64;
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// Self-normalised importance-sampling estimate of E[g] under
/// `prior * exp(loglik)`, with its delta-method standard error.
pub struct Weighted {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

pub fn importance_means(samples: &[Vec<f64>], loglik: &[f64]) -> Weighted {
    let top = loglik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = loglik.iter().map(|l| (l - top).exp()).collect();
    let sw: f64 = w.iter().sum();
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for (s, wi) in samples.iter().zip(&w) {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += wi * v / sw;
        }
    }
    let mut se = vec![0.0; dim];
    for (s, wi) in samples.iter().zip(&w) {
        for ((e, v), m) in se.iter_mut().zip(s).zip(&mean) {
            *e += (wi * (v - m)).powi(2);
        }
    }
    se.iter_mut().for_each(|e| *e = e.sqrt() / sw);
    Weighted { mean, se }
}

pub fn small_dataset(f: TestFunction, k: usize, sigma: f64, seed: u64) -> Dataset {
    generate_dataset(f, k, NoiseModel::new(sigma).unwrap(), &mut rng_from_seed(seed)).unwrap()
}

pub fn sampler_config(c: f64, bounds: (f64, f64), updates: usize, seed: u64, balance: BalanceMode) -> SamplerConfig {
    SamplerConfig {
        kind: SamplerKind::Mhra,
        c,
        bounds,
        updates,
        burn_in: 0,
        thinning: 1,
        seed,
        balance,
    }
}

/// Result of [`fixed_order_check`]: per coefficient, chain mean, chain s.e.,
/// importance-sampling mean and s.e.
pub struct FixedOrderComparison {
    pub chain: Vec<(f64, f64)>,
    pub oracle: Weighted,
}

impl FixedOrderComparison {
    /// Largest discrepancy in units of the combined standard error.
    pub fn worst_z(&self) -> f64 {
        self.chain
            .iter()
            .enumerate()
            .map(|(i, (m, s))| {
                let se = (s * s + self.oracle.se[i].powi(2)).sqrt();
                (m - self.oracle.mean[i]).abs() / se
            })
            .fold(0.0, f64::max)
    }
}

/// Runs the chain with `c = 0` from `start` (so the order never changes) and
/// compares coefficient means against importance sampling from the prior
/// draws produced by `prior_draw`.
pub fn fixed_order_check<F>(
    data: &Dataset,
    spec: &PriorSpec,
    bounds: (f64, f64),
    sigma_sq: f64,
    start: PriorDraw,
    steps: usize,
    is_draws: usize,
    seed: u64,
    mut prior_draw: F,
) -> FixedOrderComparison
where
    F: FnMut(&mut shapereg::rng::ChainRng) -> PriorDraw,
{
    let n = start.order();
    let lik = Likelihood::gaussian(data, spec.order().n_max(), sigma_sq).unwrap();
    let cfg = sampler_config(0.0, bounds, steps + 1, seed, BalanceMode::Paper);
    let post = Posterior::new(lik.clone(), spec.clone(), data.tau(), &cfg).unwrap();
    let mut state = ChainState::new(start, &post).unwrap();
    let mut rng = rng_from_seed(seed);
    let burn = steps / 10;
    let mut series = vec![Vec::with_capacity(steps); n + 1];
    for it in 0..steps {
        step(&mut state, &post, SamplerKind::Mhra, &mut rng).unwrap();
        assert_eq!(state.order(), n);
        if it >= burn {
            for (s, v) in series.iter_mut().zip(state.coeffs()) {
                s.push(*v);
            }
        }
    }
    let chain = series.iter().map(|s| batch_mean(s, 50)).collect();

    let mut rng = rng_from_seed(seed ^ 0xA5A5_A5A5);
    let mut samples = Vec::with_capacity(is_draws);
    let mut logliks = Vec::with_capacity(is_draws);
    for _ in 0..is_draws {
        let d = prior_draw(&mut rng);
        logliks.push(lik.evaluate(d.coeffs()));
        samples.push(d.coeffs().to_vec());
    }
    FixedOrderComparison {
        chain,
        oracle: importance_means(&samples, &logliks),
    }
}

/// Frequency of each order in `history`, with batch-means standard errors.
pub fn order_frequencies(history: &[usize], support: std::ops::RangeInclusive<usize>) -> Vec<(usize, f64, f64)> {
    support
        .map(|n| {
            let ind: Vec<f64> = history.iter().map(|&m| f64::from(u8::from(m == n))).collect();
            let (p, se) = batch_mean(&ind, 100);
            (n, p, se)
        })
        .collect()
}

fn sup_on_grid<F: Fn(f64) -> f64>(f: F) -> f64 {
    (0..=1000).map(|i| f(i as f64 / 1000.0).abs()).fold(0.0, f64::max)
}

/// The deterministic Bernstein invariants, each with a pass flag.
pub fn bernstein_checks() -> Vec<(&'static str, bool)> {
    use shapereg::bernstein::{basis_eval, bernstein_of, BernsteinPoly};
    use std::f64::consts::PI;

    let mut out = Vec::new();
    let unity = (0..=30).all(|n| {
        (0..=100).all(|k| {
            let t = k as f64 / 100.0;
            let s: f64 = (0..=n).map(|i| basis_eval(i, n, t).unwrap()).sum();
            (s - 1.0).abs() < 1e-12
        })
    });
    out.push(("partition of unity, n <= 30, 101 points", unity));

    let mut rng = rng_from_seed(2024);
    let mut endpoints = true;
    let mut derivative = true;
    for _ in 0..200 {
        let n = rand::Rng::random_range(&mut rng, 1..=15);
        let coeffs: Vec<f64> = (0..=n).map(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)).collect();
        let p = BernsteinPoly::new(coeffs.clone(), 1.0).unwrap();
        endpoints &= (p.eval(0.0).unwrap() - coeffs[0]).abs() < 1e-12
            && (p.eval(1.0).unwrap() - coeffs[n]).abs() < 1e-12;
        let d = p.derivative().unwrap();
        for j in 1..=50 {
            let t = j as f64 / 51.0;
            let h = 1e-6;
            let fd = (p.eval(t + h).unwrap() - p.eval(t - h).unwrap()) / (2.0 * h);
            let exact = d.eval(t).unwrap();
            derivative &= (fd - exact).abs() <= 1e-5 * exact.abs().max(1.0);
        }
    }
    out.push(("endpoint interpolation", endpoints));
    out.push(("derivative vs finite differences", derivative));

    let f = |t: f64| (PI * t / 2.0).sin();
    let errs: Vec<f64> = [5, 10, 20, 40]
        .iter()
        .map(|&n| {
            let p = bernstein_of(f, n, 1.0).unwrap();
            sup_on_grid(|t| p.eval(t).unwrap() - f(t))
        })
        .collect();
    out.push(("sup-norm convergence for sin(pi t / 2)", errs.windows(2).all(|w| w[1] < w[0])));

    // concave target with the value-plus-derivative metric
    let g = |t: f64| (PI * t).sin();
    let dg = |t: f64| PI * (PI * t).cos();
    let dists: Vec<f64> = [5, 10, 20, 40]
        .iter()
        .map(|&n| {
            let p = bernstein_of(g, n, 1.0).unwrap();
            let dp = p.derivative().unwrap();
            sup_on_grid(|t| p.eval(t).unwrap() - g(t)) + sup_on_grid(|t| dp.eval(t).unwrap() - dg(t))
        })
        .collect();
    out.push(("value-plus-derivative convergence for sin(pi t)", dists.windows(2).all(|w| w[1] < w[0])));
    out
}

/// Draws `draws` samples from each constructive prior and counts shape failures.
pub fn prior_shape_failures(draws: usize, seed: u64) -> Vec<(&'static str, usize)> {
    use shapereg::bernstein::{shape_check, ShapeClass};
    use shapereg::priors::{
        sample_concave, sample_convex, sample_isotonic, Curvature, Interval, MonotonePrior, OrderDistribution,
        UnimodalPrior,
    };

    let mono = MonotonePrior::new(
        OrderDistribution::isotonic(10.0, 20).unwrap(),
        Interval::new(-0.3, 0.6).unwrap(),
        Interval::new(0.4, 1.3).unwrap(),
    )
    .unwrap();
    let concave = UnimodalPrior::new(
        OrderDistribution::convex(10.0, 20).unwrap(),
        Interval::new(0.8, 1.2).unwrap(),
        0.1,
        -0.2,
        Curvature::Concave,
    )
    .unwrap();
    let convex = UnimodalPrior::new(
        OrderDistribution::convex(10.0, 20).unwrap(),
        Interval::new(-0.1, 0.3).unwrap(),
        1.0,
        0.8,
        Curvature::Convex,
    )
    .unwrap();
    let mut rng = rng_from_seed(seed);
    let count = |f: &mut dyn FnMut() -> bool| (0..draws).filter(|_| !f()).count();
    vec![
        (
            "monotone",
            count(&mut || shape_check(sample_isotonic(&mono, 1.0, &mut rng).unwrap().coeffs(), ShapeClass::Monotone).unwrap()),
        ),
        (
            "concave",
            count(&mut || {
                shape_check(sample_concave(&concave, 1.0, &mut rng).unwrap().coeffs(), ShapeClass::UnimodalConcave).unwrap()
            }),
        ),
        (
            "convex",
            count(&mut || {
                shape_check(sample_convex(&convex, 1.0, &mut rng).unwrap().coeffs(), ShapeClass::UnimodalConvex).unwrap()
            }),
        ),
    ]
}

/// Sorted key paths of a JSON document, with array elements collapsed to `[]`.
pub fn json_schema(v: &serde_json::Value) -> Vec<String> {
    fn walk(v: &serde_json::Value, prefix: &str, out: &mut std::collections::BTreeSet<String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    // numeric keys (order maps) are data, not schema
                    let key = if k.parse::<usize>().is_ok() { "<n>" } else { k.as_str() };
                    let p = format!("{prefix}.{key}");
                    out.insert(p.clone());
                    walk(x, &p, out);
                }
            }
            serde_json::Value::Array(a) => {
                for x in a {
                    walk(x, &format!("{prefix}[]"), out);
                }
            }
            _ => {}
        }
    }
    let mut out = std::collections::BTreeSet::new();
    walk(v, "", &mut out);
    out.into_iter().collect()
}

/// Tiny monotone experiment used by the determinism and file-format tests.
pub fn tiny_experiment(seed: u64, parallelism: usize) -> shapereg::experiment::ExperimentConfig {
    use shapereg::bernstein::ShapeClass;
    use shapereg::experiment::ExperimentConfig;
    let mut cfg = ExperimentConfig::quick(TestFunction::F1, 1.0, ShapeClass::Monotone);
    cfg.replicates = 4;
    cfg.sampler.updates = 3_000;
    cfg.sampler.burn_in = 300;
    cfg.grid_size = 201;
    cfg.master_seed = seed;
    cfg.parallelism = parallelism;
    cfg
}
