use rand::Rng;
use rand_distr::StandardNormal;

use shapereg::analysis::{
    autocorrelation, effective_sample_size, monitored_series, order_posterior, posterior_mean_curve, uniform_grid,
    SeriesKind,
};
use shapereg::bernstein::ShapeClass;
use shapereg::model::{empirical_hyperparams, generate_dataset, HyperparamRule, NoiseModel, TestFunction};
use shapereg::rng::rng_from_seed;
use shapereg::samplers::{read_trace, run_chain, write_trace, BalanceMode, SamplerConfig, SamplerKind};

fn ar1(phi: f64, m: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut x = 0.0;
    let innov = (1.0 - phi * phi).sqrt();
    (0..m)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            x = phi * x + innov * z;
            x
        })
        .collect()
}

fn config(updates: usize, seed: u64, bounds: (f64, f64)) -> SamplerConfig {
    SamplerConfig {
        kind: SamplerKind::Mhra,
        c: 0.35,
        bounds,
        updates,
        burn_in: updates / 10,
        thinning: 1,
        seed,
        balance: BalanceMode::Paper,
    }
}

#[test]
fn white_noise_has_small_autocorrelation() {
    let s = ar1(0.0, 100_000, 1);
    let r = autocorrelation(&s, 50).unwrap();
    assert!(r.iter().all(|v| v.abs() < 0.02));
    let ess = effective_sample_size(&s).unwrap();
    assert!((ess / 100_000.0 - 1.0).abs() < 0.1, "{ess}");
}

#[test]
fn ar1_autocorrelation_and_ess() {
    let phi: f64 = 0.9;
    let m = 200_000;
    let s = ar1(phi, m, 2);
    let r = autocorrelation(&s, 20).unwrap();
    for (k, v) in r.iter().enumerate() {
        assert!((v - phi.powi(k as i32 + 1)).abs() < 0.02, "lag {}: {v}", k + 1);
    }
    let ess = effective_sample_size(&s).unwrap();
    let want = m as f64 * (1.0 - phi) / (1.0 + phi);
    assert!((ess / want - 1.0).abs() < 0.2, "{ess} vs {want}");
}

#[test]
fn posterior_means_keep_their_shape() {
    let grid = uniform_grid(1.0, 1001).unwrap();
    for (f, shape, sigma) in [
        (TestFunction::F1, ShapeClass::Monotone, 1.0),
        (TestFunction::F3, ShapeClass::UnimodalConvex, 0.5),
        (TestFunction::F3, ShapeClass::UnimodalConcave, 0.5),
    ] {
        let d = generate_dataset(f, 100, NoiseModel::new(sigma).unwrap(), &mut rng_from_seed(3)).unwrap();
        let h = empirical_hyperparams(&d, shape, &HyperparamRule::default()).unwrap();
        let trace = run_chain(&d, &h.spec, &config(20_000, 4, h.bounds), sigma * sigma).unwrap();
        let v = posterior_mean_curve(&trace, &grid).unwrap().values;
        match shape {
            ShapeClass::Monotone => assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-10)),
            ShapeClass::UnimodalConvex => assert!(v.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-8)),
            _ => assert!(v.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] <= 1e-8)),
        }
    }
}

#[test]
fn summaries_survive_trace_round_trip() {
    let d = generate_dataset(TestFunction::F1, 100, NoiseModel::new(1.0).unwrap(), &mut rng_from_seed(5)).unwrap();
    let h = empirical_hyperparams(&d, ShapeClass::Monotone, &HyperparamRule::default()).unwrap();
    let trace = run_chain(&d, &h.spec, &config(10_000, 6, h.bounds), 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.json");
    write_trace(&trace, &path).unwrap();
    let back = read_trace(&path).unwrap();
    assert_eq!(order_posterior(&back), order_posterior(&trace));
    let s1 = monitored_series(&trace, SeriesKind::AbsIntegral, None).unwrap();
    let s2 = monitored_series(&back, SeriesKind::AbsIntegral, None).unwrap();
    assert_eq!(effective_sample_size(&s1).unwrap(), effective_sample_size(&s2).unwrap());
}

#[test]
fn absolute_error_series_needs_truth() {
    let d = generate_dataset(TestFunction::F1, 50, NoiseModel::new(0.5).unwrap(), &mut rng_from_seed(5)).unwrap();
    let h = empirical_hyperparams(&d, ShapeClass::Monotone, &HyperparamRule::default()).unwrap();
    let trace = run_chain(&d, &h.spec, &config(2_000, 6, h.bounds), 0.25).unwrap();
    assert!(monitored_series(&trace, SeriesKind::AbsError, None).is_err());
    let s = monitored_series(&trace, SeriesKind::AbsError, Some(TestFunction::F1)).unwrap();
    assert_eq!(s.len(), trace.len());
    assert!(s.iter().all(|v| *v >= 0.0));
}
