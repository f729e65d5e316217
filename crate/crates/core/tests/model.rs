use shapereg::bernstein::ShapeClass;
use shapereg::model::{
    empirical_hyperparams, estimate_sigma_sq, generate_dataset, HyperparamRule, NoiseModel, TestFunction,
};
use shapereg::priors::PriorSpec;
use shapereg::rng::{rng_from_seed, stream_rng};

#[test]
fn residual_variance_matches_noise() {
    let reps = 400;
    let mut vars = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let d = generate_dataset(TestFunction::F1, 100, NoiseModel::new(1.0).unwrap(), &mut stream_rng(1, r)).unwrap();
        let res: Vec<f64> = d
            .xs()
            .iter()
            .zip(d.ys())
            .map(|(x, y)| y[0] - TestFunction::F1.eval(*x).unwrap())
            .collect();
        let m = res.iter().sum::<f64>() / 100.0;
        vars.push(res.iter().map(|e| (e - m).powi(2)).sum::<f64>() / 99.0);
    }
    let mean = vars.iter().sum::<f64>() / reps as f64;
    let sd = (vars.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    assert!((mean - 1.0).abs() < 4.0 * sd / (reps as f64).sqrt(), "{mean}");
}

#[test]
fn difference_estimator_is_unbiased_for_flat_function() {
    // for a constant regression function E[(Y_{i+1} - Y_i)^2] = 2 sigma^2
    let reps = 10_000;
    let mut rng = rng_from_seed(4);
    let mut est = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut d = generate_dataset(TestFunction::F2, 100, NoiseModel::new(1.0).unwrap(), &mut rng).unwrap();
        // shift every x into the flat middle piece of F2
        let xs: Vec<f64> = d.xs().iter().map(|x| 0.25 + 0.5 * x).collect();
        let ys: Vec<f64> = d.all_responses().zip(d.xs()).map(|(y, x)| y - TestFunction::F2.eval(*x).unwrap() + 0.5).collect();
        d = shapereg::model::Dataset::from_pairs(xs, ys, 1.0).unwrap();
        est.push(estimate_sigma_sq(&d).unwrap());
    }
    let mean = est.iter().sum::<f64>() / reps as f64;
    let sd = (est.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    assert!((mean - 1.0).abs() < 4.0 * sd / (reps as f64).sqrt(), "{mean}");
}

#[test]
fn monotone_ranges_track_the_curve_ends() {
    let d = generate_dataset(TestFunction::F1, 100, NoiseModel::new(0.1).unwrap(), &mut rng_from_seed(9)).unwrap();
    let h = empirical_hyperparams(&d, ShapeClass::Monotone, &HyperparamRule::default()).unwrap();
    let PriorSpec::Monotone(p) = h.spec else { panic!("expected a monotone prior") };
    assert!(p.q1.lo.abs() < 0.3, "q11 = {}", p.q1.lo);
    assert!((p.q2.hi - 1.0).abs() < 0.3, "q22 = {}", p.q2.hi);
    assert_eq!(h.bounds, (p.q1.lo, p.q2.hi));
}
