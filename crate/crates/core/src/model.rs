//! Regression model `Y_jk = F(X_k) + eps_jk` with Gaussian errors.
//!
//! Contains the simulation test functions, data generation, the Gaussian
//! likelihood (plain and precomputed-design forms), the first-difference
//! noise variance estimator and the data-driven prior hyperparameters.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bernstein::{basis_row, BernsteinPoly, ShapeClass};
use crate::error::{Error, Result};
use crate::priors::{Curvature, Interval, MonotonePrior, OrderDistribution, PriorSpec, UnimodalPrior};

/// Observations `(X_k, Y_jk)` on `[0, tau]`, with `m_k >= 1` responses per design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Vec<Vec<f64>>,
    tau: f64,
}

impl Dataset {
    pub fn new(xs: Vec<f64>, ys: Vec<Vec<f64>>, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("domain end {tau} must be positive")));
        }
        if xs.len() != ys.len() {
            return Err(Error::Degenerate(format!(
                "{} design points but {} response groups",
                xs.len(),
                ys.len()
            )));
        }
        if let Some(x) = xs.iter().find(|x| !(0.0..=tau).contains(*x)) {
            return Err(Error::Domain(format!("design point {x} outside [0, {tau}]")));
        }
        if ys.iter().any(|g| g.is_empty()) {
            return Err(Error::Degenerate("every design point needs a response".into()));
        }
        if ys.iter().flatten().any(|y| !y.is_finite()) {
            return Err(Error::Domain("non-finite response".into()));
        }
        Ok(Self { xs, ys, tau })
    }

    /// One response per design point.
    pub fn from_pairs(xs: Vec<f64>, ys: Vec<f64>, tau: f64) -> Result<Self> {
        Self::new(xs, ys.into_iter().map(|y| vec![y]).collect(), tau)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[Vec<f64>] {
        &self.ys
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of design points `K`.
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn num_obs(&self) -> usize {
        self.ys.iter().map(Vec::len).sum()
    }

    /// Design point indices sorted by `x`, ties kept in original order.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.xs.len()).collect();
        idx.sort_by(|&a, &b| self.xs[a].total_cmp(&self.xs[b]));
        idx
    }

    /// Responses re-indexed by ascending `x` (`Y_[1], Y_[2], ..`).
    pub fn responses_by_x(&self) -> Vec<f64> {
        self.sorted_indices()
            .into_iter()
            .flat_map(|k| self.ys[k].iter().copied())
            .collect()
    }

    pub fn all_responses(&self) -> impl Iterator<Item = f64> + '_ {
        self.ys.iter().flatten().copied()
    }

    /// Writes `x,y` rows, one per observation.
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y"])?;
        for (x, group) in self.xs.iter().zip(&self.ys) {
            for y in group {
                w.write_record([x.to_string(), y.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `x,y` rows; rows sharing an `x` value become one design point.
    pub fn read_csv<R: Read>(input: R, tau: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| Error::format("<csv>", e))?
            .clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(Error::format("<csv>", "expected header `x,y`"));
        }
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::format("<csv>", e))?;
            let x: f64 = rec[0].trim().parse().map_err(|e| Error::format("<csv>", e))?;
            let y: f64 = rec[1].trim().parse().map_err(|e| Error::format("<csv>", e))?;
            match xs.iter().position(|&v| v == x) {
                Some(k) => ys[k].push(y),
                None => {
                    xs.push(x);
                    ys.push(vec![y]);
                }
            }
        }
        Self::new(xs, ys, tau)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::format(path, e))
    }

    pub fn load_csv(path: &Path, tau: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, tau).map_err(|e| match e {
            Error::Format { reason, .. } => Error::format(path, reason),
            other => other,
        })
    }
}

/// Standard deviation of the Gaussian errors used when simulating data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    /// `sigma = 0` is accepted for noiseless simulation.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("noise scale {sigma} must be non-negative")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Regression functions of the simulation study, all on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    /// `sin(pi t / 2)`
    F1,
    /// `2t`, then `0.5`, then `2t - 1`
    F2,
    /// `(16/9)(t - 1/4)^2`
    F3,
    /// `1 - 4t`, then `0`, then `4t - 3`
    F4,
}

impl TestFunction {
    pub fn eval(self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("test function argument {t} outside [0, 1]")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(self, t: f64) -> f64 {
        match self {
            TestFunction::F1 => (PI / 2.0 * t).sin(),
            TestFunction::F2 => {
                if t <= 0.25 {
                    2.0 * t
                } else if t <= 0.75 {
                    0.5
                } else {
                    2.0 * t - 1.0
                }
            }
            TestFunction::F3 => 16.0 / 9.0 * (t - 0.25).powi(2),
            TestFunction::F4 => {
                if t <= 0.25 {
                    1.0 - 4.0 * t
                } else if t <= 0.75 {
                    0.0
                } else {
                    4.0 * t - 3.0
                }
            }
        }
    }

    /// Shape the function belongs to, used to pick the default prior.
    pub fn natural_shape(self) -> ShapeClass {
        match self {
            TestFunction::F1 | TestFunction::F2 => ShapeClass::Monotone,
            TestFunction::F3 | TestFunction::F4 => ShapeClass::UnimodalConvex,
        }
    }
}

impl std::str::FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(TestFunction::F1),
            "f2" => Ok(TestFunction::F2),
            "f3" => Ok(TestFunction::F3),
            "f4" => Ok(TestFunction::F4),
            other => Err(Error::Config(format!("unknown test function `{other}`"))),
        }
    }
}

/// `K` design points i.i.d. `Uniform(0, 1)`, one response each.
pub fn generate_dataset<R: Rng + ?Sized>(
    f: TestFunction,
    points: usize,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<Dataset> {
    if points < 2 {
        return Err(Error::Degenerate(format!("need at least 2 design points, got {points}")));
    }
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    for _ in 0..points {
        let x: f64 = rng.random();
        let eps: f64 = rng.sample(StandardNormal);
        xs.push(x);
        ys.push(f.eval_unchecked(x) + noise.sigma() * eps);
    }
    Dataset::from_pairs(xs, ys, 1.0)
}

/// `sum_i (Y_[i+1] - Y_[i])^2 / (2 (K - 1))` over responses ordered by `x`.
pub fn estimate_sigma_sq(d: &Dataset) -> Result<f64> {
    let y = d.responses_by_x();
    if y.len() < 2 {
        return Err(Error::Degenerate("variance estimate needs at least 2 responses".into()));
    }
    let ss: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(ss / (2.0 * (y.len() - 1) as f64))
}

fn check_sigma_sq(sigma_sq: f64) -> Result<()> {
    if sigma_sq > 0.0 && sigma_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("noise variance {sigma_sq} must be positive")))
    }
}

/// Gaussian log-likelihood of `p` for the data.
pub fn log_likelihood(d: &Dataset, p: &BernsteinPoly, sigma_sq: f64) -> Result<f64> {
    check_sigma_sq(sigma_sq)?;
    if (p.domain_end() - d.tau()).abs() > 1e-12 * d.tau() {
        return Err(Error::Domain(format!(
            "polynomial domain [0, {}] does not match data domain [0, {}]",
            p.domain_end(),
            d.tau()
        )));
    }
    let norm = -0.5 * (2.0 * PI * sigma_sq).ln();
    let mut total = 0.0;
    for (x, group) in d.xs().iter().zip(d.ys()) {
        let fx = p.eval(*x)?;
        for y in group {
            total += norm - (y - fx).powi(2) / (2.0 * sigma_sq);
        }
    }
    Ok(total)
}

/// Bernstein basis values at the design points for every order up to
/// `n_max`, plus sufficient statistics of the responses.
///
/// With fitted values `f_k`, the residual sum of squares is
/// `sum_k (m_k f_k^2 - 2 f_k S_k) + sum y^2`, where `S_k` sums the responses at `X_k`.
#[derive(Debug, Clone)]
pub struct DesignBasis {
    points: usize,
    n_max: usize,
    /// `basis[n]` is row-major `K x (n + 1)`.
    basis: Vec<Vec<f64>>,
    counts: Vec<f64>,
    sums: Vec<f64>,
    sum_sq: f64,
    num_obs: usize,
}

impl DesignBasis {
    pub fn new(d: &Dataset, n_max: usize) -> Self {
        let points = d.len();
        let mut basis = vec![Vec::new()];
        for n in 1..=n_max {
            let mut m = vec![0.0; points * (n + 1)];
            for (k, x) in d.xs().iter().enumerate() {
                basis_row(n, x / d.tau(), &mut m[k * (n + 1)..(k + 1) * (n + 1)]);
            }
            basis.push(m);
        }
        Self {
            points,
            n_max,
            basis,
            counts: d.ys().iter().map(|g| g.len() as f64).collect(),
            sums: d.ys().iter().map(|g| g.iter().sum()).collect(),
            sum_sq: d.all_responses().map(|y| y * y).sum(),
            num_obs: d.num_obs(),
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    /// `phi_{i,n}(X_k / tau)`.
    #[inline]
    pub fn value(&self, n: usize, k: usize, i: usize) -> f64 {
        self.basis[n][k * (n + 1) + i]
    }

    /// Fitted values `F(X_k)` into `out`.
    pub fn fitted_into(&self, coeffs: &[f64], out: &mut Vec<f64>) {
        let n = coeffs.len() - 1;
        assert!(n >= 1 && n <= self.n_max, "order {n} outside precomputed range");
        let m = &self.basis[n];
        out.clear();
        out.extend(
            m.chunks_exact(n + 1)
                .map(|row| row.iter().zip(coeffs).map(|(b, c)| b * c).sum::<f64>()),
        );
    }

    /// Adds `delta * phi_{i,n}(X_k)` to each fitted value.
    pub fn shift_fitted(&self, n: usize, i: usize, delta: f64, fitted: &mut [f64]) {
        let m = &self.basis[n];
        for (k, f) in fitted.iter_mut().enumerate() {
            *f += delta * m[k * (n + 1) + i];
        }
    }

    /// Residual sum of squares for the given fitted values.
    pub fn rss(&self, fitted: &[f64]) -> f64 {
        let cross: f64 = fitted
            .iter()
            .zip(&self.counts)
            .zip(&self.sums)
            .map(|((f, m), s)| f * (m * f - 2.0 * s))
            .sum();
        (cross + self.sum_sq).max(0.0)
    }
}

/// Gaussian log-likelihood with a precomputed design, or a constant (flat)
/// likelihood used to check that samplers recover their prior.
#[derive(Debug, Clone)]
pub enum Likelihood {
    Gaussian { basis: DesignBasis, sigma_sq: f64 },
    Flat { n_max: usize },
}

impl Likelihood {
    pub fn gaussian(d: &Dataset, n_max: usize, sigma_sq: f64) -> Result<Self> {
        check_sigma_sq(sigma_sq)?;
        Ok(Likelihood::Gaussian {
            basis: DesignBasis::new(d, n_max),
            sigma_sq,
        })
    }

    pub fn flat(n_max: usize) -> Self {
        Likelihood::Flat { n_max }
    }

    pub fn n_max(&self) -> usize {
        match self {
            Likelihood::Gaussian { basis, .. } => basis.n_max(),
            Likelihood::Flat { n_max } => *n_max,
        }
    }

    /// Fitted values for `coeffs` (empty for the flat likelihood).
    pub fn fitted(&self, coeffs: &[f64], out: &mut Vec<f64>) {
        match self {
            Likelihood::Gaussian { basis, .. } => basis.fitted_into(coeffs, out),
            Likelihood::Flat { .. } => out.clear(),
        }
    }

    /// Log-likelihood from fitted values.
    pub fn from_fitted(&self, fitted: &[f64]) -> f64 {
        match self {
            Likelihood::Gaussian { basis, sigma_sq } => {
                -0.5 * basis.num_obs() as f64 * (2.0 * PI * sigma_sq).ln()
                    - basis.rss(fitted) / (2.0 * sigma_sq)
            }
            Likelihood::Flat { .. } => 0.0,
        }
    }

    pub fn shift_fitted(&self, n: usize, i: usize, delta: f64, fitted: &mut [f64]) {
        if let Likelihood::Gaussian { basis, .. } = self {
            basis.shift_fitted(n, i, delta, fitted);
        }
    }

    /// Full recomputation for `coeffs`.
    pub fn evaluate(&self, coeffs: &[f64]) -> f64 {
        let mut f = Vec::new();
        self.fitted(coeffs, &mut f);
        self.from_fitted(&f)
    }
}

/// How the upper end of the convex peak range is computed from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexUpperRule {
    /// `|q01 + mean(Y)| / 2`
    #[default]
    AbsoluteHalfSum,
    /// `(q01 + mean(Y)) / 2`
    Midpoint,
}

/// Settings for [`empirical_hyperparams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparamRule {
    pub alpha: f64,
    pub n_max: usize,
    pub convex_upper: ConvexUpperRule,
}

impl Default for HyperparamRule {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            n_max: 20,
            convex_upper: ConvexUpperRule::AbsoluteHalfSum,
        }
    }
}

/// Prior and proposal bounds derived from a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalHyperparams {
    pub spec: PriorSpec,
    /// Global bounds `M1 <= F <= M2` for the reversible-jump endpoint moves.
    pub bounds: (f64, f64),
}

/// Block sizes: `ceil(K/10)` for endpoint ranges and `ceil(K/20)` for the
/// convex endpoint bounds (10 and 5 at `K = 100`).
pub fn block_sizes(points: usize) -> (usize, usize) {
    (points.div_ceil(10), points.div_ceil(20))
}

/// Data-driven hyperparameters.
///
/// Monotone: `q1 = (min of first block, mean)`, `q2 = (mean, max of last block)`
/// where blocks are taken in `x` order; `M1 = q1.lo`, `M2 = q2.hi`.
/// Convex: peak range `(q01, q02)` with `q01` the mean of the smallest block of
/// responses, and endpoint bounds the maxima of the first/last small blocks.
/// Concave is the mirror image of convex.
pub fn empirical_hyperparams(d: &Dataset, shape: ShapeClass, rule: &HyperparamRule) -> Result<EmpiricalHyperparams> {
    if d.ys().iter().any(|g| g.len() != 1) {
        return Err(Error::Config("empirical hyperparameters expect one response per design point".into()));
    }
    let y = d.responses_by_x();
    let k = y.len();
    let (big, small) = block_sizes(k);
    match shape {
        ShapeClass::Monotone => {
            if k < 10 {
                return Err(Error::Degenerate(format!("need at least 10 points, got {k}")));
            }
            let mean = y.iter().sum::<f64>() / k as f64;
            let q11 = y[..big].iter().copied().fold(f64::INFINITY, f64::min);
            let q22 = y[k - big..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(q11 < mean) || !(mean < q22) {
                return Err(Error::Config(format!(
                    "degenerate endpoint ranges: q11 = {q11}, q12 = q21 = {mean}, q22 = {q22}"
                )));
            }
            let order = OrderDistribution::isotonic(rule.alpha, rule.n_max)?;
            let prior = MonotonePrior::new(order, Interval::new(q11, mean)?, Interval::new(mean, q22)?)?;
            Ok(EmpiricalHyperparams {
                spec: PriorSpec::Monotone(prior),
                bounds: (q11, q22),
            })
        }
        ShapeClass::UnimodalConvex | ShapeClass::UnimodalConcave => {
            if k < 10 {
                return Err(Error::Degenerate(format!("need at least 10 points, got {k}")));
            }
            let curvature = if shape == ShapeClass::UnimodalConvex {
                Curvature::Convex
            } else {
                Curvature::Concave
            };
            // concave: compute the convex quantities on -Y and mirror back
            let s = -curvature.sign();
            let yf: Vec<f64> = y.iter().map(|v| s * v).collect();
            let mean = yf.iter().sum::<f64>() / k as f64;
            let mut sorted = yf.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let q01 = sorted[..big].iter().sum::<f64>() / big as f64;
            let q02 = match rule.convex_upper {
                ConvexUpperRule::AbsoluteHalfSum => (q01 + mean).abs() / 2.0,
                ConvexUpperRule::Midpoint => (q01 + mean) / 2.0,
            };
            let b1 = yf[..small].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let b2 = yf[k - small..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(q01 < q02) {
                return Err(Error::Config(format!(
                    "degenerate peak range: q01 = {q01}, q02 = {q02}"
                )));
            }
            let mode = if s > 0.0 {
                Interval::new(q01, q02)?
            } else {
                Interval::new(-q02, -q01)?
            };
            let order = OrderDistribution::convex(rule.alpha, rule.n_max)?;
            let prior = UnimodalPrior::new(order, mode, s * b1, s * b2, curvature)?;
            let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(EmpiricalHyperparams {
                spec: PriorSpec::Unimodal(prior),
                bounds: (lo, hi),
            })
        }
        ShapeClass::Unimodal => Err(Error::Config(
            "no prior construction is available for the general unimodal class".into(),
        )),
    }
}
