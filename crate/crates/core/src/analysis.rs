//! Posterior summaries and chain diagnostics.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bernstein::{eval_unit, BernsteinPoly};
use crate::error::{Error, Result};
use crate::model::TestFunction;
use crate::samplers::ChainTrace;

/// Lags with autocorrelation below this end the ESS sum.
pub const ESS_ACF_CUTOFF: f64 = 0.05;

/// `size` equally spaced points from 0 to `tau`.
pub fn uniform_grid(tau: f64, size: usize) -> Result<Vec<f64>> {
    if size < 2 || !(tau > 0.0) {
        return Err(Error::Config(format!("grid needs at least 2 points and tau > 0 (got {size}, {tau})")));
    }
    let h = tau / (size - 1) as f64;
    let mut g: Vec<f64> = (0..size).map(|i| i as f64 * h).collect();
    g[size - 1] = tau;
    Ok(g)
}

/// Posterior mean curve on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Running sums of coefficient vectors, one per order.
fn order_sums(trace: &ChainTrace) -> BTreeMap<usize, Vec<f64>> {
    let mut sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for s in trace.states() {
        let e = sums.entry(s.len() - 1).or_insert_with(|| vec![0.0; s.len()]);
        e.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }
    sums
}

/// Average of the retained curves, evaluated on `grid`.
///
/// The average is linear in the coefficients, so states are first averaged
/// within each order and each order's mean polynomial is evaluated once.
pub fn posterior_mean_curve(trace: &ChainTrace, grid: &[f64]) -> Result<CurveEstimate> {
    if trace.is_empty() {
        return Err(Error::Degenerate("posterior mean of an empty trace".into()));
    }
    let tau = trace.tau();
    if let Some(&t) = grid.iter().find(|&&t| !(0.0..=tau).contains(&t)) {
        return Err(Error::Domain(format!("grid point {t} outside [0, {tau}]")));
    }
    let total = trace.len() as f64;
    let mut values = vec![0.0; grid.len()];
    for sum in order_sums(trace).into_values() {
        // sum / total is the order's mean weighted by its frequency
        let coeffs: Vec<f64> = sum.iter().map(|v| v / total).collect();
        for (v, &t) in values.iter_mut().zip(grid) {
            *v += eval_unit(&coeffs, t / tau);
        }
    }
    Ok(CurveEstimate {
        grid: grid.to_vec(),
        values,
    })
}

/// Posterior mean at arbitrary points, e.g. the design points.
pub fn posterior_mean_at(trace: &ChainTrace, points: &[f64]) -> Result<Vec<f64>> {
    posterior_mean_curve(trace, points).map(|c| c.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub l1: f64,
    pub sup: f64,
    pub mse: f64,
}

/// Norms of `est - f` on `[0, 1]`: trapezoid L1, grid maximum, grid-mean square.
pub fn error_metrics(est: &CurveEstimate, f: TestFunction) -> Result<ErrorMetrics> {
    error_metrics_against(est, |t| f.eval_unchecked(t))
}

/// As [`error_metrics`] for an arbitrary reference function.
pub fn error_metrics_against<F: Fn(f64) -> f64>(est: &CurveEstimate, truth: F) -> Result<ErrorMetrics> {
    let g = &est.grid;
    let spans = g.len() >= 2 && g[0].abs() < 1e-12 && (g[g.len() - 1] - 1.0).abs() < 1e-12;
    if !spans || est.values.len() != g.len() || g.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("error norms need an increasing grid from 0 to 1".into()));
    }
    let diffs: Vec<f64> = g.iter().zip(&est.values).map(|(&t, v)| (v - truth(t)).abs()).collect();
    let l1 = g
        .windows(2)
        .zip(diffs.windows(2))
        .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
        .sum();
    let sup = diffs.iter().copied().fold(0.0, f64::max);
    let mse = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
    Ok(ErrorMetrics { l1, sup, mse })
}

/// Mean squared error of the posterior mean at the given points (e.g. the
/// design points) instead of the evaluation grid.
pub fn pointwise_mse(trace: &ChainTrace, points: &[f64], f: TestFunction) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Degenerate("no points for the mean squared error".into()));
    }
    let fit = posterior_mean_at(trace, points)?;
    let mut sq = 0.0;
    for (&t, v) in points.iter().zip(&fit) {
        sq += (v - f.eval(t)?).powi(2);
    }
    Ok(sq / points.len() as f64)
}

/// Frequency of each order among the retained states; empty for an empty trace.
pub fn order_posterior(trace: &ChainTrace) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for n in trace.orders() {
        *counts.entry(n).or_default() += 1;
    }
    let total = trace.len() as f64;
    counts.into_iter().map(|(n, c)| (n, c as f64 / total)).collect()
}

fn centred(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    if series.len() < 2 {
        return Err(Error::Degenerate("autocorrelation needs at least 2 values".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let c: Vec<f64> = series.iter().map(|s| s - mean).collect();
    let ss: f64 = c.iter().map(|v| v * v).sum();
    if !(ss > 0.0) || !ss.is_finite() {
        return Err(Error::Degenerate("autocorrelation undefined for a constant series".into()));
    }
    Ok((c, ss))
}

/// Sample autocorrelations `rho_1..rho_L` with the biased normalisation.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag {
        return Err(Error::Degenerate(format!(
            "series of length {} too short for lag {max_lag}",
            series.len()
        )));
    }
    let (c, ss) = centred(series)?;
    Ok((1..=max_lag)
        .map(|k| c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / ss)
        .collect())
}

/// All autocorrelations `rho_0..rho_{m-1}` through a zero-padded FFT.
fn acf_fft(series: &[f64]) -> Result<Vec<f64>> {
    let (c, ss) = centred(series)?;
    let m = c.len();
    let size = (2 * m).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = c.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut().for_each(|z| *z = Complex::new(z.norm_sqr(), 0.0));
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = size as f64 * ss;
    Ok(buf[..m].iter().map(|z| z.re / scale).collect())
}

/// `m / (1 + 2 sum_{k=1}^{k*} rho_k)`, clipped to `(0, m]`.
///
/// The sum stops before the first lag with `rho_k < 0.05`, or before the first
/// pair `rho_{2j} + rho_{2j+1} <= 0`, whichever comes first.
pub fn effective_sample_size(series: &[f64]) -> Result<f64> {
    let rho = acf_fft(series)?;
    let m = series.len();
    let mut last = 0;
    while last + 1 < m && rho[last + 1] >= ESS_ACF_CUTOFF {
        last += 1;
    }
    let mut j = 1;
    while 2 * j + 1 < m {
        if rho[2 * j] + rho[2 * j + 1] <= 0.0 {
            last = last.min(2 * j - 1);
            break;
        }
        j += 1;
    }
    let tau_int = 1.0 + 2.0 * rho[1..=last].iter().sum::<f64>();
    let ess = m as f64 / tau_int;
    Ok(ess.clamp(f64::MIN_POSITIVE, m as f64))
}

/// Scalar summary of each retained curve used for autocorrelation plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// `int |F_b|`
    #[default]
    AbsIntegral,
    /// `int |F_b - F|`, approximated on a 1001-point grid
    AbsError,
}

/// The monitored series over the retained states. `truth` is required for
/// [`SeriesKind::AbsError`].
pub fn monitored_series(trace: &ChainTrace, kind: SeriesKind, truth: Option<TestFunction>) -> Result<Vec<f64>> {
    let tau = trace.tau();
    let reference = match kind {
        SeriesKind::AbsIntegral => None,
        SeriesKind::AbsError => {
            let f = truth.ok_or_else(|| Error::Config("absolute-error series needs a test function".into()))?;
            let grid = uniform_grid(tau, 1001)?;
            let values: Vec<f64> = grid.iter().map(|&t| f.eval(t)).collect::<Result<_>>()?;
            Some((grid, values))
        }
    };
    let mut out = Vec::with_capacity(trace.len());
    let mut prev: Option<(&[f64], f64)> = None;
    for s in trace.states() {
        // consecutive states repeat after every rejection
        if let Some((p, v)) = prev {
            if p == s {
                out.push(v);
                continue;
            }
        }
        let v = match &reference {
            None => BernsteinPoly::new(s.to_vec(), tau)?.abs_integral(),
            Some((grid, values)) => {
                let d: Vec<f64> = grid
                    .iter()
                    .zip(values)
                    .map(|(&t, f)| (eval_unit(s, t / tau) - f).abs())
                    .collect();
                let h = grid[1] - grid[0];
                h * (d.iter().sum::<f64>() - 0.5 * (d[0] + d[d.len() - 1]))
            }
        };
        out.push(v);
        prev = Some((s, v));
    }
    Ok(out)
}

/// Per-chain diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `rho_1..rho_L` of the monitored series.
    pub acf: Vec<f64>,
    pub ess: f64,
    pub acceptance_rate: f64,
    pub order_pmf_hat: BTreeMap<usize, f64>,
}

pub fn diagnostics(
    trace: &ChainTrace,
    kind: SeriesKind,
    truth: Option<TestFunction>,
    max_lag: usize,
) -> Result<Diagnostics> {
    let series = monitored_series(trace, kind, truth)?;
    let max_lag = max_lag.min(series.len().saturating_sub(1));
    Ok(Diagnostics {
        acf: autocorrelation(&series, max_lag)?,
        ess: effective_sample_size(&series)?,
        acceptance_rate: trace.acceptance_rate(),
        order_pmf_hat: order_posterior(trace),
    })
}
