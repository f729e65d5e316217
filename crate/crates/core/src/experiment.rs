//! Replicated simulation studies.
//!
//! Each replicate draws a dataset from its own random stream, fits the
//! data-driven prior, runs a chain and scores the posterior mean. Replicates
//! are independent, so they run in parallel and the report does not depend on
//! the number of threads.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    diagnostics, error_metrics, posterior_mean_curve, uniform_grid, Diagnostics, ErrorMetrics, SeriesKind,
};
use crate::bernstein::ShapeClass;
use crate::error::{Error, Result};
use crate::model::{empirical_hyperparams, estimate_sigma_sq, generate_dataset, Dataset, HyperparamRule, NoiseModel, TestFunction};
use crate::rng::stream_rng;
use crate::samplers::{run_chain, BalanceMode, SamplerConfig, SamplerKind};

/// Named run sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 200 replicates of 100000 updates with 10000 burn-in.
    Paper,
    /// 50 replicates of 20000 updates with 2000 burn-in.
    Quick,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "quick" => Ok(Preset::Quick),
            _ => Err(Error::Config(format!("unknown preset {s:?} (expected paper or quick)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub function: TestFunction,
    pub sigma: f64,
    /// Design points per replicate.
    pub points: usize,
    pub replicates: usize,
    /// Chain settings. `bounds` and `seed` are replaced per replicate by the
    /// data-driven bounds and a seed from the replicate's stream.
    pub sampler: SamplerConfig,
    pub shape: ShapeClass,
    #[serde(default)]
    pub hyper: HyperparamRule,
    pub grid_size: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the thread pool decide.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub series: SeriesKind,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

fn default_max_lag() -> usize {
    50
}

impl ExperimentConfig {
    pub fn preset(preset: Preset, function: TestFunction, sigma: f64, shape: ShapeClass) -> Self {
        let (replicates, updates, burn_in) = match preset {
            Preset::Paper => (200, 100_000, 10_000),
            Preset::Quick => (50, 20_000, 2_000),
        };
        Self {
            function,
            sigma,
            points: 100,
            replicates,
            sampler: SamplerConfig {
                kind: SamplerKind::Mhra,
                c: 0.35,
                bounds: (0.0, 1.0),
                updates,
                burn_in,
                thinning: 1,
                seed: 0,
                balance: BalanceMode::Paper,
            },
            shape,
            hyper: HyperparamRule::default(),
            grid_size: 1001,
            master_seed: 0,
            output_dir: None,
            parallelism: 0,
            series: SeriesKind::AbsIntegral,
            max_lag: default_max_lag(),
        }
    }

    pub fn paper(function: TestFunction, sigma: f64, shape: ShapeClass) -> Self {
        Self::preset(Preset::Paper, function, sigma, shape)
    }

    pub fn quick(function: TestFunction, sigma: f64, shape: ShapeClass) -> Self {
        Self::preset(Preset::Quick, function, sigma, shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("at least one replicate is required".into()));
        }
        if self.grid_size < 11 {
            return Err(Error::Config(format!("grid size {} below the minimum of 11", self.grid_size)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("noise level {} must be positive", self.sigma)));
        }
        if self.shape == ShapeClass::Unimodal {
            return Err(Error::Config("experiments support monotone, concave and convex shapes".into()));
        }
        self.sampler.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub index: usize,
    pub metrics: ErrorMetrics,
    pub diagnostics: Diagnostics,
    pub sigma_sq_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub per_replicate: Vec<ReplicateResult>,
    /// Means of the per-replicate metrics.
    pub aggregate: ErrorMetrics,
    /// Per-order mean of the replicate order frequencies.
    pub order_pmf_mean: BTreeMap<usize, f64>,
    pub mean_acceptance: f64,
    pub mean_ess: f64,
}

/// Dataset of replicate `index`; the first draws of the replicate's stream.
pub fn replicate_dataset(cfg: &ExperimentConfig, index: usize) -> Result<Dataset> {
    let mut rng = stream_rng(cfg.master_seed, index as u64);
    generate_dataset(cfg.function, cfg.points, NoiseModel::new(cfg.sigma)?, &mut rng)
}

pub fn run_replicate(cfg: &ExperimentConfig, index: usize) -> Result<ReplicateResult> {
    let mut rng = stream_rng(cfg.master_seed, index as u64);
    let data = generate_dataset(cfg.function, cfg.points, NoiseModel::new(cfg.sigma)?, &mut rng)?;
    let hyper = empirical_hyperparams(&data, cfg.shape, &cfg.hyper)?;
    let sigma_sq_hat = estimate_sigma_sq(&data)?;
    let sampler = SamplerConfig {
        bounds: hyper.bounds,
        seed: rng.random(),
        ..cfg.sampler.clone()
    };
    let trace = run_chain(&data, &hyper.spec, &sampler, sigma_sq_hat)?;
    let grid = uniform_grid(1.0, cfg.grid_size)?;
    let curve = posterior_mean_curve(&trace, &grid)?;
    Ok(ReplicateResult {
        index,
        metrics: error_metrics(&curve, cfg.function)?,
        diagnostics: diagnostics(&trace, cfg.series, Some(cfg.function), cfg.max_lag)?,
        sigma_sq_hat,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<ReplicateResult>> =
        pool.install(|| (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, r)).collect());
    let mut per_replicate = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        per_replicate.push(r.map_err(|e| Error::Replicate {
            index,
            source: Box::new(e),
        })?);
    }
    // scheduling and output location do not affect results; keep them out
    // of the report so that it is identical however it was produced
    let config = ExperimentConfig {
        parallelism: 0,
        output_dir: None,
        ..cfg.clone()
    };
    Ok(aggregate(config, per_replicate))
}

fn aggregate(config: ExperimentConfig, per_replicate: Vec<ReplicateResult>) -> ExperimentReport {
    let r = per_replicate.len() as f64;
    let mean = |f: &dyn Fn(&ReplicateResult) -> f64| per_replicate.iter().map(f).sum::<f64>() / r;
    let aggregate = ErrorMetrics {
        l1: mean(&|x| x.metrics.l1),
        sup: mean(&|x| x.metrics.sup),
        mse: mean(&|x| x.metrics.mse),
    };
    let mean_acceptance = mean(&|x| x.diagnostics.acceptance_rate);
    let mean_ess = mean(&|x| x.diagnostics.ess);
    let mut order_pmf_mean: BTreeMap<usize, f64> = BTreeMap::new();
    for x in &per_replicate {
        for (&n, &p) in &x.diagnostics.order_pmf_hat {
            *order_pmf_mean.entry(n).or_default() += p;
        }
    }
    order_pmf_mean.values_mut().for_each(|p| *p /= r);
    ExperimentReport {
        config,
        per_replicate,
        aggregate,
        order_pmf_mean,
        mean_acceptance,
        mean_ess,
    }
}

impl ExperimentReport {
    /// True when the stored aggregates are the means of the replicate values.
    pub fn aggregates_consistent(&self) -> bool {
        if self.per_replicate.is_empty() {
            return false;
        }
        let fresh = aggregate(self.config.clone(), self.per_replicate.clone());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        close(fresh.aggregate.l1, self.aggregate.l1)
            && close(fresh.aggregate.sup, self.aggregate.sup)
            && close(fresh.aggregate.mse, self.aggregate.mse)
            && close(fresh.mean_acceptance, self.mean_acceptance)
            && close(fresh.mean_ess, self.mean_ess)
            && fresh.order_pmf_mean.len() == self.order_pmf_mean.len()
            && fresh
                .order_pmf_mean
                .iter()
                .zip(&self.order_pmf_mean)
                .all(|((n, p), (m, q))| n == m && close(*p, *q))
    }
}

#[derive(Serialize)]
struct Table {
    function: TestFunction,
    sigma: f64,
    shape: ShapeClass,
    sampler: SamplerKind,
    replicates: usize,
    updates: usize,
    burn_in: usize,
    l1: f64,
    sup: f64,
    mse: f64,
    mean_acceptance: f64,
    mean_ess: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for row in rows {
        writeln!(w, "{row}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes `table.json`, `order_posterior.csv`, `acf_replicate0.csv`,
/// `per_replicate.csv`, `report.json` and `dataset_replicate0.csv` into `dir`.
pub fn emit_report(rep: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = &rep.config;
    write_json(
        &dir.join("table.json"),
        &Table {
            function: cfg.function,
            sigma: cfg.sigma,
            shape: cfg.shape,
            sampler: cfg.sampler.kind,
            replicates: rep.per_replicate.len(),
            updates: cfg.sampler.updates,
            burn_in: cfg.sampler.burn_in,
            l1: rep.aggregate.l1,
            sup: rep.aggregate.sup,
            mse: rep.aggregate.mse,
            mean_acceptance: rep.mean_acceptance,
            mean_ess: rep.mean_ess,
        },
    )?;
    write_lines(
        &dir.join("order_posterior.csv"),
        "n,probability",
        rep.order_pmf_mean.iter().map(|(n, p)| format!("{n},{p}")),
    )?;
    if let Some(first) = rep.per_replicate.first() {
        write_lines(
            &dir.join("acf_replicate0.csv"),
            "lag,rho",
            first.diagnostics.acf.iter().enumerate().map(|(k, r)| format!("{},{r}", k + 1)),
        )?;
    }
    write_lines(
        &dir.join("per_replicate.csv"),
        "replicate,l1,sup,mse,acceptance_rate,ess,sigma_sq_hat",
        rep.per_replicate.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.index,
                r.metrics.l1,
                r.metrics.sup,
                r.metrics.mse,
                r.diagnostics.acceptance_rate,
                r.diagnostics.ess,
                r.sigma_sq_hat
            )
        }),
    )?;
    write_json(&dir.join("report.json"), rep)?;
    replicate_dataset(cfg, 0)?.save_csv(&dir.join("dataset_replicate0.csv"))
}

/// Reads `report.json` from `dir` and checks that its aggregates are consistent.
pub fn load_report(dir: &Path) -> Result<ExperimentReport> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let rep: ExperimentReport = serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
    if !rep.aggregates_consistent() {
        return Err(Error::format(&path, "aggregates disagree with the replicate values"));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::quick(TestFunction::F1, 1.0, ShapeClass::Monotone);
        cfg.replicates = 3;
        cfg.sampler.updates = 600;
        cfg.sampler.burn_in = 100;
        cfg.grid_size = 101;
        cfg.master_seed = seed;
        cfg
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mut a = tiny(5);
        a.parallelism = 1;
        let mut b = tiny(5);
        b.parallelism = 3;
        let ra = run_experiment(&a).unwrap();
        let rb = run_experiment(&b).unwrap();
        assert_eq!(ra.per_replicate, rb.per_replicate);
        assert!(ra.aggregates_consistent());
    }

    #[test]
    fn emit_then_load() {
        let rep = run_experiment(&tiny(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&rep, dir.path()).unwrap();
        assert_eq!(load_report(dir.path()).unwrap(), rep);
        let csv = fs::read_to_string(dir.path().join("order_posterior.csv")).unwrap();
        let total: f64 = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = tiny(1);
        cfg.grid_size = 5;
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
        let mut cfg = tiny(1);
        cfg.replicates = 0;
        assert!(run_experiment(&cfg).is_err());
    }
}
