//! Experiment plumbing behind the `bench` CLI: data sources, solver dispatch,
//! CSV emission and a bounded worker pool for batches of runs.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::str::FromStr;

use crate::adsg::{self, AdsgConfig, Variant};
use crate::baselines::{run_baseline, Baseline, BaselineConfig};
use crate::data::{load_libsvm, Dataset};
use crate::error::{Error, Result};
use crate::problem::{ErmProblem, Loss, LossKind, Regularizer};
use crate::reductions::{run_reduction, AdsgHood, Reduce, ReductionOptions};
use crate::rng::RngStreams;
use crate::synth::{gen_synthetic, SyntheticSpec};
use crate::trace::{write_trace_csv, NoopObserver, TraceRecord};

/// Environment variable capping the batch worker pool.
pub const THREADS_ENV: &str = "BENCH_THREADS";

/// Label noise of synthetic instances built by the harness.
pub const SYNTH_NOISE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    /// Dense synthetic design with target condition number `kappa`.
    Synthetic { n: usize, d: usize, kappa: f64 },
}

impl FromStr for DataSource {
    type Err = Error;

    /// Parses the `n,d,kappa` form of `--synth`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::Config(format!("expected `n,d,kappa`, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n = parts[0].parse().map_err(|_| bad())?;
        let d = parts[1].parse().map_err(|_| bad())?;
        let kappa = parts[2].parse().map_err(|_| bad())?;
        Ok(DataSource::Synthetic { n, d, kappa })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Adsg(Variant),
    Baseline(Baseline),
}

impl Algorithm {
    /// Combines an `--algo` name with an optional `--variant`.
    pub fn parse(name: &str, variant: Option<&str>) -> Result<Self> {
        let algo = if name == "adsg" {
            Algorithm::Adsg(Variant::Stable)
        } else {
            Algorithm::Baseline(name.parse()?)
        };
        match (algo, variant) {
            (_, None) => Ok(algo),
            (Algorithm::Adsg(_), Some(v)) => Ok(Algorithm::Adsg(v.parse()?)),
            (Algorithm::Baseline(b), Some(_)) => Err(Error::Config(format!("--variant only applies to adsg, not {b}"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Adsg(v) => write!(f, "adsg-{v}"),
            Algorithm::Baseline(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::parse(s, None)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub loss: LossKind,
    /// Smoothing parameter of a non-smooth loss.
    pub smooth: Option<f64>,
    pub l1: f64,
    /// Chosen by the generator for synthetic data; defaults to zero for files.
    pub l2: Option<f64>,
    pub mu: Option<f64>,
    pub algo: Algorithm,
    pub blocks: usize,
    pub batch: usize,
    pub epochs: usize,
    pub step_mult: f64,
    pub reduce: Reduce,
    pub epsilon: f64,
    /// Overrides the pilot estimates that seed the reductions.
    pub mu0: Option<f64>,
    pub lambda0: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(source: DataSource, loss: LossKind, algo: Algorithm, seed: u64) -> Self {
        Self {
            source,
            loss,
            smooth: None,
            l1: 0.0,
            l2: None,
            mu: None,
            algo,
            blocks: 1,
            batch: 1,
            epochs: 10,
            step_mult: 1.0,
            reduce: Reduce::None,
            epsilon: 1e-4,
            mu0: None,
            lambda0: None,
            seed,
            out: None,
        }
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.blocks == 0 || self.batch == 0 || self.epochs == 0 {
            return cfg("blocks, batch and epochs must be positive".into());
        }
        if let DataSource::Synthetic { n, d, kappa } = self.source {
            if n == 0 || d == 0 {
                return cfg("synthetic n and d must be positive".into());
            }
            if !(kappa >= 1.0) || !kappa.is_finite() {
                return cfg(format!("synthetic kappa must be >= 1, got {kappa}"));
            }
            if self.l2.is_some() {
                return cfg("--l2 is fixed by the synthetic generator; drop it or use --mu".into());
            }
        }
        for (name, v) in [("l1", Some(self.l1)), ("l2", self.l2), ("smooth", self.smooth), ("mu", self.mu)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return cfg(format!("--{name} must be finite and non-negative, got {v}"));
                }
            }
        }
        if !(self.step_mult > 0.0) || !self.step_mult.is_finite() {
            return cfg(format!("--step-mult must be positive, got {}", self.step_mult));
        }
        if self.reduce != Reduce::None {
            if !matches!(self.algo, Algorithm::Adsg(_)) {
                return cfg(format!("--reduce wraps adsg only, not {}", self.algo));
            }
            if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
                return cfg(format!("--epsilon must be positive, got {}", self.epsilon));
            }
            for (name, v) in [("mu0", self.mu0), ("lambda0", self.lambda0)] {
                if v.is_some_and(|v| !(v > 0.0) || !v.is_finite()) {
                    return cfg(format!("--{name} must be positive"));
                }
            }
        }
        Ok(())
    }

    fn loss_spec(&self) -> Loss {
        match self.smooth {
            Some(s) if !self.loss.is_smooth() => Loss::smoothed(self.loss, s),
            _ => Loss::new(self.loss),
        }
    }

    /// Loads or generates the dataset and resolves the l2 weight.
    pub fn materialize(&self) -> Result<(Dataset, f64)> {
        match &self.source {
            DataSource::File(path) => {
                let data = load_libsvm(path).map_err(|e| match e {
                    Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
                    other => other,
                })?;
                Ok((data, self.l2.unwrap_or(0.0)))
            }
            &DataSource::Synthetic { n, d, kappa } => {
                let inst = gen_synthetic(&SyntheticSpec {
                    n,
                    d,
                    loss: self.loss_spec(),
                    kappa,
                    noise: SYNTH_NOISE,
                    seed: self.seed,
                    blocks: self.blocks,
                    l1: self.l1,
                    reference_iterations: 0,
                })?;
                Ok((inst.data, inst.l2))
            }
        }
    }
}

/// Runs one experiment and returns its trace without writing anything.
pub fn run_trace(config: &ExperimentConfig) -> Result<Vec<TraceRecord>> {
    config.validate()?;
    if config.batch > 1 {
        log::warn!("batch size {} is outside the analyzed b = 1 regime", config.batch);
    }
    let (data, l2) = config.materialize()?;
    let mut problem = ErmProblem::new(&data, config.loss_spec(), Regularizer::new(config.l1, l2))?;
    if let Some(mu) = config.mu {
        problem = problem.with_mu(mu)?;
    }
    let rng = RngStreams::new(config.seed);

    if config.reduce != Reduce::None {
        let Algorithm::Adsg(variant) = config.algo else {
            unreachable!("validated above")
        };
        let mut hood = AdsgHood::new(config.blocks, config.seed);
        hood.batch = config.batch;
        hood.variant = variant;
        let mut options = ReductionOptions::new(config.epsilon);
        options.seed = config.seed;
        options.mu0 = config.mu0;
        options.lambda0 = config.lambda0;
        let x0 = vec![0.0; problem.dim()];
        return Ok(run_reduction(config.reduce, &mut hood, &problem, &x0, &options)?.trace);
    }

    let out = match config.algo {
        Algorithm::Adsg(variant) => {
            let cfg = AdsgConfig {
                blocks: config.blocks,
                batch: config.batch,
                epochs: config.epochs,
                schedule: None,
                x0: None,
            };
            adsg::run(&problem, &cfg, variant, rng, &mut NoopObserver)?
        }
        Algorithm::Baseline(kind) => {
            let cfg = BaselineConfig {
                blocks: config.blocks,
                batch: config.batch,
                epochs: config.epochs,
                step_mult: config.step_mult,
                ..BaselineConfig::default()
            };
            run_baseline(&problem, &cfg, kind, rng, &mut NoopObserver)?
        }
    };
    Ok(out.trace)
}

/// Runs one experiment and writes its trace to `config.out` when set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TraceRecord>> {
    let trace = run_trace(config)?;
    if let Some(path) = &config.out {
        let file = File::create(path)?;
        write_trace_csv(BufWriter::new(file), &trace)?;
    }
    Ok(trace)
}

/// Pool size: `BENCH_THREADS` if it parses to a positive number, else the
/// available parallelism.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs independent experiments on a worker pool, one single-threaded run per
/// task. Results keep the input order.
pub fn run_batch(configs: &[ExperimentConfig]) -> Result<Vec<Result<Vec<TraceRecord>>>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| configs.par_iter().map(run_experiment).collect()))
}

/// CLI exit status for a finished run: 0 ok, 1 runtime failure, 2 config error.
pub fn exit_code<T>(result: &Result<T>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_config_error() => 2,
        Err(_) => 1,
    }
}
