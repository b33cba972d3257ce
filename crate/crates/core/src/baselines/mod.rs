//! Comparison solvers sharing the ADSG trace, EPG and divergence contracts.
//!
//! * [`run_svrg`]: proximal SVRG with full-vector inner steps.
//! * [`run_mrbcd`]: mini-batch randomized block coordinate descent with
//!   variance reduction (doubly stochastic, no acceleration).
//! * [`run_katyusha`]: Katyusha with negative momentum `tau2 = 1/2`.
//!
//! SVRG and MRBCD restart each epoch from the last inner iterate.

mod katyusha;
mod mrbcd;
mod svrg;

use std::fmt;
use std::str::FromStr;

use crate::adsg::SolveOutput;
use crate::data::BlockPartition;
use crate::error::{Error, Result};
use crate::problem::ErmProblem;
use crate::rng::RngStreams;
use crate::schedule::ScheduleKind;
use crate::trace::Observer;

pub use katyusha::run_katyusha;
pub use mrbcd::run_mrbcd;
pub use svrg::run_svrg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Svrg,
    Mrbcd,
    Katyusha,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Svrg => "svrg",
            Baseline::Mrbcd => "mrbcd",
            Baseline::Katyusha => "katyusha",
        }
    }

    /// Default inner iterations per epoch: `2n`, or `Bn` for MRBCD.
    pub fn default_inner(self, n: usize, blocks: usize) -> usize {
        match self {
            Baseline::Mrbcd => blocks * n,
            Baseline::Svrg | Baseline::Katyusha => 2 * n,
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svrg" => Ok(Baseline::Svrg),
            "mrbcd" => Ok(Baseline::Mrbcd),
            "katyusha" => Ok(Baseline::Katyusha),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    /// Only MRBCD uses blocks.
    pub blocks: usize,
    pub batch: usize,
    pub epochs: usize,
    /// Inner iterations per epoch; the algorithm's default when `None`.
    pub inner: Option<usize>,
    /// Multiplies the default step size `1/L`.
    pub step_mult: f64,
    /// Katyusha variant; strongly convex when `mu > 0` if unset.
    pub schedule: Option<ScheduleKind>,
    pub x0: Option<Vec<f64>>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            blocks: 1,
            batch: 1,
            epochs: 10,
            inner: None,
            step_mult: 1.0,
            schedule: None,
            x0: None,
        }
    }
}

pub(crate) struct Common {
    pub partition: BlockPartition,
    pub n: usize,
    pub dim: usize,
    pub inner: usize,
    pub batch: usize,
    /// Smoothness of each `f_i`.
    pub l: f64,
    pub mu: f64,
    pub x0: Vec<f64>,
}

impl Common {
    pub fn new(problem: &ErmProblem<'_>, config: &BaselineConfig, kind: Baseline) -> Result<Self> {
        if !problem.loss().is_differentiable() {
            return Err(Error::invalid(format!(
                "{} loss must be smoothed before running {kind}",
                problem.loss().kind
            )));
        }
        if config.batch == 0 {
            return Err(Error::invalid("mini-batch size must be at least 1"));
        }
        if !(config.step_mult > 0.0) || !config.step_mult.is_finite() {
            return Err(Error::invalid(format!("step multiplier must be positive, got {}", config.step_mult)));
        }
        let dim = problem.dim();
        let n = problem.n_samples();
        let blocks = if kind == Baseline::Mrbcd { config.blocks } else { 1 };
        let partition = BlockPartition::new(dim, blocks)?;
        let constants = problem.constants(&partition)?;
        constants.ensure_steppable()?;
        let x0 = match &config.x0 {
            Some(x) if x.len() != dim => {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                })
            }
            Some(x) => x.clone(),
            None => vec![0.0; dim],
        };
        Ok(Self {
            partition,
            n,
            dim,
            inner: config.inner.unwrap_or_else(|| kind.default_inner(n, blocks)),
            batch: config.batch,
            l: constants.l,
            mu: constants.mu,
            x0,
        })
    }
}

/// Fills `coefs[t] = (phi_i'(a_i^T x) - phi_i'(a_i^T x~)) / b` for the sampled
/// batch and returns the total stored entries of the sampled rows.
pub(crate) fn correction_coefficients(
    problem: &ErmProblem<'_>,
    x: &[f64],
    snap_margins: &[f64],
    sampled: &[usize],
    coefs: &mut [f64],
) -> usize {
    let data = problem.data();
    let b = sampled.len() as f64;
    let mut nnz = 0;
    for (c, &i) in coefs.iter_mut().zip(sampled) {
        let row = data.row(i);
        nnz += row.nnz();
        *c = (problem.sample_derivative(i, row.dot(x)) - problem.sample_derivative(i, snap_margins[i])) / b;
    }
    nnz
}

pub fn run_baseline(
    problem: &ErmProblem<'_>,
    config: &BaselineConfig,
    kind: Baseline,
    rng: RngStreams,
    observer: &mut dyn Observer,
) -> Result<SolveOutput> {
    match kind {
        Baseline::Svrg => run_svrg(problem, config, rng, observer),
        Baseline::Mrbcd => run_mrbcd(problem, config, rng, observer),
        Baseline::Katyusha => run_katyusha(problem, config, rng, observer),
    }
}
