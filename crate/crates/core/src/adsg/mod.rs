//! Accelerated doubly stochastic gradient (ADSG).
//!
//! Each epoch computes the full gradient at a snapshot and then runs
//! `m = B n` inner iterations. An inner iteration samples a mini-batch and a
//! feature block, builds a variance-reduced block gradient at the coupled
//! point `y = a1 x + a2 z + a3 x~`, takes a proximal step on `[z]_l`, and sets
//! `x = y + a2 B (z_k - z_{k-1})`. The next snapshot is the iterate at a
//! `theta`-geometric random position within the epoch.
//!
//! Three interchangeable forms are provided:
//!
//! * [`Variant::Reference`]: the direct dense form, O(d) per iteration.
//! * [`Variant::Efficient`]: keeps `x` and `y` implicitly through a
//!   rescaled accumulator `u` with scale `beta_j = a1^(j+1)`, O(nnz + Omega)
//!   per iteration. Dividing by `beta_j` overflows on long epochs.
//! * [`Variant::Stable`]: stores the product `beta u` lazily through a
//!   per-block accumulator `xi` and staleness counters `omega`, giving
//!   O(nnz + Omega + B) per iteration without any division.
//!
//! Given the same [`RngStreams`] seed all three produce the same iterates up
//! to floating-point reassociation.

mod efficient;
mod reference;
mod stable;

use std::fmt;
use std::str::FromStr;

use crate::data::BlockPartition;
use crate::error::{Error, Result};
use crate::problem::ErmProblem;
use crate::rng::RngStreams;
use crate::schedule::{Schedule, ScheduleKind};
use crate::trace::{Observer, TraceRecord};

pub use efficient::run_efficient;
pub use reference::run_reference;
pub use stable::run_stable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Reference,
    Efficient,
    Stable,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Reference => "ref",
            Variant::Efficient => "efficient",
            Variant::Stable => "stable",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ref" | "reference" => Ok(Variant::Reference),
            "efficient" => Ok(Variant::Efficient),
            "stable" => Ok(Variant::Stable),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdsgConfig {
    pub blocks: usize,
    pub batch: usize,
    pub epochs: usize,
    /// `None` picks strongly convex when `mu > 0`.
    pub schedule: Option<ScheduleKind>,
    /// Starting point; zero when absent.
    pub x0: Option<Vec<f64>>,
}

impl Default for AdsgConfig {
    fn default() -> Self {
        Self {
            blocks: 1,
            batch: 1,
            epochs: 10,
            schedule: None,
            x0: None,
        }
    }
}

/// Work counters. `touched` counts coordinates read or written by inner
/// iterations; per-epoch reconstructions are tallied separately.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostSummary {
    pub iterations: u64,
    pub touched: u64,
    pub epoch_touched: u64,
    /// Largest `touched / (sampled nnz + Omega + B)` over all iterations.
    pub max_ratio: f64,
}

impl CostSummary {
    pub(crate) fn record(&mut self, touched: u64, bound: usize) {
        self.iterations += 1;
        self.touched += touched;
        let ratio = touched as f64 / bound.max(1) as f64;
        if ratio > self.max_ratio {
            self.max_ratio = ratio;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Final snapshot.
    pub x: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub epg: u64,
    pub cost: CostSummary,
}

/// Validated run parameters shared by the three forms.
pub(crate) struct Setup {
    pub partition: BlockPartition,
    pub schedule: Schedule,
    pub n: usize,
    pub dim: usize,
    pub m: usize,
    pub blocks: usize,
    pub batch: usize,
    pub x0: Vec<f64>,
}

impl Setup {
    pub fn new(problem: &ErmProblem<'_>, config: &AdsgConfig) -> Result<Self> {
        if !problem.loss().is_differentiable() {
            return Err(Error::invalid(format!(
                "{} loss must be smoothed before running ADSG",
                problem.loss().kind
            )));
        }
        if config.batch == 0 {
            return Err(Error::invalid("mini-batch size must be at least 1"));
        }
        let dim = problem.dim();
        let n = problem.n_samples();
        let partition = BlockPartition::new(dim, config.blocks)?;
        let constants = problem.constants(&partition)?;
        let schedule = match config.schedule {
            Some(kind) => Schedule::new(kind, constants, n, config.blocks)?,
            None => Schedule::auto(constants, n, config.blocks)?,
        };
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
            schedule,
            n,
            dim,
            m: config.blocks * n,
            blocks: config.blocks,
            batch: config.batch,
            x0,
        })
    }
}

pub fn run(
    problem: &ErmProblem<'_>,
    config: &AdsgConfig,
    variant: Variant,
    rng: RngStreams,
    observer: &mut dyn Observer,
) -> Result<SolveOutput> {
    match variant {
        Variant::Reference => run_reference(problem, config, rng, observer),
        Variant::Efficient => run_efficient(problem, config, rng, observer),
        Variant::Stable => run_stable(problem, config, rng, observer),
    }
}

pub(crate) fn algo_name(variant: Variant) -> String {
    format!("adsg-{}", variant.name())
}

/// Variance-reduced estimate of `[grad F(y)]_l`:
/// `[g~]_l + (1/b) sum_{i in batch} ([grad f_i(y)]_l - [grad f_i(x~)]_l)`.
pub fn stochastic_block_gradient(
    problem: &ErmProblem<'_>,
    y: &[f64],
    snapshot: &[f64],
    snapshot_grad: &[f64],
    batch: &[usize],
    partition: &BlockPartition,
    block: usize,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::invalid("empty mini-batch"));
    }
    let d = problem.dim();
    for v in [y, snapshot, snapshot_grad] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    if block >= partition.blocks() {
        return Err(Error::invalid(format!("block index {block} out of range")));
    }
    let range = partition.range(block);
    let mut out = snapshot_grad[range.clone()].to_vec();
    let data = problem.data();
    let inv_b = 1.0 / batch.len() as f64;
    for &i in batch {
        if i >= problem.n_samples() {
            return Err(Error::invalid(format!("sample index {i} out of range")));
        }
        let row = data.row(i);
        let coef = (problem.sample_derivative(i, row.dot(y))
            - problem.sample_derivative(i, row.dot(snapshot)))
            * inv_b;
        for (j, a) in row.restrict(range.clone()).iter() {
            out[j - range.start] += coef * a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
