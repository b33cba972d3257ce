//! Per-epoch trace records, run observers and EPG/wall-time accounting.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ErmProblem;

/// One CSV row: `algo,epoch,epg,seconds,objective`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub algo: String,
    pub epoch: usize,
    /// Cumulative evaluated partial gradients.
    pub epg: u64,
    pub seconds: f64,
    pub objective: f64,
}

pub fn write_trace_csv<W: Write>(writer: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if records.is_empty() {
        w.write_record(["algo", "epoch", "epg", "seconds", "objective"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: std::io::Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Cheap per-iteration facts every solver reports.
#[derive(Debug, Clone, Copy)]
pub struct InnerStep {
    /// Global iteration counter `k = s m + j`, starting at 1.
    pub k: usize,
    pub epoch: usize,
    /// Block updated in this iteration (0 for full-vector methods).
    pub block: usize,
    /// Stored entries across the sampled rows.
    pub sampled_nnz: usize,
    /// Coordinates read or written by this iteration.
    pub touched: u64,
}

/// Dense view of the iterates after iteration `k`, materialized only on request.
#[derive(Debug, Clone, Copy)]
pub struct Iterate<'a> {
    pub k: usize,
    pub epoch: usize,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
}

/// Hooks called by the solvers. All methods have no-op defaults.
pub trait Observer {
    /// Return true to receive [`Observer::on_iterate`]; costs O(d) per
    /// iteration in the rescaled ADSG forms.
    fn wants_iterates(&self) -> bool {
        false
    }

    fn on_epoch_start(&mut self, _epoch: usize, _snapshot: &[f64]) {}

    fn on_inner(&mut self, _step: &InnerStep) {}

    fn on_iterate(&mut self, _it: &Iterate<'_>) {}

    /// Called after each epoch with the trace row and the epoch's output point.
    fn on_epoch(&mut self, _record: &TraceRecord, _x: &[f64]) {}
}

/// Observer that ignores everything.
pub struct NoopObserver;

impl Observer for NoopObserver {}

/// Records every materialized iterate, for equivalence tests.
#[derive(Debug, Default)]
pub struct IterateRecorder {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    pub zs: Vec<Vec<f64>>,
    pub snapshots: Vec<Vec<f64>>,
}

impl Observer for IterateRecorder {
    fn wants_iterates(&self) -> bool {
        true
    }

    fn on_epoch_start(&mut self, _epoch: usize, snapshot: &[f64]) {
        self.snapshots.push(snapshot.to_vec());
    }

    fn on_iterate(&mut self, it: &Iterate<'_>) {
        self.xs.push(it.x.to_vec());
        self.ys.push(it.y.to_vec());
        self.zs.push(it.z.to_vec());
    }
}

/// Wall clock that can be paused while the objective is measured.
#[derive(Debug)]
pub struct Stopwatch {
    elapsed: Duration,
    started: Option<Instant>,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            elapsed: Duration::ZERO,
            started: Some(Instant::now()),
        }
    }

    pub fn pause(&mut self) {
        if let Some(t) = self.started.take() {
            self.elapsed += t.elapsed();
        }
    }

    pub fn resume(&mut self) {
        if self.started.is_none() {
            self.started = Some(Instant::now());
        }
    }

    pub fn seconds(&self) -> f64 {
        let running = self.started.map_or(Duration::ZERO, |t| t.elapsed());
        (self.elapsed + running).as_secs_f64()
    }
}

/// Objective growth factor past which a run is declared divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// EPG for one epoch: a full pass (`n`) plus `2b` per inner iteration.
pub fn epoch_epg(n: usize, inner_iterations: usize, batch: usize) -> u64 {
    n as u64 + 2 * (batch as u64) * inner_iterations as u64
}

/// Shared bookkeeping for a solver run: EPG, timing, divergence guard and trace.
pub(crate) struct RunTracker<'o> {
    algo: String,
    epg: u64,
    initial: f64,
    watch: Stopwatch,
    trace: Vec<TraceRecord>,
    observer: &'o mut dyn Observer,
}

impl<'o> RunTracker<'o> {
    pub fn new(
        algo: impl Into<String>,
        problem: &ErmProblem<'_>,
        x0: &[f64],
        observer: &'o mut dyn Observer,
    ) -> Result<Self> {
        let initial = problem.objective(x0)?;
        if !initial.is_finite() {
            return Err(Error::Divergence {
                epoch: 0,
                objective: initial,
            });
        }
        Ok(Self {
            algo: algo.into(),
            epg: 0,
            initial,
            watch: Stopwatch::start(),
            trace: Vec::new(),
            observer,
        })
    }

    pub fn observer(&mut self) -> &mut dyn Observer {
        &mut *self.observer
    }

    pub fn add_epg(&mut self, count: u64) {
        self.epg += count;
    }

    pub fn epg(&self) -> u64 {
        self.epg
    }

    /// Evaluates the objective (outside the timed region), applies the guard
    /// and emits a record for the completed `epoch` (1-based).
    pub fn finish_epoch(&mut self, epoch: usize, problem: &ErmProblem<'_>, x: &[f64]) -> Result<()> {
        self.watch.pause();
        let objective = problem.objective(x)?;
        let limit = DIVERGENCE_FACTOR * self.initial.abs();
        if !objective.is_finite() || (self.initial != 0.0 && objective > limit) {
            return Err(Error::Divergence { epoch, objective });
        }
        let record = TraceRecord {
            algo: self.algo.clone(),
            epoch,
            epg: self.epg,
            seconds: self.watch.seconds(),
            objective,
        };
        self.observer.on_epoch(&record, x);
        self.trace.push(record);
        self.watch.resume();
        Ok(())
    }

    pub fn into_trace(self) -> Vec<TraceRecord> {
        self.trace
    }
}
