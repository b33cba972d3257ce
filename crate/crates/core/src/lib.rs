//! Accelerated doubly stochastic gradient (ADSG) solvers for composite
//! empirical risk minimization, with proximal SVRG, MRBCD and Katyusha
//! baselines, smoothing/regularization reductions and a benchmark harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adsg;
pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod problem;
pub mod reductions;
pub mod rng;
pub mod schedule;
pub mod synth;
pub mod trace;

pub use data::{load_libsvm, make_partition, parse_libsvm, parse_libsvm_str, BlockPartition, Dataset};
pub use error::{Error, Result};
pub use problem::{ErmProblem, Loss, LossKind, ProblemConstants, Regularizer};
pub use rng::RngStreams;
pub use trace::{NoopObserver, Observer, TraceRecord};
