//! Black-box reductions that extend a strongly convex, smooth solver to
//! general convex regularizers and non-smooth losses.
//!
//! A [`Hood`] solver promises to quarter the suboptimality of its start
//! point. [`adapt_reg`] adds `(mu_t / 2) ||x - x0||^2` and halves `mu_t` each
//! round; [`adapt_smooth`] replaces a Lipschitz loss by its `lambda_t`-smoothed
//! version and halves `lambda_t`; [`joint_adapt`] halves both. Each round
//! warm-starts from the previous round's output.

use std::fmt;
use std::str::FromStr;

use crate::adsg::{run, AdsgConfig, SolveOutput, Variant};
use crate::baselines::{run_svrg, BaselineConfig};
use crate::data::BlockPartition;
use crate::error::{Error, Result};
use crate::problem::{smooth_gap_bound, ErmProblem, Loss};
use crate::rng::RngStreams;
use crate::schedule::ScheduleKind;
use crate::trace::{Observer, TraceRecord};

/// Epoch constant `c` in `S = ceil(c (1 + sqrt(kappa / n)))`. Calibrated with
/// the `calibrate_hood` example: the smallest multiple of 0.25 for which 20
/// random ridge starts all reach a gap ratio of 1/8, i.e. quartering with 2x margin.
pub const HOOD_EPOCH_CONSTANT: f64 = 1.25;

/// Lipschitz constant of the absolute-deviation and hinge losses.
const LOSS_LIPSCHITZ: f64 = 1.0;

/// Smoothing used by the pilot run when the loss is not differentiable.
pub const PILOT_SMOOTHING: f64 = 1.0;

/// Epochs of the SVRG pilot run that seeds `T`, `mu0` and `lambda0`.
pub const PILOT_EPOCHS: usize = 5;

/// `ceil(c (1 + sqrt(kappa / n)))`, at least 1.
pub fn hood_epochs(kappa: f64, n: usize, c: f64) -> usize {
    ((c * (1.0 + (kappa / n as f64).sqrt())).ceil() as usize).max(1)
}

/// Solver contract: `F(x') - F* <= (F(x0) - F*) / 4`.
pub trait Hood {
    fn name(&self) -> String;

    fn solve(&mut self, problem: &ErmProblem<'_>, x0: &[f64], observer: &mut dyn Observer) -> Result<SolveOutput>;
}

/// ADSG with the strongly convex schedule run for [`hood_epochs`] epochs.
#[derive(Debug, Clone)]
pub struct AdsgHood {
    pub blocks: usize,
    pub batch: usize,
    pub variant: Variant,
    pub epoch_constant: f64,
    seed: u64,
    calls: u64,
}

impl AdsgHood {
    pub fn new(blocks: usize, seed: u64) -> Self {
        Self {
            blocks,
            batch: 1,
            variant: Variant::Stable,
            epoch_constant: HOOD_EPOCH_CONSTANT,
            seed,
            calls: 0,
        }
    }

    pub fn epochs_for(&self, problem: &ErmProblem<'_>) -> Result<usize> {
        let partition = BlockPartition::new(problem.dim(), self.blocks)?;
        let kappa = problem.constants(&partition)?.kappa();
        if !kappa.is_finite() {
            return Err(Error::invalid("HOOD wrapper needs a strongly convex problem (mu > 0)"));
        }
        Ok(hood_epochs(kappa, problem.n_samples(), self.epoch_constant))
    }
}

impl Hood for AdsgHood {
    fn name(&self) -> String {
        format!("adsg-{}", self.variant)
    }

    fn solve(&mut self, problem: &ErmProblem<'_>, x0: &[f64], observer: &mut dyn Observer) -> Result<SolveOutput> {
        let config = AdsgConfig {
            blocks: self.blocks,
            batch: self.batch,
            epochs: self.epochs_for(problem)?,
            schedule: Some(ScheduleKind::StronglyConvex),
            x0: Some(x0.to_vec()),
        };
        // a fresh, reproducible stream per invocation
        let rng = RngStreams::new(self.seed.wrapping_add(self.calls.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        self.calls += 1;
        run(problem, &config, self.variant, rng, observer)
    }
}

/// One ADSG HOOD invocation; returns the final snapshot.
pub fn hood_wrap_adsg(problem: &ErmProblem<'_>, x0: &[f64], blocks: usize, seed: u64) -> Result<Vec<f64>> {
    let mut hood = AdsgHood::new(blocks, seed);
    Ok(hood.solve(problem, x0, &mut crate::trace::NoopObserver)?.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reduce {
    None,
    Reg,
    Smooth,
    Joint,
}

impl Reduce {
    pub fn name(self) -> &'static str {
        match self {
            Reduce::None => "none",
            Reduce::Reg => "reg",
            Reduce::Smooth => "smooth",
            Reduce::Joint => "joint",
        }
    }
}

impl fmt::Display for Reduce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reduce {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Reduce::None),
            "reg" => Ok(Reduce::Reg),
            "smooth" => Ok(Reduce::Smooth),
            "joint" => Ok(Reduce::Joint),
            other => Err(Error::Config(format!("unknown reduction `{other}`"))),
        }
    }
}

/// Round count and halving seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionPlan {
    pub rounds: usize,
    pub mu0: Option<f64>,
    pub lambda0: Option<f64>,
}

impl ReductionPlan {
    /// `T = ceil(log2(gap / epsilon))`, at least 1.
    pub fn rounds_for(gap: f64, epsilon: f64) -> Result<usize> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(gap > epsilon) {
            return Ok(1);
        }
        Ok(((gap / epsilon).log2().ceil() as usize).max(1))
    }

    pub fn mu(&self, round: usize) -> Option<f64> {
        self.mu0.map(|m| m / 2f64.powi(round as i32))
    }

    pub fn lambda(&self, round: usize) -> Option<f64> {
        self.lambda0.map(|l| l / 2f64.powi(round as i32))
    }
}

#[derive(Debug, Clone)]
pub struct ReductionOptions {
    pub epsilon: f64,
    pub mu0: Option<f64>,
    pub lambda0: Option<f64>,
    /// Overrides the pilot-based round count.
    pub rounds: Option<usize>,
    /// Upper bound on `F(x0) - F*`; replaces the pilot estimate.
    pub initial_gap: Option<f64>,
    pub seed: u64,
}

impl ReductionOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            mu0: None,
            lambda0: None,
            rounds: None,
            initial_gap: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    /// True objective at the round's output.
    pub objective: f64,
    pub epg: u64,
}

#[derive(Debug, Clone)]
pub struct ReductionOutput {
    pub x: Vec<f64>,
    /// Per-epoch rows over all rounds with cumulative epoch, EPG and seconds
    /// and the true objective.
    pub trace: Vec<TraceRecord>,
    pub rounds: Vec<RoundRecord>,
    pub plan: ReductionPlan,
    pub epg: u64,
}

/// Re-labels the inner solver's epochs against the original objective.
struct RoundObserver<'a, 'p> {
    truth: &'a ErmProblem<'p>,
    algo: &'a str,
    epoch_offset: usize,
    epg_offset: u64,
    seconds_offset: f64,
    trace: &'a mut Vec<TraceRecord>,
    error: Option<Error>,
}

impl Observer for RoundObserver<'_, '_> {
    fn on_epoch(&mut self, record: &TraceRecord, x: &[f64]) {
        match self.truth.objective(x) {
            Ok(objective) => self.trace.push(TraceRecord {
                algo: self.algo.to_string(),
                epoch: self.epoch_offset + record.epoch,
                epg: self.epg_offset + record.epg,
                seconds: self.seconds_offset + record.seconds,
                objective,
            }),
            Err(e) => {
                self.error.get_or_insert(e);
            }
        }
    }
}

struct Pilot {
    gap: f64,
    dist_sq: f64,
    epg: u64,
    seconds: f64,
}

/// Five SVRG epochs from `x0` on `surrogate`; the decrease of the true
/// objective stands in for `F(x0) - F*` and the distance travelled for `||x0 - x*||`.
fn pilot(truth: &ErmProblem<'_>, surrogate: &ErmProblem<'_>, x0: &[f64], seed: u64) -> Result<Pilot> {
    let config = BaselineConfig {
        epochs: PILOT_EPOCHS,
        x0: Some(x0.to_vec()),
        ..Default::default()
    };
    let out = run_svrg(surrogate, &config, RngStreams::new(seed ^ 0x0070_11e7), &mut crate::trace::NoopObserver)?;
    let gap = truth.objective(x0)? - truth.objective(&out.x)?;
    let dist_sq = x0.iter().zip(&out.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    Ok(Pilot {
        gap: gap.max(f64::MIN_POSITIVE),
        dist_sq,
        epg: out.epg,
        seconds: out.trace.last().map_or(0.0, |r| r.seconds),
    })
}

fn adapt(
    hood: &mut dyn Hood,
    problem: &ErmProblem<'_>,
    x0: &[f64],
    options: &ReductionOptions,
    reg_active: bool,
    smooth_active: bool,
    tag: &str,
) -> Result<ReductionOutput> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    let kind = problem.loss().kind;
    let truth = if smooth_active {
        problem.with_loss(Loss::new(kind))?
    } else {
        problem.clone()
    };

    let needs_pilot = options.rounds.is_none() && options.initial_gap.is_none()
        || reg_active && options.mu0.is_none()
        || smooth_active && options.lambda0.is_none();
    let pilot = if needs_pilot {
        let surrogate = if smooth_active {
            problem.with_loss(Loss::smoothed(kind, PILOT_SMOOTHING))?
        } else {
            problem.clone()
        };
        Some(pilot(&truth, &surrogate, x0, options.seed)?)
    } else {
        None
    };
    let gap = options.initial_gap.or(pilot.as_ref().map(|p| p.gap)).unwrap_or(f64::NAN);
    let rounds = match options.rounds {
        Some(0) => return Err(Error::invalid("at least one reduction round is required")),
        Some(t) => t,
        None => ReductionPlan::rounds_for(gap, options.epsilon)?,
    };
    let mu0 = reg_active.then(|| {
        options.mu0.unwrap_or_else(|| {
            let p = pilot.as_ref().expect("pilot ran");
            if p.dist_sq > 0.0 { p.gap / p.dist_sq } else { 1.0 }
        })
    });
    let lambda0 = smooth_active.then(|| options.lambda0.unwrap_or_else(|| gap / (LOSS_LIPSCHITZ * LOSS_LIPSCHITZ)));
    for v in mu0.iter().chain(&lambda0) {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("halving seeds must be positive and finite, got {v}")));
        }
    }
    let plan = ReductionPlan { rounds, mu0, lambda0 };

    let algo = format!("{}+{tag}", hood.name());
    let mut trace = Vec::new();
    let mut records = Vec::with_capacity(rounds);
    let (mut epg, mut seconds, mut epochs) = pilot.as_ref().map_or((0, 0.0, 0), |p| (p.epg, p.seconds, 0));
    let mut x = x0.to_vec();
    for t in 0..rounds {
        let mut round_problem = problem.clone();
        if let Some(lam) = plan.lambda(t) {
            round_problem = round_problem.with_loss(Loss::smoothed(kind, lam))?;
        }
        if let Some(mu) = plan.mu(t) {
            let reg = problem.regularizer().clone().with_anchor(mu, x0.to_vec());
            round_problem = round_problem.with_regularizer(reg)?;
        }
        let mut obs = RoundObserver {
            truth: &truth,
            algo: &algo,
            epoch_offset: epochs,
            epg_offset: epg,
            seconds_offset: seconds,
            trace: &mut trace,
            error: None,
        };
        let out = hood.solve(&round_problem, &x, &mut obs)?;
        if let Some(e) = obs.error {
            return Err(e);
        }
        epochs += out.trace.len();
        epg += out.epg;
        seconds += out.trace.last().map_or(0.0, |r| r.seconds);
        x = out.x;
        records.push(RoundRecord {
            round: t,
            mu: plan.mu(t),
            lambda: plan.lambda(t),
            objective: truth.objective(&x)?,
            epg,
        });
    }
    Ok(ReductionOutput {
        x,
        trace,
        rounds: records,
        plan,
        epg,
    })
}

/// Solves `min F + P` for smooth losses and general convex `P`.
pub fn adapt_reg(
    hood: &mut dyn Hood,
    problem: &ErmProblem<'_>,
    x0: &[f64],
    options: &ReductionOptions,
) -> Result<ReductionOutput> {
    if !problem.loss().is_differentiable() {
        return Err(Error::invalid("AdaptReg needs a smooth loss; use joint_adapt for non-smooth ones"));
    }
    adapt(hood, problem, x0, options, true, false, "reg")
}

/// Solves `min F + P` for a 1-Lipschitz non-smooth loss and strongly convex `P`.
/// The loss's own smoothing parameter is ignored; the unsmoothed loss is the target.
pub fn adapt_smooth(
    hood: &mut dyn Hood,
    problem: &ErmProblem<'_>,
    x0: &[f64],
    options: &ReductionOptions,
) -> Result<ReductionOutput> {
    smooth_gap_bound(problem.loss().kind, 1.0)?;
    if !(problem.regularizer().strong_convexity() > 0.0) {
        return Err(Error::invalid("AdaptSmooth needs a strongly convex regularizer (l2 > 0)"));
    }
    adapt(hood, problem, x0, options, false, true, "smooth")
}

/// Halves both the added regularization and the smoothing each round. A
/// smooth loss leaves the smoothing branch inert; `reg_is_strong` leaves the
/// regularization branch inert.
pub fn joint_adapt(
    hood: &mut dyn Hood,
    problem: &ErmProblem<'_>,
    x0: &[f64],
    options: &ReductionOptions,
    reg_is_strong: bool,
) -> Result<ReductionOutput> {
    let smooth_active = !problem.loss().kind.is_smooth();
    if reg_is_strong && !(problem.regularizer().strong_convexity() > 0.0) {
        return Err(Error::invalid("regularizer flagged strongly convex but l2 = 0"));
    }
    adapt(hood, problem, x0, options, !reg_is_strong, smooth_active, "joint")
}

pub fn run_reduction(
    mode: Reduce,
    hood: &mut dyn Hood,
    problem: &ErmProblem<'_>,
    x0: &[f64],
    options: &ReductionOptions,
) -> Result<ReductionOutput> {
    match mode {
        Reduce::None => Err(Error::invalid("no reduction selected")),
        Reduce::Reg => adapt_reg(hood, problem, x0, options),
        Reduce::Smooth => adapt_smooth(hood, problem, x0, options),
        Reduce::Joint => joint_adapt(hood, problem, x0, options, false),
    }
}
