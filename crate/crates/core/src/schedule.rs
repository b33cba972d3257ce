//! Per-epoch ADSG coefficients and the snapshot index distribution.

use crate::error::{Error, Result};
use crate::problem::ProblemConstants;
use crate::rng::RngStreams;

/// Convex-combination weights of the two coupling steps for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingWeights {
    /// Weight on the previous `x` (historical iterate).
    pub alpha1: f64,
    /// Weight on `z` (historical momentum).
    pub alpha2: f64,
    /// Weight on the snapshot (negative momentum).
    pub alpha3: f64,
}

impl CouplingWeights {
    fn from_two(alpha2: f64, alpha3: f64) -> Self {
        Self {
            alpha1: 1.0 - alpha2 - alpha3,
            alpha2,
            alpha3,
        }
    }
}

/// `alpha2 = min(1, sqrt(n / kappa)) / 2B`, `alpha3 = 1 / 2B`, constant over epochs.
pub fn schedule_strongly_convex(n: usize, blocks: usize, kappa: f64) -> Result<CouplingWeights> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("condition number must be positive and finite, got {kappa}")));
    }
    if n == 0 || blocks == 0 {
        return Err(Error::invalid("n and B must be positive"));
    }
    let b = blocks as f64;
    let alpha2 = (n as f64 / kappa).sqrt().min(1.0) / (2.0 * b);
    Ok(CouplingWeights::from_two(alpha2, 1.0 / (2.0 * b)))
}

/// `alpha2_s = 2 / (s + 4B)`, `alpha3 = 1 / 2B`.
pub fn schedule_general_convex(epoch: usize, blocks: usize) -> CouplingWeights {
    let b = blocks as f64;
    CouplingWeights::from_two(2.0 / (epoch as f64 + 4.0 * b), 1.0 / (2.0 * b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    StronglyConvex,
    GeneralConvex,
}

/// Everything an ADSG epoch needs: weights, `L_bar`, step `eta` and snapshot ratio `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochCoefficients {
    pub weights: CouplingWeights,
    pub l_bar: f64,
    pub eta: f64,
    pub theta: f64,
}

impl EpochCoefficients {
    pub fn new(weights: CouplingWeights, constants: &ProblemConstants, blocks: usize, mu: f64) -> Self {
        let b = blocks as f64;
        let l_bar = constants.l / (b * weights.alpha3) + constants.l_block;
        let eta = 1.0 / (l_bar * weights.alpha2 * b);
        let theta = 1.0 + mu / (l_bar * b * b * weights.alpha2 + (b - 1.0) * mu);
        Self {
            weights,
            l_bar,
            eta,
            theta,
        }
    }

    /// `gamma_s = alpha2 / (alpha2 + alpha3)`, the `z` weight in the rescaled forms.
    pub fn gamma(&self) -> f64 {
        self.weights.alpha2 / (self.weights.alpha2 + self.weights.alpha3)
    }
}

/// Resolved schedule for a whole run.
#[derive(Debug, Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    constants: ProblemConstants,
    blocks: usize,
    strong: Option<CouplingWeights>,
}

impl Schedule {
    pub fn new(
        kind: ScheduleKind,
        constants: ProblemConstants,
        n: usize,
        blocks: usize,
    ) -> Result<Self> {
        constants.ensure_steppable()?;
        let strong = match kind {
            ScheduleKind::StronglyConvex => {
                if !(constants.mu > 0.0) {
                    return Err(Error::invalid(
                        "strongly convex schedule requires mu > 0",
                    ));
                }
                Some(schedule_strongly_convex(n, blocks, constants.kappa())?)
            }
            ScheduleKind::GeneralConvex => None,
        };
        Ok(Self {
            kind,
            constants,
            blocks,
            strong,
        })
    }

    /// Strongly convex when `mu > 0`, general convex otherwise.
    pub fn auto(constants: ProblemConstants, n: usize, blocks: usize) -> Result<Self> {
        let kind = if constants.mu > 0.0 {
            ScheduleKind::StronglyConvex
        } else {
            ScheduleKind::GeneralConvex
        };
        Self::new(kind, constants, n, blocks)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn weights(&self, epoch: usize) -> CouplingWeights {
        self.strong
            .unwrap_or_else(|| schedule_general_convex(epoch, self.blocks))
    }

    pub fn epoch(&self, epoch: usize) -> EpochCoefficients {
        // the general-convex schedule runs with mu = 0 (uniform snapshot draw)
        let mu = match self.kind {
            ScheduleKind::StronglyConvex => self.constants.mu,
            ScheduleKind::GeneralConvex => 0.0,
        };
        EpochCoefficients::new(self.weights(epoch), &self.constants, self.blocks, mu)
    }
}

/// Draws `sigma` in `1..=m` with `P(sigma = j)` proportional to `theta^(j-1)`
/// by inverting the closed-form CDF `(theta^j - 1) / (theta^m - 1)`.
pub fn snapshot_draw(theta: f64, m: usize, rng: &mut RngStreams) -> Result<usize> {
    if !(theta >= 1.0) || !theta.is_finite() {
        return Err(Error::invalid(format!("theta must be >= 1, got {theta}")));
    }
    if m == 0 {
        return Err(Error::invalid("m must be positive"));
    }
    Ok(snapshot_index(theta, m, rng.snapshot_uniform()))
}

pub(crate) fn snapshot_index(theta: f64, m: usize, u: f64) -> usize {
    if m == 1 {
        return 1;
    }
    let mf = m as f64;
    let log_theta = (theta - 1.0).ln_1p();
    let x = if log_theta == 0.0 {
        u * mf
    } else {
        // solve (theta^x - 1) / (theta^m - 1) = u in a form that neither
        // overflows for large m*ln(theta) nor cancels for theta near 1
        let tail = (1.0 - u) * (-mf * log_theta).exp_m1();
        mf + tail.ln_1p() / log_theta
    };
    (x.ceil() as usize).clamp(1, m)
}

/// Combination weights expressing `x_k` through snapshots and past `z`'s.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexCombination {
    /// Weights on the snapshots `x~^0 .. x~^s` (the last entry is the current snapshot).
    pub snapshot_weights: Vec<f64>,
    /// Weights on `z_0 .. z_k`.
    pub z_weights: Vec<f64>,
}

impl ConvexCombination {
    pub fn total(&self) -> f64 {
        self.snapshot_weights.iter().sum::<f64>() + self.z_weights.iter().sum::<f64>()
    }

    pub fn min_weight(&self) -> f64 {
        self.snapshot_weights
            .iter()
            .chain(&self.z_weights)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Unrolls the two coupling steps to write `x_k` (`k = s m + j`, `j >= 1`) as a
/// combination of snapshots and past `z` iterates. `epochs[s]` gives the
/// weights used in epoch `s`.
pub fn coupling_combination(
    epochs: &[CouplingWeights],
    blocks: usize,
    m: usize,
    k: usize,
) -> Result<ConvexCombination> {
    if k == 0 {
        return Ok(ConvexCombination {
            snapshot_weights: vec![0.0],
            z_weights: vec![1.0],
        });
    }
    let last_epoch = (k - 1) / m;
    if last_epoch >= epochs.len() {
        return Err(Error::invalid(format!(
            "iteration {k} needs {} epochs of weights, got {}",
            last_epoch + 1,
            epochs.len()
        )));
    }
    let b = blocks as f64;
    let mut z_weights = vec![1.0];
    let mut snapshot_weights: Vec<f64> = vec![0.0];
    for step in 1..=k {
        let s = (step - 1) / m;
        let w = epochs[s];
        if step > 1 && (step - 1) % m == 0 {
            // entering a new epoch: a fresh snapshot starts with zero weight
            snapshot_weights.push(0.0);
        }
        // x_k = a1 x_{k-1} + a2 z_{k-1} + a3 x~^s + a2 B (z_k - z_{k-1})
        for v in z_weights.iter_mut().chain(snapshot_weights.iter_mut()) {
            *v *= w.alpha1;
        }
        *z_weights.last_mut().unwrap() += (1.0 - b) * w.alpha2;
        *snapshot_weights.last_mut().unwrap() += w.alpha3;
        z_weights.push(b * w.alpha2);
    }
    Ok(ConvexCombination {
        snapshot_weights,
        z_weights,
    })
}
