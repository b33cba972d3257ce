//! Composite ERM objectives `F(x) + P(x)` with `F(x) = (1/n) sum_i phi_i(a_i^T x)`.
//!
//! Losses are scalar functions of the margin `z = a_i^T x`. The non-smooth
//! families (absolute deviation, hinge) carry a smoothing parameter; a
//! positive value selects their `(1/lambda)`-smooth closed-form envelope.

use std::fmt;
use std::str::FromStr;

use crate::data::{BlockPartition, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Logistic,
    Squared,
    AbsoluteDeviation,
    Hinge,
}

impl LossKind {
    pub fn is_smooth(self) -> bool {
        matches!(self, LossKind::Logistic | LossKind::Squared)
    }

    /// Losses whose labels must be `+1` or `-1`.
    pub fn is_classification(self) -> bool {
        matches!(self, LossKind::Logistic | LossKind::Hinge)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Logistic => "logistic",
            LossKind::Squared => "squared",
            LossKind::AbsoluteDeviation => "lad",
            LossKind::Hinge => "hinge",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LossKind::Logistic),
            "squared" | "ridge" => Ok(LossKind::Squared),
            "lad" | "absolute_deviation" => Ok(LossKind::AbsoluteDeviation),
            "hinge" | "svm" => Ok(LossKind::Hinge),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

/// A loss family plus its smoothing parameter (ignored by smooth families).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub kind: LossKind,
    pub smoothing: f64,
}

impl Loss {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            smoothing: 0.0,
        }
    }

    pub fn smoothed(kind: LossKind, smoothing: f64) -> Self {
        Self { kind, smoothing }
    }

    pub fn logistic() -> Self {
        Self::new(LossKind::Logistic)
    }

    pub fn squared() -> Self {
        Self::new(LossKind::Squared)
    }

    pub fn is_differentiable(&self) -> bool {
        self.kind.is_smooth() || self.smoothing > 0.0
    }

    /// Smoothness of `phi` in the margin: 1/4, 1, or `1/lambda` for the smoothed families.
    pub fn curvature(&self) -> Result<f64> {
        match self.kind {
            LossKind::Logistic => Ok(0.25),
            LossKind::Squared => Ok(1.0),
            _ if self.smoothing > 0.0 => Ok(1.0 / self.smoothing),
            kind => Err(Error::invalid(format!(
                "{kind} loss is not smooth; a positive smoothing parameter is required"
            ))),
        }
    }

    /// `(phi_i(z), phi_i'(z))` for label `y`.
    #[inline]
    pub fn value_grad(&self, y: f64, z: f64) -> (f64, f64) {
        let lam = self.smoothing;
        match self.kind {
            LossKind::Logistic => {
                let t = -y * z;
                (softplus(t), -y * sigmoid(t))
            }
            LossKind::Squared => {
                let r = z - y;
                (0.5 * r * r, r)
            }
            LossKind::AbsoluteDeviation => {
                let r = z - y;
                if lam > 0.0 {
                    if r > lam {
                        (r - 0.5 * lam, 1.0)
                    } else if r < -lam {
                        (-r - 0.5 * lam, -1.0)
                    } else {
                        (r * r / (2.0 * lam), r / lam)
                    }
                } else if r > 0.0 {
                    (r, 1.0)
                } else if r < 0.0 {
                    (-r, -1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            LossKind::Hinge => {
                let t = y * z;
                if t > 1.0 {
                    (0.0, 0.0)
                } else if lam > 0.0 {
                    if t >= 1.0 - lam {
                        let s = t - 1.0;
                        (s * s / (2.0 * lam), y * s / lam)
                    } else {
                        (1.0 - t - 0.5 * lam, -y)
                    }
                } else if t < 1.0 {
                    (1.0 - t, -y)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    #[inline]
    pub fn value(&self, y: f64, z: f64) -> f64 {
        self.value_grad(y, z).0
    }

    #[inline]
    pub fn derivative(&self, y: f64, z: f64) -> f64 {
        self.value_grad(y, z).1
    }
}

#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Worst-case gap `lambda * G^2 / 2` between a non-smooth loss and its smoothing.
/// Both supported families are 1-Lipschitz.
pub fn smooth_gap_bound(kind: LossKind, lambda: f64) -> Result<f64> {
    if kind.is_smooth() {
        return Err(Error::invalid(format!("{kind} loss needs no smoothing")));
    }
    if lambda < 0.0 {
        return Err(Error::invalid("smoothing parameter must be non-negative"));
    }
    const LIPSCHITZ: f64 = 1.0;
    Ok(0.5 * lambda * LIPSCHITZ * LIPSCHITZ)
}

/// Quadratic pull `(weight / 2) ||x - center||^2`, used by the regularization
/// reductions to make a general-convex problem strongly convex.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub weight: f64,
    pub center: Vec<f64>,
}

/// `P(x) = l1 ||x||_1 + (l2 / 2) ||x||^2` plus an optional [`Anchor`].
/// Every term is coordinate separable, hence block separable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Regularizer {
    pub l1: f64,
    pub l2: f64,
    pub anchor: Option<Anchor>,
}

impl Regularizer {
    pub fn new(l1: f64, l2: f64) -> Self {
        Self {
            l1,
            l2,
            anchor: None,
        }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_anchor(mut self, weight: f64, center: Vec<f64>) -> Self {
        self.anchor = Some(Anchor { weight, center });
        self
    }

    pub fn strong_convexity(&self) -> f64 {
        self.l2 + self.anchor.as_ref().map_or(0.0, |a| a.weight)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut l1 = 0.0;
        let mut sq = 0.0;
        for &v in x {
            l1 += v.abs();
            sq += v * v;
        }
        let mut total = self.l1 * l1 + 0.5 * self.l2 * sq;
        if let Some(a) = &self.anchor {
            let dist: f64 = x.iter().zip(&a.center).map(|(v, c)| (v - c) * (v - c)).sum();
            total += 0.5 * a.weight * dist;
        }
        total
    }

    /// `prox_{eta P}` for global coordinate `j`.
    #[inline]
    pub fn prox_coord(&self, j: usize, v: f64, eta: f64) -> f64 {
        let (shift, pull) = match &self.anchor {
            Some(a) => (eta * a.weight * a.center[j], a.weight),
            None => (0.0, 0.0),
        };
        soft_threshold(v + shift, eta * self.l1) / (1.0 + eta * (self.l2 + pull))
    }

    /// Applies `prox_{eta P_l}` in place to a block starting at global coordinate `offset`.
    pub fn prox_in_place(&self, block: &mut [f64], offset: usize, eta: f64) {
        for (k, v) in block.iter_mut().enumerate() {
            *v = self.prox_coord(offset + k, *v, eta);
        }
    }

    pub fn prox_block(&self, y_block: &[f64], offset: usize, eta: f64) -> Vec<f64> {
        let mut out = y_block.to_vec();
        self.prox_in_place(&mut out, offset, eta);
        out
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.l1 >= 0.0 && self.l2 >= 0.0) {
            return Err(Error::invalid("regularization weights must be non-negative"));
        }
        if let Some(a) = &self.anchor {
            if !(a.weight >= 0.0) {
                return Err(Error::invalid("anchor weight must be non-negative"));
            }
            if a.center.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.center.len(),
                });
            }
        }
        Ok(())
    }
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Smoothness and strong-convexity constants consumed by the step schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    /// Smoothness of each `f_i`.
    pub l: f64,
    /// Block smoothness of each `f_i`.
    pub l_block: f64,
    pub mu: f64,
}

impl ProblemConstants {
    /// `(L + L_B) / mu`, infinite when `mu == 0`.
    pub fn kappa(&self) -> f64 {
        if self.mu > 0.0 {
            (self.l + self.l_block) / self.mu
        } else {
            f64::INFINITY
        }
    }

    pub(crate) fn ensure_steppable(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite() && self.l_block.is_finite()) {
            return Err(Error::invalid(format!(
                "degenerate smoothness constants L = {}, L_B = {}",
                self.l, self.l_block
            )));
        }
        Ok(())
    }
}

/// An ERM instance borrowing its dataset.
#[derive(Debug, Clone)]
pub struct ErmProblem<'a> {
    data: &'a Dataset,
    loss: Loss,
    reg: Regularizer,
    mu_override: Option<f64>,
}

impl<'a> ErmProblem<'a> {
    pub fn new(data: &'a Dataset, loss: Loss, reg: Regularizer) -> Result<Self> {
        if !(loss.smoothing >= 0.0) {
            return Err(Error::invalid("smoothing parameter must be non-negative"));
        }
        if loss.kind.is_classification() {
            if let Some(i) = data.labels().iter().position(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::invalid(format!(
                    "{} loss requires labels in {{-1, +1}}; sample {i} has label {}",
                    loss.kind,
                    data.label(i)
                )));
            }
        }
        reg.validate(data.n_features())?;
        Ok(Self {
            data,
            loss,
            reg,
            mu_override: None,
        })
    }

    /// Overrides the strong-convexity constant handed to the solvers.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::invalid("mu must be non-negative"));
        }
        self.mu_override = Some(mu);
        Ok(self)
    }

    pub fn with_loss(&self, loss: Loss) -> Result<Self> {
        let mut p = Self::new(self.data, loss, self.reg.clone())?;
        p.mu_override = self.mu_override;
        Ok(p)
    }

    pub fn with_regularizer(&self, reg: Regularizer) -> Result<Self> {
        Self::new(self.data, self.loss, reg)
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn dim(&self) -> usize {
        self.data.n_features()
    }

    pub fn n_samples(&self) -> usize {
        self.data.n_samples()
    }

    pub fn mu(&self) -> f64 {
        self.mu_override
            .unwrap_or_else(|| self.reg.strong_convexity())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `phi_i'(z)` for sample `i`.
    #[inline]
    pub fn sample_derivative(&self, i: usize, z: f64) -> f64 {
        self.loss.derivative(self.data.label(i), z)
    }

    /// `a_i^T x` for every sample.
    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.data.rows().map(|r| r.dot(x)).collect())
    }

    /// The smooth part `F(x)`.
    pub fn loss_value(&self, x: &[f64]) -> Result<f64> {
        let margins = self.margins(x)?;
        Ok(self.loss_from_margins(&margins))
    }

    pub(crate) fn loss_from_margins(&self, margins: &[f64]) -> f64 {
        let total: f64 = margins
            .iter()
            .zip(self.data.labels())
            .map(|(&z, &y)| self.loss.value(y, z))
            .sum();
        total / self.n_samples() as f64
    }

    /// `F^P(x) = F(x) + P(x)`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.loss_value(x)? + self.reg.value(x))
    }

    /// `grad F(x)`; the regularizer is left to the proximal step.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gradient_and_margins(x)?.0)
    }

    /// `grad F(x)` together with the margins `a_i^T x` computed on the way.
    pub fn gradient_and_margins(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dim(x)?;
        let n = self.n_samples() as f64;
        let mut grad = vec![0.0; self.dim()];
        let mut margins = Vec::with_capacity(self.n_samples());
        for (i, row) in self.data.rows().enumerate() {
            let z = row.dot(x);
            margins.push(z);
            let g = self.sample_derivative(i, z) / n;
            if g != 0.0 {
                for (j, a) in row.iter() {
                    grad[j] += g * a;
                }
            }
        }
        Ok((grad, margins))
    }

    /// `L = c_phi max_i ||a_i||^2`, `L_B = c_phi max_i max_l ||[a_i]_l||^2`, `mu` from
    /// the regularizer unless overridden.
    pub fn constants(&self, partition: &BlockPartition) -> Result<ProblemConstants> {
        if partition.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: partition.dim(),
            });
        }
        let c = self.loss.curvature()?;
        Ok(ProblemConstants {
            l: c * self.data.max_row_norm_sq(),
            l_block: c * self.data.max_block_row_norm_sq(partition),
            mu: self.mu(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_partition, parse_libsvm_str};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Golden-section minimizer of a 1-D convex function on `[lo, hi]`.
    fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if f(a) < f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    /// Zero of a nondecreasing right-derivative, by bisection.
    fn subgradient_root(right_deriv: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if right_deriv(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn loss_examples() {
        let (v, g) = Loss::logistic().value_grad(1.0, 0.0);
        assert!(close(v, 2f64.ln(), 1e-15) && close(g, -0.5, 1e-15));

        let hinge = Loss::smoothed(LossKind::Hinge, 0.5);
        assert_eq!(hinge.value_grad(1.0, 2.0), (0.0, 0.0));

        let lad = Loss::smoothed(LossKind::AbsoluteDeviation, 0.1);
        assert_eq!(lad.value_grad(3.0, 3.0), (0.0, 0.0));
        let (v, g) = lad.value_grad(0.0, 0.2);
        assert!(close(v, 0.15, 1e-15) && g == 1.0);
        // continuity at the branch boundary r = lambda
        let (vb, _) = lad.value_grad(0.0, 0.1);
        assert!(close(vb, 0.1 - 0.05, 1e-15));
        assert!(close(vb, 0.1 * 0.1 / 0.2, 1e-15));
    }

    #[test]
    fn unsmoothed_kinks_use_zero_branch() {
        assert_eq!(Loss::new(LossKind::AbsoluteDeviation).value_grad(1.0, 1.0), (0.0, 0.0));
        assert_eq!(Loss::new(LossKind::Hinge).value_grad(1.0, 1.0), (0.0, 0.0));
        assert_eq!(Loss::new(LossKind::Hinge).value_grad(-1.0, 0.0), (1.0, 1.0));
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let l = Loss::logistic();
        let (v, g) = l.value_grad(1.0, -800.0);
        assert!(close(v, 800.0, 1e-9) && close(g, -1.0, 1e-12));
        let (v, g) = l.value_grad(1.0, 800.0);
        assert!((0.0..1e-300).contains(&v) && g.abs() < 1e-300);
    }

    #[test]
    fn gap_bound_examples() {
        assert!(close(smooth_gap_bound(LossKind::AbsoluteDeviation, 0.2).unwrap(), 0.1, 1e-15));
        assert_eq!(smooth_gap_bound(LossKind::Hinge, 0.0).unwrap(), 0.0);
        assert!(smooth_gap_bound(LossKind::Logistic, 0.3).is_err());
    }

    #[test]
    fn gap_bound_is_nearly_attained_near_the_kink() {
        let lam = 0.2;
        let smooth = Loss::smoothed(LossKind::AbsoluteDeviation, lam);
        let raw = Loss::new(LossKind::AbsoluteDeviation);
        let max_gap = (0..=4000)
            .map(|k| -1.0 + k as f64 * 0.0005)
            .map(|z| raw.value(0.0, z) - smooth.value(0.0, z))
            .fold(f64::MIN, f64::max);
        assert!(max_gap <= 0.1 + 1e-12 && max_gap > 0.09, "{max_gap}");
    }

    #[test]
    fn finite_differences_match_derivatives() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let losses = [
            Loss::logistic(),
            Loss::squared(),
            Loss::smoothed(LossKind::AbsoluteDeviation, 0.3),
            Loss::smoothed(LossKind::Hinge, 0.3),
        ];
        let h = 1e-6;
        for loss in losses {
            let mut checked = 0;
            while checked < 100 {
                let y = if loss.kind.is_classification() {
                    if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                } else {
                    rng.random_range(-2.0..2.0)
                };
                let z: f64 = rng.random_range(-3.0..3.0);
                let lam = loss.smoothing;
                let boundaries: Vec<f64> = match loss.kind {
                    LossKind::AbsoluteDeviation => vec![y - lam, y + lam],
                    LossKind::Hinge => vec![y * 1.0, y * (1.0 - lam)],
                    _ => vec![],
                };
                if boundaries.iter().any(|b| (z - b).abs() < 1e-4) {
                    continue;
                }
                let fd = (loss.value(y, z + h) - loss.value(y, z - h)) / (2.0 * h);
                assert!(close(fd, loss.derivative(y, z), 1e-5), "{loss:?} y={y} z={z}");
                checked += 1;
            }
        }
    }

    #[test]
    fn prox_examples() {
        let reg = Regularizer::new(1.0, 0.0);
        assert_eq!(reg.prox_block(&[3.0, -0.5, 0.0], 0, 1.0), vec![2.0, 0.0, 0.0]);
        let id = Regularizer::none();
        assert_eq!(id.prox_block(&[1.5, -2.0], 0, 0.7), vec![1.5, -2.0]);
        let ridge = Regularizer::new(0.0, 2.0);
        assert_eq!(ridge.prox_block(&[4.0], 0, 0.5), vec![2.0]);
    }

    #[test]
    fn prox_matches_golden_section_oracle() {
        let reg = Regularizer::new(0.7, 0.4).with_anchor(0.3, vec![0.5, -1.0, 2.0, 0.0]);
        let eta = 0.8;
        let y = [3.0, -0.2, 0.1, -4.0];
        let got = reg.prox_block(&y, 0, eta);
        for j in 0..4 {
            let a = reg.anchor.as_ref().unwrap();
            let obj = |x: f64| {
                eta * (reg.l1 * x.abs() + 0.5 * reg.l2 * x * x + 0.5 * a.weight * (x - a.center[j]).powi(2))
                    + 0.5 * (x - y[j]).powi(2)
            };
            let right = |x: f64| {
                let sign = if x >= 0.0 { 1.0 } else { -1.0 };
                eta * (reg.l1 * sign + reg.l2 * x + a.weight * (x - a.center[j])) + (x - y[j])
            };
            let root = subgradient_root(right, -10.0, 10.0);
            assert!(close(got[j], root, 1e-8), "coord {j}: {} vs {root}", got[j]);
            let golden = golden_min(obj, -10.0, 10.0);
            assert!(obj(got[j]) <= obj(golden) + 1e-10);
        }
    }

    proptest! {
        #[test]
        fn smoothing_sandwich(z in -5.0f64..5.0, y in -2.0f64..2.0, lam in 1e-3f64..2.0, sign in proptest::bool::ANY) {
            let lad_gap = Loss::new(LossKind::AbsoluteDeviation).value(y, z)
                - Loss::smoothed(LossKind::AbsoluteDeviation, lam).value(y, z);
            prop_assert!(lad_gap >= -1e-15 && lad_gap <= lam / 2.0 + 1e-12);
            let yc = if sign { 1.0 } else { -1.0 };
            let hinge_gap = Loss::new(LossKind::Hinge).value(yc, z)
                - Loss::smoothed(LossKind::Hinge, lam).value(yc, z);
            prop_assert!(hinge_gap >= -1e-15 && hinge_gap <= lam / 2.0 + 1e-12);
        }

        #[test]
        fn prox_is_block_separable(
            v in proptest::collection::vec(-5.0f64..5.0, 12),
            l1 in 0.0f64..2.0, l2 in 0.0f64..2.0, eta in 0.01f64..3.0,
        ) {
            let reg = Regularizer::new(l1, l2);
            let full = reg.prox_block(&v, 0, eta);
            let p = make_partition(12, 5).unwrap();
            let mut joined = Vec::new();
            for l in 0..p.blocks() {
                let r = p.range(l);
                joined.extend(reg.prox_block(&v[r.clone()], r.start, eta));
            }
            prop_assert_eq!(full, joined);
        }
    }

    fn tiny() -> Dataset {
        parse_libsvm_str("1 1:1 2:-2\n-1 2:0.5 3:1\n1 1:-1 3:3\n").unwrap()
    }

    #[test]
    fn objective_at_zero() {
        let ds = tiny();
        let p = ErmProblem::new(&ds, Loss::logistic(), Regularizer::none()).unwrap();
        assert!(close(p.objective(&[0.0; 3]).unwrap(), 2f64.ln(), 1e-15));
        let p = ErmProblem::new(&ds, Loss::squared(), Regularizer::new(0.0, 1.0)).unwrap();
        assert!(close(p.objective(&[0.0; 3]).unwrap(), 0.5, 1e-15));
        assert!(matches!(p.objective(&[0.0; 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gradient_single_sample() {
        let ds = parse_libsvm_str("2 1:1").unwrap().with_dim(2).unwrap();
        let p = ErmProblem::new(&ds, Loss::squared(), Regularizer::none()).unwrap();
        assert_eq!(p.gradient(&[0.0, 0.0]).unwrap(), vec![-2.0, 0.0]);
    }

    #[test]
    fn classification_labels_are_validated() {
        let ds = parse_libsvm_str("2 1:1").unwrap();
        assert!(ErmProblem::new(&ds, Loss::logistic(), Regularizer::none()).is_err());
        assert!(ErmProblem::new(&ds, Loss::squared(), Regularizer::none()).is_ok());
    }

    #[test]
    fn constants_examples() {
        let ds = Dataset::from_dense(&[vec![1.0, 1.0]], vec![0.0]).unwrap();
        let p = ErmProblem::new(&ds, Loss::squared(), Regularizer::none()).unwrap();
        let c = p.constants(&make_partition(2, 2).unwrap()).unwrap();
        assert_eq!((c.l, c.l_block), (2.0, 1.0));
        assert!(c.kappa().is_infinite());

        let ds = Dataset::from_dense(&[vec![2.0]], vec![1.0]).unwrap();
        let p = ErmProblem::new(&ds, Loss::logistic(), Regularizer::new(0.0, 0.5)).unwrap();
        let c = p.constants(&make_partition(1, 1).unwrap()).unwrap();
        assert_eq!(c.l, 1.0);
        assert_eq!(c.kappa(), 4.0);

        let zero = Dataset::from_csr(vec![0, 0], vec![], vec![], vec![1.0], 3).unwrap();
        let p = ErmProblem::new(&zero, Loss::squared(), Regularizer::new(0.0, 1.0)).unwrap();
        let c = p.constants(&make_partition(3, 1).unwrap()).unwrap();
        assert_eq!((c.l, c.l_block), (0.0, 0.0));
        assert!(c.ensure_steppable().is_err());

        let p = ErmProblem::new(&ds, Loss::new(LossKind::Hinge), Regularizer::none()).unwrap();
        assert!(p.constants(&make_partition(1, 1).unwrap()).is_err());
    }

    #[test]
    fn block_constant_never_exceeds_full_constant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..10).map(|_| if rng.random_bool(0.4) { rng.random_range(-3.0..3.0) } else { 0.0 }).collect())
                .collect();
            let Ok(ds) = Dataset::from_dense(&rows, vec![0.0; 8]) else { continue };
            let p = ErmProblem::new(&ds, Loss::squared(), Regularizer::none()).unwrap();
            for b in 1..=10 {
                let c = p.constants(&make_partition(10, b).unwrap()).unwrap();
                assert!(c.l_block <= c.l);
            }
        }
    }
}
