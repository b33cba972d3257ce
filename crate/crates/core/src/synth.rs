//! Desk-scale synthetic instances with known optima.
//!
//! Dense designs are `A = G diag(s) Q^T` with Gaussian `G`, a random
//! orthogonal `Q` and column scales `s` decaying geometrically from 1 to
//! [`MIN_SCALE`], so the data term alone is badly conditioned and `l2`
//! controls the effective condition number. `l2` is set so that
//! `(L + L_B) / l2` equals the requested `kappa` exactly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::{run_svrg, BaselineConfig};
use crate::data::{BlockPartition, Dataset};
use crate::error::{Error, Result};
use crate::problem::{ErmProblem, Loss, LossKind, Regularizer};
use crate::rng::RngStreams;
use crate::trace::NoopObserver;

/// Smallest column scale of the dense design.
pub const MIN_SCALE: f64 = 1e-3;

/// Largest `n * d` accepted by the direct solve.
pub const MAX_DENSE_ENTRIES: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub loss: Loss,
    /// Target `kappa = (L + L_B) / mu`; constants of an unsmoothed loss are
    /// taken at smoothing 1.
    pub kappa: f64,
    /// Standard deviation of the label noise.
    pub noise: f64,
    pub seed: u64,
    /// Block count used when measuring `L_B`.
    pub blocks: usize,
    pub l1: f64,
    /// Inner iterations of the SVRG reference run used when no closed form
    /// exists; zero skips it.
    pub reference_iterations: usize,
}

impl SyntheticSpec {
    pub fn ridge(n: usize, d: usize, kappa: f64, seed: u64) -> Self {
        Self {
            n,
            d,
            loss: Loss::squared(),
            kappa,
            noise: 0.1,
            seed,
            blocks: 1,
            l1: 0.0,
            reference_iterations: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub data: Dataset,
    pub l2: f64,
    pub l1: f64,
    pub loss: Loss,
    pub optimum: Option<Optimum>,
}

impl SyntheticInstance {
    pub fn problem(&self) -> Result<ErmProblem<'_>> {
        ErmProblem::new(&self.data, self.loss, Regularizer::new(self.l1, self.l2))
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn dense_design(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, d, |_, _| gaussian(rng));
    let q = DMatrix::from_fn(d, d, |_, _| gaussian(rng)).qr().q();
    let ratio = if d > 1 { MIN_SCALE.powf(1.0 / (d - 1) as f64) } else { 1.0 };
    let scales = DVector::from_fn(d, |j, _| ratio.powi(j as i32));
    // (G diag(s)) Q^T, normalized so the largest row has unit norm
    let mut a = g * DMatrix::from_diagonal(&scales) * q.transpose();
    let max_norm = a.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max).sqrt();
    if max_norm > 0.0 {
        a /= max_norm;
    }
    a
}

fn labels_for(kind: LossKind, margins: &DVector<f64>, noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    margins
        .iter()
        .map(|&m| {
            let t = m + noise * gaussian(rng);
            if kind.is_classification() {
                if t >= 0.0 { 1.0 } else { -1.0 }
            } else {
                t
            }
        })
        .collect()
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    if !(spec.kappa >= 1.0) || !spec.kappa.is_finite() {
        return Err(Error::invalid(format!("target condition number must be >= 1, got {}", spec.kappa)));
    }
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::invalid("n and d must be positive"));
    }
    if spec.n * spec.d > MAX_DENSE_ENTRIES {
        return Err(Error::invalid(format!(
            "{}x{} design exceeds the {MAX_DENSE_ENTRIES}-entry direct-solve limit",
            spec.n, spec.d
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = dense_design(spec.n, spec.d, &mut rng);
    let truth = DVector::from_fn(spec.d, |_, _| gaussian(&mut rng));
    let labels = labels_for(spec.loss.kind, &(&a * truth), spec.noise, &mut rng);
    let rows: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
    let data = Dataset::from_dense(&rows, labels)?;

    let partition = BlockPartition::new(spec.d, spec.blocks)?;
    // unsmoothed losses are measured at unit smoothing
    let measured = if spec.loss.is_differentiable() { spec.loss } else { Loss::smoothed(spec.loss.kind, 1.0) };
    let unregularized = ErmProblem::new(&data, measured, Regularizer::none())?;
    let constants = unregularized.constants(&partition)?;
    let l2 = (constants.l + constants.l_block) / spec.kappa;

    let mut instance = SyntheticInstance {
        data,
        l2,
        l1: spec.l1,
        loss: spec.loss,
        optimum: None,
    };
    instance.optimum = if spec.loss.kind == LossKind::Squared && spec.l1 == 0.0 {
        let x = ridge_optimum(&instance.data, l2)?;
        let value = instance.problem()?.objective(&x)?;
        Some(Optimum { x, value })
    } else if spec.reference_iterations > 0 && spec.loss.is_differentiable() {
        Some(reference_optimum(&instance.problem()?, spec.reference_iterations, spec.seed)?)
    } else {
        None
    };
    Ok(instance)
}

/// `(A^T A / n + l2 I)^{-1} A^T y / n` by Cholesky.
pub fn ridge_optimum(data: &Dataset, l2: f64) -> Result<Vec<f64>> {
    let (n, d) = (data.n_samples(), data.n_features());
    if n * d > MAX_DENSE_ENTRIES {
        return Err(Error::invalid("design too large for a direct solve"));
    }
    let mut a = DMatrix::zeros(n, d);
    for (i, row) in data.rows().enumerate() {
        for (j, v) in row.iter() {
            a[(i, j)] = v;
        }
    }
    let y = DVector::from_column_slice(data.labels());
    let nf = n as f64;
    let mut h = a.transpose() * &a / nf;
    for j in 0..d {
        h[(j, j)] += l2;
    }
    let rhs = a.transpose() * y / nf;
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::invalid("normal equations are not positive definite"))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// High-accuracy solution from a long proximal SVRG run.
pub fn reference_optimum(problem: &ErmProblem<'_>, iterations: usize, seed: u64) -> Result<Optimum> {
    let inner = 2 * problem.n_samples();
    let config = BaselineConfig {
        epochs: iterations.div_ceil(inner).max(1),
        inner: Some(inner),
        ..Default::default()
    };
    let out = run_svrg(problem, &config, RngStreams::new(seed ^ 0x5eed), &mut NoopObserver)?;
    let value = problem.objective(&out.x)?;
    Ok(Optimum { x: out.x, value })
}

/// Sparse random design with about `density * d` stored entries per row
/// (at least one), values uniform in `[-1, 1]`.
pub fn gen_sparse(n: usize, d: usize, density: f64, kind: LossKind, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 || !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid("need n, d > 0 and density in (0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_row = ((density * d as f64).round() as usize).clamp(1, d);
    let mut indptr = vec![0];
    let mut indices = Vec::with_capacity(n * per_row);
    let mut values = Vec::with_capacity(n * per_row);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut cols = rand::seq::index::sample(&mut rng, d, per_row).into_vec();
        cols.sort_unstable();
        let mut margin = 0.0;
        for j in cols {
            let v: f64 = rng.random_range(-1.0..1.0);
            margin += v;
            indices.push(j);
            values.push(v);
        }
        indptr.push(indices.len());
        let t = margin + 0.1 * gaussian(&mut rng);
        labels.push(if kind.is_classification() {
            if t >= 0.0 { 1.0 } else { -1.0 }
        } else {
            t
        });
    }
    Dataset::from_csr(indptr, indices, values, labels, d)
}
