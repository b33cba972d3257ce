//! Independent reference solvers used as test oracles. None of them shares
//! code with the library's optimizers.

#![allow(dead_code)]

use adsg::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_vec(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn dense(data: &Dataset) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(data.n_samples(), data.n_features());
    for i in 0..data.n_samples() {
        for (j, v) in data.row(i).iter() {
            a[(i, j)] = v;
        }
    }
    a
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Cyclic coordinate descent for `(1/2n)||Ax - y||^2 + l1 ||x||_1`, run until
/// a full sweep moves no coordinate by more than `tol`.
pub fn lasso_cd(data: &Dataset, l1: f64, tol: f64) -> Vec<f64> {
    let a = dense(data);
    let (n, d) = a.shape();
    let nf = n as f64;
    let y = DVector::from_column_slice(data.labels());
    let mut x = vec![0.0; d];
    let mut r = -y.clone();
    let col_sq: Vec<f64> = (0..d).map(|j| a.column(j).norm_squared() / nf).collect();
    for _ in 0..1_000_000 {
        let mut moved: f64 = 0.0;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let g = a.column(j).dot(&r) / nf;
            let new = soft(col_sq[j] * x[j] - g, l1) / col_sq[j];
            let delta = new - x[j];
            if delta != 0.0 {
                r.axpy(delta, &a.column(j), 1.0);
                x[j] = new;
                moved = moved.max(delta.abs());
            }
        }
        if moved < tol {
            break;
        }
    }
    x
}

/// Stochastic dual coordinate ascent for the l2-regularized hinge loss
/// `(1/n) sum max(0, 1 - y_i a_i^T x) + (l2/2)||x||^2`. Sweeps cyclically until
/// the duality gap drops below `gap_tol`; returns the primal point and the gap.
pub fn svm_sdca(data: &Dataset, l2: f64, gap_tol: f64) -> (Vec<f64>, f64) {
    let n = data.n_samples();
    let d = data.n_features();
    let ln = l2 * n as f64;
    let mut beta = vec![0.0; n];
    let mut w = vec![0.0; d];
    let norms: Vec<f64> = (0..n).map(|i| data.row(i).norm_sq()).collect();
    let mut gap = f64::INFINITY;
    for _ in 0..200_000 {
        for i in 0..n {
            if norms[i] == 0.0 {
                continue;
            }
            let y = data.label(i);
            let margin = y * data.row(i).dot(&w);
            let new = (beta[i] + (1.0 - margin) * ln / norms[i]).clamp(0.0, 1.0);
            let delta = new - beta[i];
            if delta != 0.0 {
                for (j, a) in data.row(i).iter() {
                    w[j] += delta * y * a / ln;
                }
                beta[i] = new;
            }
        }
        let reg = 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
        let primal = (0..n)
            .map(|i| (1.0 - data.label(i) * data.row(i).dot(&w)).max(0.0))
            .sum::<f64>()
            / n as f64
            + reg;
        let dual = beta.iter().sum::<f64>() / n as f64 - reg;
        gap = primal - dual;
        if gap < gap_tol {
            break;
        }
    }
    (w, gap)
}

/// ADMM for `(1/n)||Ax - y||_1 + l1 ||x||_1` with the splitting `z = Ax - y`,
/// `w = x`. Returns the sparse copy `w` and a certified lower bound on the
/// optimum from the dual `max -(1/n) u^T y` s.t. `|u| <= 1`, `||A^T u / n||_inf <= l1`,
/// evaluated at the rescaled ADMM multiplier.
pub fn lad_admm(data: &Dataset, l1: f64, rho: f64, iterations: usize) -> (Vec<f64>, f64) {
    let a = dense(data);
    let (n, d) = a.shape();
    let nf = n as f64;
    let y = DVector::from_column_slice(data.labels());
    let system = (a.transpose() * &a) * rho + DMatrix::identity(d, d) * rho;
    let chol = system.cholesky().expect("positive definite");
    let mut z = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    let mut w = DVector::zeros(d);
    let mut v = DVector::zeros(d);
    for _ in 0..iterations {
        let rhs = (a.transpose() * (&y + &z - &u) + (&w - &v)) * rho;
        let x = chol.solve(&rhs);
        let ax = &a * &x - &y;
        z = (&ax + &u).map(|t| soft(t, 1.0 / (nf * rho)));
        w = (&x + &v).map(|t| soft(t, l1 / rho));
        u += &ax - &z;
        v += &x - &w;
    }
    let mut best = f64::NEG_INFINITY;
    for sign in [1.0, -1.0] {
        let dual = u.map(|t| (sign * nf * rho * t).clamp(-1.0, 1.0));
        let corr = (a.transpose() * &dual).amax() / nf;
        let c = if corr > l1 { l1 / corr } else { 1.0 };
        best = best.max(-c * dual.dot(&y) / nf);
    }
    (w.as_slice().to_vec(), best)
}
