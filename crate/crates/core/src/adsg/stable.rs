use super::{algo_name, AdsgConfig, CostSummary, Setup, SolveOutput, Variant};
use crate::data::{BlockPartition, Row};
use crate::error::Result;
use crate::problem::ErmProblem;
use crate::rng::RngStreams;
use crate::schedule::snapshot_draw;
use crate::trace::{InnerStep, Iterate, Observer, RunTracker};

fn pow(base: f64, exp: u64) -> f64 {
    base.powi(exp.min(i32::MAX as u64) as i32)
}

/// `Xi` stored as `[Xi]_l = a1^omega_l [xi]_l`, so multiplying all of `Xi` by
/// `a1` costs O(B) instead of O(d).
#[derive(Debug, Clone)]
pub(crate) struct LazyMomentum {
    a1: f64,
    xi: Vec<f64>,
    omega: Vec<u64>,
    /// `a1^(omega_l + 1)`, valid between `begin` and `commit`.
    scale: Vec<f64>,
}

impl LazyMomentum {
    pub fn new(dim: usize, blocks: usize) -> Self {
        Self {
            a1: 1.0,
            xi: vec![0.0; dim],
            omega: vec![0; blocks],
            scale: vec![1.0; blocks],
        }
    }

    /// Starts an epoch with `Xi = xi0` and all counters at zero.
    pub fn reset(&mut self, a1: f64, xi0: impl IntoIterator<Item = f64>) {
        self.a1 = a1;
        for (dst, v) in self.xi.iter_mut().zip(xi0) {
            *dst = v;
        }
        self.omega.fill(0);
    }

    #[cfg(test)]
    pub fn omega(&self, l: usize) -> u64 {
        self.omega[l]
    }

    pub fn begin(&mut self) {
        for (sc, &om) in self.scale.iter_mut().zip(&self.omega) {
            *sc = pow(self.a1, om + 1);
        }
    }

    /// `a1 <a, Xi>` over a sparse row, i.e. the `Xi` part of `a^T y`.
    pub fn shifted_dot(&self, row: &Row<'_>, partition: &BlockPartition) -> f64 {
        row.iter()
            .map(|(j, a)| self.scale[partition.block_of(j)] * a * self.xi[j])
            .sum()
    }

    /// `[Xi]_j <- a1 [Xi]_j + delta` for a coordinate `j` of the selected block `l`.
    pub fn update(&mut self, l: usize, j: usize, delta: f64) {
        self.xi[j] = self.scale[l] * self.xi[j] + delta;
    }

    /// Ends an iteration that selected block `l`: every other block falls one step further behind.
    pub fn commit(&mut self, l: usize) {
        for (b, om) in self.omega.iter_mut().enumerate() {
            *om = if b == l { 0 } else { *om + 1 };
        }
    }

    /// Writes `lead * Xi + gamma zhat + xdot`.
    pub fn materialize(
        &self,
        out: &mut [f64],
        lead: f64,
        gamma: f64,
        zhat: &[f64],
        xdot: &[f64],
        partition: &BlockPartition,
    ) {
        for (l, &om) in self.omega.iter().enumerate() {
            let f = lead * pow(self.a1, om);
            for t in partition.range(l) {
                out[t] = f * self.xi[t] + gamma * zhat[t] + xdot[t];
            }
        }
    }
}

/// Division-free rescaled ADSG. The efficient form's `beta_{j-1} u_j` is kept
/// as `Xi`, which obeys `Xi_j = a1 Xi_{j-1} + (a2 B - gamma) dzhat`, in a
/// [`LazyMomentum`]. `y = a1 Xi + gamma zhat + xdot` and `x = Xi + gamma zhat + xdot`.
pub fn run_stable(
    problem: &ErmProblem<'_>,
    config: &AdsgConfig,
    mut rng: RngStreams,
    observer: &mut dyn Observer,
) -> Result<SolveOutput> {
    let setup = Setup::new(problem, config)?;
    let Setup {
        partition,
        schedule,
        n,
        dim,
        m,
        blocks,
        batch,
        ..
    } = &setup;
    let (n, dim, m, blocks, batch) = (*n, *dim, *m, *blocks, *batch);
    let data = problem.data();
    let block_size = partition.block_size();
    let mut tracker = RunTracker::new(algo_name(Variant::Stable), problem, &setup.x0, observer)?;
    let mut cost = CostSummary::default();
    let bf = blocks as f64;

    let mut xdot = setup.x0.clone();
    let mut x_last = setup.x0.clone();
    let mut z_last = setup.x0.clone();
    let mut zhat = vec![0.0; dim];
    let mut lazy = LazyMomentum::new(dim, blocks);
    let mut sampled = vec![0usize; batch];
    let mut coefs = vec![0.0; batch];
    let mut v = vec![0.0; block_size];
    let mut dense_x = vec![0.0; dim];
    let mut dense_y = vec![0.0; dim];
    let mut dense_z = vec![0.0; dim];

    for s in 0..config.epochs {
        let coeffs = schedule.epoch(s);
        let w = coeffs.weights;
        let gamma = coeffs.gamma();
        let step = w.alpha2 * bf - gamma;
        let (full_grad, snap_margins) = problem.gradient_and_margins(&xdot)?;
        tracker.add_epg(n as u64);
        for t in 0..dim {
            zhat[t] = z_last[t] - xdot[t];
        }
        lazy.reset(w.alpha1, (0..dim).map(|t| x_last[t] - gamma * zhat[t] - xdot[t]));
        cost.epoch_touched += (data.nnz() + 4 * dim + blocks) as u64;
        let sigma = snapshot_draw(coeffs.theta, m, &mut rng)?;
        tracker.observer().on_epoch_start(s, &xdot);
        let mut next_snapshot = None;

        for j in 1..=m {
            let k = s * m + j;
            lazy.begin();
            let wants = tracker.observer().wants_iterates();
            if wants {
                lazy.materialize(&mut dense_y, w.alpha1, gamma, &zhat, &xdot, partition);
            }

            rng.batch(n, &mut sampled);
            let l = rng.block(blocks);
            let range = partition.range(l);

            let mut nnz = 0;
            for (c, &i) in coefs.iter_mut().zip(&sampled) {
                let row = data.row(i);
                nnz += row.nnz();
                let margin_y = lazy.shifted_dot(&row, partition) + gamma * row.dot(&zhat) + snap_margins[i];
                *c = (problem.sample_derivative(i, margin_y)
                    - problem.sample_derivative(i, snap_margins[i]))
                    / batch as f64;
            }

            let width = range.len();
            let vl = &mut v[..width];
            vl.copy_from_slice(&full_grad[range.clone()]);
            let mut block_nnz = 0;
            for (&i, &c) in sampled.iter().zip(&coefs) {
                for (jj, a) in data.row(i).restrict(range.clone()).iter() {
                    vl[jj - range.start] += c * a;
                    block_nnz += 1;
                }
            }
            let reg = problem.regularizer();
            for (t, jj) in range.clone().enumerate() {
                let z_new = reg.prox_coord(jj, zhat[jj] + xdot[jj] - coeffs.eta * vl[t], coeffs.eta);
                let zhat_new = z_new - xdot[jj];
                lazy.update(l, jj, step * (zhat_new - zhat[jj]));
                zhat[jj] = zhat_new;
            }
            lazy.commit(l);
            tracker.add_epg(2 * batch as u64);

            // B scales + 2 reads per sampled entry + the block's gradient and prox + B counters
            let touched = (2 * nnz + block_nnz + 3 * width + 2 * blocks) as u64;
            cost.record(touched, nnz + block_size + blocks);
            tracker.observer().on_inner(&InnerStep {
                k,
                epoch: s,
                block: l,
                sampled_nnz: nnz,
                touched,
            });

            if wants || j == sigma {
                lazy.materialize(&mut dense_x, 1.0, gamma, &zhat, &xdot, partition);
                if j == sigma {
                    next_snapshot = Some(dense_x.clone());
                    cost.epoch_touched += dim as u64;
                }
            }
            if wants {
                for t in 0..dim {
                    dense_z[t] = zhat[t] + xdot[t];
                }
                tracker.observer().on_iterate(&Iterate {
                    k,
                    epoch: s,
                    x: &dense_x,
                    y: &dense_y,
                    z: &dense_z,
                });
            }
        }

        lazy.materialize(&mut x_last, 1.0, gamma, &zhat, &xdot, partition);
        for t in 0..dim {
            z_last[t] = zhat[t] + xdot[t];
        }
        cost.epoch_touched += 2 * dim as u64;
        xdot = next_snapshot.expect("sigma lies in 1..=m");
        tracker.finish_epoch(s + 1, problem, &xdot)?;
    }

    let epg = tracker.epg();
    Ok(SolveOutput {
        x: xdot,
        trace: tracker.into_trace(),
        epg,
        cost,
    })
}
