use super::{algo_name, AdsgConfig, CostSummary, Setup, SolveOutput, Variant};
use crate::error::{Error, Result};
use crate::problem::ErmProblem;
use crate::rng::RngStreams;
use crate::schedule::snapshot_draw;
use crate::trace::{InnerStep, Iterate, Observer, RunTracker};

/// Rescaled ADSG. Within an epoch, with `beta_{-1} = 1` and `beta_j = a1 beta_{j-1}`:
///
/// ```text
/// y_k = beta_{j-1} u_{j-1} + gamma zhat_{j-1} + xdot
/// x_k = beta_{j-1} u_j     + gamma zhat_j     + xdot
/// z_k = zhat_j + xdot
/// ```
///
/// so only the selected block of `u` and `zhat` changes per iteration.
/// Fails with [`Error::NumericalBreakdown`] once `1 / beta` is no longer finite.
pub fn run_efficient(
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
    let mut tracker = RunTracker::new(algo_name(Variant::Efficient), problem, &setup.x0, observer)?;
    let mut cost = CostSummary::default();
    let bf = blocks as f64;

    let mut xdot = setup.x0.clone();
    // x and z at the end of the previous epoch
    let mut x_last = setup.x0.clone();
    let mut z_last = setup.x0.clone();
    let mut zhat = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    let mut sampled = vec![0usize; batch];
    let mut coefs = vec![0.0; batch];
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
            u[t] = x_last[t] - gamma * zhat[t] - xdot[t];
        }
        cost.epoch_touched += (data.nnz() + 4 * dim) as u64;
        let sigma = snapshot_draw(coeffs.theta, m, &mut rng)?;
        tracker.observer().on_epoch_start(s, &xdot);
        let mut next_snapshot = None;
        let mut beta = w.alpha1; // beta_{j-1} for j = 1

        for j in 1..=m {
            let k = s * m + j;
            let inv_beta = 1.0 / beta;
            if !(beta > 0.0) || !inv_beta.is_finite() {
                return Err(Error::NumericalBreakdown {
                    epoch: s,
                    iteration: j,
                    message: format!("rescaling factor beta = {beta:e} cannot be inverted"),
                });
            }
            let wants = tracker.observer().wants_iterates();
            if wants {
                for t in 0..dim {
                    dense_y[t] = beta * u[t] + gamma * zhat[t] + xdot[t];
                }
            }

            rng.batch(n, &mut sampled);
            let l = rng.block(blocks);
            let range = partition.range(l);

            let mut nnz = 0;
            for (c, &i) in coefs.iter_mut().zip(&sampled) {
                let row = data.row(i);
                nnz += row.nnz();
                let margin_y = beta * row.dot(&u) + gamma * row.dot(&zhat) + snap_margins[i];
                *c = (problem.sample_derivative(i, margin_y)
                    - problem.sample_derivative(i, snap_margins[i]))
                    / batch as f64;
            }

            // v_l, staged in dense_z's block to avoid an allocation
            let width = range.len();
            let v = &mut dense_z[range.clone()];
            v.copy_from_slice(&full_grad[range.clone()]);
            for (&i, &c) in sampled.iter().zip(&coefs) {
                for (jj, a) in data.row(i).restrict(range.clone()).iter() {
                    v[jj - range.start] += c * a;
                }
            }
            let reg = problem.regularizer();
            for (t, jj) in range.clone().enumerate() {
                let z_new = reg.prox_coord(jj, zhat[jj] + xdot[jj] - coeffs.eta * v[t], coeffs.eta);
                let zhat_new = z_new - xdot[jj];
                u[jj] += step * inv_beta * (zhat_new - zhat[jj]);
                zhat[jj] = zhat_new;
            }
            tracker.add_epg(2 * batch as u64);

            let touched = (3 * nnz + 2 * width) as u64;
            cost.record(touched, nnz + partition.block_size() + blocks);
            tracker.observer().on_inner(&InnerStep {
                k,
                epoch: s,
                block: l,
                sampled_nnz: nnz,
                touched,
            });

            if wants || j == sigma {
                for t in 0..dim {
                    dense_x[t] = beta * u[t] + gamma * zhat[t] + xdot[t];
                }
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
            if j < m {
                beta *= w.alpha1;
            }
        }

        // flush the implicit state: beta still holds beta_{m-1}
        for t in 0..dim {
            x_last[t] = beta * u[t] + gamma * zhat[t] + xdot[t];
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
