use super::{algo_name, AdsgConfig, CostSummary, Setup, SolveOutput, Variant};
use crate::error::Result;
use crate::problem::ErmProblem;
use crate::rng::RngStreams;
use crate::schedule::snapshot_draw;
use crate::trace::{InnerStep, Iterate, Observer, RunTracker};

/// Dense ADSG: every iteration forms `y` and `x` explicitly.
pub fn run_reference(
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
    let mut tracker = RunTracker::new(algo_name(Variant::Reference), problem, &setup.x0, observer)?;
    let mut cost = CostSummary::default();

    let mut x = setup.x0.clone();
    let mut z = setup.x0.clone();
    let mut snapshot = setup.x0.clone();
    let mut y = vec![0.0; dim];
    let mut z_old = vec![0.0; partition.block_size()];
    let mut sampled = vec![0usize; batch];
    let mut coefs = vec![0.0; batch];
    let bf = blocks as f64;

    for s in 0..config.epochs {
        let coeffs = schedule.epoch(s);
        let w = coeffs.weights;
        let (full_grad, snap_margins) = problem.gradient_and_margins(&snapshot)?;
        tracker.add_epg(n as u64);
        cost.epoch_touched += (data.nnz() + dim) as u64;
        let sigma = snapshot_draw(coeffs.theta, m, &mut rng)?;
        tracker.observer().on_epoch_start(s, &snapshot);
        let mut next_snapshot = None;

        for j in 1..=m {
            let k = s * m + j;
            for t in 0..dim {
                y[t] = w.alpha1 * x[t] + w.alpha2 * z[t] + w.alpha3 * snapshot[t];
            }
            rng.batch(n, &mut sampled);
            let l = rng.block(blocks);
            let range = partition.range(l);

            let mut nnz = 0;
            for (c, &i) in coefs.iter_mut().zip(&sampled) {
                let row = data.row(i);
                nnz += row.nnz();
                *c = (problem.sample_derivative(i, row.dot(&y))
                    - problem.sample_derivative(i, snap_margins[i]))
                    / batch as f64;
            }
            // z_l <- prox(z_l - eta v_l)
            let width = range.len();
            z_old[..width].copy_from_slice(&z[range.clone()]);
            let zl = &mut z[range.clone()];
            for (t, zj) in zl.iter_mut().enumerate() {
                *zj -= coeffs.eta * full_grad[range.start + t];
            }
            for (&i, &c) in sampled.iter().zip(&coefs) {
                for (jj, a) in data.row(i).restrict(range.clone()).iter() {
                    zl[jj - range.start] -= coeffs.eta * c * a;
                }
            }
            problem.regularizer().prox_in_place(zl, range.start, coeffs.eta);

            x.copy_from_slice(&y);
            for (t, jj) in range.clone().enumerate() {
                x[jj] += w.alpha2 * bf * (z[jj] - z_old[t]);
            }
            tracker.add_epg(2 * batch as u64);

            let touched = (4 * dim + nnz + 3 * width) as u64;
            cost.record(touched, nnz + partition.block_size() + blocks);
            tracker.observer().on_inner(&InnerStep {
                k,
                epoch: s,
                block: l,
                sampled_nnz: nnz,
                touched,
            });
            if tracker.observer().wants_iterates() {
                tracker.observer().on_iterate(&Iterate {
                    k,
                    epoch: s,
                    x: &x,
                    y: &y,
                    z: &z,
                });
            }
            if j == sigma {
                next_snapshot = Some(x.clone());
            }
        }
        snapshot = next_snapshot.expect("sigma lies in 1..=m");
        tracker.finish_epoch(s + 1, problem, &snapshot)?;
    }

    let epg = tracker.epg();
    Ok(SolveOutput {
        x: snapshot,
        trace: tracker.into_trace(),
        epg,
        cost,
    })
}
