use super::{correction_coefficients, Baseline, BaselineConfig, Common};
use crate::adsg::{CostSummary, SolveOutput};
use crate::error::Result;
use crate::problem::ErmProblem;
use crate::rng::RngStreams;
use crate::trace::{InnerStep, Iterate, Observer, RunTracker};

/// Variance-reduced randomized block coordinate descent: each inner iteration
/// samples a mini-batch and a block `l` and sets
/// `[x]_l <- prox([x]_l - eta [v]_l)` with `eta = step_mult / L`.
pub fn run_mrbcd(
    problem: &ErmProblem<'_>,
    config: &BaselineConfig,
    mut rng: RngStreams,
    observer: &mut dyn Observer,
) -> Result<SolveOutput> {
    let c = Common::new(problem, config, Baseline::Mrbcd)?;
    let data = problem.data();
    let reg = problem.regularizer();
    let blocks = c.partition.blocks();
    let eta = config.step_mult / c.l;
    let mut tracker = RunTracker::new(Baseline::Mrbcd.name(), problem, &c.x0, observer)?;
    let mut cost = CostSummary::default();

    let mut x = c.x0.clone();
    let mut v = vec![0.0; c.partition.block_size()];
    let mut sampled = vec![0usize; c.batch];
    let mut coefs = vec![0.0; c.batch];

    for s in 0..config.epochs {
        let (full_grad, snap_margins) = problem.gradient_and_margins(&x)?;
        tracker.add_epg(c.n as u64);
        cost.epoch_touched += (data.nnz() + c.dim) as u64;
        tracker.observer().on_epoch_start(s, &x);

        for j in 1..=c.inner {
            rng.batch(c.n, &mut sampled);
            let l = rng.block(blocks);
            let range = c.partition.range(l);
            let nnz = correction_coefficients(problem, &x, &snap_margins, &sampled, &mut coefs);
            let vl = &mut v[..range.len()];
            vl.copy_from_slice(&full_grad[range.clone()]);
            let mut block_nnz = 0;
            for (&i, &coef) in sampled.iter().zip(&coefs) {
                for (jj, a) in data.row(i).restrict(range.clone()).iter() {
                    vl[jj - range.start] += coef * a;
                    block_nnz += 1;
                }
            }
            for (t, jj) in range.clone().enumerate() {
                x[jj] = reg.prox_coord(jj, x[jj] - eta * vl[t], eta);
            }
            tracker.add_epg(2 * c.batch as u64);

            let touched = (nnz + block_nnz + 2 * range.len()) as u64;
            cost.record(touched, nnz + c.partition.block_size());
            let k = s * c.inner + j;
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
                    y: &x,
                    z: &x,
                });
            }
        }
        tracker.finish_epoch(s + 1, problem, &x)?;
    }

    let epg = tracker.epg();
    Ok(SolveOutput {
        x,
        trace: tracker.into_trace(),
        epg,
        cost,
    })
}
