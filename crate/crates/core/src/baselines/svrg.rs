use super::{correction_coefficients, Baseline, BaselineConfig, Common};
use crate::adsg::{CostSummary, SolveOutput};
use crate::error::Result;
use crate::problem::ErmProblem;
use crate::rng::RngStreams;
use crate::trace::{InnerStep, Iterate, Observer, RunTracker};

/// Proximal SVRG: `x <- prox_{eta P}(x - eta v)` with
/// `v = g~ + (1/b) sum_i (grad f_i(x) - grad f_i(x~))` and `eta = step_mult / L`.
pub fn run_svrg(
    problem: &ErmProblem<'_>,
    config: &BaselineConfig,
    mut rng: RngStreams,
    observer: &mut dyn Observer,
) -> Result<SolveOutput> {
    let c = Common::new(problem, config, Baseline::Svrg)?;
    let data = problem.data();
    let reg = problem.regularizer();
    let eta = config.step_mult / c.l;
    let mut tracker = RunTracker::new(Baseline::Svrg.name(), problem, &c.x0, observer)?;
    let mut cost = CostSummary::default();

    let mut x = c.x0.clone();
    let mut v = vec![0.0; c.dim];
    let mut sampled = vec![0usize; c.batch];
    let mut coefs = vec![0.0; c.batch];

    for s in 0..config.epochs {
        let snapshot = x.clone();
        let (full_grad, snap_margins) = problem.gradient_and_margins(&snapshot)?;
        tracker.add_epg(c.n as u64);
        cost.epoch_touched += (data.nnz() + c.dim) as u64;
        tracker.observer().on_epoch_start(s, &snapshot);

        for j in 1..=c.inner {
            rng.batch(c.n, &mut sampled);
            let nnz = correction_coefficients(problem, &x, &snap_margins, &sampled, &mut coefs);
            v.copy_from_slice(&full_grad);
            for (&i, &coef) in sampled.iter().zip(&coefs) {
                for (jj, a) in data.row(i).iter() {
                    v[jj] += coef * a;
                }
            }
            for (jj, (xj, vj)) in x.iter_mut().zip(&v).enumerate() {
                *xj = reg.prox_coord(jj, *xj - eta * vj, eta);
            }
            tracker.add_epg(2 * c.batch as u64);

            let touched = (2 * nnz + 2 * c.dim) as u64;
            cost.record(touched, nnz + c.dim);
            let k = s * c.inner + j;
            tracker.observer().on_inner(&InnerStep {
                k,
                epoch: s,
                block: 0,
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
