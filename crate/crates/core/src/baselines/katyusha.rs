use super::{correction_coefficients, Baseline, BaselineConfig, Common};
use crate::adsg::{CostSummary, SolveOutput};
use crate::error::{Error, Result};
use crate::problem::ErmProblem;
use crate::rng::RngStreams;
use crate::schedule::ScheduleKind;
use crate::trace::{InnerStep, Iterate, Observer, RunTracker};

/// Katyusha. Each inner iteration forms
/// `x = tau1 z + tau2 x~ + (1 - tau1 - tau2) y`, a variance-reduced gradient
/// `g` at `x`, then `z <- prox_{alpha P}(z - alpha g)` and
/// `y <- prox_{P / 3L}(x - g / 3L)`.
///
/// Strongly convex: `tau1 = min(sqrt(n mu / 3L), 1/2)` and the next snapshot is
/// the `(1 + alpha mu)^j`-weighted average of the epoch's `y`. Otherwise
/// `tau1 = 2 / (s + 4)` and the average is uniform.
pub fn run_katyusha(
    problem: &ErmProblem<'_>,
    config: &BaselineConfig,
    mut rng: RngStreams,
    observer: &mut dyn Observer,
) -> Result<SolveOutput> {
    let c = Common::new(problem, config, Baseline::Katyusha)?;
    let data = problem.data();
    let reg = problem.regularizer();
    let strong = match config.schedule {
        Some(ScheduleKind::StronglyConvex) if c.mu <= 0.0 => {
            return Err(Error::invalid("strongly convex Katyusha needs mu > 0"));
        }
        Some(ScheduleKind::StronglyConvex) => true,
        Some(ScheduleKind::GeneralConvex) => false,
        None => c.mu > 0.0,
    };
    let l = c.l / config.step_mult;
    let tau2 = 0.5;
    let y_step = 1.0 / (3.0 * l);
    let mut tracker = RunTracker::new(Baseline::Katyusha.name(), problem, &c.x0, observer)?;
    let mut cost = CostSummary::default();

    let mut snapshot = c.x0.clone();
    let mut y = c.x0.clone();
    let mut z = c.x0.clone();
    let mut x = vec![0.0; c.dim];
    let mut g = vec![0.0; c.dim];
    let mut avg = vec![0.0; c.dim];
    let mut sampled = vec![0usize; c.batch];
    let mut coefs = vec![0.0; c.batch];

    for s in 0..config.epochs {
        let tau1 = if strong {
            (c.n as f64 * c.mu / (3.0 * l)).sqrt().min(0.5)
        } else {
            2.0 / (s as f64 + 4.0)
        };
        let alpha = 1.0 / (3.0 * tau1 * l);
        let growth = if strong { 1.0 + alpha * c.mu } else { 1.0 };
        let (full_grad, snap_margins) = problem.gradient_and_margins(&snapshot)?;
        tracker.add_epg(c.n as u64);
        cost.epoch_touched += (data.nnz() + c.dim) as u64;
        tracker.observer().on_epoch_start(s, &snapshot);
        avg.fill(0.0);
        let mut weight = 1.0;
        let mut weight_sum = 0.0;

        for j in 1..=c.inner {
            for t in 0..c.dim {
                x[t] = tau1 * z[t] + tau2 * snapshot[t] + (1.0 - tau1 - tau2) * y[t];
            }
            rng.batch(c.n, &mut sampled);
            let nnz = correction_coefficients(problem, &x, &snap_margins, &sampled, &mut coefs);
            g.copy_from_slice(&full_grad);
            for (&i, &coef) in sampled.iter().zip(&coefs) {
                for (jj, a) in data.row(i).iter() {
                    g[jj] += coef * a;
                }
            }
            for t in 0..c.dim {
                z[t] = reg.prox_coord(t, z[t] - alpha * g[t], alpha);
                y[t] = reg.prox_coord(t, x[t] - y_step * g[t], y_step);
                avg[t] += weight * y[t];
            }
            weight_sum += weight;
            weight *= growth;
            if weight > 1e100 {
                // rescale to keep the running weights representable
                for a in avg.iter_mut() {
                    *a *= 1e-100;
                }
                weight_sum *= 1e-100;
                weight *= 1e-100;
            }
            tracker.add_epg(2 * c.batch as u64);

            let touched = (2 * nnz + 9 * c.dim) as u64;
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
                    y: &y,
                    z: &z,
                });
            }
        }
        if weight_sum > 0.0 {
            for (sn, a) in snapshot.iter_mut().zip(&avg) {
                *sn = a / weight_sum;
            }
        }
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
