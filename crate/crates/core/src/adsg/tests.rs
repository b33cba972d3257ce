use super::stable::LazyMomentum;
use super::*;
use crate::data::Dataset;
use crate::problem::{Loss, LossKind, Regularizer};
use crate::schedule::{coupling_combination, CouplingWeights};
use crate::trace::{IterateRecorder, NoopObserver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(n: usize, d: usize, density: f64, classify: bool, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..d)
                .map(|_| if rng.random_bool(density) { rng.random_range(-1.0..1.0) } else { 0.0 })
                .collect();
            // keep every row nonempty
            let j = rng.random_range(0..d);
            row[j] = rng.random_range(0.5..1.5);
            row
        })
        .collect();
    let labels = (0..n)
        .map(|_| {
            if classify {
                if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect();
    Dataset::from_dense(&rows, labels).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn record(problem: &ErmProblem<'_>, config: &AdsgConfig, variant: Variant, seed: u64) -> (IterateRecorder, SolveOutput) {
    let mut rec = IterateRecorder::default();
    let out = run(problem, config, variant, RngStreams::new(seed), &mut rec).unwrap();
    (rec, out)
}

#[test]
fn estimator_is_unbiased_over_samples() {
    let data = random_data(10, 6, 0.7, true, 1);
    let problem = ErmProblem::new(&data, Loss::logistic(), Regularizer::none()).unwrap();
    let partition = BlockPartition::new(6, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let snap: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g_snap = problem.gradient(&snap).unwrap();
    let g_y = problem.gradient(&y).unwrap();
    for l in 0..3 {
        let mut avg = vec![0.0; 2];
        for i in 0..10 {
            let v = stochastic_block_gradient(&problem, &y, &snap, &g_snap, &[i], &partition, l).unwrap();
            for (a, b) in avg.iter_mut().zip(&v) {
                *a += b / 10.0;
            }
        }
        assert!(max_abs_diff(&avg, &g_y[partition.range(l)]) <= 1e-12);
    }
}

#[test]
fn estimator_is_exact_at_snapshot() {
    let data = random_data(10, 6, 0.7, false, 3);
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::new(0.1, 0.1)).unwrap();
    let partition = BlockPartition::new(6, 2).unwrap();
    let snap = vec![0.3, -0.2, 0.5, 0.0, 1.0, -1.0];
    let g = problem.gradient(&snap).unwrap();
    for i in 0..10 {
        let v = stochastic_block_gradient(&problem, &snap, &snap, &g, &[i], &partition, 1).unwrap();
        assert_eq!(v, g[3..6].to_vec());
    }
}

#[test]
fn full_batch_gives_true_block_gradient() {
    let data = random_data(10, 6, 0.7, true, 4);
    let problem = ErmProblem::new(&data, Loss::smoothed(LossKind::Hinge, 0.3), Regularizer::none()).unwrap();
    let partition = BlockPartition::new(6, 2).unwrap();
    let y = vec![0.1, 0.4, -0.3, 0.2, 0.0, 0.7];
    let snap = vec![0.0; 6];
    let g_snap = problem.gradient(&snap).unwrap();
    let batch: Vec<usize> = (0..10).collect();
    let v = stochastic_block_gradient(&problem, &y, &snap, &g_snap, &batch, &partition, 0).unwrap();
    let g = problem.gradient(&y).unwrap();
    assert!(max_abs_diff(&v, &g[0..3]) <= 1e-12);
}

#[test]
fn estimator_rejects_bad_input() {
    let data = random_data(4, 4, 0.5, false, 5);
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::none()).unwrap();
    let partition = BlockPartition::new(4, 2).unwrap();
    let x = vec![0.0; 4];
    assert!(stochastic_block_gradient(&problem, &x, &x, &x, &[], &partition, 0).is_err());
    assert!(stochastic_block_gradient(&problem, &x, &x, &x, &[9], &partition, 0).is_err());
    assert!(stochastic_block_gradient(&problem, &x, &x, &x, &[0], &partition, 2).is_err());
    assert!(stochastic_block_gradient(&problem, &x[..3], &x, &x, &[0], &partition, 0).is_err());
}

#[test]
fn three_forms_agree_on_sparse_instance() {
    let data = random_data(40, 16, 0.3, true, 6);
    let problem = ErmProblem::new(&data, Loss::logistic(), Regularizer::new(1e-3, 1e-2)).unwrap();
    let config = AdsgConfig { blocks: 4, batch: 1, epochs: 2, ..Default::default() };
    let (r, out_r) = record(&problem, &config, Variant::Reference, 11);
    let (e, out_e) = record(&problem, &config, Variant::Efficient, 11);
    let (s, out_s) = record(&problem, &config, Variant::Stable, 11);
    assert_eq!(r.xs.len(), 2 * 4 * 40);
    for (k, x) in r.xs.iter().enumerate() {
        assert!(max_abs_diff(x, &e.xs[k]) <= 1e-8, "efficient x at k={}", k + 1);
        assert!(max_abs_diff(x, &s.xs[k]) <= 1e-8, "stable x at k={}", k + 1);
        assert!(max_abs_diff(&r.ys[k], &s.ys[k]) <= 1e-8);
        assert!(max_abs_diff(&r.zs[k], &e.zs[k]) <= 1e-8);
    }
    assert!(max_abs_diff(&out_r.x, &out_e.x) <= 1e-8);
    assert!(max_abs_diff(&out_r.x, &out_s.x) <= 1e-8);
    assert_eq!(out_r.epg, out_s.epg);
}

#[test]
fn epoch_handoff_matches_reference() {
    let data = random_data(20, 8, 0.5, false, 7);
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::new(0.0, 0.05)).unwrap();
    let config = AdsgConfig { blocks: 2, batch: 2, epochs: 5, ..Default::default() };
    let m = 2 * 20;
    let (r, _) = record(&problem, &config, Variant::Reference, 8);
    for variant in [Variant::Efficient, Variant::Stable] {
        let (o, _) = record(&problem, &config, variant, 8);
        for s in 1..=5 {
            let k = s * m;
            assert!(max_abs_diff(&r.xs[k - 1], &o.xs[k - 1]) <= 1e-9, "{variant} at epoch end {s}");
            assert!(max_abs_diff(&r.snapshots[s - 1], &o.snapshots[s - 1]) <= 1e-9);
        }
    }
}

#[test]
fn single_block_efficient_z_is_shifted() {
    let data = random_data(15, 5, 0.6, false, 9);
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::new(0.0, 0.1)).unwrap();
    let config = AdsgConfig { blocks: 1, batch: 1, epochs: 1, ..Default::default() };
    let (r, _) = record(&problem, &config, Variant::Reference, 10);
    let (e, _) = record(&problem, &config, Variant::Efficient, 10);
    for (zr, ze) in r.zs.iter().zip(&e.zs) {
        assert!(max_abs_diff(zr, ze) <= 1e-10);
    }
}

#[test]
fn lazy_momentum_matches_explicit_shadow() {
    let partition = BlockPartition::new(8, 4).unwrap();
    let a1 = 0.8;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let xi0: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut lazy = LazyMomentum::new(8, 4);
    lazy.reset(a1, xi0.iter().copied());
    let mut shadow = xi0.clone();
    let zero = vec![0.0; 8];
    let mut out = vec![0.0; 8];
    // block 0 is skipped for the first three iterations
    let picks = [1, 2, 3, 0, 2, 2, 1, 3, 3, 0];
    for (it, &l) in picks.iter().enumerate() {
        lazy.begin();
        for v in shadow.iter_mut() {
            *v *= a1;
        }
        for j in partition.range(l) {
            let delta = rng.random_range(-0.5..0.5);
            lazy.update(l, j, delta);
            shadow[j] += delta;
        }
        lazy.commit(l);
        if it == 2 {
            assert_eq!(lazy.omega(0), 3);
        }
        assert_eq!(lazy.omega(l), 0);
        lazy.materialize(&mut out, 1.0, 0.0, &zero, &zero, &partition);
        assert!(max_abs_diff(&out, &shadow) <= 1e-14);
    }
}

#[test]
fn lazy_powers_stay_bounded_over_long_staleness() {
    let partition = BlockPartition::new(4, 2).unwrap();
    let mut lazy = LazyMomentum::new(4, 2);
    lazy.reset(0.999, [1.0; 4]);
    for _ in 0..100_000 {
        lazy.begin();
        lazy.commit(1);
    }
    let mut out = vec![0.0; 4];
    let zero = vec![0.0; 4];
    lazy.materialize(&mut out, 1.0, 0.0, &zero, &zero, &partition);
    assert!(out.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    assert_eq!(lazy.omega(0), 100_000);
}

#[test]
fn first_inner_step_is_a_gradient_step() {
    // scalar least squares: F(x) = (1/2n) sum (a_i x - y_i)^2
    let a = [1.0, 2.0, -0.5, 1.5];
    let y = [1.0, 3.0, 0.5, -1.0];
    let rows: Vec<Vec<f64>> = a.iter().map(|&v| vec![v]).collect();
    let data = Dataset::from_dense(&rows, y.to_vec()).unwrap();
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::none())
        .unwrap()
        .with_mu(0.5)
        .unwrap();
    let config = AdsgConfig { blocks: 1, batch: 4, epochs: 1, ..Default::default() };
    let (rec, _) = record(&problem, &config, Variant::Reference, 13);

    let n = a.len() as f64;
    let grad0: f64 = a.iter().zip(&y).map(|(ai, yi)| ai * (0.0 - yi)).sum::<f64>() / n;
    let l = a.iter().map(|v| v * v).fold(0.0, f64::max);
    let kappa = 2.0 * l / 0.5;
    let alpha2 = (n / kappa).sqrt().min(1.0) / 2.0;
    let l_bar = l / 0.5 + l;
    // x_1 = y_1 + a2 (z_1 - z_0) with y_1 = x0 = 0 and z_1 = -eta grad
    let expected = -alpha2 * grad0 / (l_bar * alpha2);
    assert!((rec.xs[0][0] - expected).abs() <= 1e-14);
    let f0 = problem.objective(&[0.0]).unwrap();
    let f1 = problem.objective(&rec.xs[0]).unwrap();
    assert!(f1 < f0);
}

#[test]
fn iterates_are_recorded_convex_combinations() {
    let data = random_data(6, 4, 0.8, false, 14);
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::new(0.0, 0.05)).unwrap();
    let blocks = 2;
    let config = AdsgConfig { blocks, batch: 1, epochs: 2, ..Default::default() };
    let (rec, _) = record(&problem, &config, Variant::Reference, 15);
    let setup = Setup::new(&problem, &config).unwrap();
    let weights: Vec<CouplingWeights> = (0..2).map(|s| setup.schedule.weights(s)).collect();
    let m = setup.m;
    let mut zs = vec![vec![0.0; 4]];
    zs.extend(rec.zs.iter().cloned());
    for k in 1..=2 * m {
        let comb = coupling_combination(&weights, blocks, m, k).unwrap();
        assert!((comb.total() - 1.0).abs() <= 1e-12);
        assert!(comb.min_weight() >= -1e-15);
        let mut x = vec![0.0; 4];
        for (w, snap) in comb.snapshot_weights.iter().zip(&rec.snapshots) {
            for (xi, si) in x.iter_mut().zip(snap) {
                *xi += w * si;
            }
        }
        for (w, z) in comb.z_weights.iter().zip(&zs) {
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi += w * zi;
            }
        }
        assert!(max_abs_diff(&x, &rec.xs[k - 1]) <= 1e-10, "k = {k}");
    }
}

#[test]
fn efficient_breaks_down_without_historical_weight() {
    // B = 1 with n >= kappa gives a1 = 0, so the rescaling cannot be inverted
    let data = random_data(30, 3, 1.0, false, 16);
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::new(0.0, 10.0)).unwrap();
    let config = AdsgConfig { blocks: 1, batch: 1, epochs: 1, ..Default::default() };
    let err = run(&problem, &config, Variant::Efficient, RngStreams::new(1), &mut NoopObserver).unwrap_err();
    assert!(matches!(err, Error::NumericalBreakdown { .. }), "{err}");
    let ok = run(&problem, &config, Variant::Stable, RngStreams::new(1), &mut NoopObserver).unwrap();
    let reference = run(&problem, &config, Variant::Reference, RngStreams::new(1), &mut NoopObserver).unwrap();
    assert!(max_abs_diff(&ok.x, &reference.x) <= 1e-10);
}

#[test]
fn efficient_breaks_down_on_long_epochs() {
    // a1^(m-1) underflows once m is in the thousands
    let data = random_data(2000, 20, 0.2, true, 17);
    let problem = ErmProblem::new(&data, Loss::logistic(), Regularizer::new(0.0, 1e-2)).unwrap();
    let config = AdsgConfig { blocks: 2, batch: 1, epochs: 1, ..Default::default() };
    let err = run(&problem, &config, Variant::Efficient, RngStreams::new(2), &mut NoopObserver).unwrap_err();
    assert!(matches!(err, Error::NumericalBreakdown { .. }));
    assert!(run(&problem, &config, Variant::Stable, RngStreams::new(2), &mut NoopObserver).is_ok());
}

#[test]
fn stable_cost_per_iteration_is_bounded() {
    struct Check {
        omega: usize,
        blocks: usize,
        worst: f64,
    }
    impl Observer for Check {
        fn on_inner(&mut self, step: &crate::trace::InnerStep) {
            let bound = (step.sampled_nnz + self.omega + self.blocks) as f64;
            self.worst = self.worst.max(step.touched as f64 / bound);
        }
    }
    let data = random_data(60, 400, 0.02, false, 18);
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::new(1e-3, 0.1)).unwrap();
    let config = AdsgConfig { blocks: 20, batch: 1, epochs: 1, ..Default::default() };
    let mut check = Check { omega: 20, blocks: 20, worst: 0.0 };
    let out = run(&problem, &config, Variant::Stable, RngStreams::new(3), &mut check).unwrap();
    assert!(check.worst <= 4.0);
    assert_eq!(out.cost.iterations, 20 * 60);
    assert!(out.cost.max_ratio <= 4.0);
}

#[test]
fn epg_follows_counting_rule() {
    let data = random_data(10, 4, 0.8, false, 19);
    let problem = ErmProblem::new(&data, Loss::squared(), Regularizer::new(0.0, 0.1)).unwrap();
    for variant in [Variant::Reference, Variant::Efficient, Variant::Stable] {
        let config = AdsgConfig { blocks: 2, batch: 1, epochs: 3, ..Default::default() };
        let out = run(&problem, &config, variant, RngStreams::new(4), &mut NoopObserver).unwrap();
        let epgs: Vec<u64> = out.trace.iter().map(|r| r.epg).collect();
        assert_eq!(epgs, vec![50, 100, 150]);
        assert_eq!(out.trace.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(out.trace.iter().all(|r| r.algo == format!("adsg-{variant}")));
    }
}

#[test]
fn rejects_nonsmooth_and_degenerate_problems() {
    let data = random_data(5, 3, 1.0, true, 20);
    let hinge = ErmProblem::new(&data, Loss::new(LossKind::Hinge), Regularizer::new(0.0, 1.0)).unwrap();
    let config = AdsgConfig::default();
    assert!(run(&hinge, &config, Variant::Stable, RngStreams::new(1), &mut NoopObserver).is_err());
    let zeros = Dataset::from_csr(vec![0, 0, 0], vec![], vec![], vec![1.0, -1.0], 3).unwrap();
    let empty = ErmProblem::new(&zeros, Loss::logistic(), Regularizer::new(0.0, 1.0)).unwrap();
    assert!(run(&empty, &config, Variant::Reference, RngStreams::new(1), &mut NoopObserver).is_err());
    let general = ErmProblem::new(&data, Loss::logistic(), Regularizer::none()).unwrap();
    let strong = AdsgConfig { schedule: Some(ScheduleKind::StronglyConvex), ..Default::default() };
    assert!(run(&general, &strong, Variant::Reference, RngStreams::new(1), &mut NoopObserver).is_err());
    let bad_x0 = AdsgConfig { x0: Some(vec![0.0; 2]), ..Default::default() };
    assert!(matches!(
        run(&general, &bad_x0, Variant::Reference, RngStreams::new(1), &mut NoopObserver),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn general_convex_schedule_runs_without_strong_convexity() {
    let data = random_data(30, 6, 0.6, true, 21);
    let problem = ErmProblem::new(&data, Loss::logistic(), Regularizer::new(1e-3, 0.0)).unwrap();
    let config = AdsgConfig { blocks: 2, epochs: 8, ..Default::default() };
    let out = run(&problem, &config, Variant::Stable, RngStreams::new(5), &mut NoopObserver).unwrap();
    let first = out.trace.first().unwrap().objective;
    let last = out.trace.last().unwrap().objective;
    assert!(last < first);
    assert!(last < std::f64::consts::LN_2);
}

#[test]
fn variant_names_round_trip() {
    for v in [Variant::Reference, Variant::Efficient, Variant::Stable] {
        assert_eq!(v.name().parse::<Variant>().unwrap(), v);
    }
    assert!("fast".parse::<Variant>().is_err());
}
