//! Finds the smallest HOOD epoch constant (in steps of 0.25) for which every
//! random start on the ridge family shrinks its gap by at least 8x.

use adsg::reductions::{AdsgHood, Hood};
use adsg::synth::{gen_synthetic, SyntheticSpec};
use adsg::NoopObserver;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const STARTS: u64 = 20;
const TARGET: f64 = 0.125;

fn worst_ratio(c: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (kappa, blocks) in [(100.0, 1), (100.0, 5), (1e3, 5), (1e4, 5), (2e4, 10)] {
        let inst = gen_synthetic(&SyntheticSpec { blocks, ..SyntheticSpec::ridge(200, 50, kappa, 42) }).unwrap();
        let p = inst.problem().unwrap();
        let f_star = inst.optimum.as_ref().unwrap().value;
        let mut hood = AdsgHood::new(blocks, 7);
        hood.epoch_constant = c;
        for s in 0..STARTS {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
            let x0: Vec<f64> = (0..50).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x1 = hood.solve(&p, &x0, &mut NoopObserver).unwrap().x;
            let ratio = (p.objective(&x1).unwrap() - f_star) / (p.objective(&x0).unwrap() - f_star);
            worst = worst.max(ratio);
        }
    }
    worst
}

fn main() {
    // search over c = k / 4
    let (mut lo, mut hi) = (1u32, 40u32);
    while lo < hi {
        let mid = (lo + hi) / 2;
        let r = worst_ratio(mid as f64 / 4.0);
        println!("c = {:.2}: worst ratio {r:.4}", mid as f64 / 4.0);
        if r <= TARGET {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    println!("calibrated c = {:.2} (worst ratio {:.4})", lo as f64 / 4.0, worst_ratio(lo as f64 / 4.0));
}
