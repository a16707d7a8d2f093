use diqkd_core::entropy::{chsh_analytic_bound, entropy_bound_for, EntropyOptions};
use diqkd_core::npa::{Extra, Level};
use diqkd_core::quantum::build_chsh;
use diqkd_core::rates::Protocol;
use diqkd_core::scenario::{degrade, NoiseParams};
use diqkd_core::{Behavior, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// CHSH realization mixed with white noise to reach `2 sqrt 2 * v`.
fn chsh_behavior(v: f64) -> Behavior {
    degrade(&build_chsh(), NoiseParams::new(1.0, v).unwrap()).unwrap()
}

#[test]
fn chsh_bound_stays_below_the_analytic_curve() {
    let mut opts = EntropyOptions::desk(0);
    opts.level = Level::new(2);
    let tsirelson = 2.0 * 2f64.sqrt();
    for v in [0.75, 0.8, 0.9, 0.95, 1.0] {
        let s = tsirelson * v;
        let bound = entropy_bound_for(&chsh_behavior(v), &opts).unwrap().bits;
        assert!(bound <= chsh_analytic_bound(s).unwrap() + 1e-6, "S = {s}: {bound}");
    }
}

#[test]
fn local_mixtures_give_zero() {
    let s = Scenario::symmetric(2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let mut p = Behavior::deterministic(s, &[rng.gen_range(0..2), rng.gen_range(0..2)], &[rng.gen_range(0..2), rng.gen_range(0..2)]).unwrap();
        for _ in 0..3 {
            let d = Behavior::deterministic(s, &[rng.gen_range(0..2), rng.gen_range(0..2)], &[rng.gen_range(0..2), rng.gen_range(0..2)]).unwrap();
            p = p.mix(rng.gen_range(0.0..1.0), &d).unwrap();
        }
        let b = entropy_bound_for(&p, &EntropyOptions::desk(0)).unwrap();
        assert!(b.bits < 1e-6, "{}", b.bits);
    }
}

#[test]
fn q234_bound_is_monotone_in_eta() {
    // reduced profile to keep the five solves short
    let mut opts = EntropyOptions::desk(0);
    opts.level = Level::new(1).with(Extra::KeyAV).with(Extra::BV);
    let q = Protocol::Q234.realization(1.0).unwrap();
    let mut last = f64::INFINITY;
    for eta in [1.0, 0.975, 0.95, 0.925, 0.9] {
        let p = degrade(&q, NoiseParams::new(eta, 1.0).unwrap()).unwrap();
        let bits = entropy_bound_for(&p, &opts).unwrap().bits;
        assert!(bits <= last + 1e-6, "eta {eta}: {bits} > {last}");
        last = bits;
    }
}
