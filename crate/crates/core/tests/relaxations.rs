use diqkd_core::functionals::{make_chsh, make_i234, make_i4422};
use diqkd_core::npa::{efficiency_constrained_relaxation, tsirelson_relaxation, Level, RelaxationOptions};
use diqkd_core::quantum::{build_q234, build_q4422};
use diqkd_core::scenario::{degrade, NoiseParams};
use diqkd_core::sdp::{compile, solve, solve_relaxation, SolverOptions, Status};
use diqkd_core::{BellFunctional, Mat};

fn npa(f: &BellFunctional, level: Level) -> f64 {
    let r = tsirelson_relaxation(f, &RelaxationOptions::new(level)).unwrap();
    let sol = solve_relaxation(&r, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    sol.upper_bound
}

#[test]
fn hierarchy_is_monotone() {
    for f in [make_chsh(), make_i4422()] {
        let l1 = npa(&f, Level::new(1));
        let l2 = npa(&f, Level::new(2));
        assert!(l2 <= l1 + 1e-7, "{l2} > {l1}");
    }
}

#[test]
fn relaxations_bound_quantum_values() {
    let q4422 = build_q4422::<f64>();
    let q234 = build_q234::<f64>();
    let i4422 = make_i4422();
    let i234 = make_i234();
    let b4422 = npa(&i4422, Level::new(2));
    let b234 = npa(&i234, Level::one_plus_ab());
    for v in [0.5, 1.0] {
        let n = NoiseParams::new(1.0, v).unwrap();
        assert!(i4422.eval(&degrade(&q4422, n).unwrap()).unwrap() <= b4422 + 1e-6);
        assert!(i234.eval(&degrade(&q234, n).unwrap()).unwrap() <= b234 + 1e-6);
    }
}

#[test]
fn solved_moment_matrix_is_psd_and_duality_holds() {
    let f = make_i4422();
    let r = tsirelson_relaxation(&f, &RelaxationOptions::new(Level::one_plus_ab())).unwrap();
    let c = compile(&r).unwrap();
    let sol = solve(&c.sdp, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    // minimisation in SDPA form: dual <= primal
    assert!(sol.dual_objective <= sol.primal_objective + 1e-7);
    let y = c.moments(&sol.x);
    let block = r.moment_block();
    let n = block.size();
    let g = Mat::from_fn(n, n, |i, j| block.entry(i, j).eval(&y));
    assert!(g.min_eigenvalue() >= -1e-7);
}

#[test]
fn efficiency_bound_shrinks_with_eta() {
    let f = make_i4422();
    let opts = RelaxationOptions::new(Level::new(1));
    let mut last = f64::INFINITY;
    for eta in [1.0, 0.9, 0.8, 0.7] {
        let r = efficiency_constrained_relaxation(&f, eta, &opts).unwrap();
        let b = solve_relaxation(&r, &SolverOptions::default()).unwrap().upper_bound;
        assert!(b <= last + 1e-7);
        last = b;
    }
}
