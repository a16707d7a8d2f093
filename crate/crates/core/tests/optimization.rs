use diqkd_core::functionals::make_i4422;
use diqkd_core::optimize::{maximize_violation, optimize_key_measurement, Family, ParamFamily4422, SearchOptions};
use diqkd_core::quantum::build_q4422;
use diqkd_core::scenario::{degrade, NoiseParams};

fn quick() -> SearchOptions {
    SearchOptions {
        starts: 4,
        max_iterations: 300,
        ..SearchOptions::default()
    }
}

#[test]
fn violation_search_is_reproducible_and_beats_its_starts() {
    let f = make_i4422();
    let a = maximize_violation(&Family::F4422, &f, 0.9, &quick()).unwrap();
    let b = maximize_violation(&Family::F4422, &f, 0.9, &quick()).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.search.params, b.search.params);
    for s in &a.search.starts {
        assert!(a.value >= s.initial_value);
    }
    let reference = f.eval(&degrade(&build_q4422(), NoiseParams::new(0.9, 1.0).unwrap()).unwrap()).unwrap();
    assert!(a.value >= reference - 1e-6);
}

#[test]
fn key_measurement_search_improves_partially_entangled_default() {
    let mut params = ParamFamily4422::published();
    params.epsilon = 0.6;
    let q = params.realize().unwrap();
    let r = optimize_key_measurement(&q, 0, &quick()).unwrap();
    assert!(r.h_ab < r.default_h_ab - 1e-6, "{} vs {}", r.h_ab, r.default_h_ab);
    let again = optimize_key_measurement(&q, 0, &quick()).unwrap();
    assert_eq!(r.h_ab.to_bits(), again.h_ab.to_bits());
}
