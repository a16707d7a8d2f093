//! Device-independent lower bounds on the conditional entropy of Alice's key
//! outcome given Eve, from the iterated-mean Rényi program relaxed to an SDP.
//!
//! For depth `k` the program maximises
//! `Q = sum_a < M_a (V_{1,a} + V_{1,a}*) / 2 >` subject to
//!
//! ```text
//! sum_a V_{k,a}* V_{k,a} <= 1
//! V_{1,a} + V_{1,a}* >= 0
//! 2 V_{i,a}* V_{i,a} <= V_{i+1,a} + V_{i+1,a}*     (1 <= i < k)
//! ```
//!
//! and the entropy bound is `alpha / (1 - alpha) * log2 Q` with
//! `alpha = 1 + 1 / (2^k - 1)`, which simplifies to `-2^k log2 Q`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::npa::{generate_monomials, projector_poly, Alphabet, Extra, Level, Monomial, Poly, RelaxationProblem, Symbol};
use crate::real::Real;
use crate::scenario::Behavior;
use crate::sdp::{solve_relaxation_with_margin, RelaxationSolution, SolverOptions, Status};
use crate::textio::fmt_exact;

/// Largest accepted depth; `2^k` must stay representable and the program
/// grows linearly in `k`.
pub const MAX_DEPTH: usize = 16;

/// `1 + 1 / (2^k - 1)`
pub fn alpha(k: usize) -> f64 {
    1.0 + 1.0 / ((1u64 << k) as f64 - 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyOptions {
    /// Iteration depth, at least 1.
    pub k: usize,
    /// Monomial set of the moment matrix.
    pub level: Level,
    pub extra_words: Vec<Monomial>,
    /// Candidate basis of every localizing matrix; each block keeps the
    /// candidates whose entries are moments of the moment matrix.
    pub localizing_level: Level,
    pub monomial_cap: usize,
    /// Alice input that generates the key.
    pub key_input: usize,
    /// Include `V*` as letters.
    pub eve_adjoints: bool,
    /// Blocks are only required to be `>= -psd_margin`; see
    /// [`crate::sdp::compile_with_margin`].
    pub psd_margin: f64,
    pub solver: SolverOptions,
}

/// Default block margin of entropy programs.
pub const DEFAULT_PSD_MARGIN: f64 = 1e-8;

impl EntropyOptions {
    /// `k = 1`, level `1+AB+AV+BV`, level-1 localizing basis.
    pub fn desk(key_input: usize) -> Self {
        EntropyOptions {
            k: 1,
            level: Level::one_plus_ab().with(Extra::AV).with(Extra::BV),
            extra_words: Vec::new(),
            localizing_level: Level::new(1),
            monomial_cap: crate::npa::relaxation::DEFAULT_MONOMIAL_CAP,
            key_input,
            eve_adjoints: false,
            psd_margin: DEFAULT_PSD_MARGIN,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EntropyProgram<T> {
    pub k: usize,
    pub alpha: f64,
    pub key_input: usize,
    pub level: Level,
    pub psd_margin: f64,
    pub relaxation: RelaxationProblem<T>,
}

/// `V + V*`
fn hermitian_part<T: Real>(family: usize, index: usize) -> Poly<T> {
    let v = Poly::letter(Symbol::eve(family, index));
    v.add(&v.adjoint())
}

/// `V* V`
fn square<T: Real>(family: usize, index: usize) -> Poly<T> {
    let v = Poly::letter(Symbol::eve(family, index));
    v.adjoint().mul(&v)
}

/// Builds the relaxed program with `p` pinned. `p` is the behavior of the
/// rounds that are announced, and `opts.key_input` indexes its Alice inputs.
pub fn build_entropy_program<T: Real>(p: &Behavior<T>, opts: &EntropyOptions) -> Result<EntropyProgram<T>> {
    let s = p.scenario();
    if opts.k == 0 || opts.k > MAX_DEPTH {
        return Err(Error::InvalidArgument(format!("depth k = {} outside 1..={MAX_DEPTH}", opts.k)));
    }
    if !(opts.psd_margin >= 0.0) {
        return Err(Error::InvalidArgument("negative block margin".into()));
    }
    if opts.key_input >= s.inputs_a {
        return Err(Error::Index(format!("key input {} of {}", opts.key_input + 1, s.inputs_a)));
    }
    let alphabet = Alphabet {
        scenario: s,
        eve_families: opts.k,
        eve_indices: s.outputs_a,
        eve_adjoints: opts.eve_adjoints,
        key_input: opts.key_input,
    };
    let monomials = generate_monomials(&alphabet, &opts.level, &opts.extra_words, opts.monomial_cap)?;
    let basis = generate_monomials(&alphabet, &opts.localizing_level, &[], opts.monomial_cap)?;
    let name = format!("entropy k {} level {}", opts.k, opts.level);
    let mut r = RelaxationProblem::new(name, alphabet, monomials);
    r.pin_behavior(p)?;

    let mut objective = Poly::zero();
    for a in 0..s.outputs_a {
        let m = projector_poly::<T>(true, opts.key_input, a, s.outputs_a);
        let v = Poly::letter(Symbol::eve(0, a));
        let term = m.mul(&v).add(&v.adjoint().mul(&m));
        objective = objective.add(&term.scale(T::half()));
    }
    r.set_objective(&objective);

    let k = opts.k;
    let mut norm = Poly::constant(T::one());
    for a in 0..s.outputs_a {
        norm = norm.sub(&square(k - 1, a));
    }
    let local = r.covered_basis(&norm, &basis);
    r.add_localizing("sum", &norm, &local)?;
    for a in 0..s.outputs_a {
        let g = hermitian_part(0, a);
        let local = r.covered_basis(&g, &basis);
        r.add_localizing(&format!("positive {}", a + 1), &g, &local)?;
    }
    for i in 0..k - 1 {
        for a in 0..s.outputs_a {
            let g = hermitian_part::<T>(i + 1, a).sub(&square::<T>(i, a).scale(T::two()));
            let local = r.covered_basis(&g, &basis);
            r.add_localizing(&format!("cascade {} {}", i + 1, a + 1), &g, &local)?;
        }
    }
    Ok(EntropyProgram {
        k,
        alpha: alpha(k),
        key_input: opts.key_input,
        level: opts.level.clone(),
        psd_margin: opts.psd_margin,
        relaxation: r,
    })
}

/// `max(0, alpha / (1 - alpha) * log2 q)`
pub fn entropy_from_q(k: usize, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("program value {q} is not positive")));
    }
    let factor = -((1u64 << k) as f64);
    Ok((factor * q.log2()).max(0.0))
}

/// Solved program and its entropy bound in bits.
#[derive(Clone, Debug)]
pub struct EntropyBound<T> {
    pub k: usize,
    pub alpha: f64,
    /// Block margin of the successful solve.
    pub psd_margin: f64,
    /// Program value at the returned moments.
    pub q: f64,
    /// Value certified by the dual solution; the bound uses this.
    pub q_upper: f64,
    pub bits: f64,
    pub solution: RelaxationSolution<T>,
}

/// Largest margin tried after numerical failures.
pub const MAX_PSD_MARGIN: f64 = 1e-5;

/// Solves `prog` and converts its value into bits. When the solver fails
/// numerically the margin is raised tenfold, up to [`MAX_PSD_MARGIN`]; a
/// larger margin only loosens the bound.
pub fn entropy_lower_bound<T: Real>(prog: &EntropyProgram<T>, solver: &SolverOptions) -> Result<EntropyBound<T>> {
    let mut margin = prog.psd_margin;
    let sol = loop {
        let sol = solve_relaxation_with_margin(&prog.relaxation, solver, T::of(margin))?;
        let retry = matches!(sol.status, Status::NumericalFailure | Status::MaxIterations);
        if sol.status == Status::Optimal || !retry || margin * 10.0 > MAX_PSD_MARGIN * (1.0 + 1e-9) || margin == 0.0 {
            break sol;
        }
        margin *= 10.0;
    };
    if sol.status != Status::Optimal {
        return Err(Error::Solver(format!(
            "{} after {} iterations (gap {:.3e}, margin {:.0e})",
            sol.status.name(),
            sol.sdp.iterations,
            sol.sdp.relative_gap.f64(),
            margin
        )));
    }
    let q = sol.value.f64();
    let q_upper = sol.upper_bound.f64().max(q);
    Ok(EntropyBound {
        k: prog.k,
        alpha: prog.alpha,
        psd_margin: margin,
        q,
        q_upper,
        bits: entropy_from_q(prog.k, q_upper)?,
        solution: sol,
    })
}

/// Builds and solves in one step.
pub fn entropy_bound_for<T: Real>(p: &Behavior<T>, opts: &EntropyOptions) -> Result<EntropyBound<T>> {
    let prog = build_entropy_program(p, opts)?;
    entropy_lower_bound(&prog, &opts.solver)
}

/// Binary entropy in bits; arguments are clamped to `[0, 1]`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// `1 - h((1 + sqrt(s^2/4 - 1)) / 2)` for a CHSH value `s` in `[2, 2 sqrt 2]`.
pub fn chsh_analytic_bound(s: f64) -> Result<f64> {
    let tsirelson = 2.0 * std::f64::consts::SQRT_2;
    let slack = 1e-12;
    if !(s >= 2.0 - slack && s <= tsirelson + slack) {
        return Err(Error::InvalidArgument(format!("CHSH value {s} outside [2, 2 sqrt 2]")));
    }
    let root = (s * s / 4.0 - 1.0).max(0.0).sqrt().min(1.0);
    Ok(1.0 - binary_entropy((1.0 + root) / 2.0))
}

/// Text certificate: the program census, objective values, the bound and the
/// dual matrices of every block, upper triangles with 1-based indices.
pub fn certificate_text<T: Real>(prog: &EntropyProgram<T>, bound: &EntropyBound<T>) -> String {
    let r = &prog.relaxation;
    let sdp = &bound.solution.sdp;
    let mut out = String::new();
    let _ = writeln!(out, "certificate entropy");
    let _ = writeln!(out, "k {}", prog.k);
    let _ = writeln!(out, "alpha {}", fmt_exact(prog.alpha));
    let _ = writeln!(out, "key_input {}", prog.key_input + 1);
    let _ = writeln!(out, "level {}", prog.level);
    let _ = writeln!(out, "psd_margin {}", fmt_exact(bound.psd_margin));
    let _ = writeln!(out, "monomials {}", r.monomials().len());
    let _ = writeln!(out, "variables {}", r.variables().len());
    let _ = writeln!(out, "pins {}", r.pins().len());
    let _ = writeln!(out, "status {}", sdp.status.name());
    let _ = writeln!(out, "iterations {}", sdp.iterations);
    let _ = writeln!(out, "relative_gap {}", fmt_exact(sdp.relative_gap));
    let _ = writeln!(out, "dual_infeasibility {}", fmt_exact(sdp.dual_infeasibility));
    let _ = writeln!(out, "primal_infeasibility {}", fmt_exact(sdp.primal_infeasibility));
    let _ = writeln!(out, "q {}", fmt_exact(bound.q));
    let _ = writeln!(out, "q_upper {}", fmt_exact(bound.q_upper));
    let _ = writeln!(out, "bits {}", fmt_exact(bound.bits));
    for (block, y) in r.blocks().iter().zip(&sdp.dual_matrix) {
        let n = block.size();
        let _ = writeln!(out, "block {} {}", block.name.replace(' ', "_"), n);
        for i in 0..n {
            for j in i..n {
                let v = y[(i, j)];
                if v != T::zero() {
                    let _ = writeln!(out, "{} {} {}", i + 1, j + 1, fmt_exact(v));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(1), 2.0);
        assert!((alpha(2) - 4.0 / 3.0).abs() < 1e-15);
        for k in 1..10 {
            let a = alpha(k);
            assert!(a > 1.0 && a <= 2.0);
            assert!((a / (1.0 - a) + (1u64 << k) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn conversion() {
        assert_eq!(entropy_from_q(1, 1.0).unwrap(), 0.0);
        assert!((entropy_from_q(1, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(entropy_from_q(1, 1.3).unwrap(), 0.0);
        assert!(entropy_from_q(1, 0.0).is_err());
    }

    #[test]
    fn analytic_chsh() {
        assert_eq!(chsh_analytic_bound(2.0 * 2f64.sqrt()).unwrap(), 1.0);
        assert_eq!(chsh_analytic_bound(2.0).unwrap(), 0.0);
        let h = binary_entropy(0.875);
        assert!((chsh_analytic_bound(2.5).unwrap() - (1.0 - h)).abs() < 1e-15);
        assert!(chsh_analytic_bound(1.9).is_err());
        assert!(chsh_analytic_bound(2.9).is_err());
    }

    #[test]
    fn block_census() {
        let s = Scenario::symmetric(2, 2).unwrap();
        let p = Behavior::<f64>::uniform(s);
        let mut opts = EntropyOptions::desk(0);
        let prog = build_entropy_program(&p, &opts).unwrap();
        // moment block, the sum block and one positivity block per outcome
        assert_eq!(prog.relaxation.blocks().len(), 1 + 1 + 2);
        opts.k = 2;
        let prog = build_entropy_program(&p, &opts).unwrap();
        assert_eq!(prog.relaxation.blocks().len(), 1 + 1 + 2 + 2);
        assert!(prog.relaxation.blocks().iter().any(|b| b.name == "cascade 1 2"));
    }

    #[test]
    fn local_uniform_behavior_gives_zero() {
        let s = Scenario::symmetric(2, 2).unwrap();
        let p = Behavior::<f64>::uniform(s);
        let prog = build_entropy_program(&p, &EntropyOptions::desk(0)).unwrap();
        let b = entropy_lower_bound(&prog, &SolverOptions::default()).unwrap();
        assert!(b.bits < 1e-6, "{}", b.bits);
        assert!(b.q_upper >= 1.0 - 1e-6);
    }

    #[test]
    fn deterministic_behavior_gives_zero() {
        let s = Scenario::symmetric(2, 2).unwrap();
        let p = Behavior::<f64>::deterministic(s, &[0, 1], &[1, 0]).unwrap();
        let prog = build_entropy_program(&p, &EntropyOptions::desk(0)).unwrap();
        let b = entropy_lower_bound(&prog, &SolverOptions::default()).unwrap();
        assert!(b.bits < 1e-6, "{}", b.bits);
    }

    #[test]
    fn certificate_lists_blocks() {
        let s = Scenario::symmetric(2, 2).unwrap();
        let p = Behavior::<f64>::uniform(s);
        let prog = build_entropy_program(&p, &EntropyOptions::desk(0)).unwrap();
        let b = entropy_lower_bound(&prog, &SolverOptions::default()).unwrap();
        let text = certificate_text(&prog, &b);
        assert!(text.starts_with("certificate entropy\nk 1\n"));
        assert_eq!(text.matches("\nblock ").count(), 4);
    }
}
