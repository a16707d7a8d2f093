//! Bipartite states, measurements and the explicit realizations used by the
//! protocols.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::real::Real;
use crate::scenario::{check_unit, Behavior, Scenario};
use crate::textio::{content_lines, fmt_complex, parse_complex, parse_usize};

/// Tolerance for exactly constructed operators.
pub const ANALYTIC_TOL: f64 = 1e-10;
/// Tolerance for operators built from coefficients rounded to four digits.
pub const ROUNDED_TOL: f64 = 1e-6;
/// Largest accepted `| |c|^2 - 1 |` before a coefficient vector is rejected
/// rather than renormalised. Four-digit rounding of a unit vector in four
/// dimensions moves the squared norm by at most about `4e-4`.
pub const COEFF_NORM_TOL: f64 = 1e-3;

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::of(re), T::of(im))
}

pub fn pauli_x<T: Real>() -> CMatrix<T> {
    CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y<T: Real>() -> CMatrix<T> {
    CMatrix::from_vec(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).expect("2x2")
}

pub fn pauli_z<T: Real>() -> CMatrix<T> {
    CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

/// Density operator on `C^dim_a (x) C^dim_b`, Alice's factor first.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState<T> {
    dim_a: usize,
    dim_b: usize,
    density: CMatrix<T>,
}

impl<T: Real> BipartiteState<T> {
    /// Checks hermiticity, positivity and unit trace at `tol`.
    pub fn new(dim_a: usize, dim_b: usize, density: CMatrix<T>, tol: T) -> Result<Self> {
        let n = dim_a * dim_b;
        if density.rows() != n || density.cols() != n {
            return Err(Error::Dimension(format!(
                "density is {}x{}, expected {n}x{n}",
                density.rows(),
                density.cols()
            )));
        }
        let invalid = |detail: String| Error::Invariant {
            what: "state",
            detail,
        };
        if !density.is_hermitian(tol) {
            return Err(invalid("density is not hermitian".into()));
        }
        let tr = density.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(invalid(format!("trace is {tr}")));
        }
        if !density.is_psd(tol) {
            return Err(invalid("density has a negative eigenvalue".into()));
        }
        Ok(BipartiteState {
            dim_a,
            dim_b,
            density,
        })
    }

    /// `|psi><psi|`; the amplitude vector is normalised if its norm is within
    /// `1e-8` of one.
    pub fn pure(dim_a: usize, dim_b: usize, amplitudes: &[Complex<T>]) -> Result<Self> {
        if amplitudes.len() != dim_a * dim_b {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a {dim_a}x{dim_b} system",
                amplitudes.len()
            )));
        }
        let norm2: T = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - T::one()).abs() > T::tol(1e-8) {
            return Err(Error::Invariant {
                what: "state",
                detail: format!("squared norm {norm2}"),
            });
        }
        let s = T::one() / norm2.sqrt();
        let psi: Vec<Complex<T>> = amplitudes.iter().map(|z| z * s).collect();
        let density = CMatrix::outer(&psi, &psi);
        Ok(BipartiteState {
            dim_a,
            dim_b,
            density,
        })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn density(&self) -> &CMatrix<T> {
        &self.density
    }

    /// `v rho + (1 - v) 1 / (dim_a dim_b)`; `v = 1` returns an exact copy.
    pub fn depolarize(&self, v: T) -> Result<Self> {
        check_unit("visibility", v)?;
        if v == T::one() {
            return Ok(self.clone());
        }
        let n = self.dim_a * self.dim_b;
        let floor = (T::one() - v) / T::of_usize(n);
        let mut density = self.density.scale_real(v);
        for i in 0..n {
            density[(i, i)].re += floor;
        }
        Ok(BipartiteState {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            density,
        })
    }
}

/// `(1/sqrt d) sum_i |ii>`
pub fn maximally_entangled<T: Real>(d: usize) -> Result<BipartiteState<T>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("local dimension {d} < 2")));
    }
    let amp = T::one() / T::of_usize(d).sqrt();
    let mut psi = vec![Complex::new(T::zero(), T::zero()); d * d];
    for i in 0..d {
        psi[i * d + i] = Complex::new(amp, T::zero());
    }
    BipartiteState::pure(d, d, &psi)
}

/// One party's measurement: effects indexed by outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement<T> {
    effects: Vec<CMatrix<T>>,
    projective: bool,
}

impl<T: Real> Measurement<T> {
    /// Checks that effects are hermitian, positive and complete at `tol`.
    pub fn new(effects: Vec<CMatrix<T>>, tol: T) -> Result<Self> {
        let first = effects.first().ok_or_else(|| Error::InvalidArgument("measurement without outcomes".into()))?;
        let d = first.rows();
        let invalid = |detail: String| Error::Invariant {
            what: "measurement",
            detail,
        };
        let mut sum = CMatrix::zeros(d, d);
        for (k, e) in effects.iter().enumerate() {
            if e.rows() != d || e.cols() != d {
                return Err(Error::Dimension(format!("effect {} is not {d}x{d}", k + 1)));
            }
            if !e.is_psd(tol) {
                return Err(invalid(format!("effect {} is not hermitian positive", k + 1)));
            }
            sum = &sum + e;
        }
        if sum.max_abs_diff(&CMatrix::identity(d)) > tol {
            return Err(invalid("effects do not sum to the identity".into()));
        }
        let projective = effects.iter().enumerate().all(|(i, e)| {
            e.is_projector(tol)
                && effects[i + 1..]
                    .iter()
                    .all(|f| e.matmul(f).max_abs() <= tol)
        });
        Ok(Measurement { effects, projective })
    }

    /// Rank-one projectors onto the columns of a unitary.
    pub fn from_basis(unitary: &CMatrix<T>, tol: T) -> Result<Self> {
        if !unitary.is_unitary(tol) {
            return Err(Error::Invariant {
                what: "measurement",
                detail: "basis is not orthonormal".into(),
            });
        }
        let d = unitary.rows();
        let effects = (0..d)
            .map(|k| {
                let col: Vec<Complex<T>> = (0..d).map(|i| unitary[(i, k)]).collect();
                CMatrix::outer(&col, &col)
            })
            .collect();
        Self::new(effects, tol)
    }

    pub fn effects(&self) -> &[CMatrix<T>] {
        &self.effects
    }

    pub fn outcome_count(&self) -> usize {
        self.effects.len()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }

    pub fn is_projective(&self) -> bool {
        self.projective
    }

    /// Effects transposed. On the maximally entangled state, Bob measuring the
    /// transpose of Alice's effects reproduces her outcome.
    pub fn transpose(&self) -> Self {
        Measurement {
            effects: self.effects.iter().map(CMatrix::transpose).collect(),
            projective: self.projective,
        }
    }
}

/// Two-outcome projective measurement `{P, 1 - P}` with `P = |c><c|`.
/// Vectors whose squared norm is within [`COEFF_NORM_TOL`] of one are
/// renormalised; others are rejected.
pub fn projector_from_coeffs<T: Real>(coeffs: &[Complex<T>]) -> Result<Measurement<T>> {
    projector_from_coeffs_tol(coeffs, T::of(COEFF_NORM_TOL))
}

pub fn projector_from_coeffs_tol<T: Real>(coeffs: &[Complex<T>], norm_tol: T) -> Result<Measurement<T>> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient vector".into()));
    }
    let norm2: T = coeffs.iter().map(|z| z.norm_sqr()).sum();
    if !((norm2 - T::one()).abs() <= norm_tol) {
        return Err(Error::InvalidArgument(format!(
            "coefficient vector has squared norm {norm2}"
        )));
    }
    let s = T::one() / norm2.sqrt();
    let v: Vec<Complex<T>> = coeffs.iter().map(|z| z * s).collect();
    let p = CMatrix::outer(&v, &v);
    let q = &CMatrix::identity(v.len()) - &p;
    Measurement::new(vec![p, q], T::tol(ANALYTIC_TOL))
}

/// Four-outcome measurement from two commuting `+-1` observables. The effect
/// for eigenvalue pair `(s1, s2)` is `(1 + s1 O1)(1 + s2 O2) / 4`, ordered
/// `(+,+), (+,-), (-,+), (-,-)`.
pub fn commuting_pair_measurement<T: Real>(
    first: &CMatrix<T>,
    second: &CMatrix<T>,
    party: &'static str,
    index: usize,
) -> Result<Measurement<T>> {
    let tol = T::tol(ANALYTIC_TOL);
    let comm = &first.matmul(second) - &second.matmul(first);
    if comm.max_abs() > tol {
        return Err(Error::NonCommuting {
            party,
            measurement: index + 1,
            detail: format!("commutator norm {}", comm.max_abs()),
        });
    }
    let d = first.rows();
    let id = CMatrix::identity(d);
    let quarter = Complex::new(T::of(0.25), T::zero());
    let mut effects = Vec::with_capacity(4);
    for s1 in [T::one(), -T::one()] {
        for s2 in [T::one(), -T::one()] {
            let l = &id + &first.scale_real(s1);
            let r = &id + &second.scale_real(s2);
            effects.push(l.matmul(&r).scale(quarter));
        }
    }
    Measurement::new(effects, tol)
}

/// State plus per-party measurement lists.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumRealization<T> {
    state: BipartiteState<T>,
    alice: Vec<Measurement<T>>,
    bob: Vec<Measurement<T>>,
}

impl<T: Real> QuantumRealization<T> {
    pub fn new(state: BipartiteState<T>, alice: Vec<Measurement<T>>, bob: Vec<Measurement<T>>) -> Result<Self> {
        check_party(&alice, state.dim_a, "Alice")?;
        check_party(&bob, state.dim_b, "Bob")?;
        Ok(QuantumRealization { state, alice, bob })
    }

    pub fn state(&self) -> &BipartiteState<T> {
        &self.state
    }

    pub fn alice(&self) -> &[Measurement<T>] {
        &self.alice
    }

    pub fn bob(&self) -> &[Measurement<T>] {
        &self.bob
    }

    pub fn with_state(&self, state: BipartiteState<T>) -> Result<Self> {
        Self::new(state, self.alice.clone(), self.bob.clone())
    }

    pub fn with_bob(&self, bob: Vec<Measurement<T>>) -> Result<Self> {
        Self::new(self.state.clone(), self.alice.clone(), bob)
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            inputs_a: self.alice.len(),
            inputs_b: self.bob.len(),
            outputs_a: self.alice[0].outcome_count(),
            outputs_b: self.bob[0].outcome_count(),
        }
    }

    /// `p(a,b|x,y) = tr[(A_a|x (x) B_b|y) rho]`
    pub fn behavior(&self) -> Result<Behavior<T>> {
        let s = self.scenario();
        let mut table = Vec::with_capacity(s.table_len());
        for ma in &self.alice {
            for mb in &self.bob {
                for ea in ma.effects() {
                    for eb in mb.effects() {
                        table.push(joint_expectation(&self.state, ea, eb));
                    }
                }
            }
        }
        Behavior::new(s, table)
    }

    /// `p(a,b)` for one measurement pair, each possibly outside the lists.
    pub fn joint_distribution(&self, ma: &Measurement<T>, mb: &Measurement<T>) -> Vec<Vec<T>> {
        ma.effects()
            .iter()
            .map(|ea| {
                mb.effects()
                    .iter()
                    .map(|eb| joint_expectation(&self.state, ea, eb).max(T::zero()))
                    .collect()
            })
            .collect()
    }

    /// Text schema:
    ///
    /// ```text
    /// realization <dimA> <dimB>
    /// state
    /// <dimA*dimB rows of re,im density entries>
    /// alice <count> <outcomes>
    /// measurement
    /// effect
    /// <dimA rows>
    /// ...
    /// bob <count> <outcomes>
    /// ...
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = format!("realization {} {}\nstate\n", self.state.dim_a, self.state.dim_b);
        write_matrix(&mut out, &self.state.density);
        for (name, list) in [("alice", &self.alice), ("bob", &self.bob)] {
            out.push_str(&format!("{name} {} {}\n", list.len(), list[0].outcome_count()));
            for m in list.iter() {
                out.push_str("measurement\n");
                for e in m.effects() {
                    out.push_str("effect\n");
                    write_matrix(&mut out, e);
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text).peekable();
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "empty realization file"))?;
        let t: Vec<&str> = header.split_whitespace().collect();
        if t.len() != 3 || t[0] != "realization" {
            return Err(Error::parse(ln, "expected `realization dimA dimB`"));
        }
        let (da, db) = (parse_usize(t[1], ln)?, parse_usize(t[2], ln)?);
        expect_keyword(&mut lines, "state")?;
        let density = read_matrix(&mut lines, da * db)?;
        let tol = T::tol(ANALYTIC_TOL);
        let state = BipartiteState::new(da, db, density, tol)?;
        let mut parties = Vec::new();
        for (name, d) in [("alice", da), ("bob", db)] {
            let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, format!("missing `{name}` section")))?;
            let t: Vec<&str> = header.split_whitespace().collect();
            if t.len() != 3 || t[0] != name {
                return Err(Error::parse(ln, format!("expected `{name} count outcomes`")));
            }
            let (count, outcomes) = (parse_usize(t[1], ln)?, parse_usize(t[2], ln)?);
            let mut list = Vec::with_capacity(count);
            for _ in 0..count {
                expect_keyword(&mut lines, "measurement")?;
                let mut effects = Vec::with_capacity(outcomes);
                for _ in 0..outcomes {
                    expect_keyword(&mut lines, "effect")?;
                    effects.push(read_matrix(&mut lines, d)?);
                }
                list.push(Measurement::new(effects, tol)?);
            }
            parties.push(list);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing content"));
        }
        let bob = parties.pop().expect("two parties");
        let alice = parties.pop().expect("two parties");
        Self::new(state, alice, bob)
    }
}

fn check_party<T: Real>(list: &[Measurement<T>], dim: usize, party: &str) -> Result<()> {
    let first = list
        .first()
        .ok_or_else(|| Error::InvalidArgument(format!("{party} has no measurements")))?;
    for (k, m) in list.iter().enumerate() {
        if m.dim() != dim {
            return Err(Error::Dimension(format!(
                "{party} measurement {} acts on dimension {}, state has {dim}",
                k + 1,
                m.dim()
            )));
        }
        if m.outcome_count() != first.outcome_count() {
            return Err(Error::Dimension(format!(
                "{party} measurements have differing outcome counts"
            )));
        }
    }
    Ok(())
}

/// `Re tr[(A (x) B) rho]` without forming the tensor product.
fn joint_expectation<T: Real>(state: &BipartiteState<T>, ea: &CMatrix<T>, eb: &CMatrix<T>) -> T {
    let (da, db) = (state.dim_a, state.dim_b);
    let rho = &state.density;
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..da {
        for j in 0..da {
            let a = ea[(i, j)];
            if a.re == T::zero() && a.im == T::zero() {
                continue;
            }
            let mut inner = Complex::new(T::zero(), T::zero());
            for k in 0..db {
                for l in 0..db {
                    inner += eb[(k, l)] * rho[(j * db + l, i * db + k)];
                }
            }
            acc += a * inner;
        }
    }
    acc.re
}

fn write_matrix<T: Real>(out: &mut String, m: &CMatrix<T>) {
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| fmt_complex(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

fn expect_keyword<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, word: &str) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l == word => Ok(()),
        Some((ln, _)) => Err(Error::parse(ln, format!("expected `{word}`"))),
        None => Err(Error::parse(0, format!("missing `{word}`"))),
    }
}

fn read_matrix<'a, T: Real>(lines: &mut impl Iterator<Item = (usize, &'a str)>, n: usize) -> Result<CMatrix<T>> {
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n {
        let (ln, l) = lines.next().ok_or_else(|| Error::parse(0, "truncated matrix"))?;
        let row: Vec<&str> = l.split_whitespace().collect();
        if row.len() != n {
            return Err(Error::parse(ln, format!("expected {n} entries")));
        }
        for tok in row {
            data.push(parse_complex(tok, ln)?);
        }
    }
    Ok(CMatrix::from_vec(n, n, data).expect("square"))
}

/// Published four-digit coefficients of Alice's projectors in the 4422 realization.
pub const Q4422_ALICE: [[f64; 4]; 4] = [
    [-0.2816, -0.2816, 0.9159, 0.0499],
    [-0.5438, 0.5438, 0.5625, -0.3035],
    [0.2816, 0.2816, 0.9159, 0.0499],
    [0.5438, -0.5438, 0.5625, -0.3035],
];

/// Published four-digit coefficients of Bob's projectors in the 4422 realization.
pub const Q4422_BOB: [[f64; 4]; 4] = [
    [-0.2816, 0.2816, 0.9159, -0.0499],
    [-0.5438, -0.5438, 0.5625, 0.3035],
    [0.2816, -0.2816, 0.9159, -0.0499],
    [0.5438, 0.5438, 0.5625, 0.3035],
];

fn real_coeffs<T: Real>(c: &[f64]) -> Vec<Complex<T>> {
    c.iter().map(|&x| Complex::new(T::of(x), T::zero())).collect()
}

/// Maximally entangled ququarts with four two-outcome projective
/// measurements per party. Coefficient vectors are renormalised on load.
pub fn build_q4422<T: Real>() -> QuantumRealization<T> {
    let state = maximally_entangled(4).expect("d = 4");
    let load = |rows: &[[f64; 4]; 4]| -> Vec<Measurement<T>> {
        rows.iter()
            .map(|r| projector_from_coeffs(&real_coeffs::<T>(r)).expect("published coefficients"))
            .collect()
    };
    QuantumRealization::new(state, load(&Q4422_ALICE), load(&Q4422_BOB)).expect("consistent dimensions")
}

/// Observable pairs on two qubits, first tensor factor = first qubit of the
/// party. Row-wise for Alice, column-wise for Bob on the magic square.
pub fn q234_observables<T: Real>() -> ([[CMatrix<T>; 2]; 3], [[CMatrix<T>; 2]; 3]) {
    let (i, x, z) = (CMatrix::identity(2), pauli_x::<T>(), pauli_z::<T>());
    let alice = [
        [i.kron(&z), x.kron(&i)],
        [z.kron(&i), i.kron(&x)],
        [z.kron(&z), x.kron(&x)],
    ];
    let bob = [
        [i.kron(&z), z.kron(&i)],
        [x.kron(&i), i.kron(&x)],
        [x.kron(&z), z.kron(&x)],
    ];
    (alice, bob)
}

/// Maximally entangled ququarts, each read as two qubits, measured with the
/// commuting observable pairs of the magic square.
pub fn build_q234<T: Real>() -> QuantumRealization<T> {
    let (alice, bob) = q234_observables::<T>();
    let build = |pairs: &[[CMatrix<T>; 2]; 3], party| -> Vec<Measurement<T>> {
        pairs
            .iter()
            .enumerate()
            .map(|(k, [o1, o2])| commuting_pair_measurement(o1, o2, party, k).expect("commuting pair"))
            .collect()
    };
    QuantumRealization::new(
        maximally_entangled(4).expect("d = 4"),
        build(&alice, "Alice"),
        build(&bob, "Bob"),
    )
    .expect("consistent dimensions")
}

/// Maximally entangled qubits with real measurement directions at angles
/// `0, pi/2` for Alice and `pi/4, -pi/4` for Bob; reaches CHSH `2 sqrt 2`.
pub fn build_chsh<T: Real>() -> QuantumRealization<T> {
    let at = |theta: f64| {
        projector_from_coeffs(&real_coeffs::<T>(&[(theta / 2.0).cos(), (theta / 2.0).sin()])).expect("unit vector")
    };
    let q = std::f64::consts::FRAC_PI_4;
    QuantumRealization::new(
        maximally_entangled(2).expect("d = 2"),
        vec![at(0.0), at(2.0 * q)],
        vec![at(q), at(-q)],
    )
    .expect("consistent dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli_x::<f64>(), pauli_y::<f64>(), pauli_z::<f64>());
        let iz = z.scale(Complex::new(0.0, 1.0));
        assert!(x.matmul(&y).max_abs_diff(&iz) < 1e-15);
    }

    #[test]
    fn chsh_realization_reaches_tsirelson() {
        let p = build_chsh::<f64>().behavior().unwrap();
        let s = crate::functionals::make_chsh::<f64>().eval(&p).unwrap();
        assert!((s - 2.0 * 2f64.sqrt()).abs() < 1e-12, "{s}");
    }

    #[test]
    fn maximally_entangled_amplitudes() {
        let s = maximally_entangled::<f64>(4).unwrap();
        assert!((s.density()[(0, 15)].re - 0.25).abs() < 1e-15);
        assert!((s.density()[(5, 10)].re - 0.25).abs() < 1e-15);
        assert!((s.density().trace().re - 1.0).abs() < 1e-15);
        let s = maximally_entangled::<f64>(2).unwrap();
        assert!((s.density()[(0, 3)].re - 0.5).abs() < 1e-15);
        assert!(maximally_entangled::<f64>(1).is_err());
    }

    #[test]
    fn published_projectors() {
        let m = projector_from_coeffs(&real_coeffs::<f64>(&Q4422_ALICE[0])).unwrap();
        let p = &m.effects()[0];
        assert!(p.is_projector(1e-10));
        assert!((p.trace().re - 1.0).abs() < 1e-12);
        // unrenormalised outer product is only close to a projector
        let raw = real_coeffs::<f64>(&Q4422_BOB[3]);
        let q = CMatrix::outer(&raw, &raw);
        let err = q.matmul(&q).max_abs_diff(&q);
        assert!(err > 1e-10 && err < 1e-3);
        let m = projector_from_coeffs(&raw).unwrap();
        let q = &m.effects()[0];
        assert!(q.matmul(q).max_abs_diff(q) <= ROUNDED_TOL);
    }

    #[test]
    fn basis_projector() {
        let m = projector_from_coeffs(&real_coeffs::<f64>(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let want = CMatrix::from_real(4, 4, &{
            let mut d = [0.0; 16];
            d[0] = 1.0;
            d
        });
        assert_eq!(m.effects()[0], want);
        assert!(projector_from_coeffs(&real_coeffs::<f64>(&[1.0, 1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn q4422_shape() {
        let q = build_q4422::<f64>();
        assert_eq!(q.alice().len(), 4);
        assert_eq!(q.alice()[0].outcome_count(), 2);
        assert!(q.alice().iter().chain(q.bob()).all(Measurement::is_projective));
    }

    #[test]
    fn q234_measurements_are_orthogonal_resolutions() {
        let q = build_q234::<f64>();
        for m in q.alice().iter().chain(q.bob()) {
            assert_eq!(m.outcome_count(), 4);
            assert!(m.is_projective());
            let e = m.effects();
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert!(e[i].matmul(&e[j]).max_abs() < 1e-10);
                    }
                }
            }
        }
        let (alice, _) = q234_observables::<f64>();
        let [zz, xx] = &alice[2];
        assert!(zz.matmul(xx).max_abs_diff(&xx.matmul(zz)) < 1e-15);
    }

    #[test]
    fn q234_first_setting_support() {
        // p(a,b|1,1) = 1/8 on {11,12,21,22,33,34,43,44}
        let p = build_q234::<f64>().behavior().unwrap();
        let support = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)];
        for a in 0..4 {
            for b in 0..4 {
                let want = if support.contains(&(a, b)) { 0.125 } else { 0.0 };
                assert!((p.p(0, 0, a, b) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_commuting_pair_is_rejected() {
        let (x, z) = (pauli_x::<f64>(), pauli_z::<f64>());
        let err = commuting_pair_measurement(&x, &z, "Alice", 2).unwrap_err();
        assert!(matches!(err, Error::NonCommuting { measurement: 3, .. }));
    }

    #[test]
    fn depolarized_spectrum() {
        let s = maximally_entangled::<f64>(4).unwrap();
        assert_eq!(s.depolarize(1.0).unwrap(), s);
        let mixed = s.depolarize(0.0).unwrap();
        assert!(mixed.density().max_abs_diff(&CMatrix::identity(16).scale_real(1.0 / 16.0)) < 1e-15);
        let half = s.depolarize(0.5).unwrap();
        let ev = half.density().hermitian_eigenvalues();
        assert!((ev[15] - (0.5 + 0.5 / 16.0)).abs() < 1e-12);
        for &l in &ev[..15] {
            assert!((l - 0.5 / 16.0).abs() < 1e-12);
        }
        assert!(s.depolarize(-0.1).is_err());
    }

    #[test]
    fn transposed_measurement_correlates_perfectly() {
        let q = build_q4422::<f64>();
        let ma = &q.alice()[0];
        let p = q.joint_distribution(ma, &ma.transpose());
        assert!((p[0][0] + p[1][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn realization_text_round_trip() {
        let q = build_q234::<f64>();
        let noisy = q.with_state(q.state().depolarize(0.7).unwrap()).unwrap();
        let back = QuantumRealization::<f64>::from_text(&noisy.to_text()).unwrap();
        assert_eq!(back, noisy);
        let q = build_q4422::<f64>();
        assert_eq!(QuantumRealization::<f64>::from_text(&q.to_text()).unwrap(), q);
    }

    #[test]
    fn single_precision_build() {
        let p = build_q234::<f32>().behavior().unwrap();
        assert!((p.p(0, 0, 0, 0) - 0.125).abs() < 1e-5);
    }
}
