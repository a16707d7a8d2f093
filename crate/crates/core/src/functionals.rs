//! Linear Bell functionals over behaviors, their local bounds by enumeration,
//! and their form after nondetection binning.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::scenario::{check_unit, Behavior, Scenario};
use crate::textio::{content_lines, fmt_exact, label, parse_real, parse_usize};

/// Default cap on the number of deterministic strategy pairs enumerated.
pub const DEFAULT_STRATEGY_CAP: f64 = 1e8;

/// `sum c(x,y,a,b) p(a,b|x,y) + sum cA(x,a) p_A(a|x) + sum cB(y,b) p_B(b|y) + c0`
#[derive(Clone, Debug, PartialEq)]
pub struct BellFunctional<T> {
    scenario: Scenario,
    joint: BTreeMap<(usize, usize, usize, usize), T>,
    marg_a: BTreeMap<(usize, usize), T>,
    marg_b: BTreeMap<(usize, usize), T>,
    constant: T,
    known_local_bound: Option<T>,
}

/// Optimal deterministic strategy found by [`BellFunctional::local_bound`].
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBound<T> {
    pub value: T,
    /// Alice's outcome per input.
    pub alice: Vec<usize>,
    /// Bob's outcome per input.
    pub bob: Vec<usize>,
}

impl<T: Real> BellFunctional<T> {
    pub fn new(scenario: Scenario) -> Self {
        BellFunctional {
            scenario,
            joint: BTreeMap::new(),
            marg_a: BTreeMap::new(),
            marg_b: BTreeMap::new(),
            constant: T::zero(),
            known_local_bound: None,
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// Adds `coeff` to the coefficient of `p(a,b|x,y)`.
    pub fn add_joint(&mut self, x: usize, y: usize, a: usize, b: usize, coeff: T) -> Result<()> {
        self.scenario.check(x, y, a, b)?;
        *self.joint.entry((x, y, a, b)).or_insert_with(T::zero) += coeff;
        Ok(())
    }

    /// Adds `coeff` to the coefficient of `p_A(a|x)`.
    pub fn add_marginal_a(&mut self, x: usize, a: usize, coeff: T) -> Result<()> {
        self.scenario.check(x, 0, a, 0)?;
        *self.marg_a.entry((x, a)).or_insert_with(T::zero) += coeff;
        Ok(())
    }

    /// Adds `coeff` to the coefficient of `p_B(b|y)`.
    pub fn add_marginal_b(&mut self, y: usize, b: usize, coeff: T) -> Result<()> {
        self.scenario.check(0, y, 0, b)?;
        *self.marg_b.entry((y, b)).or_insert_with(T::zero) += coeff;
        Ok(())
    }

    pub fn add_constant(&mut self, c: T) {
        self.constant += c;
    }

    pub fn set_known_local_bound(&mut self, bound: Option<T>) {
        self.known_local_bound = bound;
    }

    pub fn known_local_bound(&self) -> Option<T> {
        self.known_local_bound
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn joint_coeff(&self, x: usize, y: usize, a: usize, b: usize) -> T {
        self.joint.get(&(x, y, a, b)).copied().unwrap_or_else(T::zero)
    }

    pub fn marginal_a_coeff(&self, x: usize, a: usize) -> T {
        self.marg_a.get(&(x, a)).copied().unwrap_or_else(T::zero)
    }

    pub fn marginal_b_coeff(&self, y: usize, b: usize) -> T {
        self.marg_b.get(&(y, b)).copied().unwrap_or_else(T::zero)
    }

    /// Nonzero joint coefficients in `(x, y, a, b)` order.
    pub fn joint_terms(&self) -> impl Iterator<Item = ((usize, usize, usize, usize), T)> + '_ {
        self.joint.iter().filter(|(_, c)| **c != T::zero()).map(|(k, c)| (*k, *c))
    }

    pub fn marginal_a_terms(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        self.marg_a.iter().filter(|(_, c)| **c != T::zero()).map(|(k, c)| (*k, *c))
    }

    pub fn marginal_b_terms(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        self.marg_b.iter().filter(|(_, c)| **c != T::zero()).map(|(k, c)| (*k, *c))
    }

    pub fn term_count(&self) -> usize {
        self.joint_terms().count()
    }

    fn check_scenario(&self, p: &Behavior<T>) -> Result<()> {
        if p.scenario() != self.scenario {
            return Err(Error::ScenarioMismatch {
                expected: self.scenario.to_string(),
                found: p.scenario().to_string(),
            });
        }
        Ok(())
    }

    /// Marginal terms read `p_A(a|x)` at Bob's first input and `p_B(b|y)` at
    /// Alice's first input.
    pub fn eval(&self, p: &Behavior<T>) -> Result<T> {
        self.check_scenario(p)?;
        let mut v = self.constant;
        for (&(x, y, a, b), &c) in &self.joint {
            v += c * p.p(x, y, a, b);
        }
        for (&(x, a), &c) in &self.marg_a {
            v += c * p.marginal_a_at(a, x, 0);
        }
        for (&(y, b), &c) in &self.marg_b {
            v += c * p.marginal_b_at(b, y, 0);
        }
        Ok(v)
    }

    /// Coefficients of the functional that, evaluated on `p`, gives the value
    /// of `self` on `p` after nondetections are binned to the last outcome
    /// with efficiency `eta` (see [`Behavior::apply_detection_efficiency`]).
    /// Exact for no-signaling behaviors.
    pub fn with_detection_efficiency(&self, eta: T) -> Result<Self> {
        check_unit("detection efficiency", eta)?;
        let s = self.scenario;
        let (la, lb) = (s.outputs_a - 1, s.outputs_b - 1);
        let miss = T::one() - eta;
        let mut out = BellFunctional::new(s);
        out.constant = self.constant;
        for (&(x, y, a, b), &c) in &self.joint {
            out.add_joint(x, y, a, b, eta * eta * c)?;
            if a == la {
                out.add_marginal_b(y, b, eta * miss * c)?;
            }
            if b == lb {
                out.add_marginal_a(x, a, eta * miss * c)?;
            }
            if a == la && b == lb {
                out.constant += miss * miss * c;
            }
        }
        for (&(x, a), &c) in &self.marg_a {
            out.add_marginal_a(x, a, eta * c)?;
            if a == la {
                out.constant += miss * c;
            }
        }
        for (&(y, b), &c) in &self.marg_b {
            out.add_marginal_b(y, b, eta * c)?;
            if b == lb {
                out.constant += miss * c;
            }
        }
        out.known_local_bound = self.known_local_bound;
        Ok(out)
    }

    pub fn local_bound(&self) -> Result<T> {
        Ok(self.local_bound_with_cap(DEFAULT_STRATEGY_CAP)?.value)
    }

    /// Exact maximum over deterministic strategy pairs. For each Alice
    /// strategy Bob's best response separates over his inputs, so the cost is
    /// `mA^nA * nA * nB * mB`. Ties go to the first strategy in mixed-radix
    /// order (input 1 least significant).
    pub fn local_bound_with_cap(&self, cap: f64) -> Result<LocalBound<T>> {
        let s = self.scenario;
        let strategies = (s.outputs_a as f64).powi(s.inputs_a as i32) * (s.outputs_b as f64).powi(s.inputs_b as i32);
        if strategies > cap {
            return Err(Error::ScenarioTooLarge { strategies, cap });
        }
        let alice_count = s.outputs_a.pow(s.inputs_a as u32);
        let mut joint = vec![T::zero(); s.table_len()];
        for (&(x, y, a, b), &c) in &self.joint {
            joint[s.index(x, y, a, b)] += c;
        }
        let score = |code: usize| -> (T, Vec<usize>, Vec<usize>) {
            let alice = decode(code, s.outputs_a, s.inputs_a);
            let mut v = self.constant;
            for (x, &a) in alice.iter().enumerate() {
                v += self.marginal_a_coeff(x, a);
            }
            let mut bob = Vec::with_capacity(s.inputs_b);
            for y in 0..s.inputs_b {
                let mut best = (T::neg_infinity(), 0);
                for b in 0..s.outputs_b {
                    let mut t = self.marginal_b_coeff(y, b);
                    for (x, &a) in alice.iter().enumerate() {
                        t += joint[s.index(x, y, a, b)];
                    }
                    if t > best.0 {
                        best = (t, b);
                    }
                }
                v += best.0;
                bob.push(best.1);
            }
            (v, alice, bob)
        };
        let best = (0..alice_count)
            .into_par_iter()
            .map(|code| (code, score(code).0))
            .reduce(
                || (usize::MAX, T::neg_infinity()),
                |l, r| {
                    if r.1 > l.1 || (r.1 == l.1 && r.0 < l.0) {
                        r
                    } else {
                        l
                    }
                },
            );
        let (value, alice, bob) = score(best.0);
        Ok(LocalBound { value, alice, bob })
    }

    /// Recomputes the local bound and compares it with the stored one.
    pub fn verify_local_bound(&self, tol: T) -> Result<bool> {
        match self.known_local_bound {
            None => Ok(true),
            Some(known) => Ok((self.local_bound()? - known).abs() <= tol),
        }
    }

    /// Maximum over all normalised per-setting distributions, i.e. the largest
    /// coefficient of each setting. Only defined for functionals with
    /// nonnegative joint coefficients and no marginal terms.
    pub fn algebraic_max(&self) -> Result<T> {
        if self.marginal_a_terms().next().is_some() || self.marginal_b_terms().next().is_some() {
            return Err(Error::NotApplicable("functional has marginal terms".into()));
        }
        if self.joint.values().any(|&c| c < T::zero()) {
            return Err(Error::NotApplicable("functional has negative coefficients".into()));
        }
        let s = self.scenario;
        let mut total = self.constant;
        for x in 0..s.inputs_a {
            for y in 0..s.inputs_b {
                let mut best = T::zero();
                for a in 0..s.outputs_a {
                    for b in 0..s.outputs_b {
                        best = best.max(self.joint_coeff(x, y, a, b));
                    }
                }
                total += best;
            }
        }
        Ok(total)
    }

    /// Sparse text format, 1-based labels; repeated entries add up.
    ///
    /// ```text
    /// functional nA nB mA mB
    /// constant c
    /// local_bound L      (optional)
    /// x y a b coeff
    /// A x a coeff
    /// B y b coeff
    /// ```
    pub fn to_text(&self) -> String {
        let s = self.scenario;
        let mut out = format!(
            "functional {} {} {} {}\nconstant {}\n",
            s.inputs_a,
            s.inputs_b,
            s.outputs_a,
            s.outputs_b,
            fmt_exact(self.constant)
        );
        if let Some(l) = self.known_local_bound {
            out.push_str(&format!("local_bound {}\n", fmt_exact(l)));
        }
        for (&(x, y, a, b), &c) in &self.joint {
            out.push_str(&format!("{} {} {} {} {}\n", x + 1, y + 1, a + 1, b + 1, fmt_exact(c)));
        }
        for (&(x, a), &c) in &self.marg_a {
            out.push_str(&format!("A {} {} {}\n", x + 1, a + 1, fmt_exact(c)));
        }
        for (&(y, b), &c) in &self.marg_b {
            out.push_str(&format!("B {} {} {}\n", y + 1, b + 1, fmt_exact(c)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "empty functional file"))?;
        let t: Vec<&str> = header.split_whitespace().collect();
        if t.len() != 5 || t[0] != "functional" {
            return Err(Error::parse(ln, "expected `functional nA nB mA mB`"));
        }
        let s = Scenario::new(
            parse_usize(t[1], ln)?,
            parse_usize(t[2], ln)?,
            parse_usize(t[3], ln)?,
            parse_usize(t[4], ln)?,
        )?;
        let mut f = BellFunctional::new(s);
        for (ln, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.as_slice() {
                ["constant", c] => f.constant += parse_real(c, ln)?,
                ["local_bound", c] => f.known_local_bound = Some(parse_real(c, ln)?),
                ["A", x, a, c] => {
                    let x = label(x, s.inputs_a, ln, "Alice input")?;
                    let a = label(a, s.outputs_a, ln, "Alice outcome")?;
                    f.add_marginal_a(x, a, parse_real(c, ln)?)?;
                }
                ["B", y, b, c] => {
                    let y = label(y, s.inputs_b, ln, "Bob input")?;
                    let b = label(b, s.outputs_b, ln, "Bob outcome")?;
                    f.add_marginal_b(y, b, parse_real(c, ln)?)?;
                }
                [x, y, a, b, c] => {
                    let x = label(x, s.inputs_a, ln, "Alice input")?;
                    let y = label(y, s.inputs_b, ln, "Bob input")?;
                    let a = label(a, s.outputs_a, ln, "Alice outcome")?;
                    let b = label(b, s.outputs_b, ln, "Bob outcome")?;
                    f.add_joint(x, y, a, b, parse_real(c, ln)?)?;
                }
                _ => return Err(Error::parse(ln, format!("unrecognised line `{line}`"))),
            }
        }
        Ok(f)
    }
}

/// Mixed-radix digits of `code`, least significant first.
pub(crate) fn decode(mut code: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(code % radix);
        code /= radix;
    }
    out
}

/// `p(1,1|i,u) + p(1,1|j,u) + p(1,1|i,v) - p(1,1|j,v) - p_A(1|i) - p_B(1|u)`,
/// scaled by `sign`; arguments are 0-based inputs.
fn add_ch<T: Real>(f: &mut BellFunctional<T>, (i, j, u, v): (usize, usize, usize, usize), sign: T) {
    let one = T::one();
    f.add_joint(i, u, 0, 0, sign * one).expect("in range");
    f.add_joint(j, u, 0, 0, sign * one).expect("in range");
    f.add_joint(i, v, 0, 0, sign * one).expect("in range");
    f.add_joint(j, v, 0, 0, -sign * one).expect("in range");
    f.add_marginal_a(i, 0, -sign * one).expect("in range");
    f.add_marginal_b(u, 0, -sign * one).expect("in range");
}

/// Four-input, two-outcome inequality with local bound 0, assembled from four
/// CH blocks and four single-party terms.
pub fn make_i4422<T: Real>() -> BellFunctional<T> {
    let mut f = BellFunctional::new(Scenario::symmetric(4, 2).expect("valid"));
    let one = T::one();
    add_ch(&mut f, (0, 1, 0, 1), one);
    add_ch(&mut f, (2, 3, 2, 3), one);
    add_ch(&mut f, (1, 0, 3, 2), -one);
    add_ch(&mut f, (3, 2, 1, 0), -one);
    for k in [1, 3] {
        f.add_marginal_a(k, 0, -one).expect("in range");
        f.add_marginal_b(k, 0, -one).expect("in range");
    }
    f.set_known_local_bound(Some(T::zero()));
    f
}

/// `(x, y)` and the eight rewarded `(a, b)` pairs, all 1-based.
const I234_TERMS: [((usize, usize), [(usize, usize); 8]); 9] = [
    ((1, 1), [(1, 1), (1, 2), (2, 1), (2, 2), (3, 3), (3, 4), (4, 3), (4, 4)]),
    ((1, 2), [(1, 1), (1, 2), (2, 3), (2, 4), (3, 1), (3, 2), (4, 3), (4, 4)]),
    ((2, 1), [(1, 1), (1, 3), (2, 1), (2, 3), (3, 2), (3, 4), (4, 2), (4, 4)]),
    ((2, 2), [(1, 1), (1, 3), (2, 2), (2, 4), (3, 1), (3, 3), (4, 2), (4, 4)]),
    ((1, 3), [(1, 1), (1, 2), (2, 3), (2, 4), (3, 3), (3, 4), (4, 1), (4, 2)]),
    ((2, 3), [(1, 1), (1, 3), (2, 2), (2, 4), (3, 2), (3, 4), (4, 1), (4, 3)]),
    ((3, 1), [(1, 1), (1, 4), (2, 1), (2, 4), (3, 2), (3, 3), (4, 2), (4, 3)]),
    ((3, 2), [(1, 1), (1, 4), (2, 2), (2, 3), (3, 1), (3, 4), (4, 2), (4, 3)]),
    ((3, 3), [(1, 2), (1, 3), (2, 1), (2, 4), (3, 1), (3, 4), (4, 2), (4, 3)]),
];

/// Three-input, four-outcome inequality: 72 unit terms, local bound 8.
pub fn make_i234<T: Real>() -> BellFunctional<T> {
    let mut f = BellFunctional::new(Scenario::symmetric(3, 4).expect("valid"));
    for ((x, y), pairs) in I234_TERMS {
        for (a, b) in pairs {
            f.add_joint(x - 1, y - 1, a - 1, b - 1, T::one()).expect("in range");
        }
    }
    f.set_known_local_bound(Some(T::of(8.0)));
    f
}

/// `<A1B1> + <A1B2> + <A2B1> - <A2B2>` expanded over probabilities, with
/// outcome 1 read as `+1`.
pub fn make_chsh<T: Real>() -> BellFunctional<T> {
    let mut f = BellFunctional::new(Scenario::symmetric(2, 2).expect("valid"));
    for x in 0..2 {
        for y in 0..2 {
            let setting = if x == 1 && y == 1 { -T::one() } else { T::one() };
            for a in 0..2 {
                for b in 0..2 {
                    let parity = if a == b { T::one() } else { -T::one() };
                    f.add_joint(x, y, a, b, setting * parity).expect("in range");
                }
            }
        }
    }
    f.set_known_local_bound(Some(T::two()));
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::quantum::{build_q234, build_q4422, maximally_entangled, pauli_x, pauli_z, Measurement, QuantumRealization};
    use num_complex::Complex;

    fn sharp(obs: &CMatrix<f64>) -> Measurement<f64> {
        let id = CMatrix::identity(2);
        let half = Complex::new(0.5, 0.0);
        Measurement::new(vec![(&id + obs).scale(half), (&id - obs).scale(half)], 1e-12).unwrap()
    }

    fn tsirelson() -> Behavior<f64> {
        let (x, z) = (pauli_x::<f64>(), pauli_z::<f64>());
        let r = 0.5f64.sqrt();
        let plus = (&z + &x).scale_real(r);
        let minus = (&z - &x).scale_real(r);
        let q = QuantumRealization::new(
            maximally_entangled(2).unwrap(),
            vec![sharp(&z), sharp(&x)],
            vec![sharp(&plus), sharp(&minus)],
        )
        .unwrap();
        q.behavior().unwrap()
    }

    #[test]
    fn i234_structure() {
        let f = make_i234::<f64>();
        assert_eq!(f.term_count(), 72);
        assert!(f.joint_terms().all(|(_, c)| c == 1.0));
        assert_eq!(f.joint_coeff(2, 2, 0, 1), 1.0);
        assert_eq!(f.joint_coeff(2, 2, 0, 0), 0.0);
        let u = Behavior::uniform(f.scenario());
        assert!((f.eval(&u).unwrap() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn i4422_expansion() {
        let f = make_i4422::<f64>();
        // -I_CH^(2,1;4,3) contributes -p(1,1|2,4)
        assert_eq!(f.joint_coeff(1, 3, 0, 0), -1.0);
        // explicit -1, +1 from -I_CH^(2,1;4,3), none from the other blocks
        assert_eq!(f.marginal_a_coeff(1, 0), 0.0);
        assert_eq!(f.marginal_a_coeff(0, 0), -1.0);
        assert_eq!(f.marginal_b_coeff(3, 0), 0.0);
        let det = Behavior::deterministic(f.scenario(), &[0; 4], &[0; 4]).unwrap();
        assert!((f.eval(&det).unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn chsh_tsirelson() {
        let f = make_chsh::<f64>();
        assert!((f.eval(&tsirelson()).unwrap() - 8f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn local_bounds() {
        assert_eq!(make_i4422::<f64>().local_bound().unwrap(), 0.0);
        assert_eq!(make_i234::<f64>().local_bound().unwrap(), 8.0);
        assert_eq!(make_chsh::<f64>().local_bound().unwrap(), 2.0);
        assert!(make_i234::<f64>().verify_local_bound(1e-12).unwrap());
        let lb = make_chsh::<f64>().local_bound_with_cap(1e8).unwrap();
        assert_eq!((lb.alice, lb.bob), (vec![0, 0], vec![0, 0]));
    }

    #[test]
    fn strategy_cap() {
        let f = make_i234::<f64>();
        assert!(matches!(
            f.local_bound_with_cap(4095.0),
            Err(Error::ScenarioTooLarge { .. })
        ));
    }

    #[test]
    fn algebraic_maxima() {
        assert_eq!(make_i234::<f64>().algebraic_max().unwrap(), 9.0);
        assert!(matches!(make_i4422::<f64>().algebraic_max(), Err(Error::NotApplicable(_))));
        let mut f = BellFunctional::<f64>::new(Scenario::new(1, 1, 2, 2).unwrap());
        f.add_joint(0, 0, 1, 0, 3.0).unwrap();
        f.add_joint(0, 0, 0, 0, 1.5).unwrap();
        assert_eq!(f.algebraic_max().unwrap(), 3.0);
    }

    #[test]
    fn q234_reaches_nine() {
        let f = make_i234::<f64>();
        let v = f.eval(&build_q234::<f64>().behavior().unwrap()).unwrap();
        assert!((v - 9.0).abs() < 1e-9);
    }

    #[test]
    fn q4422_anchor() {
        let f = make_i4422::<f64>();
        let v = f.eval(&build_q4422::<f64>().behavior().unwrap()).unwrap();
        assert!((v - 0.2990380342733501).abs() < 1e-12);
    }

    #[test]
    fn efficiency_functional_matches_map() {
        let p = build_q4422::<f64>().behavior().unwrap();
        let f = make_i4422::<f64>();
        for eta in [0.0, 0.3, 0.77, 1.0] {
            let direct = f.eval(&p.apply_detection_efficiency(eta).unwrap()).unwrap();
            let folded = f.with_detection_efficiency(eta).unwrap().eval(&p).unwrap();
            assert!((direct - folded).abs() < 1e-12, "eta {eta}");
        }
    }

    #[test]
    fn mismatched_scenario() {
        let p = Behavior::<f64>::uniform(Scenario::symmetric(2, 2).unwrap());
        assert!(matches!(make_i234::<f64>().eval(&p), Err(Error::ScenarioMismatch { .. })));
    }

    #[test]
    fn text_round_trip() {
        for f in [make_i4422::<f64>(), make_i234(), make_chsh()] {
            assert_eq!(BellFunctional::<f64>::from_text(&f.to_text()).unwrap(), f);
        }
        assert!(BellFunctional::<f64>::from_text("functional 2 2 2 2\n3 1 1 1 1\n").is_err());
    }
}
