//! Behaviors `p(a,b|x,y)`, detection-efficiency and noise transformations, and
//! structural checks.
//!
//! Indices are 0-based in the API; the text format and the CLI use 1-based
//! labels (label = index + 1).

use std::fmt;

use crate::error::{Error, Result};
use crate::quantum::QuantumRealization;
use crate::real::Real;
use crate::textio::{content_lines, fmt_exact, label, parse_real, parse_usize};

/// Input and outcome counts of a bipartite Bell scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Scenario {
    pub inputs_a: usize,
    pub inputs_b: usize,
    pub outputs_a: usize,
    pub outputs_b: usize,
}

impl Scenario {
    pub fn new(inputs_a: usize, inputs_b: usize, outputs_a: usize, outputs_b: usize) -> Result<Self> {
        if inputs_a == 0 || inputs_b == 0 || outputs_a == 0 || outputs_b == 0 {
            return Err(Error::InvalidArgument(format!(
                "scenario counts must be positive, got ({inputs_a},{inputs_b},{outputs_a},{outputs_b})"
            )));
        }
        Ok(Scenario {
            inputs_a,
            inputs_b,
            outputs_a,
            outputs_b,
        })
    }

    /// Same inputs and outputs for both parties.
    pub fn symmetric(inputs: usize, outputs: usize) -> Result<Self> {
        Self::new(inputs, inputs, outputs, outputs)
    }

    pub fn table_len(&self) -> usize {
        self.inputs_a * self.inputs_b * self.outputs_a * self.outputs_b
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.inputs_b + y) * self.outputs_a + a) * self.outputs_b + b
    }

    pub fn check(&self, x: usize, y: usize, a: usize, b: usize) -> Result<()> {
        if x >= self.inputs_a || y >= self.inputs_b || a >= self.outputs_a || b >= self.outputs_b {
            return Err(Error::Index(format!(
                "(x={x}, y={y}, a={a}, b={b}) outside scenario {self}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{},{})",
            self.inputs_a, self.inputs_b, self.outputs_a, self.outputs_b
        )
    }
}

/// Detection efficiency and visibility, both in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams<T> {
    pub eta: T,
    pub v: T,
}

impl<T: Real> NoiseParams<T> {
    pub fn new(eta: T, v: T) -> Result<Self> {
        check_unit("detection efficiency", eta)?;
        check_unit("visibility", v)?;
        Ok(NoiseParams { eta, v })
    }

    pub fn ideal() -> Self {
        NoiseParams {
            eta: T::one(),
            v: T::one(),
        }
    }
}

pub(crate) fn check_unit<T: Real>(what: &str, x: T) -> Result<()> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::InvalidArgument(format!("{what} {x} outside [0, 1]")));
    }
    Ok(())
}

/// Tolerance for negative entries that are clamped to zero.
pub const NEGATIVITY_TOL: f64 = 1e-12;
/// Tolerance on the normalisation of each `p(.,.|x,y)`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Full table of conditional probabilities `p(a,b|x,y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior<T> {
    scenario: Scenario,
    table: Vec<T>,
}

/// Outcome of [`Behavior::check_no_signaling`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoSignalingReport<T> {
    /// Largest spread of Alice's marginals across Bob's inputs.
    pub max_deviation_a: T,
    /// Largest spread of Bob's marginals across Alice's inputs.
    pub max_deviation_b: T,
    pub tol: T,
}

impl<T: Real> NoSignalingReport<T> {
    pub fn max_deviation(&self) -> T {
        self.max_deviation_a.max(self.max_deviation_b)
    }

    pub fn passes(&self) -> bool {
        self.max_deviation() <= self.tol
    }
}

impl<T: Real> Behavior<T> {
    /// Validates range and normalisation; entries within `-1e-12` are clamped to 0.
    pub fn new(scenario: Scenario, mut table: Vec<T>) -> Result<Self> {
        if table.len() != scenario.table_len() {
            return Err(Error::Dimension(format!(
                "behavior table has {} entries, scenario {} needs {}",
                table.len(),
                scenario,
                scenario.table_len()
            )));
        }
        let neg = T::tol(NEGATIVITY_TOL);
        for p in table.iter_mut() {
            if !p.is_finite() || *p < -neg || *p > T::one() + neg {
                return Err(Error::Invariant {
                    what: "behavior",
                    detail: format!("probability {p} outside [0, 1]"),
                });
            }
            if *p < T::zero() {
                *p = T::zero();
            }
        }
        let behavior = Behavior { scenario, table };
        for x in 0..scenario.inputs_a {
            for y in 0..scenario.inputs_b {
                let s = behavior.setting_sum(x, y);
                if (s - T::one()).abs() > T::tol(NORMALIZATION_TOL) {
                    return Err(Error::Invariant {
                        what: "behavior",
                        detail: format!(
                            "p(.,.|{},{}) sums to {s}",
                            x + 1,
                            y + 1
                        ),
                    });
                }
            }
        }
        Ok(behavior)
    }

    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Result<Self> {
        let mut table = Vec::with_capacity(scenario.table_len());
        for x in 0..scenario.inputs_a {
            for y in 0..scenario.inputs_b {
                for a in 0..scenario.outputs_a {
                    for b in 0..scenario.outputs_b {
                        table.push(f(x, y, a, b));
                    }
                }
            }
        }
        Self::new(scenario, table)
    }

    /// Every outcome pair equally likely.
    pub fn uniform(scenario: Scenario) -> Self {
        let p = T::one() / T::of_usize(scenario.outputs_a * scenario.outputs_b);
        Behavior {
            scenario,
            table: vec![p; scenario.table_len()],
        }
    }

    /// Local deterministic behavior: Alice answers `alice[x]`, Bob `bob[y]`.
    pub fn deterministic(scenario: Scenario, alice: &[usize], bob: &[usize]) -> Result<Self> {
        if alice.len() != scenario.inputs_a || bob.len() != scenario.inputs_b {
            return Err(Error::Dimension("strategy length must match input count".into()));
        }
        if alice.iter().any(|&a| a >= scenario.outputs_a) || bob.iter().any(|&b| b >= scenario.outputs_b) {
            return Err(Error::Index("strategy outcome outside scenario".into()));
        }
        Self::from_fn(scenario, |x, y, a, b| {
            if alice[x] == a && bob[y] == b {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// `lambda * self + (1 - lambda) * other`
    pub fn mix(&self, lambda: T, other: &Self) -> Result<Self> {
        if self.scenario != other.scenario {
            return Err(Error::ScenarioMismatch {
                expected: self.scenario.to_string(),
                found: other.scenario.to_string(),
            });
        }
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(&p, &q)| lambda * p + (T::one() - lambda) * q)
            .collect();
        Self::new(self.scenario, table)
    }

    #[inline]
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    #[inline]
    pub fn p(&self, x: usize, y: usize, a: usize, b: usize) -> T {
        self.table[self.scenario.index(x, y, a, b)]
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> Result<T> {
        self.scenario.check(x, y, a, b)?;
        Ok(self.p(x, y, a, b))
    }

    fn setting_sum(&self, x: usize, y: usize) -> T {
        let start = self.scenario.index(x, y, 0, 0);
        let len = self.scenario.outputs_a * self.scenario.outputs_b;
        self.table[start..start + len].iter().copied().sum()
    }

    /// `sum_b p(a,b|x,y)` at a specific Bob input.
    pub fn marginal_a_at(&self, a: usize, x: usize, y: usize) -> T {
        (0..self.scenario.outputs_b).map(|b| self.p(x, y, a, b)).sum()
    }

    /// `sum_a p(a,b|x,y)` at a specific Alice input.
    pub fn marginal_b_at(&self, b: usize, y: usize, x: usize) -> T {
        (0..self.scenario.outputs_a).map(|a| self.p(x, y, a, b)).sum()
    }

    /// `p_A(a|x)`, read at Bob's first input. For no-signaling behaviors every
    /// input gives the same value; [`Self::check_no_signaling`] measures the spread.
    pub fn marginal_a(&self, a: usize, x: usize) -> Result<T> {
        self.scenario.check(x, 0, a, 0)?;
        Ok(self.marginal_a_at(a, x, 0))
    }

    /// `p_B(b|y)`, read at Alice's first input.
    pub fn marginal_b(&self, b: usize, y: usize) -> Result<T> {
        self.scenario.check(0, y, 0, b)?;
        Ok(self.marginal_b_at(b, y, 0))
    }

    /// Largest change of either party's marginals under a change of the other
    /// party's input.
    pub fn check_no_signaling(&self, tol: T) -> NoSignalingReport<T> {
        let s = self.scenario;
        let mut dev_a = T::zero();
        for x in 0..s.inputs_a {
            for a in 0..s.outputs_a {
                let vals: Vec<T> = (0..s.inputs_b).map(|y| self.marginal_a_at(a, x, y)).collect();
                dev_a = dev_a.max(spread(&vals));
            }
        }
        let mut dev_b = T::zero();
        for y in 0..s.inputs_b {
            for b in 0..s.outputs_b {
                let vals: Vec<T> = (0..s.inputs_a).map(|x| self.marginal_b_at(b, y, x)).collect();
                dev_b = dev_b.max(spread(&vals));
            }
        }
        NoSignalingReport {
            max_deviation_a: dev_a,
            max_deviation_b: dev_b,
            tol,
        }
    }

    /// Nondetections binned to the last outcome, with equal efficiency `eta`
    /// on both sides:
    ///
    /// `p'(a,b|x,y) = eta^2 p + eta (1-eta) [d(a,m) p_B(b|y) + d(b,m) p_A(a|x)] + d(a,m) d(b,m) (1-eta)^2`
    ///
    /// The marginals are taken from the untransformed table at the same
    /// setting, which coincides with `p_A`, `p_B` for no-signaling input.
    pub fn apply_detection_efficiency(&self, eta: T) -> Result<Self> {
        check_unit("detection efficiency", eta)?;
        let s = self.scenario;
        let (la, lb) = (s.outputs_a - 1, s.outputs_b - 1);
        let miss = T::one() - eta;
        let eta2 = eta * eta;
        let cross = eta * miss;
        let both = miss * miss;
        let mut table = Vec::with_capacity(self.table.len());
        for x in 0..s.inputs_a {
            for y in 0..s.inputs_b {
                let pa: Vec<T> = (0..s.outputs_a).map(|a| self.marginal_a_at(a, x, y)).collect();
                let pb: Vec<T> = (0..s.outputs_b).map(|b| self.marginal_b_at(b, y, x)).collect();
                for a in 0..s.outputs_a {
                    for b in 0..s.outputs_b {
                        let mut v = eta2 * self.p(x, y, a, b);
                        if a == la {
                            v += cross * pb[b];
                        }
                        if b == lb {
                            v += cross * pa[a];
                        }
                        if a == la && b == lb {
                            v += both;
                        }
                        table.push(v);
                    }
                }
            }
        }
        Self::new(s, table)
    }

    /// Keeps Alice inputs `xs` and Bob inputs `ys`, in that order.
    pub fn restrict_inputs(&self, xs: &[usize], ys: &[usize]) -> Result<Self> {
        let s = self.scenario;
        if xs.iter().any(|&x| x >= s.inputs_a) || ys.iter().any(|&y| y >= s.inputs_b) {
            return Err(Error::Index("restricted input outside scenario".into()));
        }
        let sub = Scenario::new(xs.len(), ys.len(), s.outputs_a, s.outputs_b)?;
        Self::from_fn(sub, |x, y, a, b| self.p(xs[x], ys[y], a, b))
    }

    /// Largest entrywise difference to another behavior of the same scenario.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.scenario, other.scenario);
        self.table
            .iter()
            .zip(&other.table)
            .map(|(&p, &q)| (p - q).abs())
            .fold(T::zero(), T::max)
    }

    /// Text table: a `behavior nA nB mA mB` header, then one `x y a b p` row
    /// per entry with 1-based labels and 17 significant digits.
    pub fn to_text(&self) -> String {
        let s = self.scenario;
        let mut out = format!(
            "behavior {} {} {} {}\n",
            s.inputs_a, s.inputs_b, s.outputs_a, s.outputs_b
        );
        for x in 0..s.inputs_a {
            for y in 0..s.inputs_b {
                for a in 0..s.outputs_a {
                    for b in 0..s.outputs_b {
                        out.push_str(&format!(
                            "{} {} {} {} {}\n",
                            x + 1,
                            y + 1,
                            a + 1,
                            b + 1,
                            fmt_exact(self.p(x, y, a, b))
                        ));
                    }
                }
            }
        }
        out
    }

    /// Parses [`Self::to_text`] output. Rows may come in any order but every
    /// entry must be given exactly once.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "empty behavior file"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "behavior" {
            return Err(Error::parse(ln, "expected `behavior nA nB mA mB`"));
        }
        let s = Scenario::new(
            parse_usize(toks[1], ln)?,
            parse_usize(toks[2], ln)?,
            parse_usize(toks[3], ln)?,
            parse_usize(toks[4], ln)?,
        )?;
        let mut table: Vec<Option<T>> = vec![None; s.table_len()];
        for (ln, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 5 {
                return Err(Error::parse(ln, "expected `x y a b p`"));
            }
            let x = label(t[0], s.inputs_a, ln, "Alice input")?;
            let y = label(t[1], s.inputs_b, ln, "Bob input")?;
            let a = label(t[2], s.outputs_a, ln, "Alice outcome")?;
            let b = label(t[3], s.outputs_b, ln, "Bob outcome")?;
            let slot = &mut table[s.index(x, y, a, b)];
            if slot.is_some() {
                return Err(Error::parse(ln, "duplicate entry"));
            }
            *slot = Some(parse_real(t[4], ln)?);
        }
        let table: Option<Vec<T>> = table.into_iter().collect();
        let table = table.ok_or_else(|| Error::parse(0, "behavior table is incomplete"))?;
        Self::new(s, table)
    }
}

fn spread<T: Real>(vals: &[T]) -> T {
    let lo = vals.iter().copied().fold(T::infinity(), T::min);
    let hi = vals.iter().copied().fold(T::neg_infinity(), T::max);
    if vals.is_empty() {
        T::zero()
    } else {
        hi - lo
    }
}

/// Depolarise the state by `noise.v`, compute the behavior, then bin
/// nondetections with efficiency `noise.eta`.
pub fn degrade<T: Real>(q: &QuantumRealization<T>, noise: NoiseParams<T>) -> Result<Behavior<T>> {
    check_unit("detection efficiency", noise.eta)?;
    let state = q.state().depolarize(noise.v)?;
    let noisy = q.with_state(state)?;
    noisy.behavior()?.apply_detection_efficiency(noise.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{build_q234, build_q4422};

    fn two_two() -> Scenario {
        Scenario::symmetric(2, 2).unwrap()
    }

    #[test]
    fn uniform_marginals() {
        let s = Scenario::symmetric(3, 4).unwrap();
        let p = Behavior::<f64>::uniform(s);
        assert_eq!(p.marginal_b(2, 1).unwrap(), 0.25);
        assert!(p.marginal_a(0, 3).is_err());
    }

    #[test]
    fn deterministic_marginal() {
        let s = two_two();
        let p = Behavior::<f64>::deterministic(s, &[0, 0], &[0, 0]).unwrap();
        assert_eq!(p.marginal_a(0, 1).unwrap(), 1.0);
    }

    #[test]
    fn q234_marginals_are_maximally_mixed() {
        let p = build_q234::<f64>().behavior().unwrap();
        for x in 0..3 {
            for a in 0..4 {
                assert!((p.marginal_a(a, x).unwrap() - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perturbed_table_signals() {
        let s = two_two();
        // shift mass between Alice outcomes at y=1 only
        let mut table = Behavior::<f64>::uniform(s).table().to_vec();
        table[s.index(0, 0, 0, 0)] += 0.01;
        table[s.index(0, 0, 1, 0)] -= 0.01;
        let p = Behavior::new(s, table).unwrap();
        let rep = p.check_no_signaling(1e-9);
        assert!(!rep.passes());
        assert!((rep.max_deviation_a - 0.01).abs() < 1e-12);
    }

    #[test]
    fn efficiency_extremes() {
        let p = build_q4422::<f64>().behavior().unwrap();
        let same = p.apply_detection_efficiency(1.0).unwrap();
        assert_eq!(same, p);
        let dead = p.apply_detection_efficiency(0.0).unwrap();
        let s = p.scenario();
        for x in 0..4 {
            for y in 0..4 {
                for a in 0..2 {
                    for b in 0..2 {
                        let want = if a == 1 && b == 1 { 1.0 } else { 0.0 };
                        assert_eq!(dead.p(x, y, a, b), want);
                    }
                }
            }
        }
        assert!(p.apply_detection_efficiency(1.2).is_err());
        assert_eq!(s, dead.scenario());
    }

    #[test]
    fn efficiency_on_uniform_by_hand() {
        // eta = 1/2, p = 1/4, marginals 1/2:
        // p'(1,1) = 1/4 * 1/4 = 1/16
        // p'(2,2) = 1/16 + 1/4 * (1/2 + 1/2) + 1/4 = 0.5625
        let p = Behavior::<f64>::uniform(two_two());
        let q = p.apply_detection_efficiency(0.5).unwrap();
        assert!((q.p(0, 0, 0, 0) - 0.0625).abs() < 1e-15);
        assert!((q.p(0, 0, 1, 1) - 0.5625).abs() < 1e-15);
        assert!((q.p(0, 0, 0, 1) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn degraded_behaviors_stay_valid() {
        let q = build_q234::<f64>();
        let p = degrade(&q, NoiseParams::new(0.9, 1.0).unwrap()).unwrap();
        assert!(p.check_no_signaling(1e-9).passes());
        let q = build_q4422::<f64>();
        let ideal = degrade(&q, NoiseParams::ideal()).unwrap();
        assert_eq!(ideal, q.behavior().unwrap());
    }

    #[test]
    fn fully_mixed_q4422_by_trace_algebra() {
        // v = 0: p(1,1|x,y) = tr(P_x) tr(P_y) / 16 = 1/16 for rank-1 projectors
        let q = build_q4422::<f64>();
        let p = degrade(&q, NoiseParams::new(1.0, 0.0).unwrap()).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert!((p.p(x, y, 0, 0) - 1.0 / 16.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_tables() {
        let s = two_two();
        assert!(Behavior::new(s, vec![0.25f64; 15]).is_err());
        assert!(Behavior::new(s, vec![0.3f64; 16]).is_err());
        let mut t = vec![0.25f64; 16];
        t[0] = -1e-3;
        t[1] = 0.251;
        t[2] = 0.25 + 0.249;
        assert!(Behavior::new(s, t).is_err());
        let mut t = vec![0.25f64; 16];
        t[0] = 0.25 + 5e-13;
        t[1] = 0.25 - 5e-13;
        assert!(Behavior::new(s, t).is_ok());
    }

    #[test]
    fn text_round_trip() {
        let p = build_q4422::<f64>().behavior().unwrap();
        let back = Behavior::<f64>::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
        assert!(Behavior::<f64>::from_text("behavior 2 2 2 2\n1 1 1 1 1\n").is_err());
    }
}
