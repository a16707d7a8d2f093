use std::fmt::Write as _;

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quantum::{projector_from_coeffs_tol, BipartiteState, Measurement, QuantumRealization};
use crate::textio::{content_lines, parse_real};

/// Ququart pair `sqrt((1 - eps^2)/3) (|11> + |22> + |33>) + eps |44>`
/// measured with two-outcome projectors of the sign pattern
///
/// ```text
/// Alice: (-u, -u, p1), (-v, v, p2), (u, u, p1), (v, -v, p2)
/// Bob:   (-u, u, q1), (-v, -v, q2), (u, -u, q1), (v, v, q2)
/// ```
///
/// Each coefficient vector is renormalised when realized.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamFamily4422 {
    pub epsilon: f64,
    pub u: f64,
    pub v: f64,
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub q1: [f64; 2],
    pub q2: [f64; 2],
}

pub(super) const PARAM_COUNT: usize = 11;

impl ParamFamily4422 {
    /// The published maximally entangled realization.
    pub fn published() -> Self {
        ParamFamily4422 {
            epsilon: 0.5,
            u: 0.2816,
            v: 0.5438,
            p1: [0.9159, 0.0499],
            p2: [0.5625, -0.3035],
            q1: [0.9159, -0.0499],
            q2: [0.5625, 0.3035],
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let mut x = [0.0; PARAM_COUNT];
        x[0] = rng.gen_range(0.0..1.0);
        for v in &mut x[1..] {
            *v = rng.gen_range(-1.0..1.0);
        }
        ParamFamily4422::from_vec(&x).expect("eleven entries")
    }

    /// `[epsilon, u, v, p1, p2, q1, q2]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = vec![self.epsilon, self.u, self.v];
        for w in [self.p1, self.p2, self.q1, self.q2] {
            out.extend_from_slice(&w);
        }
        out
    }

    /// Inverse of [`Self::to_vec`]; `epsilon` is clamped to `[0, 1]`.
    pub fn from_vec(x: &[f64]) -> Result<Self> {
        if x.len() != PARAM_COUNT {
            return Err(Error::Dimension(format!("{} parameters, expected {PARAM_COUNT}", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(ParamFamily4422 {
            epsilon: x[0].clamp(0.0, 1.0),
            u: x[1],
            v: x[2],
            p1: [x[3], x[4]],
            p2: [x[5], x[6]],
            q1: [x[7], x[8]],
            q2: [x[9], x[10]],
        })
    }

    pub fn state(&self) -> Result<BipartiteState<f64>> {
        let e = self.epsilon;
        let a = ((1.0 - e * e) / 3.0).max(0.0).sqrt();
        let mut psi = vec![Complex::new(0.0, 0.0); 16];
        for (i, amp) in [a, a, a, e].into_iter().enumerate() {
            psi[i * 4 + i] = Complex::new(amp, 0.0);
        }
        BipartiteState::pure(4, 4, &psi)
    }

    fn coefficient_rows(&self) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
        let (u, v, p1, p2, q1, q2) = (self.u, self.v, self.p1, self.p2, self.q1, self.q2);
        let alice = [
            [-u, -u, p1[0], p1[1]],
            [-v, v, p2[0], p2[1]],
            [u, u, p1[0], p1[1]],
            [v, -v, p2[0], p2[1]],
        ];
        let bob = [
            [-u, u, q1[0], q1[1]],
            [-v, -v, q2[0], q2[1]],
            [u, -u, q1[0], q1[1]],
            [v, v, q2[0], q2[1]],
        ];
        (alice, bob)
    }

    pub fn realize(&self) -> Result<QuantumRealization<f64>> {
        let (alice, bob) = self.coefficient_rows();
        let load = |rows: &[[f64; 4]; 4]| -> Result<Vec<Measurement<f64>>> {
            rows.iter()
                .map(|r| {
                    let n = r.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if !(n > 1e-12) {
                        return Err(Error::InvalidArgument("zero coefficient vector".into()));
                    }
                    let c: Vec<Complex<f64>> = r.iter().map(|&x| Complex::new(x / n, 0.0)).collect();
                    projector_from_coeffs_tol(&c, 1e-8)
                })
                .collect()
        };
        QuantumRealization::new(self.state()?, load(&alice)?, load(&bob)?)
    }

    /// `name value` lines in the order of [`Self::to_vec`].
    pub fn to_text(&self) -> String {
        let names = ["epsilon", "u", "v", "p11", "p12", "p21", "p22", "q11", "q12", "q21", "q22"];
        let mut out = String::from("family 4422\n");
        for (n, x) in names.iter().zip(self.to_vec()) {
            let _ = writeln!(out, "{n} {x:.17e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (line, l) in content_lines(text) {
            let mut it = l.split_whitespace();
            let key = it.next().unwrap_or_default();
            if key == "family" {
                continue;
            }
            let v = it
                .next()
                .ok_or_else(|| Error::parse(line, format!("missing value for `{key}`")))?;
            values.push(parse_real::<f64>(v, line)?);
        }
        Self::from_vec(&values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::build_q4422;

    #[test]
    fn published_point_matches_fixed_realization() {
        let p = ParamFamily4422::published().realize().unwrap().behavior().unwrap();
        let q = build_q4422::<f64>().behavior().unwrap();
        assert!(p.max_abs_diff(&q) < 1e-6);
    }

    #[test]
    fn epsilon_one_is_product_state() {
        let mut f = ParamFamily4422::published();
        f.epsilon = 1.0;
        let s = f.state().unwrap();
        assert!((s.density()[(15, 15)].re - 1.0).abs() < 1e-15);
        assert!(s.density()[(0, 0)].re.abs() < 1e-15);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let mut f = ParamFamily4422::published();
        f.u = 0.0;
        f.p1 = [0.0, 0.0];
        assert!(f.realize().is_err());
    }

    #[test]
    fn text_round_trip() {
        let f = ParamFamily4422::published();
        assert_eq!(ParamFamily4422::from_text(&f.to_text()).unwrap(), f);
    }
}
