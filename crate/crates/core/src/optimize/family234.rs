use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quantum::{commuting_pair_measurement, pauli_x, pauli_z, BipartiteState, Measurement, QuantumRealization, ANALYTIC_TOL};
use crate::textio::{content_lines, parse_real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ansatz {
    /// Each qubit measured along `cos a Z + sin a X`; two angles per
    /// measurement.
    Planar,
    /// Projectors `V^dag |a><a| V`, `V = F diag(e^{i phi})` with `F` the
    /// Fourier matrix (its conjugate for Bob); four phases per measurement.
    FourierPhase,
    /// The magic-square observable pairs with every Pauli factor rotated in
    /// the Z-X plane; one angle per factor, zero at the square itself.
    CommutingPair,
}

impl Ansatz {
    pub const ALL: [Ansatz; 3] = [Ansatz::Planar, Ansatz::FourierPhase, Ansatz::CommutingPair];

    pub fn name(self) -> &'static str {
        match self {
            Ansatz::Planar => "planar",
            Ansatz::FourierPhase => "fourier-phase",
            Ansatz::CommutingPair => "commuting-pair",
        }
    }

    /// Angles per party.
    pub fn angle_count(self) -> usize {
        match self {
            Ansatz::Planar => 6,
            Ansatz::FourierPhase => 12,
            Ansatz::CommutingPair => 8,
        }
    }
}

impl fmt::Display for Ansatz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ansatz {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ansatz::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ansatz `{s}` (planar, fourier-phase, commuting-pair)")))
    }
}

/// Pauli factor of a magic-square observable: qubit and base angle in the
/// Z-X plane (`0` for Z, `pi/2` for X).
type Factor = (usize, f64);

const Z: f64 = 0.0;
const X: f64 = FRAC_PI_2;

/// Observable pairs per measurement, Alice then Bob.
const SQUARE_ALICE: [[&[Factor]; 2]; 3] = [
    [&[(1, Z)], &[(0, X)]],
    [&[(0, Z)], &[(1, X)]],
    [&[(0, Z), (1, Z)], &[(0, X), (1, X)]],
];
const SQUARE_BOB: [[&[Factor]; 2]; 3] = [
    [&[(1, Z)], &[(0, Z)]],
    [&[(0, X)], &[(1, X)]],
    [&[(0, X), (1, Z)], &[(0, Z), (1, X)]],
];

/// Ququart pair `cos t1 cos t2 |11> + cos t1 sin t2 |22> + sin t1 cos t2 |33>
/// + sin t1 sin t2 |44>` with per-ansatz measurement angles.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamFamily234 {
    pub theta1: f64,
    pub theta2: f64,
    pub ansatz: Ansatz,
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
}

impl ParamFamily234 {
    /// Maximally entangled state with all angles zero.
    pub fn reference(ansatz: Ansatz) -> Self {
        let n = ansatz.angle_count();
        ParamFamily234 {
            theta1: PI / 4.0,
            theta2: PI / 4.0,
            ansatz,
            alice: vec![0.0; n],
            bob: vec![0.0; n],
        }
    }

    pub fn random(ansatz: Ansatz, rng: &mut impl Rng) -> Self {
        let n = ansatz.angle_count();
        let mut x = vec![rng.gen_range(0.0..FRAC_PI_2), rng.gen_range(0.0..FRAC_PI_2)];
        x.extend((0..2 * n).map(|_| rng.gen_range(0.0..TAU)));
        Self::from_vec(ansatz, &x).expect("sized to the ansatz")
    }

    /// `[theta1, theta2, alice.., bob..]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = vec![self.theta1, self.theta2];
        out.extend_from_slice(&self.alice);
        out.extend_from_slice(&self.bob);
        out
    }

    /// Inverse of [`Self::to_vec`]. Angles are reduced mod `2 pi`; for the
    /// commuting-pair ansatz the second observable of the two-qubit pair
    /// takes the rotations of the first, which keeps the pair commuting.
    pub fn from_vec(ansatz: Ansatz, x: &[f64]) -> Result<Self> {
        let n = ansatz.angle_count();
        if x.len() != 2 + 2 * n {
            return Err(Error::Dimension(format!("{} parameters, expected {}", x.len(), 2 + 2 * n)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        let wrap = |v: &[f64]| -> Vec<f64> { v.iter().map(|a| a.rem_euclid(TAU)).collect() };
        let mut alice = wrap(&x[2..2 + n]);
        let mut bob = wrap(&x[2 + n..]);
        if ansatz == Ansatz::CommutingPair {
            for angles in [&mut alice, &mut bob] {
                angles[6] = angles[4];
                angles[7] = angles[5];
            }
        }
        Ok(ParamFamily234 {
            theta1: x[0].rem_euclid(TAU),
            theta2: x[1].rem_euclid(TAU),
            ansatz,
            alice,
            bob,
        })
    }

    pub fn state(&self) -> Result<BipartiteState<f64>> {
        let (c1, s1) = (self.theta1.cos(), self.theta1.sin());
        let (c2, s2) = (self.theta2.cos(), self.theta2.sin());
        let mut psi = vec![Complex::new(0.0, 0.0); 16];
        for (i, amp) in [c1 * c2, c1 * s2, s1 * c2, s1 * s2].into_iter().enumerate() {
            psi[i * 4 + i] = Complex::new(amp, 0.0);
        }
        BipartiteState::pure(4, 4, &psi)
    }

    pub fn realize(&self) -> Result<QuantumRealization<f64>> {
        let n = self.ansatz.angle_count();
        if self.alice.len() != n || self.bob.len() != n {
            return Err(Error::Dimension(format!("{} ansatz takes {n} angles per party", self.ansatz)));
        }
        let (alice, bob) = match self.ansatz {
            Ansatz::Planar => (planar(&self.alice, "Alice")?, planar(&self.bob, "Bob")?),
            Ansatz::FourierPhase => (fourier(&self.alice, false)?, fourier(&self.bob, true)?),
            Ansatz::CommutingPair => (
                square(&SQUARE_ALICE, &self.alice, "Alice")?,
                square(&SQUARE_BOB, &self.bob, "Bob")?,
            ),
        };
        QuantumRealization::new(self.state()?, alice, bob)
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|a| format!("{a:.17e}")).collect::<Vec<_>>().join(" ");
        let mut out = format!("family 234 {}\n", self.ansatz);
        let _ = writeln!(out, "theta1 {:.17e}", self.theta1);
        let _ = writeln!(out, "theta2 {:.17e}", self.theta2);
        let _ = writeln!(out, "alice {}", join(&self.alice));
        let _ = writeln!(out, "bob {}", join(&self.bob));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut ansatz = None;
        let mut theta = [None, None];
        let (mut alice, mut bob) = (None, None);
        for (line, l) in content_lines(text) {
            let toks: Vec<&str> = l.split_whitespace().collect();
            let nums = |t: &[&str]| -> Result<Vec<f64>> { t.iter().map(|s| parse_real::<f64>(s, line)).collect() };
            match toks.as_slice() {
                ["family", "234", a] => ansatz = Some(a.parse::<Ansatz>()?),
                ["theta1", v] => theta[0] = Some(parse_real::<f64>(v, line)?),
                ["theta2", v] => theta[1] = Some(parse_real::<f64>(v, line)?),
                ["alice", rest @ ..] => alice = Some(nums(rest)?),
                ["bob", rest @ ..] => bob = Some(nums(rest)?),
                _ => return Err(Error::parse(line, format!("unexpected `{l}`"))),
            }
        }
        let missing = |what: &str| Error::parse(0, format!("missing `{what}`"));
        Ok(ParamFamily234 {
            ansatz: ansatz.ok_or_else(|| missing("family 234"))?,
            theta1: theta[0].ok_or_else(|| missing("theta1"))?,
            theta2: theta[1].ok_or_else(|| missing("theta2"))?,
            alice: alice.ok_or_else(|| missing("alice"))?,
            bob: bob.ok_or_else(|| missing("bob"))?,
        })
    }
}

/// `cos a Z + sin a X`
fn rotated(a: f64) -> CMatrix<f64> {
    &pauli_z::<f64>().scale_real(a.cos()) + &pauli_x::<f64>().scale_real(a.sin())
}

fn on_qubit(q: usize, op: &CMatrix<f64>) -> CMatrix<f64> {
    let id = CMatrix::identity(2);
    if q == 0 {
        op.kron(&id)
    } else {
        id.kron(op)
    }
}

fn planar(angles: &[f64], party: &'static str) -> Result<Vec<Measurement<f64>>> {
    (0..3)
        .map(|k| {
            let first = on_qubit(0, &rotated(angles[2 * k]));
            let second = on_qubit(1, &rotated(angles[2 * k + 1]));
            commuting_pair_measurement(&first, &second, party, k)
        })
        .collect()
}

fn fourier(phases: &[f64], conjugate: bool) -> Result<Vec<Measurement<f64>>> {
    let sign = if conjugate { -1.0 } else { 1.0 };
    (0..3)
        .map(|k| {
            let phi = &phases[4 * k..4 * k + 4];
            let v = CMatrix::from_fn(4, 4, |j, l| {
                Complex::from_polar(0.5, sign * TAU * (j * l) as f64 / 4.0) * Complex::from_polar(1.0, phi[l])
            });
            Measurement::from_basis(&v.adjoint(), ANALYTIC_TOL)
        })
        .collect()
}

fn observable(factors: &[Factor], angles: &[f64]) -> CMatrix<f64> {
    let mut ops = [CMatrix::identity(2), CMatrix::identity(2)];
    for (&(q, base), a) in factors.iter().zip(angles) {
        ops[q] = rotated(base + a);
    }
    ops[0].kron(&ops[1])
}

fn square(table: &[[&[Factor]; 2]; 3], angles: &[f64], party: &'static str) -> Result<Vec<Measurement<f64>>> {
    let mut next = 0;
    let mut take = |n: usize| {
        let s = &angles[next..next + n];
        next += n;
        s
    };
    let mut out = Vec::with_capacity(3);
    for (k, [f1, f2]) in table.iter().enumerate() {
        let o1 = observable(f1, take(f1.len()));
        let o2 = observable(f2, take(f2.len()));
        out.push(commuting_pair_measurement(&o1, &o2, party, k)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::build_q234;

    #[test]
    fn reference_square_matches_fixed_realization() {
        let p = ParamFamily234::reference(Ansatz::CommutingPair)
            .realize()
            .unwrap()
            .behavior()
            .unwrap();
        let q = build_q234::<f64>().behavior().unwrap();
        assert!(p.max_abs_diff(&q) < 1e-9);
    }

    #[test]
    fn non_commuting_pair_is_reported() {
        let mut f = ParamFamily234::reference(Ansatz::CommutingPair);
        f.alice[6] = 0.3;
        match f.realize() {
            Err(Error::NonCommuting { party, measurement, .. }) => {
                assert_eq!((party, measurement), ("Alice", 3));
            }
            other => panic!("expected a non-commuting error, got {other:?}"),
        }
    }

    #[test]
    fn projection_keeps_pairs_commuting() {
        let mut rng = crate::optimize::start_rng(3, 0);
        for _ in 0..20 {
            let f = ParamFamily234::random(Ansatz::CommutingPair, &mut rng);
            assert!(f.realize().is_ok());
        }
    }

    #[test]
    fn every_ansatz_gives_valid_realizations() {
        let mut rng = crate::optimize::start_rng(5, 0);
        for a in Ansatz::ALL {
            let f = ParamFamily234::random(a, &mut rng);
            let p = f.realize().unwrap().behavior().unwrap();
            assert!(p.check_no_signaling(1e-9).passes());
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = crate::optimize::start_rng(9, 0);
        let f = ParamFamily234::random(Ansatz::FourierPhase, &mut rng);
        assert_eq!(ParamFamily234::from_text(&f.to_text()).unwrap(), f);
        assert_eq!("planar".parse::<Ansatz>().unwrap(), Ansatz::Planar);
    }
}
