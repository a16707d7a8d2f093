//! Devetak-Winter key rates, rate curves over detection efficiency or
//! visibility, and threshold search.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::entropy::{entropy_bound_for, EntropyOptions};
use crate::error::{Error, Result};
use crate::functionals::{make_i234, make_i4422, BellFunctional};
use crate::optimize::{maximize_violation, optimize_key_measurement, Family, SearchOptions};
use crate::quantum::{build_q234, build_q4422, QuantumRealization};
use crate::real::Real;
use crate::scenario::{degrade, Behavior, NoiseParams};
use crate::textio::fmt_sig;

/// `-sum p log2 p`, skipping zeros.
fn shannon(ps: impl Iterator<Item = f64>) -> f64 {
    ps.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
}

/// `H(A|B) = H(A,B) - H(B)` of a joint table `p[a][b]`, clamped at zero.
pub fn h_ab_of_table<T: Real>(joint: &[Vec<T>]) -> Result<f64> {
    let cols = joint.first().map_or(0, Vec::len);
    if joint.is_empty() || cols == 0 || joint.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension("joint table must be a nonempty rectangle".into()));
    }
    let flat = joint.iter().flatten().map(|p| p.f64().max(0.0));
    let pb = (0..cols).map(|b| joint.iter().map(|r| r[b].f64().max(0.0)).sum::<f64>());
    Ok((shannon(flat) - shannon(pb)).max(0.0))
}

/// Conditional entropy in bits of Alice's outcome at `key_x` given Bob's at
/// `key_y`.
pub fn h_ab<T: Real>(p: &Behavior<T>, key_x: usize, key_y: usize) -> Result<f64> {
    let s = p.scenario();
    if key_x >= s.inputs_a || key_y >= s.inputs_b {
        return Err(Error::Index(format!(
            "key setting ({}, {}) outside {s}",
            key_x + 1,
            key_y + 1
        )));
    }
    let joint: Vec<Vec<T>> = (0..s.outputs_a)
        .map(|a| (0..s.outputs_b).map(|b| p.p(key_x, key_y, a, b)).collect())
        .collect();
    h_ab_of_table(&joint)
}

/// `H(A|E) - H(A|B)`
pub fn devetak_winter(hae: f64, hab: f64) -> f64 {
    hae - hab
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyRatePoint {
    /// Value of the swept parameter.
    pub param: f64,
    pub eta: f64,
    pub v: f64,
    pub bell: f64,
    pub hae: f64,
    pub hab: f64,
    pub rate: f64,
}

impl KeyRatePoint {
    pub fn new(param: f64, noise: NoiseParams<f64>, bell: f64, hae: f64, hab: f64) -> Self {
        KeyRatePoint {
            param,
            eta: noise.eta,
            v: noise.v,
            bell,
            hae,
            hab,
            rate: devetak_winter(hae, hab),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    Eta,
    Visibility,
}

impl Sweep {
    /// Noise with the swept parameter at `x` and the other one at `fixed`.
    pub fn noise(self, x: f64, fixed: f64) -> Result<NoiseParams<f64>> {
        match self {
            Sweep::Eta => NoiseParams::new(x, fixed),
            Sweep::Visibility => NoiseParams::new(fixed, x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Eta => "eta",
            Sweep::Visibility => "v",
        }
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eta" => Ok(Sweep::Eta),
            "v" | "visibility" => Ok(Sweep::Visibility),
            other => Err(Error::InvalidArgument(format!("unknown sweep `{other}` (eta, v)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyRateCurve {
    pub sweep: Sweep,
    points: Vec<KeyRatePoint>,
    pub threshold: Option<f64>,
}

pub const CSV_HEADER: &str = "param,eta,v,bell,hae,hab,rate";

impl KeyRateCurve {
    /// Points must be strictly increasing in `param`.
    pub fn new(sweep: Sweep, points: Vec<KeyRatePoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].param > w[0].param)) {
            return Err(Error::InvalidArgument("curve grid is not strictly increasing".into()));
        }
        Ok(KeyRateCurve {
            sweep,
            points,
            threshold: None,
        })
    }

    pub fn points(&self) -> &[KeyRatePoint] {
        &self.points
    }

    /// Whether every step of the rate is `>= -slack`.
    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.points.windows(2).all(|w| w[1].rate >= w[0].rate - slack)
    }

    /// Header plus one row per point, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let row = [p.param, p.eta, p.v, p.bell, p.hae, p.hab, p.rate].map(|x| fmt_sig(x, 12));
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Zero crossing of a nondecreasing `rate` on `[lo, hi]` by bisection to
/// `hi - lo <= tol`. A grid of `prescan` points first checks monotonicity
/// (up to `slack`) and narrows the bracket.
pub fn scan_threshold(
    rate: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
    prescan: usize,
    slack: f64,
) -> Result<f64> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("bad threshold range [{lo}, {hi}] or tolerance {tol}")));
    }
    let none = |reason: String| Error::NoThreshold { lo, hi, reason };
    let n = prescan.max(2);
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let values = grid.iter().map(|&x| rate(x)).collect::<Result<Vec<f64>>>()?;
    for (w, x) in values.windows(2).zip(grid.windows(2)) {
        if w[1] < w[0] - slack {
            return Err(Error::InvalidArgument(format!(
                "rate decreases from {} at {} to {} at {}",
                w[0], x[0], w[1], x[1]
            )));
        }
    }
    if values[0] > 0.0 {
        return Err(none(format!("rate {} is already positive at {lo}", values[0])));
    }
    if values[n - 1] <= 0.0 {
        return Err(none(format!("rate {} is not positive at {hi}", values[n - 1])));
    }
    let k = values.iter().position(|&r| r > 0.0).expect("positive end");
    let (mut a, mut b) = (grid[k - 1], grid[k]);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if rate(m)? > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// The key-distribution protocols. Alice has `n` inputs, Bob `n + 1`; the
/// raw key comes from Alice's input 1 and Bob's extra input.
#[derive(Clone, Debug)]
pub enum Protocol {
    /// Published ququart realization on the four-setting two-outcome
    /// inequality; Bob's key measurement is the transpose of Alice's first.
    Q4422,
    /// Magic-square realization on the three-setting four-outcome
    /// inequality; Bob's key measurement is the transpose of Alice's first.
    Q234,
    /// Realization re-optimized for the violation at each efficiency, with
    /// Bob's key measurement optimized for `H(A|B)`.
    Q4422Partial(SearchOptions),
    /// User realization and functional; Bob's key measurement is the
    /// transpose of Alice's first.
    Custom {
        realization: QuantumRealization<f64>,
        functional: BellFunctional<f64>,
    },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Q4422 => "q4422",
            Protocol::Q234 => "q234",
            Protocol::Q4422Partial(_) => "q4422-partial",
            Protocol::Custom { .. } => "custom",
        }
    }

    pub fn functional(&self) -> BellFunctional<f64> {
        match self {
            Protocol::Q4422 | Protocol::Q4422Partial(_) => make_i4422(),
            Protocol::Q234 => make_i234(),
            Protocol::Custom { functional, .. } => functional.clone(),
        }
    }

    /// Realization with Bob's key measurement appended, for efficiency `eta`.
    pub fn realization(&self, eta: f64) -> Result<QuantumRealization<f64>> {
        let base = match self {
            Protocol::Q4422 => build_q4422(),
            Protocol::Q234 => build_q234(),
            Protocol::Custom { realization, .. } => realization.clone(),
            Protocol::Q4422Partial(opts) => {
                let best = maximize_violation(&Family::F4422, &make_i4422(), eta, opts)?;
                let q = best.params.realize()?;
                let key = optimize_key_measurement(&q, 0, opts)?;
                return with_key(&q, key.measurement);
            }
        };
        let key = base
            .alice()
            .first()
            .ok_or_else(|| Error::InvalidArgument("realization without Alice measurements".into()))?
            .transpose();
        with_key(&base, key)
    }

    /// Functional value on `p` with Bob's key input left out.
    pub fn bell_value(&self, p: &Behavior<f64>) -> Result<f64> {
        let s = p.scenario();
        let xs: Vec<usize> = (0..s.inputs_a).collect();
        let ys: Vec<usize> = (0..s.inputs_b.saturating_sub(1)).collect();
        self.functional().eval(&p.restrict_inputs(&xs, &ys)?)
    }
}

fn with_key(q: &QuantumRealization<f64>, key: crate::quantum::Measurement<f64>) -> Result<QuantumRealization<f64>> {
    let mut bob = q.bob().to_vec();
    bob.push(key);
    q.with_bob(bob)
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Protocol plus the entropy relaxation used for `H(A|E)`.
#[derive(Clone, Debug)]
pub struct RatePipeline {
    pub protocol: Protocol,
    pub entropy: EntropyOptions,
}

impl RatePipeline {
    pub fn new(protocol: Protocol, entropy: EntropyOptions) -> Self {
        RatePipeline { protocol, entropy }
    }

    /// Degraded behavior including Bob's key input.
    pub fn behavior(&self, noise: NoiseParams<f64>) -> Result<Behavior<f64>> {
        degrade(&self.protocol.realization(noise.eta)?, noise)
    }

    pub fn point(&self, param: f64, noise: NoiseParams<f64>) -> Result<KeyRatePoint> {
        let p = self.behavior(noise)?;
        let s = p.scenario();
        let bell = self.protocol.bell_value(&p)?;
        let hab = h_ab(&p, self.entropy.key_input, s.inputs_b - 1)?;
        let hae = entropy_bound_for(&p, &self.entropy)?.bits;
        Ok(KeyRatePoint::new(param, noise, bell, hae, hab))
    }

    /// One point per grid value, computed in parallel and kept in grid order.
    pub fn curve(&self, sweep: Sweep, grid: &[f64], fixed: f64) -> Result<KeyRateCurve> {
        let points = grid
            .par_iter()
            .map(|&x| self.point(x, sweep.noise(x, fixed)?))
            .collect::<Result<Vec<_>>>()?;
        KeyRateCurve::new(sweep, points)
    }

    /// Zero crossing of the rate in the swept parameter.
    pub fn threshold(&self, sweep: Sweep, fixed: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
        scan_threshold(
            |x| Ok(self.point(x, sweep.noise(x, fixed)?)?.rate),
            lo,
            hi,
            tol,
            5,
            1e-6,
        )
    }
}
