//! Moment and localizing matrices over a monomial set, with an objective and
//! equality pins, ready to compile into a block SDP.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::functionals::BellFunctional;
use crate::real::Real;
use crate::scenario::{Behavior, Scenario};

use super::word::{projector_poly, Monomial, Poly, Symbol};

/// Product families that can be added on top of a hierarchy depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Extra {
    /// Alice letter times Bob letter.
    AB,
    /// Two Alice letters.
    AA,
    /// Two Bob letters.
    BB,
    /// Alice letter times Eve letter.
    AV,
    /// Bob letter times Eve letter.
    BV,
    /// Alice's key-input letters times first-family Eve letters.
    KeyAV,
    /// Adjoint Eve letter times Eve letter.
    VV,
}

impl Extra {
    pub const ALL: [Extra; 7] = [Extra::AB, Extra::AA, Extra::BB, Extra::AV, Extra::BV, Extra::KeyAV, Extra::VV];

    pub fn name(self) -> &'static str {
        match self {
            Extra::AB => "AB",
            Extra::AA => "AA",
            Extra::BB => "BB",
            Extra::AV => "AV",
            Extra::BV => "BV",
            Extra::KeyAV => "KeyAV",
            Extra::VV => "VV",
        }
    }
}

impl FromStr for Extra {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Extra::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown monomial family `{s}` (known: AB, AA, BB, AV, BV, KeyAV, VV)"
                ))
            })
    }
}

/// Hierarchy depth plus extra product families, written `2` or `1+AB+KeyAV`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level {
    pub depth: usize,
    pub extras: BTreeSet<Extra>,
}

impl Level {
    pub fn new(depth: usize) -> Self {
        Level {
            depth,
            extras: BTreeSet::new(),
        }
    }

    pub fn with(mut self, extra: Extra) -> Self {
        self.extras.insert(extra);
        self
    }

    /// Depth 1 with all Alice-Bob products.
    pub fn one_plus_ab() -> Self {
        Level::new(1).with(Extra::AB)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.depth)?;
        for e in &self.extras {
            write!(f, "+{}", e.name())?;
        }
        Ok(())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('+');
        let depth = parts
            .next()
            .and_then(|d| d.trim().parse::<usize>().ok())
            .filter(|&d| d >= 1)
            .ok_or_else(|| Error::InvalidArgument(format!("level `{s}` must start with a depth >= 1")))?;
        let mut level = Level::new(depth);
        for p in parts {
            level.extras.insert(p.parse()?);
        }
        Ok(level)
    }
}

/// Letters available to the relaxation.
#[derive(Clone, Debug, PartialEq)]
pub struct Alphabet {
    pub scenario: Scenario,
    /// Eve's operator families `V_{j,a}`, `j < families`, `a < indices`.
    pub eve_families: usize,
    pub eve_indices: usize,
    /// Also use `V*` as letters.
    pub eve_adjoints: bool,
    /// Alice input whose letters enter [`Extra::KeyAV`].
    pub key_input: usize,
}

impl Alphabet {
    pub fn bell(scenario: Scenario) -> Self {
        Alphabet {
            scenario,
            eve_families: 0,
            eve_indices: 0,
            eve_adjoints: false,
            key_input: 0,
        }
    }

    /// Projector letters with the last outcome of each measurement dropped.
    pub fn alice_letters(&self) -> Vec<Symbol> {
        let s = self.scenario;
        (0..s.inputs_a)
            .flat_map(|x| (0..s.outputs_a - 1).map(move |a| Symbol::alice(x, a)))
            .collect()
    }

    pub fn bob_letters(&self) -> Vec<Symbol> {
        let s = self.scenario;
        (0..s.inputs_b)
            .flat_map(|y| (0..s.outputs_b - 1).map(move |b| Symbol::bob(y, b)))
            .collect()
    }

    pub fn eve_letters(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        for j in 0..self.eve_families {
            for a in 0..self.eve_indices {
                out.push(Symbol::eve(j, a));
                if self.eve_adjoints {
                    out.push(Symbol::eve(j, a).adjoint());
                }
            }
        }
        out
    }

    pub fn letters(&self) -> Vec<Symbol> {
        let mut l = self.alice_letters();
        l.extend(self.bob_letters());
        l.extend(self.eve_letters());
        l
    }
}

/// Default bound on the monomial count of a relaxation that is built for
/// solving.
pub const DEFAULT_MONOMIAL_CAP: usize = 600;

/// All nonzero words of at most `level.depth` letters, the requested product
/// families, and `extras`; deduplicated and sorted by length, then word.
pub fn generate_monomials(alphabet: &Alphabet, level: &Level, extras: &[Monomial], cap: usize) -> Result<Vec<Monomial>> {
    let letters = alphabet.letters();
    let mut set: BTreeSet<Monomial> = BTreeSet::new();
    set.insert(Monomial::identity());
    let mut frontier = vec![Monomial::identity()];
    for _ in 0..level.depth {
        let mut next = Vec::new();
        for w in &frontier {
            for &s in &letters {
                if let Some(m) = w.mul(&Monomial::letter(s)) {
                    if m.len() == w.len() + 1 && set.insert(m.clone()) {
                        next.push(m);
                    }
                }
            }
            if set.len() > cap {
                return Err(too_large(set.len(), cap));
            }
        }
        frontier = next;
    }
    let (la, lb, le) = (alphabet.alice_letters(), alphabet.bob_letters(), alphabet.eve_letters());
    let key: Vec<Symbol> = la
        .iter()
        .copied()
        .filter(|s| matches!(s, Symbol::A { input, .. } if *input as usize == alphabet.key_input))
        .collect();
    let first_family: Vec<Symbol> = le
        .iter()
        .copied()
        .filter(|s| matches!(s, Symbol::E { family: 0, adjoint: false, .. }))
        .collect();
    let eve_adj: Vec<Symbol> = le.iter().map(|s| s.adjoint()).collect();
    for extra in &level.extras {
        let (left, right): (&[Symbol], &[Symbol]) = match extra {
            Extra::AB => (&la, &lb),
            Extra::AA => (&la, &la),
            Extra::BB => (&lb, &lb),
            Extra::AV => (&la, &le),
            Extra::BV => (&lb, &le),
            Extra::KeyAV => (&key, &first_family),
            Extra::VV => (&eve_adj, &le),
        };
        for &l in left {
            for &r in right {
                if let Some(m) = Monomial::from_word(&[l, r]) {
                    set.insert(m);
                }
            }
        }
        if set.len() > cap {
            return Err(too_large(set.len(), cap));
        }
    }
    set.extend(extras.iter().cloned());
    if set.len() > cap {
        return Err(too_large(set.len(), cap));
    }
    let mut out: Vec<Monomial> = set.into_iter().collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

fn too_large(count: usize, cap: usize) -> Error {
    Error::TooLarge {
        what: "monomials",
        count,
        cap,
        hint: "lower the level, or raise the cap and use export-sdpa to solve externally",
    }
}

/// `constant + sum coeff * y[var]`
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LinForm<T> {
    pub constant: T,
    pub coeffs: Vec<(usize, T)>,
}

impl<T: Real> LinForm<T> {
    pub fn is_zero(&self) -> bool {
        self.constant == T::zero() && self.coeffs.is_empty()
    }

    pub fn eval(&self, values: &[T]) -> T {
        self.coeffs.iter().fold(self.constant, |acc, &(v, c)| acc + c * values[v])
    }
}

/// Symmetric matrix of linear forms indexed by a monomial basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentBlock<T> {
    pub name: String,
    pub basis: Vec<Monomial>,
    /// Upper triangle, row-major.
    entries: Vec<LinForm<T>>,
}

impl<T: Real> MomentBlock<T> {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinForm<T> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.basis.len();
        &self.entries[i * n - i * (i + 1) / 2 + j]
    }

    /// Upper-triangle entries `(i, j, form)` with `i <= j`.
    pub fn upper(&self) -> impl Iterator<Item = (usize, usize, &LinForm<T>)> {
        let n = self.basis.len();
        (0..n).flat_map(move |i| (i..n).map(move |j| (i, j, self.entry(i, j))))
    }
}

/// A maximisation over real moment variables `y(w)`, one per class `{w, w*}`,
/// subject to PSD blocks and equality pins. `y(1) = 1` is built in.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxationProblem<T> {
    pub name: String,
    alphabet: Alphabet,
    monomials: Vec<Monomial>,
    variables: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
    blocks: Vec<MomentBlock<T>>,
    objective: LinForm<T>,
    pins: BTreeMap<usize, T>,
    /// Variables `0..moment_vars` appear in the moment matrix.
    moment_vars: usize,
}

impl<T: Real> RelaxationProblem<T> {
    /// Relaxation with the moment matrix over `monomials` and a zero objective.
    pub fn new(name: impl Into<String>, alphabet: Alphabet, monomials: Vec<Monomial>) -> Self {
        let mut r = RelaxationProblem {
            name: name.into(),
            alphabet,
            monomials: Vec::new(),
            variables: Vec::new(),
            index: HashMap::new(),
            blocks: Vec::new(),
            objective: LinForm::default(),
            pins: BTreeMap::new(),
            moment_vars: 0,
        };
        let block = r.build_block("moment", &Poly::constant(T::one()), &monomials);
        r.blocks.push(block);
        r.moment_vars = r.variables.len();
        r.monomials = monomials;
        r
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn scenario(&self) -> Scenario {
        self.alphabet.scenario
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// Variable id to representative word.
    pub fn variables(&self) -> &[Monomial] {
        &self.variables
    }

    pub fn variable_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(&m.hermitian_class()).copied()
    }

    pub fn blocks(&self) -> &[MomentBlock<T>] {
        &self.blocks
    }

    pub fn moment_block(&self) -> &MomentBlock<T> {
        &self.blocks[0]
    }

    pub fn objective(&self) -> &LinForm<T> {
        &self.objective
    }

    pub fn pins(&self) -> &BTreeMap<usize, T> {
        &self.pins
    }

    fn var(&mut self, m: &Monomial) -> usize {
        let class = m.hermitian_class();
        if let Some(&v) = self.index.get(&class) {
            return v;
        }
        let v = self.variables.len();
        self.variables.push(class.clone());
        self.index.insert(class, v);
        v
    }

    /// Linear form of `y(p)`, creating variables as needed.
    pub fn linearize(&mut self, p: &Poly<T>) -> LinForm<T> {
        let mut constant = T::zero();
        let mut coeffs: BTreeMap<usize, T> = BTreeMap::new();
        for (m, c) in p.terms() {
            if m.is_identity() {
                constant += c;
            } else {
                let v = self.var(m);
                *coeffs.entry(v).or_insert_with(T::zero) += c;
            }
        }
        LinForm {
            constant,
            coeffs: coeffs.into_iter().filter(|(_, c)| *c != T::zero()).collect(),
        }
    }

    fn build_block(&mut self, name: &str, g: &Poly<T>, basis: &[Monomial]) -> MomentBlock<T> {
        let n = basis.len();
        let mut entries = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let p = g.sandwich(&basis[i], &basis[j]);
                entries.push(self.linearize(&p));
            }
        }
        MomentBlock {
            name: name.to_string(),
            basis: basis.to_vec(),
            entries,
        }
    }

    fn covered(&self, p: &Poly<T>) -> bool {
        p.terms()
            .all(|(m, _)| m.is_identity() || self.variable_of(m).is_some_and(|v| v < self.moment_vars))
    }

    /// The candidates, greedily in order, whose localizing entries
    /// `y(m_i* g m_j)` only involve moments of the moment matrix.
    pub fn covered_basis(&self, g: &Poly<T>, candidates: &[Monomial]) -> Vec<Monomial> {
        let mut out: Vec<Monomial> = Vec::new();
        for m in candidates {
            let fits = self.covered(&g.sandwich(m, m)) && out.iter().all(|o| self.covered(&g.sandwich(o, m)));
            if fits {
                out.push(m.clone());
            }
        }
        out
    }

    /// Adds the PSD block `[y(m_i* g m_j)]` for a hermitian polynomial `g`.
    pub fn add_localizing(&mut self, name: &str, g: &Poly<T>, basis: &[Monomial]) -> Result<()> {
        if !is_hermitian(g) {
            return Err(Error::InvalidArgument(format!("localizing polynomial of `{name}` is not hermitian")));
        }
        let block = self.build_block(name, g, basis);
        self.blocks.push(block);
        Ok(())
    }

    /// Objective `y(p)` to be maximised.
    pub fn set_objective(&mut self, p: &Poly<T>) {
        self.objective = self.linearize(p);
    }

    pub fn add_objective_constant(&mut self, c: T) {
        self.objective.constant += c;
    }

    /// Fixes `y(m) = value`. Pinning the identity to anything but one, or a
    /// variable twice to different values, is an error.
    pub fn pin(&mut self, m: &Monomial, value: T) -> Result<()> {
        let tol = T::tol(1e-9);
        if m.is_identity() {
            if (value - T::one()).abs() > tol {
                return Err(Error::InconsistentPins(format!("identity pinned to {value}")));
            }
            return Ok(());
        }
        let v = self.var(m);
        match self.pins.get(&v) {
            Some(&old) if (old - value).abs() > tol => Err(Error::InconsistentPins(format!(
                "y({}) pinned to {old} and {value}",
                self.variables[v]
            ))),
            _ => {
                self.pins.insert(v, value);
                Ok(())
            }
        }
    }

    /// Pins `y(A)`, `y(B)` and `y(AB)` for every retained letter to the
    /// behavior's marginals and joint probabilities. The behavior's scenario
    /// must equal the relaxation's.
    pub fn pin_behavior(&mut self, p: &Behavior<T>) -> Result<()> {
        let s = self.scenario();
        if p.scenario() != s {
            return Err(Error::ScenarioMismatch {
                expected: s.to_string(),
                found: p.scenario().to_string(),
            });
        }
        for x in 0..s.inputs_a {
            for a in 0..s.outputs_a - 1 {
                self.pin(&Monomial::letter(Symbol::alice(x, a)), p.marginal_a_at(a, x, 0))?;
            }
        }
        for y in 0..s.inputs_b {
            for b in 0..s.outputs_b - 1 {
                self.pin(&Monomial::letter(Symbol::bob(y, b)), p.marginal_b_at(b, y, 0))?;
            }
        }
        for x in 0..s.inputs_a {
            for y in 0..s.inputs_b {
                for a in 0..s.outputs_a - 1 {
                    for b in 0..s.outputs_b - 1 {
                        let m = Monomial::from_word(&[Symbol::alice(x, a), Symbol::bob(y, b)]).expect("nonzero");
                        self.pin(&m, p.p(x, y, a, b))?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn is_hermitian<T: Real>(g: &Poly<T>) -> bool {
    let tol = T::tol(1e-12);
    g.sub(&g.adjoint()).terms().all(|(_, c)| c.abs() <= tol)
}

/// Objective polynomial of a Bell functional, last outcomes eliminated.
pub fn functional_poly<T: Real>(f: &BellFunctional<T>) -> Poly<T> {
    let s = f.scenario();
    let mut p = Poly::constant(f.constant());
    for ((x, y, a, b), c) in f.joint_terms() {
        let pa = projector_poly(true, x, a, s.outputs_a);
        let pb = projector_poly(false, y, b, s.outputs_b);
        p = p.add(&pa.mul(&pb).scale(c));
    }
    for ((x, a), c) in f.marginal_a_terms() {
        p = p.add(&projector_poly(true, x, a, s.outputs_a).scale(c));
    }
    for ((y, b), c) in f.marginal_b_terms() {
        p = p.add(&projector_poly(false, y, b, s.outputs_b).scale(c));
    }
    p
}

/// Options shared by the relaxation constructors.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxationOptions {
    pub level: Level,
    /// Additional words added to the monomial set.
    pub extra_words: Vec<Monomial>,
    pub monomial_cap: usize,
}

impl RelaxationOptions {
    pub fn new(level: Level) -> Self {
        RelaxationOptions {
            level,
            extra_words: Vec::new(),
            monomial_cap: DEFAULT_MONOMIAL_CAP,
        }
    }
}

/// Upper bound on the quantum value of `f`.
pub fn tsirelson_relaxation<T: Real>(f: &BellFunctional<T>, opts: &RelaxationOptions) -> Result<RelaxationProblem<T>> {
    let alphabet = Alphabet::bell(f.scenario());
    let monomials = generate_monomials(&alphabet, &opts.level, &opts.extra_words, opts.monomial_cap)?;
    let mut r = RelaxationProblem::new(format!("tsirelson level {}", opts.level), alphabet, monomials);
    r.set_objective(&functional_poly(f));
    Ok(r)
}

/// Upper bound on the value of `f` after nondetections are binned with
/// efficiency `eta`, over all quantum behaviors.
pub fn efficiency_constrained_relaxation<T: Real>(
    f: &BellFunctional<T>,
    eta: T,
    opts: &RelaxationOptions,
) -> Result<RelaxationProblem<T>> {
    let g = f.with_detection_efficiency(eta)?;
    let mut r = tsirelson_relaxation(&g, opts)?;
    r.name = format!("tsirelson level {} eta {}", opts.level, eta);
    Ok(r)
}

/// Feasibility relaxation with the behavior's probabilities pinned.
pub fn behavior_constrained_relaxation<T: Real>(p: &Behavior<T>, opts: &RelaxationOptions) -> Result<RelaxationProblem<T>> {
    let alphabet = Alphabet::bell(p.scenario());
    let monomials = generate_monomials(&alphabet, &opts.level, &opts.extra_words, opts.monomial_cap)?;
    let mut r = RelaxationProblem::new(format!("behavior level {}", opts.level), alphabet, monomials);
    r.pin_behavior(p)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{make_chsh, make_i234};

    #[test]
    fn monomial_counts() {
        let chsh = Alphabet::bell(Scenario::symmetric(2, 2).unwrap());
        let m = generate_monomials(&chsh, &Level::new(1), &[], 100).unwrap();
        assert_eq!(m.len(), 5);
        let big = Alphabet::bell(Scenario::symmetric(3, 4).unwrap());
        assert_eq!(generate_monomials(&big, &Level::new(1), &[], 100).unwrap().len(), 19);
        assert_eq!(generate_monomials(&big, &Level::one_plus_ab(), &[], 200).unwrap().len(), 100);
        let l1 = generate_monomials(&chsh, &Level::new(1), &[], 100).unwrap();
        let l2 = generate_monomials(&chsh, &Level::new(2), &[], 100).unwrap();
        assert!(l1.iter().all(|w| l2.contains(w)));
    }

    #[test]
    fn cap_is_enforced() {
        let big = Alphabet::bell(Scenario::symmetric(3, 4).unwrap());
        let err = generate_monomials(&big, &Level::new(3), &[], 600).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }

    #[test]
    fn level_parsing() {
        let l: Level = "1+AB".parse().unwrap();
        assert_eq!(l, Level::one_plus_ab());
        assert_eq!(l.to_string(), "1+AB");
        let l: Level = "2+keyav+AB".parse().unwrap();
        assert_eq!(l.to_string(), "2+AB+KeyAV");
        assert!("0".parse::<Level>().is_err());
        assert!("1+XY".parse::<Level>().is_err());
    }

    #[test]
    fn moment_matrix_structure() {
        let r = tsirelson_relaxation(&make_chsh::<f64>(), &RelaxationOptions::new(Level::new(1))).unwrap();
        let g = r.moment_block();
        assert_eq!(g.size(), 5);
        // diagonal of projector words equals the first row
        for i in 1..5 {
            assert_eq!(g.entry(i, i), g.entry(0, i));
        }
        assert_eq!(g.entry(0, 0).constant, 1.0);
        assert!(g.entry(0, 0).coeffs.is_empty());
        // (1,2) is y(A1|1 A1|2), a free variable
        assert_eq!(g.entry(1, 2).coeffs.len(), 1);
    }

    #[test]
    fn behavior_pins_in_collins_gisin_form() {
        let s = Scenario::symmetric(2, 2).unwrap();
        let r = behavior_constrained_relaxation(&Behavior::<f64>::uniform(s), &RelaxationOptions::new(Level::new(1))).unwrap();
        assert_eq!(r.pins().len(), 8);
        let r = behavior_constrained_relaxation(
            &Behavior::<f64>::uniform(Scenario::symmetric(3, 4).unwrap()),
            &RelaxationOptions::new(Level::one_plus_ab()),
        )
        .unwrap();
        assert_eq!(r.pins().len(), 9 + 9 + 81);
    }

    #[test]
    fn conflicting_pins() {
        let s = Scenario::symmetric(2, 2).unwrap();
        let mut r = behavior_constrained_relaxation(&Behavior::<f64>::uniform(s), &RelaxationOptions::new(Level::new(1))).unwrap();
        let a = Monomial::letter(Symbol::alice(0, 0));
        assert!(r.pin(&a, 0.5).is_ok());
        assert!(matches!(r.pin(&a, 0.7), Err(Error::InconsistentPins(_))));
        assert!(r.pin(&Monomial::identity(), 2.0).is_err());
    }

    #[test]
    fn i234_objective_has_no_constant_surprise() {
        let f = make_i234::<f64>();
        let p = functional_poly(&f);
        // uniform moments: y(A) = 1/4, y(B) = 1/4, y(AB) = 1/16
        let mut total = 0.0;
        for (m, c) in p.terms() {
            let v = match m.len() {
                0 => 1.0,
                1 => 0.25,
                _ => 0.0625,
            };
            total += c * v;
        }
        assert!((total - 4.5).abs() < 1e-12);
    }
}
