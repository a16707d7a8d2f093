//! Operator words over Alice's and Bob's projectors and Eve's auxiliary
//! operators, with the reduction rules of the relaxation.

use std::collections::BTreeMap;
use std::fmt;

use crate::real::Real;

/// One letter of an operator word.
///
/// `A` and `B` are projectors `P_{outcome|input}` of Alice and Bob; `E` is an
/// auxiliary operator `V_{family,index}` (or its adjoint) on Eve's side. The
/// variant order is the canonical party order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    A { input: u16, outcome: u16 },
    B { input: u16, outcome: u16 },
    E { family: u16, index: u16, adjoint: bool },
}

impl Symbol {
    pub fn alice(input: usize, outcome: usize) -> Self {
        Symbol::A {
            input: input as u16,
            outcome: outcome as u16,
        }
    }

    pub fn bob(input: usize, outcome: usize) -> Self {
        Symbol::B {
            input: input as u16,
            outcome: outcome as u16,
        }
    }

    pub fn eve(family: usize, index: usize) -> Self {
        Symbol::E {
            family: family as u16,
            index: index as u16,
            adjoint: false,
        }
    }

    fn party(&self) -> u8 {
        match self {
            Symbol::A { .. } => 0,
            Symbol::B { .. } => 1,
            Symbol::E { .. } => 2,
        }
    }

    pub fn adjoint(self) -> Self {
        match self {
            Symbol::E {
                family,
                index,
                adjoint,
            } => Symbol::E {
                family,
                index,
                adjoint: !adjoint,
            },
            s => s,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Symbol::A { input, outcome } => write!(f, "A{}|{}", outcome + 1, input + 1),
            Symbol::B { input, outcome } => write!(f, "B{}|{}", outcome + 1, input + 1),
            Symbol::E {
                family,
                index,
                adjoint,
            } => write!(f, "V{},{}{}", family + 1, index + 1, if adjoint { "*" } else { "" }),
        }
    }
}

/// Canonical reduced word; the empty word is the identity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<Symbol>);

impl Monomial {
    pub fn identity() -> Self {
        Monomial(Vec::new())
    }

    pub fn letter(s: Symbol) -> Self {
        Monomial(vec![s])
    }

    /// Reduces an arbitrary product; `None` when it vanishes.
    pub fn from_word(word: &[Symbol]) -> Option<Self> {
        reduce(word)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn adjoint(&self) -> Self {
        // each party block reverses on its own; blocks stay in party order
        let mut out = Vec::with_capacity(self.0.len());
        let mut start = 0;
        while start < self.0.len() {
            let party = self.0[start].party();
            let mut end = start;
            while end < self.0.len() && self.0[end].party() == party {
                end += 1;
            }
            out.extend(self.0[start..end].iter().rev().map(|s| s.adjoint()));
            start = end;
        }
        Monomial(out)
    }

    pub fn mul(&self, other: &Self) -> Option<Self> {
        let mut w = Vec::with_capacity(self.len() + other.len());
        w.extend_from_slice(&self.0);
        w.extend_from_slice(&other.0);
        reduce(&w)
    }

    /// Representative of `{w, w*}`; real moments identify the two.
    pub fn hermitian_class(&self) -> Self {
        let adj = self.adjoint();
        if adj < *self {
            adj
        } else {
            self.clone()
        }
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.adjoint() == *self
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Moves letters into party order, then applies idempotence and
/// same-input orthogonality to the projector blocks. Eve's letters obey no
/// relations. One pass reaches the fixpoint: dropping a repeated letter never
/// creates a new adjacent pair.
pub fn reduce(word: &[Symbol]) -> Option<Monomial> {
    let mut out: Vec<Symbol> = Vec::with_capacity(word.len());
    for party in 0..3u8 {
        let block_start = out.len();
        for &s in word.iter().filter(|s| s.party() == party) {
            if party == 2 || out.len() == block_start {
                out.push(s);
                continue;
            }
            let top = *out.last().expect("nonempty block");
            match (top, s) {
                (t, s) if t == s => {}
                (Symbol::A { input: i, .. }, Symbol::A { input: j, .. })
                | (Symbol::B { input: i, .. }, Symbol::B { input: j, .. })
                    if i == j =>
                {
                    return None
                }
                _ => out.push(s),
            }
        }
    }
    Some(Monomial(out))
}

/// Sparse noncommutative polynomial.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly<T> {
    terms: BTreeMap<Monomial, T>,
}

impl<T: Real> Poly<T> {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: T) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::identity(), c);
        p
    }

    pub fn monomial(m: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(m, T::one());
        p
    }

    pub fn letter(s: Symbol) -> Self {
        Self::monomial(Monomial::letter(s))
    }

    pub fn add_term(&mut self, m: Monomial, c: T) {
        let e = self.terms.entry(m.clone()).or_insert_with(T::zero);
        *e += c;
        if *e == T::zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, T)> {
        self.terms.iter().filter(|(_, c)| **c != T::zero()).map(|(m, c)| (m, *c))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, s: T) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), *c * s))
                .filter(|(_, c)| *c != T::zero())
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, c1) in self.terms() {
            for (m2, c2) in other.terms() {
                if let Some(m) = m1.mul(m2) {
                    out.add_term(m, c1 * c2);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in self.terms() {
            out.add_term(m.adjoint(), c);
        }
        out
    }

    /// `m* p n`
    pub fn sandwich(&self, left: &Monomial, right: &Monomial) -> Self {
        let mut out = Self::zero();
        let l = left.adjoint();
        for (m, c) in self.terms() {
            if let Some(lm) = l.mul(m) {
                if let Some(w) = lm.mul(right) {
                    out.add_term(w, c);
                }
            }
        }
        out
    }
}

/// `P_{a|x}` for a party with `outcomes` outcomes, the last outcome written as
/// `1 - sum` of the others.
pub fn projector_poly<T: Real>(alice: bool, input: usize, outcome: usize, outcomes: usize) -> Poly<T> {
    let letter = |a| if alice { Symbol::alice(input, a) } else { Symbol::bob(input, a) };
    if outcome + 1 < outcomes {
        return Poly::letter(letter(outcome));
    }
    let mut p = Poly::constant(T::one());
    for a in 0..outcomes - 1 {
        p.add_term(Monomial::letter(letter(a)), -T::one());
    }
    p
}
