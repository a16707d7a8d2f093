//! Noncommutative moment relaxations.

pub mod relaxation;
pub mod word;

pub use relaxation::{
    behavior_constrained_relaxation, efficiency_constrained_relaxation, functional_poly, generate_monomials,
    tsirelson_relaxation, Alphabet, Extra, Level, LinForm, MomentBlock, RelaxationOptions, RelaxationProblem,
};
pub use word::{projector_poly, reduce, Monomial, Poly, Symbol};
