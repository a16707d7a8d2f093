//! Device-independent key-rate toolkit: quantum realizations and behaviors,
//! Bell functionals, NPA relaxations, a semidefinite solver, conditional
//! entropy bounds and key-rate scans.

pub mod entropy;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod npa;
pub mod quantum;
pub mod optimize;
pub mod rates;
pub mod real;
pub mod scenario;
pub mod sdp;
pub mod textio;

pub use error::{Error, Result};
pub use real::Real;

pub type Behavior = scenario::Behavior<f64>;
pub type BellFunctional = functionals::BellFunctional<f64>;
pub type QuantumRealization = quantum::QuantumRealization<f64>;
pub type Measurement = quantum::Measurement<f64>;
pub type BipartiteState = quantum::BipartiteState<f64>;
pub type NoiseParams = scenario::NoiseParams<f64>;
pub type CMatrix = linalg::CMatrix<f64>;
pub type Mat = linalg::Mat<f64>;
pub use scenario::Scenario;

pub type BehaviorF32 = scenario::Behavior<f32>;
pub type QuantumRealizationF32 = quantum::QuantumRealization<f32>;
