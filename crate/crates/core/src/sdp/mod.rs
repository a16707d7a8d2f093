//! Block-diagonal semidefinite programs: an interior-point solver, SDPA file
//! exchange and the lowering of relaxations.

mod compile;
mod problem;
mod sdpa;
mod solver;

pub use compile::{compile, compile_with_margin, solve_relaxation, solve_relaxation_with_margin, CompiledSdp, RelaxationSolution};
pub use problem::{BlockSdp, Entry, SdpSolution, Status};
pub use sdpa::{export_sdpa, parse_sdpa, parse_sdpa_result, SdpaResult};
pub use solver::{solve, SolverOptions, DEFAULT_MAX_SIDE};
