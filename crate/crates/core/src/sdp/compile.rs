//! Lowering of a [`RelaxationProblem`] to a [`BlockSdp`].
//!
//! A relaxation maximises `o . y + o_0` subject to blocks
//! `G_0 + sum_i y_i G_i psd`. Pinned variables are substituted, the rest
//! become SDP variables with `F_i = G_i`, `F_0 = -G_0` and `c = -o`.

use crate::error::{Error, Result};
use crate::npa::RelaxationProblem;
use crate::real::Real;

use super::problem::{BlockSdp, Entry, SdpSolution, Status};
use super::solver::{solve, SolverOptions};

#[derive(Clone, Debug)]
pub struct CompiledSdp<T> {
    pub sdp: BlockSdp<T>,
    /// Relaxation variable id of each SDP variable.
    pub free_vars: Vec<usize>,
    /// Pinned values, by relaxation variable id.
    pub pinned: Vec<Option<T>>,
    /// Constant part of the relaxation objective after substitution.
    pub objective_offset: T,
}

impl<T: Real> CompiledSdp<T> {
    /// Relaxation objective value of SDP point `x`.
    pub fn relaxation_value(&self, sdp_objective: T) -> T {
        self.objective_offset - sdp_objective
    }

    /// Full moment vector `y` (without the identity) from SDP point `x`.
    pub fn moments(&self, x: &[T]) -> Vec<T> {
        let mut y: Vec<T> = self.pinned.iter().map(|p| p.unwrap_or_else(T::zero)).collect();
        for (k, &v) in self.free_vars.iter().enumerate() {
            y[v] = x[k];
        }
        y
    }
}

pub fn compile<T: Real>(r: &RelaxationProblem<T>) -> Result<CompiledSdp<T>> {
    compile_with_margin(r, T::zero())
}

/// Like [`compile`], but every block only has to satisfy `G >= -margin * 1`.
/// The feasible set grows, so the optimum can only increase: an upper bound
/// for the loosened problem is an upper bound for the original one. A small
/// margin restores strict feasibility when the pins force singular blocks.
pub fn compile_with_margin<T: Real>(r: &RelaxationProblem<T>, margin: T) -> Result<CompiledSdp<T>> {
    if margin < T::zero() {
        return Err(Error::InvalidArgument("negative margin".into()));
    }
    let nvars = r.variables().len();
    let mut pinned = vec![None; nvars];
    for (&v, &val) in r.pins() {
        pinned[v] = Some(val);
    }
    let mut slot = vec![usize::MAX; nvars];
    let mut free_vars = Vec::new();
    for v in 0..nvars {
        if pinned[v].is_none() {
            slot[v] = free_vars.len();
            free_vars.push(v);
        }
    }

    let mut used = vec![false; free_vars.len()];
    let mut entries = Vec::new();
    let mut sizes = Vec::with_capacity(r.blocks().len());
    for (b, block) in r.blocks().iter().enumerate() {
        sizes.push(block.size() as isize);
        for (i, j, form) in block.upper() {
            let mut constant = form.constant;
            for &(v, c) in &form.coeffs {
                match pinned[v] {
                    Some(val) => constant += c * val,
                    None => {
                        used[slot[v]] = true;
                        entries.push(Entry {
                            matrix: slot[v] + 1,
                            block: b,
                            row: i,
                            col: j,
                            value: c,
                        });
                    }
                }
            }
            if i == j {
                constant += margin;
            }
            if constant != T::zero() {
                entries.push(Entry {
                    matrix: 0,
                    block: b,
                    row: i,
                    col: j,
                    value: -constant,
                });
            }
        }
    }

    let mut objective = vec![T::zero(); free_vars.len()];
    let mut offset = r.objective().constant;
    for &(v, c) in &r.objective().coeffs {
        match pinned[v] {
            Some(val) => offset += c * val,
            None => {
                if !used[slot[v]] {
                    return Err(Error::InvalidArgument(format!(
                        "objective uses y({}) which appears in no block",
                        r.variables()[v]
                    )));
                }
                objective[slot[v]] -= c;
            }
        }
    }
    Ok(CompiledSdp {
        sdp: BlockSdp::new(sizes, objective, entries)?,
        free_vars,
        pinned,
        objective_offset: offset,
    })
}

/// Outcome of solving a relaxation.
#[derive(Clone, Debug)]
pub struct RelaxationSolution<T> {
    pub status: Status,
    /// Objective at the returned moment vector.
    pub value: T,
    /// Value implied by the dual certificate, an upper bound on the optimum
    /// up to the reported dual residual.
    pub upper_bound: T,
    pub moments: Vec<T>,
    pub sdp: SdpSolution<T>,
}

pub fn solve_relaxation<T: Real>(r: &RelaxationProblem<T>, opts: &SolverOptions) -> Result<RelaxationSolution<T>> {
    solve_relaxation_with_margin(r, opts, T::zero())
}

/// Solves the loosened problem of [`compile_with_margin`].
pub fn solve_relaxation_with_margin<T: Real>(
    r: &RelaxationProblem<T>,
    opts: &SolverOptions,
    margin: T,
) -> Result<RelaxationSolution<T>> {
    let compiled = compile_with_margin(r, margin)?;
    let sol = solve(&compiled.sdp, opts)?;
    Ok(RelaxationSolution {
        status: sol.status,
        value: compiled.relaxation_value(sol.primal_objective),
        upper_bound: compiled.relaxation_value(sol.dual_objective),
        moments: compiled.moments(&sol.x),
        sdp: sol,
    })
}
