//! Block-diagonal SDP in the SDPA convention:
//!
//! ```text
//! minimise    sum_i c_i x_i
//! subject to  X = sum_i F_i x_i - F_0  is positive semidefinite
//! ```
//!
//! with dual `maximise F_0 . Y  s.t.  F_i . Y = c_i,  Y psd`.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::real::Real;

/// One stored upper-triangle entry of `F_matrix` (0-based `block`, `row`,
/// `col`; `matrix` 0 is the constant matrix).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry<T> {
    pub matrix: usize,
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSdp<T> {
    /// Positive for dense blocks, negative for diagonal blocks.
    block_sizes: Vec<isize>,
    objective: Vec<T>,
    /// Sorted by `(matrix, block, row, col)`, no duplicates, no zeros.
    entries: Vec<Entry<T>>,
}

impl<T: Real> BlockSdp<T> {
    /// Validates positions, folds lower-triangle entries into the upper one,
    /// sums duplicates and sorts.
    pub fn new(block_sizes: Vec<isize>, objective: Vec<T>, entries: Vec<Entry<T>>) -> Result<Self> {
        if block_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("block of size zero".into()));
        }
        let m = objective.len();
        let mut clean = Vec::with_capacity(entries.len());
        for mut e in entries {
            if e.matrix > m {
                return Err(Error::Index(format!("matrix {} beyond {m} variables", e.matrix)));
            }
            let size = *block_sizes
                .get(e.block)
                .ok_or_else(|| Error::Index(format!("block {} of {}", e.block + 1, block_sizes.len())))?;
            let n = size.unsigned_abs();
            if e.row > e.col {
                std::mem::swap(&mut e.row, &mut e.col);
            }
            if e.col >= n {
                return Err(Error::Index(format!(
                    "entry ({}, {}) outside block {} of size {n}",
                    e.row + 1,
                    e.col + 1,
                    e.block + 1
                )));
            }
            if size < 0 && e.row != e.col {
                return Err(Error::Index(format!("off-diagonal entry in diagonal block {}", e.block + 1)));
            }
            clean.push(e);
        }
        clean.sort_by_key(|e| (e.matrix, e.block, e.row, e.col));
        let mut merged: Vec<Entry<T>> = Vec::with_capacity(clean.len());
        for e in clean {
            match merged.last_mut() {
                Some(l) if (l.matrix, l.block, l.row, l.col) == (e.matrix, e.block, e.row, e.col) => l.value += e.value,
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.value != T::zero());
        Ok(BlockSdp {
            block_sizes,
            objective,
            entries: merged,
        })
    }

    pub fn block_sizes(&self) -> &[isize] {
        &self.block_sizes
    }

    pub fn variable_count(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn entries(&self) -> &[Entry<T>] {
        &self.entries
    }

    /// Sum of block sides.
    pub fn total_side(&self) -> usize {
        self.block_sizes.iter().map(|s| s.unsigned_abs()).sum()
    }

    /// `sum_i F_i x_i - F_0`, one dense matrix per block.
    pub fn slack(&self, x: &[T]) -> Vec<Mat<T>> {
        let mut out: Vec<Mat<T>> = self
            .block_sizes
            .iter()
            .map(|s| Mat::zeros(s.unsigned_abs(), s.unsigned_abs()))
            .collect();
        for e in &self.entries {
            let w = if e.matrix == 0 { -T::one() } else { x[e.matrix - 1] };
            let v = e.value * w;
            let m = &mut out[e.block];
            m[(e.row, e.col)] += v;
            if e.row != e.col {
                m[(e.col, e.row)] += v;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// The constraint `sum F_i x_i - F_0 psd` admits no `x`.
    Infeasible,
    /// The minimisation is unbounded below.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::MaxIterations => "max-iterations",
            Status::NumericalFailure => "numerical-failure",
        }
    }
}

/// Result of [`super::solve`], in SDPA terms.
#[derive(Clone, Debug)]
pub struct SdpSolution<T> {
    pub status: Status,
    /// `c . x`
    pub primal_objective: T,
    /// `F_0 . Y`
    pub dual_objective: T,
    /// `|primal - dual| / max(1, (|primal| + |dual|) / 2)`
    pub relative_gap: T,
    /// `|| F_i . Y - c_i || / (1 + ||c||)`
    pub dual_infeasibility: T,
    /// `|| sum F_i x_i - F_0 - X ||_F / (1 + ||F_0||_F)`
    pub primal_infeasibility: T,
    pub x: Vec<T>,
    /// Primal slack `X`, per block.
    pub primal_matrix: Vec<Mat<T>>,
    /// Dual matrix `Y`, per block.
    pub dual_matrix: Vec<Mat<T>>,
    pub iterations: usize,
}
