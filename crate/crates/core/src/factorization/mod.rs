//! Cholesky machinery for the simple and sparse formulations.
//!
//! The simple formulation needs the dense upper factor `U` of `A`; the sparse
//! formulation needs a sparse factor `G` of `A⁻¹` under a fill-reducing
//! permutation. The compact formulation needs neither.

mod dense;
mod ordering;
pub(crate) mod sparse;

pub use dense::{dense_cholesky, PIVOT_TOL};
pub(crate) use dense::{cholesky_solve_in_place, cholesky_upper_in_place_with, PivotPolicy};
pub use ordering::{Ordering, Permutation};
pub(crate) use ordering::minimum_degree;

use crate::error::Result;
use crate::sparse::{CsrMatrix, SparseSymmetric};
use sparse::SymbolicCholesky;

/// Sparse upper-triangular `G` with `GᵀG = P S Pᵀ`.
#[derive(Debug, Clone)]
pub struct InverseFactor {
    g: CsrMatrix,
    perm: Permutation,
}

impl InverseFactor {
    /// `G`, rows and columns in permuted order.
    pub fn g(&self) -> &CsrMatrix {
        &self.g
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    /// `G P`: the factor with its columns mapped back to the original
    /// ordering, so that `‖G P y‖² = yᵀ S y`.
    pub fn unpermuted(&self) -> CsrMatrix {
        self.g.relabel_columns(self.perm.new_to_old())
    }

    pub fn nnz(&self) -> usize {
        self.g.nnz()
    }
}

/// Fill-reducing symmetric permutation by minimum degree.
pub fn fill_reducing_permutation(s: &SparseSymmetric) -> Permutation {
    let csr = s.csr();
    minimum_degree(s.n(), csr.indptr(), csr.indices())
}

/// Picks the permutation for `ordering`.
pub fn ordering_for(s: &SparseSymmetric, ordering: Ordering) -> Permutation {
    match ordering {
        Ordering::MinimumDegree => fill_reducing_permutation(s),
        Ordering::Natural => Permutation::identity(s.n()),
    }
}

/// Non-zeros in the Cholesky factor of `P S Pᵀ` (diagonal included).
pub fn factor_fill(s: &SparseSymmetric, perm: &Permutation) -> usize {
    let csr = s.csr();
    SymbolicCholesky::analyze(s.n(), csr.indptr(), csr.indices(), perm.clone()).nnz_l()
}

/// Sparse Cholesky of `P S Pᵀ`.
pub fn sparse_cholesky(s: &SparseSymmetric, perm: &Permutation) -> Result<InverseFactor> {
    let csr = s.csr();
    let n = s.n();
    let sym = SymbolicCholesky::analyze(n, csr.indptr(), csr.indices(), perm.clone());
    let max_diag = s.diagonal().into_iter().fold(0.0f64, f64::max);
    let num = sym.factor(csr.values(), 0.0, PIVOT_TOL * max_diag)?;
    // column j of L is row j of G = Lᵀ
    let rows = (0..n)
        .map(|j| {
            let range = num.l_colptr[j]..num.l_colptr[j + 1];
            num.l_rowidx[range.clone()]
                .iter()
                .copied()
                .zip(num.l_values[range].iter().copied())
                .collect()
        })
        .collect();
    Ok(InverseFactor {
        g: CsrMatrix::from_rows(n, rows),
        perm: perm.clone(),
    })
}
