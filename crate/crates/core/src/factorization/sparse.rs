//! Up-looking sparse Cholesky with a separate symbolic phase.
//!
//! The input is a symmetric matrix given by its full pattern in compressed
//! form (both triangles, as stored by [`SparseSymmetric`]) and a value array
//! aligned with that pattern. The analysis fixes the permutation, the
//! elimination tree and the column counts, so repeated numeric
//! factorizations of matrices with the same pattern only touch values.
//!
//! [`SparseSymmetric`]: crate::sparse::SparseSymmetric

use crate::error::Result;

use super::dense::PivotPolicy;
use super::ordering::Permutation;

#[derive(Debug, Clone)]
pub(crate) struct SymbolicCholesky {
    n: usize,
    perm: Permutation,
    // upper triangle of P S Pᵀ, by column; `c_src` points into the input values
    c_colptr: Vec<usize>,
    c_rowidx: Vec<usize>,
    c_src: Vec<usize>,
    etree: Vec<usize>,
    l_colptr: Vec<usize>,
}

/// Lower-triangular `L` (CSC, diagonal first in each column) with
/// `L Lᵀ = P S Pᵀ`.
#[derive(Debug, Clone)]
pub(crate) struct NumericCholesky {
    pub(crate) l_colptr: Vec<usize>,
    pub(crate) l_rowidx: Vec<usize>,
    pub(crate) l_values: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl SymbolicCholesky {
    pub(crate) fn analyze(n: usize, indptr: &[usize], indices: &[usize], perm: Permutation) -> Self {
        assert_eq!(perm.len(), n);
        let pinv = perm.old_to_new();
        let mut counts = vec![0usize; n + 1];
        for old_col in 0..n {
            let j = pinv[old_col];
            for &old_row in &indices[indptr[old_col]..indptr[old_col + 1]] {
                if pinv[old_row] <= j {
                    counts[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let c_colptr = counts.clone();
        let mut next = counts;
        let nnz_c = c_colptr[n];
        let mut c_rowidx = vec![0; nnz_c];
        let mut c_src = vec![0; nnz_c];
        for old_col in 0..n {
            let j = pinv[old_col];
            for t in indptr[old_col]..indptr[old_col + 1] {
                let i = pinv[indices[t]];
                if i <= j {
                    c_rowidx[next[j]] = i;
                    c_src[next[j]] = t;
                    next[j] += 1;
                }
            }
        }

        // elimination tree with path compression
        let mut etree = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &i0 in &c_rowidx[c_colptr[k]..c_colptr[k + 1]] {
                let mut i = i0;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        etree[i] = k;
                        break;
                    }
                    i = next;
                }
            }
        }

        let mut sym = SymbolicCholesky {
            n,
            perm,
            c_colptr,
            c_rowidx,
            c_src,
            etree,
            l_colptr: Vec::new(),
        };
        // column counts: row k of L contributes to every column in its reach
        let mut col_count = vec![1usize; n];
        let mut mark = vec![NONE; n];
        let mut stack = Vec::new();
        for k in 0..n {
            sym.row_pattern(k, &mut mark, &mut stack);
            for &i in &stack {
                col_count[i] += 1;
            }
        }
        let mut l_colptr = vec![0; n + 1];
        for j in 0..n {
            l_colptr[j + 1] = l_colptr[j] + col_count[j];
        }
        sym.l_colptr = l_colptr;
        sym
    }

    pub(crate) fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub(crate) fn nnz_l(&self) -> usize {
        self.l_colptr[self.n]
    }

    /// Columns `i < k` with `L[k, i] ≠ 0`, in topological order, into `stack`.
    fn row_pattern(&self, k: usize, mark: &mut [usize], stack: &mut Vec<usize>) {
        stack.clear();
        mark[k] = k;
        for &i0 in &self.c_rowidx[self.c_colptr[k]..self.c_colptr[k + 1]] {
            let mut i = i0;
            if i >= k {
                continue;
            }
            while i != NONE && mark[i] != k {
                stack.push(i);
                mark[i] = k;
                i = self.etree[i];
            }
        }
        // etree parents have larger indices, so ascending order is topological
        stack.sort_unstable();
    }

    /// Numeric factorization. `shift` is added to every diagonal entry;
    /// a pivot at or below `pivot_floor` fails with its permuted index.
    pub(crate) fn factor(&self, values: &[f64], shift: f64, pivot_floor: f64) -> Result<NumericCholesky> {
        self.factor_with(values, shift, PivotPolicy::Fail(pivot_floor)).map(|(f, _)| f)
    }

    /// Numeric factorization under an explicit pivot policy. Replaced
    /// pivots come back as `(original index, diagonal increment)`.
    pub(crate) fn factor_with(
        &self,
        values: &[f64],
        shift: f64,
        policy: PivotPolicy,
    ) -> Result<(NumericCholesky, Vec<(usize, f64)>)> {
        let mut replaced = Vec::new();
        let n = self.n;
        let mut l_rowidx = vec![0usize; self.nnz_l()];
        let mut l_values = vec![0.0; self.nnz_l()];
        let mut fill = self.l_colptr[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut mark = vec![NONE; n];
        let mut stack = Vec::new();
        for k in 0..n {
            self.row_pattern(k, &mut mark, &mut stack);
            let mut d = shift;
            let mut original = shift;
            for t in self.c_colptr[k]..self.c_colptr[k + 1] {
                let i = self.c_rowidx[t];
                let v = values[self.c_src[t]];
                if i == k {
                    d += v;
                    original += v;
                } else {
                    x[i] += v;
                }
            }
            for &i in &stack {
                let start = self.l_colptr[i];
                let lki = x[i] / l_values[start];
                x[i] = 0.0;
                for p in start + 1..fill[i] {
                    x[l_rowidx[p]] -= l_values[p] * lki;
                }
                d -= lki * lki;
                l_rowidx[fill[i]] = k;
                l_values[fill[i]] = lki;
                fill[i] += 1;
            }
            let (d, increment) = policy.check(k, d, original)?;
            if let Some(inc) = increment {
                replaced.push((self.perm.new_to_old()[k], inc));
            }
            let start = self.l_colptr[k];
            l_rowidx[start] = k;
            l_values[start] = d.sqrt();
            fill[k] = start + 1;
        }
        let factor = NumericCholesky {
            l_colptr: self.l_colptr.clone(),
            l_rowidx,
            l_values,
        };
        Ok((factor, replaced))
    }
}

impl NumericCholesky {
    /// Solves `(P S Pᵀ) x = b` in the permuted ordering, in place.
    pub(crate) fn solve_permuted_in_place(&self, x: &mut [f64]) {
        let n = self.l_colptr.len() - 1;
        for j in 0..n {
            let start = self.l_colptr[j];
            let xj = x[j] / self.l_values[start];
            x[j] = xj;
            for p in start + 1..self.l_colptr[j + 1] {
                x[self.l_rowidx[p]] -= self.l_values[p] * xj;
            }
        }
        for j in (0..n).rev() {
            let start = self.l_colptr[j];
            let mut s = x[j];
            for p in start + 1..self.l_colptr[j + 1] {
                s -= self.l_values[p] * x[self.l_rowidx[p]];
            }
            x[j] = s / self.l_values[start];
        }
    }

    /// Solves `S x = b` in the original ordering.
    pub(crate) fn solve(&self, perm: &Permutation, b: &[f64]) -> Vec<f64> {
        let mut x = perm.apply(b);
        self.solve_permuted_in_place(&mut x);
        perm.apply_inverse(&x)
    }
}
