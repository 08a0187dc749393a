//! Small dense matrices used by the desk-scale oracle paths.

use crate::error::{check_dim, Error, Result};

/// Default cap on the order of any dense `m × m` matrix.
pub const DEFAULT_DENSE_LIMIT: usize = 20_000;

/// Reads `OCS_DENSE_LIMIT`, falling back to [`DEFAULT_DENSE_LIMIT`].
pub fn dense_limit() -> usize {
    std::env::var("OCS_DENSE_LIMIT")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_LIMIT)
}

pub(crate) fn check_dense_limit(m: usize) -> Result<()> {
    let limit = dense_limit();
    if m > limit {
        Err(Error::DenseLimit { m, limit })
    } else {
        Ok(())
    }
}

thread_local! {
    static DENSE_ALLOCATIONS: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

/// Number of [`DenseSymmetric`] matrices constructed on the current thread.
///
/// Lets callers assert that a pipeline stays sparse end to end.
pub fn dense_allocations() -> usize {
    DENSE_ALLOCATIONS.with(|c| c.get())
}

fn note_dense_allocation() {
    DENSE_ALLOCATIONS.with(|c| c.set(c.get() + 1));
}

/// Full symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymmetric {
    pub fn zeros(n: usize) -> Self {
        note_dense_allocation();
        DenseSymmetric {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n);
        for i in 0..n {
            out.data[i * n + i] = 1.0;
        }
        out
    }

    /// Panics if `rows` is not square and symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        note_dense_allocation();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "matrix must be square");
            data.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..i {
                assert_eq!(data[i * n + j], data[j * n + i], "matrix must be symmetric");
            }
        }
        DenseSymmetric { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        Ok((0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `xᵀ M x`
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let y = self.mul_vec(x)?;
        Ok(y.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    pub fn count_nonzeros(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }
}

/// Dense upper-triangular matrix, row-major, zeros below the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriangular {
    n: usize,
    data: Vec<f64>,
}

impl UpperTriangular {
    pub(crate) fn from_raw(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        UpperTriangular { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Row `i` restricted to columns `i..n`.
    pub fn row_upper(&self, i: usize) -> &[f64] {
        &self.data[i * self.n + i..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        Ok((0..self.n)
            .map(|i| self.row_upper(i).iter().zip(&x[i..]).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `UᵀU`
    pub fn gram(&self) -> DenseSymmetric {
        let n = self.n;
        let mut out = DenseSymmetric::zeros(n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..=i).map(|k| self.get(k, i) * self.get(k, j)).sum();
                out.set(i, j, s);
            }
        }
        out
    }
}

/// Max-norm of the difference of two equally sized row-major matrices.
pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| {
            assert_eq!(ra.len(), rb.len());
            ra.iter().zip(rb).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}
