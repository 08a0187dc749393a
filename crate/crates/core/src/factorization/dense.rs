use crate::dense::{DenseSymmetric, UpperTriangular};
use crate::error::{Error, Result};

/// Relative pivot threshold: a pivot below `PIVOT_TOL · max diag` is
/// treated as loss of positive definiteness.
pub const PIVOT_TOL: f64 = 1e-12;

/// In-place right-looking Cholesky of a row-major `n × n` symmetric matrix.
/// On success the upper triangle holds `U` with `UᵀU = M`; the strict lower
/// triangle is zeroed.
pub(crate) fn cholesky_upper_in_place(n: usize, a: &mut [f64], pivot_tol: f64) -> Result<()> {
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
    cholesky_upper_in_place_with(n, a, PivotPolicy::Fail(pivot_tol * max_diag)).map(|_| ())
}

/// What to do with a pivot that is too small.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PivotPolicy {
    /// Fail on a pivot at or below this absolute floor.
    Fail(f64),
    /// Replace a pivot at or below this fraction of its original diagonal
    /// by that diagonal. The result is the exact factor of the input plus
    /// the reported diagonal increments.
    Replace(f64),
}

impl PivotPolicy {
    /// The pivot to use and, for a replacement, the increment over the
    /// computed pivot; or an error.
    #[inline]
    pub(crate) fn check(self, index: usize, pivot: f64, original: f64) -> Result<(f64, Option<f64>)> {
        if !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { index, pivot });
        }
        match self {
            PivotPolicy::Fail(floor) if pivot > floor => Ok((pivot, None)),
            PivotPolicy::Fail(_) => Err(Error::NotPositiveDefinite { index, pivot }),
            PivotPolicy::Replace(rel) if pivot > rel * original.abs() && pivot > 0.0 => Ok((pivot, None)),
            PivotPolicy::Replace(_) => {
                let value = if original > 0.0 { original } else { 1.0 };
                Ok((value, Some(value - pivot)))
            }
        }
    }
}

/// As [`cholesky_upper_in_place`] with an explicit pivot policy; returns the
/// replaced pivots as `(index, increment)`.
pub(crate) fn cholesky_upper_in_place_with(n: usize, a: &mut [f64], policy: PivotPolicy) -> Result<Vec<(usize, f64)>> {
    let original: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut replaced = Vec::new();
    for k in 0..n {
        let (pivot, increment) = policy.check(k, a[k * n + k], original[k])?;
        if let Some(inc) = increment {
            replaced.push((k, inc));
        }
        let d = pivot.sqrt();
        a[k * n + k] = d;
        for j in k + 1..n {
            a[k * n + j] /= d;
        }
        let (head, tail) = a.split_at_mut((k + 1) * n);
        let row_k = &head[k * n..];
        for i in k + 1..n {
            let uki = row_k[i];
            if uki == 0.0 {
                continue;
            }
            let row_i = &mut tail[(i - k - 1) * n..(i - k) * n];
            for j in i..n {
                row_i[j] -= uki * row_k[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[i * n + j] = 0.0;
        }
    }
    Ok(replaced)
}

/// Solves `UᵀU x = b` in place given the factor from [`cholesky_upper_in_place`].
pub(crate) fn cholesky_solve_in_place(n: usize, u: &[f64], x: &mut [f64]) {
    // Uᵀ y = b
    for i in 0..n {
        let yi = x[i] / u[i * n + i];
        x[i] = yi;
        if yi != 0.0 {
            for j in i + 1..n {
                x[j] -= u[i * n + j] * yi;
            }
        }
    }
    // U x = y
    for i in (0..n).rev() {
        let row = &u[i * n + i + 1..(i + 1) * n];
        let s: f64 = row.iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - s) / u[i * n + i];
    }
}

/// Upper-triangular `U` with `UᵀU = M`.
pub fn dense_cholesky(m: &DenseSymmetric) -> Result<UpperTriangular> {
    let n = m.n();
    let mut data: Vec<f64> = (0..n).flat_map(|i| m.row(i).to_vec()).collect();
    cholesky_upper_in_place(n, &mut data, PIVOT_TOL)?;
    Ok(UpperTriangular::from_raw(n, data))
}
