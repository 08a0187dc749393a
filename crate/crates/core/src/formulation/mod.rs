//! Second-order cone formulations of the selection problem and the SDP export.
//!
//! Every formulation produces a [`ConicProblem`]
//!
//! ```text
//! maximize cᵀz  subject to  f₀ − F z ∈ ℝ₊ⁿˡ × 𝒦ⁿq
//! ```
//!
//! with `n_l = 2 + 2m`, `n_q = 1 + m` and rows ordered as
//! `[eᵀ; −eᵀ; upper bounds; lower bounds; cone head; cone tail]`.
//!
//! | formulation | variable | cone tail          | needs                 |
//! |-------------|----------|--------------------|-----------------------|
//! | simple      | `x`      | `U`, `UᵀU = A`     | dense `A`             |
//! | sparse      | `y = Ax` | `G P`, `GᵀG = PA⁻¹Pᵀ` | sparse Cholesky of `A⁻¹` |
//! | compact     | `y = Ax` | `B`, `BᵀB = A⁻¹`   | pedigree only         |

mod conic;
mod sdp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use conic::ConicProblem;
pub use sdp::{build_sdp, export_sdpa, read_sdpa, SdpEntry, SdpProblem};

use crate::dense::UpperTriangular;
use crate::error::{check_dim, Error, Result};
use crate::factorization::{dense_cholesky, fill_reducing_permutation, sparse_cholesky, InverseFactor};
use crate::kinship::{inverse_mul, relationship_matrix, KinshipModel};
use crate::pedigree::Pedigree;
use crate::sparse::{CsrMatrix, SparseRowMatrix, SparseSymmetric};

/// Entries of `U` at or below this magnitude are dropped from the simple
/// formulation; they are round-off from eliminating unrelated members.
pub const SIMPLE_DROP_TOL: f64 = 1e-13;

/// The three cone formulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Simple,
    Sparse,
    #[default]
    Compact,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [Formulation::Simple, Formulation::Sparse, Formulation::Compact];

    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Simple => "simple",
            Formulation::Sparse => "sparse",
            Formulation::Compact => "compact",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(Formulation::Simple),
            "sparse" => Ok(Formulation::Sparse),
            "compact" => Ok(Formulation::Compact),
            other => Err(Error::InvalidConfig(format!("unknown formulation `{other}`"))),
        }
    }
}

/// A selection problem: pedigree, gains `g`, bounds `l ≤ x ≤ u` and the
/// coancestry cap `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionInstance {
    ped: Pedigree,
    g: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    theta: f64,
}

impl SelectionInstance {
    /// Uses the pedigree's EBVs as `g`.
    pub fn new(ped: Pedigree, lower: Vec<f64>, upper: Vec<f64>, theta: f64) -> Result<Self> {
        let g = ped.ebv().to_vec();
        Self::with_gains(ped, g, lower, upper, theta)
    }

    /// Scalar bounds broadcast to every member.
    pub fn uniform(ped: Pedigree, lower: f64, upper: f64, theta: f64) -> Result<Self> {
        let m = ped.len();
        Self::new(ped, vec![lower; m], vec![upper; m], theta)
    }

    pub fn with_gains(ped: Pedigree, g: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>, theta: f64) -> Result<Self> {
        let m = ped.len();
        if m == 0 {
            return Err(Error::InvalidInstance("empty pedigree".into()));
        }
        check_dim(m, g.len())?;
        check_dim(m, lower.len())?;
        check_dim(m, upper.len())?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidInstance(format!("theta must be positive and finite, got {theta}")));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance(format!("gain of member {} is not finite", ped.labels()[i])));
        }
        for i in 0..m {
            let (l, u) = (lower[i], upper[i]);
            if !(l.is_finite() && u.is_finite()) || l < 0.0 || l > u {
                return Err(Error::InvalidInstance(format!(
                    "bounds of member {} must satisfy 0 <= l <= u, got l={l}, u={u}",
                    ped.labels()[i]
                )));
            }
        }
        let sum_l: f64 = lower.iter().sum();
        let sum_u: f64 = upper.iter().sum();
        if sum_l > 1.0 {
            return Err(Error::InvalidInstance(format!("lower bounds sum to {sum_l} > 1")));
        }
        if sum_u < 1.0 {
            return Err(Error::InvalidInstance(format!("upper bounds sum to {sum_u} < 1")));
        }
        Ok(SelectionInstance {
            ped,
            g,
            lower,
            upper,
            theta,
        })
    }

    pub fn pedigree(&self) -> &Pedigree {
        &self.ped
    }

    pub fn m(&self) -> usize {
        self.ped.len()
    }

    pub fn gains(&self) -> &[f64] {
        &self.g
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Same data with a different cap.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::with_gains(self.ped.clone(), self.g.clone(), self.lower.clone(), self.upper.clone(), theta)
    }

    fn orthant_offsets(&self) -> Vec<f64> {
        let m = self.m();
        let mut f0 = Vec::with_capacity(3 + 3 * m);
        f0.push(1.0);
        f0.push(-1.0);
        f0.extend_from_slice(&self.upper);
        f0.extend(self.lower.iter().map(|l| -l));
        f0.push((2.0 * self.theta).sqrt());
        f0.resize(3 + 3 * m, 0.0);
        f0
    }
}

/// Maps a solution `y = Ax` of the sparse or compact formulation back to `x`.
#[derive(Debug, Clone)]
pub struct RecoveryMap {
    ainv: SparseSymmetric,
}

impl RecoveryMap {
    pub fn new(ainv: SparseSymmetric) -> Self {
        RecoveryMap { ainv }
    }

    pub fn inverse(&self) -> &SparseSymmetric {
        &self.ainv
    }

    /// `x = A⁻¹ y`
    pub fn recover_x(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.ainv.mul_vec(y)
    }
}

/// `x = A⁻¹ y`
pub fn recover_x(y: &[f64], map: &RecoveryMap) -> Result<Vec<f64>> {
    map.recover_x(y)
}

fn check_instance_dim(inst: &SelectionInstance, n: usize) -> Result<()> {
    check_dim(inst.m(), n)
}

/// Assembles `F` from the equality row, the box block and the cone tail.
fn assemble(m: usize, equality: &[(usize, f64)], box_rows: &CsrMatrix, tail: &CsrMatrix) -> CsrMatrix {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(3 + 3 * m);
    rows.push(equality.to_vec());
    rows.push(equality.iter().map(|&(j, v)| (j, -v)).collect());
    for i in 0..m {
        let (cols, vals) = box_rows.row(i);
        rows.push(cols.iter().copied().zip(vals.iter().copied()).collect());
    }
    for i in 0..m {
        let (cols, vals) = box_rows.row(i);
        rows.push(cols.iter().copied().zip(vals.iter().map(|v| -v)).collect());
    }
    rows.push(Vec::new());
    for i in 0..m {
        let (cols, vals) = tail.row(i);
        rows.push(cols.iter().copied().zip(vals.iter().copied()).collect());
    }
    CsrMatrix::from_rows(m, rows)
}

/// Simple formulation in `x`: the cone reads `‖U x‖ ≤ √(2θ)`.
pub fn build_simple(inst: &SelectionInstance, u: &UpperTriangular) -> Result<ConicProblem> {
    let m = inst.m();
    check_instance_dim(inst, u.n())?;
    let equality: Vec<(usize, f64)> = (0..m).map(|j| (j, 1.0)).collect();
    let tail_rows = (0..m)
        .map(|i| {
            u.row_upper(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > SIMPLE_DROP_TOL)
                .map(|(k, &v)| (i + k, v))
                .collect()
        })
        .collect();
    let tail = CsrMatrix::from_rows(m, tail_rows);
    let f = assemble(m, &equality, &CsrMatrix::identity(m), &tail);
    ConicProblem::new(inst.g.clone(), inst.orthant_offsets(), f, 2 + 2 * m, 1 + m)
}

/// Shared part of the sparse and compact formulations in `y = Ax`.
fn build_in_y(inst: &SelectionInstance, kin: &KinshipModel, tail: &CsrMatrix) -> Result<(ConicProblem, RecoveryMap)> {
    let m = inst.m();
    check_instance_dim(inst, kin.inverse.n())?;
    let c = inverse_mul(&inst.ped, &kin.b, &inst.g)?;
    let ainv_e = inverse_mul(&inst.ped, &kin.b, &vec![1.0; m])?;
    let equality: Vec<(usize, f64)> = ainv_e.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
    let f = assemble(m, &equality, kin.inverse.csr(), tail);
    let problem = ConicProblem::new(c, inst.orthant_offsets(), f, 2 + 2 * m, 1 + m)?;
    Ok((problem, RecoveryMap::new(kin.inverse.clone())))
}

/// Sparse formulation in `y = Ax`: the cone reads `‖G P y‖ ≤ √(2θ)`.
pub fn build_sparse(
    inst: &SelectionInstance,
    kin: &KinshipModel,
    factor: &InverseFactor,
) -> Result<(ConicProblem, RecoveryMap)> {
    check_instance_dim(inst, factor.g().n_rows())?;
    build_in_y(inst, kin, &factor.unpermuted())
}

/// Compact formulation in `y = Ax`: the cone reads `‖B y‖ ≤ √(2θ)`.
pub fn build_compact(inst: &SelectionInstance, kin: &KinshipModel) -> Result<(ConicProblem, RecoveryMap)> {
    let b: &SparseRowMatrix = &kin.factor;
    check_instance_dim(inst, b.n_rows())?;
    build_in_y(inst, kin, b)
}

/// A built formulation with what is needed to map its solution back to `x`.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub formulation: Formulation,
    pub problem: ConicProblem,
    /// `None` when the variable already is `x`.
    pub recovery: Option<RecoveryMap>,
}

impl BuiltProblem {
    /// Contributions `x` from a solution vector `z`.
    pub fn recover(&self, z: &[f64]) -> Result<Vec<f64>> {
        match &self.recovery {
            Some(map) => map.recover_x(z),
            None => {
                check_dim(self.problem.n_vars(), z.len())?;
                Ok(z.to_vec())
            }
        }
    }

    /// `xᵀAx/2` for the solution `z`, computed from the formulation's own
    /// data: `yᵀx/2` in `y`, `‖Ux‖²/2` for the simple formulation.
    pub fn group_coancestry(&self, z: &[f64]) -> Result<f64> {
        match &self.recovery {
            Some(map) => {
                let x = map.recover_x(z)?;
                Ok(z.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / 2.0)
            }
            None => {
                let tail = self.problem.cone_tail_product(z)?;
                Ok(tail.iter().map(|v| v * v).sum::<f64>() / 2.0)
            }
        }
    }
}

/// Runs the whole kinship and factorization chain needed by `formulation`.
///
/// The compact path touches only sparse data; the simple path forms the
/// dense `A` and is subject to the dense limit.
pub fn build(inst: &SelectionInstance, formulation: Formulation) -> Result<BuiltProblem> {
    let (problem, recovery) = match formulation {
        Formulation::Simple => {
            let a = relationship_matrix(&inst.ped)?;
            let u = dense_cholesky(&a)?;
            (build_simple(inst, &u)?, None)
        }
        Formulation::Sparse => {
            let kin = KinshipModel::new(&inst.ped)?;
            let perm = fill_reducing_permutation(&kin.inverse);
            let factor = sparse_cholesky(&kin.inverse, &perm)?;
            let (p, r) = build_sparse(inst, &kin, &factor)?;
            (p, Some(r))
        }
        Formulation::Compact => {
            let kin = KinshipModel::new(&inst.ped)?;
            let (p, r) = build_compact(inst, &kin)?;
            (p, Some(r))
        }
    };
    Ok(BuiltProblem {
        formulation,
        problem,
        recovery,
    })
}
