//! Relationship-matrix algebra on a canonical pedigree.
//!
//! The dense matrix `A` is only built by [`relationship_matrix`], which is
//! the desk-scale oracle. Everything else (inbreeding, `b`, sparse `A⁻¹`,
//! the factor `B`) works from the pedigree directly in roughly linear memory.

use std::collections::{BinaryHeap, HashMap};

use crate::dense::{check_dense_limit, DenseSymmetric};
use crate::error::{check_dim, Error, Result};
use crate::pedigree::{Parents, Pedigree};
use crate::sparse::{CsrMatrix, SparseRowMatrix, SparseSymmetric};

/// Inbreeding coefficients `h = diag(A) − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InbreedingVector(pub Vec<f64>);

/// Per-member scale of the rank-one terms of `A⁻¹`. Always positive.
#[derive(Debug, Clone, PartialEq)]
pub struct BCoefficients(pub Vec<f64>);

/// Dense numerator relationship matrix via the tabular recursion.
///
/// `O(m²)` memory; refuses orders above the dense limit.
pub fn relationship_matrix(ped: &Pedigree) -> Result<DenseSymmetric> {
    let m = ped.len();
    check_dense_limit(m)?;
    let mut a = DenseSymmetric::zeros(m);
    for (i, par) in ped.parents().iter().enumerate() {
        let (p, q) = (par.p(), par.q());
        for j in 0..i {
            let from_p = p.map_or(0.0, |p| a.get(j, p));
            let from_q = q.map_or(0.0, |q| a.get(j, q));
            a.set(i, j, (from_p + from_q) / 2.0);
        }
        let pq = match (p, q) {
            (Some(p), Some(q)) => a.get(p, q),
            _ => 0.0,
        };
        a.set(i, i, 1.0 + pq / 2.0);
    }
    Ok(a)
}

/// Inbreeding coefficients without forming `A`.
///
/// Uses `A = T D Tᵀ`, where row `i` of the unit lower-triangular `T` holds
/// the gene-flow weights from each ancestor and `D = diag(1/b)`. Row `i` of
/// `T` is non-zero only on the ancestors of `i`, so each diagonal entry costs
/// time proportional to the ancestor count. Full siblings share a value.
pub fn inbreeding(ped: &Pedigree) -> InbreedingVector {
    let m = ped.len();
    let parents = ped.parents();
    let mut h = vec![0.0; m];
    // within-family variance 1/b_k, filled as we go
    let mut mendelian = vec![0.0; m];
    let mut weight = vec![0.0; m];
    let mut queued = vec![false; m];
    let mut heap = BinaryHeap::new();
    let mut by_family: HashMap<(usize, usize), f64> = HashMap::new();

    for i in 0..m {
        mendelian[i] = mendelian_variance(parents[i], &h);
        let Parents::Two(p, q) = parents[i] else {
            continue;
        };
        if let Some(&f) = by_family.get(&(p, q)) {
            h[i] = f;
            continue;
        }
        let mut diag = mendelian[i];
        for k in [p, q] {
            weight[k] += 0.5;
            if !queued[k] {
                queued[k] = true;
                heap.push(k);
            }
        }
        while let Some(k) = heap.pop() {
            let w = weight[k];
            diag += w * w * mendelian[k];
            weight[k] = 0.0;
            queued[k] = false;
            let par = parents[k];
            for a in [par.p(), par.q()].into_iter().flatten() {
                weight[a] += 0.5 * w;
                if !queued[a] {
                    queued[a] = true;
                    heap.push(a);
                }
            }
        }
        h[i] = diag - 1.0;
        by_family.insert((p, q), h[i]);
    }
    InbreedingVector(h)
}

/// `1/b_i`, the variance of member `i` not explained by its parents.
fn mendelian_variance(par: Parents, h: &[f64]) -> f64 {
    let term = |p: Option<usize>| match p {
        None => 2.0,
        Some(p) => 1.0 - h[p],
    };
    (term(par.p()) + term(par.q())) / 4.0
}

/// `b_i = 4 / [(1+δ(p))(1−h_p) + (1+δ(q))(1−h_q)]`, with `δ(unknown) = 1`
/// and `h` of an unknown parent taken as zero.
pub fn b_coefficients(ped: &Pedigree, h: &InbreedingVector) -> Result<BCoefficients> {
    check_dim(ped.len(), h.0.len())?;
    ped.parents()
        .iter()
        .enumerate()
        .map(|(i, &par)| {
            let denominator = 4.0 * mendelian_variance(par, &h.0);
            if denominator > 0.0 && denominator.is_finite() {
                Ok(4.0 / denominator)
            } else {
                Err(Error::InvalidInbreeding { index: i, denominator })
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(BCoefficients)
}

/// Sparse entries of `eᵢ − ½e_p − ½e_q` (or the shorter forms), merged and
/// sorted by column.
fn contrast(i: usize, par: Parents) -> Vec<(usize, f64)> {
    let mut v = vec![(i, 1.0)];
    for a in [par.p(), par.q()].into_iter().flatten() {
        match v.iter_mut().find(|e| e.0 == a) {
            Some(e) => e.1 -= 0.5,
            None => v.push((a, -0.5)),
        }
    }
    v.sort_by_key(|e| e.0);
    v
}

/// `A⁻¹ = Σᵢ bᵢ vᵢ vᵢᵀ` with `vᵢ` the member contrast. Contributions are
/// accumulated in ascending member order.
pub fn inverse_relationship(ped: &Pedigree, b: &BCoefficients) -> Result<SparseSymmetric> {
    let m = ped.len();
    check_dim(m, b.0.len())?;
    let mut triplets = Vec::with_capacity(9 * m);
    for (i, &par) in ped.parents().iter().enumerate() {
        let v = contrast(i, par);
        for &(r, vr) in &v {
            for &(c, vc) in &v {
                triplets.push((r, c, b.0[i] * vr * vc));
            }
        }
    }
    Ok(SparseSymmetric::from_csr(CsrMatrix::from_triplets(m, m, &triplets)))
}

/// Row `i` of `B` is `√bᵢ vᵢᵀ`, so that `BᵀB = A⁻¹`.
pub fn b_matrix(ped: &Pedigree, b: &BCoefficients) -> Result<SparseRowMatrix> {
    let m = ped.len();
    check_dim(m, b.0.len())?;
    let rows = ped
        .parents()
        .iter()
        .enumerate()
        .map(|(i, &par)| {
            let s = b.0[i].sqrt();
            contrast(i, par).into_iter().map(|(c, v)| (c, s * v)).collect()
        })
        .collect();
    Ok(CsrMatrix::from_rows(m, rows))
}

/// `A⁻¹ x` evaluated term by term from the pedigree. Members with both
/// parents known contribute exact zeros to `A⁻¹ e`.
pub fn inverse_mul(ped: &Pedigree, b: &BCoefficients, x: &[f64]) -> Result<Vec<f64>> {
    let m = ped.len();
    check_dim(m, b.0.len())?;
    check_dim(m, x.len())?;
    let mut y = vec![0.0; m];
    for (i, &par) in ped.parents().iter().enumerate() {
        let v = contrast(i, par);
        let t: f64 = v.iter().map(|&(c, vc)| vc * x[c]).sum();
        if t == 0.0 {
            continue;
        }
        for (c, vc) in v {
            y[c] += b.0[i] * vc * t;
        }
    }
    Ok(y)
}

/// Group coancestry `xᵀAx / 2`.
pub fn group_coancestry(a: &DenseSymmetric, x: &[f64]) -> Result<f64> {
    Ok(a.quad_form(x)? / 2.0)
}

/// The sparse kinship quantities for one pedigree.
#[derive(Debug, Clone)]
pub struct KinshipModel {
    pub inbreeding: InbreedingVector,
    pub b: BCoefficients,
    pub inverse: SparseSymmetric,
    pub factor: SparseRowMatrix,
}

impl KinshipModel {
    pub fn new(ped: &Pedigree) -> Result<Self> {
        let inbreeding = inbreeding(ped);
        let b = b_coefficients(ped, &inbreeding)?;
        let inverse = inverse_relationship(ped, &b)?;
        let factor = b_matrix(ped, &b)?;
        Ok(KinshipModel {
            inbreeding,
            b,
            inverse,
            factor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pedigree::parse_pedigree;

    pub(crate) fn figure1() -> Pedigree {
        parse_pedigree(
            "id,sire,dam,ebv\n1,0,0,1\n2,0,0,2\n3,1,2,3\n4,1,2,4\n5,2,0,5\n6,3,4,6\n7,1,5,7\n8,7,6,8\n9,5,7,9\n"
                .as_bytes(),
        )
        .unwrap()
    }

    fn founders(m: usize) -> Pedigree {
        Pedigree::new(
            (1..=m).map(|i| i.to_string()).collect(),
            vec![Parents::Unknown; m],
            vec![0.0; m],
        )
        .unwrap()
    }

    #[test]
    fn founders_have_identity_relationships() {
        let ped = founders(4);
        assert_eq!(relationship_matrix(&ped).unwrap(), DenseSymmetric::identity(4));
        let h = inbreeding(&ped);
        assert!(h.0.iter().all(|&v| v == 0.0));
        let b = b_coefficients(&ped, &h).unwrap();
        assert_eq!(b.0, vec![1.0; 4]);
        assert_eq!(inverse_relationship(&ped, &b).unwrap(), SparseSymmetric::identity(4));
        let bm = b_matrix(&ped, &b).unwrap();
        assert_eq!(bm, CsrMatrix::identity(4));
    }

    #[test]
    fn figure1_spot_values() {
        let ped = figure1();
        let a = relationship_matrix(&ped).unwrap();
        assert_eq!(a.get(2, 5), 24.0 / 32.0);
        assert_eq!(a.get(5, 5), 40.0 / 32.0);
        assert_eq!(a.get(7, 8), 17.0 / 32.0);

        let h = inbreeding(&ped);
        let expected = [0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.1875, 0.25];
        for (got, want) in h.0.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }

        let b = b_coefficients(&ped, &h).unwrap();
        assert!((b.0[0] - 1.0).abs() < 1e-15);
        assert!((b.0[2] - 2.0).abs() < 1e-15);
        assert!((b.0[4] - 4.0 / 3.0).abs() < 1e-15);
        assert!((b.0[7] - 16.0 / 7.0).abs() < 1e-15);

        let ainv = inverse_relationship(&ped, &b).unwrap();
        assert!((ainv.get(0, 0) - 2.5).abs() < 1e-12);
        assert!((ainv.get(5, 7) + 48.0 / 42.0).abs() < 1e-12);
        assert!((ainv.get(7, 7) - 16.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn figure1_b_row_eight() {
        let ped = figure1();
        let b = b_coefficients(&ped, &inbreeding(&ped)).unwrap();
        let bm = b_matrix(&ped, &b).unwrap();
        let (cols, vals) = bm.row(7);
        let s = (16.0f64 / 7.0).sqrt();
        assert_eq!(cols, &[5, 6, 7]);
        assert!((vals[0] + s / 2.0).abs() < 1e-15);
        assert!((vals[1] + s / 2.0).abs() < 1e-15);
        assert!((vals[2] - s).abs() < 1e-15);
    }

    #[test]
    fn selfing_is_a_single_merged_contrast() {
        let ped = Pedigree::new(
            vec!["a".into(), "b".into()],
            vec![Parents::Unknown, Parents::Two(0, 0)],
            vec![0.0, 0.0],
        )
        .unwrap();
        let a = relationship_matrix(&ped).unwrap();
        let h = inbreeding(&ped);
        assert!((h.0[1] - 0.5).abs() < 1e-15);
        assert_eq!(a.get(1, 1), 1.5);
        let b = b_coefficients(&ped, &h).unwrap();
        let ainv = inverse_relationship(&ped, &b).unwrap().to_dense();
        // A = [[1, 1], [1, 1.5]] so A⁻¹ = [[3, -2], [-2, 2]]
        let want = [[3.0, -2.0], [-2.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((ainv[i][j] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn group_coancestry_examples() {
        let eye = DenseSymmetric::identity(4);
        assert!((group_coancestry(&eye, &[0.25; 4]).unwrap() - 1.0 / 8.0).abs() < 1e-15);
        let a = relationship_matrix(&figure1()).unwrap();
        let mut x = vec![0.0; 9];
        x[0] = 1.0;
        assert_eq!(group_coancestry(&a, &x).unwrap(), 0.5);
        x[0] = 0.5;
        x[1] = 0.5;
        assert_eq!(group_coancestry(&a, &x).unwrap(), 0.25);
        assert!(group_coancestry(&a, &[1.0]).is_err());
    }

    #[test]
    fn corrupted_inbreeding_is_rejected() {
        let ped = figure1();
        let mut h = inbreeding(&ped);
        h.0[2] = 5.0;
        let err = b_coefficients(&ped, &h).unwrap_err();
        assert_eq!(err.kind(), "invalid_inbreeding");
    }

    #[test]
    fn inverse_mul_matches_sparse_product() {
        let ped = figure1();
        let km = KinshipModel::new(&ped).unwrap();
        let x: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let direct = km.inverse.mul_vec(&x).unwrap();
        let termwise = inverse_mul(&ped, &km.b, &x).unwrap();
        for (a, b) in direct.iter().zip(&termwise) {
            assert!((a - b).abs() < 1e-13);
        }
        let ones = inverse_mul(&ped, &km.b, &[1.0; 9]).unwrap();
        assert_eq!(ones.iter().filter(|v| **v != 0.0).count(), 3);
    }
}
