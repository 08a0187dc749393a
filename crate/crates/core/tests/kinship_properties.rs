mod common;

use common::{pedigree_from_draws, varied_pedigree};
use nalgebra::DMatrix;
use ocs_core::factorization::dense_cholesky;
use ocs_core::kinship::{relationship_matrix, KinshipModel};
use ocs_core::pedigree::Pedigree;
use proptest::prelude::*;

fn dense(rows: Vec<Vec<f64>>) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_row_slice(n, n, &rows.concat())
}

fn relationship(ped: &Pedigree) -> DMatrix<f64> {
    let a = relationship_matrix(ped).unwrap();
    DMatrix::from_fn(ped.len(), ped.len(), |i, j| a.get(i, j))
}

fn any_pedigree() -> impl Strategy<Value = Pedigree> {
    prop_oneof![
        prop::collection::vec(any::<(u8, u32, u32, i16)>(), 1..50).prop_map(|d| pedigree_from_draws(&d)),
        (0u64..10_000).prop_map(|s| varied_pedigree(s, 500)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_times_a_is_identity(ped in any_pedigree()) {
        let kin = KinshipModel::new(&ped).unwrap();
        let prod = dense(kin.inverse.to_dense()) * relationship(&ped);
        let err = (prod - DMatrix::identity(ped.len(), ped.len())).amax();
        prop_assert!(err <= 1e-10, "{err:e}");
    }

    #[test]
    fn b_gram_is_inverse(ped in any_pedigree()) {
        let kin = KinshipModel::new(&ped).unwrap();
        let b = DMatrix::from_row_slice(ped.len(), ped.len(), &kin.factor.to_dense().concat());
        let err = (b.transpose() * &b - dense(kin.inverse.to_dense())).amax();
        prop_assert!(err <= 1e-12, "{err:e}");
    }

    #[test]
    fn quadratic_forms_agree(ped in any_pedigree(), seed in any::<u64>()) {
        let m = ped.len();
        let kin = KinshipModel::new(&ped).unwrap();
        let a = relationship_matrix(&ped).unwrap();
        let x: Vec<f64> = (0..m).map(|i| ((seed as f64 * 1e-9 + i as f64) * 1.37).sin()).collect();
        let y = a.mul_vec(&x).unwrap();
        let xax = a.quad_form(&x).unwrap();
        let ainv_y = kin.inverse.mul_vec(&y).unwrap();
        let yay: f64 = y.iter().zip(&ainv_y).map(|(u, v)| u * v).sum();
        prop_assert!((xax - yay).abs() <= 1e-9 * xax.abs().max(1.0), "{xax} vs {yay}");
    }

    #[test]
    fn sparsity_bounds(ped in any_pedigree()) {
        let kin = KinshipModel::new(&ped).unwrap();
        let m = ped.len();
        prop_assert!(kin.inverse.nnz() <= 9 * m);
        prop_assert!(kin.factor.nnz() <= 3 * m);
    }

    #[test]
    fn coefficients_positive_and_a_definite(ped in any_pedigree()) {
        let kin = KinshipModel::new(&ped).unwrap();
        prop_assert!(kin.b.0.iter().all(|&b| b > 0.0));
        prop_assert!(kin.inbreeding.0.iter().all(|&h| (0.0..1.0).contains(&h)));
        prop_assert!(dense_cholesky(&relationship_matrix(&ped).unwrap()).is_ok());
    }

    #[test]
    fn inbreeding_is_diagonal_excess(ped in any_pedigree()) {
        let kin = KinshipModel::new(&ped).unwrap();
        let a = relationship_matrix(&ped).unwrap();
        for (i, h) in kin.inbreeding.0.iter().enumerate() {
            prop_assert!((h - (a.get(i, i) - 1.0)).abs() <= 1e-12);
        }
    }
}
