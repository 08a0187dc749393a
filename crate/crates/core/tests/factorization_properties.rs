mod common;

use common::{pedigree_from_draws, varied_pedigree};
use ocs_core::factorization::{dense_cholesky, fill_reducing_permutation, ordering_for, sparse_cholesky, Ordering, Permutation};
use ocs_core::kinship::{relationship_matrix, KinshipModel};
use ocs_core::pedigree::Pedigree;
use proptest::prelude::*;

fn any_pedigree() -> impl Strategy<Value = Pedigree> {
    prop_oneof![
        prop::collection::vec(any::<(u8, u32, u32, i16)>(), 1..50).prop_map(|d| pedigree_from_draws(&d)),
        (0u64..10_000).prop_map(|s| varied_pedigree(s, 300)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_factor_recomposes_and_is_upper(ped in any_pedigree()) {
        let a = relationship_matrix(&ped).unwrap();
        let u = dense_cholesky(&a).unwrap();
        let m = ped.len();
        let g = u.gram();
        for i in 0..m {
            for j in 0..m {
                prop_assert!((g.get(i, j) - a.get(i, j)).abs() <= 1e-12);
                if j < i {
                    prop_assert_eq!(u.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn sparse_factor_recomposes_and_is_upper(ped in any_pedigree(), natural in any::<bool>()) {
        let kin = KinshipModel::new(&ped).unwrap();
        let ordering = if natural { Ordering::Natural } else { Ordering::MinimumDegree };
        let perm = ordering_for(&kin.inverse, ordering);
        let f = sparse_cholesky(&kin.inverse, &perm).unwrap();
        prop_assert!(f.g().iter().all(|(i, j, _)| j >= i));
        let gp = f.unpermuted().to_dense();
        let s = kin.inverse.to_dense();
        let m = ped.len();
        for i in 0..m {
            for j in 0..m {
                let gtg: f64 = (0..m).map(|k| gp[k][i] * gp[k][j]).sum();
                prop_assert!((gtg - s[i][j]).abs() <= 1e-10 * (1.0 + s[i][j].abs()));
            }
        }
    }

    #[test]
    fn permutations_invert(ped in any_pedigree()) {
        let kin = KinshipModel::new(&ped).unwrap();
        let p = fill_reducing_permutation(&kin.inverse);
        let m = ped.len();
        for k in 0..m {
            prop_assert_eq!(p.old_to_new()[p.new_to_old()[k]], k);
        }
        let x: Vec<f64> = (0..m).map(|i| i as f64).collect();
        prop_assert_eq!(p.apply_inverse(&p.apply(&x)), x);
        prop_assert!(Permutation::from_vec(p.new_to_old().to_vec()).is_some());
    }
}
