#![allow(dead_code)]

use ocs_core::kinship::relationship_matrix;
use ocs_core::pedigree::{parse_pedigree, Parents, Pedigree};
use ocs_core::verify::{generate_pedigree, GeneratorConfig};

pub const FIGURE1_CSV: &str =
    "id,sire,dam,ebv\n1,0,0,1\n2,0,0,2\n3,1,2,3\n4,1,2,4\n5,2,0,5\n6,3,4,6\n7,1,5,7\n8,7,6,8\n9,5,7,9\n";

/// The nine-member example, `A` scaled by 32.
pub const FIGURE1_A32: [[f64; 9]; 9] = [
    [32., 0., 16., 16., 0., 16., 16., 16., 8.],
    [0., 32., 16., 16., 16., 16., 8., 12., 12.],
    [16., 16., 32., 16., 8., 24., 12., 18., 10.],
    [16., 16., 16., 32., 8., 24., 12., 18., 10.],
    [0., 16., 8., 8., 32., 8., 16., 12., 24.],
    [16., 16., 24., 24., 8., 40., 12., 26., 10.],
    [16., 8., 12., 12., 16., 12., 32., 22., 24.],
    [16., 12., 18., 18., 12., 26., 22., 38., 17.],
    [8., 12., 10., 10., 24., 10., 24., 17., 40.],
];

/// The nine-member example, `A⁻¹` scaled by 42.
pub const FIGURE1_AINV42: [[f64; 9]; 9] = [
    [105., 42., -42., -42., 21., 0., -42., 0., 0.],
    [42., 98., -42., -42., -28., 0., 0., 0., 0.],
    [-42., -42., 105., 21., 0., -42., 0., 0., 0.],
    [-42., -42., 21., 105., 0., -42., 0., 0., 0.],
    [21., -28., 0., 0., 98., 0., -21., 0., -42.],
    [0., 0., -42., -42., 0., 108., 24., -48., 0.],
    [-42., 0., 0., 0., -21., 24., 129., -48., -42.],
    [0., 0., 0., 0., 0., -48., -48., 96., 0.],
    [0., 0., 0., 0., -42., 0., -42., 0., 84.],
];

pub fn figure1() -> Pedigree {
    parse_pedigree(FIGURE1_CSV.as_bytes()).unwrap()
}

/// Unrelated founders with the given breeding values.
pub fn founders(ebv: &[f64]) -> Pedigree {
    let m = ebv.len();
    Pedigree::new((1..=m).map(|i| i.to_string()).collect(), vec![Parents::Unknown; m], ebv.to_vec()).unwrap()
}

/// A small generated pedigree whose shape varies with `seed`.
pub fn varied_pedigree(seed: u64, max_m: usize) -> Pedigree {
    let n_founders = 3 + (seed as usize * 7) % 25;
    let n_cycles = 1 + (seed as usize) % 6;
    let room = max_m.saturating_sub(n_founders) / n_cycles;
    let offspring = (2 + (seed as usize * 13) % 60).min(room.max(1));
    generate_pedigree(&GeneratorConfig {
        seed,
        n_founders,
        n_cycles,
        offspring_per_cycle: offspring,
        selection_fraction: 0.2 + 0.1 * (seed % 7) as f64,
    })
    .unwrap()
}

/// `θ` at fraction `t` of the way from the uniform-contribution coancestry
/// to half the largest diagonal of `A`; every `t ≥ 0` is feasible for
/// bounds `0 ≤ x ≤ 1`.
pub fn theta_between(ped: &Pedigree, t: f64) -> f64 {
    let a = relationship_matrix(ped).unwrap();
    let m = ped.len();
    let uniform = a.quad_form(&vec![1.0 / m as f64; m]).unwrap() / 2.0;
    let top = (0..m).map(|i| a.get(i, i)).fold(0.0, f64::max) / 2.0;
    uniform + t * (top - uniform) + 1e-9
}

/// `xᵀAx / 2` through `A = L D Lᵀ`, where `L = (I − P)⁻¹` holds the
/// half-parent links and `D = diag(1 / b)`. Linear in `m` and free of any
/// `m × m` storage.
pub fn coancestry_ldl(ped: &Pedigree, b: &[f64], x: &[f64]) -> f64 {
    let mut w = x.to_vec();
    for i in (0..ped.len()).rev() {
        let half = 0.5 * w[i];
        if let Some(p) = ped.parents()[i].p() {
            w[p] += half;
        }
        if let Some(q) = ped.parents()[i].q() {
            w[q] += half;
        }
    }
    w.iter().zip(b).map(|(wi, bi)| wi * wi / bi).sum::<f64>() / 2.0
}

pub fn max_abs(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

/// Builds a canonical pedigree from per-member `(kind, a, b)` draws: kind 0
/// is a founder, 1 has one known parent, anything else two (possibly equal).
pub fn pedigree_from_draws(draws: &[(u8, u32, u32, i16)]) -> Pedigree {
    let parents = draws
        .iter()
        .enumerate()
        .map(|(i, &(kind, a, b, _))| match (i, kind % 3) {
            (0, _) | (_, 0) => Parents::Unknown,
            (_, 1) => Parents::One(a as usize % i),
            _ => {
                let (p, q) = (a as usize % i, b as usize % i);
                Parents::Two(p.max(q), p.min(q))
            }
        })
        .collect();
    let ebv = draws.iter().map(|d| d.3 as f64 / 100.0).collect();
    Pedigree::new((1..=draws.len()).map(|i| format!("m{i}")).collect(), parents, ebv).unwrap()
}
