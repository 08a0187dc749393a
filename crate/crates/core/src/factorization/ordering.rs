//! Symmetric permutations and the fill-reducing ordering.

/// A bijection on `0..n`. `perm[new] = old`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            perm: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    /// Returns `None` unless `perm` is a bijection on `0..perm.len()`.
    pub fn from_vec(perm: Vec<usize>) -> Option<Self> {
        let n = perm.len();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return None;
            }
            inverse[old] = new;
        }
        Some(Permutation { perm, inverse })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// New position to original index.
    pub fn new_to_old(&self) -> &[usize] {
        &self.perm
    }

    /// Original index to new position.
    pub fn old_to_new(&self) -> &[usize] {
        &self.inverse
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// `(Px)[new] = x[perm[new]]`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&old| x[old]).collect()
    }

    /// Inverse of [`Permutation::apply`].
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        self.inverse.iter().map(|&new| x[new]).collect()
    }
}

/// Which ordering to use ahead of a sparse factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    #[default]
    MinimumDegree,
    Natural,
}

/// Approximate-minimum-degree order of a symmetric pattern given in
/// compressed rows; either triangle or both may be supplied.
pub(crate) fn minimum_degree(n: usize, indptr: &[usize], indices: &[usize]) -> Permutation {
    if n == 0 {
        return Permutation::identity(0);
    }
    let mut ap = Vec::with_capacity(n + 1);
    let mut ai = Vec::with_capacity(indices.len() + n);
    ap.push(0isize);
    for i in 0..n {
        let start = ai.len();
        ai.extend(
            indices[indptr[i]..indptr[i + 1]]
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| j as isize),
        );
        ai.push(i as isize);
        ai[start..].sort_unstable();
        ap.push(ai.len() as isize);
    }
    let (perm, _, _) = amd::order(n as isize, &ap, &ai, &amd::Control::default())
        .expect("compressed pattern is well formed");
    Permutation::from_vec(perm.into_iter().map(|v| v as usize).collect())
        .expect("amd returns a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr(n: usize, edges: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
        let mut rows = vec![Vec::new(); n];
        for &(i, j) in edges {
            rows[i].push(j);
            rows[j].push(i);
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            indices.extend(r);
            indptr.push(indices.len());
        }
        (indptr, indices)
    }

    #[test]
    fn permutation_round_trip() {
        let p = Permutation::from_vec(vec![2, 0, 1]).unwrap();
        let x = [10.0, 20.0, 30.0];
        assert_eq!(p.apply(&x), vec![30.0, 10.0, 20.0]);
        assert_eq!(p.apply_inverse(&p.apply(&x)), x.to_vec());
        assert!(Permutation::from_vec(vec![0, 0]).is_none());
        assert!(Permutation::from_vec(vec![0, 2]).is_none());
    }

    #[test]
    fn arrow_hub_goes_last() {
        let edges: Vec<_> = (1..6).map(|i| (0, i)).collect();
        let (ip, ix) = csr(6, &edges);
        let p = minimum_degree(6, &ip, &ix);
        assert_eq!(*p.new_to_old().last().unwrap(), 0);
    }

    #[test]
    fn no_edges_keeps_natural_order() {
        let (ip, ix) = csr(4, &[]);
        let p = minimum_degree(4, &ip, &ix);
        assert!(p.is_identity());
    }
}
