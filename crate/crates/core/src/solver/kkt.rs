//! Normal equations `Fᵀ W⁻² F Δz = r` of the Newton system.
//!
//! On the cone block `W⁻² = (2ttᵀ − J)/β²` with `t = (Jv)∘(Jv)`, so the
//! cone contributes `(F_tᵀF_t + 2ppᵀ − hhᵀ)/β²`, where `F_t` are the cone
//! tail rows, `h` the cone head row and `p = F_qᵀt`. The tail Gram matrix is
//! formed once.
//!
//! Both backends factor the part `S` made of the sparse orthant rows and the
//! tail Gram matrix; the dense one as a full array, the sparse one on a
//! pattern fixed up front with a fill-reducing ordering analysed once. Dense
//! orthant rows (rows equal up to sign share one column), `p` and `h` enter
//! through a small capacitance system whose unknowns are the corresponding
//! multipliers. Solves are refined on the residuals of the augmented system
//! `[0 Fᵀ; F −W²]`.

use crate::error::Result;
use crate::factorization::sparse::{NumericCholesky, SymbolicCholesky};
use crate::factorization::{
    cholesky_solve_in_place, cholesky_upper_in_place_with, minimum_degree, Ordering, Permutation, PivotPolicy,
};
use crate::sparse::CsrMatrix;

use super::cone::{dot, ConeDims, Scaling};

/// How the normal equations are factored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalEquations {
    /// Dense below a size threshold or when the sparse pattern is dense.
    #[default]
    Auto,
    Dense,
    Sparse,
}

const TINY_PIVOT: f64 = 1e-18;

/// Largest `m` for which [`NormalEquations::Auto`] picks the dense backend.
pub const AUTO_DENSE_MAX: usize = 400;

pub(crate) struct NormalSystem<'a> {
    f: &'a CsrMatrix,
    ft: CsrMatrix,
    dims: ConeDims,
    m: usize,
    head: Vec<(usize, f64)>,
    backend: Backend,
    /// orthant rows kept out of `S`, grouped into rows equal up to sign
    dense_groups: Vec<Vec<(usize, f64)>>,
    is_dense_row: Vec<bool>,
    /// first row of each dense group, as a dense vector
    group_rows: Vec<Vec<f64>>,
    // per-factorization state
    t: Vec<f64>,
    p: Vec<f64>,
    beta_sq: f64,
    /// `S⁻¹V` and the LU of the capacitance matrix `VᵀS⁻¹V + diag(1/wₖ)`
    sv: Vec<Vec<f64>>,
    cap_lu: SmallLu,
    /// unknowns whose pivots were replaced in the last factorization
    replaced: Vec<usize>,
}

enum Column<'c> {
    Dense(&'c [f64]),
    Unit(usize),
}

impl Column<'_> {
    fn dot(&self, x: &[f64]) -> f64 {
        match self {
            Column::Dense(c) => dot(c, x),
            Column::Unit(j) => x[*j],
        }
    }

    fn to_dense(&self, m: usize) -> Vec<f64> {
        match self {
            Column::Dense(c) => c.to_vec(),
            Column::Unit(j) => {
                let mut e = vec![0.0; m];
                e[*j] = 1.0;
                e
            }
        }
    }
}

enum Backend {
    Dense {
        tail_gram: Vec<f64>,
        factor: Vec<f64>,
    },
    Sparse(Box<SparseBackend>),
}

struct SparseBackend {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    tail_gram: Vec<f64>,
    values: Vec<f64>,
    symbolic: SymbolicCholesky,
    numeric: Option<NumericCholesky>,
}

impl<'a> NormalSystem<'a> {
    pub fn new(
        f: &'a CsrMatrix,
        dims: ConeDims,
        mode: NormalEquations,
        dense_row_threshold: Option<usize>,
        ordering: Ordering,
    ) -> Self {
        let m = f.n_cols();
        let ft = f.transpose();
        let head = if dims.n_q > 0 {
            let (c, v) = f.row(dims.n_l);
            c.iter().copied().zip(v.iter().copied()).filter(|(_, v)| *v != 0.0).collect()
        } else {
            Vec::new()
        };
        let threshold = dense_row_threshold.unwrap_or_else(|| default_dense_row_threshold(m));
        let is_dense_row: Vec<bool> = (0..f.n_rows()).map(|i| i < dims.n_l && f.row_nnz(i) > threshold).collect();
        let dense_groups = group_parallel_rows(f, (0..dims.n_l).filter(|&i| is_dense_row[i]));
        let group_rows = dense_groups.iter().map(|g| sparse_row_dense(f, g[0].0)).collect();

        let tail_rows = |i: usize| i > dims.n_l;
        let dense = match mode {
            NormalEquations::Dense => true,
            NormalEquations::Sparse => false,
            NormalEquations::Auto => m <= AUTO_DENSE_MAX,
        };
        let backend = if dense {
            let mut tail_gram = vec![0.0; m * m];
            for j in 0..m {
                let (rows, fvals) = ft.row(j);
                for (&i, &fij) in rows.iter().zip(fvals) {
                    if tail_rows(i) {
                        let (cols, vals) = f.row(i);
                        for (&k, &fik) in cols.iter().zip(vals) {
                            tail_gram[j * m + k] += fij * fik;
                        }
                    }
                }
            }
            Backend::Dense {
                tail_gram,
                factor: vec![0.0; m * m],
            }
        } else {
            Backend::Sparse(Box::new(SparseBackend::new(f, &ft, dims.n_l, &is_dense_row, ordering)))
        };
        NormalSystem {
            f,
            ft,
            dims,
            m,
            head,
            backend,
            dense_groups,
            is_dense_row,
            group_rows,
            t: Vec::new(),
            p: Vec::new(),
            beta_sq: 1.0,
            sv: Vec::new(),
            cap_lu: SmallLu::default(),
            replaced: Vec::new(),
        }
    }

    /// Factors `S + δI`, where `S` collects the sparse orthant rows and the
    /// cone tail, and prepares the low-rank correction for dense orthant
    /// rows, `p` and `h`. A pivot that collapses below `TINY_PIVOT` times
    /// its original diagonal is reset to that diagonal; the factor is then
    /// exact for `S + Δⱼeⱼeⱼᵀ`, and `eⱼ` joins the low-rank columns with
    /// weight `−Δⱼ`.
    pub fn factor(&mut self, w: &Scaling, delta: f64) -> Result<()> {
        let m = self.m;
        let n_l = self.dims.n_l;
        let weights: Vec<f64> = w.orthant_inv_sq().collect();
        if self.dims.n_q > 0 {
            let u: Vec<f64> = std::iter::once(w.v[0]).chain(w.v[1..].iter().map(|x| -x)).collect();
            let mut v = Vec::with_capacity(u.len());
            v.push(dot(&u, &u));
            v.extend(u[1..].iter().map(|x| 2.0 * u[0] * x));
            self.beta_sq = w.beta * w.beta;
            let mut padded = vec![0.0; n_l];
            padded.extend_from_slice(&v);
            self.t = v;
            self.p = cone_transpose_mul(&self.ft, n_l, &padded);
        }
        let inv_beta_sq = 1.0 / self.beta_sq;
        let f = self.f;
        let ft = &self.ft;
        let is_dense_row = &self.is_dense_row;
        let replaced = match &mut self.backend {
            Backend::Dense { tail_gram, factor } => {
                for (a, b) in factor.iter_mut().zip(tail_gram.iter()) {
                    *a = b * inv_beta_sq;
                }
                for j in 0..m {
                    let (rows, fvals) = ft.row(j);
                    for (&i, &fij) in rows.iter().zip(fvals) {
                        if i < n_l && !is_dense_row[i] {
                            let coef = weights[i] * fij;
                            let (cols, vals) = f.row(i);
                            for (&k, &fik) in cols.iter().zip(vals) {
                                factor[j * m + k] += coef * fik;
                            }
                        }
                    }
                }
                for j in 0..m {
                    factor[j * m + j] += delta;
                }
                cholesky_upper_in_place_with(m, factor, PivotPolicy::Replace(TINY_PIVOT))?
            }
            Backend::Sparse(sb) => sb.factor(
                f,
                ft,
                |i| (i < n_l && !is_dense_row[i]).then(|| weights[i]),
                inv_beta_sq,
                delta,
            )?,
        };
        if replaced.len() > MAX_REPLACED {
            return Err(crate::error::Error::NotPositiveDefinite {
                index: replaced[0].0,
                pivot: 0.0,
            });
        }

        // low-rank columns: dense orthant groups, then p, then h, then the
        // unit vectors of replaced pivots
        let mut cols: Vec<Column> = self.group_rows.iter().map(|c| Column::Dense(c)).collect();
        let mut cap_inv: Vec<f64> = self
            .dense_groups
            .iter()
            .map(|g| 1.0 / g.iter().map(|&(i, _)| weights[i]).sum::<f64>())
            .collect();
        let head_dense;
        if self.dims.n_q > 0 {
            cols.push(Column::Dense(&self.p));
            cap_inv.push(self.beta_sq / 2.0);
            if !self.head.is_empty() {
                let mut h = vec![0.0; m];
                for &(j, v) in &self.head {
                    h[j] = v;
                }
                head_dense = h;
                cols.push(Column::Dense(&head_dense));
                cap_inv.push(-self.beta_sq);
            }
        }
        for &(j, inc) in &replaced {
            cols.push(Column::Unit(j));
            cap_inv.push(-1.0 / inc);
        }
        let sv: Vec<Vec<f64>> = cols.iter().map(|c| self.solve_s(&c.to_dense(m))).collect();
        let r = cols.len();
        let mut cap = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                cap[a * r + b] = cols[a].dot(&sv[b]);
            }
            cap[a * r + a] += cap_inv[a];
        }
        self.cap_lu = SmallLu::factor(r, cap).ok_or(crate::error::Error::NotPositiveDefinite {
            index: m,
            pivot: 0.0,
        })?;
        self.sv = sv;
        self.replaced = replaced.into_iter().map(|(j, _)| j).collect();
        Ok(())
    }

    /// `(S + δI)⁻¹ b`
    fn solve_s(&self, b: &[f64]) -> Vec<f64> {
        match &self.backend {
            Backend::Dense { factor, .. } => {
                let mut x = b.to_vec();
                cholesky_solve_in_place(self.m, factor, &mut x);
                x
            }
            Backend::Sparse(sb) => sb.solve(b),
        }
    }

    /// Solves the augmented system
    ///
    /// ```text
    /// Fᵀ Δλ         = b₁
    /// F Δz − W² Δλ  = b₂
    /// ```
    ///
    /// by GMRES preconditioned on the right with the factorization, on
    /// residuals scaled blockwise by `1/(1 + ‖bᵢ‖∞)`. This keeps `FᵀΔλ − b₁`
    /// small even when `W⁻²` has very large entries, and recovers directions
    /// lost to replaced pivots.
    pub fn solve_augmented(&self, w: &Scaling, b1: &[f64], b2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = b1.len();
        let s1 = 1.0 / (1.0 + inf_norm(b1));
        let s2 = 1.0 / (1.0 + inf_norm(b2));
        // scaled residual [s₁(b₁ − FᵀΔλ); s₂(b₂ − FΔz + W²Δλ)]
        let residual = |dz: &[f64], dl: &[f64]| {
            let mut r = self.apply_augmented(w, dz, dl);
            for (ri, bi) in r[..m].iter_mut().zip(b1) {
                *ri = s1 * (bi - *ri);
            }
            for (ri, bi) in r[m..].iter_mut().zip(b2) {
                *ri = s2 * (bi - *ri);
            }
            r
        };
        let precondition = |u: &[f64]| {
            let r1: Vec<f64> = u[..m].iter().map(|x| x / s1).collect();
            let r2: Vec<f64> = u[m..].iter().map(|x| x / s2).collect();
            let (mut z, l) = self.correction(w, &r1, &r2);
            z.extend(l);
            z
        };

        let (mut dz, mut dl) = self.correction(w, b1, b2);
        let mut r = residual(&dz, &dl);
        let mut size = inf_norm(&r);
        for _ in 0..MAX_RESTARTS {
            if size <= RESIDUAL_TOL {
                break;
            }
            let c = flexible_gmres(&r, MAX_KRYLOV, |v| {
                let z = precondition(v);
                let mut az = self.apply_augmented(w, &z[..m], &z[m..]);
                for x in &mut az[..m] {
                    *x *= s1;
                }
                for x in &mut az[m..] {
                    *x *= s2;
                }
                (z, az)
            });
            let tz: Vec<f64> = dz.iter().zip(&c[..m]).map(|(a, b)| a + b).collect();
            let tl: Vec<f64> = dl.iter().zip(&c[m..]).map(|(a, b)| a + b).collect();
            let next_r = residual(&tz, &tl);
            let next = inf_norm(&next_r);
            if !(next < size) {
                break;
            }
            let improved = next < 0.5 * size;
            (dz, dl, r, size) = (tz, tl, next_r, next);
            if !improved {
                break;
            }
        }
        (dz, dl)
    }

    /// `[FᵀΔλ; FΔz − W²Δλ]`
    fn apply_augmented(&self, w: &Scaling, dz: &[f64], dl: &[f64]) -> Vec<f64> {
        let mut out = self.ft.mul_vec(dl).expect("dimension checked at construction");
        let fz = self.f.mul_vec(dz).expect("dimension checked at construction");
        let wl = w.apply(&w.apply(dl));
        out.extend(fz.iter().zip(&wl).map(|(a, b)| a - b));
        out
    }

    /// One approximate solve of the augmented system by block elimination,
    /// with the low-rank multipliers `ζₖ = wₖ(vₖᵀΔz − aₖ)` as explicit
    /// unknowns so that no product of a huge weight with a solution
    /// component is formed.
    fn correction(&self, w: &Scaling, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n_l = self.dims.n_l;
        let n = self.dims.len();
        let weights: Vec<f64> = w.orthant_inv_sq().collect();
        let inv_beta_sq = 1.0 / self.beta_sq;

        // r₁ plus the part of Fᵀ W⁻² r₂ carried by S
        let mut y = vec![0.0; n];
        for i in 0..n_l {
            if !self.is_dense_row[i] {
                y[i] = weights[i] * r2[i];
            }
        }
        for i in n_l + 1..n {
            y[i] = r2[i] * inv_beta_sq;
        }
        let mut g = self.ft.mul_vec(&y).expect("dimension checked at construction");
        for (gi, ri) in g.iter_mut().zip(r1) {
            *gi += ri;
        }

        // aₖ, in capacitance order
        let mut a: Vec<f64> = self
            .dense_groups
            .iter()
            .map(|grp| {
                let sigma: f64 = grp.iter().map(|&(i, _)| weights[i]).sum();
                grp.iter().map(|&(i, sign)| sign * (weights[i] / sigma) * r2[i]).sum()
            })
            .collect();
        if self.dims.n_q > 0 {
            a.push(dot(&self.t, &r2[n_l..]));
            if !self.head.is_empty() {
                a.push(r2[n_l]);
            }
        }
        a.resize(a.len() + self.replaced.len(), 0.0);

        let sg = self.solve_s(&g);
        let mut dz = sg.clone();
        let mut zeta = Vec::new();
        if !self.sv.is_empty() {
            let mut rhs: Vec<f64> = self.group_rows.iter().map(|c| dot(c, &sg)).collect();
            if self.dims.n_q > 0 {
                rhs.push(dot(&self.p, &sg));
                if !self.head.is_empty() {
                    rhs.push(self.head.iter().map(|&(j, v)| v * sg[j]).sum());
                }
            }
            rhs.extend(self.replaced.iter().map(|&j| sg[j]));
            for (ri, ai) in rhs.iter_mut().zip(&a) {
                *ri -= ai;
            }
            zeta = self.cap_lu.solve(&rhs);
            for (col, zk) in self.sv.iter().zip(&zeta) {
                for (xi, ci) in dz.iter_mut().zip(col) {
                    *xi -= zk * ci;
                }
            }
        }

        // Δλ = W⁻²(FΔz − r₂), with the low-rank parts taken from ζ
        let fz = self.f.mul_vec(&dz).expect("dimension checked at construction");
        let mut dl = vec![0.0; n];
        for i in 0..n_l {
            if !self.is_dense_row[i] {
                dl[i] = weights[i] * (fz[i] - r2[i]);
            }
        }
        for (k, grp) in self.dense_groups.iter().enumerate() {
            let sigma: f64 = grp.iter().map(|&(i, _)| weights[i]).sum();
            for &(i, si) in grp {
                let di = weights[i];
                let mut v = di * si * zeta[k] / sigma;
                for &(j, sj) in grp {
                    if j != i {
                        v += (di * weights[j] / sigma) * (si * sj * r2[j] - r2[i]);
                    }
                }
                dl[i] = v;
            }
        }
        if self.dims.n_q > 0 {
            let k = self.dense_groups.len();
            for i in n_l + 1..n {
                dl[i] = (fz[i] - r2[i]) * inv_beta_sq;
            }
            dl[n_l] = if self.head.is_empty() {
                -(fz[n_l] - r2[n_l]) * inv_beta_sq
            } else {
                zeta[k + 1]
            };
            for (li, ti) in dl[n_l..].iter_mut().zip(&self.t) {
                *li += ti * zeta[k];
            }
        }
        (dz, dl)
    }
}

impl SparseBackend {
    fn new(f: &CsrMatrix, ft: &CsrMatrix, n_l: usize, is_dense_row: &[bool], ordering: Ordering) -> Self {
        let m = f.n_cols();
        let in_s = |i: usize| i != n_l && !is_dense_row.get(i).copied().unwrap_or(false);
        let (indptr, indices) = gram_pattern(f, ft, &in_s);
        let mut tail_gram = vec![0.0; indices.len()];
        let mut work = vec![0.0; m];
        gustavson(f, ft, &indptr, &indices, &mut work, &mut tail_gram, |i| (i > n_l).then_some(1.0));
        let perm = match ordering {
            Ordering::MinimumDegree => minimum_degree(m, &indptr, &indices),
            Ordering::Natural => Permutation::identity(m),
        };
        let symbolic = SymbolicCholesky::analyze(m, &indptr, &indices, perm);
        SparseBackend {
            values: vec![0.0; indices.len()],
            indptr,
            indices,
            tail_gram,
            symbolic,
            numeric: None,
        }
    }

    fn factor(
        &mut self,
        f: &CsrMatrix,
        ft: &CsrMatrix,
        orthant_weight: impl Fn(usize) -> Option<f64>,
        inv_beta_sq: f64,
        delta: f64,
    ) -> Result<Vec<(usize, f64)>> {
        for (a, b) in self.values.iter_mut().zip(&self.tail_gram) {
            *a = b * inv_beta_sq;
        }
        let mut work = vec![0.0; f.n_cols()];
        gustavson(f, ft, &self.indptr, &self.indices, &mut work, &mut self.values, orthant_weight);
        self.numeric = None;
        let (numeric, replaced) = self.symbolic.factor_with(&self.values, delta, PivotPolicy::Replace(TINY_PIVOT))?;
        self.numeric = Some(numeric);
        Ok(replaced)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let numeric = self.numeric.as_ref().expect("factor before solve");
        numeric.solve(self.symbolic.perm(), b)
    }
}

const MAX_RESTARTS: usize = 4;
const MAX_REPLACED: usize = 256;
const MAX_KRYLOV: usize = 60;
const RESIDUAL_TOL: f64 = 1e-15;

/// Flexible GMRES from zero for `A M⁻¹ u = r`, returning `M⁻¹ u`. `op(v)`
/// returns `(M⁻¹v, A M⁻¹v)`; the preconditioned vectors are kept so the
/// returned combination matches the Arnoldi relation even when `M⁻¹` is
/// applied inexactly. Stops after `max_iter` steps or once the residual
/// estimate has dropped by twelve orders of magnitude.
fn flexible_gmres(r: &[f64], max_iter: usize, mut op: impl FnMut(&[f64]) -> (Vec<f64>, Vec<f64>)) -> Vec<f64> {
    let beta = dot(r, r).sqrt();
    if !(beta > 0.0) || !beta.is_finite() {
        return vec![0.0; r.len()];
    }
    let mut basis = vec![r.iter().map(|x| x / beta).collect::<Vec<f64>>()];
    let mut preconditioned: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut rotations: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    for k in 0..max_iter {
        let (z, mut v) = op(&basis[k]);
        let mut col = Vec::with_capacity(k + 2);
        for b in &basis {
            let c = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
            col.push(c);
        }
        let norm = dot(&v, &v).sqrt();
        col.push(norm);
        for (j, &(c, s)) in rotations.iter().enumerate() {
            let (a, b) = (col[j], col[j + 1]);
            col[j] = c * a + s * b;
            col[j + 1] = -s * a + c * b;
        }
        let (a, b) = (col[k], col[k + 1]);
        let rho = a.hypot(b);
        if !(rho > 0.0) || !rho.is_finite() {
            break;
        }
        let (c, s) = (a / rho, b / rho);
        col[k] = rho;
        col[k + 1] = 0.0;
        rotations.push((c, s));
        g.push(-s * g[k]);
        g[k] *= c;
        col.truncate(k + 1);
        h.push(col);
        preconditioned.push(z);
        if g[k + 1].abs() <= 1e-12 * beta || !(norm > 0.0) {
            break;
        }
        basis.push(v.iter().map(|x| x / norm).collect());
    }
    let n = h.len();
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = g[i];
        for j in i + 1..n {
            acc -= h[j][i] * y[j];
        }
        y[i] = acc / h[i][i];
    }
    let mut u = vec![0.0; r.len()];
    for (z, yi) in preconditioned.iter().zip(&y) {
        for (ui, zi) in u.iter_mut().zip(z) {
            *ui += yi * zi;
        }
    }
    u
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn default_dense_row_threshold(m: usize) -> usize {
    ((10.0 * (m as f64).sqrt()) as usize).max(64)
}

/// Groups rows whose entries agree up to a common sign, so that `vvᵀ`
/// terms of a split equality share one low-rank column. Each member carries
/// its sign relative to the first row of the group.
fn group_parallel_rows(f: &CsrMatrix, rows: impl Iterator<Item = usize>) -> Vec<Vec<(usize, f64)>> {
    let mut groups: Vec<Vec<(usize, f64)>> = Vec::new();
    'rows: for i in rows {
        let (ci, vi) = f.row(i);
        for g in groups.iter_mut() {
            let (cg, vg) = f.row(g[0].0);
            if ci != cg {
                continue;
            }
            if vi == vg {
                g.push((i, 1.0));
                continue 'rows;
            }
            if vi.iter().zip(vg).all(|(a, b)| *a == -*b) {
                g.push((i, -1.0));
                continue 'rows;
            }
        }
        groups.push(vec![(i, 1.0)]);
    }
    groups
}

fn sparse_row_dense(f: &CsrMatrix, i: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.n_cols()];
    let (cols, vals) = f.row(i);
    for (&j, &v) in cols.iter().zip(vals) {
        out[j] = v;
    }
    out
}

/// `F_qᵀ v` for a vector supported on the cone rows.
fn cone_transpose_mul(ft: &CsrMatrix, n_l: usize, v: &[f64]) -> Vec<f64> {
    (0..ft.n_rows())
        .map(|j| {
            let (rows, vals) = ft.row(j);
            rows.iter().zip(vals).filter(|(&i, _)| i >= n_l).map(|(&i, &fij)| fij * v[i]).sum()
        })
        .collect()
}

/// Full symmetric pattern (with diagonal) of `Σ fᵢfᵢᵀ` over rows with
/// `include(i)`.
fn gram_pattern(f: &CsrMatrix, ft: &CsrMatrix, include: &dyn Fn(usize) -> bool) -> (Vec<usize>, Vec<usize>) {
    let m = f.n_cols();
    let mut mark = vec![usize::MAX; m];
    let mut indptr = Vec::with_capacity(m + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    let mut col = Vec::new();
    for j in 0..m {
        col.clear();
        mark[j] = j;
        col.push(j);
        let (rows, _) = ft.row(j);
        for &i in rows {
            if include(i) {
                for &k in f.row(i).0 {
                    if mark[k] != j {
                        mark[k] = j;
                        col.push(k);
                    }
                }
            }
        }
        col.sort_unstable();
        indices.extend_from_slice(&col);
        indptr.push(indices.len());
    }
    (indptr, indices)
}

/// Adds `Σ wᵢ fᵢfᵢᵀ` over rows with `weight(i) = Some(wᵢ)` into `out`,
/// which is aligned with the pattern `(indptr, indices)`.
fn gustavson(
    f: &CsrMatrix,
    ft: &CsrMatrix,
    indptr: &[usize],
    indices: &[usize],
    work: &mut [f64],
    out: &mut [f64],
    weight: impl Fn(usize) -> Option<f64>,
) {
    for j in 0..f.n_cols() {
        let (rows, fvals) = ft.row(j);
        for (&i, &fij) in rows.iter().zip(fvals) {
            if let Some(wi) = weight(i) {
                let coef = wi * fij;
                let (cols, vals) = f.row(i);
                for (&k, &fik) in cols.iter().zip(vals) {
                    work[k] += coef * fik;
                }
            }
        }
        for p in indptr[j]..indptr[j + 1] {
            let k = indices[p];
            out[p] += work[k];
            work[k] = 0.0;
        }
    }
}

/// LU with partial pivoting for the small capacitance matrix.
#[derive(Debug, Clone, Default)]
struct SmallLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl SmallLu {
    fn factor(n: usize, mut a: Vec<f64>) -> Option<SmallLu> {
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (best, val) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(val > 0.0) || !val.is_finite() {
                return None;
            }
            if best != k {
                for j in 0..n {
                    a.swap(k * n + j, best * n + j);
                }
                piv.swap(k, best);
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / d;
                a[i * n + k] = l;
                for j in k + 1..n {
                    a[i * n + j] -= l * a[k * n + j];
                }
            }
        }
        Some(SmallLu { n, lu: a, piv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}
