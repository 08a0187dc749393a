//! Algebra on the product cone `ℝ₊ⁿˡ × 𝒦ⁿq` and its Nesterov–Todd scaling.

/// Dimensions of the product cone; the cone block follows the orthant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeDims {
    pub n_l: usize,
    pub n_q: usize,
}

impl ConeDims {
    pub fn len(&self) -> usize {
        self.n_l + self.n_q
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Barrier degree: one per orthant coordinate plus one for the cone.
    pub fn degree(&self) -> usize {
        self.n_l + usize::from(self.n_q > 0)
    }

    /// The central ray `e`.
    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.len()];
        e[..self.n_l].fill(1.0);
        if self.n_q > 0 {
            e[self.n_l] = 1.0;
        }
        e
    }

    /// Jordan product `x ∘ y`.
    pub fn product(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n_l = self.n_l;
        let mut out: Vec<f64> = x[..n_l].iter().zip(&y[..n_l]).map(|(a, b)| a * b).collect();
        if self.n_q > 0 {
            let (xq, yq) = (&x[n_l..], &y[n_l..]);
            out.push(dot(xq, yq));
            out.extend(xq[1..].iter().zip(&yq[1..]).map(|(a, b)| xq[0] * b + yq[0] * a));
        }
        out
    }

    /// `u` with `l ∘ u = r`, for `l` in the interior.
    pub fn divide(&self, l: &[f64], r: &[f64]) -> Vec<f64> {
        let n_l = self.n_l;
        let mut out: Vec<f64> = r[..n_l].iter().zip(&l[..n_l]).map(|(a, b)| a / b).collect();
        if self.n_q > 0 {
            let (lq, rq) = (&l[n_l..], &r[n_l..]);
            let det = soc_det(lq);
            let u0 = (lq[0] * rq[0] - dot(&lq[1..], &rq[1..])) / det;
            out.push(u0);
            out.extend(lq[1..].iter().zip(&rq[1..]).map(|(li, ri)| (ri - u0 * li) / lq[0]));
        }
        out
    }

    /// Largest `α ≥ 0` keeping `x + α d` in the cone (`∞` if unbounded);
    /// `x` must be interior.
    pub fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for (xi, di) in x[..self.n_l].iter().zip(&d[..self.n_l]) {
            if *di < 0.0 {
                alpha = alpha.min(-xi / di);
            }
        }
        if self.n_q > 0 {
            alpha = alpha.min(soc_max_step(&x[self.n_l..], &d[self.n_l..]));
        }
        alpha
    }

    /// Distance outside the cone: the largest orthant deficit or `‖x₁‖ − x₀`,
    /// with the index of the worst coordinate (the cone head for the cone).
    pub fn violation(&self, x: &[f64]) -> (f64, Option<usize>) {
        let mut worst = (0.0, None);
        for (i, &v) in x[..self.n_l].iter().enumerate() {
            if -v > worst.0 {
                worst = (-v, Some(i));
            }
        }
        if self.n_q > 0 {
            let q = &x[self.n_l..];
            let v = norm(&q[1..]) - q[0];
            if v > worst.0 {
                worst = (v, Some(self.n_l));
            }
        }
        worst
    }

    /// Coordinates outside the cone, the cone block reported by its head.
    pub fn violated_rows(&self, x: &[f64]) -> Vec<usize> {
        let mut rows: Vec<usize> = (0..self.n_l).filter(|&i| x[i] < 0.0).collect();
        if self.n_q > 0 {
            let q = &x[self.n_l..];
            if norm(&q[1..]) > q[0] {
                rows.push(self.n_l);
            }
        }
        rows
    }

    pub fn is_interior(&self, x: &[f64]) -> bool {
        x[..self.n_l].iter().all(|&v| v > 0.0) && (self.n_q == 0 || soc_det(&x[self.n_l..]) > 0.0 && x[self.n_l] > 0.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x₀² − ‖x₁‖²`, factored to limit cancellation.
fn soc_det(x: &[f64]) -> f64 {
    let t = norm(&x[1..]);
    (x[0] - t) * (x[0] + t)
}

/// Smallest positive root of `det(x + αd) = 0`.
fn soc_max_step(x: &[f64], d: &[f64]) -> f64 {
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = x[0] * d[0] - dot(&x[1..], &d[1..]);
    let c = soc_det(x);
    let positive = |r: f64| if r > 0.0 { r } else { f64::INFINITY };
    if a == 0.0 {
        return if b < 0.0 { -c / (2.0 * b) } else { f64::INFINITY };
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        // a > 0: the determinant never vanishes and the head stays positive
        return f64::INFINITY;
    }
    let q = -(b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return f64::INFINITY;
    }
    positive(q / a).min(positive(c / q))
}

/// Nesterov–Todd scaling `W` with `W λ = W⁻¹ s`.
///
/// On the orthant `W = diag(√(s/λ))`. On the cone `W = β(2 v vᵀ − J)` with
/// `J = diag(1, −1, …, −1)`, where `v` is the Jordan square root of the
/// scaling point `w̄` and `vᵀ J v = 1`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub dims: ConeDims,
    pub orthant: Vec<f64>,
    pub beta: f64,
    pub v: Vec<f64>,
}

impl Scaling {
    pub fn new(dims: ConeDims, s: &[f64], lam: &[f64]) -> Scaling {
        let n_l = dims.n_l;
        let orthant = s[..n_l].iter().zip(&lam[..n_l]).map(|(a, b)| (a / b).sqrt()).collect();
        let (beta, v) = if dims.n_q > 0 {
            let (sq, lq) = (&s[n_l..], &lam[n_l..]);
            let s_norm = soc_det(sq).sqrt();
            let l_norm = soc_det(lq).sqrt();
            let sbar: Vec<f64> = sq.iter().map(|v| v / s_norm).collect();
            let lbar: Vec<f64> = lq.iter().map(|v| v / l_norm).collect();
            let gamma = ((1.0 + dot(&sbar, &lbar)) / 2.0).sqrt();
            let mut wbar = Vec::with_capacity(dims.n_q);
            wbar.push((sbar[0] + lbar[0]) / (2.0 * gamma));
            wbar.extend(sbar[1..].iter().zip(&lbar[1..]).map(|(a, b)| (a - b) / (2.0 * gamma)));
            let k = (2.0 * (wbar[0] + 1.0)).sqrt();
            let mut v: Vec<f64> = wbar.iter().map(|x| x / k).collect();
            v[0] += 1.0 / k;
            ((s_norm / l_norm).sqrt(), v)
        } else {
            (1.0, Vec::new())
        };
        Scaling {
            dims,
            orthant,
            beta,
            v,
        }
    }

    /// `W x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_with(x, false)
    }

    /// `W⁻¹ x`
    pub fn apply_inv(&self, x: &[f64]) -> Vec<f64> {
        self.apply_with(x, true)
    }

    fn apply_with(&self, x: &[f64], inverse: bool) -> Vec<f64> {
        let n_l = self.dims.n_l;
        let mut out: Vec<f64> = if inverse {
            x[..n_l].iter().zip(&self.orthant).map(|(a, w)| a / w).collect()
        } else {
            x[..n_l].iter().zip(&self.orthant).map(|(a, w)| a * w).collect()
        };
        if self.dims.n_q > 0 {
            let xq = &x[n_l..];
            let w = &self.v;
            if inverse {
                // (1/β)(2 J v (vᵀ J x) − J x)
                let t = w[0] * xq[0] - dot(&w[1..], &xq[1..]);
                out.push((2.0 * w[0] * t - xq[0]) / self.beta);
                out.extend(w[1..].iter().zip(&xq[1..]).map(|(wi, xi)| (-2.0 * wi * t + xi) / self.beta));
            } else {
                // β(2 v (vᵀ x) − J x)
                let t = dot(w, xq);
                out.push(self.beta * (2.0 * w[0] * t - xq[0]));
                out.extend(w[1..].iter().zip(&xq[1..]).map(|(wi, xi)| self.beta * (2.0 * wi * t + xi)));
            }
        }
        out
    }

    /// Orthant weights of `W⁻²`, i.e. `λᵢ/sᵢ`.
    pub fn orthant_inv_sq(&self) -> impl Iterator<Item = f64> + '_ {
        self.orthant.iter().map(|w| 1.0 / (w * w))
    }
}
