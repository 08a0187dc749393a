//! Primal-dual interior-point solver for
//!
//! ```text
//! maximize cᵀz  subject to  s = f₀ − F z ∈ ℝ₊ⁿˡ × 𝒦ⁿq
//! ```
//!
//! with dual `minimize f₀ᵀλ subject to Fᵀλ = c, λ ∈ ℝ₊ⁿˡ × 𝒦ⁿq`.
//!
//! Infeasible-start path following with Nesterov–Todd scaling and Mehrotra
//! predictor-corrector steps. Each Newton step solves the normal equations
//! `Fᵀ W⁻² F Δz = r` (see [`NormalEquations`]). Infeasibility is detected
//! heuristically from diverging iterates: a primal infeasibility
//! certificate is a `λ ∈ K` with `Fᵀλ ≈ 0` and `f₀ᵀλ = −1`, a dual one a
//! `z` with `−Fz ∈ K` approximately and `cᵀz = 1`.

mod cone;
mod kkt;

use std::fmt;

use serde::Serialize;

pub use cone::ConeDims;
pub use kkt::{NormalEquations, AUTO_DENSE_MAX};

use crate::error::{check_dim, Error, Result};
use crate::factorization::Ordering;
use crate::formulation::ConicProblem;
use cone::{dot, Scaling};
use kkt::NormalSystem;

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Print one log line per iteration to standard error.
    pub verbose: bool,
    pub normal_equations: NormalEquations,
    /// Orthant rows with more non-zeros than this bypass the sparse
    /// factorization; `None` picks `max(64, 10√m)`.
    pub dense_row_threshold: Option<usize>,
    pub ordering: Ordering,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iter: 200,
            step_fraction: 0.98,
            verbose: false,
            normal_equations: NormalEquations::Auto,
            dense_row_threshold: None,
            ordering: Ordering::MinimumDegree,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.tol_gap > 0.0 && self.tol_gap.is_finite()) {
            return bad("tol_gap must be positive");
        }
        if !(self.tol_feas > 0.0 && self.tol_feas.is_finite()) {
            return bad("tol_feas must be positive");
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return bad("step_fraction must lie in (0, 1)");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterLimit,
    NumericalFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "Optimal",
            Status::PrimalInfeasible => "PrimalInfeasible",
            Status::DualInfeasible => "DualInfeasible",
            Status::IterLimit => "IterLimit",
            Status::NumericalFailure => "NumericalFailure",
        }
    }

    pub fn is_infeasible(self) -> bool {
        matches!(self, Status::PrimalInfeasible | Status::DualInfeasible)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One iteration of the log. `step` is the step length taken after the
/// residuals were measured (0 on the final line).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub pcost: f64,
    pub dcost: f64,
    /// `sᵀλ`
    pub gap: f64,
    pub pres: f64,
    pub dres: f64,
    pub step: f64,
}

impl IterationRecord {
    pub const HEADER: &'static str = "iter gap pres dres step";
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>4} {:.3e} {:.3e} {:.3e} {:.3e}",
            self.iter, self.gap, self.pres, self.dres, self.step
        )
    }
}

/// Result of [`solve`].
///
/// For `Optimal`, `slack = f₀ − Fz`, `dual` is `λ` and `gap` is
/// `f₀ᵀλ − cᵀz`. For `PrimalInfeasible`, `dual` holds the certificate ray
/// scaled to `f₀ᵀλ = −1`; for `DualInfeasible`, `z` holds the ray scaled to
/// `cᵀz = 1`. Otherwise the vectors are the last iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub z: Vec<f64>,
    pub slack: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

/// Max-norm quality measures of a candidate solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Distance of `f₀ − Fz` outside the cone.
    pub primal_violation: f64,
    /// Rows of `f₀ − Fz` outside the cone, ascending; the cone block is
    /// reported by its head row.
    pub violated_rows: Vec<usize>,
    /// Distance of `λ` outside the cone.
    pub dual_violation: f64,
    /// `‖Fᵀλ − c‖∞`
    pub dual_residual: f64,
    /// `|(f₀ − Fz)ᵀλ|`
    pub complementarity: f64,
    /// `|f₀ᵀλ − cᵀz|`
    pub objective_gap: f64,
}

/// Residuals of `(sol.z, sol.dual)` for `prob`.
pub fn residuals(prob: &ConicProblem, sol: &Solution) -> Result<ResidualReport> {
    residuals_of(prob, &sol.z, &sol.dual)
}

/// Residuals of an arbitrary pair `(z, λ)`.
pub fn residuals_of(prob: &ConicProblem, z: &[f64], lam: &[f64]) -> Result<ResidualReport> {
    check_dim(prob.n_vars(), z.len())?;
    check_dim(prob.n_l() + prob.n_q(), lam.len())?;
    let dims = prob.dims();
    let slack = prob.slack(z)?;
    let (primal_violation, _) = dims.violation(&slack);
    let violated_rows = dims.violated_rows(&slack);
    let (dual_violation, _) = dims.violation(lam);
    let ftl = prob.f().mul_t_vec(lam)?;
    let dual_residual = ftl.iter().zip(prob.c()).fold(0.0f64, |a, (x, c)| a.max((x - c).abs()));
    let pcost = dot(prob.c(), z);
    let dcost = dot(prob.f0(), lam);
    Ok(ResidualReport {
        primal_violation,
        violated_rows,
        dual_violation,
        dual_residual,
        complementarity: dot(&slack, lam).abs(),
        objective_gap: (dcost - pcost).abs(),
    })
}

const REG_START: f64 = 1e-10;
const REG_MAX: f64 = 1e-6;
const MIN_STEP: f64 = 1e-10;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Solves `prob`. Deterministic for a given problem and configuration.
pub fn solve(prob: &ConicProblem, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let dims = prob.dims();
    let n = dims.len();
    let m = prob.n_vars();
    let f = prob.f();
    let c = prob.c();
    let f0 = prob.f0();
    let nu = dims.degree() as f64;
    let c_scale = 1.0 + inf_norm(c);

    let init = inf_norm(f0).max(1.0);
    let e = dims.identity();
    let mut s: Vec<f64> = e.iter().map(|v| v * init).collect();
    let mut lam = s.clone();
    let mut z = vec![0.0; m];

    let mut kkt = NormalSystem::new(f, dims, cfg.normal_equations, cfg.dense_row_threshold, cfg.ordering);
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut delta = REG_START;
    let mut small_steps = 0;
    if cfg.verbose {
        eprintln!("{}", IterationRecord::HEADER);
    }

    let finish = |status: Status, z: Vec<f64>, slack: Vec<f64>, dual: Vec<f64>, log: Vec<IterationRecord>| {
        let objective = dot(c, &z);
        let gap = match status {
            Status::Optimal | Status::IterLimit | Status::NumericalFailure => dot(f0, &dual) - objective,
            _ => 0.0,
        };
        Solution {
            status,
            iterations: log.len().saturating_sub(1),
            z,
            slack,
            dual,
            objective,
            gap,
            log,
        }
    };

    for iter in 0..=cfg.max_iter {
        let fz = f.mul_vec(&z)?;
        let r_s: Vec<f64> = (0..n).map(|i| fz[i] + s[i] - f0[i]).collect();
        let ftl = f.mul_t_vec(&lam)?;
        let r_z: Vec<f64> = (0..m).map(|j| ftl[j] - c[j]).collect();
        let pres = inf_norm(&r_s);
        let dres = inf_norm(&r_z);
        let pcost = dot(c, &z);
        let dcost = dot(f0, &lam);
        let gap = dot(&s, &lam);
        let mu = gap / nu;
        let mut record = IterationRecord {
            iter,
            pcost,
            dcost,
            gap,
            pres,
            dres,
            step: 0.0,
        };

        let gap_tol = cfg.tol_gap * (1.0 + pcost.abs());
        if pres <= cfg.tol_feas && dres <= cfg.tol_feas * c_scale && gap <= gap_tol && (dcost - pcost).abs() <= gap_tol
        {
            log.push(record);
            if cfg.verbose {
                eprintln!("{record}");
            }
            let slack = prob.slack(&z)?;
            return Ok(finish(Status::Optimal, z, slack, lam, log));
        }

        // primal infeasibility: λ ∈ K, Fᵀλ ≈ 0, f₀ᵀλ < 0
        if dcost < 0.0 && pres > cfg.tol_feas && inf_norm(&ftl) <= cfg.tol_feas * -dcost {
            log.push(record);
            let ray: Vec<f64> = lam.iter().map(|v| v / -dcost).collect();
            return Ok(finish(Status::PrimalInfeasible, z, s, ray, log));
        }
        // dual infeasibility: −Fz ∈ K approximately, cᵀz > 0
        if pcost > 0.0 && dres > cfg.tol_feas * c_scale {
            let fzs: Vec<f64> = (0..n).map(|i| fz[i] + s[i]).collect();
            if inf_norm(&fzs) <= cfg.tol_feas * pcost {
                log.push(record);
                let ray: Vec<f64> = z.iter().map(|v| v / pcost).collect();
                return Ok(finish(Status::DualInfeasible, ray, s, lam, log));
            }
        }
        if iter == cfg.max_iter {
            log.push(record);
            return Ok(finish(Status::IterLimit, z, s, lam, log));
        }

        let w = Scaling::new(dims, &s, &lam);
        let lt = w.apply(&lam);
        loop {
            match kkt.factor(&w, delta) {
                Ok(()) => break,
                Err(_) if delta < REG_MAX => delta = (delta * 10.0).min(REG_MAX),
                Err(_) => {
                    log.push(record);
                    return Ok(finish(Status::NumericalFailure, z, s, lam, log));
                }
            }
        }

        let newton = |r_c: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let qhat = dims.divide(&lt, r_c);
            let wq = w.apply(&qhat);
            let b1: Vec<f64> = r_z.iter().map(|v| -v).collect();
            let b2: Vec<f64> = (0..n).map(|i| -r_s[i] - wq[i]).collect();
            let (dz, dl) = kkt.solve_augmented(&w, &b1, &b2);
            let fdz = f.mul_vec(&dz).expect("dimensions fixed");
            let ds: Vec<f64> = (0..n).map(|i| -r_s[i] - fdz[i]).collect();
            (dz, ds, dl)
        };
        let step_to_boundary = |ds: &[f64], dl: &[f64]| dims.max_step(&s, ds).min(dims.max_step(&lam, dl));

        // predictor
        let ltlt = dims.product(&lt, &lt);
        let r_aff: Vec<f64> = ltlt.iter().map(|v| -v).collect();
        let (_, ds_a, dl_a) = newton(&r_aff);
        let alpha_aff = step_to_boundary(&ds_a, &dl_a).min(1.0);
        let s_aff: Vec<f64> = (0..n).map(|i| s[i] + alpha_aff * ds_a[i]).collect();
        let l_aff: Vec<f64> = (0..n).map(|i| lam[i] + alpha_aff * dl_a[i]).collect();
        let mu_aff = dot(&s_aff, &l_aff) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let dst = w.apply_inv(&ds_a);
        let dlt = w.apply(&dl_a);
        let cross = dims.product(&dst, &dlt);
        let r_c: Vec<f64> = (0..n).map(|i| -ltlt[i] - cross[i] + sigma * mu * e[i]).collect();
        let (dz, ds, dl) = newton(&r_c);
        let mut alpha = (cfg.step_fraction * step_to_boundary(&ds, &dl)).min(1.0);
        let mut s_next: Vec<f64>;
        let mut l_next: Vec<f64>;
        loop {
            s_next = (0..n).map(|i| s[i] + alpha * ds[i]).collect();
            l_next = (0..n).map(|i| lam[i] + alpha * dl[i]).collect();
            if !alpha.is_finite() || (dims.is_interior(&s_next) && dims.is_interior(&l_next)) || alpha <= MIN_STEP {
                break;
            }
            alpha *= 0.5;
        }

        record.step = alpha;
        log.push(record);
        if cfg.verbose {
            eprintln!("{record}");
        }
        if !(alpha > MIN_STEP) || !alpha.is_finite() {
            small_steps += 1;
            if small_steps >= 3 || !alpha.is_finite() {
                return Ok(finish(Status::NumericalFailure, z, s, lam, log));
            }
            continue;
        }
        small_steps = 0;
        for j in 0..m {
            z[j] += alpha * dz[j];
        }
        s = s_next;
        lam = l_next;
    }
    unreachable!("the loop returns at max_iter")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    /// maximize g₁x₁ + g₂x₂ with x ∈ simplex and ‖x‖² ≤ 2θ.
    fn two_founders(theta: f64, g: [f64; 2]) -> ConicProblem {
        let mut t = vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, -1.0), (1, 1, -1.0)];
        for j in 0..2 {
            t.push((2 + j, j, 1.0));
            t.push((4 + j, j, -1.0));
            t.push((7 + j, j, 1.0));
        }
        let f = CsrMatrix::from_triplets(9, 2, &t);
        let f0 = vec![1.0, -1.0, 1.0, 1.0, 0.0, 0.0, (2.0 * theta).sqrt(), 0.0, 0.0];
        ConicProblem::new(g.to_vec(), f0, f, 6, 3).unwrap()
    }

    fn configs() -> Vec<SolverConfig> {
        let mut out = vec![SolverConfig::default()];
        for threshold in [None, Some(1)] {
            out.push(SolverConfig {
                normal_equations: NormalEquations::Sparse,
                dense_row_threshold: threshold,
                ..SolverConfig::default()
            });
        }
        out
    }

    #[test]
    fn closed_form_two_founders() {
        let want = (1.0 + 0.2f64.sqrt()) / 2.0;
        for cfg in configs() {
            let prob = two_founders(0.3, [1.0, 0.0]);
            let sol = solve(&prob, &cfg).unwrap();
            assert_eq!(sol.status, Status::Optimal, "{cfg:?}");
            assert!((sol.objective - want).abs() < 1e-8, "{}", sol.objective);
            assert!((sol.z[0] - want).abs() < 1e-7);
            let r = residuals(&prob, &sol).unwrap();
            assert!(r.primal_violation <= 1e-8 && r.dual_violation <= 1e-8, "{r:?}");
            assert!(sol.gap.abs() <= 1e-8 * (1.0 + sol.objective.abs()));
        }
    }

    #[test]
    fn below_minimum_coancestry_is_primal_infeasible() {
        for cfg in configs() {
            let prob = two_founders(0.2, [1.0, 0.0]);
            let sol = solve(&prob, &cfg).unwrap();
            assert_eq!(sol.status, Status::PrimalInfeasible);
            // certificate: λ ∈ K, Fᵀλ ≈ 0, f₀ᵀλ = −1
            assert!((dot(prob.f0(), &sol.dual) + 1.0).abs() < 1e-12);
            assert!(inf_norm(&prob.f().mul_t_vec(&sol.dual).unwrap()) <= 1e-8);
            assert_eq!(prob.dims().violation(&sol.dual).0, 0.0);
        }
    }

    #[test]
    fn lp_only_instance_is_greedy() {
        let m = 3;
        let mut t = Vec::new();
        for j in 0..m {
            t.push((0, j, 1.0));
            t.push((1, j, -1.0));
            t.push((2 + j, j, 1.0));
            t.push((5 + j, j, -1.0));
            t.push((9 + j, j, 1.0));
        }
        let f = CsrMatrix::from_triplets(12, m, &t);
        let mut f0 = vec![1.0, -1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1e3];
        f0.resize(12, 0.0);
        let prob = ConicProblem::new(vec![3.0, 2.0, 1.0], f0, f, 8, 4).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-7);
        assert!((sol.z[0] - 1.0).abs() < 1e-6 && sol.z[1].abs() < 1e-6 && sol.z[2].abs() < 1e-6);
    }

    #[test]
    fn unbounded_problem_is_dual_infeasible() {
        // maximize z subject to z ≥ 0 only
        let f = CsrMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]);
        let prob = ConicProblem::new(vec![1.0], vec![0.0], f, 1, 0).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, Status::DualInfeasible);
        assert!((sol.z[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let cfg = SolverConfig {
            max_iter: 2,
            ..SolverConfig::default()
        };
        let sol = solve(&two_founders(0.3, [1.0, 0.0]), &cfg).unwrap();
        assert_eq!(sol.status, Status::IterLimit);
        assert_eq!(sol.iterations, 2);
        assert_eq!(sol.log.len(), 3);
    }

    #[test]
    fn residuals_of_hand_built_points() {
        let prob = two_founders(0.3, [1.0, 0.0]);
        let r = residuals_of(&prob, &[2.0, 0.0], &[0.0; 9]).unwrap();
        assert!(r.primal_violation > 0.0);
        assert!(r.violated_rows.contains(&2), "{:?}", r.violated_rows);
        let r = residuals_of(&prob, &[0.0, 0.0], &[0.0; 9]).unwrap();
        // f₀ has a negative entry here, so only the gap is checked
        assert_eq!(r.objective_gap, 0.0);
        assert!(residuals_of(&prob, &[0.0], &[0.0; 9]).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            step_fraction: 1.0,
            ..SolverConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().kind(), "invalid_config");
        let bad = SolverConfig {
            tol_gap: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn deterministic() {
        let prob = two_founders(0.3, [1.0, 0.4]);
        let a = solve(&prob, &SolverConfig::default()).unwrap();
        let b = solve(&prob, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
