//! Independent checks and test-instance generation.
//!
//! The pedigree simulator draws from ChaCha8 (`rand_chacha::ChaCha8Rng`
//! seeded with `seed_from_u64`), a portable stream cipher generator, so a
//! seed names the same pedigree on every platform.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::factorization::dense_cholesky;
use crate::formulation::{build, Formulation, SelectionInstance};
use crate::kinship::relationship_matrix;
use crate::dense::DenseSymmetric;
use crate::pedigree::{Parents, Pedigree};
use crate::solver::{residuals, solve, SolverConfig, Status};

/// Closed-population breeding simulation.
///
/// Cycle 1 selects among the founders, later cycles among the previous
/// cycle's offspring. The best `ceil(selection_fraction · n)` candidates
/// by EBV are kept (ties broken by index) and each offspring gets two
/// distinct parents drawn uniformly from them, or the single selected
/// parent when only one is kept. EBVs are standard normal for founders and
/// parent mean plus standard normal noise for offspring.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_founders: usize,
    pub n_cycles: usize,
    pub offspring_per_cycle: usize,
    pub selection_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 1,
            n_founders: 20,
            n_cycles: 5,
            offspring_per_cycle: 20,
            selection_fraction: 0.5,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_founders == 0 {
            return Err(Error::InvalidConfig("n_founders must be at least 1".into()));
        }
        if self.n_cycles > 0 && self.offspring_per_cycle == 0 {
            return Err(Error::InvalidConfig("offspring_per_cycle must be at least 1".into()));
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction <= 1.0) {
            return Err(Error::InvalidConfig("selection_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn total_members(&self) -> usize {
        self.n_founders + self.n_cycles * self.offspring_per_cycle
    }
}

/// Simulates a pedigree; members are labelled `1..=m` in canonical order.
pub fn generate_pedigree(cfg: &GeneratorConfig) -> Result<Pedigree> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let m = cfg.total_members();
    let mut parents = Vec::with_capacity(m);
    let mut ebv: Vec<f64> = Vec::with_capacity(m);
    for _ in 0..cfg.n_founders {
        parents.push(Parents::Unknown);
        ebv.push(noise.sample(&mut rng));
    }
    let mut candidates: Vec<usize> = (0..cfg.n_founders).collect();
    for _ in 0..cfg.n_cycles {
        let mut ranked = candidates.clone();
        ranked.sort_by(|&a, &b| ebv[b].total_cmp(&ebv[a]).then(a.cmp(&b)));
        let keep = ((cfg.selection_fraction * ranked.len() as f64).ceil() as usize).clamp(1, ranked.len());
        let selected = &ranked[..keep];
        let start = parents.len();
        for _ in 0..cfg.offspring_per_cycle {
            if selected.len() == 1 {
                let p = selected[0];
                parents.push(Parents::One(p));
                ebv.push(ebv[p] + noise.sample(&mut rng));
            } else {
                let a = rng.random_range(0..selected.len());
                let mut b = rng.random_range(0..selected.len() - 1);
                if b >= a {
                    b += 1;
                }
                let (p, q) = (selected[a], selected[b]);
                parents.push(Parents::Two(p.max(q), p.min(q)));
                ebv.push(0.5 * (ebv[p] + ebv[q]) + noise.sample(&mut rng));
            }
        }
        candidates = (start..parents.len()).collect();
    }
    Pedigree::new((1..=m).map(|i| i.to_string()).collect(), parents, ebv)
}

/// Constraint residuals of `x` against the dense `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityResiduals {
    /// `|eᵀx − 1|`
    pub sum: f64,
    /// Largest violation of `l ≤ x ≤ u`.
    pub bounds: f64,
    /// `max(0, xᵀAx/2 − θ)`
    pub coancestry: f64,
    /// `θ − xᵀAx/2`
    pub coancestry_slack: f64,
}

impl FeasibilityResiduals {
    pub fn max(&self) -> f64 {
        self.sum.max(self.bounds).max(self.coancestry)
    }
}

/// Checks `x` against the original constraints with the dense `A`.
pub fn feasibility_check(inst: &SelectionInstance, x: &[f64]) -> Result<FeasibilityResiduals> {
    let a = relationship_matrix(inst.pedigree())?;
    feasibility_with(inst, &a, x)
}

fn feasibility_with(inst: &SelectionInstance, a: &DenseSymmetric, x: &[f64]) -> Result<FeasibilityResiduals> {
    check_dim(inst.m(), x.len())?;
    let sum = (x.iter().sum::<f64>() - 1.0).abs();
    let bounds = x
        .iter()
        .zip(inst.lower().iter().zip(inst.upper()))
        .map(|(&xi, (&l, &u))| (l - xi).max(xi - u).max(0.0))
        .fold(0.0, f64::max);
    let coancestry = a.quad_form(x)? / 2.0;
    let slack = inst.theta() - coancestry;
    Ok(FeasibilityResiduals {
        sum,
        bounds,
        coancestry: (-slack).max(0.0),
        coancestry_slack: slack,
    })
}

/// Outcome of one formulation inside [`cross_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulationOutcome {
    pub formulation: Formulation,
    pub status: Option<Status>,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub x: Option<Vec<f64>>,
    pub feasibility: Option<FeasibilityResiduals>,
    /// Largest solver certificate residual (cone violations, gap).
    pub certificate: Option<f64>,
    pub error: Option<String>,
}

/// Relative objective difference `|a − b| / max(1, |a|, |b|)`.
pub fn relative_delta(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Results of solving one instance under all three formulations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub outcomes: Vec<FormulationOutcome>,
    /// `(a, b, relative objective delta)` for each pair that solved.
    pub deltas: Vec<(Formulation, Formulation, f64)>,
}

impl EquivalenceReport {
    pub fn max_delta(&self) -> f64 {
        self.deltas.iter().map(|d| d.2).fold(0.0, f64::max)
    }

    pub fn statuses(&self) -> Vec<Option<Status>> {
        self.outcomes.iter().map(|o| o.status).collect()
    }

    /// All formulations agree on the status; when optimal, objectives agree
    /// within `tol` and every `x` is feasible within `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        let first = self.outcomes[0].status;
        if first.is_none() || self.outcomes.iter().any(|o| o.status != first) {
            return false;
        }
        if first != Some(Status::Optimal) {
            return true;
        }
        self.max_delta() <= tol
            && self
                .outcomes
                .iter()
                .all(|o| o.feasibility.is_some_and(|f| f.max() <= tol))
    }
}

/// Builds and solves all three formulations, recovers `x` and checks it
/// against the dense `A`.
pub fn cross_check(inst: &SelectionInstance, cfg: &SolverConfig) -> Result<EquivalenceReport> {
    let a = relationship_matrix(inst.pedigree())?;
    let outcomes: Vec<FormulationOutcome> = Formulation::ALL
        .iter()
        .map(|&formulation| {
            let mut out = FormulationOutcome {
                formulation,
                status: None,
                objective: None,
                iterations: 0,
                x: None,
                feasibility: None,
                certificate: None,
                error: None,
            };
            let mut run = || -> Result<()> {
                let built = build(inst, formulation)?;
                let sol = solve(&built.problem, cfg)?;
                out.status = Some(sol.status);
                out.iterations = sol.iterations;
                if sol.status == Status::Optimal {
                    let x = built.recover(&sol.z)?;
                    let r = residuals(&built.problem, &sol)?;
                    out.certificate = Some(r.primal_violation.max(r.dual_violation).max(
                        r.objective_gap / (1.0 + sol.objective.abs()),
                    ));
                    out.objective = Some(sol.objective);
                    out.feasibility = Some(feasibility_with(inst, &a, &x)?);
                    out.x = Some(x);
                }
                Ok(())
            };
            if let Err(e) = run() {
                out.error = Some(e.to_string());
            }
            out
        })
        .collect();
    let mut deltas = Vec::new();
    for i in 0..outcomes.len() {
        for j in i + 1..outcomes.len() {
            if let (Some(a), Some(b)) = (outcomes[i].objective, outcomes[j].objective) {
                deltas.push((outcomes[i].formulation, outcomes[j].formulation, relative_delta(a, b)));
            }
        }
    }
    Ok(EquivalenceReport { outcomes, deltas })
}

/// Largest pedigree accepted by [`min_group_coancestry_exhaustive`].
pub const EXHAUSTIVE_LIMIT: usize = 16;

/// `min xᵀAx/2` over the simplex `{x ≥ 0, eᵀx = 1}` by enumerating
/// supports: on a support `S` the stationary point is
/// `x_S = A_S⁻¹e / eᵀA_S⁻¹e`, and the minimum is the best non-negative one.
pub fn min_group_coancestry_exhaustive(a: &DenseSymmetric) -> Result<f64> {
    let m = a.n();
    if m == 0 || m > EXHAUSTIVE_LIMIT {
        return Err(Error::InvalidInstance(format!(
            "exhaustive search needs 1..={EXHAUSTIVE_LIMIT} members, got {m}"
        )));
    }
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&j| a.get(i, j)).collect()).collect();
        let sub = DenseSymmetric::from_rows(&rows);
        let u = dense_cholesky(&sub)?;
        // A_S w = e via UᵀU w = e
        let k = idx.len();
        let mut w = vec![1.0; k];
        for i in 0..k {
            let s: f64 = (0..i).map(|j| u.get(j, i) * w[j]).sum();
            w[i] = (w[i] - s) / u.get(i, i);
        }
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| u.get(i, j) * w[j]).sum();
            w[i] = (w[i] - s) / u.get(i, i);
        }
        let total: f64 = w.iter().sum();
        if w.iter().all(|&v| v >= -1e-14) && total > 0.0 {
            best = best.min(0.5 / total);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pedigree::parse_pedigree;

    fn figure1() -> Pedigree {
        parse_pedigree(
            "id,sire,dam,ebv\n1,0,0,1\n2,0,0,2\n3,1,2,3\n4,1,2,4\n5,2,0,5\n6,3,4,6\n7,1,5,7\n8,7,6,8\n9,5,7,9\n"
                .as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn founders_only() {
        let ped = generate_pedigree(&GeneratorConfig {
            seed: 1,
            n_founders: 10,
            n_cycles: 0,
            ..GeneratorConfig::default()
        })
        .unwrap();
        assert_eq!(ped.len(), 10);
        let g = ped.classify();
        assert_eq!((g.one_parent.len(), g.two_parents.len()), (0, 0));
    }

    #[test]
    fn structure_and_determinism() {
        let cfg = GeneratorConfig {
            seed: 42,
            ..GeneratorConfig::default()
        };
        let a = generate_pedigree(&cfg).unwrap();
        assert_eq!(a.len(), 120);
        for (i, p) in a.parents().iter().enumerate() {
            assert!(p.p().is_none_or(|p| p < i));
        }
        assert_eq!(a, generate_pedigree(&cfg).unwrap());
        let other = generate_pedigree(&GeneratorConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn single_selected_parent() {
        let ped = generate_pedigree(&GeneratorConfig {
            seed: 3,
            n_founders: 1,
            n_cycles: 2,
            offspring_per_cycle: 3,
            selection_fraction: 0.3,
        })
        .unwrap();
        assert!(ped.parents()[1..].iter().all(|p| matches!(p, Parents::One(_))));
    }

    #[test]
    fn feasibility_examples() {
        let m = 4;
        let ped = Pedigree::new((1..=m).map(|i| i.to_string()).collect(), vec![Parents::Unknown; m], vec![0.0; m])
            .unwrap();
        let inst = SelectionInstance::uniform(ped, 0.0, 1.0, 1.0 / (2.0 * m as f64)).unwrap();
        let r = feasibility_check(&inst, &[0.25; 4]).unwrap();
        assert_eq!((r.sum, r.bounds, r.coancestry), (0.0, 0.0, 0.0));

        let inst = SelectionInstance::uniform(figure1(), 0.0, 1.0, 0.4).unwrap();
        let mut x = vec![0.0; 9];
        x[0] = 1.0;
        let r = feasibility_check(&inst, &x).unwrap();
        assert!((r.coancestry - 0.1).abs() < 1e-15);
        assert!(feasibility_check(&inst, &[1.0]).is_err());
    }

    #[test]
    fn exhaustive_minimum_on_founders() {
        let a = DenseSymmetric::identity(3);
        assert!((min_group_coancestry_exhaustive(&a).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }
}
