//! Recovery-condition checks, level deviation bounds and a brute-force
//! feasibility oracle certifying cluster recovery on small noiseless
//! instances.

use ndarray::prelude::*;
use serde::Serialize;

use crate::topology::{connectivity_radius, label_distance, ClusterPartition};
use crate::{Error, Result};

/// Guard on the labeling enumeration: `M^n` may not exceed this.
pub const ENUMERATION_GUARD: f64 = 1e7;

/// A modulus of continuity. Only the linear form `omega(t) = L t` is
/// admitted: for Lipschitz moduli the extension of a feasible interpolant to
/// the whole space is unconditionally valid, which is what the oracle leans
/// on. Concave moduli are a possible extension point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ModulusSpec {
    Linear { l: f64 },
}

impl ModulusSpec {
    pub fn linear(l: f64) -> Result<Self> {
        if l >= 0.0 {
            Ok(ModulusSpec::Linear { l })
        } else {
            Err(Error::InvalidInput(format!("Lipschitz constant must be nonnegative, got {l}")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ModulusSpec::Linear { l } => l * t,
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            ModulusSpec::Linear { l } => *l,
        }
    }
}

/// Modulus induced by a Hilbert-norm ball: any `f` with `||f||_H <= R` is
/// `R`-Lipschitz with respect to the kernel metric.
pub fn rkhs_modulus(hilbert_norm_bound: f64) -> Result<ModulusSpec> {
    ModulusSpec::linear(hilbert_norm_bound)
}

/// Outcome of the strict recovery condition
/// `omega(rho_min) < min_gap / (2M)`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub min_gap: f64,
    pub holds: bool,
    /// Present when the check is degenerate (duplicate levels).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Evaluate the cluster recovery condition for a level vector `mu` with `M`
/// classes at connectivity radius `rho_min`. The inequality is strict and is
/// evaluated in exact floating point; duplicate levels give `min_gap = 0`
/// and the condition fails with a diagnostic.
pub fn recovery_condition(
    modulus: &ModulusSpec,
    rho_min: f64,
    mu: &[f64],
    m: usize,
) -> Result<ConditionCheck> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("recovery condition needs M >= 2, got {m}")));
    }
    if mu.len() != m {
        return Err(Error::DimensionMismatch(format!("expected {m} levels, got {}", mu.len())));
    }
    let mut min_gap = f64::INFINITY;
    for k in 0..m {
        for l in (k + 1)..m {
            min_gap = min_gap.min((mu[k] - mu[l]).abs());
        }
    }
    let lhs = modulus.eval(rho_min);
    let rhs = min_gap / (2.0 * m as f64);
    let diagnostic = (min_gap == 0.0).then(|| "duplicate levels: minimum gap is zero".to_string());
    Ok(ConditionCheck { lhs, rhs, min_gap, holds: lhs < rhs, diagnostic })
}

/// The worst-case bound on recovered level deviation:
/// `2 (M - 1) omega(label_dist) + |mean_f|`.
pub fn level_deviation_bound(m: usize, modulus: &ModulusSpec, label_dist: f64, mean_f: f64) -> f64 {
    2.0 * (m as f64 - 1.0) * modulus.eval(label_dist) + mean_f.abs()
}

/// Summary of the identifiability quantities of a labeled sample.
#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityReport {
    pub rho_min: f64,
    pub label_dist: f64,
    pub min_gap: f64,
    pub condition_lhs: f64,
    pub condition_rhs: f64,
    pub condition_holds: bool,
    pub level_bound: f64,
}

/// Compute the full report from a distance matrix, true levels/labels and a
/// modulus; `mean_f` is the empirical mean of the smooth component.
pub fn identifiability_report(
    dist: &Array2<f64>,
    mu: &[f64],
    labels: &[usize],
    modulus: &ModulusSpec,
    mean_f: f64,
) -> Result<IdentifiabilityReport> {
    let m = mu.len();
    let part = ClusterPartition::from_labels(labels, m)?;
    let rho_min = connectivity_radius(dist)?;
    let lbd = label_distance(dist, &part)?;
    let check = recovery_condition(modulus, rho_min, mu, m)?;
    Ok(IdentifiabilityReport {
        rho_min,
        label_dist: lbd,
        min_gap: check.min_gap,
        condition_lhs: check.lhs,
        condition_rhs: check.rhs,
        condition_holds: check.holds,
        level_bound: level_deviation_bound(m, modulus, lbd, mean_f),
    })
}

/// Relabel by order of first appearance, the canonical representative of a
/// labeling modulo label permutation.
pub fn canonical_labeling(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0usize;
    let mut out = Vec::with_capacity(labels.len());
    for &z in labels {
        if z >= map.len() {
            map.resize(z + 1, None);
        }
        let c = *map[z].get_or_insert_with(|| {
            let c = next;
            next += 1;
            c
        });
        out.push(c);
    }
    out
}

/// All surjective labelings `z` in `[M]^n` for which some level vector `mu`
/// and some function `f` with the given modulus reproduce the observations
/// exactly: `f(x_i) + mu_{z_i} = y_i`.
///
/// For fixed `z` this is the difference-constraint system
/// `mu_{z_i} - mu_{z_j} <= omega(d_ij) + (y_i - y_j)` over all ordered pairs,
/// decided by negative-cycle detection (Bellman-Ford) on the `M`-node
/// constraint graph; a feasible system extends to an interpolant on the whole
/// space by the McShane construction for Lipschitz functions. Labels are
/// zero-based.
pub fn feasible_labelings(
    y: &[f64],
    dist: &Array2<f64>,
    modulus: &ModulusSpec,
    m: usize,
) -> Result<Vec<Vec<usize>>> {
    let n = y.len();
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("need at least one point and one class".into()));
    }
    if dist.nrows() != n || dist.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "distance matrix is {}x{}, expected {n}x{n}",
            dist.nrows(),
            dist.ncols()
        )));
    }
    let states = (m as f64).powi(n as i32);
    if states > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard { states, limit: ENUMERATION_GUARD });
    }

    let mut search = FeasibilitySearch {
        y,
        dist,
        modulus,
        m,
        assignment: Vec::with_capacity(n),
        class_counts: vec![0usize; m],
        arc: vec![f64::INFINITY; m * m],
        found: Vec::new(),
    };
    search.recurse();
    Ok(search.found)
}

struct FeasibilitySearch<'a> {
    y: &'a [f64],
    dist: &'a Array2<f64>,
    modulus: &'a ModulusSpec,
    m: usize,
    assignment: Vec<usize>,
    class_counts: Vec<usize>,
    /// arc[a * m + b] bounds mu_a - mu_b from above; infinity when unconstrained.
    arc: Vec<f64>,
    found: Vec<Vec<usize>>,
}

impl FeasibilitySearch<'_> {
    fn recurse(&mut self) {
        let i = self.assignment.len();
        let n = self.y.len();
        if i == n {
            if self.class_counts.iter().all(|&c| c > 0) {
                self.found.push(self.assignment.clone());
            }
            return;
        }
        // surjectivity: every still-missing class needs a remaining slot
        let missing = self.class_counts.iter().filter(|&&c| c == 0).count();
        if missing > n - i {
            return;
        }
        for k in 0..self.m {
            let mut undo: Vec<(usize, f64)> = Vec::new();
            let mut viable = true;
            for j in 0..i {
                let zj = self.assignment[j];
                let omega = self.modulus.eval(self.dist[[i, j]]);
                let diff = self.y[i] - self.y[j];
                if zj == k {
                    if diff.abs() > omega {
                        viable = false;
                        break;
                    }
                    continue;
                }
                for (slot, bound) in [(k * self.m + zj, omega + diff), (zj * self.m + k, omega - diff)] {
                    if bound < self.arc[slot] {
                        undo.push((slot, self.arc[slot]));
                        self.arc[slot] = bound;
                    }
                }
            }
            if viable && !self.has_negative_cycle() {
                self.assignment.push(k);
                self.class_counts[k] += 1;
                self.recurse();
                self.class_counts[k] -= 1;
                self.assignment.pop();
            }
            for (slot, old) in undo.into_iter().rev() {
                self.arc[slot] = old;
            }
        }
    }

    /// Bellman-Ford over the complete constraint digraph: potentials start at
    /// zero (a virtual source), relax all arcs `M` times, and any further
    /// improvement certifies a negative cycle, i.e. an inconsistent system.
    fn has_negative_cycle(&self) -> bool {
        let m = self.m;
        let mut pot = vec![0.0f64; m];
        for round in 0..=m {
            let mut changed = false;
            for a in 0..m {
                for b in 0..m {
                    let w = self.arc[a * m + b];
                    if w.is_finite() && pot[b] + w < pot[a] - 1e-15 {
                        pot[a] = pot[b] + w;
                        changed = true;
                    }
                }
            }
            if !changed {
                return false;
            }
            if round == m {
                return true;
            }
        }
        false
    }
}

/// Report produced by [`verify_theorem1`].
#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Report {
    pub rho_min: f64,
    pub condition: ConditionCheck,
    pub feasible_count: usize,
    /// Every feasible labeling equals the truth up to label permutation.
    pub all_match_truth: bool,
    /// Feasible labelings that disagree with the truth, verbatim.
    pub counterexamples: Vec<Vec<usize>>,
    /// Condition held and no counterexample was found.
    pub certified: bool,
}

/// Run the feasibility oracle against a noiseless instance with known truth.
///
/// When the recovery condition holds, every feasible labeling must coincide
/// with the true one up to permutation; any counterexample is reported
/// verbatim rather than dropped. When the condition fails the feasible set is
/// still reported, but no claim is made.
pub fn verify_theorem1(
    y: &[f64],
    dist: &Array2<f64>,
    true_labels: &[usize],
    true_mu: &[f64],
    modulus: &ModulusSpec,
) -> Result<Theorem1Report> {
    let m = true_mu.len();
    let rho_min = connectivity_radius(dist)?;
    let condition = recovery_condition(modulus, rho_min, true_mu, m)?;
    let feasible = feasible_labelings(y, dist, modulus, m)?;
    let truth_canonical = canonical_labeling(true_labels);
    let counterexamples: Vec<Vec<usize>> = feasible
        .iter()
        .filter(|z| canonical_labeling(z) != truth_canonical)
        .cloned()
        .collect();
    let all_match_truth = counterexamples.is_empty() && !feasible.is_empty();
    let certified = condition.holds && all_match_truth;
    Ok(Theorem1Report {
        rho_min,
        condition,
        feasible_count: feasible.len(),
        all_match_truth,
        counterexamples,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pairwise_distances, Metric, PointCloud};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn euclid_dist(values: &[f64]) -> Array2<f64> {
        let cloud = PointCloud::from_scalars(values).unwrap();
        pairwise_distances(&cloud, &Metric::Euclidean).unwrap()
    }

    #[test]
    fn recovery_condition_examples() {
        let omega = ModulusSpec::linear(1.0).unwrap();
        assert!(recovery_condition(&omega, 0.2, &[0.0, 1.0], 2).unwrap().holds);
        // strict inequality fails on the boundary
        assert!(!recovery_condition(&omega, 0.25, &[0.0, 1.0], 2).unwrap().holds);

        let l = 3.0 * std::f64::consts::SQRT_2 / 4.0 * std::f64::consts::PI;
        let omega = ModulusSpec::linear(l).unwrap();
        let rho = (3600.0f64).powf(-0.5);
        let check = recovery_condition(&omega, rho, &[0.0, 1.0], 2).unwrap();
        assert!((check.lhs - 0.0555).abs() < 5e-4);
        assert!(check.holds);
    }

    #[test]
    fn recovery_condition_duplicate_levels() {
        let omega = ModulusSpec::linear(1.0).unwrap();
        let check = recovery_condition(&omega, 0.0, &[0.5, 0.5], 2).unwrap();
        assert!(!check.holds);
        assert_eq!(check.min_gap, 0.0);
        assert!(check.diagnostic.is_some());
    }

    #[test]
    fn level_deviation_bound_examples() {
        let omega = ModulusSpec::linear(2.0).unwrap();
        assert_abs_diff_eq!(level_deviation_bound(3, &omega, 0.1, 0.05), 0.85, epsilon = 1e-15);
        let omega = ModulusSpec::linear(7.0).unwrap();
        assert_eq!(level_deviation_bound(1, &omega, 0.9, 0.0), 0.0);
        let omega = ModulusSpec::linear(1.0).unwrap();
        assert_abs_diff_eq!(level_deviation_bound(2, &omega, 0.3, 0.0), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn rkhs_modulus_examples() {
        assert_eq!(rkhs_modulus(0.0).unwrap().eval(123.0), 0.0);
        let l1 = 3.0 * std::f64::consts::SQRT_2 / 4.0 * std::f64::consts::PI;
        assert!((rkhs_modulus(l1).unwrap().lipschitz_constant() - 3.332).abs() < 1e-3);
        assert!((2.0 * l1 - 6.664).abs() < 2e-3);
        assert!(rkhs_modulus(-1.0).is_err());
    }

    #[test]
    fn feasible_labelings_two_point_example() {
        let y = [0.0, 1.0];
        let dist = array![[0.0, 0.1], [0.1, 0.0]];
        let omega = ModulusSpec::linear(1.0).unwrap();
        let mut found = feasible_labelings(&y, &dist, &omega, 2).unwrap();
        found.sort();
        assert_eq!(found, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn feasible_labelings_constant_signal_single_class() {
        let y = [0.7, 0.7, 0.7];
        let dist = euclid_dist(&[0.0, 0.4, 1.0]);
        let omega = ModulusSpec::linear(0.0).unwrap();
        let found = feasible_labelings(&y, &dist, &omega, 1).unwrap();
        assert_eq!(found, vec![vec![0, 0, 0]]);
    }

    #[test]
    fn feasible_labelings_guard() {
        let y = vec![0.0; 40];
        let dist = Array2::<f64>::zeros((40, 40));
        let omega = ModulusSpec::linear(1.0).unwrap();
        assert!(matches!(
            feasible_labelings(&y, &dist, &omega, 3),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn feasible_set_is_shift_invariant_and_monotone_in_l() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.random_range(3..7);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dist = euclid_dist(&xs);
            let small = ModulusSpec::linear(rng.random_range(0.0..0.5)).unwrap();
            let large = ModulusSpec::linear(small.lipschitz_constant() + 1.0).unwrap();
            let base = feasible_labelings(&y, &dist, &small, 2).unwrap();

            let shifted: Vec<f64> = y.iter().map(|v| v + 3.7).collect();
            assert_eq!(feasible_labelings(&shifted, &dist, &small, 2).unwrap(), base);

            let wide = feasible_labelings(&y, &dist, &large, 2).unwrap();
            for z in &base {
                assert!(wide.contains(z), "enlarging L dropped {z:?}");
            }
        }
    }

    #[test]
    fn oracle_certifies_small_instances() {
        // y_i = f(x_i) + mu_{z_i} with f Lipschitz and a gap wide enough for
        // the recovery condition: every feasible labeling must match.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..25 {
            let n = rng.random_range(4..=8);
            let m = rng.random_range(2..=3).min(n);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let dist = euclid_dist(&xs);
            let l = rng.random_range(0.05..0.4);
            let modulus = ModulusSpec::linear(l).unwrap();
            let rho = crate::topology::connectivity_radius(&dist).unwrap();
            let gap = 2.0 * m as f64 * l * rho * 1.3 + 0.1;
            let mu: Vec<f64> = (0..m).map(|k| k as f64 * gap).collect();
            let mut z: Vec<usize> = (0..n).map(|i| i % m).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                z.swap(i, j);
            }
            let slope = rng.random_range(-1.0..1.0) * l;
            let y: Vec<f64> = (0..n).map(|i| slope * xs[i] + mu[z[i]]).collect();
            let report = verify_theorem1(&y, &dist, &z, &mu, &modulus).unwrap();
            assert!(report.condition.holds);
            assert!(report.certified, "counterexamples: {:?}", report.counterexamples);
            assert!(report.feasible_count >= 1);
        }
    }

    #[test]
    fn vacuous_branch_reports_feasible_set() {
        // condition violated: rho_min too large for the gap
        let y = [0.0, 0.05, 1.0];
        let dist = euclid_dist(&[0.0, 0.5, 1.0]);
        let omega = ModulusSpec::linear(1.0).unwrap();
        let report = verify_theorem1(&y, &dist, &[0, 0, 1], &[0.0, 1.0], &omega).unwrap();
        assert!(!report.condition.holds);
        assert!(!report.certified);
        assert!(report.feasible_count > 0);
    }

    #[test]
    fn canonical_labeling_identifies_permutations() {
        assert_eq!(canonical_labeling(&[2, 2, 0, 1]), vec![0, 0, 1, 2]);
        assert_eq!(canonical_labeling(&[0, 0, 1, 2]), canonical_labeling(&[1, 1, 2, 0]));
        assert_ne!(canonical_labeling(&[0, 1, 0]), canonical_labeling(&[0, 0, 1]));
    }

    #[test]
    fn report_combines_topology_and_condition() {
        let y_levels = [0.0, 0.0, 1.0, 1.0];
        let dist = euclid_dist(&[0.1, 0.2, 0.5, 0.6]);
        let omega = ModulusSpec::linear(0.5).unwrap();
        let report =
            identifiability_report(&dist, &[0.0, 1.0], &[0, 0, 1, 1], &omega, 0.0).unwrap();
        assert_abs_diff_eq!(report.rho_min, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(report.label_dist, 0.3, epsilon = 1e-15);
        assert_eq!(report.min_gap, 1.0);
        assert!(report.condition_holds); // 0.15 < 0.25
        assert_abs_diff_eq!(report.level_bound, 2.0 * 0.5 * 0.3, epsilon = 1e-15);
        let _ = y_levels;
    }
}
