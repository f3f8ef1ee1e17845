//! Exact discrete optimal transport and budget-constrained transport
//! maximization. Every dual computed elsewhere in the crate is certified
//! against the LP optima produced here.

use serde::{Deserialize, Serialize};

use crate::distribution::{DiscreteDistribution, ProductDistribution, DEFAULT_EXPANSION_CAP};
use crate::error::{Error, Result};
use crate::simplex::{Cmp, LinearProgram};
use crate::space::{Exponent, PartitionedSpace};

/// Tolerance for marginal/budget feasibility checks on returned plans.
pub const PLAN_TOL: f64 = 1e-9;

/// A coupling between two finite atom sets. Row `j` of `pi` carries the mass
/// leaving source atom `j`; column `m` the mass arriving at destination `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub source: Vec<Vec<f64>>,
    pub dest: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
}

impl TransportPlan {
    pub fn n_sources(&self) -> usize {
        self.source.len()
    }

    pub fn n_dests(&self) -> usize {
        self.dest.len()
    }

    /// Row sums: the mass leaving each source atom.
    pub fn source_marginal(&self) -> Vec<f64> {
        self.pi.iter().map(|row| row.iter().sum()).collect()
    }

    /// Column sums: the mass arriving at each destination atom.
    pub fn dest_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dests()];
        for row in &self.pi {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.pi.iter().flatten().sum()
    }

    /// The destination-side distribution induced by the plan, duplicates merged.
    pub fn induced_destination(&self) -> Result<DiscreteDistribution> {
        DiscreteDistribution::new(self.dest.clone(), self.dest_marginal())
            .map(|d| d.merge_duplicates())
    }

    /// Σ_{j,m} c(source_j, dest_m) π_{jm}.
    pub fn cost_under(&self, mut c: impl FnMut(&[f64], &[f64]) -> f64) -> f64 {
        let mut total = 0.0;
        for (j, row) in self.pi.iter().enumerate() {
            for (m, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    total += w * c(&self.source[j], &self.dest[m]);
                }
            }
        }
        total
    }

    fn check_shape(&self) -> Result<()> {
        if self.pi.len() != self.source.len()
            || self.pi.iter().any(|row| row.len() != self.dest.len())
        {
            return Err(Error::input("plan matrix shape does not match atom sets"));
        }
        Ok(())
    }
}

/// Which way per-component values combine in a decomposable objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    Sum,
    Product,
}

type CostFn = Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A family of n transport cost functions c_k(ζ, ξ) ≥ 0 with c_k(ζ, ζ) = 0.
pub struct CostFamily {
    costs: Vec<CostFn>,
}

impl CostFamily {
    /// The default family c_k(ζ, ξ) = ρ_k(ζ_k, ξ_k)^p on a partitioned space.
    pub fn blockwise(space: &PartitionedSpace, p: f64) -> Result<Self> {
        check_wasserstein_exponent(p)?;
        let costs = (0..space.n_blocks())
            .map(|k| {
                let sp = space.clone();
                let f: CostFn = Box::new(move |a: &[f64], b: &[f64]| {
                    sp.block_distance(a, b, k)
                        .expect("dimension checked upstream")
                        .powf(p)
                });
                f
            })
            .collect();
        Ok(CostFamily { costs })
    }

    pub fn from_fns(costs: Vec<CostFn>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::input("a cost family needs at least one cost"));
        }
        Ok(CostFamily { costs })
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn evaluate(&self, k: usize, a: &[f64], b: &[f64]) -> f64 {
        (self.costs[k])(a, b)
    }
}

fn check_wasserstein_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::input(format!(
            "Wasserstein exponent must be finite and >= 1, got {p}"
        )));
    }
    Ok(())
}

/// Exact p-Wasserstein distance between two discrete distributions on the
/// same partitioned space, together with an optimal coupling.
///
/// The returned distance is (optimal transport cost)^{1/p} for the ground
/// cost ρ(ζ, ξ)^p.
pub fn wasserstein_p(
    from: &DiscreteDistribution,
    to: &DiscreteDistribution,
    space: &PartitionedSpace,
    p: f64,
) -> Result<(f64, TransportPlan)> {
    check_wasserstein_exponent(p)?;
    let d = space.total_dim();
    if from.dim() != d || to.dim() != d {
        return Err(Error::input(format!(
            "distributions have dims {} and {}, space expects {d}",
            from.dim(),
            to.dim()
        )));
    }
    let (nj, nm) = (from.len(), to.len());
    let mut cost = vec![0.0; nj * nm];
    for (j, a) in from.atoms().iter().enumerate() {
        for (m, b) in to.atoms().iter().enumerate() {
            cost[j * nm + m] = space.product_metric(a, b)?.powf(p);
        }
    }
    let mut lp = LinearProgram::minimize(cost.clone());
    for j in 0..nj {
        let mut row = vec![0.0; nj * nm];
        row[j * nm..(j + 1) * nm].fill(1.0);
        lp.add_constraint(row, Cmp::Eq, from.weights()[j]);
    }
    for m in 0..nm {
        let mut row = vec![0.0; nj * nm];
        for j in 0..nj {
            row[j * nm + m] = 1.0;
        }
        lp.add_constraint(row, Cmp::Eq, to.weights()[m]);
    }
    let sol = lp.solve()?;
    let plan = TransportPlan {
        source: from.atoms().to_vec(),
        dest: to.atoms().to_vec(),
        pi: (0..nj)
            .map(|j| sol.x[j * nm..(j + 1) * nm].to_vec())
            .collect(),
    };
    Ok((sol.value.max(0.0).powf(1.0 / p), plan))
}

/// Maximize E_P[h] over all distributions P reachable from `source` through
/// a single coupling that respects every transport-cost budget:
///
///   max Σ_{j,m} π_{jm} h(x_m)
///   s.t. Σ_m π_{jm} = w_j for every source atom j,
///        Σ_{j,m} c_k(ζ_j, x_m) π_{jm} ≤ budget_k for every k.
///
/// `destinations` must contain every source atom so that the identity
/// coupling is feasible (c_k(ζ, ζ) = 0).
pub fn max_expectation_multitransport(
    source: &DiscreteDistribution,
    costs: &CostFamily,
    budgets: &[f64],
    h: impl Fn(&[f64]) -> f64,
    destinations: &[Vec<f64>],
) -> Result<(f64, TransportPlan)> {
    if budgets.len() != costs.len() {
        return Err(Error::input(format!(
            "{} budgets for {} costs",
            budgets.len(),
            costs.len()
        )));
    }
    if budgets.iter().any(|&b| !b.is_finite() || b < 0.0) {
        return Err(Error::input("budgets must be finite and nonnegative"));
    }
    if destinations.is_empty() {
        return Err(Error::input("destination candidate set is empty"));
    }
    let d = source.dim();
    if destinations.iter().any(|x| x.len() != d) {
        return Err(Error::input(format!(
            "destination points must have dimension {d}"
        )));
    }
    for atom in source.atoms() {
        if !destinations.iter().any(|x| x == atom) {
            return Err(Error::precondition(
                "destinations must include every source atom (feasibility is not guaranteed otherwise)",
            ));
        }
    }
    for k in 0..costs.len() {
        for atom in source.atoms() {
            if costs.evaluate(k, atom, atom).abs() > 1e-12 {
                return Err(Error::input(format!("cost {k} is nonzero on the diagonal")));
            }
        }
    }

    let (nj, nm) = (source.len(), destinations.len());
    let h_vals: Vec<f64> = destinations.iter().map(|x| h(x)).collect();
    let obj: Vec<f64> = (0..nj).flat_map(|_| h_vals.iter().copied()).collect();
    if obj.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("objective is non-finite on a candidate point"));
    }
    let mut lp = LinearProgram::maximize(obj);
    for j in 0..nj {
        let mut row = vec![0.0; nj * nm];
        row[j * nm..(j + 1) * nm].fill(1.0);
        lp.add_constraint(row, Cmp::Eq, source.weights()[j]);
    }
    for (k, &budget) in budgets.iter().enumerate() {
        let mut row = vec![0.0; nj * nm];
        for (j, atom) in source.atoms().iter().enumerate() {
            for (m, x) in destinations.iter().enumerate() {
                row[j * nm + m] = costs.evaluate(k, atom, x);
            }
        }
        lp.add_constraint(row, Cmp::Le, budget);
    }
    let sol = lp.solve()?;
    let plan = TransportPlan {
        source: source.atoms().to_vec(),
        dest: destinations.to_vec(),
        pi: (0..nj)
            .map(|j| sol.x[j * nm..(j + 1) * nm].to_vec())
            .collect(),
    };
    Ok((-sol.value, plan))
}

/// Maximize E_P[h] over the Wasserstein ball { P : W_p(center, P) ≤ radius }
/// restricted to distributions supported on `destinations`, where the ground
/// space is ℝ^{d} with the `q`-norm metric. This is the single-component
/// building block of [`max_expectation_hyperrect`].
pub fn max_expectation_ball(
    center: &DiscreteDistribution,
    radius: f64,
    p: f64,
    q: Exponent,
    h: impl Fn(&[f64]) -> f64,
    destinations: &[Vec<f64>],
) -> Result<(f64, TransportPlan)> {
    check_wasserstein_exponent(p)?;
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::input(format!(
            "radius must be nonnegative, got {radius}"
        )));
    }
    let space = PartitionedSpace::unpartitioned(center.dim(), q)?;
    let costs = CostFamily::blockwise(&space, p)?;
    max_expectation_multitransport(center, &costs, &[radius.powf(p)], h, destinations)
}

/// Worst-case expectation over a Wasserstein hyperrectangle with a
/// sum- or product-decomposable objective: n independent per-component
/// ball maximizations combined by Σ or Π.
///
/// `h(k, x)` evaluates the k-th component objective at a block-k point.
/// In product mode every h_k must be nonnegative on its candidate set.
pub fn max_expectation_hyperrect(
    center: &ProductDistribution,
    radii: &[f64],
    p: f64,
    mode: ObjectiveMode,
    h: impl Fn(usize, &[f64]) -> f64,
    destinations: &[Vec<Vec<f64>>],
    space: &PartitionedSpace,
) -> Result<f64> {
    center.check_space(space)?;
    let n = center.n_components();
    if radii.len() != n || destinations.len() != n {
        return Err(Error::input(format!(
            "expected {n} radii and candidate sets, got {} and {}",
            radii.len(),
            destinations.len()
        )));
    }
    if mode == ObjectiveMode::Product {
        for (k, dests) in destinations.iter().enumerate() {
            if let Some(x) = dests.iter().find(|x| h(k, x) < 0.0) {
                return Err(Error::precondition(format!(
                    "product mode requires nonnegative objectives; h_{k}({x:?}) < 0"
                )));
            }
        }
    }
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let (v, _) = max_expectation_ball(
            center.component(k),
            radii[k],
            p,
            space.q(),
            |x| h(k, x),
            &destinations[k],
        )?;
        values.push(v);
    }
    Ok(match mode {
        ObjectiveMode::Sum => values.iter().sum(),
        ObjectiveMode::Product => values.iter().product(),
    })
}

/// Combine per-component couplings into a joint coupling on the product
/// space: joint π(𝐣, 𝐦) = Π_k π_k(j_k, m_k), atoms concatenated blockwise
/// with the first component varying fastest.
pub fn glue_product_plans(plans: &[TransportPlan]) -> Result<TransportPlan> {
    if plans.is_empty() {
        return Err(Error::input("need at least one plan to glue"));
    }
    for plan in plans {
        plan.check_shape()?;
        let ds = plan.source.first().map(|a| a.len()).unwrap_or(0);
        if plan.source.iter().any(|a| a.len() != ds) || plan.dest.iter().any(|a| a.len() != ds) {
            return Err(Error::input(
                "plan source/destination atoms must share one component dimension",
            ));
        }
    }
    let nj: usize = plans.iter().map(|p| p.n_sources()).product();
    let nm: usize = plans.iter().map(|p| p.n_dests()).product();
    if nj.checked_mul(nm).is_none_or(|c| c > DEFAULT_EXPANSION_CAP) {
        return Err(Error::Resource(format!(
            "glued plan needs {nj} x {nm} entries, cap is {DEFAULT_EXPANSION_CAP}"
        )));
    }

    let enumerate = |sizes: &[usize]| -> Vec<Vec<usize>> {
        let total: usize = sizes.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; sizes.len()];
        for _ in 0..total {
            out.push(idx.clone());
            for (k, size) in sizes.iter().enumerate() {
                idx[k] += 1;
                if idx[k] < *size {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    };
    let src_sizes: Vec<usize> = plans.iter().map(|p| p.n_sources()).collect();
    let dst_sizes: Vec<usize> = plans.iter().map(|p| p.n_dests()).collect();
    let src_idx = enumerate(&src_sizes);
    let dst_idx = enumerate(&dst_sizes);

    let concat = |plans: &[TransportPlan], idx: &[usize], dest_side: bool| -> Vec<f64> {
        let mut out = Vec::new();
        for (k, plan) in plans.iter().enumerate() {
            let atoms = if dest_side { &plan.dest } else { &plan.source };
            out.extend_from_slice(&atoms[idx[k]]);
        }
        out
    };
    let source: Vec<Vec<f64>> = src_idx.iter().map(|ix| concat(plans, ix, false)).collect();
    let dest: Vec<Vec<f64>> = dst_idx.iter().map(|ix| concat(plans, ix, true)).collect();
    let pi: Vec<Vec<f64>> = src_idx
        .iter()
        .map(|jx| {
            dst_idx
                .iter()
                .map(|mx| {
                    plans
                        .iter()
                        .enumerate()
                        .map(|(k, plan)| plan.pi[jx[k]][mx[k]])
                        .product()
                })
                .collect()
        })
        .collect();
    Ok(TransportPlan { source, dest, pi })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(q: f64) -> PartitionedSpace {
        PartitionedSpace::unpartitioned(1, Exponent::finite(q).unwrap()).unwrap()
    }

    fn dist(atoms: &[f64], weights: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(atoms.iter().map(|&a| vec![a]).collect(), weights.to_vec())
            .unwrap()
    }

    #[test]
    fn self_distance_is_zero() {
        let p = dist(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3]);
        let (d, _) = wasserstein_p(&p, &p, &line(2.0), 2.0).unwrap();
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn dirac_pair_distance_is_ground_metric() {
        let space = PartitionedSpace::unpartitioned(2, Exponent::finite(2.0).unwrap()).unwrap();
        let a = DiscreteDistribution::dirac(vec![0.0, 0.0]).unwrap();
        let b = DiscreteDistribution::dirac(vec![3.0, 4.0]).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let (d, _) = wasserstein_p(&a, &b, &space, p).unwrap();
            assert!((d - 5.0).abs() < 1e-9, "p = {p}: got {d}");
        }
    }

    #[test]
    fn half_mass_move_brute_forced() {
        // P = ½δ0 + ½δ1 vs Q = δ0 on the line, p = 1.
        // One-parameter coupling family: move t of the mass at 1 anywhere;
        // all of it must go to 0, so the cost is exactly 0.5.
        let p = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let q = dist(&[0.0], &[1.0]);
        let brute: f64 = 0.5; // |1 - 0| * mass(1)
        let (d, plan) = wasserstein_p(&p, &q, &line(1.0), 1.0).unwrap();
        assert!((d - brute).abs() < 1e-9);
        assert!((d - plan.cost_under(|a, b| (a[0] - b[0]).abs())).abs() < 1e-9);
        // symmetry
        let (d2, _) = wasserstein_p(&q, &p, &line(1.0), 1.0).unwrap();
        assert!((d - d2).abs() < 1e-9);
    }

    #[test]
    fn plan_marginals_match() {
        let p = dist(&[0.0, 1.0, 2.0], &[0.3, 0.3, 0.4]);
        let q = dist(&[0.5, 1.5], &[0.6, 0.4]);
        let (_, plan) = wasserstein_p(&p, &q, &line(2.0), 2.0).unwrap();
        for (got, want) in plan.source_marginal().iter().zip(p.weights()) {
            assert!((got - want).abs() < PLAN_TOL);
        }
        for (got, want) in plan.dest_marginal().iter().zip(q.weights()) {
            assert!((got - want).abs() < PLAN_TOL);
        }
        assert!((plan.total_mass() - 1.0).abs() < PLAN_TOL);
    }

    #[test]
    fn zero_budgets_force_identity_coupling() {
        let space = line(1.0);
        let q = dist(&[0.0, 2.0], &[0.25, 0.75]);
        let costs = CostFamily::blockwise(&space, 1.0).unwrap();
        let dests = vec![vec![0.0], vec![1.0], vec![2.0]];
        let h = |x: &[f64]| x[0] * x[0] + 1.0;
        let (v, plan) = max_expectation_multitransport(&q, &costs, &[0.0], h, &dests).unwrap();
        let expect_q = q.expect(h);
        assert!((v - expect_q).abs() < 1e-9);
        assert!(plan.cost_under(|a, b| (a[0] - b[0]).abs()) < PLAN_TOL);
    }

    #[test]
    fn huge_budgets_reach_best_candidate() {
        let space = line(1.0);
        let q = dist(&[0.0, 2.0], &[0.25, 0.75]);
        let costs = CostFamily::blockwise(&space, 1.0).unwrap();
        let dests = vec![vec![0.0], vec![2.0], vec![7.0]];
        let h = |x: &[f64]| x[0];
        let (v, _) = max_expectation_multitransport(&q, &costs, &[100.0], h, &dests).unwrap();
        assert!((v - 7.0).abs() < 1e-9);
    }

    #[test]
    fn missing_source_atom_is_precondition_error() {
        let space = line(1.0);
        let q = dist(&[0.0, 2.0], &[0.25, 0.75]);
        let costs = CostFamily::blockwise(&space, 1.0).unwrap();
        let dests = vec![vec![0.0], vec![1.0]];
        let err = max_expectation_multitransport(&q, &costs, &[1.0], |x| x[0], &dests);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn hyperrect_zero_radii_gives_center_expectation() {
        let c0 = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let c1 = dist(&[2.0, 4.0], &[0.25, 0.75]);
        let center = ProductDistribution::new(vec![c0.clone(), c1.clone()]).unwrap();
        let space = PartitionedSpace::new(vec![1, 1], Exponent::finite(1.0).unwrap()).unwrap();
        let dests = vec![c0.atoms().to_vec(), c1.atoms().to_vec()];
        let h = |_k: usize, x: &[f64]| x[0];
        let v = max_expectation_hyperrect(
            &center,
            &[0.0, 0.0],
            1.0,
            ObjectiveMode::Sum,
            h,
            &dests,
            &space,
        )
        .unwrap();
        let want = c0.expect(|x| x[0]) + c1.expect(|x| x[0]);
        assert!((v - want).abs() < 1e-9);
    }

    #[test]
    fn single_component_hyperrect_equals_multitransport() {
        // n = 1: one budget, cross-oracle agreement
        let c = dist(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3]);
        let center = ProductDistribution::new(vec![c.clone()]).unwrap();
        let space = line(2.0);
        let dests = vec![vec![0.0], vec![1.0], vec![3.0], vec![-2.0], vec![4.5]];
        let h = |x: &[f64]| (x[0] - 2.0).powi(2);
        for (p, radius) in [(1.0, 0.4), (2.0, 0.9)] {
            let hyper = max_expectation_hyperrect(
                &center,
                &[radius],
                p,
                ObjectiveMode::Sum,
                |_k, x| h(x),
                std::slice::from_ref(&dests),
                &space,
            )
            .unwrap();
            let costs = CostFamily::blockwise(&space, p).unwrap();
            let (multi, _) =
                max_expectation_multitransport(&c, &costs, &[radius.powf(p)], h, &dests).unwrap();
            assert!((hyper - multi).abs() < 1e-9, "p={p}: {hyper} vs {multi}");
        }
    }

    #[test]
    fn product_mode_rejects_negative_objective() {
        let c = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let center = ProductDistribution::new(vec![c.clone(), c.clone()]).unwrap();
        let space = PartitionedSpace::new(vec![1, 1], Exponent::finite(1.0).unwrap()).unwrap();
        let dests = vec![c.atoms().to_vec(), c.atoms().to_vec()];
        let err = max_expectation_hyperrect(
            &center,
            &[0.1, 0.1],
            1.0,
            ObjectiveMode::Product,
            |_k, x| x[0] - 0.5,
            &dests,
            &space,
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn glue_single_plan_is_identity() {
        let p = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let q = dist(&[0.0], &[1.0]);
        let (_, plan) = wasserstein_p(&p, &q, &line(1.0), 1.0).unwrap();
        let glued = glue_product_plans(std::slice::from_ref(&plan)).unwrap();
        assert_eq!(glued, plan);
    }

    #[test]
    fn glued_first_marginal_is_product_of_sources() {
        let p0 = dist(&[0.0, 1.0], &[0.3, 0.7]);
        let q0 = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let p1 = dist(&[0.0, 2.0], &[0.6, 0.4]);
        let q1 = dist(&[1.0], &[1.0]);
        let (_, plan0) = wasserstein_p(&p0, &q0, &line(1.0), 1.0).unwrap();
        let (_, plan1) = wasserstein_p(&p1, &q1, &line(1.0), 1.0).unwrap();
        let glued = glue_product_plans(&[plan0, plan1]).unwrap();
        // source marginal = p0 ⊗ p1 with first component fastest
        let want = [0.3 * 0.6, 0.7 * 0.6, 0.3 * 0.4, 0.7 * 0.4];
        for (got, want) in glued.source_marginal().iter().zip(want) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((glued.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_rejects_bad_exponent() {
        let p = dist(&[0.0], &[1.0]);
        assert!(wasserstein_p(&p, &p, &line(2.0), 0.5).is_err());
        assert!(wasserstein_p(&p, &p, &line(2.0), f64::INFINITY).is_err());
    }
}
