//! Dual-side evaluation and minimization for DRO over structured
//! optimal-transport ambiguity sets.
//!
//! For a reference distribution Q with atoms ζ^i and a budget vector 𝛜,
//! the multi-transport dual reads
//!
//!   inf_{λ ⪰ 0}  ⟨λ, 𝛜⟩ + Σ_i w_i · sup_ξ { h(ξ) − Σ_k λ_k c_k(ζ^i, ξ) },
//!
//! and the hyperrectangle dual decomposes per component:
//!
//!   inf_{λ ⪰ 0}  Σ_k (or Π_k)  Σ_i w_i · sup_ξ { h_k(ξ) + λ_k (ε_k^p − ρ_k(ζ_k^i, ξ)^p) }.
//!
//! Inner suprema are exhaustive enumerations over caller-supplied finite
//! candidate sets, so every dual value is exactly certifiable against the
//! primal LP oracle in [`crate::transport`]. Both evaluators are convex in
//! λ; the outer infimum is solved by derivative-free descent over a box.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::distribution::{DiscreteDistribution, ProductDistribution};
use crate::error::{Error, Result};
use crate::optim::{nested_golden_min, BoxMinimizer};
use crate::space::PartitionedSpace;
use crate::transport::{glue_product_plans, CostFamily, TransportPlan};

/// Default per-coordinate cap for the outer λ search when no primal bound
/// is available.
pub const DEFAULT_LAMBDA_CAP: f64 = 1e3;

/// Nonnegative dual multipliers λ₁…λₙ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaVector(Vec<f64>);

impl LambdaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("lambda vector must be nonempty"));
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::input(
                "lambda entries must be finite and nonnegative",
            ));
        }
        Ok(LambdaVector(values))
    }

    pub fn zeros(n: usize) -> Self {
        LambdaVector(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for LambdaVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LambdaVector::new(v)
    }
}

impl From<LambdaVector> for Vec<f64> {
    fn from(l: LambdaVector) -> Self {
        l.0
    }
}

/// Maximizing candidate for one reference atom's inner supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    /// Component index for decomposable objectives; absent for joint ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    pub atom_index: usize,
    pub maximizer: Vec<f64>,
    pub supremum: f64,
}

/// Outcome of an outer dual minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub lambda: LambdaVector,
    pub value: f64,
    /// Per-atom inner-supremum audit records at the returned λ.
    pub inner_records: Vec<InnerRecord>,
    /// True when the returned λ sits on the configured upper cap, meaning
    /// the cap may have bound the search.
    pub cap_active: bool,
}

type ObjFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One component's objective together with its finite candidate set for
/// the inner supremum.
pub struct ComponentObjective {
    pub h: ObjFn,
    pub candidates: Vec<Vec<f64>>,
}

impl ComponentObjective {
    pub fn new(
        h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        candidates: Vec<Vec<f64>>,
    ) -> Self {
        ComponentObjective {
            h: Box::new(h),
            candidates,
        }
    }
}

/// Objective description for the dual evaluators.
pub enum ObjectiveSpec {
    /// h(ξ) = Σ_k h_k(ξ_k).
    Sum(Vec<ComponentObjective>),
    /// h(ξ) = Π_k h_k(ξ_k) with every h_k ≥ 0 on its candidates.
    Product(Vec<ComponentObjective>),
    /// A joint objective with a candidate set of full points.
    General { h: ObjFn, candidates: Vec<Vec<f64>> },
}

impl ObjectiveSpec {
    pub fn general(
        h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        candidates: Vec<Vec<f64>>,
    ) -> Self {
        ObjectiveSpec::General {
            h: Box::new(h),
            candidates,
        }
    }

    fn components(&self) -> Option<&[ComponentObjective]> {
        match self {
            ObjectiveSpec::Sum(c) | ObjectiveSpec::Product(c) => Some(c),
            ObjectiveSpec::General { .. } => None,
        }
    }
}

fn contains_atom(candidates: &[Vec<f64>], atom: &[f64]) -> bool {
    candidates.iter().any(|c| c[..] == *atom)
}

/// One component's dual term Σ_i w_i sup_ξ { h_k(ξ) + λ (ε^p − ρ_k(ζ^i, ξ)^p) },
/// optionally collecting the per-atom maximizers.
#[allow(clippy::too_many_arguments)]
fn component_dual_term(
    center: &DiscreteDistribution,
    comp: &ComponentObjective,
    radius_pow: f64,
    p: f64,
    space: &PartitionedSpace,
    k: usize,
    lambda: f64,
    records: Option<&mut Vec<InnerRecord>>,
) -> Result<f64> {
    let mut recs = records;
    let mut total = 0.0;
    for (i, (atom, &w)) in center.atoms().iter().zip(center.weights()).enumerate() {
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = 0;
        for (m, cand) in comp.candidates.iter().enumerate() {
            let hv = (comp.h)(cand);
            if !hv.is_finite() {
                return Err(Error::input(format!(
                    "objective {k} is non-finite at candidate {cand:?}"
                )));
            }
            let cost = space.component_distance(atom, cand, k)?.powf(p);
            let v = hv + lambda * (radius_pow - cost);
            if v > best {
                best = v;
                best_idx = m;
            }
        }
        if let Some(recs) = recs.as_mut() {
            recs.push(InnerRecord {
                component: Some(k),
                atom_index: i,
                maximizer: comp.candidates[best_idx].clone(),
                supremum: best,
            });
        }
        total += w * best;
    }
    Ok(total)
}

fn hyperrect_dual_impl(
    center: &ProductDistribution,
    radii: &[f64],
    p: f64,
    space: &PartitionedSpace,
    spec: &ObjectiveSpec,
    lambda: &[f64],
    mut records: Option<&mut Vec<InnerRecord>>,
) -> Result<f64> {
    center.check_space(space)?;
    let n = center.n_components();
    let comps = spec.components().ok_or_else(|| {
        Error::input("hyperrectangle dual needs a sum- or product-decomposable objective")
    })?;
    if comps.len() != n || radii.len() != n || lambda.len() != n {
        return Err(Error::input(format!(
            "expected {n} components/radii/multipliers, got {}/{}/{}",
            comps.len(),
            radii.len(),
            lambda.len()
        )));
    }
    if lambda.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(Error::input(
            "lambda entries must be finite and nonnegative",
        ));
    }
    let product_mode = matches!(spec, ObjectiveSpec::Product(_));
    for (k, comp) in comps.iter().enumerate() {
        if comp.candidates.is_empty() {
            return Err(Error::input(format!("candidate set {k} is empty")));
        }
        for atom in center.component(k).atoms() {
            if !contains_atom(&comp.candidates, atom) {
                return Err(Error::precondition(format!(
                    "candidate set {k} must include the atoms of center component {k}"
                )));
            }
        }
        if product_mode {
            if let Some(c) = comp.candidates.iter().find(|c| (comp.h)(c) < 0.0) {
                return Err(Error::precondition(format!(
                    "product mode requires nonnegative objectives; h_{k}({c:?}) < 0"
                )));
            }
        }
    }

    let mut terms = Vec::with_capacity(n);
    for (k, comp) in comps.iter().enumerate() {
        let term = component_dual_term(
            center.component(k),
            comp,
            radii[k].powf(p),
            p,
            space,
            k,
            lambda[k],
            records.as_deref_mut(),
        )?;
        terms.push(term);
    }
    Ok(if product_mode {
        terms.iter().product()
    } else {
        terms.iter().sum()
    })
}

/// Dual value over a Wasserstein hyperrectangle at a fixed λ.
pub fn dual_value_hyperrect(
    center: &ProductDistribution,
    radii: &[f64],
    p: f64,
    space: &PartitionedSpace,
    spec: &ObjectiveSpec,
    lambda: &[f64],
) -> Result<f64> {
    hyperrect_dual_impl(center, radii, p, space, spec, lambda, None)
}

fn multitransport_dual_impl(
    center: &DiscreteDistribution,
    budgets: &[f64],
    costs: &CostFamily,
    spec: &ObjectiveSpec,
    lambda: &[f64],
    mut records: Option<&mut Vec<InnerRecord>>,
) -> Result<f64> {
    let ObjectiveSpec::General { h, candidates } = spec else {
        return Err(Error::input("multi-transport dual takes a joint objective"));
    };
    if candidates.is_empty() {
        return Err(Error::input("candidate set is empty"));
    }
    let n = costs.len();
    if budgets.len() != n || lambda.len() != n {
        return Err(Error::input(format!(
            "expected {n} budgets and multipliers, got {} and {}",
            budgets.len(),
            lambda.len()
        )));
    }
    if budgets.iter().any(|&b| !b.is_finite() || b < 0.0) {
        return Err(Error::input("budgets must be finite and nonnegative"));
    }
    if lambda.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(Error::input(
            "lambda entries must be finite and nonnegative",
        ));
    }
    for atom in center.atoms() {
        if !contains_atom(candidates, atom) {
            return Err(Error::precondition(
                "candidate set must include every center atom",
            ));
        }
    }

    let mut value: f64 = lambda.iter().zip(budgets).map(|(l, b)| l * b).sum();
    for (i, (atom, &w)) in center.atoms().iter().zip(center.weights()).enumerate() {
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = 0;
        for (m, cand) in candidates.iter().enumerate() {
            let hv = h(cand);
            if !hv.is_finite() {
                return Err(Error::input(format!("objective is non-finite at {cand:?}")));
            }
            let penalty: f64 = (0..n)
                .map(|k| lambda[k] * costs.evaluate(k, atom, cand))
                .sum();
            let v = hv - penalty;
            if v > best {
                best = v;
                best_idx = m;
            }
        }
        if let Some(recs) = records.as_deref_mut() {
            recs.push(InnerRecord {
                component: None,
                atom_index: i,
                maximizer: candidates[best_idx].clone(),
                supremum: best,
            });
        }
        value += w * best;
    }
    Ok(value)
}

/// Dual value over a multi-transport hyperrectangle at a fixed λ: the
/// budgets enter linearly, so callers pass *budgets* (for a 𝒯_p-style set
/// built from radii these are the radii raised to the p-th power).
pub fn dual_value_multitransport(
    center: &DiscreteDistribution,
    budgets: &[f64],
    costs: &CostFamily,
    spec: &ObjectiveSpec,
    lambda: &[f64],
) -> Result<f64> {
    multitransport_dual_impl(center, budgets, costs, spec, lambda, None)
}

/// Minimize a convex dual evaluator over { λ : lower ⪯ λ ⪯ upper_cap }.
///
/// For n ≤ 4 the infimum is found by nested golden-section (the partial
/// minimum over trailing coordinates of a convex function is convex in the
/// leading one), which is globally correct for convex evaluators — in
/// particular for the piecewise-affine duals whose kink canyons stall
/// plain per-coordinate descent. Larger n falls back to cyclic coordinate
/// descent with golden-section line searches, momentum and diagonal
/// directions, multistarted from the lower corner, 1.1 × lower, and the
/// box midpoint.
pub fn minimize_dual(
    evaluator: impl Fn(&[f64]) -> Result<f64>,
    n: usize,
    lower_bounds: &[f64],
    upper_cap: f64,
) -> Result<DualSolution> {
    if n == 0 || lower_bounds.len() != n {
        return Err(Error::input(format!(
            "expected {n} lower bounds, got {}",
            lower_bounds.len()
        )));
    }
    if lower_bounds.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(Error::input("lower bounds must be finite and nonnegative"));
    }
    if !upper_cap.is_finite() || lower_bounds.iter().any(|&l| l >= upper_cap) {
        return Err(Error::input(
            "upper cap must be finite and exceed every lower bound",
        ));
    }

    let poison: RefCell<Option<Error>> = RefCell::new(None);
    let f = |lambda: &[f64]| -> f64 {
        match evaluator(lambda) {
            Ok(v) if v.is_finite() => v,
            Ok(v) => {
                poison.borrow_mut().get_or_insert(Error::numerical(
                    "minimize_dual",
                    format!("evaluator returned {v} at lambda {lambda:?}"),
                ));
                f64::INFINITY
            }
            Err(e) => {
                poison.borrow_mut().get_or_insert(e);
                f64::INFINITY
            }
        }
    };

    let lower = lower_bounds.to_vec();
    let upper = vec![upper_cap; n];
    let (x, value) = if n <= 4 {
        nested_golden_min(&f, &lower, &upper)
    } else {
        let mut starts = vec![lower.clone()];
        let bumped: Vec<f64> = lower.iter().map(|&l| (1.1 * l).min(upper_cap)).collect();
        if bumped != lower {
            starts.push(bumped);
        }
        starts.push(lower.iter().map(|&l| (l + upper_cap) / 2.0).collect());
        let minimizer = BoxMinimizer::new(lower, upper);
        let outcome = minimizer.minimize(f, &starts);
        if !outcome.converged {
            return Err(Error::numerical(
                "minimize_dual",
                "descent cycle cap exhausted before convergence",
            ));
        }
        (outcome.x, outcome.value)
    };
    if let Some(err) = poison.into_inner() {
        return Err(err);
    }
    let cap_active = x.iter().any(|&l| l >= upper_cap * (1.0 - 1e-6));
    Ok(DualSolution {
        lambda: LambdaVector::new(x)?,
        value,
        inner_records: Vec::new(),
        cap_active,
    })
}

/// Minimize the hyperrectangle dual over λ ⪰ 0 and attach audit records.
///
/// The dual decomposes across components (a sum of per-component terms, or
/// a product of nonnegative ones), so the infimum splits into n independent
/// 1-D convex minimizations, each solved exactly by golden-section.
pub fn solve_dual_hyperrect(
    center: &ProductDistribution,
    radii: &[f64],
    p: f64,
    space: &PartitionedSpace,
    spec: &ObjectiveSpec,
    upper_cap: f64,
) -> Result<DualSolution> {
    let n = center.n_components();
    if !upper_cap.is_finite() || upper_cap <= 0.0 {
        return Err(Error::input("upper cap must be finite and positive"));
    }
    // validate the full instance once up front
    dual_value_hyperrect(center, radii, p, space, spec, &vec![0.0; n])?;
    let comps = spec.components().expect("validated above");

    let mut lambda = Vec::with_capacity(n);
    for (k, comp) in comps.iter().enumerate() {
        let term = |l: f64| {
            component_dual_term(
                center.component(k),
                comp,
                radii[k].powf(p),
                p,
                space,
                k,
                l,
                None,
            )
            .expect("validated above")
        };
        let (best_l, _) = crate::optim::golden_section(term, 0.0, upper_cap);
        lambda.push(best_l);
    }
    let cap_active = lambda.iter().any(|&l| l >= upper_cap * (1.0 - 1e-6));
    let mut records = Vec::new();
    let value = hyperrect_dual_impl(center, radii, p, space, spec, &lambda, Some(&mut records))?;
    Ok(DualSolution {
        lambda: LambdaVector::new(lambda)?,
        value,
        inner_records: records,
        cap_active,
    })
}

/// Minimize the multi-transport dual over λ ⪰ 0 and attach audit records.
pub fn solve_dual_multitransport(
    center: &DiscreteDistribution,
    budgets: &[f64],
    costs: &CostFamily,
    spec: &ObjectiveSpec,
    upper_cap: f64,
) -> Result<DualSolution> {
    let n = costs.len();
    // validate once, then search over a precomputed cost tensor so the
    // many evaluations inside the nested search stay cheap
    dual_value_multitransport(center, budgets, costs, spec, &vec![0.0; n])?;
    let ObjectiveSpec::General { h, candidates } = spec else {
        unreachable!("validated above");
    };
    let (nj, nm) = (center.len(), candidates.len());
    let h_vals: Vec<f64> = candidates.iter().map(|c| h(c)).collect();
    let mut cost = vec![0.0; n * nj * nm];
    for k in 0..n {
        for (j, atom) in center.atoms().iter().enumerate() {
            for (m, cand) in candidates.iter().enumerate() {
                cost[(k * nj + j) * nm + m] = costs.evaluate(k, atom, cand);
            }
        }
    }
    let weights = center.weights();
    let scratch = RefCell::new(vec![0.0f64; nm]);
    let eval = |lambda: &[f64]| -> Result<f64> {
        let mut value: f64 = lambda.iter().zip(budgets).map(|(l, b)| l * b).sum();
        let mut buf = scratch.borrow_mut();
        for j in 0..nj {
            buf.copy_from_slice(&h_vals);
            for (k, &l) in lambda.iter().enumerate() {
                let row = &cost[(k * nj + j) * nm..(k * nj + j) * nm + nm];
                for (v, c) in buf.iter_mut().zip(row) {
                    *v -= l * c;
                }
            }
            value += weights[j] * buf.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        }
        Ok(value)
    };
    let mut sol = minimize_dual(eval, n, &vec![0.0; n], upper_cap)?;
    let mut records = Vec::new();
    sol.value = multitransport_dual_impl(
        center,
        budgets,
        costs,
        spec,
        sol.lambda.as_slice(),
        Some(&mut records),
    )?;
    sol.inner_records = records;
    Ok(sol)
}

/// The two-point-per-component toy instance contrasting the ambiguity sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyImprovement {
    /// Worst-case mass at (0,0) over the Wasserstein hyperrectangle:
    /// (p₁ + mass₁)(p₂ + mass₂).
    pub value_hyperrect: f64,
    /// Worst-case mass at (0,0) over the multi-transport hyperrectangle:
    /// p₁p₂ + mass₁ + mass₂.
    pub value_multitransport: f64,
    pub plan_hyperrect: TransportPlan,
    pub plan_multitransport: TransportPlan,
}

/// Closed-form worst cases for the reference distribution
/// Q = (p₁δ₀ + (1−p₁)δ₁) ⊗ (p₂δ₀ + (1−p₂)δ₁) and h = 𝟙{(0,0)}, with
/// per-component mass budgets over unit-distance moves.
///
/// Requires mass_k ≤ 1 − p_k, mass₁ ≤ (1−p₁)p₂ and mass₂ ≤ p₁(1−p₂); the
/// displayed optimal plans (and hence the closed forms) are infeasible
/// outside that regime.
pub fn toy_strict_improvement(p1: f64, p2: f64, mass1: f64, mass2: f64) -> Result<ToyImprovement> {
    for (name, v) in [("p1", p1), ("p2", p2)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::input(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    for (name, m, cap) in [("mass1", mass1, 1.0 - p1), ("mass2", mass2, 1.0 - p2)] {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::input(format!("{name} must be nonnegative")));
        }
        if m > cap {
            return Err(Error::precondition(format!(
                "{name} = {m} exceeds 1 - p = {cap}"
            )));
        }
    }
    if mass1 > (1.0 - p1) * p2 {
        return Err(Error::precondition(format!(
            "mass1 = {mass1} exceeds the movable mass (1 - p1) p2 = {}",
            (1.0 - p1) * p2
        )));
    }
    if mass2 > p1 * (1.0 - p2) {
        return Err(Error::precondition(format!(
            "mass2 = {mass2} exceeds the movable mass p1 (1 - p2) = {}",
            p1 * (1.0 - p2)
        )));
    }

    // per-component plans: move mass_k from atom 1 to atom 0
    let component_plan = |p: f64, m: f64| TransportPlan {
        source: vec![vec![0.0], vec![1.0]],
        dest: vec![vec![0.0], vec![1.0]],
        pi: vec![vec![p, 0.0], vec![m, 1.0 - p - m]],
    };
    let plan_hyperrect =
        glue_product_plans(&[component_plan(p1, mass1), component_plan(p2, mass2)])?;

    // lexicographic atoms (0,0), (1,0), (0,1), (1,1); rows are sources
    let atoms = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
    ];
    let q10 = (1.0 - p1) * p2;
    let q01 = p1 * (1.0 - p2);
    let q11 = (1.0 - p1) * (1.0 - p2);
    let plan_multitransport = TransportPlan {
        source: atoms.clone(),
        dest: atoms,
        pi: vec![
            vec![p1 * p2, 0.0, 0.0, 0.0],
            vec![mass1, q10 - mass1, 0.0, 0.0],
            vec![mass2, 0.0, q01 - mass2, 0.0],
            vec![0.0, 0.0, 0.0, q11],
        ],
    };

    Ok(ToyImprovement {
        value_hyperrect: (p1 + mass1) * (p2 + mass2),
        value_multitransport: p1 * p2 + (mass1 + mass2),
        plan_hyperrect,
        plan_multitransport,
    })
}

/// Parameters of the randomized strong-duality sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_source_atoms: usize,
    pub max_candidates: usize,
    pub max_components: usize,
    pub tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            instances: 50,
            seed: 0xD0A1,
            max_source_atoms: 6,
            max_candidates: 8,
            max_components: 3,
            tolerance: 1e-6,
        }
    }
}

/// Outcome of the randomized strong-duality sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub instances: usize,
    pub max_gap: f64,
    pub mean_gap: f64,
    /// Index of the instance attaining `max_gap`.
    pub worst_instance: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Randomized certification of zero duality gap on finite instances: draw
/// random budget-constrained transport problems (table-backed objectives,
/// candidate sets containing the sources), solve the primal LP and minimize
/// the dual, and record the absolute gaps.
pub fn strong_duality_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    use rand::Rng;
    use rand::SeedableRng;

    if cfg.instances == 0 {
        return Err(Error::input("sweep needs at least one instance"));
    }
    if cfg.max_source_atoms < 2 || cfg.max_candidates < cfg.max_source_atoms {
        return Err(Error::input(
            "need max_source_atoms >= 2 and max_candidates >= max_source_atoms",
        ));
    }
    if !(1..=4).contains(&cfg.max_components) {
        return Err(Error::input("max_components must lie in 1..=4"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_gap = 0.0f64;
    let mut gap_sum = 0.0f64;
    let mut worst = 0usize;
    for instance in 0..cfg.instances {
        let n = rng.gen_range(1..=cfg.max_components);
        let p = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
        let space = PartitionedSpace::new(vec![1; n], crate::space::Exponent::finite(2.0)?)?;

        let n_src = rng.gen_range(2..=cfg.max_source_atoms);
        let mut atoms: Vec<Vec<f64>> = (0..n_src)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        atoms.dedup();
        let raw: Vec<f64> = (0..atoms.len()).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let source = DiscreteDistribution::new(atoms.clone(), weights)?;

        let mut candidates = atoms;
        let target = rng.gen_range(candidates.len().max(4)..=cfg.max_candidates);
        while candidates.len() < target {
            candidates.push((0..n).map(|_| rng.gen_range(-1.5..1.5)).collect());
        }
        let h_table: Vec<(Vec<f64>, f64)> = candidates
            .iter()
            .map(|c| (c.clone(), rng.gen_range(-1.0..1.0)))
            .collect();
        let budgets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.8)).collect();

        let lookup = move |table: &[(Vec<f64>, f64)], x: &[f64]| -> f64 {
            table
                .iter()
                .find(|(pt, _)| pt[..] == *x)
                .map(|(_, v)| *v)
                .expect("objective evaluated off its candidate table")
        };
        let costs = CostFamily::blockwise(&space, p)?;
        let table = h_table.clone();
        let (primal, _) = crate::transport::max_expectation_multitransport(
            &source,
            &costs,
            &budgets,
            |x| lookup(&table, x),
            &candidates,
        )?;
        let table = h_table.clone();
        let spec = ObjectiveSpec::general(move |x: &[f64]| lookup(&table, x), candidates);
        let dual = solve_dual_multitransport(&source, &budgets, &costs, &spec, DEFAULT_LAMBDA_CAP)?;
        let gap = (dual.value - primal).abs();
        gap_sum += gap;
        if gap > max_gap {
            max_gap = gap;
            worst = instance;
        }
    }
    Ok(SweepReport {
        instances: cfg.instances,
        max_gap,
        mean_gap: gap_sum / cfg.instances as f64,
        worst_instance: worst,
        tolerance: cfg.tolerance,
        pass: max_gap <= cfg.tolerance,
    })
}
