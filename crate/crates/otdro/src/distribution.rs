//! Discrete and product probability distributions, empirical constructions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::PartitionedSpace;

/// Tolerance on Σ weights = 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Neumaier-compensated sum, so the 1e-12 weight-sum check stays meaningful
/// for supports with ~10⁶ atoms (plain summation drifts past it).
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// Default cap on the atom count produced by [`expand_product`].
pub const DEFAULT_EXPANSION_CAP: usize = 1_000_000;

/// A finitely supported distribution: atoms in ℝ^d with probability weights.
///
/// Duplicate atoms are allowed and retained; merging is an explicit
/// normalization pass ([`DiscreteDistribution::merge_duplicates`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscrete", into = "RawDiscrete")]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDiscrete {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<RawDiscrete> for DiscreteDistribution {
    type Error = Error;
    fn try_from(raw: RawDiscrete) -> Result<Self> {
        DiscreteDistribution::new(raw.atoms, raw.weights)
    }
}

impl From<DiscreteDistribution> for RawDiscrete {
    fn from(d: DiscreteDistribution) -> Self {
        RawDiscrete {
            atoms: d.atoms,
            weights: d.weights,
        }
    }
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::input(
                "a discrete distribution needs at least one atom",
            ));
        }
        if atoms.len() != weights.len() {
            return Err(Error::input(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let d = atoms[0].len();
        if d == 0 {
            return Err(Error::input("atoms must have dimension >= 1"));
        }
        if atoms.iter().any(|a| a.len() != d) {
            return Err(Error::input("all atoms must share the same dimension"));
        }
        if atoms.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::input("atom coordinates must be finite"));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::input("weights must be finite and nonnegative"));
        }
        let total = compensated_sum(&weights);
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::input(format!("weights must sum to 1 (got {total})")));
        }
        Ok(DiscreteDistribution { atoms, weights })
    }

    /// Point mass at `x`.
    pub fn dirac(x: Vec<f64>) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty supports
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    /// Weighted mean Σ w_i a_i.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            for (mj, aj) in m.iter_mut().zip(a) {
                *mj += w * aj;
            }
        }
        m
    }

    /// Expectation of `h` under the distribution.
    pub fn expect(&self, mut h: impl FnMut(&[f64]) -> f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, &w)| w * h(a))
            .sum()
    }

    /// Merge bit-identical atoms, summing their weights. Atom order follows
    /// first occurrence, so the result is deterministic.
    pub fn merge_duplicates(&self) -> Self {
        let mut atoms: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            match atoms.iter().position(|b| b == a) {
                Some(i) => weights[i] += w,
                None => {
                    atoms.push(a.clone());
                    weights.push(w);
                }
            }
        }
        DiscreteDistribution { atoms, weights }
    }

    /// Largest pairwise product-metric distance between atoms.
    pub fn support_diameter(&self, space: &PartitionedSpace) -> Result<f64> {
        let mut diam = 0.0f64;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                diam = diam.max(space.product_metric(a, b)?);
            }
        }
        Ok(diam)
    }
}

/// An ordered product of per-component discrete distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProduct", into = "RawProduct")]
pub struct ProductDistribution {
    components: Vec<DiscreteDistribution>,
}

#[derive(Serialize, Deserialize)]
struct RawProduct {
    components: Vec<DiscreteDistribution>,
}

impl TryFrom<RawProduct> for ProductDistribution {
    type Error = Error;
    fn try_from(raw: RawProduct) -> Result<Self> {
        ProductDistribution::new(raw.components)
    }
}

impl From<ProductDistribution> for RawProduct {
    fn from(p: ProductDistribution) -> Self {
        RawProduct {
            components: p.components,
        }
    }
}

impl ProductDistribution {
    pub fn new(components: Vec<DiscreteDistribution>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::input(
                "a product distribution needs at least one component",
            ));
        }
        Ok(ProductDistribution { components })
    }

    pub fn components(&self) -> &[DiscreteDistribution] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &DiscreteDistribution {
        &self.components[k]
    }

    /// Block dimensions d₁…dₙ of the components.
    pub fn block_dims(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.dim()).collect()
    }

    /// Check the components against a partitioned space.
    pub fn check_space(&self, space: &PartitionedSpace) -> Result<()> {
        if self.block_dims() != space.block_dims() {
            return Err(Error::input(format!(
                "product components have dims {:?}, space expects {:?}",
                self.block_dims(),
                space.block_dims()
            )));
        }
        Ok(())
    }
}

/// N raw sample points together with the partition used to split them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSamples", into = "RawSamples")]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    space: PartitionedSpace,
}

#[derive(Serialize, Deserialize)]
struct RawSamples {
    points: Vec<Vec<f64>>,
    space: PartitionedSpace,
}

impl TryFrom<RawSamples> for SampleSet {
    type Error = Error;
    fn try_from(raw: RawSamples) -> Result<Self> {
        SampleSet::new(raw.points, raw.space)
    }
}

impl From<SampleSet> for RawSamples {
    fn from(s: SampleSet) -> Self {
        RawSamples {
            points: s.points,
            space: s.space,
        }
    }
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>, space: PartitionedSpace) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("sample set must contain at least one point"));
        }
        let d = space.total_dim();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::input(format!(
                "all sample points must have dimension {d}"
            )));
        }
        Ok(SampleSet { points, space })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn space(&self) -> &PartitionedSpace {
        &self.space
    }

    /// Block k of every sample, as points in ℝ^{d_k}.
    pub fn block_points(&self, k: usize) -> Vec<Vec<f64>> {
        let r = self.space.block_range(k);
        self.points.iter().map(|p| p[r.clone()].to_vec()).collect()
    }
}

/// Empirical distribution (1/N) Σ δ_{ξ^i}. Duplicate samples stay as
/// separate atoms so N remains explicit.
pub fn empirical(samples: &SampleSet) -> DiscreteDistribution {
    let n = samples.len();
    let w = 1.0 / n as f64;
    DiscreteDistribution {
        atoms: samples.points().to_vec(),
        weights: vec![w; n],
    }
}

/// Per-component empirical distributions of the sample blocks.
pub fn product_empirical(samples: &SampleSet) -> ProductDistribution {
    let n = samples.len();
    let w = 1.0 / n as f64;
    let components = (0..samples.space().n_blocks())
        .map(|k| DiscreteDistribution {
            atoms: samples.block_points(k),
            weights: vec![w; n],
        })
        .collect();
    ProductDistribution { components }
}

/// Expand a product distribution into a flat discrete distribution on the
/// joint space, with the default atom-count cap.
///
/// Atoms are enumerated with the first component varying fastest, matching
/// lexicographic ordering of the component supports.
pub fn expand_product(prod: &ProductDistribution) -> Result<DiscreteDistribution> {
    expand_product_capped(prod, DEFAULT_EXPANSION_CAP)
}

/// [`expand_product`] with an explicit cap on Π_k (atom count of component k).
pub fn expand_product_capped(
    prod: &ProductDistribution,
    cap: usize,
) -> Result<DiscreteDistribution> {
    let mut count: usize = 1;
    for c in prod.components() {
        count = count.saturating_mul(c.len());
    }
    if count > cap {
        return Err(Error::Resource(format!(
            "product expansion needs {count} atoms, cap is {cap}"
        )));
    }
    let dim: usize = prod.components().iter().map(|c| c.dim()).sum();
    let mut atoms = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut idx = vec![0usize; prod.n_components()];
    loop {
        let mut atom = Vec::with_capacity(dim);
        let mut w = 1.0;
        for (k, c) in prod.components().iter().enumerate() {
            atom.extend_from_slice(&c.atoms()[idx[k]]);
            w *= c.weights()[idx[k]];
        }
        atoms.push(atom);
        weights.push(w);
        // odometer increment, first component fastest
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < prod.component(k).len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == prod.n_components() {
                return DiscreteDistribution::new(atoms, weights);
            }
        }
    }
}

/// Marginalize a joint discrete distribution onto block `k` of a space.
pub fn marginal(
    dist: &DiscreteDistribution,
    space: &PartitionedSpace,
    k: usize,
) -> Result<DiscreteDistribution> {
    if dist.dim() != space.total_dim() {
        return Err(Error::input(
            "distribution dimension does not match the space",
        ));
    }
    let r = space.block_range(k);
    let atoms: Vec<Vec<f64>> = dist.atoms().iter().map(|a| a[r.clone()].to_vec()).collect();
    DiscreteDistribution::new(atoms, dist.weights().to_vec())
}
