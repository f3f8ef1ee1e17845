//! Monte Carlo validation of the probabilistic coverage guarantees.
//!
//! The ground truth is a discrete product distribution, so every
//! Wasserstein distance in the coverage events is an exact LP solve. For
//! each trial, N i.i.d. joint samples produce per-component empirical
//! distributions; the hyperrectangle covers the truth when every component
//! distance W_p(P_k^N, P_k) stays within its radius ε_k, and the enclosing
//! ball covers it when the joint distance between the product empirical
//! and the truth stays within the enclosing radius.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::enclosing_ball_radius;
use crate::distribution::{expand_product, DiscreteDistribution, ProductDistribution};
use crate::error::{Error, Result};
use crate::space::{Exponent, PartitionedSpace};
use crate::transport::wasserstein_p;

/// How the component samplers are tied together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Components drawn independently (the product-measure hypothesis).
    Independent,
    /// One shared uniform drives every component's inverse CDF. This
    /// deliberately breaks independence and serves as the negative control
    /// for the independence probe.
    Comonotone,
}

/// Configuration of a coverage Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub truth: ProductDistribution,
    pub q: Exponent,
    pub p: f64,
    pub n_samples: usize,
    /// Per-component radii ε_k (explicit, or produced by the allocation rule).
    pub radii: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.truth.n_components();
        if self.radii.len() != n {
            return Err(Error::input(format!(
                "expected {n} radii, got {}",
                self.radii.len()
            )));
        }
        if self.radii.iter().any(|&r| !r.is_finite() || r < 0.0) {
            return Err(Error::input("radii must be finite and nonnegative"));
        }
        if !self.p.is_finite() || self.p < 1.0 {
            return Err(Error::input("p must be finite and >= 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::input("n_samples must be >= 1"));
        }
        if self.trials < 100 {
            return Err(Error::input("statistical assertions need trials >= 100"));
        }
        for (k, c) in self.truth.components().iter().enumerate() {
            if c.len() < 2 {
                return Err(Error::input(format!(
                    "truth component {k} needs >= 2 atoms for a nondegenerate test"
                )));
            }
        }
        Ok(())
    }
}

/// Distances and coverage indicators for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDistances {
    pub component_distances: Vec<f64>,
    pub joint_distance: f64,
    pub hyperrect_covered: bool,
    pub ball_covered: bool,
}

/// Aggregated coverage frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Fraction of trials with every component within its radius.
    pub hyperrect_coverage: f64,
    /// Fraction of trials with the joint distance within the enclosing radius.
    pub ball_coverage: f64,
    pub component_coverage: Vec<f64>,
    pub enclosing_radius: f64,
    pub trials: usize,
    pub per_trial: Vec<TrialDistances>,
}

/// Draw one component index by inverting the weight CDF at `u`.
fn invert_cdf(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Per-component empirical distribution of `n` draws from a discrete truth,
/// kept on the truth's support (duplicate atoms merged into counts).
fn sampled_empirical(
    truth: &DiscreteDistribution,
    counts: &[usize],
    n: usize,
) -> DiscreteDistribution {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (atom, &c) in truth.atoms().iter().zip(counts) {
        if c > 0 {
            atoms.push(atom.clone());
            weights.push(c as f64 / n as f64);
        }
    }
    DiscreteDistribution::new(atoms, weights).expect("counts sum to n")
}

struct TrialMachinery {
    component_spaces: Vec<PartitionedSpace>,
    joint_space: PartitionedSpace,
    truth_joint: DiscreteDistribution,
}

impl TrialMachinery {
    fn new(truth: &ProductDistribution, q: Exponent) -> Result<Self> {
        let component_spaces = truth
            .components()
            .iter()
            .map(|c| PartitionedSpace::unpartitioned(c.dim(), q))
            .collect::<Result<Vec<_>>>()?;
        let joint_space = PartitionedSpace::new(truth.block_dims(), q)?;
        let truth_joint = expand_product(truth)?.merge_duplicates();
        Ok(TrialMachinery {
            component_spaces,
            joint_space,
            truth_joint,
        })
    }

    /// Sample one trial and return the per-component and joint distances.
    fn run_trial(
        &self,
        truth: &ProductDistribution,
        n_samples: usize,
        p: f64,
        coupling: Coupling,
        seed: u64,
    ) -> Result<(Vec<f64>, f64)> {
        let n_comp = truth.n_components();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts: Vec<Vec<usize>> = truth
            .components()
            .iter()
            .map(|c| vec![0usize; c.len()])
            .collect();
        for _ in 0..n_samples {
            match coupling {
                Coupling::Independent => {
                    for (k, c) in truth.components().iter().enumerate() {
                        let u: f64 = rng.gen();
                        counts[k][invert_cdf(c.weights(), u)] += 1;
                    }
                }
                Coupling::Comonotone => {
                    let u: f64 = rng.gen();
                    for (k, c) in truth.components().iter().enumerate() {
                        counts[k][invert_cdf(c.weights(), u)] += 1;
                    }
                }
            }
        }
        let empiricals: Vec<DiscreteDistribution> = (0..n_comp)
            .map(|k| sampled_empirical(truth.component(k), &counts[k], n_samples))
            .collect();
        let mut component_distances = Vec::with_capacity(n_comp);
        for (k, emp) in empiricals.iter().enumerate() {
            let (d, _) = wasserstein_p(emp, truth.component(k), &self.component_spaces[k], p)?;
            component_distances.push(d);
        }
        let product_empirical = ProductDistribution::new(empiricals)?;
        let joint_empirical = expand_product(&product_empirical)?.merge_duplicates();
        let (joint_distance, _) =
            wasserstein_p(&joint_empirical, &self.truth_joint, &self.joint_space, p)?;
        Ok((component_distances, joint_distance))
    }
}

/// Estimate the hyperrectangle, ball, and per-component coverage
/// frequencies over `cfg.trials` independent sample draws. Trial t uses
/// seed `cfg.seed + t`; results are deterministic given (config, seed).
pub fn coverage_mc(cfg: &CoverageConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let machinery = TrialMachinery::new(&cfg.truth, cfg.q)?;
    let enclosing_radius = enclosing_ball_radius(&cfg.radii, cfg.p, cfg.q)?;

    let per_trial: Vec<TrialDistances> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let (component_distances, joint_distance) = machinery
                .run_trial(
                    &cfg.truth,
                    cfg.n_samples,
                    cfg.p,
                    Coupling::Independent,
                    cfg.seed.wrapping_add(t as u64),
                )
                .expect("trial machinery validated upfront");
            let hyperrect_covered = component_distances
                .iter()
                .zip(&cfg.radii)
                .all(|(d, r)| d <= r);
            let ball_covered = joint_distance <= enclosing_radius;
            TrialDistances {
                component_distances,
                joint_distance,
                hyperrect_covered,
                ball_covered,
            }
        })
        .collect();

    let t = cfg.trials as f64;
    let n_comp = cfg.truth.n_components();
    let component_coverage: Vec<f64> = (0..n_comp)
        .map(|k| {
            per_trial
                .iter()
                .filter(|tr| tr.component_distances[k] <= cfg.radii[k])
                .count() as f64
                / t
        })
        .collect();
    Ok(CoverageReport {
        hyperrect_coverage: per_trial.iter().filter(|tr| tr.hyperrect_covered).count() as f64 / t,
        ball_coverage: per_trial.iter().filter(|tr| tr.ball_covered).count() as f64 / t,
        component_coverage,
        enclosing_radius,
        trials: cfg.trials,
        per_trial,
    })
}

/// Outcome of the independence probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Frequency of the joint event {all components within their radii}.
    pub joint_freq: f64,
    pub marginal_freqs: Vec<f64>,
    pub product_of_marginals: f64,
    /// joint_freq − Π marginal_freqs.
    pub gap: f64,
    /// Monte Carlo standard error of the gap (delta method; the covariance
    /// between the joint and marginal estimates is ignored, which only
    /// enlarges the error under the independence hypothesis).
    pub std_err: f64,
}

/// Probe whether the per-component coverage events are independent: under
/// a product truth with independent sampling, the joint frequency matches
/// the product of marginal frequencies up to Monte Carlo error; comonotone
/// sampling breaks this.
#[allow(clippy::too_many_arguments)]
pub fn independence_probe(
    truth: &ProductDistribution,
    n_samples: usize,
    radii: &[f64],
    p: f64,
    q: Exponent,
    trials: usize,
    seed: u64,
    coupling: Coupling,
) -> Result<ProbeReport> {
    let n_comp = truth.n_components();
    if radii.len() != n_comp {
        return Err(Error::input(format!(
            "expected {n_comp} radii, got {}",
            radii.len()
        )));
    }
    if trials == 0 || n_samples == 0 {
        return Err(Error::input("trials and n_samples must be >= 1"));
    }
    let machinery = TrialMachinery::new(truth, q)?;

    let events: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (dists, _) = machinery
                .run_trial(truth, n_samples, p, coupling, seed.wrapping_add(t as u64))
                .expect("trial machinery validated upfront");
            dists.iter().zip(radii).map(|(d, r)| d <= r).collect()
        })
        .collect();

    let t = trials as f64;
    let marginal_freqs: Vec<f64> = (0..n_comp)
        .map(|k| events.iter().filter(|e| e[k]).count() as f64 / t)
        .collect();
    let joint_freq = events.iter().filter(|e| e.iter().all(|&b| b)).count() as f64 / t;
    let product_of_marginals: f64 = marginal_freqs.iter().product();

    let var_joint = joint_freq * (1.0 - joint_freq) / t;
    let var_product: f64 = (0..n_comp)
        .map(|k| {
            let others: f64 = marginal_freqs
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != k)
                .map(|(_, f)| f)
                .product();
            let fk = marginal_freqs[k];
            others * others * fk * (1.0 - fk) / t
        })
        .sum();
    Ok(ProbeReport {
        joint_freq,
        marginal_freqs: marginal_freqs.clone(),
        product_of_marginals,
        gap: joint_freq - product_of_marginals,
        std_err: (var_joint + var_product).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli_component(p1: f64, at: f64) -> DiscreteDistribution {
        DiscreteDistribution::new(vec![vec![0.0], vec![at]], vec![1.0 - p1, p1]).unwrap()
    }

    fn two_component_truth() -> ProductDistribution {
        ProductDistribution::new(vec![
            bernoulli_component(0.3, 1.0),
            bernoulli_component(0.6, 2.0),
        ])
        .unwrap()
    }

    fn config(radii: Vec<f64>, trials: usize, seed: u64) -> CoverageConfig {
        CoverageConfig {
            truth: two_component_truth(),
            q: Exponent::finite(2.0).unwrap(),
            p: 1.0,
            n_samples: 12,
            radii,
            trials,
            seed,
        }
    }

    #[test]
    fn diameter_radii_cover_everything() {
        // radii at the component diameters dominate any empirical deviation
        let report = coverage_mc(&config(vec![1.0, 2.0], 150, 42)).unwrap();
        assert_eq!(report.hyperrect_coverage, 1.0);
        assert_eq!(report.ball_coverage, 1.0);
        assert!(report.component_coverage.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn zero_radii_leave_coverage_below_one() {
        // with 12 draws of a Bernoulli(0.3), the empirical rarely equals the
        // truth exactly, so zero radii cannot cover every trial
        let report = coverage_mc(&config(vec![0.0, 0.0], 200, 7)).unwrap();
        assert!(report.hyperrect_coverage < 1.0);
    }

    #[test]
    fn ball_coverage_dominates_hyperrect_coverage() {
        // the enclosing ball contains the hyperrectangle, so its coverage
        // event is implied by the hyperrectangle's
        for radii in [vec![0.05, 0.05], vec![0.1, 0.15], vec![0.2, 0.1]] {
            let report = coverage_mc(&config(radii, 300, 11)).unwrap();
            assert!(report.ball_coverage >= report.hyperrect_coverage);
            for tr in &report.per_trial {
                assert!(!tr.hyperrect_covered || tr.ball_covered);
            }
        }
    }

    #[test]
    fn coverage_monotone_in_radii() {
        let lo = coverage_mc(&config(vec![0.05, 0.05], 300, 3)).unwrap();
        let hi = coverage_mc(&config(vec![0.10, 0.08], 300, 3)).unwrap();
        assert!(hi.hyperrect_coverage >= lo.hyperrect_coverage);
        for k in 0..2 {
            assert!(hi.component_coverage[k] >= lo.component_coverage[k]);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let a = coverage_mc(&config(vec![0.1, 0.1], 120, 9)).unwrap();
        let b = coverage_mc(&config(vec![0.1, 0.1], 120, 9)).unwrap();
        assert_eq!(a, b);
        let c = coverage_mc(&config(vec![0.1, 0.1], 120, 10)).unwrap();
        assert_ne!(a.per_trial, c.per_trial);
    }

    #[test]
    fn hyperrect_coverage_is_product_of_marginals_up_to_mc_error() {
        let report = coverage_mc(&config(vec![0.08, 0.08], 4000, 21)).unwrap();
        let prod: f64 = report.component_coverage.iter().product();
        // 4 sigma of a binomial frequency over 4000 trials
        let se = (prod * (1.0 - prod) / 4000.0).sqrt().max(1e-3);
        assert!(
            (report.hyperrect_coverage - prod).abs() <= 4.0 * se,
            "joint {} vs product {prod}",
            report.hyperrect_coverage
        );
    }

    #[test]
    fn single_component_probe_gap_is_exactly_zero() {
        let truth = ProductDistribution::new(vec![bernoulli_component(0.4, 1.0)]).unwrap();
        let probe = independence_probe(
            &truth,
            10,
            &[0.05],
            1.0,
            Exponent::finite(2.0).unwrap(),
            200,
            5,
            Coupling::Independent,
        )
        .unwrap();
        assert_eq!(probe.gap, 0.0);
    }

    #[test]
    fn independent_truth_probe_gap_within_mc_error() {
        // Bernoulli(0.5) components with N = 16: radius 1/16 puts the
        // per-component event {W_1 <= 1/16} near its median (~0.55)
        let truth = ProductDistribution::new(vec![
            bernoulli_component(0.5, 1.0),
            bernoulli_component(0.5, 1.0),
        ])
        .unwrap();
        let probe = independence_probe(
            &truth,
            16,
            &[1.0 / 16.0, 1.0 / 16.0],
            1.0,
            Exponent::finite(2.0).unwrap(),
            10_000,
            1234,
            Coupling::Independent,
        )
        .unwrap();
        assert!(
            probe.gap.abs() <= 4.0 * probe.std_err,
            "independent gap {} exceeds 4 SE {}",
            probe.gap,
            4.0 * probe.std_err
        );
    }

    #[test]
    fn comonotone_control_breaks_independence() {
        // one shared uniform drives both components, so the coverage
        // events coincide and the joint frequency far exceeds the product
        let truth = ProductDistribution::new(vec![
            bernoulli_component(0.5, 1.0),
            bernoulli_component(0.5, 1.0),
        ])
        .unwrap();
        let probe = independence_probe(
            &truth,
            16,
            &[1.0 / 16.0, 1.0 / 16.0],
            1.0,
            Exponent::finite(2.0).unwrap(),
            10_000,
            1234,
            Coupling::Comonotone,
        )
        .unwrap();
        assert!(
            probe.gap.abs() > 4.0 * probe.std_err,
            "comonotone gap {} not detected at 4 SE {}",
            probe.gap,
            4.0 * probe.std_err
        );
        assert!(
            probe.gap > 0.1,
            "comonotone coupling should inflate the joint frequency"
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(vec![0.1, 0.1], 120, 0);
        cfg.trials = 50;
        assert!(cfg.validate().is_err());
        let mut cfg = config(vec![0.1, 0.1], 120, 0);
        cfg.radii = vec![0.1];
        assert!(cfg.validate().is_err());
        let degenerate = ProductDistribution::new(vec![
            DiscreteDistribution::dirac(vec![0.0]).unwrap(),
            bernoulli_component(0.5, 1.0),
        ])
        .unwrap();
        let cfg = CoverageConfig {
            truth: degenerate,
            q: Exponent::finite(2.0).unwrap(),
            p: 1.0,
            n_samples: 5,
            radii: vec![0.1, 0.1],
            trials: 150,
            seed: 0,
        };
        assert!(cfg.validate().is_err());
    }
}
