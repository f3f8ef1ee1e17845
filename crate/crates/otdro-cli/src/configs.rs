//! Per-subcommand JSON configuration schemas. Unknown keys are rejected.

use serde::Deserialize;

use otdro::distribution::{DiscreteDistribution, ProductDistribution};
use otdro::space::Exponent;

fn default_p() -> f64 {
    1.0
}

fn default_q() -> Exponent {
    Exponent::finite(2.0).expect("2 is a valid exponent")
}

/// `radius` subcommand: monolithic radius plus per-component allocation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusConfig {
    pub n_samples: u64,
    pub beta: f64,
    pub support_diameter: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: Exponent,
    /// Component dimensions d₁…dₙ; the monolithic radius uses d = Σ d_k.
    pub dims: Vec<usize>,
}

/// `toy` subcommand (all fields optional; defaults are the reference case).
#[derive(Debug, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub mass1: Option<f64>,
    pub mass2: Option<f64>,
}

/// `coverage` subcommand. Radii are either explicit or produced by the
/// proportional allocation rule.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageCliConfig {
    pub truth: ProductDistribution,
    #[serde(default = "default_q")]
    pub q: Exponent,
    #[serde(default = "default_p")]
    pub p: f64,
    pub n_samples: usize,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub allocate: Option<AllocateSpec>,
}

/// Allocation inputs when the coverage radii come from the closed form.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocateSpec {
    pub beta: f64,
    pub support_diameter: f64,
}

/// `ot` subcommand: one exact transport solve.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtConfig {
    pub block_dims: Vec<usize>,
    #[serde(default = "default_q")]
    pub q: Exponent,
    #[serde(default = "default_p")]
    pub p: f64,
    pub source: DiscreteDistribution,
    pub dest: DiscreteDistribution,
}
