//! Recharging-station placement for two independently deployed drones.
//!
//! Drones can stop to recharge only inside the nonnegative orthant Θ; the
//! station location x is chosen to minimize the worst case, over an
//! optimal-transport ambiguity set built from N position samples, of
//!
//!   E[ 𝟙_{Θ×Θ}(ξ) (‖x − ξ₁‖² + ‖x − ξ₂‖²) ].
//!
//! Dualizing and eliminating the inner variables in closed form leaves a
//! convex function of (x, λ). For one sample block ξ̂ and multiplier λ > 1,
//!
//!   sup_{ξ ⪰ 0} { ‖x − ξ‖² − λ‖ξ̂ − ξ‖² }
//!     = ‖min(2(x − λξ̂), 0)‖² / (4(λ − 1)) + ‖x‖² − λ‖ξ̂‖²,
//!
//! where min(·, 0) is the componentwise residual of the projection onto the
//! nonnegative orthant. The per-component (hyperrectangle) program averages
//! this over all N² index pairs; the monolithic-ball program over the N
//! diagonal pairs with a single multiplier.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::SampleSet;
use crate::error::{Error, Result};
use crate::optim::BoxMinimizer;
use crate::space::{Exponent, PartitionedSpace};

/// Strict offset above the λ = 1 pole.
pub const LAMBDA_FLOOR: f64 = 1.0 + 1e-6;
/// Default per-coordinate cap for the multipliers.
pub const DEFAULT_LAMBDA_CAP: f64 = 1e3;

/// An axis-aligned box in ℝ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Box2 {
    pub fn new(lower: [f64; 2], upper: [f64; 2]) -> Result<Self> {
        let b = Box2 { lower, upper };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        for j in 0..2 {
            if !self.lower[j].is_finite() || !self.upper[j].is_finite() {
                return Err(Error::input("box corners must be finite"));
            }
            if self.lower[j] >= self.upper[j] {
                return Err(Error::input(format!(
                    "box is degenerate along axis {j}: [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..2).all(|j| self.lower[j] <= x[j] && x[j] <= self.upper[j])
    }

    pub fn center(&self) -> [f64; 2] {
        [
            (self.lower[0] + self.upper[0]) / 2.0,
            (self.lower[1] + self.upper[1]) / 2.0,
        ]
    }

    pub fn widths(&self) -> [f64; 2] {
        [self.upper[0] - self.lower[0], self.upper[1] - self.lower[1]]
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        [
            self.lower[0] + u * (self.upper[0] - self.lower[0]),
            self.lower[1] + v * (self.upper[1] - self.lower[1]),
        ]
    }

    /// max_{x in box} ‖x‖₂².
    fn max_norm_sq(&self) -> f64 {
        (0..2)
            .map(|j| self.lower[j].powi(2).max(self.upper[j].powi(2)))
            .sum()
    }
}

/// Configuration of the placement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneConfig {
    /// Recharging-side region Θ₁ (inside the nonnegative orthant).
    pub theta1: Box2,
    /// Complementary region Θ₂ (inside the nonpositive orthant).
    pub theta2: Box2,
    /// Mixture weight w on Θ₁; each drone ~ w·U(Θ₁) + (1−w)·U(Θ₂).
    pub weight_theta1: f64,
    /// Admissible station locations 𝒳.
    pub decision_box: Box2,
    /// Per-component transport radii 𝜺 = (ε₁, ε₂); the monolithic ball uses
    /// radius ‖𝜺‖₂. The dual programs consume the squared radii.
    pub budgets: [f64; 2],
    pub n_samples: usize,
    pub trials: usize,
    pub seed: u64,
    /// Upper cap for the golden-section search over each multiplier.
    pub lambda_cap: f64,
}

impl Default for DroneConfig {
    fn default() -> Self {
        DroneConfig {
            theta1: Box2 {
                lower: [0.0, 0.0],
                upper: [2.0, 2.0],
            },
            theta2: Box2 {
                lower: [-20.0, -22.0],
                upper: [0.0, 0.0],
            },
            weight_theta1: 0.1,
            decision_box: Box2 {
                lower: [0.0, 0.0],
                upper: [5.0, 5.0],
            },
            budgets: [0.01, 0.01],
            n_samples: 50,
            trials: 30,
            seed: 20240,
            lambda_cap: DEFAULT_LAMBDA_CAP,
        }
    }
}

impl DroneConfig {
    pub fn validate(&self) -> Result<()> {
        self.theta1.validate()?;
        self.theta2.validate()?;
        self.decision_box.validate()?;
        if !(self.weight_theta1 > 0.0 && self.weight_theta1 < 1.0) {
            return Err(Error::input(
                "weight_theta1 must lie strictly inside (0, 1)",
            ));
        }
        if self.budgets.iter().any(|&e| !e.is_finite() || e <= 0.0) {
            return Err(Error::input("budgets must be strictly positive"));
        }
        if self.n_samples == 0 || self.trials == 0 {
            return Err(Error::input("n_samples and trials must be >= 1"));
        }
        if self.lambda_cap <= LAMBDA_FLOOR {
            return Err(Error::input("lambda_cap must exceed the λ > 1 floor"));
        }
        // the closed-form true optimum below needs Θ₁ in the recharging
        // orthant and Θ₂ outside of it (up to its boundary)
        if self.theta1.lower.iter().any(|&v| v < 0.0) {
            return Err(Error::input("theta1 must lie in the nonnegative orthant"));
        }
        if self.theta2.upper.iter().any(|&v| v > 0.0) {
            return Err(Error::input("theta2 must lie in the nonpositive orthant"));
        }
        Ok(())
    }

    /// Radius of the monolithic Wasserstein ball, ‖𝜺‖₂.
    pub fn ball_radius(&self) -> f64 {
        self.budgets.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// The true optimal station location: the conditional blockwise mean of
    /// U(Θ₁) (the indicator is active only when both drones lie in Θ₁).
    pub fn true_optimum(&self) -> [f64; 2] {
        self.theta1.center()
    }

    /// The true optimal objective value: activation probability w² times
    /// the summed per-coordinate variances of U(Θ₁) for both drones.
    pub fn true_value(&self) -> f64 {
        let w = self.weight_theta1;
        let widths = self.theta1.widths();
        let var_sum: f64 = widths.iter().map(|wd| wd * wd / 12.0).sum();
        w * w * 2.0 * var_sum
    }
}

/// Draw the N drone-position samples for one trial. Each sample is a point
/// in ℝ⁴ (two 2-D blocks, one per drone), drawn i.i.d. from the mixture.
///
/// The generator is a seeded counter-based stream cipher (ChaCha8), so the
/// output is identical across runs and platforms for a fixed `trial_seed`.
/// Draw order per sample and drone: mixture coin, then the two coordinates.
pub fn sample_positions(cfg: &DroneConfig, trial_seed: u64) -> Result<SampleSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let mut points = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let mut point = Vec::with_capacity(4);
        for _ in 0..2 {
            let coin: f64 = rng.gen();
            let block = if coin < cfg.weight_theta1 {
                cfg.theta1.sample(&mut rng)
            } else {
                cfg.theta2.sample(&mut rng)
            };
            point.extend_from_slice(&block);
        }
        points.push(point);
    }
    let space = PartitionedSpace::new(vec![2, 2], Exponent::finite(2.0)?)?;
    SampleSet::new(points, space)
}

/// min_{ν ⪰ 0} ‖r − ν‖² = Σ_j min(r_j, 0)²: the squared distance from `r`
/// to the nonnegative orthant, eliminating the slack vector in closed form.
pub fn dist_sq_to_nonneg_orthant(r: &[f64]) -> f64 {
    r.iter().map(|&v| v.min(0.0) * v.min(0.0)).sum()
}

/// sup_{ξ ⪰ 0} { ‖x − ξ‖² − λ‖ξ̂ − ξ‖² } for one drone block, λ > 1.
fn block_sup(x: &[f64; 2], lambda: f64, xi: &[f64; 2]) -> f64 {
    let r = [2.0 * (x[0] - lambda * xi[0]), 2.0 * (x[1] - lambda * xi[1])];
    dist_sq_to_nonneg_orthant(&r) / (4.0 * (lambda - 1.0)) + (x[0] * x[0] + x[1] * x[1])
        - lambda * (xi[0] * xi[0] + xi[1] * xi[1])
}

/// Samples split into their two drone blocks.
struct Blocks {
    b1: Vec<[f64; 2]>,
    b2: Vec<[f64; 2]>,
}

impl Blocks {
    fn from_samples(samples: &SampleSet) -> Result<Self> {
        if samples.space().block_dims() != [2, 2] {
            return Err(Error::input(
                "drone samples must live in ℝ⁴ with partition (2, 2)",
            ));
        }
        let to_pairs =
            |pts: Vec<Vec<f64>>| pts.into_iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>();
        Ok(Blocks {
            b1: to_pairs(samples.block_points(0)),
            b2: to_pairs(samples.block_points(1)),
        })
    }

    fn len(&self) -> usize {
        self.b1.len()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda <= 1.0 || lambda.is_nan() {
        return Err(Error::Precondition(format!(
            "multiplier must exceed 1, got {lambda}"
        )));
    }
    Ok(())
}

/// The reduced dual objective of the per-component (hyperrectangle) program:
///
///   F(x, λ) = λ₁ε₁² + λ₂ε₂² + (1/N²) Σ_{(i₁,i₂)} max(0, φ₁^{i₁} + φ₂^{i₂}),
///
/// jointly convex in (x, λ) on 𝒳 × (1, ∞)². Increasing ε_k² at fixed (x, λ)
/// raises the value by exactly λ_k · Δ(ε_k²).
pub fn hyperrect_objective(
    x: &[f64; 2],
    lambdas: &[f64; 2],
    samples: &SampleSet,
    radii: &[f64; 2],
) -> Result<f64> {
    check_lambda(lambdas[0])?;
    check_lambda(lambdas[1])?;
    let blocks = Blocks::from_samples(samples)?;
    Ok(hyperrect_objective_masked(x, lambdas, &blocks, radii, None))
}

fn hyperrect_objective_masked(
    x: &[f64; 2],
    lambdas: &[f64; 2],
    blocks: &Blocks,
    radii: &[f64; 2],
    keep: Option<&[bool]>,
) -> f64 {
    let n = blocks.len();
    let phi1: Vec<f64> = blocks
        .b1
        .iter()
        .map(|xi| block_sup(x, lambdas[0], xi))
        .collect();
    let phi2: Vec<f64> = blocks
        .b2
        .iter()
        .map(|xi| block_sup(x, lambdas[1], xi))
        .collect();
    let mut acc = 0.0;
    for (i1, &a) in phi1.iter().enumerate() {
        for (i2, &b) in phi2.iter().enumerate() {
            if keep.is_none_or(|k| k[i1 * n + i2]) {
                let s = a + b;
                if s > 0.0 {
                    acc += s;
                }
            }
        }
    }
    lambdas[0] * radii[0] * radii[0] + lambdas[1] * radii[1] * radii[1] + acc / (n * n) as f64
}

/// The reduced dual objective of the monolithic-ball program: one
/// multiplier, diagonal sample pairs, budget λ‖𝜺‖².
pub fn ball_objective(x: &[f64; 2], lambda: f64, samples: &SampleSet, radius: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let blocks = Blocks::from_samples(samples)?;
    Ok(ball_objective_inner(x, lambda, &blocks, radius))
}

fn ball_objective_inner(x: &[f64; 2], lambda: f64, blocks: &Blocks, radius: f64) -> f64 {
    let n = blocks.len();
    let mut acc = 0.0;
    for i in 0..n {
        let s = block_sup(x, lambda, &blocks.b1[i]) + block_sup(x, lambda, &blocks.b2[i]);
        if s > 0.0 {
            acc += s;
        }
    }
    lambda * radius * radius + acc / n as f64
}

/// Keep-mask over the N² index pairs (flattened i₁·N + i₂).
///
/// A pair is dropped when its concatenated sample ξ^𝐢 = (ξ₁^{i₁}, ξ₂^{i₂})
/// is componentwise nonpositive and ‖ξ^𝐢‖ ≥ max_{x∈𝒳}‖(x, x)‖: for such
/// pairs the inner supremum is ≤ ‖(x,x)‖² − ‖ξ^𝐢‖² ≤ 0 uniformly over the
/// decision box and all λ ≻ 1, so the max(0, ·) term vanishes identically
/// and removing it leaves the objective unchanged everywhere.
pub fn prune(samples: &SampleSet, decision_box: &Box2) -> Result<Vec<bool>> {
    decision_box.validate()?;
    let blocks = Blocks::from_samples(samples)?;
    let n = blocks.len();
    // max over x of ‖(x, x)‖² = 2 max ‖x‖²
    let bound_sq = 2.0 * decision_box.max_norm_sq();
    let mut keep = vec![true; n * n];
    for (i1, a) in blocks.b1.iter().enumerate() {
        for (i2, b) in blocks.b2.iter().enumerate() {
            let nonpositive = a.iter().chain(b.iter()).all(|&v| v <= 0.0);
            let norm_sq: f64 = a.iter().chain(b.iter()).map(|v| v * v).sum();
            if nonpositive && norm_sq >= bound_sq {
                keep[i1 * n + i2] = false;
            }
        }
    }
    Ok(keep)
}

/// Solver knobs shared by both programs.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub lambda_cap: f64,
    pub multistarts: usize,
    pub seed: u64,
    pub use_pruning: bool,
    pub max_cycles: usize,
    /// Stop when a full descent cycle improves the value by less than this.
    /// The tight default pins the optimizer location, not just the value.
    pub cycle_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            lambda_cap: DEFAULT_LAMBDA_CAP,
            multistarts: 5,
            seed: 0,
            use_pruning: true,
            max_cycles: 10_000,
            cycle_tol: 1e-12,
        }
    }
}

/// A solved placement: the station location, multipliers, and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSolution {
    pub x: [f64; 2],
    pub lambdas: Vec<f64>,
    pub value: f64,
    /// Descent cycles spent across all starts.
    pub iterations: usize,
    /// Index pairs removed by the redundancy test (0 when pruning is off).
    pub pruned_pairs: usize,
    /// False when the cycle cap was exhausted; `diagnostic` says so.
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn multistart_points(
    decision_box: &Box2,
    n_lambdas: usize,
    lambda_cap: f64,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(count);
    // canonical start: box center, moderate multiplier
    let c = decision_box.center();
    let mut first = vec![c[0], c[1]];
    first.extend(std::iter::repeat_n(2.0, n_lambdas));
    starts.push(first);
    while starts.len() < count {
        let x = decision_box.sample(&mut rng);
        let mut s = vec![x[0], x[1]];
        for _ in 0..n_lambdas {
            // log-uniform multipliers in [1.5, ~100]
            let u: f64 = rng.gen();
            s.push((1.5 * (100.0f64 / 1.5).powf(u)).min(lambda_cap));
        }
        starts.push(s);
    }
    starts
}

fn descend(
    objective: impl Fn(&[f64]) -> f64,
    decision_box: &Box2,
    n_lambdas: usize,
    opts: &SolveOptions,
    pruned_pairs: usize,
) -> PlacementSolution {
    let mut lower = vec![decision_box.lower[0], decision_box.lower[1]];
    let mut upper = vec![decision_box.upper[0], decision_box.upper[1]];
    lower.extend(std::iter::repeat_n(LAMBDA_FLOOR, n_lambdas));
    upper.extend(std::iter::repeat_n(opts.lambda_cap, n_lambdas));
    let starts = multistart_points(
        decision_box,
        n_lambdas,
        opts.lambda_cap,
        opts.multistarts,
        opts.seed,
    );
    let mut minimizer = BoxMinimizer::new(lower, upper);
    minimizer.max_cycles = opts.max_cycles;
    minimizer.cycle_tol = opts.cycle_tol;
    let out = minimizer.minimize(objective, &starts);
    PlacementSolution {
        x: [out.x[0], out.x[1]],
        lambdas: out.x[2..].to_vec(),
        value: out.value,
        iterations: out.cycles,
        pruned_pairs,
        converged: out.converged,
        diagnostic: (!out.converged).then(|| {
            format!(
                "descent cycle cap {} exhausted before convergence",
                opts.max_cycles
            )
        }),
    }
}

/// Minimize the per-component program over x ∈ 𝒳, λ ≻ 1.
pub fn solve_hyperrect(
    samples: &SampleSet,
    radii: &[f64; 2],
    decision_box: &Box2,
    opts: &SolveOptions,
) -> Result<PlacementSolution> {
    decision_box.validate()?;
    if radii.iter().any(|&e| !e.is_finite() || e < 0.0) {
        return Err(Error::input("radii must be finite and nonnegative"));
    }
    let blocks = Blocks::from_samples(samples)?;
    let keep = if opts.use_pruning {
        Some(prune(samples, decision_box)?)
    } else {
        None
    };
    let pruned = keep
        .as_ref()
        .map_or(0, |k| k.iter().filter(|&&b| !b).count());
    let objective = |z: &[f64]| {
        hyperrect_objective_masked(
            &[z[0], z[1]],
            &[z[2], z[3]],
            &blocks,
            radii,
            keep.as_deref(),
        )
    };
    Ok(descend(objective, decision_box, 2, opts, pruned))
}

/// Minimize the monolithic-ball program over x ∈ 𝒳, λ > 1.
pub fn solve_ball(
    samples: &SampleSet,
    radius: f64,
    decision_box: &Box2,
    opts: &SolveOptions,
) -> Result<PlacementSolution> {
    decision_box.validate()?;
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::input("radius must be finite and nonnegative"));
    }
    let blocks = Blocks::from_samples(samples)?;
    let objective = |z: &[f64]| ball_objective_inner(&[z[0], z[1]], z[2], &blocks, radius);
    Ok(descend(objective, decision_box, 1, opts, 0))
}

/// One row of the experiment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    /// "hyperrect" or "ball".
    pub method: String,
    pub x1: f64,
    pub x2: f64,
    pub lambdas: Vec<f64>,
    pub value: f64,
    pub dist_to_opt: f64,
    pub within_0_3: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-method aggregate statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub solved_trials: usize,
    pub within_0_3_fraction: f64,
    pub median_dist: f64,
    pub mean_dist: f64,
}

/// Full experiment output: per-trial rows for both methods plus summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneReport {
    pub true_optimum: [f64; 2],
    pub true_value: f64,
    pub rows: Vec<TrialRow>,
    pub hyperrect: MethodSummary,
    pub ball: MethodSummary,
}

fn summarize(rows: &[TrialRow], method: &str) -> MethodSummary {
    let mut dists: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.error.is_none())
        .map(|r| r.dist_to_opt)
        .collect();
    dists.sort_by(|a, b| a.total_cmp(b));
    let n = dists.len();
    let within = dists.iter().filter(|&&d| d <= 0.3).count();
    let median = if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        dists[n / 2]
    } else {
        (dists[n / 2 - 1] + dists[n / 2]) / 2.0
    };
    MethodSummary {
        solved_trials: n,
        within_0_3_fraction: if n == 0 {
            f64::NAN
        } else {
            within as f64 / n as f64
        },
        median_dist: median,
        mean_dist: if n == 0 {
            f64::NAN
        } else {
            dists.iter().sum::<f64>() / n as f64
        },
    }
}

/// Run the full study: `cfg.trials` independent sample draws, both solvers
/// per draw. Trial k uses seed `cfg.seed + k`; trials run in parallel and
/// the report is identical for identical (config, seed). Trial failures are
/// recorded in their rows and do not abort the experiment.
pub fn run_experiment(cfg: &DroneConfig) -> Result<DroneReport> {
    cfg.validate()?;
    let x_true = cfg.true_optimum();
    let dist_to = |x: &[f64; 2]| ((x[0] - x_true[0]).powi(2) + (x[1] - x_true[1]).powi(2)).sqrt();

    let mut rows: Vec<TrialRow> = (0..cfg.trials)
        .into_par_iter()
        .flat_map(|trial| {
            let trial_seed = cfg.seed.wrapping_add(trial as u64);
            let make_row = |method: &str, sol: Result<PlacementSolution>| match sol {
                Ok(s) => TrialRow {
                    trial,
                    method: method.into(),
                    x1: s.x[0],
                    x2: s.x[1],
                    dist_to_opt: dist_to(&s.x),
                    within_0_3: dist_to(&s.x) <= 0.3,
                    error: if s.converged {
                        None
                    } else {
                        s.diagnostic.clone()
                    },
                    lambdas: s.lambdas,
                    value: s.value,
                },
                Err(e) => TrialRow {
                    trial,
                    method: method.into(),
                    x1: f64::NAN,
                    x2: f64::NAN,
                    lambdas: Vec::new(),
                    value: f64::NAN,
                    dist_to_opt: f64::NAN,
                    within_0_3: false,
                    error: Some(e.to_string()),
                },
            };
            let opts = SolveOptions {
                lambda_cap: cfg.lambda_cap,
                seed: trial_seed ^ 0x9e37_79b9_7f4a_7c15,
                ..SolveOptions::default()
            };
            match sample_positions(cfg, trial_seed) {
                Ok(samples) => {
                    let hy = solve_hyperrect(&samples, &cfg.budgets, &cfg.decision_box, &opts);
                    let ball = solve_ball(&samples, cfg.ball_radius(), &cfg.decision_box, &opts);
                    vec![make_row("hyperrect", hy), make_row("ball", ball)]
                }
                Err(e) => vec![
                    make_row("hyperrect", Err(Error::input(e.to_string()))),
                    make_row("ball", Err(e)),
                ],
            }
        })
        .collect();

    rows.sort_by(|a, b| (a.trial, &a.method).cmp(&(b.trial, &b.method)));
    let hyperrect = summarize(&rows, "hyperrect");
    let ball = summarize(&rows, "ball");
    Ok(DroneReport {
        true_optimum: x_true,
        true_value: cfg.true_value(),
        rows,
        hyperrect,
        ball,
    })
}
