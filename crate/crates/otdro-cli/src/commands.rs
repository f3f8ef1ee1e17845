//! Subcommand implementations.

use serde::Serialize;

use otdro::concentration::{
    allocate_hyperrect, constants, radius_hat, AllocationResult, RadiusRequest,
};
use otdro::coverage::{coverage_mc, CoverageConfig, CoverageReport};

use otdro::drone::{run_experiment, DroneConfig, DroneReport};
use otdro::duals::{strong_duality_sweep, toy_strict_improvement, SweepConfig};
use otdro::space::PartitionedSpace;
use otdro::transport::{wasserstein_p, TransportPlan};

use crate::configs::{CoverageCliConfig, OtConfig, RadiusConfig, ToyConfig};
use crate::{load_config, to_json, write_atomic, CliError, CliResult, CommonArgs, OutputFormat};

fn require_config<'a>(common: &'a CommonArgs, subcommand: &str) -> CliResult<&'a std::path::Path> {
    common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("`{subcommand}` needs --config PATH")))
}

fn json_only(common: &CommonArgs, subcommand: &str) -> CliResult<()> {
    if common.format == OutputFormat::Csv {
        return Err(CliError::Config(format!(
            "`{subcommand}` has no CSV output"
        )));
    }
    Ok(())
}

/// Print to stdout or write atomically to --out.
fn emit(common: &CommonArgs, contents: &str) -> CliResult<()> {
    match &common.out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Emit a JSON/CSV pair: stdout honors --format; --out writes both files
/// next to each other (<base>.json and <base>.csv).
fn emit_pair(common: &CommonArgs, json: &str, csv: &str) -> CliResult<()> {
    match &common.out {
        Some(path) => {
            let base = match path.extension().and_then(|e| e.to_str()) {
                Some("json") | Some("csv") => path.with_extension(""),
                _ => path.clone(),
            };
            write_atomic(&base.with_extension("json"), json)?;
            write_atomic(&base.with_extension("csv"), csv)
        }
        None => {
            match common.format {
                OutputFormat::Json => print!("{json}"),
                OutputFormat::Csv => print!("{csv}"),
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct RadiusOutput {
    dim: usize,
    dims: Vec<usize>,
    dimension_constant: f64,
    radius_constant: f64,
    monolithic_radius: f64,
    allocation: AllocationResult,
}

pub fn radius(common: &CommonArgs) -> CliResult<()> {
    json_only(common, "radius")?;
    let cfg: RadiusConfig = load_config(require_config(common, "radius")?)?;
    let dim: usize = cfg.dims.iter().sum();
    let (c, c_hat) = constants(dim, cfg.p, cfg.q, cfg.beta).map_err(CliError::from_lib)?;
    let request = RadiusRequest::new(
        cfg.n_samples,
        cfg.beta,
        cfg.support_diameter,
        cfg.p,
        cfg.q,
        dim,
    )
    .map_err(CliError::from_lib)?;
    let eps_hat = radius_hat(&request).map_err(CliError::from_lib)?;
    let allocation = allocate_hyperrect(
        cfg.n_samples,
        cfg.beta,
        cfg.support_diameter,
        cfg.p,
        cfg.q,
        &cfg.dims,
    )
    .map_err(CliError::from_lib)?;
    let out = RadiusOutput {
        dim,
        dims: cfg.dims,
        dimension_constant: c,
        radius_constant: c_hat,
        monolithic_radius: eps_hat,
        allocation,
    };
    emit(common, &to_json(&out))
}

pub fn toy(common: &CommonArgs) -> CliResult<()> {
    json_only(common, "toy")?;
    let cfg: ToyConfig = match &common.config {
        Some(path) => load_config(path)?,
        None => ToyConfig::default(),
    };
    let result = toy_strict_improvement(
        cfg.p1.unwrap_or(0.5),
        cfg.p2.unwrap_or(0.5),
        cfg.mass1.unwrap_or(0.1),
        cfg.mass2.unwrap_or(0.1),
    )
    .map_err(CliError::from_lib)?;
    emit(common, &to_json(&result))
}

pub fn duality_check(common: &CommonArgs) -> CliResult<()> {
    json_only(common, "duality-check")?;
    let mut cfg: SweepConfig = match &common.config {
        Some(path) => load_config(path)?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.instances = trials;
    }
    let report = strong_duality_sweep(&cfg).map_err(CliError::from_lib)?;
    emit(common, &to_json(&report))?;
    if !report.pass {
        return Err(CliError::Numerical(format!(
            "numerical failure in duals: duality-check max gap {:.3e} exceeds {:.3e}",
            report.max_gap, report.tolerance
        )));
    }
    Ok(())
}

fn drone_csv(report: &DroneReport) -> String {
    let mut csv = String::from("trial,method,x1,x2,lambda1,lambda2,value,dist_to_opt,within_0_3\n");
    for row in &report.rows {
        let l1 = row.lambdas.first().copied().unwrap_or(f64::NAN);
        let l2 = row.lambdas.get(1).copied().unwrap_or(l1);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.trial,
            row.method,
            row.x1,
            row.x2,
            l1,
            l2,
            row.value,
            row.dist_to_opt,
            row.within_0_3
        ));
    }
    csv
}

pub fn drone(common: &CommonArgs) -> CliResult<()> {
    let mut cfg: DroneConfig = match &common.config {
        Some(path) => load_config(path)?,
        None => DroneConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    let report = run_experiment(&cfg).map_err(CliError::from_lib)?;
    emit_pair(common, &to_json(&report), &drone_csv(&report))
}

#[derive(Serialize)]
struct CoverageSummary {
    trials: usize,
    n_samples: usize,
    seed: u64,
    radii: Vec<f64>,
    enclosing_radius: f64,
    hyperrect_coverage: f64,
    ball_coverage: f64,
    component_coverage: Vec<f64>,
}

fn coverage_csv(report: &CoverageReport) -> String {
    let n = report.component_coverage.len();
    let mut csv = String::from("trial");
    for k in 1..=n {
        csv.push_str(&format!(",dist_{k}"));
    }
    csv.push_str(",joint_distance,hyperrect_covered,ball_covered\n");
    for (t, row) in report.per_trial.iter().enumerate() {
        csv.push_str(&t.to_string());
        for d in &row.component_distances {
            csv.push_str(&format!(",{d}"));
        }
        csv.push_str(&format!(
            ",{},{},{}\n",
            row.joint_distance, row.hyperrect_covered, row.ball_covered
        ));
    }
    csv
}

pub fn coverage(common: &CommonArgs) -> CliResult<()> {
    let mut cli_cfg: CoverageCliConfig = load_config(require_config(common, "coverage")?)?;
    if let Some(seed) = common.seed {
        cli_cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cli_cfg.trials = trials;
    }
    let radii = match (&cli_cfg.radii, &cli_cfg.allocate) {
        (Some(r), None) => r.clone(),
        (None, Some(a)) => {
            let dims = cli_cfg.truth.block_dims();
            allocate_hyperrect(
                cli_cfg.n_samples as u64,
                a.beta,
                a.support_diameter,
                cli_cfg.p,
                cli_cfg.q,
                &dims,
            )
            .map_err(CliError::from_lib)?
            .eps_k
        }
        _ => {
            return Err(CliError::Config(
                "coverage config needs exactly one of `radii` or `allocate`".into(),
            ))
        }
    };
    let cfg = CoverageConfig {
        truth: cli_cfg.truth,
        q: cli_cfg.q,
        p: cli_cfg.p,
        n_samples: cli_cfg.n_samples,
        radii: radii.clone(),
        trials: cli_cfg.trials,
        seed: cli_cfg.seed,
    };
    cfg.validate().map_err(CliError::from_lib)?;
    let report = coverage_mc(&cfg).map_err(CliError::from_lib)?;
    let summary = CoverageSummary {
        trials: report.trials,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        radii,
        enclosing_radius: report.enclosing_radius,
        hyperrect_coverage: report.hyperrect_coverage,
        ball_coverage: report.ball_coverage,
        component_coverage: report.component_coverage.clone(),
    };
    emit_pair(common, &to_json(&summary), &coverage_csv(&report))
}

#[derive(Serialize)]
struct OtOutput {
    distance: f64,
    plan: TransportPlan,
}

pub fn ot(common: &CommonArgs) -> CliResult<()> {
    json_only(common, "ot")?;
    let cfg: OtConfig = load_config(require_config(common, "ot")?)?;
    let space = PartitionedSpace::new(cfg.block_dims.clone(), cfg.q).map_err(CliError::from_lib)?;
    let (distance, plan) =
        wasserstein_p(&cfg.source, &cfg.dest, &space, cfg.p).map_err(CliError::from_lib)?;
    emit(common, &to_json(&OtOutput { distance, plan }))
}
