use std::path::Path;

use fsopoint::verify::{
    closed_loop_stats, dissipation_check, linear_gain_sweep, simulate_loop, ClosedLoop,
    DissipationReport, GainSweep, LoopTrajectory,
};
use fsopoint::{Error, GENERATOR_ID};
use nalgebra::{Matrix2, RowVector2};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Summary;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{plant_hash, Check, OutDir, SCHEMA_VERSION};

/// Gain file: a synthesis report, or any JSON object with a `k` field.
/// `p` and `eps_star` enable the dissipation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFile {
    pub k: [f64; 2],
    #[serde(default)]
    pub p: Option<[[f64; 2]; 2]>,
    #[serde(default)]
    pub eps_star: Option<f64>,
    #[serde(default)]
    pub plant_hash: Option<String>,
}

impl GainFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read gain file {}: {e}", path.display()))
        })?;
        let g: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("gain file {}: {e}", path.display())))?;
        if g.k.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Validation("gain entries must be finite".into()));
        }
        Ok(g)
    }
}

#[derive(Serialize)]
struct Stats {
    seeds: usize,
    steps: usize,
    var_open: f64,
    var_closed: f64,
    reduction: f64,
    max_abs_open: f64,
    max_abs_closed: f64,
    peak_ratio: f64,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    command: &'static str,
    generator: &'static str,
    seed: u64,
    config: &'a RunConfig,
    k: [f64; 2],
    plant_hash: String,
    gain_file_plant_hash_matches: Option<bool>,
    spectral_radius: f64,
    gain_freq: Option<GainSweep>,
    stats: Stats,
    dissipation: Option<DissipationReport>,
    checks: Vec<Check>,
    passed: bool,
}

fn write_trajectory(
    out: &mut OutDir,
    name: &str,
    tr: &LoopTrajectory,
    dt: f64,
) -> Result<(), CliError> {
    let mut w = out.csv(name)?;
    w.write_record(["k", "t", "x_p", "x_l", "u", "y"])?;
    for s in &tr.samples {
        w.serialize((s.k, s.k as f64 * dt, s.x[0], s.x[1], s.u, s.y))?;
    }
    w.flush()?;
    Ok(())
}

fn diverged(e: Error) -> CliError {
    match e {
        Error::NonFinite { step } => CliError::Verification(format!(
            "closed loop diverged (non-finite state near step {step})"
        )),
        other => other.into(),
    }
}

pub fn simulate(cfg: &RunConfig, gain: Option<&Path>) -> Result<Summary, CliError> {
    cfg.validate()?;
    let gain_path =
        gain.ok_or_else(|| CliError::Validation("simulate needs --gain <file>".into()))?;
    let g = GainFile::read(gain_path)?;
    let plant = cfg.plant()?;
    let hash = plant_hash(&plant);
    let sim = &cfg.simulate;
    let cl = ClosedLoop::new(&plant, RowVector2::new(g.k[0], g.k[1]));

    let stats = closed_loop_stats(&cl, cfg.seed, sim.seeds, sim.steps).map_err(diverged)?;
    let sweep = if cl.is_stable() {
        Some(linear_gain_sweep(&cl, sim.sweep_points)?)
    } else {
        None
    };
    let dissipation = match (g.p, g.eps_star) {
        (Some(p), Some(eps)) if sim.dissipation_seeds > 0 => {
            let p = Matrix2::new(p[0][0], p[0][1], p[1][0], p[1][1]);
            let trs = (0..sim.dissipation_seeds as u64)
                .map(|id| simulate_loop(&cl, cfg.seed, id, sim.steps, true))
                .collect::<Result<Vec<_>, _>>()?;
            Some(dissipation_check(&cl, &trs, &p, eps)?)
        }
        _ => None,
    };

    let mut checks = vec![
        Check::at_least("variance_reduction", stats.reduction, sim.min_reduction),
        Check::below("peak_ratio", stats.peak_ratio, sim.max_peak_ratio),
    ];
    if let Some(d) = &dissipation {
        checks.push(Check::at_most(
            "dissipation_violations",
            d.violations as f64,
            0.0,
        ));
    }
    let passed = checks.iter().all(|c| c.passed);

    let mut out = OutDir::create(&cfg.output_dir)?;
    out.echo_config("simulate", cfg)?;
    let dt = cfg.turbulence()?.dt;
    let id = sim.trajectory_id;
    write_trajectory(
        &mut out,
        "trajectory_open.csv",
        &simulate_loop(&cl, cfg.seed, id, sim.steps, false)?,
        dt,
    )?;
    write_trajectory(
        &mut out,
        "trajectory_closed.csv",
        &simulate_loop(&cl, cfg.seed, id, sim.steps, true)?,
        dt,
    )?;
    let mut w = out.csv("per_seed.csv")?;
    w.write_record([
        "id",
        "var_open",
        "var_closed",
        "max_abs_open",
        "max_abs_closed",
        "reflections_open",
        "reflections_closed",
    ])?;
    for s in &stats.per_seed {
        w.serialize((
            s.id,
            s.var_open,
            s.var_closed,
            s.max_abs_open,
            s.max_abs_closed,
            s.reflections_open,
            s.reflections_closed,
        ))?;
    }
    w.flush()?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        generator: GENERATOR_ID,
        seed: cfg.seed,
        config: cfg,
        k: g.k,
        gain_file_plant_hash_matches: g.plant_hash.as_ref().map(|h| *h == hash),
        plant_hash: hash,
        spectral_radius: cl.spectral_radius,
        gain_freq: sweep,
        stats: Stats {
            seeds: stats.seeds,
            steps: stats.steps,
            var_open: stats.var_open,
            var_closed: stats.var_closed,
            reduction: stats.reduction,
            max_abs_open: stats.max_abs_open,
            max_abs_closed: stats.max_abs_closed,
            peak_ratio: stats.peak_ratio,
        },
        dissipation,
        checks,
        passed,
    };
    out.json("simulate.json", &report)?;
    if !passed {
        return Err(CliError::Verification(format!(
            "closed-loop thresholds not met: reduction {:.4}, peak ratio {:.4} (see {})",
            stats.reduction,
            stats.peak_ratio,
            out.path("simulate.json").display()
        )));
    }
    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        passed,
        outputs: out
            .written
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        headline: json!({
            "reduction": stats.reduction,
            "peak_ratio": stats.peak_ratio,
            "dissipation_violations": dissipation.map(|d| d.violations),
        }),
    })
}
