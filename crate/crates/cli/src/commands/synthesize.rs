use fsopoint::lmi::{self, Certificate, Coupling, Probe, SynthesisResult};
use fsopoint::plant::{AugmentedPlant, PlantConventions, PlantRecord};
use fsopoint::verify::{linear_gain_sweep, ClosedLoop, GainSweep};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Summary;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{matrix2, plant_hash, row2, OutDir, SCHEMA_VERSION};

/// Serialized synthesis outcome; `k`, `p` and `eps_star` double as the gain
/// file read by `simulate`.
#[derive(Debug, Serialize)]
pub struct SynthesisReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub variant: &'static str,
    pub plant_hash: String,
    pub plant: PlantRecord,
    pub block_sizes: [usize; 6],
    pub coupling: Coupling,
    pub eps_star: f64,
    pub eps_lower: f64,
    pub delta_star: f64,
    pub y: [[f64; 2]; 2],
    pub s: [f64; 2],
    pub k: [f64; 2],
    pub p: [[f64; 2]; 2],
    pub certificate: Certificate,
    pub gain_freq: GainSweep,
    pub passed: bool,
    pub probes: Vec<Probe>,
}

#[derive(Serialize, Deserialize)]
struct Failed {
    schema_version: u32,
    command: String,
    variant: String,
    plant_hash: String,
    error: String,
}

fn report(
    plant: &AugmentedPlant,
    r: SynthesisResult,
    sweep_points: usize,
    tol: &lmi::SolverTolerances,
    variant: &'static str,
) -> Result<SynthesisReport, CliError> {
    let sweep = linear_gain_sweep(&ClosedLoop::new(plant, r.k), sweep_points)?;
    let passed = r.cert.passed(tol) && sweep.gain <= r.eps_star * (1.0 + 1e-9);
    Ok(SynthesisReport {
        schema_version: SCHEMA_VERSION,
        command: "synthesize",
        variant,
        plant_hash: plant_hash(plant),
        plant: plant.record(),
        block_sizes: r.block_sizes,
        coupling: r.coupling,
        eps_star: r.eps_star,
        eps_lower: r.eps_lower,
        delta_star: r.delta_star,
        y: matrix2(&r.y),
        s: row2(&r.s),
        k: row2(&r.k),
        p: matrix2(&r.p),
        certificate: r.cert,
        gain_freq: sweep,
        passed,
        probes: r.probes,
    })
}

pub fn synthesize(cfg: &RunConfig) -> Result<Summary, CliError> {
    cfg.validate()?;
    let plant = cfg.plant()?;
    let mut out = OutDir::create(&cfg.output_dir)?;
    out.echo_config("synthesize", cfg)?;
    let tol = cfg.synthesis.tolerances;
    let result = lmi::synthesize(&plant, &cfg.synthesis);
    let main = match result {
        Ok(r) => report(&plant, r, cfg.simulate.sweep_points, &tol, "configured")?,
        Err(e) => {
            let err = CliError::from(e);
            out.json(
                "synthesis.json",
                &Failed {
                    schema_version: SCHEMA_VERSION,
                    command: "synthesize".into(),
                    variant: "configured".into(),
                    plant_hash: plant_hash(&plant),
                    error: err.to_string(),
                },
            )?;
            return Err(err);
        }
    };
    out.json("synthesis.json", &main)?;
    let mut headline = json!({
        "eps_star": main.eps_star,
        "delta_star": main.delta_star,
        "k": main.k,
        "gain_freq": main.gain_freq.gain,
        "certificate_passed": main.passed,
    });
    if cfg.paper_variants {
        let paper = cfg.plant_with(PlantConventions::paper())?;
        match lmi::synthesize(&paper, &cfg.synthesis) {
            Ok(r) => {
                let rep = report(&paper, r, cfg.simulate.sweep_points, &tol, "printed")?;
                headline["printed"] =
                    json!({ "eps_star": rep.eps_star, "k": rep.k, "passed": rep.passed });
                out.json("synthesis_printed.json", &rep)?;
            }
            Err(e) => {
                let msg = CliError::from(e).to_string();
                headline["printed"] = json!({ "error": msg });
                out.json(
                    "synthesis_printed.json",
                    &Failed {
                        schema_version: SCHEMA_VERSION,
                        command: "synthesize".into(),
                        variant: "printed".into(),
                        plant_hash: plant_hash(&paper),
                        error: msg,
                    },
                )?;
            }
        }
    }
    if !main.passed {
        return Err(CliError::Verification(format!(
            "certificate check failed (see {})",
            out.path("synthesis.json").display()
        )));
    }
    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        command: "synthesize",
        passed: true,
        outputs: out
            .written
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        headline,
    })
}
