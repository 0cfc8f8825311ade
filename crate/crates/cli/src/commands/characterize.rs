use fsopoint::channel::{
    autocorrelation, correlation_time, estimate_lognormal, fit_report, histogram, k_coefficient,
    lognormal_pdf, simulate_channel, FitReport, LognormalEstimate,
};
use fsopoint::{NoiseSource, GENERATOR_ID};
use serde::Serialize;
use serde_json::json;

use super::Summary;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Check, OutDir, SCHEMA_VERSION};

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    command: &'static str,
    generator: &'static str,
    seed: u64,
    stream: u64,
    config: &'a RunConfig,
    k: f64,
    r_p: f64,
    weak_turbulence: bool,
    steps: usize,
    reflections: usize,
    estimate: LognormalEstimate<f64>,
    mean: f64,
    correlation_time: f64,
    fit_samples: usize,
    fit: FitReport,
    checks: Vec<Check>,
    passed: bool,
}

/// Simulates the open channel and fits the lognormal law to it.
pub fn characterize(cfg: &RunConfig) -> Result<Summary, CliError> {
    cfg.validate()?;
    let tp = cfg.turbulence()?;
    let c = &cfg.channel;
    let mut noise = NoiseSource::new(cfg.seed, 0);
    let tr = simulate_channel(&tp, tp.i0, c.steps, &mut noise, c.record_every, |_, _| 0.0)?;
    let xs = &tr.x_p[1..];
    let est = estimate_lognormal(xs)?;
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let tau = correlation_time(&autocorrelation(xs, c.max_lag)?, tp.dt)?;
    let thinned: Vec<f64> = xs.iter().step_by(c.thin).copied().collect();
    let hist = histogram(&thinned, c.bins)?;
    let fit = fit_report(&hist, &tp)?;

    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let checks = vec![
        Check::at_most("sigma2_rel_error", rel(est.sigma2, tp.sigma2), c.var_tol),
        Check::at_most("mean_rel_error", rel(mean, tp.i0), c.mean_tol),
        Check::at_most("tau_rel_error", rel(tau, tp.tau_c), c.tau_tol),
        Check::below("chi2_per_dof", fit.chi2_per_dof, c.max_chi2_per_dof),
    ];
    let passed = checks.iter().all(|c| c.passed);

    let mut out = OutDir::create(&cfg.output_dir)?;
    out.echo_config("characterize", cfg)?;
    let mut w = out.csv("channel_trajectory.csv")?;
    w.write_record(["k", "t", "x_p", "theta", "u_p", "w_p"])?;
    for r in &tr.rows {
        w.serialize((r.k, r.t, r.x_p, r.theta, r.u_p, r.w_p))?;
    }
    w.flush()?;
    let mut w = out.csv("histogram.csv")?;
    w.write_record([
        "bin_lo",
        "bin_hi",
        "centre",
        "count",
        "density",
        "model_density",
    ])?;
    for (j, centre) in hist.centres().enumerate() {
        let model = lognormal_pdf(centre, &tp)?;
        w.serialize((
            hist.edges[j],
            hist.edges[j + 1],
            centre,
            hist.counts[j],
            hist.density[j],
            model,
        ))?;
    }
    w.flush()?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "characterize",
        generator: GENERATOR_ID,
        seed: cfg.seed,
        stream: 0,
        config: cfg,
        k: k_coefficient(&tp)?,
        r_p: tp.r_p(),
        weak_turbulence: tp.weak_turbulence(),
        steps: c.steps,
        reflections: tr.reflections,
        estimate: est,
        mean,
        correlation_time: tau,
        fit_samples: thinned.len(),
        fit,
        checks,
        passed,
    };
    out.json("characterize.json", &report)?;
    if !passed {
        return Err(CliError::Verification(format!(
            "channel fit outside thresholds (see {})",
            out.path("characterize.json").display()
        )));
    }
    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        command: "characterize",
        passed,
        outputs: out
            .written
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        headline: json!({
            "sigma2_hat": est.sigma2,
            "mean": mean,
            "correlation_time": tau,
            "chi2_per_dof": fit.chi2_per_dof,
            "weak_turbulence": tp.weak_turbulence(),
        }),
    })
}
