use fsopoint::metrics::{
    horizontal_gap, power_margin, sweep, MarginEstimate, Method, Metric, MetricCurve, QNorm,
    SNR_MAPPING,
};
use fsopoint::Turbulence;
use serde::Serialize;
use serde_json::json;

use super::Summary;
use crate::config::{MetricsMethod, RunConfig};
use crate::error::CliError;
use crate::output::{OutDir, SCHEMA_VERSION};

#[derive(Serialize)]
struct Margin {
    sigma2: f64,
    chernoff: f64,
    chernoff_db: f64,
    exact: f64,
    exact_db: f64,
}

impl Margin {
    fn new(sigma2: f64, m: MarginEstimate<f64>) -> Self {
        Self {
            sigma2,
            chernoff: m.chernoff,
            chernoff_db: m.chernoff_db(),
            exact: m.exact,
            exact_db: m.exact_db(),
        }
    }
}

#[derive(Serialize)]
struct Conventions {
    snr_mapping: &'static str,
    q_norm: QNorm,
    quad_order: usize,
    margin_formula: &'static str,
    ook_threshold: &'static str,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    config: &'a RunConfig,
    conventions: Conventions,
    target_outage: f64,
    margins: [Margin; 2],
    margin_gap_db: f64,
    margin_gap_exact_db: f64,
    outage_method_max_abs_diff: f64,
    ber_level: f64,
    ber_gap_db: Option<f64>,
    outage_ordered: bool,
    ber_ordered: bool,
    monte_carlo_coverage: Option<f64>,
    passed: bool,
    curves: Vec<MetricCurve>,
}

fn below(closed: &MetricCurve, open: &MetricCurve, strict: bool) -> bool {
    closed
        .values
        .iter()
        .zip(&open.values)
        .all(|(c, o)| if strict { c < o } else { c <= o })
}

fn write_curves(out: &mut OutDir, name: &str, curves: &[&MetricCurve]) -> Result<(), CliError> {
    let mut w = out.csv(name)?;
    w.write_record(["axis_db", "value", "method", "sigma2", "ci_lo", "ci_hi"])?;
    for c in curves {
        let method = match c.method {
            Method::ClosedForm => "closed-form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte-carlo",
        };
        for (i, (x, v)) in c.axis.iter().zip(&c.values).enumerate() {
            let (lo, hi) = match &c.ci {
                Some(ci) => (Some(ci[i].0), Some(ci[i].1)),
                None => (None, None),
            };
            w.serialize((x, v, method, c.sigma2, lo, hi))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Outage and BER curves for the open- and closed-loop scintillation levels.
pub fn metrics(cfg: &RunConfig) -> Result<Summary, CliError> {
    cfg.validate()?;
    let m = &cfg.metrics;
    let base: Turbulence = cfg.turbulence()?;
    let open = base.with_sigma2(m.sigma2_open)?;
    let closed = base.with_sigma2(m.sigma2_closed)?;
    let pair = [open, closed];
    let margins = m.margin_db.values("margin_db")?;
    let snrs = m.snr_db.values("snr_db")?;

    let cf = sweep(
        Metric::Outage {
            method: Method::ClosedForm,
        },
        &margins,
        &pair,
    )?;
    let qd = sweep(
        Metric::Outage {
            method: Method::Quadrature,
        },
        &margins,
        &pair,
    )?;
    let ber = sweep(
        Metric::Ber {
            quad_order: m.quad_order,
            q_norm: m.q_norm,
        },
        &snrs,
        &pair,
    )?;
    let mc = match m.method {
        MetricsMethod::Analytic => None,
        MetricsMethod::MonteCarlo => Some(sweep(
            Metric::BerMonteCarlo {
                n_bits: m.mc_bits,
                seed: cfg.seed,
            },
            &snrs,
            &pair,
        )?),
    };

    let mo = power_margin(m.target_outage, &open)?;
    let mcl = power_margin(m.target_outage, &closed)?;
    let diff = cf
        .iter()
        .zip(&qd)
        .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
        .fold(0.0f64, f64::max);
    let ber_gap = horizontal_gap(&ber[0], &ber[1], m.ber_level);
    // the closed-loop curve is the one with the smaller scintillation index
    let (lo, hi) = if m.sigma2_closed <= m.sigma2_open {
        (1, 0)
    } else {
        (0, 1)
    };
    let outage_ordered = below(&cf[lo], &cf[hi], false);
    let ber_ordered = below(&ber[lo], &ber[hi], m.sigma2_closed != m.sigma2_open);
    // the analytic value must lie inside the Wilson interval in >= 95% of cells
    let coverage = mc.as_ref().map(|curves| {
        let mut hit = 0usize;
        let mut n = 0usize;
        for (c, a) in curves.iter().zip(&ber) {
            for (ci, v) in
                c.ci.as_ref()
                    .expect("monte-carlo curves carry intervals")
                    .iter()
                    .zip(&a.values)
            {
                n += 1;
                hit += usize::from(ci.0 <= *v && *v <= ci.1);
            }
        }
        hit as f64 / n as f64
    });
    let passed = outage_ordered
        && ber_ordered
        && diff <= 1e-10
        && ber_gap.is_some_and(|g| g > 0.0)
        && coverage.is_none_or(|c| c >= 0.95);

    let mut out = OutDir::create(&cfg.output_dir)?;
    out.echo_config("metrics", cfg)?;
    write_curves(
        &mut out,
        "outage.csv",
        &cf.iter().chain(&qd).collect::<Vec<_>>(),
    )?;
    let mut ber_curves: Vec<&MetricCurve> = ber.iter().collect();
    if let Some(mc) = &mc {
        ber_curves.extend(mc.iter());
    }
    write_curves(&mut out, "ber.csv", &ber_curves)?;

    let mut curves = cf.clone();
    curves.extend(qd);
    curves.extend(ber.clone());
    if let Some(mc) = mc {
        curves.extend(mc);
    }
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "metrics",
        seed: cfg.seed,
        config: cfg,
        conventions: Conventions {
            snr_mapping: SNR_MAPPING,
            q_norm: m.q_norm,
            quad_order: m.quad_order,
            margin_formula: "m = exp(sqrt(-2 sigma2 ln(2 p_o)) + sigma2 / 2)",
            ook_threshold: "half the faded one level, known fade per bit",
        },
        target_outage: m.target_outage,
        margin_gap_db: mo.chernoff_db() - mcl.chernoff_db(),
        margin_gap_exact_db: mo.exact_db() - mcl.exact_db(),
        margins: [
            Margin::new(m.sigma2_open, mo),
            Margin::new(m.sigma2_closed, mcl),
        ],
        outage_method_max_abs_diff: diff,
        ber_level: m.ber_level,
        ber_gap_db: ber_gap,
        outage_ordered,
        ber_ordered,
        monte_carlo_coverage: coverage,
        passed,
        curves,
    };
    out.json("metrics.json", &report)?;
    if !passed {
        return Err(CliError::Verification(format!(
            "metric checks failed (see {})",
            out.path("metrics.json").display()
        )));
    }
    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        command: "metrics",
        passed,
        outputs: out
            .written
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        headline: json!({
            "margin_gap_db": report.margin_gap_db,
            "ber_gap_db": ber_gap,
            "monte_carlo_coverage": coverage,
        }),
    })
}
