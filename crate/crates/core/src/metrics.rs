//! Link metrics of the lognormal channel: outage probability, power margin
//! and the average bit-error rate of intensity-modulated OOK.
//!
//! SNR axes use the electrical SNR at the mean irradiance,
//! `SNR = eta^2 I0^2 / N0`, so that the conditional Q argument for
//! irradiance `I` is `eta I / sqrt(2 N0) = (I / I0) sqrt(SNR / 2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{lognormal_pdf, TurbulenceParams};
use crate::error::{invalid, Error, Result};
use crate::noise::NoiseSource;
use crate::quadrature::{integrate, GaussHermite};
use crate::scalar::{q_function, std_normal_cdf};
use crate::Real;

pub const DEFAULT_GH_ORDER: usize = 32;
pub const GH_ORDER_RANGE: (usize, usize) = (8, 64);
pub const MIN_MC_BITS: usize = 100_000;
/// Bits per independently seeded Monte-Carlo block.
pub const MC_BLOCK: usize = 1 << 16;
/// Fewer observed errors than this make the interval estimate unreliable.
pub const MC_MIN_ERRORS: u64 = 100;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Normalization of the Gaussian tail function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QNorm {
    /// `Q(x) = (2 pi)^{-1/2} int_x^inf exp(-t^2/2) dt`.
    #[default]
    Standard,
    /// The unnormalized tail `int_x^inf exp(-t^2/2) dt`; not a probability.
    Paper,
}

impl QNorm {
    pub fn eval<T: Real>(self, x: T) -> T {
        match self {
            QNorm::Standard => q_function(x),
            QNorm::Paper => q_function(x) * (T::lit(2.0) * T::PI()).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// Link parameters entering the metrics; `margin` is linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget<T> {
    pub sigma2: T,
    pub i0: T,
    /// Optical-to-electrical conversion coefficient.
    pub eta: T,
    /// Noise power spectral density.
    pub n0: T,
    pub margin: T,
}

impl<T: Real> LinkBudget<T> {
    /// Budget with `eta = 1`, unit margin and `N0` set by the SNR in dB.
    pub fn from_snr_db(p: &TurbulenceParams<T>, snr_db: T) -> Result<Self> {
        p.validate()?;
        if !snr_db.is_finite() {
            return Err(invalid("snr_db", "must be finite"));
        }
        let snr = T::lit(10.0).powf(snr_db / T::lit(10.0));
        Ok(Self {
            sigma2: p.sigma2,
            i0: p.i0,
            eta: T::one(),
            n0: p.i0 * p.i0 / snr,
            margin: T::one(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("i0", self.i0),
            ("eta", self.eta),
            ("margin", self.margin),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.n0 >= T::zero()) || !self.n0.is_finite() {
            return Err(invalid(
                "n0",
                format!("must be finite and >= 0, got {}", self.n0),
            ));
        }
        Ok(())
    }

    pub fn snr(&self) -> T {
        self.eta * self.eta * self.i0 * self.i0 / self.n0
    }

    pub fn snr_db(&self) -> T {
        T::lit(10.0) * self.snr().log10()
    }

    pub fn margin_db(&self) -> T {
        T::lit(10.0) * self.margin.log10()
    }

    /// Conditional Q argument `eta I / sqrt(2 N0)`.
    pub fn q_argument(&self, i: T) -> T {
        self.eta * i / (T::lit(2.0) * self.n0).sqrt()
    }
}

fn check_margin<T: Real>(m: T) -> Result<()> {
    if m > T::zero() && !m.is_nan() {
        Ok(())
    } else {
        Err(invalid("m", format!("margin must be > 0, got {m}")))
    }
}

/// `P(I < I0 / m) = Phi((-ln m + sigma^2/2) / sigma)`.
pub fn outage_closed_form<T: Real>(m: T, p: &TurbulenceParams<T>) -> Result<T> {
    p.validate()?;
    check_margin(m)?;
    let s = p.sigma();
    Ok(std_normal_cdf((-m.ln() + p.sigma2 / T::lit(2.0)) / s))
}

/// Outage probability by adaptive quadrature of the irradiance density over
/// `u = ln I`, truncated 40 log-standard-deviations below the mean.
pub fn outage_probability<T: Real>(m: T, p: &TurbulenceParams<T>) -> Result<T> {
    p.validate()?;
    check_margin(m)?;
    let s = p.sigma();
    let mu = p.i0.ln() - p.sigma2 / T::lit(2.0);
    let reach = T::lit(40.0) * s;
    let lo = mu - reach;
    let hi = (p.i0 / m).ln().min(mu + reach);
    if hi <= lo {
        return Ok(T::zero());
    }
    let f = |u: T| {
        let i = u.exp();
        lognormal_pdf(i, p).map(|d| d * i).unwrap_or(T::zero())
    };
    let eps = T::EPS;
    let r = integrate(f, lo, hi, eps * T::lit(1e-2), eps * T::lit(10.0), 2000)?;
    Ok(r.value.max(T::zero()).min(T::one()))
}

/// Required margin for a target outage: the Chernoff form
/// `exp(sqrt(-2 sigma^2 ln(2 p_o)) + sigma^2/2)` and the exact inverse of the
/// outage integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginEstimate<T> {
    pub chernoff: T,
    pub exact: T,
}

impl<T: Real> MarginEstimate<T> {
    pub fn chernoff_db(&self) -> T {
        T::lit(10.0) * self.chernoff.log10()
    }

    pub fn exact_db(&self) -> T {
        T::lit(10.0) * self.exact.log10()
    }
}

pub fn power_margin<T: Real>(p_o: T, p: &TurbulenceParams<T>) -> Result<MarginEstimate<T>> {
    p.validate()?;
    if !(p_o > T::zero()) {
        return Err(invalid(
            "p_o",
            format!("target outage must be > 0, got {p_o}"),
        ));
    }
    if !(p_o < T::lit(0.5)) {
        return Err(Error::Domain(format!(
            "target outage {p_o} >= 0.5 makes ln(2 p_o) non-negative"
        )));
    }
    let half = p.sigma2 / T::lit(2.0);
    let chernoff = ((-T::lit(2.0) * p.sigma2 * (T::lit(2.0) * p_o).ln()).sqrt() + half).exp();
    // outage is decreasing in ln m; at ln m = sigma^2/2 it equals 1/2 > p_o
    let mut lo = half;
    let mut hi = half + p.sigma();
    while outage_closed_form(hi.exp(), p)? > p_o {
        lo = hi;
        hi = half + (hi - half) * T::lit(2.0);
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if outage_closed_form(mid.exp(), p)? > p_o {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MarginEstimate {
        chernoff,
        exact: (T::lit(0.5) * (lo + hi)).exp(),
    })
}

fn check_order(order: usize) -> Result<()> {
    if (GH_ORDER_RANGE.0..=GH_ORDER_RANGE.1).contains(&order) {
        Ok(())
    } else {
        Err(invalid(
            "quad_order",
            format!(
                "must lie in [{}, {}], got {order}",
                GH_ORDER_RANGE.0, GH_ORDER_RANGE.1
            ),
        ))
    }
}

/// Average OOK bit-error rate by Gauss-Hermite quadrature,
/// `pi^{-1/2} sum_i w_i Q(arg(I0 exp(sigma sqrt2 t_i - sigma^2/2)))`.
pub fn ber_lognormal<T: Real>(
    snr_db: T,
    p: &TurbulenceParams<T>,
    quad_order: usize,
    q_norm: QNorm,
) -> Result<T> {
    check_order(quad_order)?;
    let link = LinkBudget::from_snr_db(p, snr_db)?;
    let gh = GaussHermite::<T>::new(quad_order)?;
    let scale = p.sigma() * T::SQRT_2();
    let half = p.sigma2 / T::lit(2.0);
    let sum = gh.apply(|t| q_norm.eval(link.q_argument(p.i0 * (scale * t - half).exp())));
    Ok(sum / T::PI().sqrt())
}

/// The same average by adaptive Gauss-Kronrod integration over the
/// standardized log-irradiance, truncated at `|t| <= 12`.
pub fn ber_adaptive<T: Real>(snr_db: T, p: &TurbulenceParams<T>, q_norm: QNorm) -> Result<T> {
    let link = LinkBudget::from_snr_db(p, snr_db)?;
    let scale = p.sigma() * T::SQRT_2();
    let half = p.sigma2 / T::lit(2.0);
    let f = |t: T| (-(t * t)).exp() * q_norm.eval(link.q_argument(p.i0 * (scale * t - half).exp()));
    let r = integrate(
        f,
        T::lit(-12.0),
        T::lit(12.0),
        T::zero(),
        T::EPS * T::lit(100.0),
        4000,
    )?;
    Ok(r.value / T::PI().sqrt())
}

/// Monte-Carlo OOK estimate with its Wilson score interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerEstimate {
    pub ber: f64,
    pub errors: u64,
    pub bits: u64,
    /// 95% Wilson interval.
    pub ci: (f64, f64),
    /// Set when too few errors were observed for a trustworthy interval.
    pub warning: Option<String>,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let ph = k as f64 / n;
    let z2 = z * z;
    let centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Equiprobable OOK over i.i.d. lognormal fades: a one is received as
/// `eta I + n`, a zero as `n`, with `n ~ N(0, N0 / 2)`; the receiver knows
/// `I` and slices at `eta I / 2`. Bits are drawn in blocks of [`MC_BLOCK`],
/// block `j` using stream `j` of `seed`.
pub fn ber_monte_carlo_link(
    link: &LinkBudget<f64>,
    n_bits: usize,
    seed: u64,
) -> Result<BerEstimate> {
    link.validate()?;
    if n_bits < MIN_MC_BITS {
        return Err(invalid(
            "n_bits",
            format!("need at least {MIN_MC_BITS}, got {n_bits}"),
        ));
    }
    let s = link.sigma2.sqrt();
    let half = link.sigma2 / 2.0;
    let noise_sd = (link.n0 / 2.0).sqrt();
    let blocks = n_bits.div_ceil(MC_BLOCK);
    let errors: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = MC_BLOCK.min(n_bits - b * MC_BLOCK);
            let mut src = NoiseSource::new(seed, b as u64);
            let mut errs = 0u64;
            for _ in 0..len {
                let bit = src.bit();
                let i = link.i0 * (s * src.gaussian::<f64>() - half).exp();
                let one = link.eta * i;
                let r = if bit { one } else { 0.0 } + noise_sd * src.gaussian::<f64>();
                if (r > 0.5 * one) != bit {
                    errs += 1;
                }
            }
            errs
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let bits = n_bits as u64;
    let warning = (errors < MC_MIN_ERRORS).then(|| {
        format!(
            "only {errors} errors in {bits} bits; the interval is wide relative to the estimate"
        )
    });
    Ok(BerEstimate {
        ber: errors as f64 / bits as f64,
        errors,
        bits,
        ci: wilson_interval(errors, bits, Z95),
        warning,
    })
}

pub fn ber_monte_carlo(
    snr_db: f64,
    p: &TurbulenceParams<f64>,
    n_bits: usize,
    seed: u64,
) -> Result<BerEstimate> {
    ber_monte_carlo_link(&LinkBudget::from_snr_db(p, snr_db)?, n_bits, seed)
}

/// Which metric a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Metric {
    /// Outage against margin in dB.
    Outage {
        method: Method,
    },
    /// Gauss-Hermite BER against SNR in dB.
    Ber {
        quad_order: usize,
        q_norm: QNorm,
    },
    BerMonteCarlo {
        n_bits: usize,
        seed: u64,
    },
}

/// One sampled curve with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCurve {
    pub metric: &'static str,
    pub axis_label: &'static str,
    pub method: Method,
    pub axis: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-point Wilson intervals of Monte-Carlo curves.
    pub ci: Option<Vec<(f64, f64)>>,
    pub sigma2: f64,
    pub params: TurbulenceParams<f64>,
    pub quad_order: Option<usize>,
    pub q_norm: Option<QNorm>,
    pub snr_mapping: Option<&'static str>,
}

pub const SNR_MAPPING: &str = "snr_db = 10 log10(eta^2 i0^2 / n0), eta = 1";

/// Evaluates `metric` on `axis` for every parameter set, one curve each.
pub fn sweep(
    metric: Metric,
    axis: &[f64],
    params: &[TurbulenceParams<f64>],
) -> Result<Vec<MetricCurve>> {
    if axis.is_empty() {
        return Err(invalid("axis", "sweep axis is empty"));
    }
    if params.is_empty() {
        return Err(invalid("params", "no parameter sets to sweep"));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(invalid("axis", "axis values must be finite"));
    }
    params
        .iter()
        .map(|p| {
            let mut curve = MetricCurve {
                metric: "outage",
                axis_label: "margin_db",
                method: Method::ClosedForm,
                axis: axis.to_vec(),
                values: Vec::with_capacity(axis.len()),
                ci: None,
                sigma2: p.sigma2,
                params: *p,
                quad_order: None,
                q_norm: None,
                snr_mapping: None,
            };
            match metric {
                Metric::Outage { method } => {
                    curve.method = method;
                    for &db in axis {
                        let m = 10f64.powf(db / 10.0);
                        curve.values.push(match method {
                            Method::ClosedForm => outage_closed_form(m, p)?,
                            Method::Quadrature => outage_probability(m, p)?,
                            Method::MonteCarlo => {
                                return Err(invalid("method", "outage curves are analytic only"))
                            }
                        });
                    }
                }
                Metric::Ber { quad_order, q_norm } => {
                    curve.metric = "ber";
                    curve.axis_label = "snr_db";
                    curve.method = Method::Quadrature;
                    curve.quad_order = Some(quad_order);
                    curve.q_norm = Some(q_norm);
                    curve.snr_mapping = Some(SNR_MAPPING);
                    for &db in axis {
                        curve.values.push(ber_lognormal(db, p, quad_order, q_norm)?);
                    }
                }
                Metric::BerMonteCarlo { n_bits, seed } => {
                    curve.metric = "ber";
                    curve.axis_label = "snr_db";
                    curve.method = Method::MonteCarlo;
                    curve.q_norm = Some(QNorm::Standard);
                    curve.snr_mapping = Some(SNR_MAPPING);
                    let mut ci = Vec::with_capacity(axis.len());
                    for &db in axis {
                        let e = ber_monte_carlo(db, p, n_bits, seed)?;
                        curve.values.push(e.ber);
                        ci.push(e.ci);
                    }
                    curve.ci = Some(ci);
                }
            }
            Ok(curve)
        })
        .collect()
}

/// Axis position where a decreasing curve first reaches `level`,
/// interpolated linearly in `log10(value)`.
pub fn crossing(curve: &MetricCurve, level: f64) -> Option<f64> {
    if !(level > 0.0) {
        return None;
    }
    let (x, v) = (&curve.axis, &curve.values);
    let j = v.iter().position(|&y| y <= level)?;
    if j == 0 {
        return (v[0] == level).then_some(x[0]);
    }
    let (y0, y1) = (v[j - 1], v[j]);
    if !(y1 > 0.0) {
        return Some(x[j]);
    }
    let (l0, l1, ll) = (y0.log10(), y1.log10(), level.log10());
    Some(x[j - 1] + (x[j] - x[j - 1]) * (l0 - ll) / (l0 - l1))
}

/// Horizontal distance `crossing(a) - crossing(b)` at `level`.
pub fn horizontal_gap(a: &MetricCurve, b: &MetricCurve, level: f64) -> Option<f64> {
    Some(crossing(a, level)? - crossing(b, level)?)
}
