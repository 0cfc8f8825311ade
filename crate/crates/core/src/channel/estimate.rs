//! Parameter estimation and goodness-of-fit against the lognormal density.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{lognormal_cdf, TurbulenceParams};
use crate::error::{invalid, Error, Result};
use crate::Real;

/// Minimum sample count accepted by [`estimate_lognormal`].
pub const MIN_ESTIMATION_SAMPLES: usize = 100;
/// Minimum histogram resolution.
pub const MIN_BINS: usize = 10;
/// Bins whose expected count is below this are left out of the chi-square sum.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LognormalEstimate<T> {
    pub sigma2: T,
    pub i0: T,
}

/// Moment matching on the logarithms: `sigma2` is the sample variance of
/// `ln I` and `I0 = exp(mean(ln I) + sigma2 / 2)`.
pub fn estimate_lognormal<T: Real>(samples: &[T]) -> Result<LognormalEstimate<T>> {
    if samples.len() < MIN_ESTIMATION_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_ESTIMATION_SAMPLES,
            got: samples.len(),
        });
    }
    if let Some((index, &v)) = samples.iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
        return Err(Error::NonPositiveSample {
            index,
            value: v.as_f64(),
        });
    }
    let n = T::lit(samples.len() as f64);
    let mean = samples.iter().map(|v| v.ln()).sum::<T>() / n;
    let ss = samples
        .iter()
        .map(|v| {
            let d = v.ln() - mean;
            d * d
        })
        .sum::<T>();
    let sigma2 = ss / (n - T::one());
    Ok(LognormalEstimate {
        sigma2,
        i0: (mean + sigma2 / T::lit(2.0)).exp(),
    })
}

/// Equal-width histogram over the sample range, normalized to a density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram<T> {
    pub edges: Vec<T>,
    pub counts: Vec<usize>,
    pub density: Vec<T>,
    pub total: usize,
}

impl<T: Real> Histogram<T> {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centres(&self) -> impl Iterator<Item = T> + '_ {
        self.edges.windows(2).map(|w| T::lit(0.5) * (w[0] + w[1]))
    }
}

pub fn histogram<T: Real>(samples: &[T], bins: usize) -> Result<Histogram<T>> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if bins < MIN_BINS {
        return Err(invalid(
            "bins",
            format!("need at least {MIN_BINS} bins, got {bins}"),
        ));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("histogram samples must be finite".into()));
    }
    let lo = samples.iter().copied().fold(T::infinity(), T::min);
    let hi = samples.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return Err(Error::Domain(
            "histogram of a constant sample has zero width".into(),
        ));
    }
    let width = (hi - lo) / T::lit(bins as f64);
    let edges: Vec<T> = (0..=bins)
        .map(|j| {
            if j == bins {
                hi
            } else {
                lo + width * T::lit(j as f64)
            }
        })
        .collect();
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let j = ((v - lo) / width)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(bins - 1);
        counts[j] += 1;
    }
    let total = samples.len();
    let density = counts
        .iter()
        .map(|&c| T::lit(c as f64) / (T::lit(total as f64) * width))
        .collect();
    Ok(Histogram {
        edges,
        counts,
        density,
        total,
    })
}

/// Pearson chi-square comparison of a histogram with the lognormal density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub chi2: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
    /// Upper-tail probability of `chi2` under the chi-square law with `dof`.
    pub p_value: f64,
    pub bins_used: usize,
}

pub fn fit_report<T: Real>(h: &Histogram<T>, p: &TurbulenceParams<T>) -> Result<FitReport> {
    p.validate()?;
    if h.total == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let n = h.total as f64;
    let mut chi2 = 0.0;
    let mut used = 0usize;
    for (j, &observed) in h.counts.iter().enumerate() {
        let mass = (lognormal_cdf(h.edges[j + 1], p) - lognormal_cdf(h.edges[j], p)).as_f64();
        let expected = n * mass;
        if expected < MIN_EXPECTED_COUNT {
            continue;
        }
        let d = observed as f64 - expected;
        chi2 += d * d / expected;
        used += 1;
    }
    if used < 2 {
        return Err(Error::Domain(
            "fewer than two bins carry enough expected mass for a chi-square test".into(),
        ));
    }
    let dof = used - 1;
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| d.sf(chi2))
        .unwrap_or(f64::NAN);
    Ok(FitReport {
        chi2,
        dof,
        chi2_per_dof: chi2 / dof as f64,
        p_value,
        bins_used: used,
    })
}

/// Sample autocorrelation at lags `0..=max_lag` (biased normalization).
pub fn autocorrelation<T: Real>(xs: &[T], max_lag: usize) -> Result<Vec<T>> {
    if xs.len() < 2 || max_lag >= xs.len() {
        return Err(Error::TooFewSamples {
            needed: max_lag + 2,
            got: xs.len(),
        });
    }
    let n = T::lit(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let centred: Vec<T> = xs.iter().map(|&x| x - mean).collect();
    let c0 = centred.iter().map(|&d| d * d).sum::<T>();
    if !(c0 > T::zero()) {
        return Err(Error::Domain("autocorrelation of a constant series".into()));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            centred[..centred.len() - lag]
                .iter()
                .zip(&centred[lag..])
                .map(|(&a, &b)| a * b)
                .sum::<T>()
                / c0
        })
        .collect())
}

/// Correlation time from an exponential fit `rho(k) = exp(-k dt / tau)`:
/// least squares through the origin of `-ln rho` against `k dt`, over the
/// leading lags where `rho > exp(-2)`.
pub fn correlation_time<T: Real>(acf: &[T], dt: T) -> Result<T> {
    let cutoff = T::lit((-2.0f64).exp());
    let mut num = T::zero();
    let mut den = T::zero();
    let mut used = 0;
    for (k, &r) in acf.iter().enumerate().skip(1) {
        if !(r > cutoff) {
            break;
        }
        let t = T::lit(k as f64) * dt;
        num = num + t * t;
        den = den + t * (-r.ln());
        used += 1;
    }
    if used < 2 || !(den > T::zero()) {
        return Err(Error::Domain(
            "autocorrelation decays too fast (or not at all) to fit a correlation time".into(),
        ));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_constant_sample() {
        let xs = vec![3.5f64; 200];
        let est = estimate_lognormal(&xs).unwrap();
        assert!(est.sigma2.abs() < 1e-25);
        assert!((est.i0 - 3.5).abs() < 1e-12);
    }

    #[test]
    fn estimator_rejects_bad_samples() {
        let mut xs = vec![1.0f64; 150];
        xs[37] = 0.0;
        assert_eq!(
            estimate_lognormal(&xs),
            Err(Error::NonPositiveSample {
                index: 37,
                value: 0.0
            })
        );
        assert!(matches!(
            estimate_lognormal(&[1.0f64; 99]),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn histogram_edge_cases() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(histogram(&xs, 1).is_err());
        assert!(histogram(&xs, 9).is_err());
        assert!(histogram::<f64>(&[], 20).is_err());
        let h = histogram(&xs, 10).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 100);
        assert!(h.counts.iter().all(|&c| c == 10));
        let width = h.edges[1] - h.edges[0];
        let area: f64 = h.density.iter().map(|d| d * width).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn acf_of_ar1_recovers_time_constant() {
        // deterministic AR(1) driven by a fixed pseudo-random sequence
        let mut src = crate::NoiseSource::new(5, 0);
        let a: f64 = (-0.01f64).exp();
        let mut x = 0.0;
        let xs: Vec<f64> = (0..400_000)
            .map(|_| {
                x = a * x + src.gaussian::<f64>();
                x
            })
            .collect();
        let acf = autocorrelation(&xs, 400).unwrap();
        assert!((acf[0] - 1.0).abs() < 1e-12);
        let tau = correlation_time(&acf, 1e-3).unwrap();
        assert!((tau / 0.1 - 1.0).abs() < 0.1, "{tau}");
    }
}
