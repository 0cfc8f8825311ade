//! Lognormal weak-turbulence channel: irradiance density, the discrete-time
//! channel-state recursion and its simulation.
//!
//! The channel state `x_p` follows
//!
//! ```text
//! x_{k+1} = a_p x_k + phi_eff(x_k) + b_p u_k + r_p w_k,   theta_k = c_p x_k
//! phi(x)  = -K / (2 sigma^2 x) * ln(x / I0)
//! K       = 2 I0^2 exp(sigma^2) (exp(sigma^2) - 1) / tau_c,   r_p = sqrt(K dt)
//! ```
//!
//! where `phi_eff` is `phi` optionally scaled by `dt` ([`DriftScaling`]) and
//! optionally shifted so that the diffusion limit is stationary on the
//! lognormal density itself ([`DriftForm`]).

mod estimate;

pub use estimate::{
    autocorrelation, correlation_time, estimate_lognormal, fit_report, histogram, FitReport,
    Histogram, LognormalEstimate,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::NoiseSource;
use crate::{std_normal_cdf, Real};

/// Upper edge of the weak-turbulence regime for the scintillation index.
pub const WEAK_TURBULENCE_LIMIT: f64 = 0.1;

/// Reflection floor relative to `I0`.
pub const REFLECTION_FLOOR: f64 = 1e-6;

/// Whether the drift term is multiplied by the sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DriftScaling {
    /// `phi(x) * dt`: the diffusion limit has a `dt`-independent stationary law.
    #[default]
    Dt,
    /// `phi(x)` added as printed, without a time factor.
    None,
}

/// Shape of the drift term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DriftForm {
    /// `phi(x) - 3K/(4x)`: with additive noise of intensity `K` this drift is
    /// `(K/2) d/dx ln p(x)` for the lognormal density `p`, so the stationary
    /// law is exactly the lognormal irradiance density.
    #[default]
    Stationary,
    /// `phi(x)` alone; its stationary law has log-mean `ln I0 + sigma^2`.
    Printed,
}

/// Parameters of the lognormal channel recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceParams<T> {
    /// Scintillation index (log-irradiance variance).
    pub sigma2: T,
    /// Turbulence-free irradiance.
    pub i0: T,
    /// Correlation time in seconds.
    pub tau_c: T,
    /// Sampling time in seconds.
    pub dt: T,
    pub a_p: T,
    pub b_p: T,
    pub c_p: T,
    #[serde(default)]
    pub drift_scaling: DriftScaling,
    #[serde(default)]
    pub drift_form: DriftForm,
}

impl<T: Real> TurbulenceParams<T> {
    /// Unit-coefficient channel (`a_p = b_p = c_p = 1`, `I0 = 1`).
    pub fn new(sigma2: T, tau_c: T, dt: T) -> Result<Self> {
        let p = Self {
            sigma2,
            i0: T::one(),
            tau_c,
            dt,
            a_p: T::one(),
            b_p: T::one(),
            c_p: T::one(),
            drift_scaling: DriftScaling::Dt,
            drift_form: DriftForm::Stationary,
        };
        p.validate()?;
        Ok(p)
    }

    /// sigma^2 = 0.0380, tau_c = 0.1 s, dt = 1 ms.
    pub fn paper_default() -> Self {
        Self::new(T::lit(0.0380), T::lit(0.1), T::lit(1e-3)).expect("default parameters are valid")
    }

    pub fn with_i0(mut self, i0: T) -> Result<Self> {
        self.i0 = i0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sigma2(mut self, sigma2: T) -> Result<Self> {
        self.sigma2 = sigma2;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        pos("sigma2", self.sigma2)?;
        pos("i0", self.i0)?;
        pos("tau_c", self.tau_c)?;
        pos("dt", self.dt)?;
        if self.dt >= self.tau_c {
            return Err(invalid(
                "dt",
                format!(
                    "sampling time {} must be below the correlation time {}",
                    self.dt, self.tau_c
                ),
            ));
        }
        for (name, v) in [("a_p", self.a_p), ("b_p", self.b_p), ("c_p", self.c_p)] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(self.k() > T::zero()) {
            return Err(invalid("sigma2", "K underflows to zero"));
        }
        Ok(())
    }

    /// Weak-turbulence regime flag: `sigma2` in `(0, 0.1]`.
    pub fn weak_turbulence(&self) -> bool {
        self.sigma2 > T::zero() && self.sigma2 <= T::lit(WEAK_TURBULENCE_LIMIT)
    }

    pub fn sigma(&self) -> T {
        self.sigma2.sqrt()
    }

    /// Diffusion coefficient `K`.
    pub fn k(&self) -> T {
        let e = self.sigma2.exp();
        T::lit(2.0) * self.i0 * self.i0 * e * self.sigma2.exp_m1() / self.tau_c
    }

    /// Noise gain `r_p = sqrt(K dt)`.
    pub fn r_p(&self) -> T {
        (self.k() * self.dt).sqrt()
    }

    pub fn reflection_floor(&self) -> T {
        T::lit(REFLECTION_FLOOR) * self.i0
    }

    fn drift_factor(&self) -> T {
        match self.drift_scaling {
            DriftScaling::Dt => self.dt,
            DriftScaling::None => T::one(),
        }
    }

    /// Log-offset `c` such that the effective drift is `-K/(2 sigma^2 x) (ln(x/I0) + c)`.
    pub fn drift_log_offset(&self) -> T {
        match self.drift_form {
            DriftForm::Stationary => T::lit(1.5) * self.sigma2,
            DriftForm::Printed => T::zero(),
        }
    }

    /// Per-step drift increment `phi_eff(x)` used by the recursion.
    pub fn drift_increment(&self, x: T) -> Result<T> {
        if !(x > T::zero()) {
            return Err(Error::Domain(format!(
                "drift evaluated at non-positive state {x}"
            )));
        }
        let k = self.k();
        let base =
            -k / (T::lit(2.0) * self.sigma2 * x) * ((x / self.i0).ln() + self.drift_log_offset());
        Ok(self.drift_factor() * base)
    }

    /// Derivative of [`Self::drift_increment`] with respect to `x`.
    pub fn drift_slope(&self, x: T) -> Result<T> {
        if !(x > T::zero()) {
            return Err(Error::Domain(format!(
                "drift evaluated at non-positive state {x}"
            )));
        }
        let g = self.drift_factor() * self.k() / (T::lit(2.0) * self.sigma2);
        Ok(-g * (T::one() - (x / self.i0).ln() - self.drift_log_offset()) / (x * x))
    }

    /// Fixed point of the noise-free, uncontrolled recursion:
    /// `a_p x + phi_eff(x) = x`.
    pub fn operating_point(&self) -> Result<T> {
        let zero_of_drift = self.i0 * (-self.drift_log_offset()).exp();
        if self.a_p == T::one() {
            return Ok(zero_of_drift);
        }
        if self.a_p > T::one() {
            return Err(Error::Unstable(format!(
                "a_p = {} > 1 has no positive operating point",
                self.a_p
            )));
        }
        // g(x) = (a_p - 1) x + phi_eff(x) is +inf at 0+ and negative at the drift zero.
        let g = |x: T| (self.a_p - T::one()) * x + self.drift_increment(x).unwrap_or(T::infinity());
        let mut lo = zero_of_drift;
        while g(lo) <= T::zero() {
            lo = lo * T::lit(0.5);
            if lo < T::lit(1e-300_f64.max(T::min_positive_value().as_f64())) {
                return Err(Error::Domain("operating point search underflowed".into()));
            }
        }
        let mut hi = zero_of_drift;
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if g(mid) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::lit(4.0) * T::EPS * hi {
                break;
            }
        }
        Ok(T::lit(0.5) * (lo + hi))
    }
}

/// Lognormal irradiance density with turbulence-free level `I0` and
/// scintillation index `sigma^2`; its mean is `I0`.
pub fn lognormal_pdf<T: Real>(i: T, p: &TurbulenceParams<T>) -> Result<T> {
    p.validate()?;
    if !(i > T::zero()) {
        return Err(Error::Domain(format!("irradiance must be > 0, got {i}")));
    }
    let s2 = p.sigma2;
    let z = (i / p.i0).ln() + s2 / T::lit(2.0);
    Ok((-(z * z) / (T::lit(2.0) * s2)).exp() / (i * (T::lit(2.0) * T::PI() * s2).sqrt()))
}

/// Lognormal CDF `P(I <= i)`.
pub fn lognormal_cdf<T: Real>(i: T, p: &TurbulenceParams<T>) -> T {
    if i <= T::zero() {
        return T::zero();
    }
    std_normal_cdf(((i / p.i0).ln() + p.sigma2 / T::lit(2.0)) / p.sigma())
}

/// Diffusion coefficient `K = 2 I0^2 e^{sigma^2} (e^{sigma^2} - 1) / tau_c`.
pub fn k_coefficient<T: Real>(p: &TurbulenceParams<T>) -> Result<T> {
    p.validate()?;
    Ok(p.k())
}

/// Drift `phi(x) = -K/(2 sigma^2 x) ln(x/I0)` without time scaling or offset.
pub fn drift<T: Real>(x: T, p: &TurbulenceParams<T>) -> Result<T> {
    if !(x > T::zero()) {
        return Err(Error::Domain(format!("drift requires x > 0, got {x}")));
    }
    Ok(-p.k() / (T::lit(2.0) * p.sigma2 * x) * (x / p.i0).ln())
}

/// Channel state: `x_p` and the transmitter beam position `theta = c_p x_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState<T> {
    pub x_p: T,
    pub theta: T,
}

impl<T: Real> ChannelState<T> {
    pub fn new(x_p: T, p: &TurbulenceParams<T>) -> Result<Self> {
        if !(x_p > T::zero()) || !x_p.is_finite() {
            return Err(Error::Domain(format!(
                "channel state must be finite and > 0, got {x_p}"
            )));
        }
        Ok(Self {
            x_p,
            theta: p.c_p * x_p,
        })
    }
}

/// One step of the recursion, with the reflection flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStep<T> {
    pub state: ChannelState<T>,
    pub reflected: bool,
}

/// Reflects `x` about the floor when it falls below it.
pub(crate) fn reflect<T: Real>(x: T, floor: T) -> (T, bool) {
    if x < floor {
        (T::lit(2.0) * floor - x, true)
    } else {
        (x, false)
    }
}

/// Advances the channel state by one sample.
pub fn channel_step<T: Real>(
    s: &ChannelState<T>,
    u_p: T,
    w_p: T,
    p: &TurbulenceParams<T>,
) -> Result<ChannelStep<T>> {
    let next = p.a_p * s.x_p + p.drift_increment(s.x_p)? + p.b_p * u_p + p.r_p() * w_p;
    if !next.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    let (x, reflected) = reflect(next, p.reflection_floor());
    Ok(ChannelStep {
        state: ChannelState {
            x_p: x,
            theta: p.c_p * x,
        },
        reflected,
    })
}

/// One recorded sample of a channel trajectory (`t = k dt`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelSample<T> {
    pub k: usize,
    pub t: T,
    pub x_p: T,
    pub theta: T,
    pub u_p: T,
    pub w_p: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrajectory<T> {
    /// States `x_0 .. x_steps`.
    pub x_p: Vec<T>,
    /// Recorded rows (every `record_every` steps, including `k = 0`).
    pub rows: Vec<ChannelSample<T>>,
    pub reflections: usize,
}

/// Simulates `steps` transitions from `x0` under the control law `control(k, x)`.
pub fn simulate_channel<T: Real>(
    p: &TurbulenceParams<T>,
    x0: T,
    steps: usize,
    noise: &mut NoiseSource,
    record_every: usize,
    mut control: impl FnMut(usize, T) -> T,
) -> Result<ChannelTrajectory<T>> {
    p.validate()?;
    let record_every = record_every.max(1);
    let mut state = ChannelState::new(x0, p)?;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut rows = Vec::with_capacity(steps / record_every + 1);
    let mut reflections = 0;
    xs.push(x0);
    for k in 0..steps {
        let u = control(k, state.x_p);
        let w: T = noise.gaussian();
        if k % record_every == 0 {
            rows.push(ChannelSample {
                k,
                t: T::lit(k as f64) * p.dt,
                x_p: state.x_p,
                theta: state.theta,
                u_p: u,
                w_p: w,
            });
        }
        let step = channel_step(&state, u, w, p).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { step: k },
            other => other,
        })?;
        reflections += usize::from(step.reflected);
        state = step.state;
        xs.push(state.x_p);
    }
    Ok(ChannelTrajectory {
        x_p: xs,
        rows,
        reflections,
    })
}
