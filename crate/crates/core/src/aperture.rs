//! Receiving-aperture displacement as an overdamped Brownian particle in a
//! harmonic trap, discretized to an AR(1) recursion
//! `x_{k+1} = a_l x_k + r_l w_k`, `alpha_k = c_l x_k`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::NoiseSource;
use crate::Real;

/// Noise gain convention for the discretized trap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ApertureNoise {
    /// `r_l = sqrt(2 (kBT / gamma1) dT)`, the Euler step of the overdamped Langevin equation.
    #[default]
    Physical,
    /// `r_l = sqrt(2 kBT gamma1)`, as printed (no step or mobility factor).
    Paper,
}

/// Physical parameters of the trapped particle. The particle mass is dropped
/// (overdamped limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureParams<T> {
    /// Friction coefficient.
    pub gamma1: T,
    /// Trap stiffness.
    pub k1: T,
    /// Thermal energy `k_B T`.
    pub kbt: T,
    /// Discretization step.
    pub d_t: T,
    #[serde(default)]
    pub noise: ApertureNoise,
}

/// AR(1) coefficients derived from [`ApertureParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApertureCoefficients<T> {
    pub a_l: T,
    pub r_l: T,
    pub c_l: T,
    /// `false` when `|a_l| = 1` (random walk, no stationary variance).
    pub stationary: bool,
}

impl<T: Real> ApertureCoefficients<T> {
    /// `r_l^2 / (1 - a_l^2)`; infinite for a random walk.
    pub fn stationary_variance(&self) -> T {
        if self.stationary {
            self.r_l * self.r_l / (T::one() - self.a_l * self.a_l)
        } else {
            T::infinity()
        }
    }
}

/// Maps trap physics to `(a_l, r_l, c_l)`. Fails when `|a_l| > 1`.
pub fn aperture_params_from_physics<T: Real>(
    gamma1: T,
    k1: T,
    kbt: T,
    d_t: T,
    noise: ApertureNoise,
) -> Result<ApertureCoefficients<T>> {
    let finite_pos = |name, v: T| {
        if v > T::zero() && v.is_finite() {
            Ok(())
        } else {
            Err(invalid(name, format!("must be finite and > 0, got {v}")))
        }
    };
    finite_pos("gamma1", gamma1)?;
    finite_pos("kbt", kbt)?;
    finite_pos("d_t", d_t)?;
    if !(k1 >= T::zero()) || !k1.is_finite() {
        return Err(invalid("k1", format!("must be finite and >= 0, got {k1}")));
    }
    let a_l = T::one() - k1 * d_t / gamma1;
    if a_l.abs() > T::one() {
        return Err(Error::Unstable(format!(
            "|a_l| = |1 - k1 dT / gamma1| = {} exceeds 1",
            a_l.abs()
        )));
    }
    let r_l = match noise {
        ApertureNoise::Physical => (T::lit(2.0) * kbt / gamma1 * d_t).sqrt(),
        ApertureNoise::Paper => (T::lit(2.0) * kbt * gamma1).sqrt(),
    };
    Ok(ApertureCoefficients {
        a_l,
        r_l,
        c_l: T::one(),
        stationary: a_l.abs() < T::one(),
    })
}

impl<T: Real> ApertureParams<T> {
    pub fn coefficients(&self) -> Result<ApertureCoefficients<T>> {
        aperture_params_from_physics(self.gamma1, self.k1, self.kbt, self.d_t, self.noise)
    }

    /// Physical parameters (with `gamma1 = 1`) reproducing a target AR(1)
    /// coefficient and stationary standard deviation under the physical noise
    /// convention.
    pub fn from_ar1(a_l: T, std_dev: T, d_t: T) -> Result<Self> {
        if !(a_l > -T::one() && a_l < T::one()) {
            return Err(invalid(
                "a_l",
                "target AR(1) coefficient must lie in (-1, 1)",
            ));
        }
        if !(std_dev > T::zero()) || !(d_t > T::zero()) {
            return Err(invalid(
                "std_dev",
                "standard deviation and step must be > 0",
            ));
        }
        let gamma1 = T::one();
        let r2 = std_dev * std_dev * (T::one() - a_l * a_l);
        Ok(Self {
            gamma1,
            k1: (T::one() - a_l) * gamma1 / d_t,
            kbt: r2 * gamma1 / (T::lit(2.0) * d_t),
            d_t,
            noise: ApertureNoise::Physical,
        })
    }

    /// `a_l = 0.98` with a stationary displacement standard deviation of 0.03.
    pub fn preset_default() -> Self {
        Self::from_ar1(T::lit(0.98), T::lit(0.03), T::lit(1e-3)).expect("preset is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureState<T> {
    pub x_l: T,
    pub alpha: T,
}

impl<T: Real> ApertureState<T> {
    pub fn new(x_l: T, c: &ApertureCoefficients<T>) -> Self {
        Self {
            x_l,
            alpha: c.c_l * x_l,
        }
    }
}

pub fn aperture_step<T: Real>(
    s: &ApertureState<T>,
    w_l: T,
    c: &ApertureCoefficients<T>,
) -> Result<ApertureState<T>> {
    let x_l = c.a_l * s.x_l + c.r_l * w_l;
    if !x_l.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(ApertureState {
        x_l,
        alpha: c.c_l * x_l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApertureSample<T> {
    pub k: usize,
    pub t: T,
    pub x_l: T,
    pub alpha: T,
    pub w_l: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApertureTrajectory<T> {
    pub x_l: Vec<T>,
    pub rows: Vec<ApertureSample<T>>,
}

pub fn simulate_aperture<T: Real>(
    c: &ApertureCoefficients<T>,
    d_t: T,
    x0: T,
    steps: usize,
    noise: &mut NoiseSource,
    record_every: usize,
) -> Result<ApertureTrajectory<T>> {
    let record_every = record_every.max(1);
    let mut s = ApertureState::new(x0, c);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut rows = Vec::with_capacity(steps / record_every + 1);
    xs.push(x0);
    for k in 0..steps {
        let w: T = noise.gaussian();
        if k % record_every == 0 {
            rows.push(ApertureSample {
                k,
                t: T::lit(k as f64) * d_t,
                x_l: s.x_l,
                alpha: s.alpha,
                w_l: w,
            });
        }
        s = aperture_step(&s, w, c).map_err(|_| Error::NonFinite { step: k })?;
        xs.push(s.x_l);
    }
    Ok(ApertureTrajectory { x_l: xs, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_formulas() {
        let c =
            aperture_params_from_physics(2.0f64, 0.0, 1.0, 0.1, ApertureNoise::Physical).unwrap();
        assert_eq!(c.a_l, 1.0);
        assert!(!c.stationary);
        assert!(c.stationary_variance().is_infinite());

        // k1 dT / gamma1 = 0.01
        let c =
            aperture_params_from_physics(2.0f64, 0.2, 1.0, 0.1, ApertureNoise::Physical).unwrap();
        assert!((c.a_l - 0.99).abs() < 1e-15);
        assert!((c.r_l - (2.0f64 * 0.5 * 0.1).sqrt()).abs() < 1e-15);
        assert_eq!(c.c_l, 1.0);

        let c = aperture_params_from_physics(2.0f64, 0.2, 1.0, 0.1, ApertureNoise::Paper).unwrap();
        assert!((c.r_l - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unstable_trap_rejected() {
        // k1 dT / gamma1 = 2.5
        let r = aperture_params_from_physics(1.0, 25.0, 1.0, 0.1, ApertureNoise::Physical);
        assert!(matches!(r, Err(Error::Unstable(_))));
        assert!(aperture_params_from_physics(0.0, 1.0, 1.0, 0.1, ApertureNoise::Physical).is_err());
        assert!(
            aperture_params_from_physics(1.0, -1.0, 1.0, 0.1, ApertureNoise::Physical).is_err()
        );
    }

    #[test]
    fn origin_is_fixed_without_noise() {
        let c = ApertureParams::<f64>::preset_default()
            .coefficients()
            .unwrap();
        let s = aperture_step(&ApertureState::new(0.0, &c), 0.0, &c).unwrap();
        assert_eq!(s.x_l, 0.0);
        assert_eq!(s.alpha, 0.0);
    }

    #[test]
    fn from_ar1_round_trips() {
        let p = ApertureParams::<f64>::from_ar1(0.98, 0.03, 1e-3).unwrap();
        let c = p.coefficients().unwrap();
        assert!((c.a_l - 0.98).abs() < 1e-12);
        assert!((c.stationary_variance().sqrt() - 0.03).abs() < 1e-12);
    }
}
