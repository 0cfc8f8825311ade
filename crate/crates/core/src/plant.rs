//! Augmented two-state pointing plant
//!
//! ```text
//! x_{k+1} = A x_k + phi(x_k) + B u_k + R w_k,   eps_k = C x_k,   y_k = d eps_k
//! ```
//!
//! with `x = (x_p, x_l)`, `phi(x) = (phi_eff(x_p), 0)` and a certified
//! quadratic bound `phi^T phi <= x^T H^T H x` on a validity interval of `x_p`.
//!
//! The bound and the controller are expressed in a [`Frame`]: either about the
//! origin (absolute states) or about the noise-free operating point
//! `x_op = (x_bar, 0)` of the uncontrolled plant, where the shifted
//! nonlinearity `psi(z) = phi(x_op + z) - phi(x_op)` vanishes at `z = 0`.

use nalgebra::{Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use crate::aperture::{ApertureCoefficients, ApertureParams};
use crate::channel::{reflect, TurbulenceParams};
use crate::error::{invalid, Error, Result};

/// Safety factor applied on top of the computed sector gain.
pub const LIPSCHITZ_MARGIN: f64 = 1.05;
/// Sector gains above this are treated as unbounded.
pub const MAX_SECTOR_GAIN: f64 = 1e6;
const SCAN_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputMatrix {
    /// `C = [c_p, -c_l]`, so that `eps = theta - alpha`.
    #[default]
    Derived,
    /// `C = [r_p, -r_l]` as printed.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMatrix {
    /// `R = diag(r_p, r_l)` driven by independent `w_p`, `w_l`.
    #[default]
    Diagonal,
    /// `R = [r_p; r_l]` driven by one shared scalar noise.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// States measured from the operating point `x_op`.
    #[default]
    Deviation,
    /// States measured from the origin.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlantConventions {
    #[serde(default)]
    pub output_matrix: OutputMatrix,
    #[serde(default)]
    pub noise_matrix: NoiseMatrix,
    #[serde(default)]
    pub frame: Frame,
}

impl PlantConventions {
    /// Printed `C` and `R`.
    pub fn paper() -> Self {
        Self {
            output_matrix: OutputMatrix::Paper,
            noise_matrix: NoiseMatrix::Paper,
            frame: Frame::Deviation,
        }
    }
}

/// Sector gain `h` with `|psi(x)| <= h |x - centre|` on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCertificate {
    /// Gain including [`LIPSCHITZ_MARGIN`].
    pub h: f64,
    /// Supremum before the margin.
    pub sup: f64,
    pub argmax: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub centre: f64,
}

/// Computes the sector gain of the per-step channel drift about `centre`
/// (`0` for the absolute frame, the operating point for the deviation frame).
///
/// The supremum of `|phi(x) - phi(centre)| / |x - centre|` is located by a
/// log-spaced scan and refined by golden-section search around the best scan
/// point; interval endpoints are always evaluated.
pub fn certify_lipschitz(
    tp: &TurbulenceParams<f64>,
    x_min: f64,
    x_max: f64,
    frame: Frame,
) -> Result<LipschitzCertificate> {
    tp.validate()?;
    if !(x_min > 0.0) || !x_min.is_finite() {
        return Err(Error::Domain(format!(
            "x_min must be > 0 (the drift is singular at 0), got {x_min}"
        )));
    }
    if !(x_max > x_min) || !x_max.is_finite() {
        return Err(invalid(
            "x_max",
            format!("validity interval [{x_min}, {x_max}] has no width"),
        ));
    }
    let centre = match frame {
        Frame::Absolute => 0.0,
        Frame::Deviation => tp.operating_point()?,
    };
    let anchor = match frame {
        Frame::Absolute => tp.i0,
        Frame::Deviation => centre,
    };
    if !(x_min < anchor && anchor < x_max) {
        return Err(invalid(
            "x_min",
            format!("validity interval [{x_min}, {x_max}] must contain {anchor}"),
        ));
    }
    let phi_c = if centre > 0.0 {
        tp.drift_increment(centre)?
    } else {
        0.0
    };
    let ratio = |x: f64| -> f64 {
        let dx = x - centre;
        if dx.abs() <= 1e-9 * centre.abs().max(1e-300) {
            tp.drift_slope(x).map(f64::abs).unwrap_or(f64::INFINITY)
        } else {
            ((tp.drift_increment(x).unwrap_or(f64::INFINITY) - phi_c) / dx).abs()
        }
    };
    let (la, lb) = (x_min.ln(), x_max.ln());
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| {
            if i == 0 {
                x_min
            } else if i == SCAN_POINTS - 1 {
                x_max
            } else {
                (la + (lb - la) * i as f64 / (SCAN_POINTS - 1) as f64).exp()
            }
        })
        .collect();
    let (best_i, mut best) =
        grid.iter()
            .map(|&x| ratio(x))
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    let mut argmax = grid[best_i];
    // golden section on the neighbouring bracket
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(SCAN_POINTS - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (ratio(c), ratio(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * b.abs() {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ratio(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ratio(d);
        }
    }
    for (x, v) in [
        (c, fc),
        (d, fd),
        (x_min, ratio(x_min)),
        (x_max, ratio(x_max)),
    ] {
        if v > best {
            best = v;
            argmax = x;
        }
    }
    if !best.is_finite() || best * LIPSCHITZ_MARGIN > MAX_SECTOR_GAIN {
        return Err(Error::Domain(format!(
            "sector gain {best:e} is unbounded on [{x_min}, {x_max}]; increase x_min"
        )));
    }
    if best == 0.0 {
        return Err(invalid(
            "x_min",
            "validity interval yields a zero sector gain",
        ));
    }
    Ok(LipschitzCertificate {
        h: best * LIPSCHITZ_MARGIN,
        sup: best,
        argmax,
        x_min,
        x_max,
        centre,
    })
}

/// Linear time-invariant data plus the channel nonlinearity and its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPlant {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    /// Noise matrix; only the first `noise_dim` columns are used.
    pub r: Matrix2<f64>,
    pub noise_dim: usize,
    pub c: RowVector2<f64>,
    pub h: RowVector2<f64>,
    /// Link distance (gain from `eps` to `y`).
    pub d: f64,
    /// Operating point of the frame in which `H` and the controller are expressed.
    pub origin: Vector2<f64>,
    pub conventions: PlantConventions,
    pub channel: Option<TurbulenceParams<f64>>,
    pub aperture: Option<ApertureCoefficients<f64>>,
    pub lipschitz: Option<LipschitzCertificate>,
}

/// Default validity interval of the sector bound, relative to `I0`.
pub const DEFAULT_DOMAIN: (f64, f64) = (0.25, 4.0);

/// Assembles the augmented plant from the channel and aperture models.
pub fn build_augmented(
    tp: &TurbulenceParams<f64>,
    ap: &ApertureParams<f64>,
    d: f64,
    conventions: PlantConventions,
    domain: (f64, f64),
) -> Result<AugmentedPlant> {
    tp.validate()?;
    let coeffs = ap.coefficients()?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(invalid("d", format!("link distance must be > 0, got {d}")));
    }
    let cert = certify_lipschitz(tp, domain.0 * tp.i0, domain.1 * tp.i0, conventions.frame)?;
    let r_p = tp.r_p();
    let (r, noise_dim) = match conventions.noise_matrix {
        NoiseMatrix::Diagonal => (Matrix2::new(r_p, 0.0, 0.0, coeffs.r_l), 2),
        NoiseMatrix::Paper => (Matrix2::new(r_p, 0.0, coeffs.r_l, 0.0), 1),
    };
    let c = match conventions.output_matrix {
        OutputMatrix::Derived => RowVector2::new(tp.c_p, -coeffs.c_l),
        OutputMatrix::Paper => RowVector2::new(r_p, -coeffs.r_l),
    };
    let origin = match conventions.frame {
        Frame::Absolute => Vector2::zeros(),
        Frame::Deviation => Vector2::new(cert.centre, 0.0),
    };
    Ok(AugmentedPlant {
        a: Matrix2::new(tp.a_p, 0.0, 0.0, coeffs.a_l),
        b: Vector2::new(tp.b_p, 0.0),
        r,
        noise_dim,
        c,
        h: RowVector2::new(cert.h, 0.0),
        d,
        origin,
        conventions,
        channel: Some(*tp),
        aperture: Some(coeffs),
        lipschitz: Some(cert),
    })
}

impl AugmentedPlant {
    /// Plant given directly by its matrices, with no channel nonlinearity
    /// attached (the sector bound `H` is then an abstract uncertainty bound).
    pub fn from_matrices(
        a: Matrix2<f64>,
        b: Vector2<f64>,
        r: Matrix2<f64>,
        c: RowVector2<f64>,
        h: RowVector2<f64>,
    ) -> Self {
        Self {
            a,
            b,
            r,
            noise_dim: 2,
            c,
            h,
            d: 1.0,
            origin: Vector2::zeros(),
            conventions: PlantConventions {
                frame: Frame::Absolute,
                ..PlantConventions::default()
            },
            channel: None,
            aperture: None,
            lipschitz: None,
        }
    }

    /// Output row mapping the state to the pointing error `y`.
    pub fn output_row(&self) -> RowVector2<f64> {
        self.c * self.d
    }

    pub fn noise_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(2, self.noise_dim, |i, j| self.r[(i, j)])
    }

    /// Channel drift increment at the absolute channel state.
    pub fn drift(&self, x_p: f64) -> Result<f64> {
        match &self.channel {
            Some(tp) => tp.drift_increment(x_p),
            None => Ok(0.0),
        }
    }

    /// Nonlinearity in the plant frame: `psi(z) = phi(origin + z) - phi(origin)`.
    pub fn frame_nonlinearity(&self, z: &Vector2<f64>) -> Result<Vector2<f64>> {
        let x_p = self.origin[0] + z[0];
        let base = if self.origin[0] > 0.0 {
            self.drift(self.origin[0])?
        } else {
            0.0
        };
        Ok(Vector2::new(self.drift(x_p)? - base, 0.0))
    }

    /// Whether the channel state lies in the certified interval.
    pub fn in_domain(&self, x_p: f64) -> bool {
        match &self.lipschitz {
            Some(c) => x_p >= c.x_min && x_p <= c.x_max,
            None => true,
        }
    }

    pub fn state(&self, x: Vector2<f64>) -> PlantState {
        let eps = (self.c * x)[0];
        PlantState {
            x,
            eps,
            y: self.d * eps,
        }
    }

    /// Serializable snapshot with row-major matrices.
    pub fn record(&self) -> PlantRecord {
        let rows2 = |m: &Matrix2<f64>, cols: usize| -> Vec<Vec<f64>> {
            (0..2)
                .map(|i| (0..cols).map(|j| m[(i, j)]).collect())
                .collect()
        };
        PlantRecord {
            a: rows2(&self.a, 2),
            b: vec![vec![self.b[0]], vec![self.b[1]]],
            r: rows2(&self.r, self.noise_dim),
            c: vec![vec![self.c[0], self.c[1]]],
            h: vec![vec![self.h[0], self.h[1]]],
            d: self.d,
            origin: vec![self.origin[0], self.origin[1]],
            conventions: self.conventions,
            channel: self.channel,
            aperture: self.aperture,
            lipschitz: self.lipschitz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantRecord {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub d: f64,
    pub origin: Vec<f64>,
    pub conventions: PlantConventions,
    pub channel: Option<TurbulenceParams<f64>>,
    pub aperture: Option<ApertureCoefficients<f64>>,
    pub lipschitz: Option<LipschitzCertificate>,
}

/// Absolute plant state with its outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub x: Vector2<f64>,
    /// Misalignment `C x`.
    pub eps: f64,
    /// Pointing error `d C x`.
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantStep {
    pub state: PlantState,
    pub reflected: bool,
}

/// Advances the absolute plant state. `w` holds `(w_p, w_l)`; with the
/// printed noise matrix only `w[0]` is used.
pub fn plant_step(
    s: &PlantState,
    u: f64,
    w: &Vector2<f64>,
    plant: &AugmentedPlant,
) -> Result<PlantStep> {
    let x = &s.x;
    if plant.channel.is_some() && !(x[0] > 0.0) {
        return Err(Error::Domain(format!(
            "channel state must be > 0, got {}",
            x[0]
        )));
    }
    let (a, b, r) = (&plant.a, &plant.b, &plant.r);
    let phi = plant.drift(x[0])?;
    let w2 = if plant.noise_dim == 2 { w[1] } else { 0.0 };
    let x1 = (a[(0, 0)] * x[0] + a[(0, 1)] * x[1])
        + phi
        + b[0] * u
        + (r[(0, 0)] * w[0] + r[(0, 1)] * w2);
    let x2 = (a[(1, 0)] * x[0] + a[(1, 1)] * x[1]) + b[1] * u + (r[(1, 0)] * w[0] + r[(1, 1)] * w2);
    if !(x1.is_finite() && x2.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    let (x1, reflected) = match &plant.channel {
        Some(tp) => reflect(x1, tp.reflection_floor()),
        None => (x1, false),
    };
    Ok(PlantStep {
        state: plant.state(Vector2::new(x1, x2)),
        reflected,
    })
}
