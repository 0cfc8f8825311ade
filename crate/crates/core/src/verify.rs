//! Independent checks of a synthesized gain on the closed loop
//! `u = -K (x - x_op)`.

use nalgebra::{Matrix2, RowVector2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::spectral_radius2;
use crate::noise::TrajectoryNoise;
use crate::plant::{plant_step, AugmentedPlant};

/// Minimum number of frequency points of [`linear_gain_sweep`].
pub const MIN_SWEEP_POINTS: usize = 720;
/// Minimum ensemble size of [`closed_loop_stats`].
pub const MIN_SEEDS: usize = 100;

/// Plant with a state-feedback gain; `acl` is recomputed from the plant.
#[derive(Debug, Clone)]
pub struct ClosedLoop<'a> {
    pub plant: &'a AugmentedPlant,
    pub k: RowVector2<f64>,
    pub acl: Matrix2<f64>,
    pub spectral_radius: f64,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(plant: &'a AugmentedPlant, k: RowVector2<f64>) -> Self {
        let acl = plant.a - plant.b * k;
        Self {
            plant,
            k,
            acl,
            spectral_radius: spectral_radius2(&acl),
        }
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }

    /// Control input at absolute state `x`.
    pub fn control(&self, x: &Vector2<f64>) -> f64 {
        -(self.k * (x - self.plant.origin))[0]
    }

    /// `|dC (e^{jw} I - Acl)^{-1} R|_2`.
    pub fn frequency_gain(&self, omega: f64) -> f64 {
        let z = Complex64::from_polar(1.0, omega);
        let a = &self.acl;
        let m11 = z - a[(0, 0)];
        let m12 = Complex64::from(-a[(0, 1)]);
        let m21 = Complex64::from(-a[(1, 0)]);
        let m22 = z - a[(1, 1)];
        let det = m11 * m22 - m12 * m21;
        let c = self.plant.output_row();
        // row (c1, c2) times the adjugate over det
        let r1 = (c[0] * m22 - c[1] * m21) / det;
        let r2 = (-c[0] * m12 + c[1] * m11) / det;
        (0..self.plant.noise_dim)
            .map(|j| (r1 * self.plant.r[(0, j)] + r2 * self.plant.r[(1, j)]).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainSweep {
    pub gain: f64,
    pub omega: f64,
    pub points: usize,
}

/// Peak of the linear closed-loop gain over `[0, pi]`: uniform grid plus a
/// golden-section refinement around the best grid point.
pub fn linear_gain_sweep(cl: &ClosedLoop, n_points: usize) -> Result<GainSweep> {
    if n_points < MIN_SWEEP_POINTS {
        return Err(invalid(
            "n_points",
            format!("need at least {MIN_SWEEP_POINTS}, got {n_points}"),
        ));
    }
    if !cl.is_stable() {
        return Err(Error::Unstable(format!(
            "closed loop has spectral radius {} >= 1",
            cl.spectral_radius
        )));
    }
    let pi = std::f64::consts::PI;
    let h = pi / (n_points - 1) as f64;
    let (mut bi, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..n_points {
        let g = cl.frequency_gain(h * i as f64);
        if g > best {
            best = g;
            bi = i;
        }
    }
    let mut omega = h * bi as f64;
    let mut a = (omega - h).max(0.0);
    let mut b = (omega + h).min(pi);
    let ip = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ip * (b - a);
    let mut d = a + ip * (b - a);
    let (mut fc, mut fd) = (cl.frequency_gain(c), cl.frequency_gain(d));
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ip * (b - a);
            fc = cl.frequency_gain(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ip * (b - a);
            fd = cl.frequency_gain(d);
        }
    }
    for (w, g) in [(c, fc), (d, fd)] {
        if g > best {
            best = g;
            omega = w;
        }
    }
    Ok(GainSweep {
        gain: best,
        omega,
        points: n_points,
    })
}

/// One recorded closed-loop sample: state and input at step `k`, the noise
/// applied between `k` and `k + 1`, and whether the channel state had to be
/// reflected to reach `x_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopSample {
    pub k: usize,
    pub x: [f64; 2],
    pub u: f64,
    pub w: [f64; 2],
    /// Pointing error `d C (x - x_op)`.
    pub y: f64,
    pub reflected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopTrajectory {
    pub id: u64,
    pub samples: Vec<LoopSample>,
    /// Set when the state became non-finite; the trajectory stops there.
    pub diverged: bool,
}

/// Simulates `steps` transitions from the operating point. With `closed =
/// false` the input is held at zero; the noise depends only on `(seed, id)`.
pub fn simulate_loop(
    cl: &ClosedLoop,
    seed: u64,
    id: u64,
    steps: usize,
    closed: bool,
) -> Result<LoopTrajectory> {
    let plant = cl.plant;
    let mut noise = TrajectoryNoise::new(seed, id);
    let mut state = plant.state(plant.origin);
    let out = plant.output_row();
    let mut samples = Vec::with_capacity(steps);
    let mut diverged = false;
    for k in 0..steps {
        let x = state.x;
        let u = if closed { cl.control(&x) } else { 0.0 };
        let w = Vector2::new(
            noise.channel.gaussian::<f64>(),
            noise.aperture.gaussian::<f64>(),
        );
        let y = (out * (x - plant.origin))[0];
        match plant_step(&state, u, &w, plant) {
            Ok(next) => {
                samples.push(LoopSample {
                    k,
                    x: [x[0], x[1]],
                    u,
                    w: [w[0], w[1]],
                    y,
                    reflected: next.reflected,
                });
                state = next.state;
            }
            Err(Error::NonFinite { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if !diverged {
        let x = state.x;
        samples.push(LoopSample {
            k: steps,
            x: [x[0], x[1]],
            u: if closed { cl.control(&x) } else { 0.0 },
            w: [0.0, 0.0],
            y: (out * (x - plant.origin))[0],
            reflected: false,
        });
    }
    Ok(LoopTrajectory {
        id,
        samples,
        diverged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct DissipationReport {
    pub steps_checked: usize,
    pub violations: usize,
    /// Steps whose channel state left the certified interval.
    pub excluded_domain: usize,
    /// Steps that needed a reflection of the channel state.
    pub excluded_reflection: usize,
    /// Steps where the sector bound `|psi| <= |H z|` failed (in domain this
    /// means the certificate itself is wrong).
    pub sector_violations: usize,
    /// Largest `q / scale` over checked steps.
    pub max_ratio: f64,
}

impl DissipationReport {
    fn merge(mut self, o: &Self) -> Self {
        self.steps_checked += o.steps_checked;
        self.violations += o.violations;
        self.excluded_domain += o.excluded_domain;
        self.excluded_reflection += o.excluded_reflection;
        self.sector_violations += o.sector_violations;
        self.max_ratio = self.max_ratio.max(o.max_ratio);
        self
    }
}

/// Relative tolerance of the dissipation test.
pub const DISSIPATION_TOL: f64 = 1e-9;

/// Evaluates `q_k = |y_k|^2 - eps^2 |w_k|^2 + V(z_{k+1}) - V(z_k)`,
/// `V(z) = z^T P z`, along recorded trajectories and counts `q_k > 0`
/// beyond a relative tolerance. Steps outside the certified interval or with
/// a reflection are excluded and counted separately.
pub fn dissipation_check(
    cl: &ClosedLoop,
    trajectories: &[LoopTrajectory],
    p: &Matrix2<f64>,
    eps: f64,
) -> Result<DissipationReport> {
    if p.cholesky().is_none() {
        return Err(Error::Domain(
            "storage matrix P must be positive definite".into(),
        ));
    }
    let plant = cl.plant;
    let out = plant.output_row();
    let v = |z: &Vector2<f64>| (z.transpose() * p * z)[0];
    let reports: Vec<DissipationReport> = trajectories
        .par_iter()
        .map(|tr| {
            let mut rep = DissipationReport::default();
            for pair in tr.samples.windows(2) {
                let (s0, s1) = (&pair[0], &pair[1]);
                if !plant.in_domain(s0.x[0]) {
                    rep.excluded_domain += 1;
                    continue;
                }
                if s0.reflected {
                    rep.excluded_reflection += 1;
                    continue;
                }
                let z0 = Vector2::new(s0.x[0], s0.x[1]) - plant.origin;
                let z1 = Vector2::new(s1.x[0], s1.x[1]) - plant.origin;
                let w = Vector2::new(s0.w[0], if plant.noise_dim == 2 { s0.w[1] } else { 0.0 });
                let y = (out * z0)[0];
                if let Ok(psi) = plant.frame_nonlinearity(&z0) {
                    if psi.norm() > (plant.h * z0)[0].abs() * (1.0 + 1e-12) + 1e-300 {
                        rep.sector_violations += 1;
                    }
                }
                let (v0, v1) = (v(&z0), v(&z1));
                let q = y * y - eps * eps * w.norm_squared() + v1 - v0;
                let scale =
                    y * y + eps * eps * w.norm_squared() + v1.abs() + v0.abs() + f64::MIN_POSITIVE;
                let ratio = q / scale;
                rep.steps_checked += 1;
                rep.max_ratio = if rep.steps_checked == 1 {
                    ratio
                } else {
                    rep.max_ratio.max(ratio)
                };
                if ratio > DISSIPATION_TOL {
                    rep.violations += 1;
                }
            }
            rep
        })
        .collect();
    let first = DissipationReport {
        max_ratio: f64::NEG_INFINITY,
        ..Default::default()
    };
    Ok(reports.iter().fold(first, |acc, r| {
        if r.steps_checked == 0 {
            let mut acc = acc;
            acc.excluded_domain += r.excluded_domain;
            acc.excluded_reflection += r.excluded_reflection;
            acc.sector_violations += r.sector_violations;
            acc
        } else {
            acc.merge(r)
        }
    }))
}

/// Per-trajectory statistics of the pointing error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedStats {
    pub id: u64,
    pub var_open: f64,
    pub var_closed: f64,
    pub max_abs_open: f64,
    pub max_abs_closed: f64,
    pub reflections_open: usize,
    pub reflections_closed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub seeds: usize,
    pub steps: usize,
    /// Mean over trajectories of the sample variance of `y`.
    pub var_open: f64,
    pub var_closed: f64,
    /// `1 - var_closed / var_open`.
    pub reduction: f64,
    pub max_abs_open: f64,
    pub max_abs_closed: f64,
    /// `max_abs_closed / max_abs_open`.
    pub peak_ratio: f64,
    pub per_seed: Vec<SeedStats>,
}

fn variance(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0)
}

/// Matched-noise ensembles: trajectory `id` of the open loop (`u = 0`) and
/// of the closed loop consume the same noise streams.
pub fn closed_loop_stats(
    cl: &ClosedLoop,
    seed: u64,
    n_seeds: usize,
    n_steps: usize,
) -> Result<VerificationReport> {
    if n_seeds < MIN_SEEDS {
        return Err(invalid(
            "n_seeds",
            format!("need at least {MIN_SEEDS}, got {n_seeds}"),
        ));
    }
    if n_steps < 2 {
        return Err(invalid("n_steps", "need at least 2 steps"));
    }
    let per_seed: Vec<SeedStats> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|id| -> Result<SeedStats> {
            let open = simulate_loop(cl, seed, id, n_steps, false)?;
            let closed = simulate_loop(cl, seed, id, n_steps, true)?;
            if open.diverged || closed.diverged {
                return Err(Error::NonFinite {
                    step: open.samples.len().min(closed.samples.len()),
                });
            }
            let yo: Vec<f64> = open.samples.iter().map(|s| s.y).collect();
            let yc: Vec<f64> = closed.samples.iter().map(|s| s.y).collect();
            let peak = |ys: &[f64]| ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
            Ok(SeedStats {
                id,
                var_open: variance(&yo),
                var_closed: variance(&yc),
                max_abs_open: peak(&yo),
                max_abs_closed: peak(&yc),
                reflections_open: open.samples.iter().filter(|s| s.reflected).count(),
                reflections_closed: closed.samples.iter().filter(|s| s.reflected).count(),
            })
        })
        .collect::<Result<_>>()?;
    let n = per_seed.len() as f64;
    let var_open = per_seed.iter().map(|s| s.var_open).sum::<f64>() / n;
    let var_closed = per_seed.iter().map(|s| s.var_closed).sum::<f64>() / n;
    let max_abs_open = per_seed.iter().fold(0.0f64, |m, s| m.max(s.max_abs_open));
    let max_abs_closed = per_seed.iter().fold(0.0f64, |m, s| m.max(s.max_abs_closed));
    Ok(VerificationReport {
        seeds: n_seeds,
        steps: n_steps,
        var_open,
        var_closed,
        reduction: 1.0 - var_closed / var_open,
        max_abs_open,
        max_abs_closed,
        peak_ratio: max_abs_closed / max_abs_open,
        per_seed,
    })
}
