//! Log-det barrier method for small dense problems
//!
//! ```text
//! minimize c^T z   subject to   G_i(z) = G_i0 + sum_j z_j D_ij > 0
//! ```
//!
//! started from a strictly feasible point. Each outer iteration centres the
//! barrier `s c^T z - sum_i log det G_i(z)` by damped Newton steps
//! (`1 / (1 + lambda)` with `lambda` the Newton decrement), then multiplies
//! `s` by `mu`. Bounds on the optimum are only reported from centred iterates.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Barrier weight growth per outer iteration.
    pub mu: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    /// Stop when the duality-gap bound `m / s` falls below this...
    pub gap_tol: f64,
    /// ...or below this fraction of `|c^T z|`.
    pub rel_gap_tol: f64,
    /// Newton decrement below which an iterate counts as centred.
    pub centring_tol: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            mu: 8.0,
            max_outer: 80,
            max_newton: 100,
            gap_tol: 1e-9,
            rel_gap_tol: 0.0,
            centring_tol: 1e-5,
        }
    }
}

/// Affine symmetric matrix function of the decision vector. `None` marks a
/// variable the constraint does not depend on.
#[derive(Debug, Clone)]
pub struct AffineLmi {
    pub g0: DMatrix<f64>,
    pub d: Vec<Option<DMatrix<f64>>>,
}

impl AffineLmi {
    pub fn eval(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut g = self.g0.clone();
        for (dj, zj) in self.d.iter().zip(z.iter()) {
            if let Some(dj) = dj {
                g += dj * *zj;
            }
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.g0.nrows()
    }

    pub fn is_strictly_feasible(&self, z: &DVector<f64>) -> bool {
        chol(&self.eval(z)).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Duality-gap bound met.
    Converged,
    /// The caller's stopping predicate fired.
    Stopped,
    /// The caller's lower-bound cutoff was exceeded.
    BoundExceeded,
    /// Iteration budget exhausted, or numerical breakdown.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierResult {
    pub status: Status,
    pub z: DVector<f64>,
    /// `c^T z` at the last iterate.
    pub value: f64,
    /// `c^T z - m / s` at the last centred iterate (`-inf` before the first).
    pub lower_bound: f64,
    pub newton_steps: usize,
}

fn chol(g: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    ((g + g.transpose()) * 0.5).cholesky()
}

/// Runs the barrier method. `stop` is checked before every Newton step;
/// the run ends with [`Status::BoundExceeded`] as soon as the certified lower
/// bound exceeds `bound_cutoff`.
pub fn minimize(
    c: &DVector<f64>,
    cons: &[AffineLmi],
    z0: DVector<f64>,
    opts: &BarrierOptions,
    bound_cutoff: f64,
    mut stop: impl FnMut(&DVector<f64>) -> bool,
) -> BarrierResult {
    let n = z0.len();
    let m: f64 = cons.iter().map(|g| g.dim() as f64).sum();
    let mut z = z0;
    let mut s = 1.0;
    let mut steps = 0;
    let mut lower_bound = f64::NEG_INFINITY;
    let done = |status, z: DVector<f64>, lb, steps| BarrierResult {
        status,
        value: c.dot(&z),
        z,
        lower_bound: lb,
        newton_steps: steps,
    };
    // initial weight balancing the barrier gradient against the cost
    {
        let mut grad_b = DVector::<f64>::zeros(n);
        for g in cons {
            let Some(ch) = chol(&g.eval(&z)) else {
                return done(Status::Stalled, z, lower_bound, steps);
            };
            let inv = ch.inverse();
            for (j, dj) in g.d.iter().enumerate() {
                if let Some(dj) = dj {
                    grad_b[j] -= inv.component_mul(dj).sum();
                }
            }
        }
        let cn = c.norm();
        if cn > 0.0 {
            s = (grad_b.norm() / cn).clamp(1e-6, 1e6);
        }
    }
    for _outer in 0..opts.max_outer {
        let mut centred = false;
        let mut lambda = f64::INFINITY;
        for _ in 0..opts.max_newton {
            if stop(&z) {
                return done(Status::Stopped, z, lower_bound, steps);
            }
            let mut grad = c * s;
            let mut hess = DMatrix::<f64>::zeros(n, n);
            for g in cons {
                let Some(ch) = chol(&g.eval(&z)) else {
                    return done(Status::Stalled, z, lower_bound, steps);
                };
                let inv = ch.inverse();
                let w: Vec<Option<DMatrix<f64>>> =
                    g.d.iter().map(|d| d.as_ref().map(|d| &inv * d)).collect();
                for j in 0..n {
                    let Some(wj) = &w[j] else { continue };
                    grad[j] -= wj.trace();
                    for k in 0..=j {
                        let Some(wk) = &w[k] else { continue };
                        let h = wj.component_mul(&wk.transpose()).sum();
                        hess[(j, k)] += h;
                        if j != k {
                            hess[(k, j)] += h;
                        }
                    }
                }
            }
            // symmetric diagonal scaling keeps the factorization accurate when
            // variables live on very different scales
            let scale =
                DVector::from_fn(n, |i, _| 1.0 / hess[(i, i)].max(f64::MIN_POSITIVE).sqrt());
            let hs = DMatrix::from_fn(n, n, |i, j| hess[(i, j)] * scale[i] * scale[j]);
            let gs = grad.component_mul(&scale);
            // a small ridge handles directions in which the barrier is flat
            // (optimum approached only as Y grows without bound)
            let Some(hch) = hs
                .clone()
                .cholesky()
                .or_else(|| (hs + DMatrix::identity(n, n) * 1e-10).cholesky())
            else {
                return done(Status::Stalled, z, lower_bound, steps);
            };
            let dzs = -hch.solve(&gs);
            let dec2 = -gs.dot(&dzs);
            let dz = dzs.component_mul(&scale);
            steps += 1;
            if !dec2.is_finite() {
                return done(Status::Stalled, z, lower_bound, steps);
            }
            let prev = lambda;
            lambda = dec2.max(0.0).sqrt();
            // below 1e-3 a decrement that stops shrinking has hit roundoff
            if lambda < opts.centring_tol || (lambda < 1e-3 && lambda > 0.5 * prev) {
                centred = true;
                break;
            }
            // damped step of self-concordant barriers: stays strictly feasible
            let alpha = if lambda > 0.25 {
                1.0 / (1.0 + lambda)
            } else {
                1.0
            };
            let mut trial = &z + &dz * alpha;
            let mut shrink = 0;
            while cons.iter().any(|g| !g.is_strictly_feasible(&trial)) {
                shrink += 1;
                if shrink > 60 {
                    return done(Status::Stalled, z, lower_bound, steps);
                }
                trial = &z + &dz * (alpha * 0.5f64.powi(shrink));
            }
            z = trial;
        }
        if !centred {
            return done(Status::Stalled, z, lower_bound, steps);
        }
        let gap = m / s;
        lower_bound = c.dot(&z) - (m + m.sqrt() * lambda) / s;
        if lower_bound > bound_cutoff {
            return done(Status::BoundExceeded, z, lower_bound, steps);
        }
        if gap < opts.gap_tol || gap < opts.rel_gap_tol * c.dot(&z).abs() {
            return done(Status::Converged, z, lower_bound, steps);
        }
        s *= opts.mu;
    }
    done(Status::Stalled, z, lower_bound, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn linear_program_on_interval() {
        // minimize z subject to z - 1 > 0 and 3 - z > 0
        let cons = vec![
            AffineLmi {
                g0: diag(&[-1.0]),
                d: vec![Some(diag(&[1.0]))],
            },
            AffineLmi {
                g0: diag(&[3.0]),
                d: vec![Some(diag(&[-1.0]))],
            },
        ];
        let r = minimize(
            &DVector::from_element(1, 1.0),
            &cons,
            DVector::from_element(1, 2.0),
            &BarrierOptions::default(),
            f64::INFINITY,
            |_| false,
        );
        assert_eq!(r.status, Status::Converged);
        assert!((r.value - 1.0).abs() < 1e-8);
        assert!(r.lower_bound <= 1.0 + 1e-12);
    }

    #[test]
    fn max_eigenvalue_of_affine_family() {
        // minimize t subject to t I - diag(v, 1 - v) > 0: optimum t = 1/2 at v = 1/2
        let cons = vec![AffineLmi {
            g0: diag(&[0.0, -1.0]),
            d: vec![Some(diag(&[-1.0, 1.0])), Some(diag(&[1.0, 1.0]))],
        }];
        let c = DVector::from_row_slice(&[0.0, 1.0]);
        let r = minimize(
            &c,
            &cons,
            DVector::from_row_slice(&[0.0, 2.0]),
            &BarrierOptions::default(),
            f64::INFINITY,
            |_| false,
        );
        assert_eq!(r.status, Status::Converged);
        assert!((r.z[0] - 0.5).abs() < 1e-6);
        assert!((r.z[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn cutoff_and_stop_predicate() {
        let cons = vec![AffineLmi {
            g0: diag(&[0.0, -1.0]),
            d: vec![Some(diag(&[-1.0, 1.0])), Some(diag(&[1.0, 1.0]))],
        }];
        let c = DVector::from_row_slice(&[0.0, 1.0]);
        let z0 = DVector::from_row_slice(&[0.0, 2.0]);
        let opts = BarrierOptions::default();
        let r = minimize(&c, &cons, z0.clone(), &opts, 0.0, |_| false);
        assert_eq!(r.status, Status::BoundExceeded);
        assert!(r.lower_bound > 0.0);
        let r = minimize(&c, &cons, z0, &opts, f64::INFINITY, |z| z[1] < 0.75);
        assert_eq!(r.status, Status::Stopped);
        assert!(r.z[1] < 0.75);
    }

    #[test]
    fn infeasible_start_stalls() {
        let cons = vec![AffineLmi {
            g0: diag(&[-1.0]),
            d: vec![Some(diag(&[1.0]))],
        }];
        let r = minimize(
            &DVector::from_element(1, 1.0),
            &cons,
            DVector::from_element(1, 0.0),
            &BarrierOptions::default(),
            f64::INFINITY,
            |_| false,
        );
        assert_eq!(r.status, Status::Stalled);
    }
}
