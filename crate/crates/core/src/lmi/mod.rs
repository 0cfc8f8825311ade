//! Robust state-feedback synthesis.
//!
//! For fixed `(eps, delta)` the matrix inequality below is affine in the
//! decision variables `Y = Y^T` (2x2) and `S` (1x2); a feasible point gives the
//! gain `K = S Y^{-1}` and the storage function `V(x) = x^T Y^{-1} x`.
//!
//! ```text
//! [ -Y   0      0     Y A^T - S^T B^T   Y (dC)^T   Y H^T    ]
//! [  *  -eps^2  0     R^T               0          0        ]
//! [  *   *     -delta I                 0          0        ]
//! [  *   *      *    -Y                 0          0        ]  < 0
//! [  *   *      *     *                -1          0        ]
//! [  *   *      *     *                 *         -1/delta  ]
//! ```
//!
//! Rows and columns are ordered `(x, w, phi, x+, y, h)`; the `(phi, x+)`
//! coupling block is the identity ([`Coupling::Identity`]).
//!
//! `eps` is minimised for each `delta` by a barrier method (the inequality is
//! affine in `eps^2`), and `delta` by a log-spaced grid followed by
//! golden-section refinement.

pub mod solver;

use nalgebra::{DMatrix, DVector, Matrix2, RowVector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    asymmetry, jacobi_eigenvalues, max_eigenvalue, spd_condition, spectral_radius2,
};
use crate::plant::AugmentedPlant;
use solver::{minimize, AffineLmi, BarrierOptions, Status};

/// Number of scalar decision variables: `Y11, Y12, Y22, S1, S2`.
pub const DECISION_DIM: usize = 5;
/// Gains are rejected when `Y` is worse conditioned than this.
pub const MAX_CONDITION: f64 = 1e12;

/// Content of the `(phi, x+)` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Identity, as produced by the congruence with `diag(Y, I, I, Y, I, I)`.
    #[default]
    Identity,
    /// `Y`, as printed.
    Y,
}

/// Row/column widths of the six blocks.
pub fn block_sizes(plant: &AugmentedPlant) -> [usize; 6] {
    [2, plant.noise_dim, 2, 2, 1, 1]
}

fn offsets(sizes: &[usize; 6]) -> [usize; 7] {
    let mut o = [0; 7];
    for i in 0..6 {
        o[i + 1] = o[i] + sizes[i];
    }
    o
}

pub fn y_from(v: &[f64]) -> Matrix2<f64> {
    Matrix2::new(v[0], v[1], v[1], v[2])
}

pub fn s_from(v: &[f64]) -> RowVector2<f64> {
    RowVector2::new(v[3], v[4])
}

pub fn decision_vector(y: &Matrix2<f64>, s: &RowVector2<f64>) -> DVector<f64> {
    DVector::from_row_slice(&[
        y[(0, 0)],
        0.5 * (y[(0, 1)] + y[(1, 0)]),
        y[(1, 1)],
        s[0],
        s[1],
    ])
}

struct Blocks {
    m: DMatrix<f64>,
    o: [usize; 7],
}

impl Blocks {
    fn new(sizes: [usize; 6]) -> Self {
        let o = offsets(&sizes);
        Self {
            m: DMatrix::zeros(o[6], o[6]),
            o,
        }
    }

    /// Writes block `(i, j)` (0-based, `i <= j`) and its mirror.
    fn set(&mut self, i: usize, j: usize, b: &DMatrix<f64>) {
        let (r, c) = (self.o[i], self.o[j]);
        for p in 0..b.nrows() {
            for q in 0..b.ncols() {
                self.m[(r + p, c + q)] = b[(p, q)];
                self.m[(c + q, r + p)] = b[(p, q)];
            }
        }
    }
}

fn dm2(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

/// Builds the inequality with `gamma = eps^2`; with `balanced` the congruence
/// `diag(I, I, delta^{-1/2} I, I, 1, delta^{1/2})` is applied, which makes the
/// `phi` and `h` diagonal blocks `-I` and `-1`.
fn assemble_core(
    y: &Matrix2<f64>,
    s: &RowVector2<f64>,
    gamma: f64,
    delta: f64,
    plant: &AugmentedPlant,
    coupling: Coupling,
    balanced: bool,
) -> DMatrix<f64> {
    let nw = plant.noise_dim;
    let mut b = Blocks::new(block_sizes(plant));
    let (sd, isd) = if balanced {
        (delta.sqrt(), 1.0 / delta.sqrt())
    } else {
        (1.0, 1.0)
    };
    b.set(0, 0, &dm2(&(-y)));
    let a14 = y * plant.a.transpose() - s.transpose() * plant.b.transpose();
    b.set(0, 3, &dm2(&a14));
    let ct = y * plant.output_row().transpose();
    b.set(0, 4, &DMatrix::from_column_slice(2, 1, ct.as_slice()));
    let ht = y * plant.h.transpose() * sd;
    b.set(0, 5, &DMatrix::from_column_slice(2, 1, ht.as_slice()));
    b.set(1, 1, &(DMatrix::identity(nw, nw) * -gamma));
    let rt = DMatrix::from_fn(nw, 2, |i, j| plant.r[(j, i)]);
    b.set(1, 3, &rt);
    b.set(
        2,
        2,
        &(DMatrix::identity(2, 2) * if balanced { -1.0 } else { -delta }),
    );
    let c34 = match coupling {
        Coupling::Identity => DMatrix::identity(2, 2),
        Coupling::Y => dm2(y),
    };
    b.set(2, 3, &(c34 * isd));
    b.set(3, 3, &dm2(&(-y)));
    b.set(4, 4, &DMatrix::from_element(1, 1, -1.0));
    b.set(
        5,
        5,
        &DMatrix::from_element(1, 1, if balanced { -1.0 } else { -1.0 / delta }),
    );
    b.m
}

fn check_inputs(y: &Matrix2<f64>, eps: f64, delta: f64, plant: &AugmentedPlant) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid("eps", format!("must be > 0, got {eps}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid("delta", format!("must be > 0, got {delta}")));
    }
    if !(plant.noise_dim == 1 || plant.noise_dim == 2) {
        return Err(Error::Dimension(format!(
            "noise dimension {} not in {{1, 2}}",
            plant.noise_dim
        )));
    }
    if (y[(0, 1)] - y[(1, 0)]).abs() > 1e-12 * y.amax().max(1.0) {
        return Err(Error::Dimension("Y must be symmetric".into()));
    }
    Ok(())
}

/// The synthesis inequality with the identity coupling block.
pub fn assemble_lmi(
    y: &Matrix2<f64>,
    s: &RowVector2<f64>,
    eps: f64,
    delta: f64,
    plant: &AugmentedPlant,
) -> Result<DMatrix<f64>> {
    assemble_lmi_with(y, s, eps, delta, plant, Coupling::Identity)
}

pub fn assemble_lmi_with(
    y: &Matrix2<f64>,
    s: &RowVector2<f64>,
    eps: f64,
    delta: f64,
    plant: &AugmentedPlant,
    coupling: Coupling,
) -> Result<DMatrix<f64>> {
    check_inputs(y, eps, delta, plant)?;
    Ok(assemble_core(
        y,
        s,
        eps * eps,
        delta,
        plant,
        coupling,
        false,
    ))
}

/// Same inequality in the balanced coordinates used by the solver.
pub fn assemble_balanced(
    y: &Matrix2<f64>,
    s: &RowVector2<f64>,
    eps: f64,
    delta: f64,
    plant: &AugmentedPlant,
    coupling: Coupling,
) -> Result<DMatrix<f64>> {
    check_inputs(y, eps, delta, plant)?;
    Ok(assemble_core(y, s, eps * eps, delta, plant, coupling, true))
}

/// Inequality in the storage matrix `P` and gain `K` before the congruence
/// with `diag(Y, I, I, Y, I, I)`, `Acl = A - B K`:
///
/// ```text
/// [ -P   0      0        Acl^T P   (dC)^T   H^T      ]
/// [  *  -eps^2  0        R^T P     0        0        ]
/// [  *   *     -delta I  P         0        0        ]
/// [  *   *      *       -P         0        0        ]
/// [  *   *      *        *        -1        0        ]
/// [  *   *      *        *         *       -1/delta  ]
/// ```
pub fn storage_form(
    p: &Matrix2<f64>,
    k: &RowVector2<f64>,
    eps: f64,
    delta: f64,
    plant: &AugmentedPlant,
) -> DMatrix<f64> {
    let nw = plant.noise_dim;
    let acl = plant.a - plant.b * k;
    let mut b = Blocks::new(block_sizes(plant));
    b.set(0, 0, &dm2(&(-p)));
    b.set(0, 3, &dm2(&(acl.transpose() * p)));
    let ct = plant.output_row().transpose();
    b.set(0, 4, &DMatrix::from_column_slice(2, 1, ct.as_slice()));
    let ht = plant.h.transpose();
    b.set(0, 5, &DMatrix::from_column_slice(2, 1, ht.as_slice()));
    b.set(1, 1, &(DMatrix::identity(nw, nw) * -(eps * eps)));
    let rtp = plant.noise_matrix().transpose() * dm2(p);
    b.set(1, 3, &rtp);
    b.set(2, 2, &(DMatrix::identity(2, 2) * -delta));
    b.set(2, 3, &dm2(p));
    b.set(3, 3, &dm2(&(-p)));
    b.set(4, 4, &DMatrix::from_element(1, 1, -1.0));
    b.set(5, 5, &DMatrix::from_element(1, 1, -1.0 / delta));
    b.m
}

/// Quadratic form in `(z, w, psi)` obtained from [`storage_form`] by Schur
/// complements of the last three blocks:
/// `xi^T M xi = V(z+) - V(z) + |y|^2 - eps^2 |w|^2 + delta (|H z|^2 - |psi|^2)`
/// with `z+ = Acl z + R w + psi`.
pub fn dissipation_form(
    p: &Matrix2<f64>,
    k: &RowVector2<f64>,
    eps: f64,
    delta: f64,
    plant: &AugmentedPlant,
) -> DMatrix<f64> {
    let nw = plant.noise_dim;
    let n = 4 + nw;
    let acl = plant.a - plant.b * k;
    let mut g = DMatrix::zeros(2, n);
    g.view_mut((0, 0), (2, 2)).copy_from(&dm2(&acl));
    g.view_mut((0, 2), (2, nw)).copy_from(&plant.noise_matrix());
    g.view_mut((0, 2 + nw), (2, 2))
        .copy_from(&DMatrix::identity(2, 2));
    let mut m = g.transpose() * dm2(p) * &g;
    let c = plant.output_row();
    let x11 = -p + c.transpose() * c + plant.h.transpose() * plant.h * delta;
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] += x11[(i, j)];
        }
    }
    for i in 0..nw {
        m[(2 + i, 2 + i)] -= eps * eps;
    }
    for i in 0..2 {
        m[(2 + nw + i, 2 + nw + i)] -= delta;
    }
    m
}

/// Solves `K Y = S` through a Cholesky factorization of `Y`.
pub fn extract_gain(y: &Matrix2<f64>, s: &RowVector2<f64>) -> Result<RowVector2<f64>> {
    let yd = dm2(y);
    if asymmetry(&yd) > 1e-12 * y.amax().max(1.0) {
        return Err(Error::Dimension("Y must be symmetric".into()));
    }
    let cond = spd_condition(&yd);
    if !cond.is_finite() {
        return Err(Error::Domain("Y is not positive definite".into()));
    }
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned { cond });
    }
    let ch = y
        .cholesky()
        .ok_or_else(|| Error::Domain("Y is not positive definite".into()))?;
    Ok(ch.solve(&s.transpose()).transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverTolerances {
    /// Required negativity margin of the balanced inequality.
    pub feas_tol: f64,
    /// Lower eigenvalue bound on `Y`.
    pub pd_tol: f64,
    /// Upper eigenvalue bound on `Y`, which keeps the search set bounded.
    pub y_max: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            pd_tol: 1e-8,
            y_max: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Feasible,
    Infeasible,
    /// The iteration budget ran out before either certificate was found.
    Inconclusive,
}

/// Affine data of the balanced inequality over `(Y11, Y12, Y22, S1, S2, eps^2)`.
struct Basis {
    l0: DMatrix<f64>,
    e: Vec<DMatrix<f64>>,
    dim: usize,
}

impl Basis {
    fn new(plant: &AugmentedPlant, delta: f64, coupling: Coupling) -> Self {
        let zero = [0.0; DECISION_DIM];
        let l0 = assemble_core(
            &y_from(&zero),
            &s_from(&zero),
            0.0,
            delta,
            plant,
            coupling,
            true,
        );
        let mut e = Vec::with_capacity(DECISION_DIM + 1);
        for j in 0..DECISION_DIM {
            let mut v = zero;
            v[j] = 1.0;
            e.push(
                assemble_core(&y_from(&v), &s_from(&v), 0.0, delta, plant, coupling, true) - &l0,
            );
        }
        e.push(
            assemble_core(
                &y_from(&zero),
                &s_from(&zero),
                1.0,
                delta,
                plant,
                coupling,
                true,
            ) - &l0,
        );
        let dim = l0.nrows();
        Self { l0, e, dim }
    }

    fn eval(&self, v: &[f64], gamma: f64) -> DMatrix<f64> {
        let mut l = &self.l0 + &self.e[DECISION_DIM] * gamma;
        for (e, vj) in self.e.iter().zip(&v[..DECISION_DIM]) {
            l += e * *vj;
        }
        l
    }

    fn y_bounds(&self, nz: usize, tol: &SolverTolerances) -> [AffineLmi; 2] {
        let f = [
            Matrix2::new(1.0, 0.0, 0.0, 0.0),
            Matrix2::new(0.0, 1.0, 1.0, 0.0),
            Matrix2::new(0.0, 0.0, 0.0, 1.0),
        ];
        let d = |sign: f64| -> Vec<Option<DMatrix<f64>>> {
            (0..nz)
                .map(|j| if j < 3 { Some(dm2(&f[j]) * sign) } else { None })
                .collect()
        };
        [
            AffineLmi {
                g0: DMatrix::identity(2, 2) * -tol.pd_tol,
                d: d(1.0),
            },
            AffineLmi {
                g0: DMatrix::identity(2, 2) * tol.y_max,
                d: d(-1.0),
            },
        ]
    }
}

fn negative_with_margin(l: &DMatrix<f64>, margin: f64) -> bool {
    let n = l.nrows();
    let g = -(l + DMatrix::identity(n, n) * margin);
    ((&g + g.transpose()) * 0.5).cholesky().is_some()
}

fn start_point() -> [f64; DECISION_DIM] {
    [1.0, 0.0, 1.0, 0.0, 0.0]
}

/// Result of a fixed-`(eps, delta)` feasibility problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub outcome: Outcome,
    pub y: Matrix2<f64>,
    pub s: RowVector2<f64>,
    /// `lambda_max` of the balanced inequality at the last iterate.
    pub max_eig: f64,
    /// Certified lower bound on the smallest achievable `lambda_max`.
    pub lower_bound: f64,
    pub newton_steps: usize,
}

fn feasibility_inner(
    basis: &Basis,
    eps: f64,
    tol: &SolverTolerances,
    opts: &BarrierOptions,
    margin: f64,
) -> Feasibility {
    let gamma = eps * eps;
    let n = basis.dim;
    let nz = DECISION_DIM + 1;
    let mut d: Vec<Option<DMatrix<f64>>> =
        basis.e[..DECISION_DIM].iter().map(|e| Some(-e)).collect();
    d.push(Some(DMatrix::identity(n, n)));
    let [lo, hi] = basis.y_bounds(nz, tol);
    let cons = [
        AffineLmi {
            g0: -(&basis.l0 + &basis.e[DECISION_DIM] * gamma),
            d,
        },
        lo,
        hi,
    ];
    let v0 = start_point();
    let lmax0 = basis.eval(&v0, gamma).symmetric_eigenvalues().max();
    let mut z0 = DVector::from_row_slice(&v0).insert_row(DECISION_DIM, 0.0);
    z0[DECISION_DIM] = lmax0.max(0.0) + 1.0;
    let c = DVector::from_fn(nz, |i, _| if i == DECISION_DIM { 1.0 } else { 0.0 });
    let r = minimize(&c, &cons, z0, opts, -tol.feas_tol, |z| {
        negative_with_margin(&basis.eval(&z.as_slice()[..DECISION_DIM], gamma), margin)
    });
    let v = &r.z.as_slice()[..DECISION_DIM];
    let outcome = match r.status {
        Status::Stopped => Outcome::Feasible,
        Status::BoundExceeded => Outcome::Infeasible,
        Status::Converged if r.lower_bound > -tol.feas_tol => Outcome::Infeasible,
        _ => Outcome::Inconclusive,
    };
    Feasibility {
        outcome,
        y: y_from(v),
        s: s_from(v),
        max_eig: basis.eval(v, gamma).symmetric_eigenvalues().max(),
        lower_bound: r.lower_bound,
        newton_steps: r.newton_steps,
    }
}

/// Decides whether the inequality admits `lambda_max <= -feas_tol` (balanced
/// form) with `pd_tol <= Y <= y_max` at the given `(eps, delta)`.
pub fn feasibility_solve(
    eps: f64,
    delta: f64,
    plant: &AugmentedPlant,
    coupling: Coupling,
    tol: &SolverTolerances,
    opts: &BarrierOptions,
) -> Result<Feasibility> {
    check_inputs(&Matrix2::identity(), eps, delta, plant)?;
    let basis = Basis::new(plant, delta, coupling);
    Ok(feasibility_inner(&basis, eps, tol, opts, tol.feas_tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    /// Fixed `(eps, delta)` feasibility problem.
    Feasibility,
    /// Minimisation of `eps` at fixed `delta`.
    Minimization,
}

/// One solver call of the synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub kind: ProbeKind,
    pub delta: f64,
    pub eps: f64,
    pub outcome: Outcome,
    pub max_eig: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisOptions {
    /// Initial `log10(delta)` grid.
    pub log10_delta_min: f64,
    pub log10_delta_max: f64,
    pub delta_points: usize,
    /// Decades added on a side of the grid when the optimum sits on its edge.
    pub delta_extension: f64,
    /// Outermost `|log10(delta)|` the grid may be extended to.
    pub log10_delta_limit: f64,
    /// Final width of the golden-section bracket on `log10(delta)`.
    pub log10_delta_tol: f64,
    /// Relative width of the final bracket on `eps`.
    pub eps_rel_tol: f64,
    /// Largest `eps` tried before declaring the synthesis infeasible.
    pub eps_cap: f64,
    pub coupling: Coupling,
    pub tolerances: SolverTolerances,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            log10_delta_min: -4.0,
            log10_delta_max: 4.0,
            delta_points: 17,
            delta_extension: 4.0,
            log10_delta_limit: 12.0,
            log10_delta_tol: 1e-2,
            eps_rel_tol: 1e-3,
            eps_cap: 1e6,
            coupling: Coupling::Identity,
            tolerances: SolverTolerances::default(),
        }
    }
}

impl SynthesisOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.log10_delta_max > self.log10_delta_min) || self.delta_points < 3 {
            return Err(invalid(
                "delta grid",
                "need at least 3 points on a nonempty range",
            ));
        }
        if !(self.eps_rel_tol > 0.0 && self.eps_rel_tol < 1.0) {
            return Err(invalid("eps_rel_tol", "must lie in (0, 1)"));
        }
        if !(self.eps_cap > 0.0) {
            return Err(invalid("eps_cap", "must be > 0"));
        }
        if !(self.log10_delta_tol > 0.0) || !(self.delta_extension >= 0.0) {
            return Err(invalid("log10_delta_tol", "must be > 0"));
        }
        let t = &self.tolerances;
        if !(t.feas_tol > 0.0 && t.pd_tol > 0.0 && t.y_max > t.pd_tol) {
            return Err(invalid(
                "tolerances",
                "need feas_tol, pd_tol > 0 and y_max > pd_tol",
            ));
        }
        Ok(())
    }

    fn barrier(&self) -> BarrierOptions {
        BarrierOptions::default()
    }
}

/// Smallest certified `eps` at one `delta`.
#[derive(Debug, Clone, PartialEq)]
struct DeltaEval {
    delta: f64,
    eps: Option<f64>,
    /// Certified lower bound on `eps` at this `delta`.
    eps_lower: f64,
    v: [f64; DECISION_DIM],
    probes: Vec<Probe>,
}

fn initial_eps_hi(plant: &AugmentedPlant, cap: f64) -> f64 {
    let rho = spectral_radius2(&plant.a);
    let guess = if rho < 1.0 - 1e-9 {
        let r = plant.noise_matrix();
        let rn = r.clone().singular_values().max();
        10.0 * plant.output_row().norm() * rn / (1.0 - rho)
    } else {
        1e3
    };
    let guess = if guess > 0.0 && guess.is_finite() {
        guess
    } else {
        1.0
    };
    guess.min(cap)
}

fn eval_delta(plant: &AugmentedPlant, delta: f64, opts: &SynthesisOptions) -> DeltaEval {
    let tol = &opts.tolerances;
    let bopts = opts.barrier();
    let basis = Basis::new(plant, delta, opts.coupling);
    let mut probes = Vec::new();
    let mut eps_hi = initial_eps_hi(plant, opts.eps_cap);
    let start = loop {
        let f = feasibility_inner(&basis, eps_hi, tol, &bopts, 2.0 * tol.feas_tol);
        probes.push(Probe {
            kind: ProbeKind::Feasibility,
            delta,
            eps: eps_hi,
            outcome: f.outcome,
            max_eig: f.max_eig,
            newton_steps: f.newton_steps,
        });
        if f.outcome == Outcome::Feasible {
            break Some(f);
        }
        if eps_hi >= opts.eps_cap {
            break None;
        }
        eps_hi = (2.0 * eps_hi).min(opts.eps_cap);
    };
    let Some(start) = start else {
        return DeltaEval {
            delta,
            eps: None,
            eps_lower: eps_hi,
            v: start_point(),
            probes,
        };
    };
    // minimise gamma = eps^2 subject to L(v, gamma) + feas_tol I < 0; the
    // variable is gamma / gamma0 to keep the Newton system well scaled
    let n = basis.dim;
    let nz = DECISION_DIM + 1;
    let gamma0 = eps_hi * eps_hi;
    let mut d: Vec<Option<DMatrix<f64>>> = basis.e.iter().map(|e| Some(-e)).collect();
    d[DECISION_DIM] = Some(-&basis.e[DECISION_DIM] * gamma0);
    let [lo, hi] = basis.y_bounds(nz, tol);
    let cons = [
        AffineLmi {
            g0: -(&basis.l0 + DMatrix::identity(n, n) * tol.feas_tol),
            d,
        },
        lo,
        hi,
    ];
    let v0 = decision_vector(&start.y, &start.s);
    let z0 = v0.clone().insert_row(DECISION_DIM, 1.0);
    let c = DVector::from_fn(nz, |i, _| if i == DECISION_DIM { 1.0 } else { 0.0 });
    let mut bo = bopts;
    bo.rel_gap_tol = 0.1 * opts.eps_rel_tol;
    let mut r = minimize(&c, &cons, z0, &bo, f64::INFINITY, |_| false);
    r.z[DECISION_DIM] *= gamma0;
    r.lower_bound *= gamma0;
    let gamma = r.z[DECISION_DIM];
    let v: [f64; DECISION_DIM] = r.z.as_slice()[..DECISION_DIM]
        .try_into()
        .expect("decision length");
    let feasible = negative_with_margin(&basis.eval(&v, gamma), tol.feas_tol);
    // every iterate is interior, so a stalled run still yields an upper bound
    let converged = feasible && r.status != Status::BoundExceeded;
    let outcome = if converged {
        Outcome::Feasible
    } else {
        Outcome::Inconclusive
    };
    let eps_lower = if r.status == Status::Converged {
        r.lower_bound.max(0.0).sqrt()
    } else {
        0.0
    };
    probes.push(Probe {
        kind: ProbeKind::Minimization,
        delta,
        eps: gamma.max(0.0).sqrt(),
        outcome,
        max_eig: basis.eval(&v, gamma).symmetric_eigenvalues().max(),
        newton_steps: r.newton_steps,
    });
    if converged {
        DeltaEval {
            delta,
            eps: Some(gamma.sqrt()),
            eps_lower,
            v,
            probes,
        }
    } else {
        // fall back to the phase-one witness
        DeltaEval {
            delta,
            eps: Some(eps_hi),
            eps_lower: 0.0,
            v: v0.as_slice().try_into().expect("decision length"),
            probes,
        }
    }
}

/// Eigenvalue certificates of an accepted solution, recomputed with the
/// Jacobi routine of [`crate::linalg`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// `lambda_max` of the inequality as written (must be `< 0`).
    pub lmi_max_eig: f64,
    /// `lambda_max` of the balanced inequality (must be `<= -feas_tol`).
    pub lmi_max_eig_balanced: f64,
    pub y_min_eig: f64,
    /// `|K Y - S| / max(|S|, 1e-300)`.
    pub gain_residual: f64,
    /// `rho(A - B K)`.
    pub spectral_radius: f64,
    pub schur: SchurCheck,
}

impl Certificate {
    pub fn passed(&self, tol: &SolverTolerances) -> bool {
        self.lmi_max_eig < 0.0
            && self.lmi_max_eig_balanced <= -tol.feas_tol * (1.0 - 1e-6)
            && self.y_min_eig > tol.pd_tol
            && self.gain_residual < 1e-10
            && self.spectral_radius < 1.0
            && self.schur.equivalent
    }
}

/// Agreement between the synthesis inequality and its storage form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchurCheck {
    pub lmi_max_eig: f64,
    pub storage_max_eig: f64,
    pub dissipation_max_eig: f64,
    /// `|T L T - M| / |M|`, `T = diag(P, I, I, P, I, I)`.
    pub congruence_residual: f64,
    pub equivalent: bool,
}

/// Checks that the inequality at `(Y, S)` is the congruence of
/// [`storage_form`] at `(P, K) = (Y^{-1}, S Y^{-1})` and that all three
/// forms agree on negative definiteness.
pub fn schur_chain_check(
    y: &Matrix2<f64>,
    s: &RowVector2<f64>,
    eps: f64,
    delta: f64,
    plant: &AugmentedPlant,
    coupling: Coupling,
) -> Result<SchurCheck> {
    let l = assemble_lmi_with(y, s, eps, delta, plant, coupling)?;
    let k = extract_gain(y, s)?;
    let p = y
        .try_inverse()
        .ok_or_else(|| Error::Domain("Y is singular".into()))?;
    let p = (p + p.transpose()) * 0.5;
    let m = storage_form(&p, &k, eps, delta, plant);
    let sizes = block_sizes(plant);
    let o = offsets(&sizes);
    let mut t = DMatrix::identity(o[6], o[6]);
    for &blk in &[0usize, 3] {
        t.view_mut((o[blk], o[blk]), (2, 2)).copy_from(&dm2(&p));
    }
    let tlt = &t * &l * &t;
    let residual = (&tlt - &m).amax() / m.amax();
    let lmi_max_eig = max_eigenvalue(&l);
    let storage_max_eig = max_eigenvalue(&m);
    let dissipation_max_eig = max_eigenvalue(&dissipation_form(&p, &k, eps, delta, plant));
    let equivalent = residual < 1e-8
        && (lmi_max_eig < 0.0) == (storage_max_eig < 0.0)
        && (storage_max_eig < 0.0) == (dissipation_max_eig < 0.0);
    Ok(SchurCheck {
        lmi_max_eig,
        storage_max_eig,
        dissipation_max_eig,
        congruence_residual: residual,
        equivalent,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub y: Matrix2<f64>,
    pub s: RowVector2<f64>,
    pub k: RowVector2<f64>,
    /// Storage matrix `P = Y^{-1}`.
    pub p: Matrix2<f64>,
    pub eps_star: f64,
    /// Largest `eps` certified infeasible at `delta_star`.
    pub eps_lower: f64,
    pub delta_star: f64,
    pub cert: Certificate,
    pub block_sizes: [usize; 6],
    pub coupling: Coupling,
    pub probes: Vec<Probe>,
}

pub fn certify(
    y: &Matrix2<f64>,
    s: &RowVector2<f64>,
    eps: f64,
    delta: f64,
    plant: &AugmentedPlant,
    coupling: Coupling,
) -> Result<Certificate> {
    let l = assemble_lmi_with(y, s, eps, delta, plant, coupling)?;
    let lb = assemble_balanced(y, s, eps, delta, plant, coupling)?;
    let k = extract_gain(y, s)?;
    let res = (k * y - s).norm() / s.norm().max(1e-300);
    Ok(Certificate {
        lmi_max_eig: max_eigenvalue(&l),
        lmi_max_eig_balanced: max_eigenvalue(&lb),
        y_min_eig: jacobi_eigenvalues(&dm2(y))[0],
        gain_residual: if s.norm() == 0.0 { (k * y).norm() } else { res },
        spectral_radius: spectral_radius2(&(plant.a - plant.b * k)),
        schur: schur_chain_check(y, s, eps, delta, plant, coupling)?,
    })
}

/// Minimises `eps` over `(Y, S, delta)`.
pub fn synthesize(plant: &AugmentedPlant, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    opts.validate()?;
    let tol = &opts.tolerances;
    let mut evals: Vec<DeltaEval> = Vec::new();
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    };
    let step = (opts.log10_delta_max - opts.log10_delta_min) / (opts.delta_points - 1) as f64;
    let mut logs = grid(
        opts.log10_delta_min,
        opts.log10_delta_max,
        opts.delta_points,
    );
    let run = |ls: &[f64]| -> Vec<DeltaEval> {
        ls.par_iter()
            .map(|&l| eval_delta(plant, 10f64.powf(l), opts))
            .collect()
    };
    let mut batch = run(&logs);
    evals.append(&mut batch);
    let key = |e: &DeltaEval| e.eps.unwrap_or(f64::INFINITY);
    let best_of = |evals: &[DeltaEval]| -> usize {
        let mut bi = 0;
        for (i, e) in evals.iter().enumerate() {
            if key(e) < key(&evals[bi]) {
                bi = i;
            }
        }
        bi
    };
    // extend the grid while the optimum sits on its boundary
    loop {
        let bi = best_of(&evals);
        if key(&evals[bi]).is_infinite() {
            break;
        }
        let lb = evals[bi].delta.log10();
        let (lo, hi) = (
            logs.iter().copied().fold(f64::INFINITY, f64::min),
            logs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let n_ext = (opts.delta_extension / step).round() as usize;
        let new: Vec<f64> = if (lb - hi).abs() < 1e-9 && hi < opts.log10_delta_limit {
            (1..=n_ext)
                .map(|i| hi + step * i as f64)
                .filter(|l| *l <= opts.log10_delta_limit + 1e-9)
                .collect()
        } else if (lb - lo).abs() < 1e-9 && lo > -opts.log10_delta_limit {
            (1..=n_ext)
                .map(|i| lo - step * i as f64)
                .filter(|l| *l >= -opts.log10_delta_limit - 1e-9)
                .collect()
        } else {
            Vec::new()
        };
        if new.is_empty() {
            break;
        }
        let mut batch = run(&new);
        evals.append(&mut batch);
        logs.extend(new);
    }
    let bi = best_of(&evals);
    if key(&evals[bi]).is_infinite() {
        let probes: usize = evals.iter().map(|e| e.probes.len()).sum();
        return Err(Error::SynthesisFailed(format!(
            "no feasible point with eps <= {} for log10(delta) in [{}, {}] ({probes} probes)",
            opts.eps_cap,
            logs.iter().copied().fold(f64::INFINITY, f64::min),
            logs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )));
    }
    // golden section on log10(delta) between the neighbours of the best grid point
    let lb = evals[bi].delta.log10();
    let mut a = lb - step;
    let mut b = lb + step;
    let ip = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ip * (b - a);
    let mut d = a + ip * (b - a);
    let mut ec = eval_delta(plant, 10f64.powf(c), opts);
    let mut ed = eval_delta(plant, 10f64.powf(d), opts);
    while b - a > opts.log10_delta_tol {
        if key(&ec) <= key(&ed) {
            b = d;
            d = c;
            evals.push(ed);
            ed = ec;
            c = b - ip * (b - a);
            ec = eval_delta(plant, 10f64.powf(c), opts);
        } else {
            a = c;
            c = d;
            evals.push(ec);
            ec = ed;
            d = a + ip * (b - a);
            ed = eval_delta(plant, 10f64.powf(d), opts);
        }
    }
    evals.push(ec);
    evals.push(ed);
    let bi = best_of(&evals);
    let best = evals[bi].clone();
    let delta = best.delta;
    let mut probes: Vec<Probe> = evals
        .iter()
        .flat_map(|e| e.probes.iter().copied())
        .collect();
    // bracket check at delta*: independent feasibility solves at both ends
    let eps_hi = best.eps.expect("best delta has a feasible eps");
    let basis = Basis::new(plant, delta, opts.coupling);
    let bopts = opts.barrier();
    let mut eps_lo = if best.eps_lower > 0.0 {
        best.eps_lower.min(eps_hi * (1.0 - opts.eps_rel_tol))
    } else {
        eps_hi * (1.0 - opts.eps_rel_tol)
    };
    let mut lower_certified = false;
    for _ in 0..60 {
        let f = feasibility_inner(&basis, eps_lo, tol, &bopts, tol.feas_tol);
        probes.push(Probe {
            kind: ProbeKind::Feasibility,
            delta,
            eps: eps_lo,
            outcome: f.outcome,
            max_eig: f.max_eig,
            newton_steps: f.newton_steps,
        });
        if f.outcome == Outcome::Infeasible {
            lower_certified = true;
            break;
        }
        eps_lo *= 1.0 - opts.eps_rel_tol;
        if eps_lo <= 0.0 {
            break;
        }
    }
    let (mut y, mut s, mut eps_star) = (y_from(&best.v), s_from(&best.v), eps_hi);
    if lower_certified {
        // geometric bisection on the bracket
        let mut lo = eps_lo;
        let mut hi = eps_hi;
        while hi / lo > 1.0 + opts.eps_rel_tol {
            let mid = (lo * hi).sqrt();
            let f = feasibility_inner(&basis, mid, tol, &bopts, tol.feas_tol);
            probes.push(Probe {
                kind: ProbeKind::Feasibility,
                delta,
                eps: mid,
                outcome: f.outcome,
                max_eig: f.max_eig,
                newton_steps: f.newton_steps,
            });
            if f.outcome == Outcome::Feasible {
                hi = mid;
                y = f.y;
                s = f.s;
                eps_star = mid;
            } else {
                lo = mid;
            }
        }
        eps_lo = lo;
    } else {
        eps_lo = 0.0;
    }
    let y = (y + y.transpose()) * 0.5;
    let k = extract_gain(&y, &s)?;
    let cert = certify(&y, &s, eps_star, delta, plant, opts.coupling)?;
    let p = y
        .try_inverse()
        .ok_or_else(|| Error::Domain("Y is singular".into()))?;
    Ok(SynthesisResult {
        y,
        s,
        k,
        p: (p + p.transpose()) * 0.5,
        eps_star,
        eps_lower: eps_lo,
        delta_star: delta,
        cert,
        block_sizes: block_sizes(plant),
        coupling: opts.coupling,
        probes,
    })
}

#[cfg(test)]
mod tests;
