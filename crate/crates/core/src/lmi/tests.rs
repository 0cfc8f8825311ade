use super::*;
use crate::NoiseSource;
use nalgebra::Vector2;

fn plant(a: Matrix2<f64>, r: f64, h: f64) -> AugmentedPlant {
    AugmentedPlant::from_matrices(
        a,
        Vector2::new(1.0, 0.0),
        Matrix2::new(r, 0.0, 0.0, r),
        RowVector2::new(1.0, -1.0),
        RowVector2::new(h, 0.0),
    )
}

fn tol() -> SolverTolerances {
    SolverTolerances::default()
}

#[test]
fn decoupled_plant_gives_block_diagonal() {
    let z = AugmentedPlant::from_matrices(
        Matrix2::zeros(),
        Vector2::zeros(),
        Matrix2::zeros(),
        RowVector2::zeros(),
        RowVector2::zeros(),
    );
    let l = assemble_lmi(&Matrix2::identity(), &RowVector2::zeros(), 1.0, 1.0, &z).unwrap();
    assert_eq!(l.nrows(), 10);
    // only the (phi, x+) identity coupling survives
    let mut d = l.clone();
    for i in 0..2 {
        d[(4 + i, 6 + i)] = 0.0;
        d[(6 + i, 4 + i)] = 0.0;
    }
    assert_eq!(d, -DMatrix::<f64>::identity(10, 10));
    assert!((max_eigenvalue(&d) + 1.0).abs() < 1e-15);
}

#[test]
fn dimensions_follow_noise_convention() {
    let mut p = plant(Matrix2::identity() * 0.5, 0.01, 0.0);
    assert_eq!(block_sizes(&p), [2, 2, 2, 2, 1, 1]);
    p.noise_dim = 1;
    let l = assemble_lmi(&Matrix2::identity(), &RowVector2::zeros(), 1.0, 1.0, &p).unwrap();
    assert_eq!(l.shape(), (9, 9));
    p.noise_dim = 3;
    assert!(matches!(
        assemble_lmi(&Matrix2::identity(), &RowVector2::zeros(), 1.0, 1.0, &p),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn assembly_rejects_bad_inputs() {
    let p = plant(Matrix2::identity() * 0.5, 0.01, 0.0);
    let y = Matrix2::identity();
    let s = RowVector2::zeros();
    assert!(assemble_lmi(&y, &s, 0.0, 1.0, &p).is_err());
    assert!(assemble_lmi(&y, &s, 1.0, -1.0, &p).is_err());
    assert!(assemble_lmi(&Matrix2::new(1.0, 0.2, 0.0, 1.0), &s, 1.0, 1.0, &p).is_err());
}

#[test]
fn assembly_is_symmetric_and_affine() {
    let mut src = NoiseSource::new(21, 0);
    for _ in 0..1000 {
        let a = Matrix2::from_fn(|_, _| src.gaussian::<f64>());
        let mut p = plant(a, src.uniform(), src.uniform());
        p.b = Vector2::new(src.gaussian(), src.gaussian());
        let g = Matrix2::from_fn(|_, _| src.gaussian::<f64>());
        let y = g * g.transpose();
        let s = RowVector2::new(src.gaussian(), src.gaussian());
        let eps = 0.1 + src.uniform();
        let delta = 10f64.powf(4.0 * src.uniform() - 2.0);
        let l = assemble_lmi(&y, &s, eps, delta, &p).unwrap();
        assert_eq!(asymmetry(&l), 0.0);
        // affine in (Y, S): L(2 th) - 2 L(th) = -L(0)
        let l2 = assemble_lmi(&(y * 2.0), &(s * 2.0), eps, delta, &p).unwrap();
        let l0 = assemble_lmi(&Matrix2::zeros(), &RowVector2::zeros(), eps, delta, &p).unwrap();
        assert!((l2 - l * 2.0 + l0).amax() < 1e-9 * (1.0 + y.amax()));
    }
}

#[test]
fn balanced_form_is_a_congruence() {
    let p = plant(Matrix2::new(0.9, 0.1, 0.0, 0.7), 0.05, 0.3);
    let y = Matrix2::new(2.0, 0.3, 0.3, 1.0);
    let s = RowVector2::new(0.4, -0.2);
    let delta = 37.0;
    let l = assemble_lmi(&y, &s, 0.8, delta, &p).unwrap();
    let lb = assemble_balanced(&y, &s, 0.8, delta, &p, Coupling::Identity).unwrap();
    let mut dg = vec![1.0; 10];
    dg[4] = delta.powf(-0.5);
    dg[5] = delta.powf(-0.5);
    dg[9] = delta.sqrt();
    let dm = DMatrix::from_diagonal(&DVector::from_vec(dg));
    assert!((&dm * &l * &dm - lb).amax() < 1e-12);
}

#[test]
fn schur_chain_agrees_on_random_points() {
    let mut src = NoiseSource::new(5, 0);
    let p = plant(Matrix2::new(0.8, 0.1, 0.0, 0.6), 0.05, 0.2);
    let mut negative = 0;
    for _ in 0..500 {
        let g = Matrix2::from_fn(|_, _| src.gaussian::<f64>());
        let y = g * g.transpose() + Matrix2::identity() * 0.1;
        let s = RowVector2::new(src.gaussian(), src.gaussian()) * 0.3;
        let eps = 0.05 + 2.0 * src.uniform();
        let delta = 10f64.powf(3.0 * src.uniform() - 1.0);
        let c = schur_chain_check(&y, &s, eps, delta, &p, Coupling::Identity).unwrap();
        assert!(c.congruence_residual < 1e-10, "{c:?}");
        assert!(c.equivalent, "{c:?}");
        negative += usize::from(c.lmi_max_eig < 0.0);
    }
    // the battery must exercise both signs
    let f = feasibility_solve(
        1.0,
        10.0,
        &p,
        Coupling::Identity,
        &tol(),
        &BarrierOptions::default(),
    )
    .unwrap();
    assert_eq!(f.outcome, Outcome::Feasible);
    let c = schur_chain_check(&f.y, &f.s, 1.0, 10.0, &p, Coupling::Identity).unwrap();
    assert!(c.equivalent && c.lmi_max_eig < 0.0 && c.dissipation_max_eig < 0.0);
    assert!(negative < 500);
}

#[test]
fn printed_coupling_breaks_the_congruence() {
    let p = plant(Matrix2::new(0.8, 0.1, 0.0, 0.6), 0.05, 0.2);
    let y = Matrix2::new(2.0, 0.3, 0.3, 1.0);
    let s = RowVector2::new(0.4, -0.2);
    let c = schur_chain_check(&y, &s, 1.0, 3.0, &p, Coupling::Y).unwrap();
    assert!(c.congruence_residual > 1e-3);
    assert!(!c.equivalent);
}

#[test]
fn stable_plant_is_feasible() {
    let p = plant(Matrix2::identity() * 0.5, 0.01, 0.0);
    let f = feasibility_solve(
        1.0,
        10.0,
        &p,
        Coupling::Identity,
        &tol(),
        &BarrierOptions::default(),
    )
    .unwrap();
    assert_eq!(f.outcome, Outcome::Feasible);
    let l = assemble_lmi(&f.y, &f.s, 1.0, 10.0, &p).unwrap();
    assert!(crate::linalg::max_eigenvalue(&l) < 0.0);
    assert!(f.max_eig <= -tol().feas_tol);
    let k = extract_gain(&f.y, &f.s).unwrap();
    assert!(spectral_radius2(&(p.a - p.b * k)) < 1.0);
}

#[test]
fn unit_multiplier_is_too_weak_for_stable_plant() {
    // with delta = 1 the smallest achievable lambda_max is about +0.157
    let p = plant(Matrix2::identity() * 0.5, 0.01, 0.0);
    let f = feasibility_solve(
        1.0,
        1.0,
        &p,
        Coupling::Identity,
        &tol(),
        &BarrierOptions::default(),
    )
    .unwrap();
    assert_eq!(f.outcome, Outcome::Infeasible);
    assert!(
        f.lower_bound > 0.0 && f.lower_bound < 0.16,
        "{}",
        f.lower_bound
    );
}

#[test]
fn attenuation_below_noise_floor_is_infeasible() {
    let p = plant(Matrix2::identity() * 0.5, 0.01, 0.0);
    let f = feasibility_solve(
        1e-9,
        1.0,
        &p,
        Coupling::Identity,
        &tol(),
        &BarrierOptions::default(),
    )
    .unwrap();
    assert_eq!(f.outcome, Outcome::Infeasible);
    assert!(f.lower_bound > -tol().feas_tol);
}

#[test]
fn feasibility_is_monotone_in_eps() {
    let p = plant(Matrix2::new(1.0, 0.0, 0.0, 0.9), 0.05, 0.5);
    let delta = 100.0;
    let mut seen_feasible = false;
    for i in 0..30 {
        let eps = 0.01 * 1.3f64.powi(i);
        let f = feasibility_solve(
            eps,
            delta,
            &p,
            Coupling::Identity,
            &tol(),
            &BarrierOptions::default(),
        )
        .unwrap();
        assert_ne!(f.outcome, Outcome::Inconclusive);
        if seen_feasible {
            assert_eq!(f.outcome, Outcome::Feasible, "eps = {eps}");
        }
        seen_feasible |= f.outcome == Outcome::Feasible;
    }
    assert!(seen_feasible);
}

#[test]
fn gain_extraction() {
    let s = RowVector2::new(0.3, -0.1);
    assert_eq!(extract_gain(&Matrix2::identity(), &s).unwrap(), s);
    let k = extract_gain(&(Matrix2::identity() * 2.0), &s).unwrap();
    assert!((k - RowVector2::new(0.15, -0.05)).amax() < 1e-16);
    let mut src = NoiseSource::new(8, 0);
    for _ in 0..1000 {
        let g = Matrix2::from_fn(|_, _| src.gaussian::<f64>());
        let y = g * g.transpose() + Matrix2::identity() * 1e-3;
        let s = RowVector2::new(src.gaussian(), src.gaussian());
        let k = extract_gain(&y, &s).unwrap();
        assert!((k * y - s).norm() <= 1e-10 * s.norm().max(1.0));
    }
    assert!(matches!(
        extract_gain(&Matrix2::new(1.0, 0.0, 0.0, 1e-13), &s),
        Err(Error::IllConditioned { .. })
    ));
    assert!(extract_gain(&Matrix2::new(1.0, 0.0, 0.0, -1.0), &s).is_err());
}

#[test]
fn memoryless_plant_reaches_static_gain() {
    let r = 0.1;
    let p = plant(Matrix2::zeros(), r, 0.0);
    let res = synthesize(&p, &SynthesisOptions::default()).unwrap();
    let bound = r * 2f64.sqrt();
    assert!(res.eps_star >= bound * (1.0 - 1e-6), "{}", res.eps_star);
    assert!(res.eps_star <= bound * (1.0 + 5e-3), "{}", res.eps_star);
    assert!(res.cert.passed(&tol()), "{:?}", res.cert);
}

#[test]
fn synthesis_certificates_and_tolerance_refinement() {
    let p = plant(Matrix2::new(1.0, 0.0, 0.0, 0.95), 0.05, 0.3);
    let opts = SynthesisOptions::default();
    let res = synthesize(&p, &opts).unwrap();
    assert!(res.cert.passed(&opts.tolerances), "{:?}", res.cert);
    assert!(res.eps_lower <= res.eps_star);
    assert!(res.eps_star / res.eps_lower <= 1.0 + opts.eps_rel_tol + 1e-12);
    assert!(!res.probes.is_empty());
    let fine = SynthesisOptions {
        eps_rel_tol: opts.eps_rel_tol / 10.0,
        ..opts
    };
    let res2 = synthesize(&p, &fine).unwrap();
    assert!((res2.eps_star - res.eps_star).abs() <= opts.eps_rel_tol * res.eps_star);
}

#[test]
fn tiny_cap_is_reported_as_failure() {
    let p = plant(Matrix2::new(1.0, 0.0, 0.0, 0.95), 0.05, 0.3);
    let opts = SynthesisOptions {
        eps_cap: 1e-4,
        ..SynthesisOptions::default()
    };
    assert!(matches!(
        synthesize(&p, &opts),
        Err(Error::SynthesisFailed(_))
    ));
}
