use fsopoint::lmi::{assemble_lmi, synthesize, SynthesisOptions};
use fsopoint::plant::AugmentedPlant;
use fsopoint::verify::{linear_gain_sweep, ClosedLoop};
use nalgebra::{Matrix2, RowVector2, Vector2};
use proptest::prelude::*;

fn plant(a1: f64, a2: f64, r: f64, h: f64) -> AugmentedPlant {
    AugmentedPlant::from_matrices(
        Matrix2::new(a1, 0.0, 0.0, a2),
        Vector2::new(1.0, 0.0),
        Matrix2::identity() * r,
        RowVector2::new(1.0, -1.0),
        RowVector2::new(h, 0.0),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn assembled_matrix_is_symmetric(
        y11 in 0.1f64..10.0, y22 in 0.1f64..10.0, y12 in -0.05f64..0.05,
        s1 in -5.0f64..5.0, s2 in -5.0f64..5.0,
        eps in 0.01f64..10.0, delta in 1e-3f64..1e3, h in 0.0f64..0.5,
    ) {
        let p = plant(0.9, 0.95, 0.1, h);
        let y = Matrix2::new(y11, y12, y12, y22);
        let l = assemble_lmi(&y, &RowVector2::new(s1, s2), eps, delta, &p).unwrap();
        prop_assert_eq!(l.nrows(), 10);
        prop_assert_eq!(&l, &l.transpose());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    // The certified bound covers the linear part of the loop, so the peak
    // frequency gain of the synthesized closed loop cannot exceed it.
    #[test]
    fn certified_bound_dominates_linear_gain(
        a1 in 0.5f64..1.0, a2 in 0.3f64..0.99, r in 0.01f64..1.0, h in 0.0f64..0.3,
    ) {
        let p = plant(a1, a2, r, h);
        let s = synthesize(&p, &SynthesisOptions::default()).unwrap();
        prop_assert!(s.cert.passed(&SynthesisOptions::default().tolerances));
        let g = linear_gain_sweep(&ClosedLoop::new(&p, s.k), 720).unwrap();
        prop_assert!(g.gain <= s.eps_star * (1.0 + 1e-9), "gain {} eps {}", g.gain, s.eps_star);
        prop_assert!(s.eps_lower <= s.eps_star);
    }
}
