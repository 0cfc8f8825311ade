use fsopoint::channel::{
    channel_step, lognormal_cdf, lognormal_pdf, simulate_channel, ChannelState, TurbulenceParams,
};
use fsopoint::quadrature::integrate;
use fsopoint::{NoiseSource, Turbulence, Turbulence32};
use proptest::prelude::*;

fn params(sigma2: f64) -> Turbulence {
    TurbulenceParams::new(sigma2, 0.1, 1e-3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_has_unit_mass_and_mean_i0(sigma2 in 0.005f64..0.1, i0 in 0.2f64..5.0) {
        let p = params(sigma2).with_i0(i0).unwrap();
        let s = sigma2.sqrt();
        let (lo, hi) = (i0 * (-12.0 * s).exp(), i0 * (12.0 * s).exp());
        let mass = integrate(|i| lognormal_pdf(i, &p).unwrap(), lo, hi, 1e-14, 1e-13, 500).unwrap();
        let mean = integrate(|i| i * lognormal_pdf(i, &p).unwrap(), lo, hi, 1e-14, 1e-13, 500).unwrap();
        prop_assert!((mass.value - 1.0).abs() < 1e-10);
        prop_assert!((mean.value / i0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cdf_is_integral_of_density(sigma2 in 0.005f64..0.1, q in 0.3f64..3.0) {
        let p = params(sigma2);
        let lo = (-14.0 * sigma2.sqrt()).exp();
        let r = integrate(|i| lognormal_pdf(i, &p).unwrap(), lo, q, 1e-15, 1e-13, 500).unwrap();
        prop_assert!((r.value - lognormal_cdf(q, &p)).abs() < 1e-10);
    }

    #[test]
    fn single_precision_tracks_double(sigma2 in 0.01f64..0.1, i in 0.5f64..2.0) {
        let p64 = params(sigma2);
        let p32 = Turbulence32::new(sigma2 as f32, 0.1, 1e-3).unwrap();
        let a = lognormal_pdf(i, &p64).unwrap();
        let b = lognormal_pdf(i as f32, &p32).unwrap() as f64;
        prop_assert!((a - b).abs() <= 1e-5 * a.max(1e-3));
    }

    #[test]
    fn step_is_pure(seed in any::<u64>(), x in 0.3f64..3.0, u in -0.1f64..0.1) {
        let p = params(0.038);
        let w: f64 = NoiseSource::new(seed, 0).gaussian();
        let s = ChannelState::new(x, &p).unwrap();
        let a = channel_step(&s, u, w, &p).unwrap();
        let b = channel_step(&s, u, w, &p).unwrap();
        prop_assert_eq!(a.state.x_p.to_bits(), b.state.x_p.to_bits());
        prop_assert!(a.state.x_p >= p.reflection_floor());
    }
}

#[test]
fn trajectories_depend_only_on_seed_and_stream() {
    let p = Turbulence::paper_default();
    let run = |seed, stream| {
        simulate_channel(
            &p,
            1.0,
            2000,
            &mut NoiseSource::new(seed, stream),
            1,
            |_, _| 0.0,
        )
        .unwrap()
        .x_p
    };
    assert_eq!(run(11, 3), run(11, 3));
    assert_ne!(run(11, 3), run(11, 4));
    assert_ne!(run(11, 3), run(12, 3));
}
