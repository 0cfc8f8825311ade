use fsopoint::metrics::{
    ber_lognormal, ber_monte_carlo, outage_closed_form, outage_probability, power_margin, QNorm,
};
use fsopoint::Turbulence;
use proptest::prelude::*;

fn tp(sigma2: f64) -> Turbulence {
    Turbulence::paper_default().with_sigma2(sigma2).unwrap()
}

const SIGMAS: [f64; 3] = [0.0231, 0.0380, 0.0576];

#[test]
fn outage_methods_agree_on_grid() {
    for s2 in SIGMAS {
        for m in [1.0, 2.0, 5.0, 10.0] {
            let a = outage_probability(m, &tp(s2)).unwrap();
            let b = outage_closed_form(m, &tp(s2)).unwrap();
            assert!((a - b).abs() <= 1e-10, "m {m} s2 {s2}: {a} {b}");
        }
    }
}

#[test]
fn monotone_on_standard_grid() {
    let margins: Vec<f64> = (0..=40)
        .map(|i| 10f64.powf(i as f64 * 0.25 / 10.0))
        .collect();
    let snrs: Vec<f64> = (0..=60).map(|i| -5.0 + 0.5 * i as f64).collect();
    for s2 in SIGMAS {
        let po: Vec<f64> = margins
            .iter()
            .map(|&m| outage_closed_form(m, &tp(s2)).unwrap())
            .collect();
        assert!(po.windows(2).all(|w| w[1] <= w[0]));
        let ber: Vec<f64> = snrs
            .iter()
            .map(|&d| ber_lognormal(d, &tp(s2), 32, QNorm::Standard).unwrap())
            .collect();
        assert!(ber.windows(2).all(|w| w[1] < w[0]));
        assert!(ber.iter().all(|&b| (0.0..=1.0).contains(&b)));
    }
    for pair in SIGMAS.windows(2) {
        for &m in &margins {
            assert!(
                outage_closed_form(m, &tp(pair[0])).unwrap()
                    <= outage_closed_form(m, &tp(pair[1])).unwrap()
            );
        }
        for &d in &snrs {
            assert!(
                ber_lognormal(d, &tp(pair[0]), 32, QNorm::Standard).unwrap()
                    < ber_lognormal(d, &tp(pair[1]), 32, QNorm::Standard).unwrap()
            );
        }
    }
}

#[test]
fn monte_carlo_battery_covers_analytic() {
    // 3 x 4 cells; the analytic value must fall inside the Wilson interval in
    // at least 95% of them
    let mut hits = 0;
    let mut cells = 0;
    for (k, s2) in SIGMAS.iter().enumerate() {
        for (j, db) in [4.0, 7.0, 10.0, 12.0].iter().enumerate() {
            let e = ber_monte_carlo(*db, &tp(*s2), 200_000, 100 + (k * 4 + j) as u64).unwrap();
            let a = ber_lognormal(*db, &tp(*s2), 32, QNorm::Standard).unwrap();
            cells += 1;
            hits += usize::from(e.ci.0 <= a && a <= e.ci.1);
        }
    }
    assert!(hits as f64 >= 0.95 * cells as f64 - 1.0, "{hits}/{cells}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn outage_in_unit_interval_and_decreasing(s2 in 0.001f64..0.1, m in 0.1f64..100.0, f in 1.0f64..3.0) {
        let a = outage_closed_form(m, &tp(s2)).unwrap();
        let b = outage_closed_form(m * f, &tp(s2)).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn margin_inverts_outage(s2 in 0.005f64..0.1, e in 2.0f64..9.0) {
        let po = 10f64.powf(-e);
        let m = power_margin(po, &tp(s2)).unwrap();
        let back = outage_closed_form(m.exact, &tp(s2)).unwrap();
        prop_assert!((back / po - 1.0).abs() < 1e-8);
        prop_assert!(m.chernoff >= m.exact);
    }
}
