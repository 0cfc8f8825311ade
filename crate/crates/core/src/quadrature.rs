//! Numerical integration: adaptive Gauss-Kronrod and Gauss-Hermite rules.

use crate::error::{invalid, Error, Result};
use crate::Real;

// Kronrod 15-point abscissae (positive half, descending) with Kronrod weights;
// the embedded Gauss 7-point rule uses every second node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error_estimate: T,
    pub intervals: usize,
}

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let centre = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let pair = f(centre - dx) + f(centre + dx);
        kronrod = kronrod + T::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * pair;
        }
    }
    (kronrod * half_len, ((kronrod - gauss) * half_len).abs())
}

/// Globally adaptive G7-K15 integration of `f` over the finite interval `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol * |I|)` or `max_intervals` is reached.
pub fn integrate<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    max_intervals: usize,
) -> Result<Integral<T>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            error_estimate: T::zero(),
            intervals: 0,
        });
    }
    let mut pieces: Vec<(T, T, T, T)> = Vec::with_capacity(64);
    let (v, e) = gk15(&f, a, b);
    pieces.push((a, b, v, e));
    loop {
        let total: T = pieces.iter().map(|p| p.2).sum();
        let err: T = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Domain(
                "integrand produced a non-finite value".into(),
            ));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) || pieces.len() >= max_intervals {
            return Ok(Integral {
                value: total,
                error_estimate: err,
                intervals: pieces.len(),
            });
        }
        let (worst, _) =
            pieces
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, be), (i, p)| {
                    if p.3 > be {
                        (i, p.3)
                    } else {
                        (bi, be)
                    }
                });
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = T::lit(0.5) * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Gauss-Hermite rule for the weight `exp(-t^2)` on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussHermite<T> {
    /// Builds the `order`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence, seeded with the usual asymptotic root estimates.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(invalid("order", "Gauss-Hermite order must be positive"));
        }
        let n = order;
        let nf = n as f64;
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `sum_i w_i f(t_i)`, approximating `int exp(-t^2) f(t) dt`.
    pub fn apply<F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_polynomials_and_exponentials() {
        let r = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14, 50).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
        let r = integrate(|x: f64| x.exp(), -1.0, 3.0, 1e-14, 1e-14, 50).unwrap();
        assert!((r.value - (3f64.exp() - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn adaptive_refines_peaked_integrand() {
        // int_{-1}^{1} 1/(1e-4 + x^2) dx = 2/sqrt(1e-4) * atan(1/sqrt(1e-4))
        let c = 1e-4f64;
        let exact = 2.0 / c.sqrt() * (1.0 / c.sqrt()).atan();
        let r = integrate(|x: f64| 1.0 / (c + x * x), -1.0, 1.0, 1e-12, 1e-13, 500).unwrap();
        assert!(
            (r.value / exact - 1.0).abs() < 1e-11,
            "{} vs {}",
            r.value,
            exact
        );
        assert!(r.intervals > 1);
    }

    #[test]
    fn hermite_weights_sum_to_sqrt_pi_and_match_moments() {
        for order in [8usize, 16, 32, 64] {
            let gh = GaussHermite::<f64>::new(order).unwrap();
            let sum: f64 = gh.weights.iter().sum();
            assert!(
                (sum - std::f64::consts::PI.sqrt()).abs() < 1e-12,
                "order {order}"
            );
            // int t^2 exp(-t^2) = sqrt(pi)/2, int t^4 exp(-t^2) = 3 sqrt(pi)/4
            let m2 = gh.apply(|t| t * t);
            let m4 = gh.apply(|t| t.powi(4));
            assert!((m2 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
            assert!((m4 - 3.0 * std::f64::consts::PI.sqrt() / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_order_two_nodes() {
        let gh = GaussHermite::<f64>::new(2).unwrap();
        let r = 0.5f64.sqrt();
        assert!((gh.nodes[0] - r).abs() < 1e-14 && (gh.nodes[1] + r).abs() < 1e-14);
    }

    #[test]
    fn hermite_gaussian_expectation_of_exp() {
        // E[exp(s Z)] = exp(s^2/2): (1/sqrt(pi)) sum w exp(s sqrt2 t)
        let gh = GaussHermite::<f64>::new(32).unwrap();
        let s = 0.7;
        let v = gh.apply(|t| (s * 2f64.sqrt() * t).exp()) / std::f64::consts::PI.sqrt();
        assert!((v - (s * s / 2.0f64).exp()).abs() < 1e-13);
    }
}
