//! Small dense linear-algebra helpers used by the synthesis and its checks.

use nalgebra::{DMatrix, Matrix2};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// Only the lower triangle is read. Independent of nalgebra's decompositions
/// so it can serve as a cross-check on solver certificates.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let mut a = DMatrix::from_fn(n, n, |i, j| if i >= j { m[(i, j)] } else { m[(j, i)] });
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    *jacobi_eigenvalues(m).last().expect("empty matrix")
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    jacobi_eigenvalues(m)[0]
}

/// Largest absolute asymmetry `max |M - M^T|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Spectral radius of a 2x2 matrix from its characteristic polynomial.
pub fn spectral_radius2(a: &Matrix2<f64>) -> f64 {
    let tr = a.trace();
    let det = a.determinant();
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
    } else {
        det.abs().sqrt()
    }
}

/// 2-norm condition number of a symmetric positive definite matrix.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let ev = jacobi_eigenvalues(m);
    let lo = ev[0];
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        ev[ev.len() - 1] / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_known_spectrum() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let ev = jacobi_eigenvalues(&m);
        let want = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobi_agrees_with_nalgebra() {
        let mut src = crate::NoiseSource::new(3, 0);
        for n in [1, 2, 5, 10] {
            let g = DMatrix::from_fn(n, n, |_, _| src.gaussian::<f64>());
            let s = &g + g.transpose();
            let mut want: Vec<f64> = s.clone().symmetric_eigenvalues().iter().copied().collect();
            want.sort_by(|x, y| x.total_cmp(y));
            let got = jacobi_eigenvalues(&s);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn spectral_radius_cases() {
        assert!((spectral_radius2(&Matrix2::new(0.5, 0.0, 0.0, -0.9)) - 0.9).abs() < 1e-15);
        let rot = Matrix2::new(0.0, -0.8, 0.8, 0.0);
        assert!((spectral_radius2(&rot) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn condition_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1e-3, 1.0, 10.0]));
        assert!((spd_condition(&m) - 1e4).abs() < 1e-8);
        assert!(spd_condition(&(-m)).is_infinite());
    }
}
