use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, Inverse, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermitian eigendecomposition. Returns ascending eigenvalues and the
/// unitary whose columns are the matching eigenvectors.
pub fn eigh(m: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    // The backend hands row-major data to LAPACK untransposed, so LAPACK
    // diagonalizes the conjugate matrix; conjugating the vectors undoes that.
    let std = m.as_standard_layout();
    let (vals, vecs) = std.eigh(UPLO::Lower).map_err(|e| Error::Eig(e.to_string()))?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

/// Square root of a positive semidefinite Hermitian matrix.
///
/// Eigenvalues in `[-neg_tol, 0)` are treated as numerical noise: clamped to
/// zero and counted. Anything below `-neg_tol` is a real negativity and is an
/// error. Returns the root and the clamp count.
pub fn sqrtm_psd(m: &Array2<Complex64>, neg_tol: f64) -> Result<(Array2<Complex64>, usize)> {
    let (vals, vecs) = eigh(m)?;
    let mut clamped = 0usize;
    let d = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let root = if v < 0.0 {
            if v < -neg_tol {
                return Err(Error::Eig(format!(
                    "matrix is not positive semidefinite: eigenvalue {v:.3e} below -{neg_tol:.1e}"
                )));
            }
            clamped += 1;
            0.0
        } else {
            v.sqrt()
        };
        for i in 0..d {
            scaled[(i, j)] *= root;
        }
    }
    let mut out = Array2::zeros((d, d));
    // scaled * vecs^H, accumulated column by column
    for i in 0..d {
        for j in 0..d {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..d {
                s += scaled[(i, k)] * vecs[(j, k)].conj();
            }
            out[(i, j)] = s;
        }
    }
    Ok((out, clamped))
}

/// Singular values in descending order. Conjugation and transposition leave
/// singular values unchanged, so no layout correction is needed here.
pub fn singular_values(m: &Array2<Complex64>) -> Result<Array1<f64>> {
    let std = m.as_standard_layout();
    let (_, s, _) = std.svd(false, false).map_err(|e| Error::Eig(e.to_string()))?;
    Ok(s)
}

/// Max absolute column sum.
pub fn norm_1(m: &Array2<Complex64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant.
pub fn expm(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    const THETA_13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch("expm needs a square matrix".into()));
    }
    let nrm = norm_1(a);
    let s = if nrm > THETA_13 { (nrm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scale = Complex64::new((0.5f64).powi(s), 0.0);
    let a = a.mapv(|z| z * scale);

    let eye: Array2<Complex64> = Array2::eye(d);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let c = |x: f64| Complex64::new(x, 0.0);
    let inner_u = a6.mapv(|z| z * c(B[13])) + &a4.mapv(|z| z * c(B[11])) + &a2.mapv(|z| z * c(B[9]));
    let u_poly = a6.dot(&inner_u)
        + &a6.mapv(|z| z * c(B[7]))
        + &a4.mapv(|z| z * c(B[5]))
        + &a2.mapv(|z| z * c(B[3]))
        + &eye.mapv(|z| z * c(B[1]));
    let u = a.dot(&u_poly);

    let inner_v = a6.mapv(|z| z * c(B[12])) + &a4.mapv(|z| z * c(B[10])) + &a2.mapv(|z| z * c(B[8]));
    let v = a6.dot(&inner_v)
        + &a6.mapv(|z| z * c(B[6]))
        + &a4.mapv(|z| z * c(B[4]))
        + &a2.mapv(|z| z * c(B[2]))
        + &eye.mapv(|z| z * c(B[0]));

    let vmu = &v - &u;
    let vpu = &v + &u;
    let inv = vmu.inv().map_err(|e| Error::LinearSolve(format!("expm Pade solve: {e}")))?;
    let mut r = inv.dot(&vpu);
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigh_columns_are_eigenvectors() {
        let m = array![
            [c(2.0, 0.0), c(0.5, 0.3), c(0.0, -0.2)],
            [c(0.5, -0.3), c(1.0, 0.0), c(0.1, 0.0)],
            [c(0.0, 0.2), c(0.1, 0.0), c(3.0, 0.0)],
        ];
        let (vals, vecs) = eigh(&m).unwrap();
        for j in 0..3 {
            let v = vecs.column(j).to_owned();
            let mv = m.dot(&v);
            for i in 0..3 {
                assert!((mv[i] - v[i] * c(vals[j], 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sqrtm_squares_back() {
        let m = array![
            [c(2.0, 0.0), c(0.4, 0.1)],
            [c(0.4, -0.1), c(1.5, 0.0)],
        ];
        let (r, clamped) = sqrtm_psd(&m, 1e-10).unwrap();
        assert_eq!(clamped, 0);
        let sq = r.dot(&r);
        for i in 0..2 {
            for j in 0..2 {
                assert!((sq[(i, j)] - m[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sqrtm_rejects_real_negativity() {
        let m = array![[c(-1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(sqrtm_psd(&m, 1e-10).is_err());
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let m = array![
            [c(1.0, 2.0), c(0.0, -1.0)],
            [c(0.3, 0.0), c(2.0, 0.5)],
        ];
        let s = singular_values(&m).unwrap();
        let gram = m.t().mapv(|z| z.conj()).dot(&m);
        let (vals, _) = eigh(&gram).unwrap();
        let mut expected: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
        expected.reverse();
        for (a, b) in s.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn expm_matches_diagonal_closed_form() {
        let m = array![[c(0.0, 1.3), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.7, 0.0)]];
        let e = expm(&m).unwrap();
        assert!((e[(0, 0)] - c(0.0, 1.3).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - c(-0.7, 0.0).exp()).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_of_nilpotent_plus_scaling() {
        // exp([[0, t], [0, 0]]) = [[1, t], [0, 1]], with norm large enough to
        // force squaring steps.
        let t = 40.0;
        let m = array![[c(0.0, 0.0), c(t, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let e = expm(&m).unwrap();
        assert!((e[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((e[(0, 1)] - c(t, 0.0)).norm() < 1e-10 * t);
        assert!(e[(1, 0)].norm() < 1e-13);
        assert!((e[(1, 1)] - c(1.0, 0.0)).norm() < 1e-12);
    }
}
