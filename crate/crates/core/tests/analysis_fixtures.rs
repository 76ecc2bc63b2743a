//! Numerical analysis routines checked against externally computed values:
//! a high-precision Bures reference pair, brute-force Wigner samples, and a
//! scipy matrix exponential.

mod common;

use fbme_core::{bures_distance, wigner_point, DensityMatrix, SpaceSpec};
use ndarray::Array2;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Dense deterministic density matrix: rho = M M^dag, trace-normalized, with
/// M_ij = sin(1 + salt + 3i + j) + i cos(2 salt + i - 2j).
fn det_state(dim: usize, salt: f64) -> DensityMatrix {
    let mut m = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let (fi, fj) = (i as f64, j as f64);
            m[(i, j)] = c(
                (1.0 + salt + 3.0 * fi + fj).sin(),
                (2.0 * salt + fi - 2.0 * fj).cos(),
            );
        }
    }
    let mut rho = m.dot(&m.t().mapv(|z: Complex64| z.conj()));
    let tr: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
    rho.mapv_inplace(|z| z / tr);
    DensityMatrix::new(SpaceSpec::fock(dim), rho).unwrap()
}

#[test]
fn bures_distance_matches_high_precision_reference() {
    let reference = common::load_values("bures_pair.txt");
    let rho1 = det_state(6, 0.0);
    let rho2 = det_state(6, 5.0);
    let report = bures_distance(&rho1, &rho2).unwrap();
    assert!(
        (report.bures - reference[0][0]).abs() < 1e-8,
        "bures {} vs reference {}",
        report.bures,
        reference[0][0]
    );
    assert!((report.trace_term - reference[1][0]).abs() < 1e-8);
}

#[test]
fn wigner_samples_match_brute_force_reference() {
    let samples = common::load_values("wigner_samples.txt");
    let dim = 48;
    let space = SpaceSpec::fock(dim);
    let mut psi = ndarray::Array1::zeros(dim);
    for n in 0..6 {
        let phase = c(0.0, n as f64).exp();
        psi[n] = phase / (1.0 + n as f64);
    }
    let norm: f64 = psi.iter().map(|z: &Complex64| z.norm_sqr()).sum::<f64>().sqrt();
    psi.mapv_inplace(|z| z / norm);
    let rho = DensityMatrix::from_pure(space, &psi).unwrap();
    for row in &samples {
        let (x1, x2, expected) = (row[0], row[1], row[2]);
        let w = wigner_point(rho.data(), x1, x2);
        assert!(
            (w - expected).abs() < 1e-8,
            "W({x1}, {x2}) = {w} vs reference {expected}"
        );
    }
}

#[test]
fn matrix_exponential_matches_scipy() {
    let reference = common::load_matrix("expm_det6.txt");
    let dim = 6;
    let salt = 1.0;
    let mut m = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let (fi, fj) = (i as f64, j as f64);
            m[(i, j)] = c(
                0.4 * (salt + 2.0 * fi + 5.0 * fj).sin(),
                0.3 * (1.0 + salt + fi * fj).cos(),
            );
        }
    }
    let e = fbme_core::linalg::expm(&m).unwrap();
    assert!(common::max_abs_diff(&e, &reference) < 1e-12);
}
