//! Loader for the plain-text fixture matrices under tests/fixtures/.
//!
//! Format: `#`-prefixed comment lines, then `nrows ncols`, then one
//! `row col re im` line per nonzero entry.
#![allow(dead_code)] // each test binary uses its own subset

use ndarray::Array2;
use num_complex::Complex64;
use std::path::PathBuf;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load_matrix(name: &str) -> Array2<Complex64> {
    let text = std::fs::read_to_string(fixture_path(name))
        .unwrap_or_else(|e| panic!("reading fixture {name}: {e}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().unwrap_or_else(|| panic!("fixture {name} is empty"));
    let mut it = header.split_whitespace();
    let nrows: usize = it.next().unwrap().parse().unwrap();
    let ncols: usize = it.next().unwrap().parse().unwrap();
    let mut m = Array2::zeros((nrows, ncols));
    for line in lines {
        let mut it = line.split_whitespace();
        let i: usize = it.next().unwrap().parse().unwrap();
        let j: usize = it.next().unwrap().parse().unwrap();
        let re: f64 = it.next().unwrap().parse().unwrap();
        let im: f64 = it.next().unwrap().parse().unwrap();
        m[(i, j)] = Complex64::new(re, im);
    }
    m
}

/// Scalar rows from a fixture holding one value per line.
pub fn load_values(name: &str) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(fixture_path(name))
        .unwrap_or_else(|e| panic!("reading fixture {name}: {e}"));
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect()
}

pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
