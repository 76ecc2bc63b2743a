//! State comparison and visualization: Bures distance, Wigner grids,
//! quadrature moments.

use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg;
use crate::space::FactorKind;
use crate::state::DensityMatrix;

/// Which Bures formula to evaluate. The two agree at 0 and sqrt(2) and are
/// monotonically related; all thresholds in this crate use `Scaled`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuresConvention {
    /// sqrt(2) * (1 - F)
    Scaled,
    /// sqrt(2 * (1 - F)), the metric form
    Metric,
}

/// Result of a Bures comparison. `trace_term` is
/// F = Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)), the fidelity-like quantity both
/// conventions are built from.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonReport {
    pub bures: f64,
    pub trace_term: f64,
    /// Eigenvalues in [-1e-10, 0) zeroed while taking the two matrix roots.
    pub clamped: usize,
    pub convention: BuresConvention,
}

const CLAMP_TOL: f64 = 1e-10;

/// Eigenvalues below this are numerical rank noise; their square roots
/// (~1e-7 and up) would otherwise leak into the root matrix and break the
/// 1e-10 symmetry of the distance.
const ROOT_FLOOR: f64 = 1e-14;

/// PSD square root for the distance: eigendecomposition with eigenvalues in
/// [-1e-10, 0) clamped to zero and counted, below that an error, and
/// positives under the rank floor zeroed silently.
fn clamped_root(m: &Array2<Complex64>) -> Result<(Array2<Complex64>, usize)> {
    let (vals, vecs) = linalg::eigh(m)?;
    let d = vals.len();
    let mut clamped = 0usize;
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        if v < -CLAMP_TOL {
            return Err(Error::Eig(format!(
                "matrix is not positive semidefinite: eigenvalue {v:.3e}"
            )));
        }
        if v < 0.0 {
            clamped += 1;
        }
        let root = if v < ROOT_FLOOR { 0.0 } else { v.sqrt() };
        for i in 0..d {
            scaled[(i, j)] *= root;
        }
    }
    let mut out = Array2::zeros((d, d));
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

pub fn bures_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<ComparisonReport> {
    bures_distance_with(rho1, rho2, BuresConvention::Scaled)
}

pub fn bures_distance_with(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    convention: BuresConvention,
) -> Result<ComparisonReport> {
    rho1.space().same_space(rho2.space())?;
    let (root1, clamp1) = clamped_root(rho1.data())?;
    let (root2, clamp2) = clamped_root(rho2.data())?;
    // Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)) equals the nuclear norm of
    // sqrt(rho1) sqrt(rho2); singular values enter linearly, so eigenvalue
    // noise is never amplified by an outer square root, and symmetry in the
    // arguments is automatic.
    let product = root1.dot(&root2);
    let trace_term = linalg::singular_values(&product)?.iter().sum::<f64>();
    let gap = (1.0 - trace_term).max(0.0);
    let bures = match convention {
        BuresConvention::Scaled => 2.0f64.sqrt() * gap,
        BuresConvention::Metric => (2.0 * gap).sqrt(),
    };
    Ok(ComparisonReport { bures, trace_term, clamped: clamp1 + clamp2, convention })
}

/// Rectangular sampling window for a Wigner function, in the quadratures
/// X1 = a + a^dag, X2 = -i(a - a^dag).
#[derive(Clone, Copy, Debug)]
pub struct WignerGridSpec {
    pub x1_min: f64,
    pub x1_max: f64,
    pub n1: usize,
    pub x2_min: f64,
    pub x2_max: f64,
    pub n2: usize,
}

impl Default for WignerGridSpec {
    fn default() -> Self {
        WignerGridSpec { x1_min: -10.0, x1_max: 10.0, n1: 201, x2_min: -10.0, x2_max: 10.0, n2: 201 }
    }
}

impl WignerGridSpec {
    fn validate(&self) -> Result<()> {
        if self.n1 < 2 || self.n2 < 2 {
            return Err(Error::InvalidParam("wigner grid needs at least 2x2 points".into()));
        }
        if self.x1_max <= self.x1_min || self.x2_max <= self.x2_min {
            return Err(Error::InvalidParam("wigner grid bounds are inverted or empty".into()));
        }
        Ok(())
    }
}

/// Sampled Wigner function, normalized so the full-plane integral over
/// (X1, X2) is 1. `values[(i, j)]` is W(x1[i], x2[j]).
#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub values: Array2<f64>,
    pub cell_area: f64,
    /// Riemann sum of values * cell_area; near 1 when the grid covers the
    /// state.
    pub norm_sum: f64,
    /// Set when norm_sum is outside [0.99, 1.01]: the grid misses support.
    pub coverage_warning: bool,
}

/// W at a single phase-space point, through the displaced-parity form
/// W(alpha) = (2/pi) Tr[rho D(alpha) Pi D^dag(alpha)] rescaled by the
/// Jacobian of alpha = (X1 + i X2)/2.
///
/// D(alpha) Pi D^dag(alpha) = D(2 alpha) Pi, and with beta = 2 alpha the
/// unitary matrix elements T[m][n] = <m|D(beta)|n> follow the one-term
/// recurrence T[m][n+1] = (sqrt(m) T[m-1][n] - conj(beta) T[m][n]) /
/// sqrt(n+1), seeded by the coherent-state column T[m][0]; every entry is
/// bounded by 1, so the recursion cannot blow up.
pub fn wigner_point(rho: &Array2<Complex64>, x1: f64, x2: f64) -> f64 {
    let d = rho.nrows();
    let beta = Complex64::new(x1, x2);
    let t = displacement_elements(d, beta);
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..d {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for n in 0..d {
            acc += rho[(m, n)] * t[(n, m)] * sign;
        }
    }
    (2.0 / PI) * acc.re / 4.0
}

/// <m|D(beta)|n> for m, n < d.
fn displacement_elements(d: usize, beta: Complex64) -> Array2<Complex64> {
    let mut t = Array2::zeros((d, d));
    let x = beta.norm_sqr();
    // coherent-state column, accumulated multiplicatively
    let mut cur = Complex64::new((-0.5 * x).exp(), 0.0);
    t[(0, 0)] = cur;
    for m in 1..d {
        cur = cur * beta / (m as f64).sqrt();
        t[(m, 0)] = cur;
    }
    let bc = beta.conj();
    for n in 0..d - 1 {
        let inv = 1.0 / ((n + 1) as f64).sqrt();
        t[(0, n + 1)] = -bc * t[(0, n)] * inv;
        for m in 1..d {
            t[(m, n + 1)] = ((m as f64).sqrt() * t[(m - 1, n)] - bc * t[(m, n)]) * inv;
        }
    }
    t
}

pub fn wigner(rho: &DensityMatrix, spec: &WignerGridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    if rho.space().n_factors() != 1 || rho.space().factor(0)?.kind != FactorKind::Fock {
        return Err(Error::InvalidParam(
            "wigner needs a single-mode state; reduce compound states first".into(),
        ));
    }
    let step1 = (spec.x1_max - spec.x1_min) / (spec.n1 - 1) as f64;
    let step2 = (spec.x2_max - spec.x2_min) / (spec.n2 - 1) as f64;
    let x1: Vec<f64> = (0..spec.n1).map(|i| spec.x1_min + step1 * i as f64).collect();
    let x2: Vec<f64> = (0..spec.n2).map(|j| spec.x2_min + step2 * j as f64).collect();
    let mut values = Array2::zeros((spec.n1, spec.n2));
    for (i, &a) in x1.iter().enumerate() {
        for (j, &b) in x2.iter().enumerate() {
            values[(i, j)] = wigner_point(rho.data(), a, b);
        }
    }
    let cell_area = step1 * step2;
    let norm_sum: f64 = values.iter().sum::<f64>() * cell_area;
    let coverage_warning = !(0.99..=1.01).contains(&norm_sum);
    Ok(WignerGrid { x1, x2, values, cell_area, norm_sum, coverage_warning })
}

/// Largest asymmetry of the grid under (X1, X2) -> (-X1, -X2). Exactly zero
/// only on grids symmetric about the origin (the default is).
pub fn point_asymmetry(grid: &WignerGrid) -> f64 {
    let (n1, n2) = grid.values.dim();
    let mut worst = 0.0f64;
    for i in 0..n1 {
        for j in 0..n2 {
            let diff = (grid.values[(i, j)] - grid.values[(n1 - 1 - i, n2 - 1 - j)]).abs();
            worst = worst.max(diff);
        }
    }
    worst
}

/// First and second quadrature moments of a single-mode state.
#[derive(Clone, Copy, Debug)]
pub struct Moments {
    pub mean_n: f64,
    pub mean_x1: f64,
    pub mean_x2: f64,
    pub var_x1: f64,
    pub var_x2: f64,
}

pub fn moments(rho: &DensityMatrix) -> Result<Moments> {
    if rho.space().n_factors() != 1 || rho.space().factor(0)?.kind != FactorKind::Fock {
        return Err(Error::InvalidParam(
            "moments needs a single-mode state; reduce compound states first".into(),
        ));
    }
    let d = rho.space().total_dim();
    let m = rho.data();
    // <a>, <a^2>, <a^dag a> straight off the Fock matrix elements:
    // <a> = sum_n sqrt(n+1) rho[n+1, n]
    let mut a = Complex64::new(0.0, 0.0);
    let mut a2 = Complex64::new(0.0, 0.0);
    let mut n_mean = 0.0;
    for n in 0..d {
        n_mean += n as f64 * m[(n, n)].re;
        if n + 1 < d {
            a += ((n + 1) as f64).sqrt() * m[(n + 1, n)];
        }
        if n + 2 < d {
            a2 += (((n + 1) * (n + 2)) as f64).sqrt() * m[(n + 2, n)];
        }
    }
    let mean_x1 = 2.0 * a.re;
    let mean_x2 = 2.0 * a.im;
    let x1_sq = 2.0 * a2.re + 2.0 * n_mean + 1.0;
    let x2_sq = -2.0 * a2.re + 2.0 * n_mean + 1.0;
    Ok(Moments {
        mean_n: n_mean,
        mean_x1,
        mean_x2,
        var_x1: x1_sq - mean_x1 * mean_x1,
        var_x2: x2_sq - mean_x2 * mean_x2,
    })
}

/// Largest |rho_nm| with |n - m| odd. The two-photon drive never populates
/// odd coherences, so steady states of every scheme here vanish on them.
pub fn odd_coherence_max(rho: &DensityMatrix) -> f64 {
    let d = rho.space().total_dim();
    let mut worst = 0.0f64;
    for n in 0..d {
        for m in 0..d {
            if (rho.space().parity(n) + rho.space().parity(m)) % 2 == 1 {
                worst = worst.max(rho.data()[(n, m)].norm());
            }
        }
    }
    worst
}
