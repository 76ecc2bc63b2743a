//! Stationary states of static generators: the unique rho with L rho = 0,
//! Tr rho = 1.
//!
//! Primary method: replace one row of the d^2 x d^2 system with the trace
//! constraint vec(1)^dag x = 1 and solve by sparse LU. The builders'
//! generators all commute with photon-number parity, so when that holds
//! structurally the solve is restricted to the even-parity coherence sector
//! (half the dimension); the residual is always checked on the unmodified
//! full generator, so a state that genuinely needs the odd sector falls
//! back to the full solve. Last resort: shifted inverse iteration on
//! L^dag L.

use faer::complex_native::c64;
use faer::prelude::SpSolver;
use faer::sparse::SparseColMat;
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::CscMat;
use crate::state::DensityMatrix;
use crate::superop::{unvec_density, vec_density, SuperOp};

/// Tuning knobs for the stationary solve.
#[derive(Clone, Copy, Debug)]
pub struct SteadyOptions {
    /// Absolute residual tolerance; `None` means 1e-10 * ||L||_inf.
    pub tol: Option<f64>,
    /// Try the even-parity-sector restriction first.
    pub use_parity_sector: bool,
    /// Re-solve with a different replaced row and require agreement.
    pub check_degeneracy: bool,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions { tol: None, use_parity_sector: true, check_degeneracy: true }
    }
}

/// Solver output: the state plus how the solve went.
#[derive(Clone, Debug)]
pub struct SteadyReport {
    pub state: DensityMatrix,
    /// ||L vec(rho)||_inf on the unmodified generator.
    pub residual: f64,
    pub method: &'static str,
    /// (top, next-to-top) level populations per Fock factor. Reported, not
    /// enforced; callers decide what truncation health they need.
    pub truncation_health: Vec<(f64, f64)>,
}

fn to_faer(m: &CscMat) -> Result<SparseColMat<u32, c64>> {
    let mut trips: Vec<(u32, u32, c64)> = Vec::with_capacity(m.nnz());
    for (r, c, v) in m.iter() {
        trips.push((r as u32, c as u32, c64::new(v.re, v.im)));
    }
    SparseColMat::try_new_from_triplets(m.nrows(), m.ncols(), &trips)
        .map_err(|e| Error::LinearSolve(format!("sparse assembly: {e:?}")))
}

fn single_thread_faer() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Parallelism::None));
}

/// Parity of each vectorized index: parity(row) xor parity(col) of the
/// underlying matrix element. Returns None when some stored entry of L
/// couples the two sectors.
fn even_sector(l: &SuperOp) -> Option<Vec<usize>> {
    let d = l.space().total_dim();
    let p: Vec<usize> = (0..d).map(|i| l.space().parity(i)).collect();
    let sector = |k: usize| p[k % d] ^ p[k / d];
    let scale = l.matrix().max_abs();
    for (r, c, v) in l.matrix().iter() {
        if sector(r) != sector(c) && v.norm() > 1e-14 * scale {
            return None;
        }
    }
    Some((0..d * d).filter(|&k| sector(k) == 0).collect())
}

/// Row-replacement solve on the index subset `keep` (the whole space when
/// `keep` is the identity). `replace` is a position within `keep` and must
/// point at a diagonal vec index, whose row is the redundant one.
fn solve_row_replaced(
    m: &CscMat,
    keep: &[usize],
    diag_positions: &[usize],
    replace: usize,
) -> Result<Vec<Complex64>> {
    single_thread_faer();
    let n = keep.len();
    let sub = m.restrict(keep)?;
    let replace_row = replace as u32;
    let mut trips: Vec<(u32, u32, c64)> = Vec::with_capacity(sub.nnz() + diag_positions.len());
    for (r, c, v) in sub.iter() {
        if r as u32 != replace_row {
            trips.push((r as u32, c as u32, c64::new(v.re, v.im)));
        }
    }
    for &p in diag_positions {
        trips.push((replace_row, p as u32, c64::new(1.0, 0.0)));
    }
    let a = SparseColMat::<u32, c64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::LinearSolve(format!("sparse assembly: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::LinearSolve(format!("sparse LU: {e:?}")))?;
    let mut b = faer::Mat::<c64>::zeros(n, 1);
    b.write(replace, 0, c64::new(1.0, 0.0));
    let x = lu.solve(&b);
    let sol: Vec<Complex64> =
        (0..n).map(|i| Complex64::new(x.read(i, 0).re, x.read(i, 0).im)).collect();
    if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::LinearSolve("row-replaced system is singular".into()));
    }
    Ok(sol)
}

/// Scatter a sector solution into the full vectorized space, symmetrize,
/// and normalize the trace.
fn assemble_state(l: &SuperOp, keep: &[usize], sol: &[Complex64]) -> Result<(Array2<Complex64>, f64)> {
    let d = l.space().total_dim();
    let mut full = vec![Complex64::new(0.0, 0.0); d * d];
    for (pos, &k) in keep.iter().enumerate() {
        full[k] = sol[pos];
    }
    let rho = unvec_density(&full, d);
    let mut sym = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            sym[(i, j)] = 0.5 * (rho[(i, j)] + rho[(j, i)].conj());
        }
    }
    let tr: Complex64 = (0..d).map(|i| sym[(i, i)]).sum();
    if tr.re.abs() < 1e-8 {
        return Err(Error::LinearSolve(format!(
            "solution has near-zero trace {:.3e}; kernel vector is traceless",
            tr.re
        )));
    }
    let sym = sym.mapv(|v| v / tr.re);
    let resid = residual_inf(l, &sym);
    Ok((sym, resid))
}

fn residual_inf(l: &SuperOp, rho: &Array2<Complex64>) -> f64 {
    let v = vec_density(rho);
    let mut y = vec![Complex64::new(0.0, 0.0); v.len()];
    l.matrix().matvec(&v, &mut y);
    y.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// One row-replacement attempt on the given sector; returns the symmetrized
/// candidate, its full-generator residual, and (optionally) the degeneracy
/// probe distance from a second replaced row.
fn attempt_sector(
    l: &SuperOp,
    keep: &[usize],
    opts: &SteadyOptions,
) -> Result<(Array2<Complex64>, f64, Option<f64>)> {
    let d = l.space().total_dim();
    let diag_positions: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter(|&(_, &k)| k % d == k / d)
        .map(|(pos, _)| pos)
        .collect();
    if diag_positions.len() != d {
        return Err(Error::LinearSolve("sector misses diagonal entries".into()));
    }
    let first = diag_positions[0];
    let sol = solve_row_replaced(l.matrix(), keep, &diag_positions, first)?;
    let (rho, resid) = assemble_state(l, keep, &sol)?;
    let probe = if opts.check_degeneracy {
        let last = *diag_positions.last().unwrap();
        let sol2 = solve_row_replaced(l.matrix(), keep, &diag_positions, last)?;
        let (rho2, _) = assemble_state(l, keep, &sol2)?;
        let dist = rho
            .iter()
            .zip(rho2.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        Some(dist)
    } else {
        None
    };
    Ok((rho, resid, probe))
}

/// Shifted inverse iteration on L^dag L, the fallback when direct LU cannot
/// reach the tolerance.
///
/// With a degenerate kernel the iteration converges to whatever the start
/// vector projects onto, so callers probing for degeneracy run it twice
/// with different diagonal starts and compare.
fn inverse_iteration(l: &SuperOp, tol: f64, start_slope: f64) -> Result<(Array2<Complex64>, f64)> {
    single_thread_faer();
    let d = l.space().total_dim();
    let n = d * d;
    let m = l.matrix();
    let normal = m.dagger().matmul(m)?;
    let shift = 1e-13 * normal.norm_inf().max(1e-300);
    let shifted = normal.add_scaled(
        Complex64::new(1.0, 0.0),
        &CscMat::identity(n),
        Complex64::new(shift, 0.0),
    )?;
    let a = to_faer(&shifted)?;
    let lu = a.sp_lu().map_err(|e| Error::LinearSolve(format!("sparse LU: {e:?}")))?;

    // a full-rank diagonal start overlaps any kernel vector that carries
    // trace; the slope skews the level weights
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..d {
        x[i * (d + 1)] = Complex64::new(1.0 + start_slope * i as f64, 0.0);
    }
    let keep: Vec<usize> = (0..n).collect();
    let mut best: Option<(Array2<Complex64>, f64)> = None;
    for _ in 0..50 {
        let mut b = faer::Mat::<c64>::zeros(n, 1);
        for (i, v) in x.iter().enumerate() {
            b.write(i, 0, c64::new(v.re, v.im));
        }
        let y = lu.solve(&b);
        let mut norm = 0.0f64;
        for i in 0..n {
            let v = y.read(i, 0);
            norm += v.re * v.re + v.im * v.im;
        }
        let norm = norm.sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::LinearSolve("inverse iteration produced a zero vector".into()));
        }
        for i in 0..n {
            let v = y.read(i, 0);
            x[i] = Complex64::new(v.re / norm, v.im / norm);
        }
        let (rho, resid) = assemble_state(l, &keep, &x)?;
        let improved = best.as_ref().map_or(true, |(_, r)| resid < *r);
        if improved {
            best = Some((rho, resid));
        }
        let done = best.as_ref().map(|(_, r)| *r <= tol).unwrap_or(false);
        if done || !improved {
            break;
        }
    }
    Ok(best.unwrap())
}

/// Solve L rho = 0, Tr rho = 1 with default options.
pub fn steady_state(l: &SuperOp) -> Result<SteadyReport> {
    steady_state_with(l, &SteadyOptions::default())
}

pub fn steady_state_with(l: &SuperOp, opts: &SteadyOptions) -> Result<SteadyReport> {
    l.check_trace_preserving(1e-8)?;
    let tol = opts.tol.unwrap_or(1e-10 * l.matrix().norm_inf());
    let d = l.space().total_dim();
    let full: Vec<usize> = (0..d * d).collect();

    let mut plans: Vec<(&'static str, Vec<usize>)> = Vec::new();
    if opts.use_parity_sector {
        if let Some(keep) = even_sector(l) {
            plans.push(("sparse-lu-parity", keep));
        }
    }
    plans.push(("sparse-lu", full));

    let mut last_err: Option<Error> = None;
    let mut best_resid = f64::INFINITY;
    for (tag, keep) in &plans {
        match attempt_sector(l, keep, opts) {
            Ok((rho, resid, probe)) => {
                best_resid = best_resid.min(resid);
                if resid <= tol {
                    if let Some(dist) = probe {
                        if dist > 1e-8 {
                            return Err(Error::DegenerateKernel { distance: dist });
                        }
                    }
                    return finish(l, rho, resid, tag);
                }
            }
            Err(e @ Error::DegenerateKernel { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }

    match inverse_iteration(l, tol, 0.0) {
        Ok((rho, resid)) => {
            if resid <= tol {
                if opts.check_degeneracy {
                    let (rho2, resid2) = inverse_iteration(l, tol, 1.0)?;
                    let dist = rho
                        .iter()
                        .zip(rho2.iter())
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0, f64::max);
                    if resid2 <= tol && dist > 1e-8 {
                        return Err(Error::DegenerateKernel { distance: dist });
                    }
                }
                return finish(l, rho, resid, "inverse-iteration");
            }
            best_resid = best_resid.min(resid);
        }
        Err(e) => last_err = Some(e),
    }

    if let Some(e) = last_err {
        if !best_resid.is_finite() {
            return Err(e);
        }
    }
    Err(Error::Convergence {
        residual: best_resid,
        tolerance: tol,
        method: "sparse-lu + inverse-iteration".into(),
    })
}

fn finish(l: &SuperOp, rho: Array2<Complex64>, resid: f64, tag: &'static str) -> Result<SteadyReport> {
    let state = DensityMatrix::new(l.space().clone(), rho)?;
    let truncation_health = state.truncation_populations();
    Ok(SteadyReport { state, residual: resid, method: tag, truncation_health })
}

/// Steady state of a compound generator, reduced to one factor.
pub fn reduced_steady(l: &SuperOp, keep: usize) -> Result<DensityMatrix> {
    steady_state(l)?.state.partial_trace(keep)
}
