//! Constructors for the operators the feedback models are built from, plus
//! operator functions and partial traces.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::Operator;
use crate::space::{FactorKind, SpaceSpec};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Annihilation matrix on a single mode: a|n> = sqrt(n)|n-1>.
pub fn annihilation_matrix(dim: usize) -> Array2<Complex64> {
    let mut m = Array2::zeros((dim, dim));
    for n in 1..dim {
        m[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    m
}

/// Number matrix on a single mode.
pub fn number_matrix(dim: usize) -> Array2<Complex64> {
    let mut m = Array2::zeros((dim, dim));
    for n in 0..dim {
        m[(n, n)] = c(n as f64, 0.0);
    }
    m
}

/// Pauli x on a two-level factor (ground = index 0).
pub fn sigma_x_matrix() -> Array2<Complex64> {
    let mut m = Array2::zeros((2, 2));
    m[(0, 1)] = c(1.0, 0.0);
    m[(1, 0)] = c(1.0, 0.0);
    m
}

/// Lowering matrix on a two-level factor: sigma|e> = |g>.
pub fn sigma_minus_matrix() -> Array2<Complex64> {
    let mut m = Array2::zeros((2, 2));
    m[(0, 1)] = c(1.0, 0.0);
    m
}

/// exp(-i theta sigma_x) in closed form.
pub fn exp_i_sigma_x_matrix(theta: f64) -> Array2<Complex64> {
    let mut m = Array2::zeros((2, 2));
    let co = c(theta.cos(), 0.0);
    let si = c(0.0, -theta.sin());
    m[(0, 0)] = co;
    m[(1, 1)] = co;
    m[(0, 1)] = si;
    m[(1, 0)] = si;
    m
}

/// Lift a single-factor matrix into the full space, identity on the other
/// factors.
pub fn tensor_embed(space: &SpaceSpec, factor: usize, local: &Array2<Complex64>) -> Result<Operator> {
    let f = space.factor(factor)?;
    if local.nrows() != f.dim || local.ncols() != f.dim {
        return Err(Error::DimensionMismatch(format!(
            "factor {factor} has dimension {} but the local matrix is {}x{}",
            f.dim,
            local.nrows(),
            local.ncols()
        )));
    }
    let d = space.total_dim();
    let stride = space.stride(factor);
    let mut data = Array2::zeros((d, d));
    for i in 0..d {
        let occ = space.occupation(i, factor);
        let base = i - occ * stride;
        for b in 0..f.dim {
            let v = local[(occ, b)];
            if v != c(0.0, 0.0) {
                data[(i, base + b * stride)] = v;
            }
        }
    }
    Operator::new(space.clone(), data)
}

/// Annihilation operator of the given factor (must be a Fock factor).
pub fn annihilation(space: &SpaceSpec, factor: usize) -> Result<Operator> {
    let f = space.factor(factor)?;
    if f.kind != FactorKind::Fock {
        return Err(Error::KindMismatch { index: factor, expected: "fock", found: "two-level" });
    }
    tensor_embed(space, factor, &annihilation_matrix(f.dim))
}

/// Number operator of the given factor.
pub fn number(space: &SpaceSpec, factor: usize) -> Result<Operator> {
    let f = space.factor(factor)?;
    let m = match f.kind {
        FactorKind::Fock => number_matrix(f.dim),
        FactorKind::TwoLevel => {
            let mut m = Array2::zeros((2, 2));
            m[(1, 1)] = c(1.0, 0.0);
            m
        }
    };
    Ok(tensor_embed(space, factor, &m)?.with_hermitian_hint(true))
}

/// Lowering operator of a two-level factor.
pub fn sigma_minus(space: &SpaceSpec, factor: usize) -> Result<Operator> {
    let f = space.factor(factor)?;
    if f.kind != FactorKind::TwoLevel {
        return Err(Error::KindMismatch { index: factor, expected: "two-level", found: "fock" });
    }
    tensor_embed(space, factor, &sigma_minus_matrix())
}

/// Basis state of a product space from per-factor occupations.
pub fn basis_state(space: &SpaceSpec, occ: &[usize]) -> Result<Array1<Complex64>> {
    if occ.len() != space.n_factors() {
        return Err(Error::DimensionMismatch(format!(
            "{} occupations given for {} factors",
            occ.len(),
            space.n_factors()
        )));
    }
    for (k, &o) in occ.iter().enumerate() {
        if o >= space.factor(k)?.dim {
            return Err(Error::InvalidParam(format!(
                "occupation {o} out of range for factor {k}"
            )));
        }
    }
    let mut v = Array1::zeros(space.total_dim());
    v[space.flat_index(occ)] = c(1.0, 0.0);
    Ok(v)
}

/// Single-mode Fock state |n>.
pub fn fock_state(dim: usize, n: usize) -> Result<Array1<Complex64>> {
    if n >= dim {
        return Err(Error::InvalidParam(format!("fock index {n} out of range for dim {dim}")));
    }
    let mut v = Array1::zeros(dim);
    v[n] = c(1.0, 0.0);
    Ok(v)
}

/// Truncated coherent state, renormalized after truncation.
pub fn coherent_state(dim: usize, alpha: Complex64) -> Array1<Complex64> {
    let mut v = Array1::zeros(dim);
    let mut amp = c(1.0, 0.0);
    v[0] = amp;
    for n in 1..dim {
        amp = amp * alpha / c((n as f64).sqrt(), 0.0);
        v[n] = amp;
    }
    let nrm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_into(|z| z / c(nrm, 0.0))
}

/// f(A) for Hermitian A, through the eigendecomposition.
pub fn op_function_general<F>(op: &Operator, f: F) -> Result<Operator>
where
    F: Fn(f64) -> Complex64,
{
    op.check_hermitian(1e-10)?;
    let (vals, vecs) = linalg::eigh(op.data())?;
    let d = op.dim();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..d {
            scaled[(i, j)] *= fv;
        }
    }
    let mut out = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let mut s = c(0.0, 0.0);
            for k in 0..d {
                s += scaled[(i, k)] * vecs[(j, k)].conj();
            }
            out[(i, j)] = s;
        }
    }
    Operator::new(op.space().clone(), out)
}

/// f(A) for Hermitian A, using the diagonal directly when A is stored
/// diagonally and falling back to the eigendecomposition otherwise.
pub fn op_function<F>(op: &Operator, f: F) -> Result<Operator>
where
    F: Fn(f64) -> Complex64,
{
    if let Some(diag) = op.diagonal_if(0.0) {
        let mut vals = Vec::with_capacity(diag.len());
        for z in &diag {
            if z.im.abs() > 1e-10 {
                return Err(Error::NotHermitian { deviation: z.im.abs(), tolerance: 1e-10 });
            }
            vals.push(f(z.re));
        }
        return Operator::from_diagonal(op.space().clone(), &vals);
    }
    op_function_general(op, f)
}

/// Partial trace keeping one factor.
pub fn partial_trace(rho: &Array2<Complex64>, space: &SpaceSpec, keep: usize) -> Result<Array2<Complex64>> {
    let fk = space.factor(keep)?;
    let d = space.total_dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{} but the space has dimension {d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let stride = space.stride(keep);
    let mut out = Array2::zeros((fk.dim, fk.dim));
    for i in 0..d {
        let oi = space.occupation(i, keep);
        let rest_i = i - oi * stride;
        for oj in 0..fk.dim {
            // same residual index on both sides traces out the other factors
            let j = rest_i + oj * stride;
            out[(oi, oj)] += rho[(i, j)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annihilation_commutator_is_identity_below_truncation() {
        let dim = 6;
        let a = annihilation_matrix(dim);
        let ad = a.t().mapv(|z| z.conj());
        let comm = a.dot(&ad) - ad.dot(&a);
        for n in 0..dim - 1 {
            assert!((comm[(n, n)] - c(1.0, 0.0)).norm() < 1e-14);
        }
        // top level is clipped by the truncation
        assert!((comm[(dim - 1, dim - 1)] - c(-(dim as f64 - 1.0), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn embed_matches_kron_order() {
        // system slowest: embedding into factor 0 of a 3x2 space gives
        // kron(local, I2)
        let s = SpaceSpec::fock_two_level(3);
        let a = annihilation(&s, 0).unwrap();
        // <(0,e)| a |(1,e)> = 1
        let bra = s.flat_index(&[0, 1]);
        let ket = s.flat_index(&[1, 1]);
        assert!((a.data()[(bra, ket)] - c(1.0, 0.0)).norm() < 1e-15);
        // no cross-factor mixing
        assert!(a.data()[(s.flat_index(&[0, 0]), s.flat_index(&[1, 1]))].norm() < 1e-15);
    }

    #[test]
    fn op_function_paths_agree() {
        let s = SpaceSpec::fock(8);
        let n = number(&s, 0).unwrap();
        let f = |x: f64| Complex64::from_polar(1.0, -0.7 * x);
        let fast = op_function(&n, f).unwrap();
        let general = op_function_general(&n, f).unwrap();
        let diff = fast.sub(&general).unwrap().max_abs();
        assert!(diff < 1e-12, "paths differ by {diff}");
    }

    #[test]
    fn op_function_general_handles_nondiagonal() {
        // exp(-i theta sigma_x) has a closed form to compare against
        let s = SpaceSpec::new(vec![crate::space::Factor {
            kind: FactorKind::TwoLevel,
            dim: 2,
        }])
        .unwrap();
        let sx = Operator::new(s, sigma_x_matrix()).unwrap().with_hermitian_hint(true);
        let theta = 0.9;
        let got = op_function_general(&sx, |x| Complex64::from_polar(1.0, -theta * x)).unwrap();
        let want = exp_i_sigma_x_matrix(theta);
        for i in 0..2 {
            for j in 0..2 {
                assert!((got.data()[(i, j)] - want[(i, j)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let s = SpaceSpec::fock_fock(3, 2);
        // rho = |1><1| (x) mixed ancilla
        let d = s.total_dim();
        let mut rho = Array2::zeros((d, d));
        rho[(s.flat_index(&[1, 0]), s.flat_index(&[1, 0]))] = c(0.25, 0.0);
        rho[(s.flat_index(&[1, 1]), s.flat_index(&[1, 1]))] = c(0.75, 0.0);
        let red = partial_trace(&rho, &s, 0).unwrap();
        assert!((red[(1, 1)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(red[(0, 0)].norm() < 1e-15);
        let anc = partial_trace(&rho, &s, 1).unwrap();
        assert!((anc[(0, 0)] - c(0.25, 0.0)).norm() < 1e-15);
        assert!((anc[(1, 1)] - c(0.75, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coherent_state_mean_number() {
        let alpha = c(0.6, -0.3);
        let v = coherent_state(40, alpha);
        let mean: f64 = v.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum();
        assert!((mean - alpha.norm_sqr()).abs() < 1e-10);
    }
}
