use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::space::SpaceSpec;

/// Dense operator on a truncated Hilbert space.
///
/// Operators at this level stay dense: the dimensions involved (tens, at most
/// a few hundred) make dense arithmetic both simpler and faster than sparse
/// bookkeeping. Sparsity is harvested later, when a Liouvillian is assembled
/// from operator products.
#[derive(Clone, Debug)]
pub struct Operator {
    space: SpaceSpec,
    data: Array2<Complex64>,
    hermitian_hint: bool,
}

impl Operator {
    pub fn new(space: SpaceSpec, data: Array2<Complex64>) -> Result<Self> {
        let d = space.total_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{} but the space has dimension {}",
                data.nrows(),
                data.ncols(),
                d
            )));
        }
        Ok(Operator { space, data, hermitian_hint: false })
    }

    pub fn zeros(space: SpaceSpec) -> Self {
        let d = space.total_dim();
        Operator { space, data: Array2::zeros((d, d)), hermitian_hint: false }
    }

    pub fn identity(space: SpaceSpec) -> Self {
        let d = space.total_dim();
        Operator { space, data: Array2::eye(d), hermitian_hint: true }
    }

    /// Diagonal operator from its eigenvalues in the standard basis.
    pub fn from_diagonal(space: SpaceSpec, diag: &[Complex64]) -> Result<Self> {
        let d = space.total_dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "diagonal has {} entries but the space has dimension {}",
                diag.len(),
                d
            )));
        }
        let mut data = Array2::zeros((d, d));
        let mut herm = true;
        for (i, &z) in diag.iter().enumerate() {
            data[(i, i)] = z;
            herm &= z.im == 0.0;
        }
        Ok(Operator { space, data, hermitian_hint: herm })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        self.hermitian_hint = false;
        &mut self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn is_hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn with_hermitian_hint(mut self, hint: bool) -> Self {
        self.hermitian_hint = hint;
        self
    }

    /// Measured deviation from hermiticity, max |A - A^dag| entrywise.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let d = (self.data[(i, j)] - self.data[(j, i)].conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    pub fn check_hermitian(&self, tolerance: f64) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation > tolerance {
            Err(Error::NotHermitian { deviation, tolerance })
        } else {
            Ok(())
        }
    }

    pub fn dagger(&self) -> Operator {
        let mut out = Array2::zeros(self.data.raw_dim());
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out[(i, j)] = self.data[(j, i)].conj();
            }
        }
        Operator { space: self.space.clone(), data: out, hermitian_hint: self.hermitian_hint }
    }

    pub fn matmul(&self, rhs: &Operator) -> Result<Operator> {
        self.space.same_space(&rhs.space)?;
        Ok(Operator {
            space: self.space.clone(),
            data: self.data.dot(&rhs.data),
            hermitian_hint: false,
        })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        self.space.same_space(&rhs.space)?;
        Ok(Operator {
            space: self.space.clone(),
            data: &self.data + &rhs.data,
            hermitian_hint: self.hermitian_hint && rhs.hermitian_hint,
        })
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Operator> {
        self.space.same_space(&rhs.space)?;
        Ok(Operator {
            space: self.space.clone(),
            data: &self.data - &rhs.data,
            hermitian_hint: self.hermitian_hint && rhs.hermitian_hint,
        })
    }

    pub fn scale(&self, c: Complex64) -> Operator {
        Operator {
            space: self.space.clone(),
            data: self.data.mapv(|z| z * c),
            hermitian_hint: self.hermitian_hint && c.im == 0.0,
        }
    }

    /// Apply to a state vector.
    pub fn apply(&self, psi: &ndarray::Array1<Complex64>) -> ndarray::Array1<Complex64> {
        self.data.dot(psi)
    }

    pub fn trace(&self) -> Complex64 {
        self.data.diag().sum()
    }

    /// Max |entry|.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// If the operator is diagonal to within `tol` (off-diagonal max abs),
    /// return the diagonal.
    pub fn diagonal_if(&self, tol: f64) -> Option<Vec<Complex64>> {
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if i != j && self.data[(i, j)].norm() > tol {
                    return None;
                }
            }
        }
        Some(self.data.diag().to_vec())
    }
}
