use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock;
use crate::linalg;
use crate::operator::Operator;
use crate::space::{FactorKind, SpaceSpec};

/// Tolerances a density matrix must satisfy on construction.
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGENVALUE_FLOOR: f64 = -1e-8;

/// Validated quantum state: Hermitian, unit trace, positive semidefinite
/// within tolerance.
///
/// Small negative eigenvalues (above the floor) are tolerated but the stored
/// matrix is never clamped; consumers that need exact positivity handle it
/// themselves.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: SpaceSpec,
    data: Array2<Complex64>,
}

impl DensityMatrix {
    pub fn new(space: SpaceSpec, data: Array2<Complex64>) -> Result<Self> {
        let d = space.total_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{} but the space has dimension {d}",
                data.nrows(),
                data.ncols()
            )));
        }
        let dm = DensityMatrix { space, data };
        dm.validate()?;
        Ok(dm)
    }

    pub fn from_pure(space: SpaceSpec, psi: &Array1<Complex64>) -> Result<Self> {
        let d = space.total_dim();
        if psi.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} on a space of dimension {d}",
                psi.len()
            )));
        }
        let nrm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if nrm <= 0.0 {
            return Err(Error::StateInvariant("zero state vector".into()));
        }
        let mut data = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                data[(i, j)] = psi[i] * psi[j].conj() / nrm;
            }
        }
        Ok(DensityMatrix { space, data })
    }

    pub fn validate(&self) -> Result<()> {
        let herm = {
            let mut dev: f64 = 0.0;
            for i in 0..self.dim() {
                for j in i..self.dim() {
                    dev = dev.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
                }
            }
            dev
        };
        if herm > HERMITICITY_TOL {
            return Err(Error::StateInvariant(format!(
                "hermiticity deviation {herm:.3e} exceeds {HERMITICITY_TOL:.1e}"
            )));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::StateInvariant(format!(
                "trace {tr} deviates from 1 beyond {TRACE_TOL:.1e}"
            )));
        }
        let min = self.min_eigenvalue()?;
        if min < EIGENVALUE_FLOOR {
            return Err(Error::StateInvariant(format!(
                "minimum eigenvalue {min:.3e} below {EIGENVALUE_FLOOR:.1e}"
            )));
        }
        Ok(())
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

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn trace(&self) -> Complex64 {
        self.data.diag().sum()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = linalg::eigh(&self.data)?;
        Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Tr(rho A).
    pub fn expectation(&self, op: &Operator) -> Result<Complex64> {
        self.space.same_space(op.space())?;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                s += self.data[(i, j)] * op.data()[(j, i)];
            }
        }
        Ok(s)
    }

    /// Diagonal populations (real parts).
    pub fn populations(&self) -> Vec<f64> {
        self.data.diag().iter().map(|z| z.re).collect()
    }

    pub fn purity(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                s += (self.data[(i, j)] * self.data[(j, i)]).re;
            }
        }
        s
    }

    /// Reduce to one factor, re-checking invariants on the result.
    pub fn partial_trace(&self, keep: usize) -> Result<DensityMatrix> {
        let reduced = fock::partial_trace(&self.data, &self.space, keep)?;
        let factor = self.space.factor(keep)?;
        let sub = SpaceSpec::new(vec![factor])?;
        DensityMatrix::new(sub, reduced)
    }

    /// Total population in the top and next-to-top level of each Fock factor.
    /// High values mean the truncation is cutting into the state.
    pub fn truncation_populations(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (k, f) in self.space.factors().iter().enumerate() {
            if f.kind != FactorKind::Fock {
                continue;
            }
            let mut top = 0.0;
            let mut next = 0.0;
            for i in 0..self.dim() {
                let occ = self.space.occupation(i, k);
                if occ == f.dim - 1 {
                    top += self.data[(i, i)].re;
                } else if f.dim >= 2 && occ == f.dim - 2 {
                    next += self.data[(i, i)].re;
                }
            }
            out.push((top, next));
        }
        out
    }
}
