use std::fmt;

use crate::error::{Error, Result};

/// Kind of a tensor factor: a truncated harmonic-oscillator mode or a
/// two-level system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Fock,
    TwoLevel,
}

impl FactorKind {
    pub fn name(self) -> &'static str {
        match self {
            FactorKind::Fock => "fock",
            FactorKind::TwoLevel => "two-level",
        }
    }
}

/// One tensor factor of a Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Factor {
    pub kind: FactorKind,
    pub dim: usize,
}

/// Layout of a truncated tensor-product Hilbert space.
///
/// Factor order is fixed once at construction; every builder in this crate
/// puts the system mode first and the ancilla (if any) second. Basis index
/// convention is row-major over factors: the first factor varies slowest,
/// matching `kron(first, second)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceSpec {
    factors: Vec<Factor>,
}

impl SpaceSpec {
    /// General constructor. Dimensions must be positive and two-level
    /// factors must have dim exactly 2.
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParam("a space needs at least one factor".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::InvalidParam(format!("factor {i} has dimension 0")));
            }
            if f.kind == FactorKind::TwoLevel && f.dim != 2 {
                return Err(Error::InvalidParam(format!(
                    "factor {i} is two-level but has dimension {}",
                    f.dim
                )));
            }
        }
        Ok(SpaceSpec { factors })
    }

    /// Single Fock mode of the given dimension (truncation n_max = dim - 1).
    pub fn fock(dim: usize) -> Self {
        SpaceSpec::new(vec![Factor { kind: FactorKind::Fock, dim }]).expect("positive dim")
    }

    /// System mode tensored with a two-level ancilla.
    pub fn fock_two_level(sys_dim: usize) -> Self {
        SpaceSpec::new(vec![
            Factor { kind: FactorKind::Fock, dim: sys_dim },
            Factor { kind: FactorKind::TwoLevel, dim: 2 },
        ])
        .expect("positive dims")
    }

    /// System mode tensored with an ancilla mode.
    pub fn fock_fock(sys_dim: usize, anc_dim: usize) -> Self {
        SpaceSpec::new(vec![
            Factor { kind: FactorKind::Fock, dim: sys_dim },
            Factor { kind: FactorKind::Fock, dim: anc_dim },
        ])
        .expect("positive dims")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, index: usize) -> Result<Factor> {
        self.factors.get(index).copied().ok_or(Error::FactorIndex {
            index,
            n_factors: self.factors.len(),
        })
    }

    /// Product of the factor dimensions.
    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    /// Stride of a factor in the flattened basis index (first factor slowest).
    pub fn stride(&self, index: usize) -> usize {
        self.factors[index + 1..].iter().map(|f| f.dim).product()
    }

    /// Occupation of the given factor in basis state `idx`.
    pub fn occupation(&self, idx: usize, factor: usize) -> usize {
        (idx / self.stride(factor)) % self.factors[factor].dim
    }

    /// Flat basis index from per-factor occupations.
    pub fn flat_index(&self, occ: &[usize]) -> usize {
        debug_assert_eq!(occ.len(), self.factors.len());
        occ.iter()
            .zip(self.factors.iter())
            .fold(0, |acc, (&o, f)| acc * f.dim + o)
    }

    /// Total occupation parity of basis state `idx` (photon number plus
    /// two-level excitation, mod 2).
    pub fn parity(&self, idx: usize) -> usize {
        let mut rest = idx;
        let mut p = 0usize;
        for f in self.factors.iter().rev() {
            p += rest % f.dim;
            rest /= f.dim;
        }
        p % 2
    }

    pub fn same_space(&self, other: &SpaceSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(self.to_string(), other.to_string()))
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|fa| format!("{}({})", fa.kind.name(), fa.dim))
            .collect();
        write!(f, "{}", parts.join(" x "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_dim_is_product() {
        let s = SpaceSpec::fock_fock(7, 5);
        assert_eq!(s.total_dim(), 35);
        assert_eq!(s.stride(0), 5);
        assert_eq!(s.stride(1), 1);
    }

    #[test]
    fn two_level_must_have_dim_2() {
        assert!(SpaceSpec::new(vec![Factor { kind: FactorKind::TwoLevel, dim: 3 }]).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let s = SpaceSpec::fock_fock(4, 3);
        for i in 0..12 {
            let occ = [s.occupation(i, 0), s.occupation(i, 1)];
            assert_eq!(s.flat_index(&occ), i);
        }
    }

    #[test]
    fn parity_counts_all_factors() {
        let s = SpaceSpec::fock_two_level(3);
        // state |n=1, excited>
        let idx = s.flat_index(&[1, 1]);
        assert_eq!(s.parity(idx), 0);
        assert_eq!(s.parity(s.flat_index(&[1, 0])), 1);
    }
}
