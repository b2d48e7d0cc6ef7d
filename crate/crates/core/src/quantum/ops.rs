//! Operators on the truncated atom ⊗ field basis.
//!
//! Basis index `2n + s` with photon number `n < n_fock` and `s = 1` for the
//! excited atom.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertConfig {
    n_fock: usize,
}

impl HilbertConfig {
    pub fn new(n_fock: usize) -> Result<Self> {
        if n_fock < 2 {
            return Err(Error::InvalidParams(format!("n_fock must be >= 2, got {n_fock}")));
        }
        Ok(HilbertConfig { n_fock })
    }

    /// Default cutoff for an empty-cavity photon number `m`:
    /// max(25, ⌈m + 6√m⌉ + 4).
    pub fn for_drive(m_empty: f64) -> Self {
        let tail = (m_empty + 6.0 * m_empty.sqrt()).ceil() as usize + 4;
        HilbertConfig { n_fock: tail.max(25) }
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn dim(&self) -> usize {
        2 * self.n_fock
    }

    pub fn index(&self, photons: usize, excited: bool) -> usize {
        2 * photons + excited as usize
    }

    pub fn enlarged(&self, extra: usize) -> Self {
        HilbertConfig { n_fock: self.n_fock + extra }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorRole {
    Hamiltonian,
    Jump,
    Observable,
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub role: OperatorRole,
    pub matrix: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn observable(matrix: DMatrix<Complex64>) -> Self {
        OperatorMatrix { role: OperatorRole::Observable, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Field annihilation operator â.
pub fn annihilation(hc: HilbertConfig) -> DMatrix<Complex64> {
    let d = hc.dim();
    let mut a = DMatrix::zeros(d, d);
    for n in 1..hc.n_fock() {
        let amp = Complex64::new((n as f64).sqrt(), 0.0);
        for s in [false, true] {
            a[(hc.index(n - 1, s), hc.index(n, s))] = amp;
        }
    }
    a
}

/// Atomic lowering operator σ̂.
pub fn lowering(hc: HilbertConfig) -> DMatrix<Complex64> {
    let d = hc.dim();
    let mut s = DMatrix::zeros(d, d);
    for n in 0..hc.n_fock() {
        s[(hc.index(n, false), hc.index(n, true))] = Complex64::new(1.0, 0.0);
    }
    s
}

/// Force observable −i(â†σ̂ − âσ̂†); its mean times ħ∇g is the dipole force.
pub fn force_operator(hc: HilbertConfig) -> OperatorMatrix {
    let a = annihilation(hc);
    let s = lowering(hc);
    let m = (a.adjoint() * &s - &a * s.adjoint()) * Complex64::new(0.0, -1.0);
    OperatorMatrix::observable(m)
}

/// Pure state |n⟩ ⊗ |g⟩ or |e⟩ as a ket.
pub fn basis_ket(hc: HilbertConfig, photons: usize, excited: bool) -> nalgebra::DVector<Complex64> {
    let mut v = nalgebra::DVector::zeros(hc.dim());
    v[hc.index(photons, excited)] = Complex64::new(1.0, 0.0);
    v
}

/// Coherent field state |α⟩ (renormalized on the truncated basis) with the atom in `excited`.
pub fn coherent_ket(hc: HilbertConfig, alpha: Complex64, excited: bool) -> nalgebra::DVector<Complex64> {
    let mut v = nalgebra::DVector::zeros(hc.dim());
    let mut amp = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..hc.n_fock() {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        v[hc.index(n, excited)] = amp;
    }
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutator_holds_below_cutoff() {
        let hc = HilbertConfig::new(6).unwrap();
        let a = annihilation(hc);
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        // [a, a†] = 1 except on the top Fock level
        for n in 0..5 {
            for s in [false, true] {
                let i = hc.index(n, s);
                assert!((comm[(i, i)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn force_operator_is_hermitian() {
        let hc = HilbertConfig::new(5).unwrap();
        let f = force_operator(hc).matrix;
        assert!((&f - f.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn default_cutoff_rule() {
        assert_eq!(HilbertConfig::for_drive(2.0).n_fock(), 25);
        // 11 + 6√11 = 30.9 → 31 + 4
        assert_eq!(HilbertConfig::for_drive(11.0).n_fock(), 35);
        assert!(HilbertConfig::new(1).is_err());
    }
}
