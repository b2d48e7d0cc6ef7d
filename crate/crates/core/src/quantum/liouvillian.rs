//! Vectorized Lindblad generator for the driven Jaynes-Cummings system.
//!
//! ρ is flattened row-major: element ρ_ij sits at `i * dim + j`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::band::BandMatrix;
use super::ops::{annihilation, lowering, HilbertConfig};
use crate::error::{Error, Result};
use crate::params::{drive_amplitude, PhysicalParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Superoperator L with ρ̇ = L(ρ), stored as compressed sparse rows.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hc: HilbertConfig,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
    norm: f64,
    kl: usize,
    ku: usize,
}

/// H/ħ in the probe frame: Θâ†â + Δσ̂†σ̂ + i√(2κ_a)ℰ(â† − â) + ig(â†σ̂ − âσ̂†).
pub fn hamiltonian(p: &PhysicalParams, hc: HilbertConfig, g: f64, drive: f64) -> DMatrix<Complex64> {
    let a = annihilation(hc);
    let s = lowering(hc);
    let ad = a.adjoint();
    let sd = s.adjoint();
    let c = |x: f64| Complex64::new(x, 0.0);
    let eps = (2.0 * p.kappa_a).sqrt() * drive;
    &ad * &a * c(p.theta_cp)
        + &sd * &s * c(p.delta_ap)
        + (&ad - &a) * (I * eps)
        + (&ad * &s - &a * &sd) * (I * g)
}

/// Builds the generator for coupling value `g` (sign allowed).
pub fn build_liouvillian(p: &PhysicalParams, hc: HilbertConfig, g: f64) -> Result<Liouvillian> {
    p.validate()?;
    if p.m_empty > hc.n_fock() as f64 / 2.0 {
        return Err(Error::BasisTooSmall(format!(
            "empty-cavity photon number {} exceeds n_fock/2 = {}",
            p.m_empty,
            hc.n_fock() as f64 / 2.0
        )));
    }
    let drive = drive_amplitude(p)?;
    let h = hamiltonian(p, hc, g, drive);
    let a = annihilation(hc);
    let s = lowering(hc);
    Ok(Liouvillian::from_parts(
        hc,
        &h,
        &[(p.kappa_total(), a), (p.gamma_perp, s)],
    ))
}

fn rows_of(m: &DMatrix<Complex64>) -> Vec<Vec<(usize, Complex64)>> {
    let d = m.nrows();
    (0..d)
        .map(|i| {
            (0..d)
                .filter_map(|k| {
                    let v = m[(i, k)];
                    (v.norm_sqr() != 0.0).then_some((k, v))
                })
                .collect()
        })
        .collect()
}

impl Liouvillian {
    /// L(ρ) = −i[H, ρ] + Σ rate (2cρc† − c†cρ − ρc†c).
    pub fn from_parts(
        hc: HilbertConfig,
        h: &DMatrix<Complex64>,
        jumps: &[(f64, DMatrix<Complex64>)],
    ) -> Self {
        let d = hc.dim();
        let n = d * d;
        // K = H − i Σ rate c†c, so L(ρ) = −iKρ + iρK† + Σ 2 rate cρc†.
        let mut k = h.clone();
        for (rate, c) in jumps {
            k -= c.adjoint() * c * Complex64::new(0.0, *rate);
        }
        let k_rows = rows_of(&k);
        let jump_rows: Vec<(f64, Vec<Vec<(usize, Complex64)>>)> =
            jumps.iter().filter(|(r, _)| *r != 0.0).map(|(r, c)| (*r, rows_of(c))).collect();

        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut col_sums = vec![0.0f64; n];
        let mut scratch: Vec<(usize, Complex64)> = Vec::new();
        let (mut kl, mut ku) = (0usize, 0usize);
        indptr.push(0);
        for i in 0..d {
            for j in 0..d {
                let row = i * d + j;
                scratch.clear();
                for &(kk, v) in &k_rows[i] {
                    scratch.push((kk * d + j, -I * v));
                }
                for &(l, v) in &k_rows[j] {
                    scratch.push((i * d + l, I * v.conj()));
                }
                for (rate, c_rows) in &jump_rows {
                    for &(kk, ci) in &c_rows[i] {
                        for &(l, cj) in &c_rows[j] {
                            scratch.push((kk * d + l, ci * cj.conj() * (2.0 * rate)));
                        }
                    }
                }
                scratch.sort_unstable_by_key(|e| e.0);
                let mut last: Option<usize> = None;
                for &(col, v) in scratch.iter() {
                    if last == Some(col) {
                        *values.last_mut().unwrap() += v;
                    } else {
                        indices.push(col);
                        values.push(v);
                        last = Some(col);
                    }
                }
                let start = *indptr.last().unwrap();
                for idx in start..indices.len() {
                    let col = indices[idx];
                    col_sums[col] += values[idx].norm();
                    if col < row {
                        kl = kl.max(row - col);
                    } else {
                        ku = ku.max(col - row);
                    }
                }
                indptr.push(indices.len());
            }
        }
        let norm = col_sums.iter().cloned().fold(0.0, f64::max);
        Liouvillian { hc, indptr, indices, values, norm, kl, ku }
    }

    pub fn hilbert(&self) -> HilbertConfig {
        self.hc
    }

    /// Length of the vectorized density operator.
    pub fn len(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (row, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for idx in self.indptr[row]..self.indptr[row + 1] {
                acc += self.values[idx] * x[self.indices[idx]];
            }
            *o = acc;
        }
    }

    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut out);
        out
    }

    /// L + shift·1 in banded storage.
    pub(crate) fn to_band(&self, shift: f64) -> BandMatrix {
        let mut b = BandMatrix::zeros(self.len(), self.kl, self.ku);
        for row in 0..self.len() {
            for idx in self.indptr[row]..self.indptr[row + 1] {
                b.add(row, self.indices[idx], self.values[idx]);
            }
            b.add(row, row, Complex64::new(shift, 0.0));
        }
        b
    }

    /// Trace of a vectorized operator.
    pub fn trace(&self, x: &[Complex64]) -> Complex64 {
        let d = self.hc.dim();
        (0..d).map(|i| x[i * d + i]).sum()
    }
}

/// Row-major flattening of a square matrix.
pub fn vectorize(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn unvectorize(v: &[Complex64], d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{mhz, PhysicalParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_rhs(
        h: &DMatrix<Complex64>,
        jumps: &[(f64, DMatrix<Complex64>)],
        rho: &DMatrix<Complex64>,
    ) -> DMatrix<Complex64> {
        let mut out = (h * rho - rho * h) * (-I);
        for (rate, c) in jumps {
            let cd = c.adjoint();
            out += (c * rho * &cd * Complex64::new(2.0, 0.0) - &cd * c * rho - rho * &cd * c)
                * Complex64::new(*rate, 0.0);
        }
        out
    }

    #[test]
    fn sparse_generator_matches_dense_lindblad_form() {
        let p = PhysicalParams::reference().with_delta_mhz(10.0).with_theta_mhz(-3.0);
        let hc = HilbertConfig::new(5).unwrap();
        let g = mhz(7.0);
        let l = build_liouvillian(&p, hc, g).unwrap();
        let h = hamiltonian(&p, hc, g, drive_amplitude(&p).unwrap());
        let jumps = [(p.kappa_total(), annihilation(hc)), (p.gamma_perp, lowering(hc))];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = hc.dim();
        let rho = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random(), rng.random()));
        let expected = vectorize(&dense_rhs(&h, &jumps, &rho));
        let got = l.apply_vec(&vectorize(&rho));
        let scale = expected.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn generator_preserves_trace() {
        let p = PhysicalParams::reference().with_delta_mhz(10.0).with_m_empty(2.0);
        let hc = HilbertConfig::new(10).unwrap();
        let l = build_liouvillian(&p, hc, mhz(9.0)).unwrap();
        let d = hc.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
            let out = l.apply_vec(&vectorize(&herm));
            let tr = l.trace(&out);
            assert!(tr.norm() <= 1e-10 * l.norm(), "trace {tr}");
        }
    }

    #[test]
    fn undersized_basis_is_flagged() {
        let p = PhysicalParams::reference().with_m_empty(11.0);
        let err = build_liouvillian(&p, HilbertConfig::new(20).unwrap(), 0.0).unwrap_err();
        assert!(matches!(err, Error::BasisTooSmall(_)));
    }

    #[test]
    fn bandwidth_is_two_rows_plus_two() {
        let p = PhysicalParams::reference();
        let hc = HilbertConfig::new(6).unwrap();
        let l = build_liouvillian(&p, hc, mhz(5.0)).unwrap();
        let (kl, ku) = l.bandwidths();
        assert_eq!(kl.max(ku), 2 * hc.dim() + 2);
    }
}
