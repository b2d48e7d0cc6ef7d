//! Banded LU factorization with partial pivoting.
//!
//! Row `r` stores columns `r - kl ..= r + ku + kl`; the extra `kl` columns on the
//! right absorb fill-in from row interchanges, as in LAPACK's `gbtrf`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![Complex64::new(0.0, 0.0); n * width] }
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.ku + self.kl);
        row * self.width + (col + self.kl - row)
    }

    pub fn add(&mut self, row: usize, col: usize, v: Complex64) {
        assert!(
            col + self.kl >= row && col <= row + self.ku,
            "entry ({row}, {col}) outside band"
        );
        let o = self.offset(row, col);
        self.data[o] += v;
    }

    /// Factors in place. Fails only on an exactly zero pivot column.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.offset(k, k)].norm_sqr();
            for r in k + 1..=last {
                let v = self.data[self.offset(r, k)].norm_sqr();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Error::SteadyState(format!("zero pivot in column {k}")));
            }
            pivots[k] = p;
            let cmax = (k + reach).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let a = self.offset(k, c);
                    let b = self.offset(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.offset(k, k)];
            let inv = pivot.inv();
            let len = cmax - k;
            if len == 0 {
                continue;
            }
            let krow = self.offset(k, k + 1);
            for r in k + 1..=last {
                let o = self.offset(r, k);
                let factor = self.data[o] * inv;
                self.data[o] = factor;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rrow = self.offset(r, k + 1);
                // rows k and r never alias: r > k
                let (head, tail) = self.data.split_at_mut(rrow);
                let src = &head[krow..krow + len];
                for (dst, s) in tail[..len].iter_mut().zip(src) {
                    *dst -= factor * s;
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(b.len(), n);
        let reach = m.kl + m.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == Complex64::new(0.0, 0.0) {
                continue;
            }
            let last = (k + m.kl).min(n - 1);
            for r in k + 1..=last {
                b[r] -= m.data[m.offset(r, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let cmax = (k + reach).min(n - 1);
            let row = m.offset(k, k);
            let mut acc = b[k];
            for (j, c) in (k + 1..=cmax).enumerate() {
                acc -= m.data[row + 1 + j] * b[c];
            }
            b[k] = acc / m.data[row];
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
