//! Photon-number calibration, detector imbalance and local-oscillator noise.

use serde::Serialize;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Efficiency factor |1 + g e^{iφ}|² / (2(1 + g²)) of an imbalanced balanced detector.
pub fn imbalance_efficiency(gain_ratio: f64, phase: f64) -> Result<f64> {
    if !(gain_ratio >= 0.0) || !phase.is_finite() {
        return Err(Error::domain("imbalance needs gain ratio >= 0 and finite phase"));
    }
    let z = Complex64::new(1.0, 0.0) + Complex64::from_polar(gain_ratio, phase);
    Ok(z.norm_sqr() / (2.0 * (1.0 + gain_ratio * gain_ratio)))
}

/// Heterodyne signal-to-noise S²/N = 4Tηκ_b m.
pub fn heterodyne_snr(t: f64, eta: f64, kappa_b: f64, m: f64) -> f64 {
    4.0 * t * eta * kappa_b * m
}

/// Inverts [`heterodyne_snr`]: m = S² / (4 N T η κ_b).
pub fn calibrate_photon_number(signal: f64, noise: f64, t: f64, eta: f64, kappa_b: f64) -> Result<f64> {
    if !(noise > 0.0) || !(t > 0.0) || !(eta > 0.0) || !(kappa_b > 0.0) || !signal.is_finite() {
        return Err(Error::domain("calibration needs N, T, η, κ_b > 0"));
    }
    Ok(signal * signal / (noise * 4.0 * t * eta * kappa_b))
}

/// Window statistics of one channel: mean amplitude S and the variance N of
/// the per-window means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSnr {
    pub signal: f64,
    pub noise: f64,
    pub windows: usize,
}

impl WindowSnr {
    pub fn ratio(&self) -> f64 {
        self.signal * self.signal / self.noise
    }
}

pub fn window_snr(x: &[f64], window: usize) -> Result<WindowSnr> {
    if window == 0 || x.len() < 2 * window {
        return Err(Error::domain("need at least two windows"));
    }
    let means: Vec<f64> = x.chunks_exact(window).map(|c| c.iter().sum::<f64>() / window as f64).collect();
    let k = means.len() as f64;
    let signal = means.iter().sum::<f64>() / k;
    let noise = means.iter().map(|m| (m - signal).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(WindowSnr { signal, noise, windows: means.len() })
}

/// Least-squares fit n = aP + bP² through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoNoiseFit {
    pub a: f64,
    pub b: f64,
    /// Standard errors of (a, b); `None` for an exactly determined fit.
    pub std_err: Option<(f64, f64)>,
}

impl LoNoiseFit {
    /// Excess-noise coefficient b/a (per unit power).
    pub fn ratio(&self) -> f64 {
        self.b / self.a
    }
}

pub fn lo_excess_noise_fit(points: &[(f64, f64)]) -> Result<LoNoiseFit> {
    let mut powers: Vec<f64> = points.iter().map(|p| p.0).filter(|p| *p != 0.0).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    powers.dedup();
    if points.iter().any(|(p, n)| !p.is_finite() || !n.is_finite()) {
        return Err(Error::domain("non-finite fit point"));
    }
    if powers.len() < 2 {
        return Err(Error::domain("rank-deficient design: need two distinct nonzero powers"));
    }
    let m = points.len();
    let design = DMatrix::from_fn(m, 2, |i, j| points[i].0.powi(j as i32 + 1));
    let y = DVector::from_iterator(m, points.iter().map(|p| p.1));
    let svd = design.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-12).map_err(|e| Error::domain(e.to_string()))?;
    let std_err = if m > 2 {
        let resid = &design * &coef - &y;
        let s2 = resid.norm_squared() / (m - 2) as f64;
        let cov = (design.transpose() * &design)
            .try_inverse()
            .ok_or_else(|| Error::domain("rank-deficient design"))?
            * s2;
        Some((cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt()))
    } else {
        None
    };
    Ok(LoNoiseFit { a: coef[0], b: coef[1], std_err })
}
