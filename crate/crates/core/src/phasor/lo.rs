//! Local-oscillator phase estimation and quadrature rotation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    pub phase: f64,
    /// Mean carrier amplitude over the window (input units).
    pub amplitude: f64,
    /// Per-sample noise σ pooled over both channels.
    pub sigma: f64,
    /// Standard error of `phase` from σ/(√N · amplitude).
    pub std_err: f64,
}

/// Carrier phase as the four-quadrant angle of the channel means.
///
/// Needs at least 1 ms of samples; fails with `NoCarrier` when the mean vector
/// is within 3σ/√N of zero.
pub fn estimate_lo_phase(x1: &[f64], x2: &[f64], sample_rate: f64) -> Result<PhaseEstimate> {
    if x1.len() != x2.len() {
        return Err(Error::domain("channel lengths differ"));
    }
    let n = x1.len();
    if (n as f64) < 1e-3 * sample_rate || n < 2 {
        return Err(Error::domain("phase window shorter than 1 ms"));
    }
    let nf = n as f64;
    let m1 = x1.iter().sum::<f64>() / nf;
    let m2 = x2.iter().sum::<f64>() / nf;
    let var = (x1.iter().map(|v| (v - m1).powi(2)).sum::<f64>() + x2.iter().map(|v| (v - m2).powi(2)).sum::<f64>())
        / (2.0 * nf - 2.0);
    let sigma = var.sqrt();
    let amplitude = m1.hypot(m2);
    let se = sigma / nf.sqrt();
    if !(amplitude >= 3.0 * se) || amplitude == 0.0 {
        return Err(Error::NoCarrier(format!("mean amplitude {amplitude:.3e} below 3σ/√N = {:.3e}", 3.0 * se)));
    }
    Ok(PhaseEstimate { phase: m2.atan2(m1), amplitude, sigma, std_err: se / amplitude })
}

/// Undoes the LO rotation: x̃_a = cos φ x₁ + sin φ x₂, x̃_p = −sin φ x₁ + cos φ x₂.
pub fn rotate_quadratures(x1: &[f64], x2: &[f64], phase: f64) -> (Vec<f64>, Vec<f64>) {
    let (s, c) = phase.sin_cos();
    x1.iter().zip(x2).map(|(&a, &b)| (c * a + s * b, -s * a + c * b)).unzip()
}
