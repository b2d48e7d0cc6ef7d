//! Signal-to-noise and coupling sensitivity of a transit.

use serde::Serialize;

use super::detect::TransitEvent;
use crate::params::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub snr_amp: f64,
    pub snr_phase: f64,
    pub combined: f64,
    pub bandwidth: f64,
    /// Fractional sensitivity (1/√Hz).
    pub fractional: f64,
    /// Coupling sensitivity S_g (kHz/√Hz).
    pub s_g_khz: f64,
}

impl SensitivityReport {
    pub fn from_snr(snr_amp: f64, snr_phase: f64, bandwidth: f64, g0: f64) -> Self {
        let combined = snr_amp.hypot(snr_phase);
        let root_bw = bandwidth.sqrt();
        SensitivityReport {
            snr_amp,
            snr_phase,
            combined,
            bandwidth,
            fractional: 1.0 / (combined * root_bw),
            s_g_khz: g0 / (2.0 * std::f64::consts::PI * combined * root_bw) / 1e3,
        }
    }
}

fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    if x.len() < w || w == 0 {
        return Vec::new();
    }
    x.windows(w).map(|s| s.iter().sum::<f64>() / w as f64).collect()
}

/// Full-signal to rms-noise ratios of both quadratures at the analog bandwidth.
///
/// Signal is the peak excursion of the 10 µs moving average from the baseline
/// mean; noise is the per-sample σ of the baseline.
pub fn sensitivity_report(event: &TransitEvent, p: &PhysicalParams, bandwidth: f64) -> SensitivityReport {
    let w = (10e-6 * event.sample_rate).round().max(1.0) as usize;
    let (ba, bp) = event.baseline_quadratures();
    let (ea, ep) = event.event_quadratures();
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1).max(1) as f64).sqrt();
        (m, s)
    };
    let (ma, sa) = stats(ba);
    let (mp, sp) = stats(bp);
    let peak = |v: &[f64], m: f64| moving_average(v, w).iter().map(|x| (x - m).abs()).fold(0.0, f64::max);
    let snr_amp = peak(ea, ma) / sa.max(f64::MIN_POSITIVE);
    let snr_phase = peak(ep, mp) / sp.max(f64::MIN_POSITIVE);
    SensitivityReport::from_snr(snr_amp, snr_phase, bandwidth, p.g0)
}

/// Orders events by combined SNR, strongest first.
pub fn rank_events<'a>(events: &'a [TransitEvent], p: &PhysicalParams, bandwidth: f64) -> Vec<(&'a TransitEvent, SensitivityReport)> {
    let mut out: Vec<_> = events.iter().map(|e| (e, sensitivity_report(e, p, bandwidth))).collect();
    out.sort_by(|a, b| b.1.combined.total_cmp(&a.1.combined));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::mhz;

    #[test]
    fn combined_ratio_of_the_quoted_quadratures() {
        let r = SensitivityReport::from_snr(4.0, 2.5, 3e5, mhz(11.0));
        assert!((4.2..=4.9).contains(&r.combined), "{}", r.combined);
    }

    #[test]
    fn quoted_sensitivity_chain() {
        let r = SensitivityReport::from_snr(4.5, 0.0, 3e5, mhz(11.0));
        assert!((r.fractional / 4.1e-4 - 1.0).abs() < 0.1, "{}", r.fractional);
        assert!((r.s_g_khz / 4.5 - 1.0).abs() < 0.1, "{}", r.s_g_khz);
    }
}
