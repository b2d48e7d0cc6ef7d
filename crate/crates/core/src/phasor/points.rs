//! Transit phasors: anti-alias, resample and convert to polar dots.

use serde::{Deserialize, Serialize};

use super::detect::TransitEvent;
use crate::error::{Error, Result};
use crate::heterodyne::Biquad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhasorOptions {
    /// Anti-alias cutoff (Hz), second order.
    pub cutoff: f64,
    /// Resampling interval (s).
    pub spacing: f64,
}

impl Default for PhasorOptions {
    fn default() -> Self {
        PhasorOptions { cutoff: 50e3, spacing: 10e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasorDot {
    pub radius: f64,
    /// In (−π, π].
    pub angle: f64,
    pub event: usize,
}

impl PhasorDot {
    pub fn new(xa: f64, xp: f64, event: usize) -> Self {
        let mut angle = xp.atan2(xa);
        if angle <= -std::f64::consts::PI {
            angle = std::f64::consts::PI;
        }
        PhasorDot { radius: xa.hypot(xp), angle, event }
    }

    pub fn cartesian(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (self.radius * c, self.radius * s)
    }
}

/// Dots in counts, with the scale needed to compare them to theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasorSet {
    pub dots: Vec<PhasorDot>,
    pub events: Vec<usize>,
    pub counts_per_sqrt_photon: f64,
    /// Empty-cavity radius (counts).
    pub baseline_radius: f64,
    /// Per-dot noise σ per quadrature (counts).
    pub noise_sigma: f64,
}

impl PhasorSet {
    /// Largest radial change and largest arc length (radius × angle) away from
    /// the baseline point, both in counts.
    pub fn excursions(&self) -> (f64, f64) {
        let r0 = self.baseline_radius;
        self.dots.iter().fold((0.0f64, 0.0f64), |(dr, arc), d| {
            (dr.max((d.radius - r0).abs()), arc.max(d.angle.abs() * r0))
        })
    }

    pub fn mean_angle(&self) -> (f64, f64) {
        let n = self.dots.len() as f64;
        let m = self.dots.iter().map(|d| d.angle).sum::<f64>() / n;
        let var = self.dots.iter().map(|d| (d.angle - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (m, (var / n).sqrt())
    }

    /// Overlays several sets, rescaling each to the mean baseline radius.
    pub fn overlay(sets: &[PhasorSet]) -> Result<PhasorSet> {
        if sets.is_empty() {
            return Err(Error::domain("nothing to overlay"));
        }
        let k = sets.len() as f64;
        let radius = sets.iter().map(|s| s.baseline_radius).sum::<f64>() / k;
        let mut dots = Vec::new();
        let mut sigma2 = 0.0;
        for s in sets {
            let f = radius / s.baseline_radius;
            dots.extend(s.dots.iter().map(|d| PhasorDot { radius: d.radius * f, ..*d }));
            sigma2 += (s.noise_sigma * f).powi(2);
        }
        Ok(PhasorSet {
            dots,
            events: sets.iter().flat_map(|s| s.events.iter().copied()).collect(),
            counts_per_sqrt_photon: sets.iter().map(|s| s.counts_per_sqrt_photon).sum::<f64>() / k,
            baseline_radius: radius,
            noise_sigma: (sigma2 / k).sqrt(),
        })
    }
}

pub fn phasor_points(event: &TransitEvent, opts: &PhasorOptions) -> Result<PhasorSet> {
    let fs = event.sample_rate;
    let step = (opts.spacing * fs).round() as usize;
    if step == 0 || !(opts.cutoff > 0.0) || opts.cutoff >= fs / 2.0 {
        return Err(Error::Config("phasor spacing and cutoff must fit the sample rate".into()));
    }
    let (ba, bp) = event.baseline_quadratures();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let (ma, mp) = (mean(ba), mean(bp));
    let mut fa = Biquad::butterworth_lowpass(opts.cutoff, fs);
    let mut fp = fa;
    fa.settle(ma);
    fp.settle(mp);
    let ya: Vec<f64> = event.xa.iter().map(|&v| fa.process(v)).collect();
    let yp: Vec<f64> = event.xp.iter().map(|&v| fp.process(v)).collect();

    // filtered scatter over the baseline, after a short settling margin
    let skip = (event.lead / 10).min(event.lead);
    let base = skip..event.lead;
    let nb = base.len().max(2) as f64;
    let var = (ya[base.clone()].iter().map(|v| (v - ma).powi(2)).sum::<f64>()
        + yp[base].iter().map(|v| (v - mp).powi(2)).sum::<f64>())
        / (2.0 * (nb - 1.0));

    let dots: Vec<PhasorDot> =
        (event.lead..ya.len()).step_by(step).map(|i| PhasorDot::new(ya[i], yp[i], event.id)).collect();
    if dots.len() < 3 {
        return Err(Error::Rejected(format!("event {} yields only {} phasor points", event.id, dots.len())));
    }
    Ok(PhasorSet {
        dots,
        events: vec![event.id],
        counts_per_sqrt_photon: event.counts_per_sqrt_photon,
        baseline_radius: ma.hypot(mp),
        noise_sigma: var.sqrt(),
    })
}
