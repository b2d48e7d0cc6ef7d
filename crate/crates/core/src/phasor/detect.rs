//! Transit detection on the rotated amplitude quadrature.
//!
//! Every window statistic is computed from exact integer sums of ADC counts,
//! so a result depends only on the samples around it and detection commutes
//! with shifting the trace.

use serde::{Deserialize, Serialize};

use super::lo::{estimate_lo_phase, rotate_quadratures};
use crate::error::{Error, Result};
use crate::heterodyne::QuadratureTrace;

/// What counts as a deviation from the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectStatistic {
    /// Drop of the smoothed x̃_a below its baseline.
    #[default]
    AmplitudeDip,
    /// Distance of the smoothed (x₁, x₂) point from its baseline mean, in
    /// either direction; sees dispersive events that barely touch x̃_a.
    Excursion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectOptions {
    /// Moving-average length (s).
    pub smoothing: f64,
    /// Trigger level in units of the smoothed baseline σ.
    pub threshold: f64,
    /// Minimum time continuously beyond `threshold` (s).
    pub min_duration: f64,
    /// Boundary level in σ units.
    pub boundary: f64,
    /// Baseline window preceding an event (s).
    pub baseline: f64,
    /// Gap between the trigger baseline and the tested window (s), so a
    /// slowly starting dip does not leak into its own baseline.
    pub guard: f64,
    pub statistic: DetectStatistic,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            smoothing: 10e-6,
            threshold: 5.0,
            min_duration: 50e-6,
            boundary: 3.0,
            baseline: 2e-3,
            guard: 100e-6,
            statistic: DetectStatistic::AmplitudeDip,
        }
    }
}

impl DetectOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.smoothing > 0.0
            && self.min_duration > 0.0
            && self.baseline > self.smoothing
            && self.guard >= 0.0
            && self.threshold > 0.0
            && self.boundary > 0.0
            && self.boundary <= self.threshold;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("detection needs 0 < boundary ≤ threshold and baseline > smoothing > 0".into()))
        }
    }
}

/// A detected transit. Sample indices refer to the source trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitEvent {
    pub id: usize,
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    pub sample_rate: f64,
    /// LO phase estimated over the baseline window.
    pub lo_phase: f64,
    /// Mean x̃_a over the baseline window (counts).
    pub baseline_mean: f64,
    /// Per-sample noise σ over the baseline window (counts).
    pub baseline_sigma: f64,
    /// σ of the moving average over the detection baseline (counts).
    pub smoothed_sigma: f64,
    /// Peak deviation in units of `smoothed_sigma`.
    pub score: f64,
    pub counts_per_sqrt_photon: f64,
    /// Samples before `start` held in `xa`/`xp`; they are the baseline window.
    pub lead: usize,
    #[serde(skip)]
    pub xa: Vec<f64>,
    #[serde(skip)]
    pub xp: Vec<f64>,
}

impl TransitEvent {
    pub fn duration(&self) -> f64 {
        (self.end - self.start) as f64 / self.sample_rate
    }

    /// Rotated quadratures inside the event.
    pub fn event_quadratures(&self) -> (&[f64], &[f64]) {
        (&self.xa[self.lead..], &self.xp[self.lead..])
    }

    /// Rotated quadratures over the baseline window.
    pub fn baseline_quadratures(&self) -> (&[f64], &[f64]) {
        (&self.xa[..self.lead], &self.xp[..self.lead])
    }
}

/// Frozen detection baseline.
#[derive(Debug, Clone, Copy)]
struct Baseline {
    cos: f64,
    sin: f64,
    mu_a: f64,
    mu_p: f64,
    sigma_a: f64,
    sigma_pair: f64,
}

struct Sums {
    w: usize,
    /// Moving-window sums per channel.
    s1: Vec<i64>,
    s2: Vec<i64>,
    p1: Vec<i64>,
    p2: Vec<i64>,
    r1: Vec<i64>,
    r2: Vec<i64>,
    q11: Vec<i128>,
    q12: Vec<i128>,
    q22: Vec<i128>,
}

fn prefix<T: Copy + std::ops::Add<Output = T> + Default>(v: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = vec![T::default()];
    let mut acc = T::default();
    for x in v {
        acc = acc + x;
        out.push(acc);
    }
    out
}

impl Sums {
    fn new(x1: &[i16], x2: &[i16], w: usize) -> Self {
        let p1 = prefix(x1.iter().map(|&v| v as i64));
        let p2 = prefix(x2.iter().map(|&v| v as i64));
        let nm = x1.len() + 1 - w;
        let s1: Vec<i64> = (0..nm).map(|j| p1[j + w] - p1[j]).collect();
        let s2: Vec<i64> = (0..nm).map(|j| p2[j + w] - p2[j]).collect();
        Sums {
            w,
            r1: prefix(s1.iter().copied()),
            r2: prefix(s2.iter().copied()),
            q11: prefix(s1.iter().map(|&a| a as i128 * a as i128)),
            q12: prefix(s1.iter().zip(&s2).map(|(&a, &b)| a as i128 * b as i128)),
            q22: prefix(s2.iter().map(|&b| b as i128 * b as i128)),
            s1,
            s2,
            p1,
            p2,
        }
    }

    fn len(&self) -> usize {
        self.s1.len()
    }

    /// Baseline from samples [j − nb, j).
    fn baseline(&self, j: usize, nb: usize) -> Baseline {
        let w = self.w as f64;
        let m1 = (self.p1[j] - self.p1[j - nb]) as f64;
        let m2 = (self.p2[j] - self.p2[j - nb]) as f64;
        let (sin, cos) = if m1 == 0.0 && m2 == 0.0 { (0.0, 1.0) } else { m2.atan2(m1).sin_cos() };
        // moving averages whose windows lie inside the baseline
        let (lo, hi) = (j - nb, j + 1 - self.w);
        let k = (hi - lo) as i128;
        let a1 = (self.r1[hi] - self.r1[lo]) as i128;
        let a2 = (self.r2[hi] - self.r2[lo]) as i128;
        // K²·covariance, exact
        let c11 = (k * (self.q11[hi] - self.q11[lo]) - a1 * a1) as f64;
        let c12 = (k * (self.q12[hi] - self.q12[lo]) - a1 * a2) as f64;
        let c22 = (k * (self.q22[hi] - self.q22[lo]) - a2 * a2) as f64;
        let norm = w * w * (k * k) as f64;
        let var_a = (cos * cos * c11 + 2.0 * cos * sin * c12 + sin * sin * c22) / norm;
        // half a count: quantized, noise-free traces still get a finite scale
        let floor = 0.5;
        Baseline {
            cos,
            sin,
            mu_a: (cos * a1 as f64 + sin * a2 as f64) / (w * k as f64),
            mu_p: (-sin * a1 as f64 + cos * a2 as f64) / (w * k as f64),
            sigma_a: var_a.max(0.0).sqrt().max(floor),
            sigma_pair: ((c11 + c22) / (2.0 * norm)).max(0.0).sqrt().max(floor),
        }
    }

    fn deviation(&self, j: usize, b: &Baseline, stat: DetectStatistic) -> f64 {
        let w = self.w as f64;
        let (v1, v2) = (self.s1[j] as f64 / w, self.s2[j] as f64 / w);
        let a = b.cos * v1 + b.sin * v2;
        match stat {
            DetectStatistic::AmplitudeDip => (b.mu_a - a) / b.sigma_a,
            DetectStatistic::Excursion => {
                let p = -b.sin * v1 + b.cos * v2;
                (a - b.mu_a).hypot(p - b.mu_p) / b.sigma_pair
            }
        }
    }
}

fn samples(t: f64, fs: f64) -> usize {
    (t * fs).round().max(1.0) as usize
}

pub fn detect_transits(trace: &QuadratureTrace, opts: &DetectOptions) -> Result<Vec<TransitEvent>> {
    opts.validate()?;
    let fs = trace.header.sample_rate;
    let (w, nb, min_run) = (samples(opts.smoothing, fs), samples(opts.baseline, fs), samples(opts.min_duration, fs));
    let gap = (opts.guard * fs).round() as usize;
    let n = trace.len();
    if n < nb + gap + w + min_run {
        return Ok(Vec::new());
    }
    let sums = Sums::new(&trace.x1, &trace.x2, w);
    let nm = sums.len();
    let half = w / 2;

    // (first, last + 1) moving-average indices, and the peak deviation
    let mut spans: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut j = nb + gap;
    while j < nm {
        let b = sums.baseline(j - gap, nb);
        if sums.deviation(j, &b, opts.statistic) <= opts.threshold {
            j += 1;
            continue;
        }
        let mut k = j;
        let mut peak = 0.0f64;
        while k < nm {
            let d = sums.deviation(k, &b, opts.statistic);
            if d <= opts.threshold {
                break;
            }
            peak = peak.max(d);
            k += 1;
        }
        if k - j < min_run {
            j = k;
            continue;
        }
        let mut s = j;
        while s > 0 && sums.deviation(s - 1, &b, opts.statistic) > opts.boundary {
            s -= 1;
        }
        let mut e = k;
        while e < nm && sums.deviation(e, &b, opts.statistic) > opts.boundary {
            peak = peak.max(sums.deviation(e, &b, opts.statistic));
            e += 1;
        }
        spans.push((s + half, (e + half).min(n), peak, b.sigma_a));
        j = e;
    }

    let mut merged: Vec<(usize, usize, f64, f64)> = Vec::new();
    for sp in spans {
        match merged.last_mut() {
            Some(last) if sp.0 <= last.1 => {
                last.1 = last.1.max(sp.1);
                last.2 = last.2.max(sp.2);
            }
            _ => merged.push(sp),
        }
    }

    let (x1, x2) = trace.quadratures_counts();
    let mut events = Vec::new();
    for (start, end, score, smoothed_sigma) in merged {
        if start < nb {
            continue;
        }
        let lo = start - nb;
        let phase = match estimate_lo_phase(&x1[lo..start], &x2[lo..start], fs) {
            Ok(est) => est.phase,
            Err(e) => {
                log::warn!("transit at sample {start} skipped: {e}");
                continue;
            }
        };
        let (xa, xp) = rotate_quadratures(&x1[lo..end], &x2[lo..end], phase);
        let base = &xa[..nb];
        let mean = base.iter().sum::<f64>() / nb as f64;
        let var = base.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nb - 1) as f64;
        events.push(TransitEvent {
            id: events.len(),
            start,
            end,
            t_start: trace.time(start),
            sample_rate: fs,
            lo_phase: phase,
            baseline_mean: mean,
            baseline_sigma: var.sqrt(),
            smoothed_sigma,
            score,
            counts_per_sqrt_photon: trace.header.counts_per_sqrt_photon,
            lead: nb,
            xa,
            xp,
        });
    }
    Ok(events)
}
