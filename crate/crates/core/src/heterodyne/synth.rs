//! Baseband photocurrent synthesis from an intracavity field record.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::filter::Biquad;
use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::rng::stream;
use crate::transit::AtomTrajectory;

/// Intracavity field ⟨a⟩ (√photons) sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecord {
    pub dt: f64,
    pub samples: Vec<Complex64>,
}

impl FieldRecord {
    pub fn constant(value: Complex64, dt: f64, n: usize) -> Self {
        FieldRecord { dt, samples: vec![value; n] }
    }

    pub fn from_trajectory(t: &AtomTrajectory) -> Self {
        FieldRecord { dt: t.record_dt, samples: (0..t.len()).map(|i| t.field_at(i)).collect() }
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len().saturating_sub(1) as f64
    }

    /// Linear interpolation, held constant outside the record.
    fn at(&self, t: f64) -> Complex64 {
        let n = self.samples.len();
        let u = t / self.dt;
        if u <= 0.0 {
            return self.samples[0];
        }
        let i = u as usize;
        if i + 1 >= n {
            return self.samples[n - 1];
        }
        let f = u - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoDrift {
    Off,
    /// Phase random walk with diffusion constant (rad²/s).
    RandomWalk { diffusion: f64 },
}

impl LoDrift {
    /// Diffusion giving `rms` radians of drift over `span` seconds.
    pub fn with_rms(rms: f64, span: f64) -> Self {
        LoDrift::RandomWalk { diffusion: rms * rms / (2.0 * span) }
    }
}

impl Default for LoDrift {
    fn default() -> Self {
        LoDrift::with_rms(0.02, 2e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeterodyneConfig {
    /// ADC rate per channel (Hz).
    pub sample_rate: f64,
    /// Internal simulation rate as a multiple of `sample_rate`.
    pub oversample: usize,
    pub bits: u32,
    /// Analog filter cutoff (Hz).
    pub analog_bandwidth: f64,
    /// Full scale as a multiple of the empty-cavity amplitude.
    pub full_scale_factor: f64,
    pub noise: bool,
    pub drift: LoDrift,
    /// LO phase at the start of the trace; `None` draws it uniformly.
    pub initial_phase: Option<f64>,
    /// Empty-cavity time prepended to the field record (s).
    pub pre_roll: f64,
    /// Time appended after the record (s).
    pub post_roll: f64,
}

impl Default for HeterodyneConfig {
    fn default() -> Self {
        HeterodyneConfig {
            sample_rate: 1e7,
            oversample: 4,
            bits: 12,
            analog_bandwidth: 3e5,
            full_scale_factor: 6.0,
            noise: true,
            drift: LoDrift::default(),
            initial_phase: None,
            pre_roll: 2.5e-3,
            post_roll: 0.5e-3,
        }
    }
}

impl HeterodyneConfig {
    /// Noise-free, drift-free and phase-locked; handy for deterministic checks.
    pub fn ideal() -> Self {
        HeterodyneConfig { noise: false, drift: LoDrift::Off, initial_phase: Some(0.0), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 2.0 * self.analog_bandwidth) || !(self.analog_bandwidth > 0.0) {
            return Err(Error::Config("sample rate must exceed twice the analog bandwidth".into()));
        }
        if self.oversample == 0 {
            return Err(Error::Config("oversample must be at least 1".into()));
        }
        if !(2..=16).contains(&self.bits) {
            return Err(Error::Config("bit depth must be between 2 and 16".into()));
        }
        if !(self.full_scale_factor > 1.0) {
            return Err(Error::Config("full_scale_factor must exceed 1".into()));
        }
        if let LoDrift::RandomWalk { diffusion } = self.drift {
            if !(diffusion >= 0.0) {
                return Err(Error::Config("drift diffusion must be nonnegative".into()));
            }
        }
        if !(self.pre_roll >= 0.0) || !(self.post_roll >= 0.0) {
            return Err(Error::Config("pre/post roll must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn full_scale_counts(&self) -> i16 {
        ((1i32 << (self.bits - 1)) - 1) as i16
    }
}

/// Two-channel sampled photocurrent in ADC counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub sample_rate: f64,
    pub bits: u32,
    pub full_scale: i16,
    pub analog_bandwidth: f64,
    /// Counts per √photon of intracavity amplitude.
    pub counts_per_sqrt_photon: f64,
    pub params_hash: String,
    pub seed: u64,
    /// Time of sample 0 relative to the start of the field record (s).
    pub t0: f64,
    pub n_samples: usize,
    pub clipped_fraction: f64,
    pub clipping_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTrace {
    pub header: TraceHeader,
    pub x1: Vec<i16>,
    pub x2: Vec<i16>,
}

impl QuadratureTrace {
    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.header.t0 + i as f64 / self.header.sample_rate
    }

    /// Checks the header against the sample arrays.
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if self.x1.len() != self.x2.len() || self.x1.len() != h.n_samples {
            return Err(Error::Format("channel lengths disagree with header".into()));
        }
        if !(h.sample_rate > 2.0 * h.analog_bandwidth) || !(h.analog_bandwidth > 0.0) {
            return Err(Error::Format("sample rate must exceed twice the analog bandwidth".into()));
        }
        if !(2..=16).contains(&h.bits) || h.full_scale <= 0 || (h.full_scale as i32) >= (1i32 << (h.bits - 1)) + 1
        {
            return Err(Error::Format("bit depth and full scale disagree".into()));
        }
        if !(h.counts_per_sqrt_photon > 0.0) || !h.counts_per_sqrt_photon.is_finite() || !h.t0.is_finite() {
            return Err(Error::Format("bad scale or time origin".into()));
        }
        let fs = h.full_scale;
        if self.x1.iter().chain(&self.x2).any(|&v| v > fs || v < -fs) {
            return Err(Error::Format("sample beyond full scale".into()));
        }
        Ok(())
    }

    /// Samples as floating-point counts.
    pub fn quadratures_counts(&self) -> (Vec<f64>, Vec<f64>) {
        (self.x1.iter().map(|&v| v as f64).collect(), self.x2.iter().map(|&v| v as f64).collect())
    }

    /// Samples as √photon amplitudes.
    pub fn quadratures(&self) -> (Vec<f64>, Vec<f64>) {
        let s = 1.0 / self.header.counts_per_sqrt_photon;
        (
            self.x1.iter().map(|&v| v as f64 * s).collect(),
            self.x2.iter().map(|&v| v as f64 * s).collect(),
        )
    }
}

/// Per-sample noise standard deviation (√photons) at rate `rate`: σ² = β² rate / (4ηκ_b).
pub fn shot_noise_sigma(p: &PhysicalParams, rate: f64) -> f64 {
    p.beta * (rate / (4.0 * p.eta * p.kappa_b)).sqrt()
}

/// Default counts per √photon: the empty-cavity amplitude sits at 1/full_scale_factor of full scale.
pub fn default_scale(p: &PhysicalParams, cfg: &HeterodyneConfig) -> Result<f64> {
    if !(p.m_empty > 0.0) {
        return Err(Error::Config("default ADC scale needs m_empty > 0".into()));
    }
    Ok(cfg.full_scale_counts() as f64 / (cfg.full_scale_factor * p.m_empty.sqrt()))
}

/// Synthesized channels before quantization, in counts, at the ADC rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogTrace {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub counts_per_sqrt_photon: f64,
    pub t0: f64,
    /// LO phase at each output sample.
    pub lo_phase: Vec<f64>,
}

pub fn synthesize_analog(field: &FieldRecord, p: &PhysicalParams, cfg: &HeterodyneConfig, seed: u64) -> Result<AnalogTrace> {
    cfg.validate()?;
    p.validate()?;
    if field.samples.is_empty() {
        return Err(Error::domain("empty field record"));
    }
    if !(field.dt > 0.0) || field.dt > 1.0 / cfg.sample_rate * (1.0 + 1e-9) {
        return Err(Error::domain("field record rate must be at least the sample rate"));
    }
    let scale = default_scale(p, cfg)?;
    let f_int = cfg.sample_rate * cfg.oversample as f64;
    let h = 1.0 / f_int;
    let total = cfg.pre_roll + field.duration() + cfg.post_roll;
    let n_out = (total * cfg.sample_rate).floor() as usize + 1;
    let n_int = n_out * cfg.oversample;

    let mut rng = stream(seed);
    let mut phase = match cfg.initial_phase {
        Some(v) => v,
        None => rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    };
    let drift_step = match cfg.drift {
        LoDrift::Off => 0.0,
        LoDrift::RandomWalk { diffusion } => (2.0 * diffusion * h).sqrt(),
    };
    let sigma = if cfg.noise { shot_noise_sigma(p, f_int) } else { 0.0 };

    let mut f1 = Biquad::butterworth_lowpass(cfg.analog_bandwidth, f_int);
    let mut f2 = f1;
    let first = field.samples[0] * Complex64::from_polar(1.0, phase);
    f1.settle(first.re);
    f2.settle(first.im);

    let mut out = AnalogTrace {
        x1: Vec::with_capacity(n_out),
        x2: Vec::with_capacity(n_out),
        counts_per_sqrt_photon: scale,
        t0: -cfg.pre_roll,
        lo_phase: Vec::with_capacity(n_out),
    };
    for k in 0..n_int {
        let t = k as f64 * h - cfg.pre_roll;
        // x1 + i x2 = e^{iφ}(q_a + i q_p)
        let z = field.at(t) * Complex64::from_polar(1.0, phase);
        let (mut a, mut b) = (z.re, z.im);
        if sigma > 0.0 {
            a += sigma * rng.sample::<f64, _>(StandardNormal);
            b += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let y1 = f1.process(a);
        let y2 = f2.process(b);
        if k % cfg.oversample == 0 {
            out.x1.push(y1 * scale);
            out.x2.push(y2 * scale);
            out.lo_phase.push(phase);
        }
        if drift_step > 0.0 {
            phase += drift_step * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(out)
}

/// Rounds to the nearest count and clips at ±full scale; returns the clipped fraction.
pub fn quantize(x: &[f64], full_scale: i16) -> (Vec<i16>, usize) {
    let fs = full_scale as f64;
    let mut clipped = 0;
    let q = x
        .iter()
        .map(|&v| {
            let r = v.round();
            if r > fs || r < -fs {
                clipped += 1;
            }
            r.clamp(-fs, fs) as i16
        })
        .collect();
    (q, clipped)
}

pub fn synthesize(field: &FieldRecord, p: &PhysicalParams, cfg: &HeterodyneConfig, seed: u64) -> Result<QuadratureTrace> {
    let analog = synthesize_analog(field, p, cfg, seed)?;
    let full = cfg.full_scale_counts();
    let (x1, c1) = quantize(&analog.x1, full);
    let (x2, c2) = quantize(&analog.x2, full);
    let n = x1.len();
    let clipped_fraction = (c1 + c2) as f64 / (2 * n).max(1) as f64;
    if clipped_fraction > 1e-3 {
        log::warn!("{:.3}% of samples clipped", 100.0 * clipped_fraction);
    }
    Ok(QuadratureTrace {
        header: TraceHeader {
            sample_rate: cfg.sample_rate,
            bits: cfg.bits,
            full_scale: full,
            analog_bandwidth: cfg.analog_bandwidth,
            counts_per_sqrt_photon: analog.counts_per_sqrt_photon,
            params_hash: p.hash(),
            seed,
            t0: analog.t0,
            n_samples: n,
            clipped_fraction,
            clipping_warning: clipped_fraction > 1e-3,
        },
        x1,
        x2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> PhysicalParams {
        PhysicalParams::reference()
    }

    fn empty(p: &PhysicalParams, duration: f64) -> FieldRecord {
        let dt = 75e-9;
        FieldRecord::constant(Complex64::new(p.m_empty.sqrt(), 0.0), dt, (duration / dt) as usize + 1)
    }

    #[test]
    fn ideal_empty_cavity_is_constant() {
        let p = preset();
        let t = synthesize(&empty(&p, 1e-4), &p, &HeterodyneConfig::ideal(), 1).unwrap();
        let expected = (t.header.counts_per_sqrt_photon * p.m_empty.sqrt()).round() as i16;
        assert!(t.x1.iter().all(|&v| v == expected));
        assert!(t.x2.iter().all(|&v| v == 0));
        assert_eq!(expected, (t.header.full_scale as f64 / 6.0).round() as i16);
        t.validate().unwrap();
    }

    #[test]
    fn noiseless_synthesis_is_linear_in_the_field() {
        let p = preset();
        let cfg = HeterodyneConfig { initial_phase: Some(0.4), ..HeterodyneConfig::ideal() };
        let n = 2000;
        let a = FieldRecord {
            dt: 75e-9,
            samples: (0..n).map(|k| Complex64::new((k as f64 * 1e-3).sin(), 0.3 * (k as f64 * 2e-3).cos())).collect(),
        };
        let b = FieldRecord { dt: 75e-9, samples: a.samples.iter().map(|z| z * 2.5 + 0.7).collect() };
        let ya = synthesize_analog(&a, &p, &cfg, 3).unwrap();
        let yb = synthesize_analog(&b, &p, &cfg, 4).unwrap();
        // the unit field gives the affine offset
        let one = FieldRecord { dt: 75e-9, samples: vec![Complex64::new(0.7, 0.0); n] };
        let y1 = synthesize_analog(&one, &p, &cfg, 5).unwrap();
        for k in 0..ya.x1.len() {
            assert!((yb.x1[k] - (2.5 * ya.x1[k] + y1.x1[k])).abs() < 1e-9 * (1.0 + yb.x1[k].abs()));
            assert!((yb.x2[k] - (2.5 * ya.x2[k] + y1.x2[k])).abs() < 1e-9 * (1.0 + yb.x2[k].abs()));
        }
        assert_eq!(synthesize_analog(&a, &p, &cfg, 3).unwrap(), ya);
    }

    #[test]
    fn drift_has_the_requested_rms() {
        let p = preset();
        let cfg = HeterodyneConfig { noise: false, initial_phase: Some(0.0), pre_roll: 0.0, post_roll: 0.0, ..Default::default() };
        let mut sum2 = 0.0;
        let reps = 200;
        for seed in 0..reps {
            let a = synthesize_analog(&empty(&p, 2e-3), &p, &cfg, seed).unwrap();
            sum2 += a.lo_phase.last().unwrap().powi(2);
        }
        let rms = (sum2 / reps as f64).sqrt();
        assert!((rms / 0.02 - 1.0).abs() < 0.15, "rms drift {rms}");
    }

    #[test]
    fn rounding_error_is_below_a_third_of_an_lsb() {
        let p = preset();
        let cfg = HeterodyneConfig { drift: LoDrift::Off, ..Default::default() };
        let a = synthesize_analog(&empty(&p, 5e-4), &p, &cfg, 8).unwrap();
        let mean = a.x2.iter().sum::<f64>() / a.x2.len() as f64;
        let sd = (a.x2.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / a.x2.len() as f64).sqrt();
        assert!(sd >= 2.0, "noise should span several LSB, got {sd}");
        let (q, clipped) = quantize(&a.x2, cfg.full_scale_counts());
        assert_eq!(clipped, 0);
        let rms = (q.iter().zip(&a.x2).map(|(&qi, &ai)| (qi as f64 - ai).powi(2)).sum::<f64>() / q.len() as f64).sqrt();
        assert!(rms < 0.3, "quantization rms {rms} LSB");
    }

    #[test]
    fn clipping_is_flagged() {
        let p = preset();
        let mut rec = empty(&p, 1e-4);
        for z in rec.samples.iter_mut().skip(100) {
            *z *= 20.0;
        }
        let t = synthesize(&rec, &p, &HeterodyneConfig::ideal(), 0).unwrap();
        assert!(t.header.clipping_warning);
        assert!(t.x1.iter().all(|&v| v.abs() <= t.header.full_scale));
    }

    #[test]
    fn bad_inputs_are_refused() {
        let p = preset();
        let cfg = HeterodyneConfig::ideal();
        let slow = FieldRecord::constant(Complex64::new(1.0, 0.0), 1e-6, 10);
        assert!(synthesize(&slow, &p, &cfg, 0).is_err());
        assert!(synthesize(&FieldRecord { dt: 1e-8, samples: vec![] }, &p, &cfg, 0).is_err());
        let narrow = HeterodyneConfig { analog_bandwidth: 6e6, ..cfg };
        assert!(narrow.validate().is_err());
    }
}
