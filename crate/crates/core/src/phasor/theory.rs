//! Quantum and semiclassical phasor curves, and which one the dots follow.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::points::PhasorSet;
use crate::error::{Error, Result};
use crate::obse::{semiclassical_curve, DispersiveForm};
use crate::params::{drive_amplitude, PhysicalParams};
use crate::quantum::{check_truncation, solve_steady, HilbertConfig};

pub const MIN_CURVE_POINTS: usize = 17;

/// Field ⟨a⟩ along g ∈ [0, g0] in √photons.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurves {
    pub g: Vec<f64>,
    pub quantum: Vec<Complex64>,
    pub semiclassical: Vec<Complex64>,
    /// Analytic empty-cavity field; both curves start here.
    pub empty: Complex64,
}

/// √(2κ_a)ℰ/(κ_tot + iΘ).
pub fn empty_cavity_field(p: &PhysicalParams) -> Result<Complex64> {
    let e = drive_amplitude(p)?;
    Ok(Complex64::new((2.0 * p.kappa_a).sqrt() * e, 0.0) / Complex64::new(p.kappa_total(), p.theta_cp))
}

pub fn theory_curves(p: &PhysicalParams, n_g: usize, hc: Option<HilbertConfig>) -> Result<TheoryCurves> {
    if n_g < MIN_CURVE_POINTS {
        return Err(Error::domain(format!("theory curves need at least {MIN_CURVE_POINTS} points")));
    }
    p.validate()?;
    let hc = hc.unwrap_or_else(|| HilbertConfig::for_drive(p.m_empty));
    check_truncation(p, hc, p.g0)?;
    let g: Vec<f64> = (0..n_g).map(|i| p.g0 * i as f64 / (n_g - 1) as f64).collect();
    let empty = empty_cavity_field(p)?;
    let mut quantum = g[1..]
        .par_iter()
        .map(|&gi| solve_steady(p, hc, gi).map(|(_, e)| e.field))
        .collect::<Result<Vec<_>>>()?;
    quantum.insert(0, empty);
    let mut semiclassical: Vec<Complex64> =
        semiclassical_curve(p, &g, DispersiveForm::default())?.into_iter().map(|(x, _)| x).collect();
    semiclassical[0] = empty;
    Ok(TheoryCurves { g, quantum, semiclassical, empty })
}

/// Curves in trace units: the empty-cavity point sits at (baseline radius, 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledCurves {
    pub g: Vec<f64>,
    pub quantum: Vec<(f64, f64)>,
    pub semiclassical: Vec<(f64, f64)>,
}

impl TheoryCurves {
    pub fn scaled(&self, baseline_radius: f64) -> ScaledCurves {
        let f = baseline_radius / self.empty;
        let conv = |v: &[Complex64]| v.iter().map(|z| z * f).map(|z| (z.re, z.im)).collect();
        ScaledCurves { g: self.g.clone(), quantum: conv(&self.quantum), semiclassical: conv(&self.semiclassical) }
    }

    /// Separation of the g = g0 endpoints relative to the empty-cavity radius.
    pub fn endpoint_separation(&self) -> f64 {
        let (q, s) = (self.quantum.last().unwrap(), self.semiclassical.last().unwrap());
        (q - s).norm() / self.empty.norm()
    }

    /// Largest pointwise separation relative to the empty-cavity radius.
    pub fn max_separation(&self) -> f64 {
        self.quantum.iter().zip(&self.semiclassical).map(|(q, s)| (q - s).norm()).fold(0.0, f64::max)
            / self.empty.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Quantum,
    Semiclassical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrimination {
    pub rms_quantum: f64,
    pub rms_semiclassical: f64,
    pub preferred: Model,
    /// |rms difference| in units of the per-dot noise σ.
    pub margin: f64,
    pub n_dots: usize,
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// Shortest distance from `p` to the polyline through `curve`.
pub fn polyline_distance(p: (f64, f64), curve: &[(f64, f64)]) -> f64 {
    if curve.len() == 1 {
        return (p.0 - curve[0].0).hypot(p.1 - curve[0].1);
    }
    curve.windows(2).map(|w| segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

fn degenerate(curve: &[(f64, f64)]) -> bool {
    curve.is_empty() || curve.iter().all(|c| c == &curve[0])
}

pub const MIN_DOTS: usize = 10;

pub fn discriminate(set: &PhasorSet, curves: &ScaledCurves) -> Result<Discrimination> {
    if set.dots.len() < MIN_DOTS {
        return Err(Error::Rejected(format!("{} dots, need {MIN_DOTS}", set.dots.len())));
    }
    if degenerate(&curves.quantum) || degenerate(&curves.semiclassical) {
        return Err(Error::domain("degenerate theory curve"));
    }
    let rms = |curve: &[(f64, f64)]| {
        let s: f64 = set.dots.iter().map(|d| polyline_distance(d.cartesian(), curve).powi(2)).sum();
        (s / set.dots.len() as f64).sqrt()
    };
    let (q, s) = (rms(&curves.quantum), rms(&curves.semiclassical));
    Ok(Discrimination {
        rms_quantum: q,
        rms_semiclassical: s,
        preferred: if q <= s { Model::Quantum } else { Model::Semiclassical },
        margin: (s - q).abs() / set.noise_sigma.max(f64::MIN_POSITIVE),
        n_dots: set.dots.len(),
    })
}
