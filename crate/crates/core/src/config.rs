//! Run configuration: one TOML document drives every command.
//!
//! Rates and detunings are written as frequency/2π in MHz; everything else is
//! SI. Every `[params]` key is required so a forgotten key is reported by
//! name instead of silently taking a default.
//!
//! ```toml
//! schema_version = 1
//! seed = 1
//!
//! [params]
//! g0 = 11.0
//! gamma_perp = 2.6
//! kappa_a = 1.6
//! kappa_b = 1.6
//! kappa_c = 0.0
//! delta_ap = 10.0
//! theta_cp = 0.0
//! m_empty = 1.5
//! waist = 45e-6
//! wavelength = 852.36e-9
//! atom_mass = 2.2069e-25
//! gravity = 9.8
//! eta = 0.32
//! beta = 1.5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::heterodyne::HeterodyneConfig;
use crate::params::{mhz, to_mhz, PhysicalParams};
use crate::phasor::{DetectOptions, PhasorOptions};
use crate::quantum::{CorrelationMethod, HilbertConfig};
use crate::tables::TableOptions;
use crate::transit::{RecoilProjection, Span, StepOrdering, TransitConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub params: ParamsConfig,
    #[serde(default)]
    pub tables: TablesConfig,
    #[serde(default)]
    pub transit: TransitSection,
    #[serde(default)]
    pub heterodyne: HeterodyneConfig,
    #[serde(default)]
    pub detect: DetectOptions,
    #[serde(default)]
    pub phasor: PhasorOptions,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

/// Physical parameters in configuration units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    /// MHz (g0/2π)
    pub g0: f64,
    pub gamma_perp: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_c: f64,
    pub delta_ap: f64,
    pub theta_cp: f64,
    pub m_empty: f64,
    pub waist: f64,
    pub wavelength: f64,
    pub atom_mass: f64,
    pub gravity: f64,
    pub eta: f64,
    pub beta: f64,
}

impl ParamsConfig {
    pub fn to_params(&self) -> PhysicalParams {
        PhysicalParams {
            g0: mhz(self.g0),
            gamma_perp: mhz(self.gamma_perp),
            kappa_a: mhz(self.kappa_a),
            kappa_b: mhz(self.kappa_b),
            kappa_c: mhz(self.kappa_c),
            delta_ap: mhz(self.delta_ap),
            theta_cp: mhz(self.theta_cp),
            m_empty: self.m_empty,
            waist: self.waist,
            wavelength: self.wavelength,
            atom_mass: self.atom_mass,
            gravity: self.gravity,
            eta: self.eta,
            beta: self.beta,
        }
    }

    /// The reference parameter set as written in a config file.
    pub fn reference() -> Self {
        let p = PhysicalParams::reference();
        ParamsConfig { g0: 11.0, gamma_perp: 2.6, kappa_a: 1.6, kappa_b: 1.6, kappa_c: 0.0, ..Self::from_params(&p) }
    }

    pub fn from_params(p: &PhysicalParams) -> Self {
        ParamsConfig {
            g0: to_mhz(p.g0),
            gamma_perp: to_mhz(p.gamma_perp),
            kappa_a: to_mhz(p.kappa_a),
            kappa_b: to_mhz(p.kappa_b),
            kappa_c: to_mhz(p.kappa_c),
            delta_ap: to_mhz(p.delta_ap),
            theta_cp: to_mhz(p.theta_cp),
            m_empty: p.m_empty,
            waist: p.waist,
            wavelength: p.wavelength,
            atom_mass: p.atom_mass,
            gravity: p.gravity,
            eta: p.eta,
            beta: p.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionMethod {
    #[default]
    LinearSolve,
    TimeIntegration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablesConfig {
    pub n_grid: usize,
    /// Fixed Fock cutoff; absent means the photon-number rule with growth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fock: Option<usize>,
    pub method: DiffusionMethod,
    /// Integration horizon for `time_integration` (s).
    pub integration_time: f64,
    pub refinement_checks: usize,
    pub check_truncation: bool,
    /// Prebuilt table file for `simulate`; built in-run when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for TablesConfig {
    fn default() -> Self {
        let t = TableOptions::default();
        TablesConfig {
            n_grid: t.n_grid,
            n_fock: None,
            method: DiffusionMethod::LinearSolve,
            integration_time: 5e-6,
            refinement_checks: t.refinement_checks,
            check_truncation: t.check_truncation,
            path: None,
        }
    }
}

impl TablesConfig {
    pub fn options(&self) -> TableOptions {
        TableOptions {
            n_grid: self.n_grid,
            n_fock: self.n_fock,
            method: match self.method {
                DiffusionMethod::LinearSolve => CorrelationMethod::LinearSolve,
                DiffusionMethod::TimeIntegration => {
                    CorrelationMethod::TimeIntegration { t_int: self.integration_time, dt: None }
                }
            },
            check_truncation: self.check_truncation,
            refinement_checks: self.refinement_checks,
        }
    }
}

/// Drop settings. Unset ranges fall back to the defaults for the mode geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitSection {
    pub drops: usize,
    pub dt: f64,
    pub duration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    pub vz0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vx0: Option<Span>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vy0: Option<Span>,
    pub record_every: usize,
    pub noise: bool,
    pub ordering: StepOrdering,
    pub recoil: RecoilProjection,
    /// Keep every n-th recorded sample in the trajectory files.
    pub trajectory_every: usize,
}

impl Default for TransitSection {
    fn default() -> Self {
        let t = TransitConfig::for_params(&PhysicalParams::reference());
        TransitSection {
            drops: 1,
            dt: t.dt,
            duration: t.duration,
            z0: None,
            vz0: t.vz0,
            x0: None,
            y0: None,
            vx0: None,
            vy0: None,
            record_every: t.record_every,
            noise: t.noise,
            ordering: t.ordering,
            recoil: t.recoil,
            trajectory_every: 10,
        }
    }
}

impl TransitSection {
    pub fn transit_config(&self, p: &PhysicalParams, seed: u64) -> TransitConfig {
        let d = TransitConfig::for_params(p);
        TransitConfig {
            dt: self.dt,
            duration: self.duration,
            z0: self.z0.unwrap_or(d.z0),
            vz0: self.vz0,
            x0: self.x0.unwrap_or(d.x0),
            y0: self.y0.unwrap_or(d.y0),
            vx0: self.vx0.unwrap_or(d.vx0),
            vy0: self.vy0.unwrap_or(d.vy0),
            seed,
            record_every: self.record_every,
            exit_depth: d.exit_depth,
            noise: self.noise,
            ordering: self.ordering,
            recoil: self.recoil,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Coupling points on each theory curve.
    pub theory_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fock: Option<usize>,
    /// Events overlaid for the model comparison, best first.
    pub top_events: usize,
    /// Display offset added to x̃_a in the time-series CSVs (counts).
    pub display_offset: f64,
    /// Detection bandwidth for the sensitivity report (Hz).
    pub bandwidth: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { theory_points: 33, n_fock: None, top_events: 3, display_offset: 0.0, bandwidth: 300e3 }
    }
}

impl AnalysisConfig {
    pub fn hilbert(&self) -> Result<Option<HilbertConfig>> {
        self.n_fock.map(HilbertConfig::new).transpose()
    }
}

/// Grid of (Δ, m) cells; detunings in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub delta_ap: Vec<f64>,
    pub m_empty: Vec<f64>,
    /// Drops per cell for the yield and SNR columns; 0 skips them.
    #[serde(default = "default_sweep_drops")]
    pub drops: usize,
}

fn default_sweep_drops() -> usize {
    20
}

impl SweepConfig {
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.delta_ap.iter().flat_map(|&d| self.m_empty.iter().map(move |&m| (d, m))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Detector gain imbalance and phase for the imbalance efficiency.
    pub imbalance_gain: f64,
    pub imbalance_phase: f64,
    /// Window T for the S²/N estimate (s).
    pub snr_window: f64,
    /// Length of the synthesized empty-cavity record (s).
    pub snr_duration: f64,
    /// (LO power, noise power) pairs for the excess-noise fit.
    pub lo_noise: Vec<[f64; 2]>,
    /// Combined SNR fed to the sensitivity chain.
    pub combined_snr: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            imbalance_gain: 0.63,
            imbalance_phase: 0.85,
            snr_window: 1e-3,
            snr_duration: 0.2,
            lo_noise: Vec::new(),
            combined_snr: 4.5,
        }
    }
}

impl RunConfig {
    /// Reference parameters with every section at its default.
    pub fn preset(seed: u64) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed,
            params: ParamsConfig::reference(),
            tables: TablesConfig::default(),
            transit: TransitSection::default(),
            heterodyne: HeterodyneConfig::default(),
            detect: DetectOptions::default(),
            phasor: PhasorOptions::default(),
            analysis: AnalysisConfig::default(),
            sweep: None,
            calibration: CalibrationConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn physical(&self) -> PhysicalParams {
        self.params.to_params()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let p = self.physical();
        p.validate()?;
        if self.transit.drops == 0 {
            return Err(Error::Config("transit.drops must be at least 1".into()));
        }
        if self.transit.trajectory_every == 0 {
            return Err(Error::Config("transit.trajectory_every must be at least 1".into()));
        }
        self.transit.transit_config(&p, self.seed).validate()?;
        self.heterodyne.validate()?;
        self.detect.validate()?;
        if !(self.phasor.cutoff > 0.0 && self.phasor.spacing > 0.0) {
            return Err(Error::Config("phasor cutoff and spacing must be positive".into()));
        }
        if self.tables.n_grid < 2 {
            return Err(Error::Config("tables.n_grid must be at least 2".into()));
        }
        if self.analysis.top_events == 0 || !(self.analysis.bandwidth > 0.0) {
            return Err(Error::Config("analysis needs top_events >= 1 and a positive bandwidth".into()));
        }
        self.analysis.hilbert()?;
        if let Some(s) = &self.sweep {
            if s.delta_ap.is_empty() || s.m_empty.is_empty() {
                return Err(Error::Config("sweep grid must be non-empty".into()));
            }
            if s.delta_ap.iter().chain(&s.m_empty).any(|v| !v.is_finite()) || s.m_empty.iter().any(|&m| m < 0.0) {
                return Err(Error::Config("sweep values must be finite, with m_empty >= 0".into()));
            }
        }
        let c = &self.calibration;
        if !(c.snr_window > 0.0 && c.snr_duration >= 2.0 * c.snr_window) {
            return Err(Error::Config("calibration needs snr_duration >= 2 snr_window > 0".into()));
        }
        Ok(())
    }

    /// Content hash of the configuration (hex, 16 chars).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}
