//! Physical parameters, unit conventions and the cavity mode function.
//!
//! Rates and detunings are stored as angular frequencies (rad/s). Human-facing
//! configuration quotes them as `frequency / 2π` in MHz; use [`mhz`] to convert.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Cesium-133 atomic mass (kg).
pub const CS133_MASS: f64 = 2.2069e-25;
/// Standard gravity (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.8;

/// Peak coupling for the σ± cycling transition, g0/2π in MHz.
pub const G0_SIGMA_MHZ: f64 = 11.0;
/// Peak coupling for the π transition, g0/2π in MHz.
pub const G0_PI_MHZ: f64 = 6.0;

/// Converts a `frequency / 2π` value in MHz to an angular rate in rad/s.
pub fn mhz(value: f64) -> f64 {
    2.0 * PI * value * 1e6
}

/// Converts an angular rate in rad/s back to `frequency / 2π` in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Peak atom-field coupling (rad/s).
    pub g0: f64,
    /// Atomic dipole decay rate (rad/s).
    pub gamma_perp: f64,
    /// Field decay through the input mirror (rad/s).
    pub kappa_a: f64,
    /// Field decay through the output mirror (rad/s).
    pub kappa_b: f64,
    /// Field decay from intracavity losses (rad/s).
    pub kappa_c: f64,
    /// Atom-probe detuning ν_a − ν_p (rad/s).
    pub delta_ap: f64,
    /// Cavity-probe detuning ν_c − ν_p (rad/s).
    pub theta_cp: f64,
    /// Empty-cavity mean photon number on cavity resonance.
    pub m_empty: f64,
    /// Gaussian mode waist (m).
    pub waist: f64,
    /// Probe wavelength (m).
    pub wavelength: f64,
    /// Atom mass (kg).
    pub atom_mass: f64,
    /// Gravitational acceleration magnitude along −z (m/s²).
    pub gravity: f64,
    /// Overall photodetection efficiency.
    pub eta: f64,
    /// Excess noise factor.
    pub beta: f64,
}

impl PhysicalParams {
    /// Parameter set of the experiment: g0/2π = 11 MHz (σ± transition).
    pub fn reference() -> Self {
        PhysicalParams {
            g0: mhz(G0_SIGMA_MHZ),
            gamma_perp: mhz(2.6),
            kappa_a: mhz(1.6),
            kappa_b: mhz(1.6),
            kappa_c: 0.0,
            delta_ap: 0.0,
            theta_cp: 0.0,
            m_empty: 1.5,
            waist: 45e-6,
            wavelength: 852.36e-9,
            atom_mass: CS133_MASS,
            gravity: STANDARD_GRAVITY,
            eta: 0.32,
            beta: 1.5,
        }
    }

    /// Same as [`reference`](Self::reference) but with the π-transition coupling (6 MHz).
    pub fn reference_pi() -> Self {
        PhysicalParams {
            g0: mhz(G0_PI_MHZ),
            ..Self::reference()
        }
    }

    pub fn with_delta_mhz(mut self, delta: f64) -> Self {
        self.delta_ap = mhz(delta);
        self
    }

    pub fn with_theta_mhz(mut self, theta: f64) -> Self {
        self.theta_cp = mhz(theta);
        self
    }

    pub fn with_m_empty(mut self, m: f64) -> Self {
        self.m_empty = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("g0", self.g0),
            ("gamma_perp", self.gamma_perp),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("kappa_c", self.kappa_c),
            ("m_empty", self.m_empty),
            ("gravity", self.gravity),
        ];
        for (name, v) in rates {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("delta_ap", self.delta_ap), ("theta_cp", self.theta_cp)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParams(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta must be >= 1, got {}", self.beta)));
        }
        for (name, v) in [
            ("waist", self.waist),
            ("wavelength", self.wavelength),
            ("atom_mass", self.atom_mass),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.kappa_total() > 0.0) {
            return Err(Error::InvalidParams("kappa_a + kappa_b + kappa_c must be > 0".into()));
        }
        Ok(())
    }

    pub fn kappa_total(&self) -> f64 {
        self.kappa_a + self.kappa_b + self.kappa_c
    }

    pub fn k_laser(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Spontaneous emission rate of the radiative two-level atom, Γ = 2γ⊥.
    pub fn spontaneous_rate(&self) -> f64 {
        2.0 * self.gamma_perp
    }

    /// Label for the active peak coupling.
    pub fn coupling_label(&self) -> &'static str {
        let g = to_mhz(self.g0);
        if (g - G0_SIGMA_MHZ).abs() < 1e-9 {
            "sigma (g0/2pi = 11 MHz)"
        } else if (g - G0_PI_MHZ).abs() < 1e-9 {
            "pi (g0/2pi = 6 MHz)"
        } else {
            "custom"
        }
    }

    /// Stable content hash of every field (hex, 16 chars).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"cqed-params-v1");
        for v in self.fields() {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    fn fields(&self) -> [f64; 14] {
        [
            self.g0,
            self.gamma_perp,
            self.kappa_a,
            self.kappa_b,
            self.kappa_c,
            self.delta_ap,
            self.theta_cp,
            self.m_empty,
            self.waist,
            self.wavelength,
            self.atom_mass,
            self.gravity,
            self.eta,
            self.beta,
        ]
    }
}

/// Saturation photon number m0 = γ⊥² / 2g².
pub fn saturation_photon_number(p: &PhysicalParams, g: f64) -> Result<f64> {
    if g == 0.0 {
        return Err(Error::domain("saturation photon number undefined at g = 0"));
    }
    Ok(p.gamma_perp * p.gamma_perp / (2.0 * g * g))
}

/// Cooperativity C = g² / (2 κ_tot γ⊥).
pub fn cooperativity(p: &PhysicalParams, g: f64) -> Result<f64> {
    let denom = 2.0 * p.kappa_total() * p.gamma_perp;
    if !(denom > 0.0) {
        return Err(Error::domain("cooperativity needs kappa_total > 0 and gamma_perp > 0"));
    }
    Ok(g * g / denom)
}

/// Real drive amplitude ℰ such that m_empty = 2κ_a ℰ² / κ_tot².
pub fn drive_amplitude(p: &PhysicalParams) -> Result<f64> {
    if !(p.kappa_a > 0.0) {
        return Err(Error::domain("drive needs kappa_a > 0"));
    }
    Ok(p.kappa_total() * (p.m_empty / (2.0 * p.kappa_a)).sqrt())
}

/// Empty-cavity photon number produced by drive `e`, the inverse of [`drive_amplitude`].
pub fn empty_photon_number(p: &PhysicalParams, e: f64) -> f64 {
    let k = p.kappa_total();
    2.0 * p.kappa_a * e * e / (k * k)
}

/// Coupling g(r) = g0 cos(k_L x) exp(−(y² + z²)/w²) and its analytic gradient.
pub fn mode_coupling(p: &PhysicalParams, r: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let k = p.k_laser();
    let w2 = p.waist * p.waist;
    let envelope = (-(r.y * r.y + r.z * r.z) / w2).exp();
    let (s, c) = (k * r.x).sin_cos();
    let g = p.g0 * c * envelope;
    let grad = Vector3::new(
        -p.g0 * k * s * envelope,
        -2.0 * r.y / w2 * g,
        -2.0 * r.z / w2 * g,
    );
    (g, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn saturation_photon_number_values() {
        let p = PhysicalParams::reference();
        let m0_pi = saturation_photon_number(&p, mhz(6.0)).unwrap();
        // 2.6² / (2 · 36) = 0.093888...
        assert_relative_eq!(m0_pi, 6.76 / 72.0, max_relative = 1e-12);
        assert!((m0_pi - 0.0939).abs() < 5e-5);
        let m0 = saturation_photon_number(&p, mhz(11.0)).unwrap();
        assert!((m0 - 0.0279).abs() < 5e-5);

        let no_decay = PhysicalParams { gamma_perp: 0.0, ..p.clone() };
        assert_eq!(saturation_photon_number(&no_decay, mhz(6.0)).unwrap(), 0.0);
        assert!(matches!(saturation_photon_number(&p, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cooperativity_values() {
        let p = PhysicalParams {
            kappa_a: mhz(1.6),
            kappa_b: mhz(1.6),
            ..PhysicalParams::reference()
        };
        // 121 / (2 · 3.2 · 2.6) = 7.2716
        let c = cooperativity(&p, mhz(11.0)).unwrap();
        assert!((c - 7.27).abs() < 0.005, "{c}");
        assert_eq!(cooperativity(&p, 0.0).unwrap(), 0.0);
        let g = mhz(3.7);
        assert_relative_eq!(
            cooperativity(&p, 2.0 * g).unwrap(),
            4.0 * cooperativity(&p, g).unwrap(),
            max_relative = 1e-14
        );
        let bad = PhysicalParams { gamma_perp: 0.0, ..p };
        assert!(cooperativity(&bad, g).is_err());
    }

    #[test]
    fn drive_amplitude_inversion() {
        let mut p = PhysicalParams::reference().with_m_empty(0.0);
        assert_eq!(drive_amplitude(&p).unwrap(), 0.0);

        p.m_empty = 1.0;
        let e = drive_amplitude(&p).unwrap();
        assert_relative_eq!(e, p.kappa_total() / (2.0 * p.kappa_a).sqrt(), max_relative = 1e-14);

        for m in [1e-6, 0.3, 2.0, 11.0] {
            p.m_empty = m;
            let e = drive_amplitude(&p).unwrap();
            assert_relative_eq!(empty_photon_number(&p, e), m, max_relative = 1e-12);
        }
        let closed = PhysicalParams { kappa_a: 0.0, ..p };
        assert!(drive_amplitude(&closed).is_err());
    }

    #[test]
    fn mode_function_landmarks() {
        let p = PhysicalParams::reference();
        let (g, grad) = mode_coupling(&p, &Vector3::zeros());
        assert_eq!(g, p.g0);
        assert_eq!(grad.norm(), 0.0);

        let (g, grad) = mode_coupling(&p, &Vector3::new(p.wavelength / 4.0, 0.0, 0.0));
        assert!(g.abs() < 1e-9 * p.g0);
        assert_relative_eq!(grad.x.abs(), p.g0 * p.k_laser(), max_relative = 1e-12);

        let (g, _) = mode_coupling(&p, &Vector3::new(0.0, p.waist, 0.0));
        assert_relative_eq!(g, p.g0 / std::f64::consts::E, max_relative = 1e-14);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let p = PhysicalParams::reference();
        assert!(p.validate().is_ok());
        assert!(PhysicalParams { eta: 0.0, ..p.clone() }.validate().is_err());
        assert!(PhysicalParams { beta: 0.9, ..p.clone() }.validate().is_err());
        assert!(PhysicalParams { waist: 0.0, ..p.clone() }.validate().is_err());
        assert!(PhysicalParams { kappa_a: 0.0, kappa_b: 0.0, ..p.clone() }.validate().is_err());
        assert!(PhysicalParams { gamma_perp: -1.0, ..p }.validate().is_err());
    }

    #[test]
    fn hash_tracks_every_field() {
        let p = PhysicalParams::reference();
        assert_eq!(p.hash(), p.clone().hash());
        assert_ne!(p.hash(), p.clone().with_delta_mhz(10.0).hash());
        assert_ne!(p.hash(), PhysicalParams { beta: 1.6, ..p.clone() }.hash());
    }

    proptest! {
        #[test]
        fn mode_function_periodicity(x in -1e-6f64..1e-6, y in -90e-6f64..90e-6, z in -90e-6f64..90e-6) {
            let p = PhysicalParams::reference();
            let (g, _) = mode_coupling(&p, &Vector3::new(x, y, z));
            let (g_full, _) = mode_coupling(&p, &Vector3::new(x + p.wavelength, y, z));
            let (g_half, _) = mode_coupling(&p, &Vector3::new(x + p.wavelength / 2.0, y, z));
            prop_assert!((g - g_full).abs() <= 1e-8 * p.g0);
            prop_assert!((g + g_half).abs() <= 1e-8 * p.g0);
        }

        #[test]
        fn gradient_matches_central_differences(
            x in -852e-9f64..852e-9, y in -90e-6f64..90e-6, z in -90e-6f64..90e-6
        ) {
            let p = PhysicalParams::reference();
            let r = Vector3::new(x, y, z);
            let (_, grad) = mode_coupling(&p, &r);
            let h = 1e-10;
            for axis in 0..3 {
                let mut rp = r;
                let mut rm = r;
                rp[axis] += h;
                rm[axis] -= h;
                let fd = (mode_coupling(&p, &rp).0 - mode_coupling(&p, &rm).0) / (2.0 * h);
                // Scale for the comparison: the largest gradient component the mode can have.
                let scale = if axis == 0 { p.g0 * p.k_laser() } else { p.g0 / p.waist };
                prop_assert!((fd - grad[axis]).abs() <= 1e-5 * scale.max(grad[axis].abs()),
                    "axis {} fd {} analytic {}", axis, fd, grad[axis]);
            }
        }
    }
}
