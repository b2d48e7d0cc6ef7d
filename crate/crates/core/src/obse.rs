//! Semiclassical intracavity field from the optical bistability state equation
//!
//! ```text
//! y = x (1 + 2C/(1 + δ² + |x|²) + i(φ − 2Cδ)/(1 + δ² + |x|²))
//! ```
//!
//! Taking |·|² of both sides gives a cubic with real coefficients in the scaled
//! intensity X = |x|², solved here in closed form and polished by Newton steps.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{cooperativity, drive_amplitude, saturation_photon_number, PhysicalParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObseParams {
    /// Cooperativity.
    pub c: f64,
    /// Scaled atom-probe detuning Δ/γ⊥.
    pub delta: f64,
    /// Scaled cavity-probe detuning Θ/κ_tot.
    pub phi: f64,
    /// Scaled drive.
    pub y: Complex64,
    /// Saturation photon number.
    pub m0: f64,
}

/// Which dispersive term to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispersiveForm {
    /// i(φ − 2Cδ)/(1 + δ² + X), as printed alongside the data.
    #[default]
    Printed,
    /// i(φ − 2Cδ/(1 + δ² + X)), the textbook arrangement.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchPolicy {
    /// The root reached by ramping the drive up from zero.
    #[default]
    AdiabaticFromBelow,
    Lowest,
    Highest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityRoot {
    pub value: f64,
    pub multiplicity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObseSolution {
    /// Scaled field x.
    pub x: Complex64,
    /// X = |x|² of the selected root.
    pub intensity: f64,
    /// Index of the selected root in ascending order.
    pub branch: usize,
    /// Number of distinct nonnegative roots.
    pub n_roots: usize,
    /// More than one root was available.
    pub hysteresis: bool,
}

impl ObseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m0 > 0.0) {
            return Err(Error::domain("OBSE needs m0 > 0"));
        }
        if !(self.c >= 0.0) {
            return Err(Error::domain("OBSE needs C >= 0"));
        }
        if !self.y.norm_sqr().is_finite() {
            return Err(Error::domain("OBSE drive is not finite"));
        }
        Ok(())
    }

    fn sat(&self) -> f64 {
        1.0 + self.delta * self.delta
    }

    /// Complex susceptibility factor multiplying x at intensity X.
    pub fn response(&self, form: DispersiveForm, intensity: f64) -> Complex64 {
        let u = self.sat() + intensity;
        let absorptive = 1.0 + 2.0 * self.c / u;
        let dispersive = match form {
            DispersiveForm::Printed => (self.phi - 2.0 * self.c * self.delta) / u,
            DispersiveForm::Conventional => self.phi - 2.0 * self.c * self.delta / u,
        };
        Complex64::new(absorptive, dispersive)
    }

    fn cubic(&self, form: DispersiveForm) -> [f64; 4] {
        // Y (A + X)² = X [(A + 2C + X)² + D(X)²] with D linear in X.
        let a = self.sat();
        let y2 = self.y.norm_sqr();
        let c2 = 2.0 * self.c;
        let (d0, d1) = match form {
            // (φ − 2Cδ)
            DispersiveForm::Printed => (self.phi - c2 * self.delta, 0.0),
            // φ(A + X) − 2Cδ
            DispersiveForm::Conventional => (self.phi * a - c2 * self.delta, self.phi),
        };
        let s = a + c2;
        // X[(s + X)² + (d0 + d1 X)²] − Y(A + X)², highest power first
        [
            1.0 + d1 * d1,
            2.0 * s + 2.0 * d0 * d1 - y2,
            s * s + d0 * d0 - 2.0 * a * y2,
            -y2 * a * a,
        ]
    }

    /// Relative residual of |y|² = X |response(X)|².
    pub fn residual(&self, form: DispersiveForm, intensity: f64) -> f64 {
        let y2 = self.y.norm_sqr();
        let lhs = intensity * self.response(form, intensity).norm_sqr();
        (lhs - y2).abs() / y2.max(f64::MIN_POSITIVE)
    }
}

/// Real roots of `c[0] x³ + c[1] x² + c[2] x + c[3]`, ascending.
fn real_cubic_roots(c: [f64; 4]) -> Vec<f64> {
    let [a3, b, c1, d] = c;
    let (b, c1, d) = (b / a3, c1 / a3, d / a3);
    // x = t − b/3 → t³ + p t + q = 0
    let p = c1 - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c1 / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let scale = (q / 2.0).powi(2).max((p / 3.0).abs().powi(3)).max(f64::MIN_POSITIVE);
    let mut roots = if disc > 1e-12 * scale {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v + shift]
    } else if p.abs() < f64::EPSILON * (b * b).max(c1.abs()).max(1.0) {
        vec![(-q).cbrt() + shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) / r).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| 2.0 * r * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    };
    let poly = |x: f64| ((x + b) * x + c1) * x + d;
    let dpoly = |x: f64| (3.0 * x + 2.0 * b) * x + c1;
    for r in roots.iter_mut() {
        for _ in 0..6 {
            let dp = dpoly(*r);
            if dp == 0.0 {
                break;
            }
            let step = poly(*r) / dp;
            if !step.is_finite() {
                break;
            }
            *r -= step;
            if step.abs() <= 1e-16 * r.abs() {
                break;
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

/// All nonnegative intensity roots, ascending, each back-substituted to 1e-9.
pub fn obse_intensity_roots(p: &ObseParams, form: DispersiveForm) -> Result<Vec<IntensityRoot>> {
    p.validate()?;
    if p.y.norm_sqr() == 0.0 {
        return Ok(vec![IntensityRoot { value: 0.0, multiplicity: 1 }]);
    }
    let raw = real_cubic_roots(p.cubic(form));
    let mut out: Vec<IntensityRoot> = Vec::new();
    for x in raw {
        if x < 0.0 {
            continue;
        }
        if let Some(last) = out.last_mut() {
            if (x - last.value).abs() <= 1e-7 * x.max(1e-300) {
                last.multiplicity += 1;
                continue;
            }
        }
        out.push(IntensityRoot { value: x, multiplicity: 1 });
    }
    for r in &out {
        let res = p.residual(form, r.value);
        // double roots only converge to √ε under Newton
        let tol = if r.multiplicity > 1 { 1e-7 } else { 1e-9 };
        if res > tol {
            return Err(Error::domain(format!(
                "OBSE root X = {} fails back-substitution (residual {res:e})",
                r.value
            )));
        }
    }
    if out.is_empty() {
        return Err(Error::domain("OBSE cubic has no nonnegative root"));
    }
    Ok(out)
}

fn solution_at(p: &ObseParams, form: DispersiveForm, roots: &[IntensityRoot], branch: usize) -> ObseSolution {
    let x_int = roots[branch].value;
    ObseSolution {
        x: p.y / p.response(form, x_int),
        intensity: x_int,
        branch,
        n_roots: roots.len(),
        hysteresis: roots.len() > 1,
    }
}

pub fn obse_field(p: &ObseParams, form: DispersiveForm, policy: BranchPolicy) -> Result<ObseSolution> {
    let roots = obse_intensity_roots(p, form)?;
    let branch = match policy {
        BranchPolicy::AdiabaticFromBelow | BranchPolicy::Lowest => 0,
        BranchPolicy::Highest => roots.len() - 1,
    };
    Ok(solution_at(p, form, &roots, branch))
}

/// Scaled OBSE variables for coupling `g`. Errors at g = 0, where m0 diverges.
pub fn obse_params(p: &PhysicalParams, g: f64) -> Result<ObseParams> {
    let m0 = saturation_photon_number(p, g)?;
    let drive = drive_amplitude(p)?;
    let y = (2.0 * p.kappa_a).sqrt() * drive / (p.kappa_total() * m0.sqrt());
    Ok(ObseParams {
        c: cooperativity(p, g)?,
        delta: p.delta_ap / p.gamma_perp,
        phi: p.theta_cp / p.kappa_total(),
        y: Complex64::new(y, 0.0),
        m0,
    })
}

/// Semiclassical intracavity field x√m0 in √photon units.
///
/// g = 0 is the C = 0 limit with X → 0.
pub fn semiclassical_field(
    p: &PhysicalParams,
    g: f64,
    form: DispersiveForm,
    policy: BranchPolicy,
) -> Result<(Complex64, ObseSolution)> {
    if g == 0.0 {
        let drive = drive_amplitude(p)?;
        let y_phys = (2.0 * p.kappa_a).sqrt() * drive / p.kappa_total();
        let sp = ObseParams {
            c: 0.0,
            delta: p.delta_ap / p.gamma_perp,
            phi: p.theta_cp / p.kappa_total(),
            y: Complex64::new(y_phys, 0.0),
            m0: 1.0,
        };
        let x = sp.y / sp.response(form, 0.0);
        let sol = ObseSolution { x, intensity: 0.0, branch: 0, n_roots: 1, hysteresis: false };
        return Ok((x, sol));
    }
    let sp = obse_params(p, g)?;
    let sol = obse_field(&sp, form, policy)?;
    Ok((sol.x * sp.m0.sqrt(), sol))
}

/// Semiclassical field along a grid of increasing |g|, following the root that
/// connects continuously to g = 0.
pub fn semiclassical_curve(p: &PhysicalParams, gs: &[f64], form: DispersiveForm) -> Result<Vec<(Complex64, ObseSolution)>> {
    let mut out = Vec::with_capacity(gs.len());
    // photon number of the tracked branch; X depends on g, photons do not jump
    let mut photons: Option<f64> = None;
    for &g in gs {
        if g == 0.0 {
            let r = semiclassical_field(p, 0.0, form, BranchPolicy::Lowest)?;
            photons = Some(r.0.norm_sqr());
            out.push(r);
            continue;
        }
        let sp = obse_params(p, g)?;
        let roots = obse_intensity_roots(&sp, form)?;
        let branch = match photons {
            None => 0,
            Some(n_prev) => {
                let x_prev = n_prev / sp.m0;
                roots
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        (a.1.value - x_prev).abs().partial_cmp(&(b.1.value - x_prev).abs()).unwrap()
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            }
        };
        let sol = solution_at(&sp, form, &roots, branch);
        let field = sol.x * sp.m0.sqrt();
        photons = Some(field.norm_sqr());
        out.push((field, sol));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::mhz;

    fn params(c: f64, delta: f64, phi: f64, y2: f64) -> ObseParams {
        ObseParams { c, delta, phi, y: Complex64::new(y2.sqrt(), 0.0), m0: 0.03 }
    }

    #[test]
    fn empty_cavity_root_is_drive_intensity() {
        for y2 in [1e-6, 0.5, 3.0, 250.0] {
            let r = obse_intensity_roots(&params(0.0, 1.3, 0.0, y2), DispersiveForm::Printed).unwrap();
            assert_eq!(r.len(), 1);
            assert!((r[0].value - y2).abs() <= 1e-12 * y2);
            let sol = obse_field(&params(0.0, 1.3, 0.0, y2), DispersiveForm::Printed, BranchPolicy::default()).unwrap();
            assert!((sol.x - Complex64::new(y2.sqrt(), 0.0)).norm() < 1e-12 * y2.sqrt());
        }
    }

    #[test]
    fn weak_drive_absorptive_limit() {
        let c = 7.27;
        let y2 = 1e-8;
        let r = obse_intensity_roots(&params(c, 0.0, 0.0, y2), DispersiveForm::Printed).unwrap();
        let expected = y2 / (1.0 + 2.0 * c).powi(2);
        assert_eq!(r.len(), 1);
        assert!((r[0].value - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn pure_absorption_gives_real_reduced_field() {
        let sol = obse_field(&params(3.0, 0.0, 0.0, 40.0), DispersiveForm::Printed, BranchPolicy::default()).unwrap();
        assert!(sol.x.im.abs() < 1e-14);
        assert!(sol.x.re > 0.0 && sol.x.re < 40f64.sqrt());
    }

    #[test]
    fn zero_drive_and_invalid_params() {
        let r = obse_intensity_roots(&params(2.0, 1.0, 0.0, 0.0), DispersiveForm::Printed).unwrap();
        assert_eq!(r, vec![IntensityRoot { value: 0.0, multiplicity: 1 }]);
        let bad = ObseParams { m0: 0.0, ..params(1.0, 0.0, 0.0, 1.0) };
        assert!(obse_intensity_roots(&bad, DispersiveForm::Printed).is_err());
    }

    #[test]
    fn single_root_makes_policies_agree() {
        let p = params(1.0, 0.5, 0.0, 2.0);
        let roots = obse_intensity_roots(&p, DispersiveForm::Printed).unwrap();
        assert_eq!(roots.len(), 1);
        let a = obse_field(&p, DispersiveForm::Printed, BranchPolicy::AdiabaticFromBelow).unwrap();
        let b = obse_field(&p, DispersiveForm::Printed, BranchPolicy::Highest).unwrap();
        let c = obse_field(&p, DispersiveForm::Printed, BranchPolicy::Lowest).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.x, c.x);
        assert!(!a.hysteresis);
    }

    /// Brute-force sign-change count of Y(A+X)² − X[...] on a dense log grid.
    fn scan_root_count(p: &ObseParams, form: DispersiveForm) -> usize {
        let f = |x: f64| x * p.response(form, x).norm_sqr() - p.y.norm_sqr();
        let mut count = 0;
        let mut prev = f(0.0);
        let n = 400_000;
        let (lo, hi) = (1e-6f64.ln(), (10.0 * p.y.norm_sqr()).ln());
        for k in 0..=n {
            let x = (lo + (hi - lo) * k as f64 / n as f64).exp();
            let v = f(x);
            if v.signum() != prev.signum() {
                count += 1;
            }
            prev = v;
        }
        count
    }

    #[test]
    fn bistable_point_matches_dense_scan() {
        let (c, delta) = (20.0, 0.0);
        // Find a drive with three roots by scanning |y|².
        let mut found = None;
        let mut y2 = 1.0;
        while y2 < 1e5 {
            let p = params(c, delta, 0.0, y2);
            let roots = obse_intensity_roots(&p, DispersiveForm::Printed).unwrap();
            if roots.len() == 3 {
                found = Some((p, roots));
                break;
            }
            y2 *= 1.02;
        }
        let (p, roots) = found.expect("no bistable drive found");
        assert_eq!(scan_root_count(&p, DispersiveForm::Printed), 3);
        for r in &roots {
            assert!(p.residual(DispersiveForm::Printed, r.value) < 1e-9);
        }
        let lo = obse_field(&p, DispersiveForm::Printed, BranchPolicy::Lowest).unwrap();
        let hi = obse_field(&p, DispersiveForm::Printed, BranchPolicy::Highest).unwrap();
        assert!(hi.x.norm() > lo.x.norm());
        assert!(lo.hysteresis && lo.n_roots == 3);
        // a point far outside the bistable window has one root on both counts
        let mono = params(c, delta, 0.0, 0.5);
        assert_eq!(obse_intensity_roots(&mono, DispersiveForm::Printed).unwrap().len(), 1);
        assert_eq!(scan_root_count(&mono, DispersiveForm::Printed), 1);
    }

    #[test]
    fn moderate_cooperativity_with_detuning_is_monostable() {
        // |y|²(X) is monotone at C = 7.27, δ = 3.85; the dense scan agrees at every drive
        let mut y2 = 1e-3;
        while y2 < 1e6 {
            let p = params(7.27, 3.85, 0.0, y2);
            let roots = obse_intensity_roots(&p, DispersiveForm::Printed).unwrap();
            assert_eq!(roots.len(), 1, "y2 = {y2}");
            y2 *= 10.0;
        }
        assert_eq!(scan_root_count(&params(7.27, 3.85, 0.0, 300.0), DispersiveForm::Printed), 1);
    }

    #[test]
    fn forms_agree_without_cavity_detuning() {
        let p = params(4.0, 2.0, 0.0, 30.0);
        let a = obse_field(&p, DispersiveForm::Printed, BranchPolicy::Lowest).unwrap();
        let b = obse_field(&p, DispersiveForm::Conventional, BranchPolicy::Lowest).unwrap();
        assert!((a.x - b.x).norm() < 1e-12);
        let q = ObseParams { phi: 0.7, ..p };
        for form in [DispersiveForm::Printed, DispersiveForm::Conventional] {
            for r in obse_intensity_roots(&q, form).unwrap() {
                assert!(q.residual(form, r.value) < 1e-9);
            }
        }
    }

    #[test]
    fn physical_field_reduces_to_empty_cavity() {
        let p = PhysicalParams::reference().with_m_empty(2.0).with_delta_mhz(10.0);
        let (x0, _) = semiclassical_field(&p, 0.0, DispersiveForm::Printed, BranchPolicy::default()).unwrap();
        assert!((x0 - Complex64::new(2f64.sqrt(), 0.0)).norm() < 1e-14);
        let gs: Vec<f64> = (0..=20).map(|k| mhz(11.0) * k as f64 / 20.0).collect();
        let curve = semiclassical_curve(&p, &gs, DispersiveForm::Printed).unwrap();
        assert_eq!(curve[0].0, x0);
        assert!(curve.iter().all(|(f, _)| f.norm() <= 2f64.sqrt() + 1e-12));
    }
}
