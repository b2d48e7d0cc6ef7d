//! Steady states, time propagation and quantum-regression correlation integrals.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::band::BandLu;
use super::liouvillian::{build_liouvillian, unvectorize, vectorize, Liouvillian};
use super::ops::{annihilation, force_operator, lowering, HilbertConfig, OperatorMatrix};
use crate::error::{Error, Result};
use crate::params::PhysicalParams;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Shift added to L before factoring, relative to ‖L‖. Small against every
/// decay rate of the system, so inverse iteration lands on the kernel.
const SHIFT_REL: f64 = 1e-10;
const RESIDUAL_REL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    /// Validates Hermiticity (1e-10), unit trace (1e-10) and positivity (−1e-8).
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidState("density operator must be square".into()));
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = matrix.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-8 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(DensityOperator { matrix })
    }

    pub fn pure(ket: &nalgebra::DVector<Complex64>) -> Result<Self> {
        Self::new(ket * ket.adjoint())
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn expect(&self, op: &DMatrix<Complex64>) -> Complex64 {
        (op * &self.matrix).trace()
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityOperator) -> f64 {
        let diff = &self.matrix - &other.matrix;
        0.5 * diff.symmetric_eigenvalues().iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Steady-state observables used throughout the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    /// ⟨â⟩ in √photon units.
    pub field: Complex64,
    /// ⟨σ̂†σ̂⟩.
    pub excitation: f64,
    /// ⟨−i(â†σ̂ − âσ̂†)⟩.
    pub force_scalar: f64,
    /// ⟨â†â⟩.
    pub photon: f64,
}

pub fn expectations(rho: &DensityOperator) -> Result<Expectations> {
    let d = rho.dim();
    if d % 2 != 0 {
        return Err(Error::InvalidState("dimension is not 2·n_fock".into()));
    }
    let hc = HilbertConfig::new(d / 2)?;
    let a = annihilation(hc);
    let s = lowering(hc);
    let f = force_operator(hc).matrix;
    let force = rho.expect(&f);
    if force.im.abs() > 1e-10 * force.re.abs().max(1.0) {
        return Err(Error::InvalidState(format!("force expectation not real: {force}")));
    }
    Ok(Expectations {
        field: rho.expect(&a),
        excitation: rho.expect(&(s.adjoint() * &s)).re,
        force_scalar: force.re,
        photon: rho.expect(&(a.adjoint() * &a)).re,
    })
}

/// A factored, shifted generator reused by the kernel and correlation solves.
pub struct SteadySolver<'a> {
    l: &'a Liouvillian,
    lu: BandLu,
}

impl<'a> SteadySolver<'a> {
    pub fn new(l: &'a Liouvillian) -> Result<Self> {
        let shift = SHIFT_REL * l.norm();
        let lu = l.to_band(shift).factor()?;
        Ok(SteadySolver { l, lu })
    }

    fn normalized(&self, mut v: Vec<Complex64>) -> Result<Vec<Complex64>> {
        let tr = self.l.trace(&v);
        if !(tr.norm() > 0.0) || !tr.norm().is_finite() {
            return Err(Error::SteadyState("kernel vector has zero trace".into()));
        }
        let inv = tr.inv();
        v.iter_mut().for_each(|x| *x *= inv);
        Ok(v)
    }

    fn inverse_iteration(&self, start: Vec<Complex64>, rounds: usize) -> Result<Vec<Complex64>> {
        let mut v = start;
        for _ in 0..rounds {
            self.lu.solve_in_place(&mut v);
            v = self.normalized(v)?;
        }
        Ok(v)
    }

    fn residual(&self, v: &[Complex64]) -> f64 {
        let r = self.l.apply_vec(v);
        let rn: f64 = r.iter().map(|x| x.norm()).sum();
        let vn: f64 = v.iter().map(|x| x.norm()).sum();
        rn / (self.l.norm() * vn)
    }

    pub fn steady_state(&self) -> Result<DensityOperator> {
        let hc = self.l.hilbert();
        let d = hc.dim();
        let mixed = vectorize(&DMatrix::identity(d, d));
        let mut v = self.inverse_iteration(mixed, 3)?;
        let mut rounds = 3;
        while self.residual(&v) > RESIDUAL_REL && rounds < 12 {
            v = self.inverse_iteration(v, 1)?;
            rounds += 1;
        }
        let res = self.residual(&v);
        if res > RESIDUAL_REL {
            return Err(Error::SteadyState(format!("residual {res:e} after {rounds} rounds")));
        }

        // A second start (vacuum ⊗ ground) must reach the same kernel vector.
        let mut vac = vec![ZERO; d * d];
        vac[0] = Complex64::new(1.0, 0.0);
        let w = self.inverse_iteration(vac, rounds)?;
        let diff: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).norm()).sum();
        let scale: f64 = v.iter().map(|x| x.norm()).sum();
        if diff > 1e-6 * scale {
            return Err(Error::Degenerate(format!(
                "kernel depends on the starting vector (difference {:e})",
                diff / scale
            )));
        }

        let m = unvectorize(&v, d);
        let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let tr = herm.trace();
        DensityOperator::new(herm / tr)
    }

    /// Re Tr[F (−L)⁻¹ X] with X = Fρ − ⟨F⟩ρ, solved on the trace-zero subspace.
    /// Returns `None` when refinement does not reach a clean residual.
    pub fn correlation_integral(&self, rho: &DensityOperator, f: &DMatrix<Complex64>) -> Option<f64> {
        let d = rho.dim();
        let rho_v = vectorize(rho.matrix());
        let mean = rho.expect(f);
        let x = vectorize(&(f * rho.matrix() - rho.matrix() * mean));
        let xn: f64 = x.iter().map(|v| v.norm()).sum();
        if xn == 0.0 {
            return Some(0.0);
        }
        let target: Vec<Complex64> = x.iter().map(|v| -v).collect();
        let project = |v: &mut Vec<Complex64>| {
            let tr = self.l.trace(v);
            for (vi, ri) in v.iter_mut().zip(&rho_v) {
                *vi -= tr * ri;
            }
        };
        let mut z = self.lu.solve(&target);
        project(&mut z);
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let lz = self.l.apply_vec(&z);
            let r: Vec<Complex64> = target.iter().zip(&lz).map(|(t, v)| t - v).collect();
            rel = r.iter().map(|v| v.norm()).sum::<f64>() / xn;
            if rel < 1e-12 {
                break;
            }
            let mut dz = self.lu.solve(&r);
            project(&mut dz);
            z.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
        }
        if !(rel < 1e-8) {
            return None;
        }
        let zm = unvectorize(&z, d);
        Some((f * zm).trace().re)
    }
}

/// Kernel of `l` normalized to unit trace.
pub fn steady_state(l: &Liouvillian) -> Result<DensityOperator> {
    SteadySolver::new(l)?.steady_state()
}

/// Convenience: build L for coupling `g` and solve for its steady state.
pub fn solve_steady(p: &PhysicalParams, hc: HilbertConfig, g: f64) -> Result<(DensityOperator, Expectations)> {
    let l = build_liouvillian(p, hc, g)?;
    let rho = steady_state(&l)?;
    let e = expectations(&rho)?;
    Ok((rho, e))
}

/// Largest explicit-Euler step accepted by [`propagate`].
pub fn stable_step(l: &Liouvillian) -> f64 {
    0.1 / l.norm()
}

/// Explicit Euler X ← X + dt·L(X) for `round(t / dt)` steps. `observe` sees the
/// state before every step.
pub fn propagate_with(
    l: &Liouvillian,
    x0: &[Complex64],
    t: f64,
    dt: f64,
    mut observe: impl FnMut(usize, &[Complex64]),
) -> Result<Vec<Complex64>> {
    if !(dt > 0.0) || dt > stable_step(l) * (1.0 + 1e-12) {
        return Err(Error::Unstable(format!(
            "dt = {dt:e} exceeds the stability bound {:e}",
            stable_step(l)
        )));
    }
    let steps = (t / dt).round() as usize;
    let norm0: f64 = x0.iter().map(|v| v.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut x = x0.to_vec();
    let mut lx = vec![ZERO; x.len()];
    let check_every = 1024;
    for step in 0..steps {
        observe(step, &x);
        l.apply(&x, &mut lx);
        for (xi, li) in x.iter_mut().zip(&lx) {
            *xi += li * dt;
        }
        if step % check_every == check_every - 1 || step + 1 == steps {
            let n: f64 = x.iter().map(|v| v.norm()).sum();
            if !n.is_finite() || n > 1e3 * norm0 {
                return Err(Error::Unstable(format!(
                    "norm grew by {:e} after {} steps",
                    n / norm0,
                    step + 1
                )));
            }
        }
    }
    Ok(x)
}

pub fn propagate(l: &Liouvillian, x0: &[Complex64], t: f64, dt: f64) -> Result<Vec<Complex64>> {
    propagate_with(l, x0, t, dt, |_, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationMethod {
    /// Solve L z = −X on the trace-zero subspace.
    LinearSolve,
    /// Integrate the correlation with explicit Euler over `t_int`, with step `dt`
    /// (`None` picks the stability bound).
    TimeIntegration { t_int: f64, dt: Option<f64> },
}

impl CorrelationMethod {
    pub fn finite_window() -> Self {
        CorrelationMethod::TimeIntegration { t_int: 5e-6, dt: None }
    }
}

/// Re ∫₀^∞ (Tr[F e^{Lτ}(Fρ)] − ⟨F⟩²) dτ.
pub fn qrt_correlation_integral(
    l: &Liouvillian,
    rho: &DensityOperator,
    f: &OperatorMatrix,
    method: CorrelationMethod,
) -> Result<f64> {
    match method {
        CorrelationMethod::LinearSolve => {
            let solver = SteadySolver::new(l)?;
            match solver.correlation_integral(rho, &f.matrix) {
                Some(v) => Ok(v),
                None => {
                    log::warn!("correlation solve ill-conditioned; falling back to time integration");
                    integrate_correlation(l, rho, &f.matrix, 5e-6, None)
                }
            }
        }
        CorrelationMethod::TimeIntegration { t_int, dt } => integrate_correlation(l, rho, &f.matrix, t_int, dt),
    }
}

pub(crate) fn integrate_correlation(
    l: &Liouvillian,
    rho: &DensityOperator,
    f: &DMatrix<Complex64>,
    t_int: f64,
    dt: Option<f64>,
) -> Result<f64> {
    let d = rho.dim();
    let mean = rho.expect(f);
    let x0 = vectorize(&(f * rho.matrix() - rho.matrix() * mean));
    let dt = dt.unwrap_or_else(|| stable_step(l));
    // Tr[F X] = Σ_ij F_ji X_ij
    let ft: Vec<Complex64> = {
        let mut v = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                v.push(f[(j, i)]);
            }
        }
        v
    };
    let nz: Vec<usize> = (0..ft.len()).filter(|&k| ft[k] != ZERO).collect();
    let mut acc = 0.0;
    propagate_with(l, &x0, t_int, dt, |_, x| {
        let tr: Complex64 = nz.iter().map(|&k| ft[k] * x[k]).sum();
        acc += tr.re * dt;
    })?;
    Ok(acc)
}
