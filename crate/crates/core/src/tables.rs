//! Steady-state observables tabulated on a uniform grid of coupling values, and
//! the position-dependent force and diffusion they imply.
//!
//! Everything the integrator needs depends on position only through g(r), so the
//! tables are one-dimensional in g. Values for g < 0 follow from parity: ⟨a⟩,
//! ⟨σ†σ⟩ and the correlation scalar are even, the force scalar is odd.

use std::io::{BufRead, Write};

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{mode_coupling, PhysicalParams, HBAR};
use crate::quantum::{
    build_liouvillian, check_truncation, expectations, force_operator, qrt_correlation_integral,
    CorrelationMethod, HilbertConfig, SteadySolver,
};

pub const DEFAULT_GRID: usize = 201;
const MIN_GRID: usize = 33;
/// Transverse distance (in waists) beyond which force and diffusion are zero.
pub const CUTOFF_WAISTS: f64 = 6.0;
const REFINE_TOL: f64 = 5e-3;
const FORMAT_TAG: &str = "# cqed-tables v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub n_grid: usize,
    /// `None` applies the photon-number rule and grows the basis until truncation converges.
    pub n_fock: Option<usize>,
    pub method: CorrelationMethod,
    pub check_truncation: bool,
    /// Number of interval midpoints re-solved to bound the interpolation error.
    pub refinement_checks: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            n_grid: DEFAULT_GRID,
            n_fock: None,
            method: CorrelationMethod::LinearSolve,
            check_truncation: true,
            refinement_checks: 12,
        }
    }
}

/// Observables at one coupling value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeValues {
    pub field: Complex64,
    pub excitation: f64,
    /// ⟨−i(a†σ − aσ†)⟩; mean force is ħ·s·∇g.
    pub force: f64,
    /// Correlation integral of the force operator (s).
    pub diffusion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyTables {
    g_max: f64,
    nodes: Vec<NodeValues>,
    /// ∫₀^{g_i} s dg at each node, exact for the linear interpolant.
    force_integral: Vec<f64>,
    params_hash: String,
    n_fock: usize,
}

/// Solves one grid node.
pub fn solve_node(p: &PhysicalParams, hc: HilbertConfig, g: f64, method: CorrelationMethod) -> Result<NodeValues> {
    let l = build_liouvillian(p, hc, g)?;
    let solver = SteadySolver::new(&l)?;
    let rho = solver.steady_state()?;
    let e = expectations(&rho)?;
    let f = force_operator(hc);
    let d = match method {
        CorrelationMethod::LinearSolve => match solver.correlation_integral(&rho, &f.matrix) {
            Some(v) => v,
            None => qrt_correlation_integral(&l, &rho, &f, CorrelationMethod::LinearSolve)?,
        },
        other => qrt_correlation_integral(&l, &rho, &f, other)?,
    };
    Ok(NodeValues { field: e.field, excitation: e.excitation, force: e.force_scalar, diffusion: d })
}

fn settle_basis(p: &PhysicalParams, opts: &TableOptions) -> Result<HilbertConfig> {
    match opts.n_fock {
        Some(n) => {
            let hc = HilbertConfig::new(n)?;
            if opts.check_truncation {
                check_truncation(p, hc, 0.0)?;
                check_truncation(p, hc, p.g0)?;
            }
            Ok(hc)
        }
        None => {
            let mut hc = HilbertConfig::for_drive(p.m_empty);
            if !opts.check_truncation {
                return Ok(hc);
            }
            let mut last = None;
            for _ in 0..4 {
                match check_truncation(p, hc, 0.0).and_then(|_| check_truncation(p, hc, p.g0)) {
                    Ok(_) => return Ok(hc),
                    Err(e @ Error::Truncation(_)) => {
                        log::info!("n_fock = {} not converged, enlarging", hc.n_fock());
                        last = Some(e);
                        hc = hc.enlarged(8);
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(last.unwrap_or_else(|| Error::Truncation("basis did not converge".into())))
        }
    }
}

pub fn build_tables(p: &PhysicalParams, opts: &TableOptions) -> Result<SteadyTables> {
    p.validate()?;
    if opts.n_grid < MIN_GRID {
        return Err(Error::domain(format!("n_grid must be at least {MIN_GRID}")));
    }
    let hc = settle_basis(p, opts)?;
    let step = p.g0 / (opts.n_grid - 1) as f64;
    let nodes: Vec<NodeValues> = (0..opts.n_grid)
        .into_par_iter()
        .map(|i| {
            solve_node(p, hc, step * i as f64, opts.method)
                .map_err(|e| Error::Node { node: i, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let tables = SteadyTables::from_nodes(p.g0, nodes, p.hash(), hc.n_fock())?;
    if opts.refinement_checks > 0 {
        tables.check_refinement(p, hc, opts.refinement_checks, opts.method)?;
    }
    Ok(tables)
}

/// Interpolation error at interval midpoints relative to each table's maximum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefinementError {
    pub field: f64,
    pub excitation: f64,
    pub force: f64,
    pub diffusion: f64,
}

impl RefinementError {
    pub fn worst(&self) -> f64 {
        self.field.max(self.excitation).max(self.force).max(self.diffusion)
    }
}

impl SteadyTables {
    pub fn from_nodes(g_max: f64, mut nodes: Vec<NodeValues>, params_hash: String, n_fock: usize) -> Result<Self> {
        if nodes.len() < 2 || !(g_max > 0.0) || !g_max.is_finite() {
            return Err(Error::domain("tables need at least two nodes and g_max > 0"));
        }
        // roundoff floor for the correlation scalar (s)
        let floor = 1e-12 * nodes.iter().map(|m| m.diffusion.abs()).fold(0.0, f64::max) + 1e-24;
        for (i, n) in nodes.iter_mut().enumerate() {
            let finite = n.field.re.is_finite()
                && n.field.im.is_finite()
                && n.excitation.is_finite()
                && n.force.is_finite()
                && n.diffusion.is_finite();
            if !finite {
                return Err(Error::Node { node: i, source: Box::new(Error::domain("non-finite value")) });
            }
            if n.diffusion < -floor {
                return Err(Error::Node {
                    node: i,
                    source: Box::new(Error::domain(format!("negative correlation scalar {}", n.diffusion))),
                });
            }
            n.diffusion = n.diffusion.max(0.0);
        }
        let step = g_max / (nodes.len() - 1) as f64;
        let mut force_integral = vec![0.0; nodes.len()];
        for i in 1..nodes.len() {
            force_integral[i] = force_integral[i - 1] + 0.5 * step * (nodes[i - 1].force + nodes[i].force);
        }
        Ok(SteadyTables { g_max, nodes, force_integral, params_hash, n_fock })
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn params_hash(&self) -> &str {
        &self.params_hash
    }

    pub fn nodes(&self) -> &[NodeValues] {
        &self.nodes
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let step = self.step();
        (0..self.nodes.len()).map(move |i| step * i as f64)
    }

    fn step(&self) -> f64 {
        self.g_max / (self.nodes.len() - 1) as f64
    }

    /// Interval index and fractional position for |g|, clamped to the grid.
    #[inline]
    fn locate(&self, g_abs: f64) -> (usize, f64) {
        let u = (g_abs / self.step()).max(0.0);
        let last = self.nodes.len() - 1;
        if u >= last as f64 {
            return (last - 1, 1.0);
        }
        let i = u as usize;
        (i, u - i as f64)
    }

    /// Linear interpolation with parity extension to g < 0.
    pub fn lookup(&self, g: f64) -> NodeValues {
        let (i, t) = self.locate(g.abs());
        let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
        let lerp = |x: f64, y: f64| x + (y - x) * t;
        let sign = if g < 0.0 { -1.0 } else { 1.0 };
        NodeValues {
            field: a.field + (b.field - a.field) * t,
            excitation: lerp(a.excitation, b.excitation),
            force: sign * lerp(a.force, b.force),
            diffusion: lerp(a.diffusion, b.diffusion),
        }
    }

    pub fn empty_field(&self) -> Complex64 {
        self.nodes[0].field
    }

    /// Adiabatic potential U(g) = −ħ∫₀^g s dg' (J), consistent with the interpolated force.
    pub fn potential(&self, g: f64) -> f64 {
        let ga = g.abs();
        let (i, t) = self.locate(ga);
        let h = self.step();
        let (s0, s1) = (self.nodes[i].force, self.nodes[i + 1].force);
        let dx = t * h;
        let integral = self.force_integral[i] + s0 * dx + 0.5 * (s1 - s0) * dx * t;
        // s is odd, so the integral from 0 to −|g| equals the one to |g|
        -HBAR * integral
    }

    /// Re-solves interval midpoints and returns the largest interpolation errors.
    pub fn refinement_error(
        &self,
        p: &PhysicalParams,
        hc: HilbertConfig,
        checks: usize,
        method: CorrelationMethod,
    ) -> Result<RefinementError> {
        let intervals = self.nodes.len() - 1;
        let checks = checks.min(intervals).max(1);
        let stride = intervals as f64 / checks as f64;
        let picks: Vec<usize> = (0..checks).map(|k| ((k as f64 + 0.5) * stride) as usize).collect();
        let h = self.step();
        let solved: Vec<(f64, NodeValues)> = picks
            .par_iter()
            .map(|&i| {
                let g = (i as f64 + 0.5) * h;
                solve_node(p, hc, g, method).map(|v| (g, v))
            })
            .collect::<Result<_>>()?;
        let max = |f: &dyn Fn(&NodeValues) -> f64| {
            self.nodes.iter().map(f).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE)
        };
        let scale_a = max(&|n| n.field.norm());
        let scale_e = max(&|n| n.excitation);
        let scale_s = max(&|n| n.force);
        let scale_d = max(&|n| n.diffusion);
        let mut err = RefinementError::default();
        for (g, exact) in solved {
            let approx = self.lookup(g);
            err.field = err.field.max((approx.field - exact.field).norm() / scale_a);
            err.excitation = err.excitation.max((approx.excitation - exact.excitation).abs() / scale_e);
            err.force = err.force.max((approx.force - exact.force).abs() / scale_s);
            err.diffusion = err.diffusion.max((approx.diffusion - exact.diffusion).abs() / scale_d);
        }
        Ok(err)
    }

    fn check_refinement(&self, p: &PhysicalParams, hc: HilbertConfig, checks: usize, method: CorrelationMethod) -> Result<()> {
        let err = self.refinement_error(p, hc, checks, method)?;
        if err.worst() > REFINE_TOL {
            return Err(Error::Rejected(format!(
                "interpolation error {:.3}% exceeds {:.1}% (field {:.2e}, excitation {:.2e}, force {:.2e}, diffusion {:.2e}); use a finer grid",
                100.0 * err.worst(),
                100.0 * REFINE_TOL,
                err.field,
                err.excitation,
                err.force,
                err.diffusion
            )));
        }
        Ok(())
    }

    /// Writes the CSV table format with its versioned header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FORMAT_TAG}")?;
        writeln!(w, "# params_hash={}", self.params_hash)?;
        writeln!(w, "# n_fock={}", self.n_fock)?;
        writeln!(w, "g_rad_per_s,re_a_sqrt_photons,im_a_sqrt_photons,excitation,force_scalar,correlation_s")?;
        for (g, n) in self.grid().zip(&self.nodes) {
            writeln!(
                w,
                "{g:e},{:e},{:e},{:e},{:e},{:e}",
                n.field.re, n.field.im, n.excitation, n.force, n.diffusion
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parses the CSV format without checking it against any parameter set.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing {what}")))?
                .map_err(Error::from)
        };
        if next("format tag")?.trim_end() != FORMAT_TAG {
            return Err(Error::Format("not a cqed table file".into()));
        }
        let hash = next("params hash")?
            .trim_end()
            .strip_prefix("# params_hash=")
            .ok_or_else(|| Error::Format("missing params_hash line".into()))?
            .to_string();
        let n_fock: usize = next("n_fock")?
            .trim_end()
            .strip_prefix("# n_fock=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format("bad n_fock line".into()))?;
        let header = next("column header")?;
        if !header.starts_with("g_rad_per_s,") {
            return Err(Error::Format("bad column header".into()));
        }
        let mut gs = Vec::new();
        let mut nodes = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("row {k}: {e}")))?;
            if vals.len() != 6 {
                return Err(Error::Format(format!("row {k}: expected 6 columns, found {}", vals.len())));
            }
            gs.push(vals[0]);
            nodes.push(NodeValues {
                field: Complex64::new(vals[1], vals[2]),
                excitation: vals[3],
                force: vals[4],
                diffusion: vals[5],
            });
        }
        if nodes.len() < 2 {
            return Err(Error::Format("table has fewer than two rows".into()));
        }
        let g_max = *gs.last().unwrap();
        if gs[0] != 0.0 || !(g_max > 0.0) || !g_max.is_finite() {
            return Err(Error::Format("grid must start at 0 and end at g_max > 0".into()));
        }
        let step = g_max / (gs.len() - 1) as f64;
        for (i, g) in gs.iter().enumerate() {
            if (g - step * i as f64).abs() > 1e-9 * g_max {
                return Err(Error::Format(format!("row {i}: grid is not uniform")));
            }
        }
        SteadyTables::from_nodes(g_max, nodes, hash, n_fock)
    }

    /// Parses and refuses tables built for different parameters.
    pub fn read_csv_for<R: BufRead>(r: R, p: &PhysicalParams) -> Result<Self> {
        let t = Self::read_csv(r)?;
        t.ensure_matches(p)?;
        Ok(t)
    }

    pub fn ensure_matches(&self, p: &PhysicalParams) -> Result<()> {
        let expected = p.hash();
        if self.params_hash != expected {
            return Err(Error::HashMismatch { expected, found: self.params_hash.clone() });
        }
        Ok(())
    }
}

fn outside_cutoff(p: &PhysicalParams, r: &Vector3<f64>) -> bool {
    let limit = CUTOFF_WAISTS * p.waist;
    r.y.abs() > limit || r.z.abs() > limit
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diffusion {
    /// Dipole-fluctuation diffusion along the standing wave (kg² m² s⁻³).
    pub dipole_x: f64,
    /// Spontaneous-emission recoil diffusion (kg² m² s⁻³).
    pub recoil: f64,
}

/// Everything the integrator needs at one position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mechanics {
    /// g(r) (rad/s), zero outside the cutoff.
    pub g: f64,
    pub force: Vector3<f64>,
    pub diffusion: Diffusion,
}

/// Force and diffusion from one mode-function evaluation and one table lookup.
pub fn mechanics(t: &SteadyTables, p: &PhysicalParams, r: &Vector3<f64>) -> Mechanics {
    if outside_cutoff(p, r) {
        return Mechanics::default();
    }
    let (g, grad) = mode_coupling(p, r);
    let v = t.lookup(g);
    let hk = HBAR * p.k_laser();
    Mechanics {
        g,
        force: grad * (HBAR * v.force),
        diffusion: Diffusion {
            dipole_x: HBAR * HBAR * grad.x * grad.x * v.diffusion.max(0.0),
            recoil: hk * hk * p.spontaneous_rate() / 25.0 * v.excitation.max(0.0),
        },
    }
}

/// Mean force ħ s(g(r)) ∇g(r) (N).
pub fn mean_force(t: &SteadyTables, p: &PhysicalParams, r: &Vector3<f64>) -> Vector3<f64> {
    mechanics(t, p, r).force
}

/// D_dipole_x = ħ²(∂g/∂x)² d(g) and D_recoil = (ħk)² (Γ/25) ⟨σ†σ⟩ with Γ = 2γ⊥.
pub fn diffusion(t: &SteadyTables, p: &PhysicalParams, r: &Vector3<f64>) -> Diffusion {
    mechanics(t, p, r).diffusion
}

/// Adiabatic potential U(g(r)) (J); zero outside the transverse cutoff.
pub fn potential(t: &SteadyTables, p: &PhysicalParams, r: &Vector3<f64>) -> f64 {
    if outside_cutoff(p, r) {
        return 0.0;
    }
    t.potential(mode_coupling(p, r).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn small_opts() -> TableOptions {
        TableOptions { n_grid: 41, n_fock: Some(10), check_truncation: false, refinement_checks: 0, ..Default::default() }
    }

    fn weak_tables() -> &'static (PhysicalParams, SteadyTables) {
        static T: OnceLock<(PhysicalParams, SteadyTables)> = OnceLock::new();
        T.get_or_init(|| {
            let p = PhysicalParams::reference().with_delta_mhz(20.0).with_m_empty(0.3);
            let t = build_tables(&p, &small_opts()).unwrap();
            (p, t)
        })
    }

    /// Synthetic tables with known analytic profiles.
    fn synthetic(n: usize) -> SteadyTables {
        let g_max = 2.0;
        let nodes = (0..n)
            .map(|i| {
                let g = g_max * i as f64 / (n - 1) as f64;
                NodeValues {
                    field: Complex64::new(1.0 - 0.1 * g * g, 0.2 * g * g),
                    excitation: 0.05 * g * g,
                    force: 0.3 * g,
                    diffusion: 1e-9 * g * g,
                }
            })
            .collect();
        SteadyTables::from_nodes(g_max, nodes, "abc".into(), 4).unwrap()
    }

    #[test]
    fn undriven_tables_vanish() {
        let p = PhysicalParams::reference().with_m_empty(0.0);
        let t = build_tables(&p, &small_opts()).unwrap();
        for n in t.nodes() {
            assert!(n.field.norm() < 1e-12);
            assert!(n.excitation.abs() < 1e-12);
            assert!(n.force.abs() < 1e-12);
            assert!(n.diffusion.abs() < 1e-20);
        }
        let r = Vector3::new(p.wavelength / 8.0, 0.0, 0.0);
        assert_eq!(mean_force(&t, &p, &r).norm(), 0.0);
        let d = diffusion(&t, &p, &r);
        assert!(d.dipole_x < 1e-60 && d.recoil < 1e-60);
    }

    #[test]
    fn grid_too_coarse_is_refused() {
        let p = PhysicalParams::reference();
        let opts = TableOptions { n_grid: 32, ..small_opts() };
        assert!(build_tables(&p, &opts).is_err());
    }

    #[test]
    fn node_invariants_hold() {
        let (_, t) = weak_tables();
        assert_eq!(t.nodes()[0].force, 0.0);
        for n in t.nodes() {
            assert!(n.diffusion >= 0.0);
            assert!((0.0..=1.0).contains(&n.excitation));
        }
    }

    #[test]
    fn lookup_is_exact_at_nodes_and_has_parity() {
        let t = synthetic(21);
        for (g, n) in t.grid().zip(t.nodes()) {
            let l = t.lookup(g);
            assert!((l.field - n.field).norm() < 1e-12);
            assert!((l.force - n.force).abs() < 1e-12);
            let m = t.lookup(-g);
            assert_eq!(m.field, l.field);
            assert_eq!(m.diffusion, l.diffusion);
            assert_eq!(m.force, if g == 0.0 { l.force } else { -l.force });
        }
        // clamped beyond the grid
        assert_eq!(t.lookup(5.0), *t.nodes().last().unwrap());
    }

    #[test]
    fn potential_integrates_the_interpolated_force() {
        // s = 0.3 g is linear, so U = −ħ 0.15 g² exactly
        let t = synthetic(21);
        for g in [0.0, 0.37, 1.0, 1.93, -1.2] {
            let expected = -HBAR * 0.15 * g * g;
            assert!((t.potential(g) - expected).abs() < 1e-12 * HBAR);
        }
        // numerical derivative of U matches −ħ s
        let g = 0.81;
        let h = 1e-6;
        let du = (t.potential(g + h) - t.potential(g - h)) / (2.0 * h);
        assert!((du + HBAR * t.lookup(g).force).abs() < 1e-6 * HBAR);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let (p, t) = weak_tables();
        let text = t.to_csv_string();
        let back = SteadyTables::read_csv_for(text.as_bytes(), p).unwrap();
        assert_eq!(&back, t);
    }

    #[test]
    fn mismatched_hash_is_refused() {
        let (p, t) = weak_tables();
        let text = t.to_csv_string();
        let other = p.clone().with_m_empty(0.31);
        match SteadyTables::read_csv_for(text.as_bytes(), &other) {
            Err(Error::HashMismatch { .. }) => {}
            r => panic!("expected hash mismatch, got {r:?}"),
        }
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let good = synthetic(5).to_csv_string();
        let cases = [
            String::new(),
            "hello".to_string(),
            good.replace("# cqed-tables v1", "# cqed-tables v9"),
            good.replace("# n_fock=4", "# n_fock=x"),
            good.lines().take(5).collect::<Vec<_>>().join("\n"),
            good.replacen(",", ";", 7),
        ];
        for c in cases {
            assert!(SteadyTables::read_csv(c.as_bytes()).is_err(), "accepted: {c:?}");
        }
    }

    #[test]
    fn force_vanishes_at_antinode_and_cutoff() {
        let (p, t) = weak_tables();
        assert!(mean_force(t, p, &Vector3::zeros()).norm() == 0.0);
        let off = Vector3::new(p.wavelength / 8.0, 6.01 * p.waist, 0.0);
        assert_eq!(mean_force(t, p, &off).norm(), 0.0);
        let d = diffusion(t, p, &Vector3::zeros());
        assert_eq!(d.dipole_x, 0.0);
        assert!(d.recoil > 0.0);
    }

    #[test]
    fn refinement_check_runs_against_direct_solves() {
        let (p, t) = weak_tables();
        let hc = HilbertConfig::new(t.n_fock()).unwrap();
        let err = t.refinement_error(p, hc, 5, CorrelationMethod::LinearSolve).unwrap();
        assert!(err.worst() < REFINE_TOL, "{err:?}");
    }

    #[test]
    fn red_detuning_makes_antinodes_attractive() {
        // Δ > 0: the potential is lowest where |g| is largest
        let (p, t) = weak_tables();
        assert!(t.potential(p.g0) < 0.0);
        let x = p.wavelength / 16.0;
        let f = mean_force(t, p, &Vector3::new(x, 0.0, 0.0));
        assert!(f.x < 0.0, "force should point back to the antinode at x = 0");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn force_and_diffusion_are_periodic_and_even(
            x in 0.0f64..1e-6, y in -1.5f64..1.5, z in -1.5f64..1.5
        ) {
            let (p, t) = weak_tables();
            let r = Vector3::new(x, y * p.waist, z * p.waist);
            let shifted = r + Vector3::new(p.wavelength / 2.0, 0.0, 0.0);
            let f0 = mean_force(t, p, &r);
            let f1 = mean_force(t, p, &shifted);
            let scale = f0.norm().max(1e-30);
            prop_assert!((f0 - f1).norm() <= 1e-6 * scale + 1e-30);
            let mirrored = Vector3::new(r.x, -r.y, -r.z);
            let fm = mean_force(t, p, &mirrored);
            prop_assert!((fm.x - f0.x).abs() <= 1e-9 * scale + 1e-30);
            prop_assert!((fm.y + f0.y).abs() <= 1e-9 * scale + 1e-30);
            let d0 = diffusion(t, p, &r);
            let d1 = diffusion(t, p, &shifted);
            let dm = diffusion(t, p, &mirrored);
            prop_assert!(d0.dipole_x >= 0.0 && d0.recoil >= 0.0);
            prop_assert!((d0.dipole_x - d1.dipole_x).abs() <= 1e-6 * d0.dipole_x.max(1e-60));
            prop_assert!((d0.recoil - dm.recoil).abs() <= 1e-12 * d0.recoil.max(1e-60));
        }
    }
}
