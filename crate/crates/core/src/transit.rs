//! Classical three-dimensional atomic motion through the cavity mode with the
//! internal and field degrees of freedom adiabatically eliminated.
//!
//! Each step applies the mean force, Gaussian momentum kicks from dipole and
//! recoil diffusion, and gravity, then moves the atom.

use std::io::Write;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::rng::{derive_seed, stream, STAGE_TRANSIT};
use crate::sde::ito_euler_increment;
use crate::tables::{mechanics, Mechanics, SteadyTables};

const MAX_STEPS: f64 = 1e7;

/// Anything that supplies the adiabatic mechanics at a position.
pub trait ForceField: Sync {
    fn mechanics(&self, r: &Vector3<f64>) -> Mechanics;
    /// Intracavity field ⟨a⟩ at coupling `g`.
    fn field(&self, g: f64) -> Complex64;
    /// Adiabatic potential at `r` (J).
    fn potential(&self, r: &Vector3<f64>) -> f64;
}

/// Table-backed mechanics for one parameter set.
pub struct TableField<'a> {
    tables: &'a SteadyTables,
    params: &'a PhysicalParams,
}

impl<'a> TableField<'a> {
    /// Refuses tables built for other parameters.
    pub fn new(tables: &'a SteadyTables, params: &'a PhysicalParams) -> Result<Self> {
        tables.ensure_matches(params)?;
        Ok(TableField { tables, params })
    }
}

impl ForceField for TableField<'_> {
    fn mechanics(&self, r: &Vector3<f64>) -> Mechanics {
        mechanics(self.tables, self.params, r)
    }

    fn field(&self, g: f64) -> Complex64 {
        self.tables.lookup(g).field
    }

    fn potential(&self, r: &Vector3<f64>) -> f64 {
        crate::tables::potential(self.tables, self.params, r)
    }
}

/// Which momentum enters the position update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOrdering {
    /// Position advanced with the updated momentum; coefficients still from the pre-step position.
    #[default]
    SemiImplicit,
    /// Position advanced with the pre-step momentum.
    Explicit,
}

/// How the recoil coefficient is distributed over the three axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoilProjection {
    /// The full coefficient on each axis.
    #[default]
    PerAxis,
    /// The coefficient is a total, split equally over the axes.
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub fn new(lo: f64, hi: f64) -> Self {
        Span { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Span { lo: v, hi: v }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.lo + (self.hi - self.lo) * u
    }

    fn valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Simulated time (s).
    pub duration: f64,
    /// Launch height above the cavity axis (m).
    pub z0: f64,
    /// Launch vertical velocity (m/s).
    pub vz0: f64,
    pub x0: Span,
    pub y0: Span,
    pub vx0: Span,
    pub vy0: Span,
    pub seed: u64,
    /// Keep every n-th step.
    pub record_every: usize,
    /// Stop once the atom is this far below the axis (m).
    pub exit_depth: f64,
    pub noise: bool,
    pub ordering: StepOrdering,
    pub recoil: RecoilProjection,
}

impl TransitConfig {
    /// Defaults for a drop through the mode of `p`.
    pub fn for_params(p: &PhysicalParams) -> Self {
        TransitConfig {
            dt: 7.5e-9,
            duration: 1.2e-3,
            z0: 7.0 * p.waist,
            vz0: -0.47,
            x0: Span::new(0.0, p.wavelength / 2.0),
            y0: Span::new(-p.waist / 2.0, p.waist / 2.0),
            vx0: Span::new(-0.03, 0.03),
            vy0: Span::new(-0.03, 0.03),
            seed: 0,
            record_every: 10,
            exit_depth: 8.0 * p.waist,
            noise: true,
            ordering: StepOrdering::default(),
            recoil: RecoilProjection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("transit dt must be positive".into()));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Config("transit duration must be positive".into()));
        }
        if self.duration / self.dt > MAX_STEPS {
            return Err(Error::Config(format!("duration/dt exceeds {MAX_STEPS:e} steps")));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if ![self.x0, self.y0, self.vx0, self.vy0].iter().all(Span::valid) {
            return Err(Error::Config("initial-condition ranges need lo <= hi".into()));
        }
        if !self.z0.is_finite() || !self.vz0.is_finite() || !(self.exit_depth > 0.0) {
            return Err(Error::Config("bad launch height, velocity or exit depth".into()));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    pub position: Vector3<f64>,
    pub momentum: Vector3<f64>,
}

impl AtomState {
    pub fn velocity(&self, mass: f64) -> Vector3<f64> {
        self.momentum / mass
    }

    fn is_finite(&self) -> bool {
        self.position.iter().chain(self.momentum.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub ordering: StepOrdering,
    pub recoil: RecoilProjection,
    pub gravity: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { ordering: StepOrdering::default(), recoil: RecoilProjection::default(), gravity: true }
    }
}

/// Momentum change over `dt` from the coefficients `m`; `xi` are four standard normals
/// (dipole along x, recoil along x, y, z).
pub fn momentum_kick(m: &Mechanics, p: &PhysicalParams, dt: f64, xi: &[f64; 4], opts: &StepOptions) -> Vector3<f64> {
    let recoil = match opts.recoil {
        RecoilProjection::PerAxis => m.diffusion.recoil,
        RecoilProjection::Total => m.diffusion.recoil / 3.0,
    };
    let sdt = dt.sqrt();
    let a_dip = (2.0 * m.diffusion.dipole_x).sqrt();
    let a_rec = (2.0 * recoil).sqrt();
    let weight = if opts.gravity { -p.atom_mass * p.gravity } else { 0.0 };
    Vector3::new(
        ito_euler_increment(m.force.x, a_dip, dt, xi[0] * sdt) + a_rec * xi[1] * sdt,
        ito_euler_increment(m.force.y, a_rec, dt, xi[2] * sdt),
        ito_euler_increment(m.force.z + weight, a_rec, dt, xi[3] * sdt),
    )
}

fn advance(state: &AtomState, m: &Mechanics, p: &PhysicalParams, dt: f64, xi: &[f64; 4], opts: &StepOptions) -> AtomState {
    let momentum = state.momentum + momentum_kick(m, p, dt, xi, opts);
    let carried = match opts.ordering {
        StepOrdering::SemiImplicit => momentum,
        StepOrdering::Explicit => state.momentum,
    };
    AtomState { position: state.position + carried * (dt / p.atom_mass), momentum }
}

/// One integration step with coefficients evaluated at the pre-step position.
pub fn step<F: ForceField + ?Sized>(
    state: &AtomState,
    field: &F,
    p: &PhysicalParams,
    dt: f64,
    xi: &[f64; 4],
    opts: &StepOptions,
) -> Result<AtomState> {
    let next = advance(state, &field.mechanics(&state.position), p, dt, xi, opts);
    if !next.is_finite() {
        return Err(Error::Trajectory { step: 0, reason: "non-finite state".into() });
    }
    Ok(next)
}

/// ½M|v|² + U(g(r)) + M g z (J).
pub fn mechanical_energy<F: ForceField + ?Sized>(field: &F, p: &PhysicalParams, s: &AtomState) -> f64 {
    0.5 * s.momentum.norm_squared() / p.atom_mass + field.potential(&s.position) + p.atom_mass * p.gravity * s.position.z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomTrajectory {
    pub seed: u64,
    /// Spacing of the record (s).
    pub record_dt: f64,
    pub decimation: usize,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    /// g(t) (rad/s).
    pub coupling: Vec<f64>,
    /// Intracavity ⟨a⟩(t) in √photons.
    pub field: Vec<(f64, f64)>,
    /// The atom left through the bottom before `duration`.
    pub exited: bool,
    /// |v_x| moved the atom more than λ/20 within one cavity lifetime.
    pub adiabaticity_strained: bool,
}

impl AtomTrajectory {
    pub fn len(&self) -> usize {
        self.coupling.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coupling.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.record_dt * i as f64
    }

    pub fn field_at(&self, i: usize) -> Complex64 {
        let (re, im) = self.field[i];
        Complex64::new(re, im)
    }

    /// Every `every`-th recorded sample.
    pub fn decimated(&self, every: usize) -> AtomTrajectory {
        let every = every.max(1);
        let pick = |n: usize| (0..n).step_by(every);
        AtomTrajectory {
            record_dt: self.record_dt * every as f64,
            decimation: self.decimation * every,
            positions: pick(self.len()).map(|i| self.positions[i]).collect(),
            velocities: pick(self.len()).map(|i| self.velocities[i]).collect(),
            coupling: pick(self.len()).map(|i| self.coupling[i]).collect(),
            field: pick(self.len()).map(|i| self.field[i]).collect(),
            seed: self.seed,
            exited: self.exited,
            adiabaticity_strained: self.adiabaticity_strained,
        }
    }

    /// One JSON object per sample: {t, x, y, z, vx, vy, vz, g, re_a, im_a}.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Rec {
            t: f64,
            x: f64,
            y: f64,
            z: f64,
            vx: f64,
            vy: f64,
            vz: f64,
            g: f64,
            re_a: f64,
            im_a: f64,
        }
        for i in 0..self.len() {
            let [x, y, z] = self.positions[i];
            let [vx, vy, vz] = self.velocities[i];
            let (re_a, im_a) = self.field[i];
            let rec = Rec { t: self.time(i), x, y, z, vx, vy, vz, g: self.coupling[i], re_a, im_a };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Draws the launch state from the configured ranges.
pub fn initial_state<R: Rng>(cfg: &TransitConfig, p: &PhysicalParams, rng: &mut R) -> AtomState {
    let x = cfg.x0.sample(rng);
    let y = cfg.y0.sample(rng);
    let vx = cfg.vx0.sample(rng);
    let vy = cfg.vy0.sample(rng);
    AtomState {
        position: Vector3::new(x, y, cfg.z0),
        momentum: Vector3::new(vx, vy, cfg.vz0) * p.atom_mass,
    }
}

/// Integrates from an explicit initial state.
pub fn run_from<F: ForceField + ?Sized>(
    cfg: &TransitConfig,
    field: &F,
    p: &PhysicalParams,
    start: AtomState,
    rng: &mut crate::rng::StreamRng,
) -> Result<AtomTrajectory> {
    cfg.validate()?;
    let opts = StepOptions { ordering: cfg.ordering, recoil: cfg.recoil, gravity: p.gravity != 0.0 };
    let steps = cfg.steps();
    let capacity = (steps / cfg.record_every as u64 + 1) as usize;
    let mut traj = AtomTrajectory {
        seed: cfg.seed,
        record_dt: cfg.dt * cfg.record_every as f64,
        decimation: cfg.record_every,
        positions: Vec::with_capacity(capacity),
        velocities: Vec::with_capacity(capacity),
        coupling: Vec::with_capacity(capacity),
        field: Vec::with_capacity(capacity),
        exited: false,
        adiabaticity_strained: false,
    };
    let strain_speed = p.wavelength / 20.0 * p.kappa_total();
    let mut state = start;
    let mut xi = [0.0; 4];
    for k in 0..=steps {
        let m = field.mechanics(&state.position);
        if k % cfg.record_every as u64 == 0 {
            let v = state.velocity(p.atom_mass);
            let a = field.field(m.g);
            traj.positions.push(state.position.into());
            traj.velocities.push(v.into());
            traj.coupling.push(m.g);
            traj.field.push((a.re, a.im));
        }
        if k == steps {
            break;
        }
        if cfg.noise {
            for x in xi.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
        }
        state = advance(&state, &m, p, cfg.dt, &xi, &opts);
        if !state.is_finite() {
            return Err(Error::Trajectory { step: k, reason: format!("non-finite state {state:?}") });
        }
        if state.momentum.x.abs() / p.atom_mass > strain_speed {
            traj.adiabaticity_strained = true;
        }
        if state.position.z < -cfg.exit_depth {
            traj.exited = true;
            break;
        }
    }
    Ok(traj)
}

/// One drop with launch conditions and noise drawn from `cfg.seed`.
pub fn run_transit<F: ForceField + ?Sized>(cfg: &TransitConfig, field: &F, p: &PhysicalParams) -> Result<AtomTrajectory> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed);
    let start = initial_state(cfg, p, &mut rng);
    run_from(cfg, field, p, start, &mut rng)
}

/// Seed of trajectory `index` in an ensemble with master seed `master`.
pub fn trajectory_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, STAGE_TRANSIT, index)
}

/// `n` drops with per-trajectory seeds derived from `cfg.seed`; failures are
/// returned in place rather than aborting the batch.
pub fn run_ensemble<F: ForceField + ?Sized>(
    n: usize,
    cfg: &TransitConfig,
    field: &F,
    p: &PhysicalParams,
) -> Result<Vec<Result<AtomTrajectory>>> {
    if n == 0 {
        return Err(Error::Config("ensemble size must be at least 1".into()));
    }
    cfg.validate()?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let c = TransitConfig { seed: trajectory_seed(cfg.seed, i), ..*cfg };
            run_transit(&c, field, p)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{Diffusion, NodeValues};

    /// Mechanics with fixed force and diffusion everywhere.
    struct Uniform {
        force: Vector3<f64>,
        diffusion: Diffusion,
    }

    impl ForceField for Uniform {
        fn mechanics(&self, _r: &Vector3<f64>) -> Mechanics {
            Mechanics { g: 0.0, force: self.force, diffusion: self.diffusion }
        }
        fn field(&self, _g: f64) -> Complex64 {
            Complex64::new(1.0, 0.0)
        }
        fn potential(&self, r: &Vector3<f64>) -> f64 {
            -self.force.dot(r)
        }
    }

    fn free() -> Uniform {
        Uniform { force: Vector3::zeros(), diffusion: Diffusion::default() }
    }

    fn quiet_cfg(p: &PhysicalParams) -> TransitConfig {
        TransitConfig { noise: false, duration: 1e-4, ..TransitConfig::for_params(p) }
    }

    #[test]
    fn free_flight_without_gravity_is_uniform() {
        let p = PhysicalParams { gravity: 0.0, ..PhysicalParams::reference() };
        let cfg = quiet_cfg(&p);
        let traj = run_transit(&cfg, &free(), &p).unwrap();
        let v0 = traj.velocities[0];
        let r0 = traj.positions[0];
        for i in 0..traj.len() {
            assert_eq!(traj.velocities[i], v0);
            for a in 0..3 {
                let expected = r0[a] + v0[a] * traj.time(i);
                assert!((traj.positions[i][a] - expected).abs() < 1e-12 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn gravity_matches_euler_quadrature() {
        let p = PhysicalParams::reference();
        let cfg = quiet_cfg(&p);
        let traj = run_transit(&cfg, &free(), &p).unwrap();
        let z0 = cfg.z0;
        let n = traj.len() - 1;
        let t = traj.time(n);
        let steps = (n * cfg.record_every) as f64;
        // semi-implicit Euler: z_n = z0 + v0 t − g dt² n(n+1)/2
        let exact = z0 + cfg.vz0 * t - 0.5 * p.gravity * t * t;
        let euler = z0 + cfg.vz0 * t - 0.5 * p.gravity * cfg.dt * cfg.dt * steps * (steps + 1.0);
        assert!((traj.positions[n][2] - euler).abs() < 1e-12);
        assert!((traj.positions[n][2] - exact).abs() <= p.gravity * cfg.dt * t);
        assert!((traj.velocities[n][2] - (cfg.vz0 - p.gravity * t)).abs() < 1e-12);
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let p = PhysicalParams::reference();
        let field = Uniform {
            force: Vector3::new(1e-22, 0.0, 0.0),
            diffusion: Diffusion { dipole_x: 1e-48, recoil: 1e-49 },
        };
        let cfg = TransitConfig { duration: 2e-5, seed: 9, ..TransitConfig::for_params(&p) };
        let a = run_transit(&cfg, &field, &p).unwrap();
        let b = run_transit(&cfg, &field, &p).unwrap();
        assert_eq!(a, b);
        let c = run_transit(&TransitConfig { seed: 10, ..cfg }, &field, &p).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ensemble_of_one_matches_single_run() {
        let p = PhysicalParams::reference();
        let cfg = TransitConfig { duration: 1e-5, seed: 4, ..TransitConfig::for_params(&p) };
        let field = Uniform { force: Vector3::zeros(), diffusion: Diffusion { dipole_x: 1e-48, recoil: 0.0 } };
        let ens = run_ensemble(1, &cfg, &field, &p).unwrap();
        let single = run_transit(&TransitConfig { seed: trajectory_seed(4, 0), ..cfg }, &field, &p).unwrap();
        assert_eq!(ens[0].as_ref().unwrap(), &single);
        let ok = |v: Vec<Result<AtomTrajectory>>| v.into_iter().map(|r| r.unwrap()).collect::<Vec<_>>();
        assert_eq!(ok(run_ensemble(3, &cfg, &field, &p).unwrap()), ok(run_ensemble(3, &cfg, &field, &p).unwrap()));
        assert!(run_ensemble(0, &cfg, &field, &p).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let p = PhysicalParams::reference();
        let base = TransitConfig::for_params(&p);
        for bad in [
            TransitConfig { dt: 0.0, ..base },
            TransitConfig { dt: -1.0, ..base },
            TransitConfig { duration: 1.0, dt: 1e-8, ..base },
            TransitConfig { record_every: 0, ..base },
            TransitConfig { x0: Span::new(1.0, 0.0), ..base },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn early_exit_below_the_mode() {
        let p = PhysicalParams::reference();
        let cfg = TransitConfig { duration: 1e-2, noise: false, ..TransitConfig::for_params(&p) };
        let traj = run_transit(&cfg, &free(), &p).unwrap();
        assert!(traj.exited);
        let last = traj.positions.last().unwrap()[2];
        assert!(last >= -cfg.exit_depth - 1e-6 && last < -cfg.exit_depth + 1e-5);
    }

    #[test]
    fn non_finite_state_aborts() {
        let p = PhysicalParams::reference();
        let field = Uniform { force: Vector3::new(f64::NAN, 0.0, 0.0), diffusion: Diffusion::default() };
        let cfg = quiet_cfg(&p);
        assert!(matches!(run_transit(&cfg, &field, &p), Err(Error::Trajectory { step: 0, .. })));
    }

    #[test]
    fn recoil_projection_scales_variance() {
        let p = PhysicalParams::reference();
        let m = Mechanics { g: 0.0, force: Vector3::zeros(), diffusion: Diffusion { dipole_x: 0.0, recoil: 3.0 } };
        let xi = [0.0, 1.0, 1.0, 1.0];
        let per = momentum_kick(&m, &p, 1.0, &xi, &StepOptions { gravity: false, ..Default::default() });
        let tot = momentum_kick(
            &m,
            &p,
            1.0,
            &xi,
            &StepOptions { gravity: false, recoil: RecoilProjection::Total, ..Default::default() },
        );
        assert!((per.y - 6f64.sqrt()).abs() < 1e-12);
        assert!((tot.y - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn far_off_axis_drop_is_ballistic() {
        let p = PhysicalParams::reference();
        let nodes = vec![
            NodeValues { field: Complex64::new(1.0, 0.0), excitation: 0.0, force: 0.0, diffusion: 0.0 },
            NodeValues { field: Complex64::new(0.2, 0.3), excitation: 0.3, force: 2.0, diffusion: 1e-8 },
        ];
        let t = SteadyTables::from_nodes(p.g0, nodes, p.hash(), 4).unwrap();
        let field = TableField::new(&t, &p).unwrap();
        let cfg = TransitConfig { y0: Span::point(10.0 * p.waist), duration: 2e-3, ..TransitConfig::for_params(&p) };
        let traj = run_transit(&cfg, &field, &p).unwrap();
        assert!(traj.coupling.iter().all(|g| g.abs() < 1e-30 * p.g0));
        assert!(traj.field.iter().all(|&(re, im)| re == 1.0 && im == 0.0));
        let quiet = run_transit(&TransitConfig { noise: false, ..cfg }, &free(), &p).unwrap();
        assert_eq!(traj.positions, quiet.positions);
    }

    #[test]
    fn ndjson_has_one_record_per_sample() {
        let p = PhysicalParams::reference();
        let traj = run_transit(&quiet_cfg(&p), &free(), &p).unwrap();
        let mut buf = Vec::new();
        traj.write_ndjson(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), traj.len());
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["t", "x", "y", "z", "vx", "vy", "vz", "g", "re_a", "im_a"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
    }
}
