//! Digital twin of a single-atom cavity QED transit experiment.
//!
//! The crate is organized along the experiment's signal chain:
//!
//! * [`params`]: physical parameters, units and the cavity mode function
//! * [`quantum`]: master-equation steady states and correlation integrals
//! * [`obse`]: the semiclassical optical bistability state equation
//! * [`tables`]: per-coupling steady-state tables, forces and diffusion
//! * [`transit`]: stochastic atomic trajectories through the mode
//! * [`heterodyne`]: photocurrent synthesis, trace files and calibration
//! * [`phasor`]: LO phase recovery, transit detection, phasors and model comparison
//! * [`config`], [`pipeline`], [`manifest`]: configuration, orchestration and run manifests
//! * [`rng`], [`sde`]: seed derivation and the stochastic-integrator convergence harness

pub mod config;
pub mod error;
pub mod heterodyne;
pub mod manifest;
pub mod obse;
pub mod params;
pub mod phasor;
pub mod pipeline;
pub mod quantum;
pub mod rng;
pub mod sde;
pub mod tables;
pub mod transit;

pub use error::{Error, Result};
pub use params::PhysicalParams;
