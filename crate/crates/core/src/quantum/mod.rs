//! Operator algebra, master-equation generator and steady-state solvers for
//! one two-level atom coupled to one driven, damped cavity mode.

mod band;
mod liouvillian;
mod ops;
mod steady;

pub use liouvillian::{build_liouvillian, hamiltonian, unvectorize, vectorize, Liouvillian};
pub use ops::{
    annihilation, basis_ket, coherent_ket, force_operator, lowering, HilbertConfig, OperatorMatrix,
    OperatorRole,
};
pub use steady::{
    expectations, propagate, propagate_with, qrt_correlation_integral, solve_steady, stable_step,
    steady_state, CorrelationMethod, DensityOperator, Expectations, SteadySolver,
};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;

/// |⟨a⟩(n_fock) − ⟨a⟩(n_fock + 8)| at coupling `g`; errors when ≥ 1e-6.
pub fn check_truncation(p: &PhysicalParams, hc: HilbertConfig, g: f64) -> Result<f64> {
    let (_, small) = solve_steady(p, hc, g)?;
    let (_, large) = solve_steady(p, hc.enlarged(8), g)?;
    let change = (small.field - large.field).norm();
    if change >= 1e-6 {
        return Err(Error::Truncation(format!(
            "<a> moved by {change:e} when n_fock grew from {} to {}",
            hc.n_fock(),
            hc.n_fock() + 8
        )));
    }
    Ok(change)
}
