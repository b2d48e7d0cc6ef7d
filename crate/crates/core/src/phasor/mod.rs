//! Trace analysis: LO phase, transit detection, phasors and model comparison.

pub mod detect;
pub mod lo;
pub mod points;
pub mod sensitivity;
pub mod theory;

pub use detect::{detect_transits, DetectOptions, DetectStatistic, TransitEvent};
pub use lo::{estimate_lo_phase, rotate_quadratures, PhaseEstimate};
pub use points::{phasor_points, PhasorDot, PhasorOptions, PhasorSet};
pub use sensitivity::{rank_events, sensitivity_report, SensitivityReport};
pub use theory::{
    discriminate, empty_cavity_field, polyline_distance, theory_curves, Discrimination, Model, ScaledCurves,
    TheoryCurves,
};
