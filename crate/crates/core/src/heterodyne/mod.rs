//! Balanced-heterodyne photocurrent: synthesis, trace files and calibration.

pub mod calibrate;
pub mod filter;
pub mod synth;
pub mod trace_file;

pub use calibrate::{
    calibrate_photon_number, heterodyne_snr, imbalance_efficiency, lo_excess_noise_fit, window_snr, LoNoiseFit,
    WindowSnr,
};
pub use filter::Biquad;
pub use synth::{
    default_scale, quantize, shot_noise_sigma, synthesize, synthesize_analog, AnalogTrace, FieldRecord,
    HeterodyneConfig, LoDrift, QuadratureTrace, TraceHeader,
};
pub use trace_file::{decode_trace, encode_trace, read_trace, write_trace, write_trace_csv};
