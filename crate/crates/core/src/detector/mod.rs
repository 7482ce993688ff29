//! Phenomenological gated-APD model with bias-resistor droop.

mod config;
mod engine;
mod filter;
mod light;
mod model;

pub use config::{DetectorConfig, ModelConstants};
pub use engine::{
    simulate_peaks, simulate_response, simulate_states, PeakTrace, Response,
};
pub use filter::{capacitive_template, pulse_shape};
pub use light::{Illumination, PulseKind, PulseTrain};
pub use model::{avalanche_amplitude, avalanche_probability, bias_droop_step, DetectorState};

pub(crate) use config::{non_negative, positive};
