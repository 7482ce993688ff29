use serde::{Deserialize, Serialize};

use super::config::DetectorConfig;
use crate::units::photon_energy;

/// Bias-network state at the start of a gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    /// Bias above breakdown, V. Negative in the linear (blinded) regime.
    pub excess_voltage: f64,
    /// Mean photocurrent delivered during the previous gate period, A.
    pub accumulated_photocurrent: f64,
    pub trapped_carriers: f64,
}

impl DetectorState {
    /// Fully recovered detector with no light history.
    pub fn fresh(config: &DetectorConfig) -> Self {
        DetectorState {
            excess_voltage: config.nominal_excess(),
            accumulated_photocurrent: 0.0,
            trapped_carriers: 0.0,
        }
    }
}

/// Saturating excess-voltage factor in [0, 1); zero at and below breakdown.
pub(crate) fn sensitivity(config: &DetectorConfig, excess: f64) -> f64 {
    if excess <= 0.0 {
        0.0
    } else {
        -(-excess / config.model.sensitivity_voltage).exp_m1()
    }
}

/// Mean number of primary photoelectrons for `energy` inside the gate window.
pub(crate) fn photoelectrons(config: &DetectorConfig, excess: f64, energy: f64) -> f64 {
    config.model.detection_efficiency * energy / photon_energy() * sensitivity(config, excess)
}

/// Poisson mean of the avalanche-triggering events in one gate.
pub(crate) fn firing_rate(
    config: &DetectorConfig,
    state: &DetectorState,
    window_energy: f64,
) -> f64 {
    let f = sensitivity(config, state.excess_voltage);
    if f == 0.0 {
        return 0.0;
    }
    let m = &config.model;
    let f0 = sensitivity(config, config.nominal_excess());
    let dark = -(-m.dark_count_probability).ln_1p();
    let light = m.detection_efficiency * window_energy / photon_energy();
    let afterpulse = m.afterpulse_coefficient * state.trapped_carriers;
    (light + afterpulse) * f + dark * f / f0
}

/// Probability that a gate fires given `pulse_energy` arriving inside the gate window.
pub fn avalanche_probability(config: &DetectorConfig, state: &DetectorState, pulse_energy: f64) -> f64 {
    -(-firing_rate(config, state, pulse_energy.max(0.0))).exp_m1()
}

/// Mean Geiger avalanche peak amplitude, V. Scales with the excess voltage and
/// grows logarithmically with the number of photoelectrons.
pub fn avalanche_amplitude(config: &DetectorConfig, state: &DetectorState, pulse_energy: f64) -> f64 {
    let v = state.excess_voltage;
    if v <= 0.0 {
        return 0.0;
    }
    let m = &config.model;
    let n = photoelectrons(config, v, pulse_energy.max(0.0));
    m.geiger_amplitude * (v / config.nominal_excess()) * (1.0 + m.geiger_photon_gain * n.ln_1p())
}

/// Relative gate-to-gate jitter of the Geiger amplitude.
pub(crate) fn geiger_jitter(config: &DetectorConfig, excess: f64) -> f64 {
    let m = &config.model;
    m.geiger_jitter + m.geiger_unstable_jitter * (-excess.max(0.0) / m.unstable_voltage).exp()
}

/// Mean linear-mode (sub-breakdown) response to `energy`, V.
pub(crate) fn linear_response(config: &DetectorConfig, energy: f64) -> f64 {
    let m = &config.model;
    m.fast_response_amplitude * -(-energy / m.fast_response_energy).exp_m1()
        + m.linear_response_slope * energy
}

/// Standard deviation of the linear-mode response, V. Grows with the depth
/// below breakdown and vanishes without light.
pub(crate) fn linear_noise(config: &DetectorConfig, excess: f64, energy: f64) -> f64 {
    let m = &config.model;
    let depth = (-excess).max(0.0);
    let rise = 1.0 / (1.0 + (-(depth - m.linear_noise_depth) / m.linear_noise_width).exp());
    let sat = -(-energy / m.fast_response_energy).exp_m1();
    (m.linear_noise_floor + m.linear_noise_excess * rise) * sat
}

/// Mean capacitive feed-through amplitude before filtering, V.
pub(crate) fn capacitive_amplitude(config: &DetectorConfig, excess: f64) -> f64 {
    let m = &config.model;
    let bias = config.breakdown_voltage + excess;
    let growth = (1.0 + m.capacitive_bias_slope * (m.reference_bias - bias)).max(0.0);
    m.capacitive_coupling * config.gate_amplitude * growth
}

/// Advance the bias network by `dt` under a constant `photocurrent`.
///
/// The excess voltage relaxes toward `nominal - R * photocurrent` with time
/// constant `R * C`; with no bias resistor it is pinned at nominal.
pub fn bias_droop_step(
    config: &DetectorConfig,
    state: &DetectorState,
    photocurrent: f64,
    dt: f64,
) -> DetectorState {
    let nominal = config.nominal_excess();
    let tau = config.recovery_time();
    let excess_voltage = if config.bias_resistor == 0.0 || tau == 0.0 {
        nominal - config.bias_resistor * photocurrent
    } else {
        let target = nominal - config.bias_resistor * photocurrent;
        target + (state.excess_voltage - target) * (-dt / tau).exp()
    };
    DetectorState {
        excess_voltage: excess_voltage.min(nominal),
        accumulated_photocurrent: photocurrent,
        trapped_carriers: state.trapped_carriers * (-dt / config.model.trap_lifetime).exp(),
    }
}
