use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::calibration;

/// Phenomenological model constants. None of these come from a datasheet;
/// they are pinned by the shipped calibration file so the simulated detector
/// reproduces the measured blinding, control and dark-count behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConstants {
    /// Single-photon detection efficiency inside the gate window.
    pub detection_efficiency: f64,
    /// Voltage scale of the saturating excess-voltage factor, V.
    pub sensitivity_voltage: f64,
    /// RMS width of the gate's sensitive window, s.
    pub gate_window: f64,
    /// Dark-count probability per gate at nominal excess voltage.
    pub dark_count_probability: f64,

    /// Geiger avalanche output amplitude for one photoelectron at nominal excess voltage, V.
    pub geiger_amplitude: f64,
    /// Logarithmic amplitude growth with the number of photoelectrons.
    pub geiger_photon_gain: f64,
    /// Relative gate-to-gate avalanche amplitude jitter well above breakdown.
    pub geiger_jitter: f64,
    /// Additional relative jitter that appears as the excess voltage collapses.
    pub geiger_unstable_jitter: f64,
    /// Excess-voltage scale over which the additional jitter fades, V.
    pub unstable_voltage: f64,
    /// Charge per volt of Geiger output amplitude delivered to the bias network, C/V.
    pub avalanche_charge_per_volt: f64,

    /// Amplitude of the fast-saturating part of the linear-mode response, V.
    pub fast_response_amplitude: f64,
    /// Saturation energy of the fast part, J.
    pub fast_response_energy: f64,
    /// Slope of the unsaturated part of the linear-mode response, V/J.
    pub linear_response_slope: f64,
    /// Linear-mode amplitude noise close to breakdown, V.
    pub linear_noise_floor: f64,
    /// Extra linear-mode noise reached deep below breakdown, V.
    pub linear_noise_excess: f64,
    /// Depth below breakdown at which half the extra noise is present, V.
    pub linear_noise_depth: f64,
    /// Width of the depth transition, V.
    pub linear_noise_width: f64,
    /// Photocurrent per optical power reaching the bias network, A/W.
    pub responsivity: f64,

    /// Unfiltered capacitive feed-through per volt of gate amplitude.
    pub capacitive_coupling: f64,
    /// Relative growth of the feed-through per volt of reverse-bias reduction, 1/V.
    pub capacitive_bias_slope: f64,
    /// Gate-to-gate jitter of the feed-through amplitude, relative to its
    /// value at the reference bias.
    pub capacitive_jitter: f64,
    /// Reverse bias at which `capacitive_coupling` is specified, V.
    pub reference_bias: f64,
    /// Cutoff of the single-pole high-pass filter on the feed-through, Hz.
    pub filter_cutoff: f64,

    /// Relative pulse-to-pulse energy jitter of the blinding laser.
    pub blinding_energy_jitter: f64,
    /// Relative pulse-to-pulse energy jitter of the trigger laser.
    pub trigger_energy_jitter: f64,
    /// Rise time of the avalanche / photocurrent pulse shape, s.
    pub pulse_rise_time: f64,

    /// Afterpulse rate per unit of trapped carriers (0 disables afterpulsing).
    pub afterpulse_coefficient: f64,
    /// Detrapping lifetime, s.
    pub trap_lifetime: f64,
}

impl Default for ModelConstants {
    fn default() -> Self {
        calibration::shipped().model.clone()
    }
}

/// Complete description of the simulated detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// DC reverse bias, V.
    pub dc_bias: f64,
    pub breakdown_voltage: f64,
    /// Gate repetition frequency, Hz.
    pub gate_frequency: f64,
    /// Gate swing, V. Scales the capacitive feed-through.
    pub gate_amplitude: f64,
    /// Series bias resistor, Ω.
    pub bias_resistor: f64,
    /// Capacitance seen by the bias network, F. Sets the droop recovery time.
    pub apd_capacitance: f64,
    /// Operating temperature, °C. Informational only.
    pub temperature: f64,
    pub filter_enabled: bool,
    /// SD output threshold for a click, V.
    pub discrimination_level: f64,
    /// Samples per second of produced waveforms.
    pub sample_rate: f64,
    pub model: ModelConstants,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let cal = calibration::shipped();
        DetectorConfig {
            dc_bias: 64.2,
            breakdown_voltage: cal.breakdown_voltage,
            gate_frequency: 625e6,
            gate_amplitude: cal.gate_amplitude,
            bias_resistor: 1000.0,
            apd_capacitance: cal.apd_capacitance,
            temperature: -40.0,
            filter_enabled: true,
            discrimination_level: 0.025,
            sample_rate: 32.0 * 625e6,
            model: cal.model.clone(),
        }
    }
}

impl DetectorConfig {
    /// Copy of this configuration with every noise source switched off:
    /// no dark counts, no amplitude or energy jitter.
    pub fn noiseless(&self) -> Self {
        let mut c = self.clone();
        let m = &mut c.model;
        m.dark_count_probability = 0.0;
        m.geiger_jitter = 0.0;
        m.geiger_unstable_jitter = 0.0;
        m.linear_noise_floor = 0.0;
        m.linear_noise_excess = 0.0;
        m.capacitive_jitter = 0.0;
        m.blinding_energy_jitter = 0.0;
        m.trigger_energy_jitter = 0.0;
        m.afterpulse_coefficient = 0.0;
        c
    }

    pub fn gate_period(&self) -> f64 {
        1.0 / self.gate_frequency
    }

    /// Excess voltage with no photocurrent flowing, V.
    pub fn nominal_excess(&self) -> f64 {
        self.dc_bias - self.breakdown_voltage
    }

    /// Droop recovery time constant R·C, s.
    pub fn recovery_time(&self) -> f64 {
        self.bias_resistor * self.apd_capacitance
    }

    /// Samples per gate period; only valid after [`validate`](Self::validate).
    pub fn samples_per_gate(&self) -> usize {
        (self.sample_rate / self.gate_frequency).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        positive("gate_frequency", self.gate_frequency)?;
        positive("sample_rate", self.sample_rate)?;
        positive("discrimination_level", self.discrimination_level)?;
        finite("dc_bias", self.dc_bias)?;
        finite("breakdown_voltage", self.breakdown_voltage)?;
        non_negative("gate_amplitude", self.gate_amplitude)?;
        non_negative("apd_capacitance", self.apd_capacitance)?;
        // Zero is the "bias resistor removed" countermeasure.
        non_negative("bias_resistor", self.bias_resistor)?;
        if self.bias_resistor > 0.0 {
            positive("apd_capacitance", self.apd_capacitance)?;
        }
        if self.dc_bias <= self.breakdown_voltage {
            return Err(Error::field(
                "dc_bias",
                format!(
                    "{} V is not above the breakdown voltage {} V",
                    self.dc_bias, self.breakdown_voltage
                ),
            ));
        }
        let ratio = self.sample_rate / self.gate_frequency;
        if ratio < 16.0 - 1e-9 {
            return Err(Error::field(
                "sample_rate",
                format!("{ratio:.3} samples per gate period, need at least 16"),
            ));
        }
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(Error::field(
                "sample_rate",
                format!("{ratio} samples per gate period is not an integer"),
            ));
        }
        self.model.validate()
    }
}

impl ModelConstants {
    pub fn validate(&self) -> Result<()> {
        let m = self;
        for (name, v) in [
            ("detection_efficiency", m.detection_efficiency),
            ("sensitivity_voltage", m.sensitivity_voltage),
            ("gate_window", m.gate_window),
            ("fast_response_energy", m.fast_response_energy),
            ("linear_noise_width", m.linear_noise_width),
            ("filter_cutoff", m.filter_cutoff),
            ("pulse_rise_time", m.pulse_rise_time),
            ("trap_lifetime", m.trap_lifetime),
            ("unstable_voltage", m.unstable_voltage),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [
            ("geiger_amplitude", m.geiger_amplitude),
            ("geiger_photon_gain", m.geiger_photon_gain),
            ("geiger_jitter", m.geiger_jitter),
            ("geiger_unstable_jitter", m.geiger_unstable_jitter),
            ("avalanche_charge_per_volt", m.avalanche_charge_per_volt),
            ("fast_response_amplitude", m.fast_response_amplitude),
            ("linear_response_slope", m.linear_response_slope),
            ("linear_noise_floor", m.linear_noise_floor),
            ("linear_noise_excess", m.linear_noise_excess),
            ("linear_noise_depth", m.linear_noise_depth),
            ("responsivity", m.responsivity),
            ("capacitive_coupling", m.capacitive_coupling),
            ("capacitive_bias_slope", m.capacitive_bias_slope),
            ("capacitive_jitter", m.capacitive_jitter),
            ("reference_bias", m.reference_bias),
            ("blinding_energy_jitter", m.blinding_energy_jitter),
            ("trigger_energy_jitter", m.trigger_energy_jitter),
            ("afterpulse_coefficient", m.afterpulse_coefficient),
        ] {
            non_negative(name, v)?;
        }
        if !(0.0..1.0).contains(&m.dark_count_probability) {
            return Err(Error::field(
                "dark_count_probability",
                "must lie in [0, 1)",
            ));
        }
        if m.detection_efficiency > 1.0 {
            return Err(Error::field("detection_efficiency", "must not exceed 1"));
        }
        Ok(())
    }
}

pub(crate) fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::field(name, format!("{v} is not finite")))
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::field(name, format!("{v} must be > 0")))
    }
}

pub(crate) fn non_negative(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::field(name, format!("{v} must be >= 0")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = DetectorConfig::default();
        c.validate().unwrap();
        assert_eq!(c.samples_per_gate(), 32);
        assert!((c.gate_period() - 1.6e-9).abs() < 1e-21);
        assert_eq!(c.dc_bias, 64.2);
        assert_eq!(c.bias_resistor, 1000.0);
        assert_eq!(c.discrimination_level, 0.025);
    }

    #[test]
    fn rejects_bias_below_breakdown() {
        let mut c = DetectorConfig::default();
        c.dc_bias = c.breakdown_voltage - 1.0;
        assert_eq!(c.validate().unwrap_err().field_name(), Some("dc_bias"));
    }

    #[test]
    fn rejects_coarse_sampling() {
        let mut c = DetectorConfig::default();
        c.sample_rate = 8.0 * c.gate_frequency;
        assert_eq!(c.validate().unwrap_err().field_name(), Some("sample_rate"));
        c.sample_rate = 20.5 * c.gate_frequency;
        assert_eq!(c.validate().unwrap_err().field_name(), Some("sample_rate"));
    }

    #[test]
    fn zero_bias_resistor_is_allowed() {
        let mut c = DetectorConfig::default();
        c.bias_resistor = 0.0;
        c.validate().unwrap();
        assert_eq!(c.recovery_time(), 0.0);
    }

    #[test]
    fn noiseless_clears_noise_sources() {
        let c = DetectorConfig::default().noiseless();
        assert_eq!(c.model.dark_count_probability, 0.0);
        assert_eq!(c.model.capacitive_jitter, 0.0);
        c.validate().unwrap();
    }
}
