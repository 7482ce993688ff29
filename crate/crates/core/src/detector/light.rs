use serde::{Deserialize, Serialize};

use super::config::{finite, non_negative, positive, DetectorConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Blinding,
    Trigger,
    SignalPhoton,
    /// Continuous light. Its power is `energy_per_pulse * repetition_rate`
    /// and a nonzero `pulse_count` switches it off after that many
    /// `1 / repetition_rate` intervals.
    Cw,
}

/// Periodic optical pulses at the detector input.
///
/// Pulse `m` arrives at `phase_offset + T/2 + m / repetition_rate`, with `T`
/// the gate period and time zero at the start of the first recorded gate.
/// Continuous trains (`pulse_count == 0`) also run through the warm-up gates
/// before time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTrain {
    pub repetition_rate: f64,
    pub energy_per_pulse: f64,
    #[serde(default = "default_width")]
    pub pulse_width: f64,
    #[serde(default)]
    pub phase_offset: f64,
    #[serde(default)]
    pub pulse_count: u64,
    pub kind: PulseKind,
}

pub const DEFAULT_PULSE_WIDTH: f64 = 100e-12;

fn default_width() -> f64 {
    DEFAULT_PULSE_WIDTH
}

impl PulseTrain {
    pub fn new(kind: PulseKind, repetition_rate: f64, energy_per_pulse: f64) -> Self {
        PulseTrain {
            repetition_rate,
            energy_per_pulse,
            pulse_width: DEFAULT_PULSE_WIDTH,
            phase_offset: 0.0,
            pulse_count: 0,
            kind,
        }
    }

    pub fn blinding(repetition_rate: f64, energy_per_pulse: f64) -> Self {
        Self::new(PulseKind::Blinding, repetition_rate, energy_per_pulse)
    }

    pub fn trigger(repetition_rate: f64, energy_per_pulse: f64) -> Self {
        Self::new(PulseKind::Trigger, repetition_rate, energy_per_pulse)
    }

    /// Continuous light of the given power, described on a 1 ns time base.
    pub fn cw(power: f64) -> Self {
        let rate = 1e9;
        Self::new(PulseKind::Cw, rate, power / rate)
    }

    pub fn with_phase(mut self, phase_offset: f64) -> Self {
        self.phase_offset = phase_offset;
        self
    }

    pub fn with_count(mut self, pulse_count: u64) -> Self {
        self.pulse_count = pulse_count;
        self
    }

    pub fn with_width(mut self, pulse_width: f64) -> Self {
        self.pulse_width = pulse_width;
        self
    }

    pub fn is_continuous(&self) -> bool {
        self.pulse_count == 0
    }

    /// Mean optical power, W.
    pub fn mean_power(&self) -> f64 {
        self.energy_per_pulse * self.repetition_rate
    }

    /// Peak power of one rectangular pulse, W. For cw light this is the mean power.
    pub fn peak_power(&self) -> f64 {
        match self.kind {
            PulseKind::Cw => self.mean_power(),
            _ => self.energy_per_pulse / self.pulse_width,
        }
    }

    /// Arrival time of pulse `m` for a detector with gate period `gate_period`.
    pub fn pulse_time(&self, m: i64, gate_period: f64) -> f64 {
        self.phase_offset + 0.5 * gate_period + m as f64 / self.repetition_rate
    }

    pub fn validate(&self) -> Result<()> {
        positive("repetition_rate", self.repetition_rate)?;
        non_negative("energy_per_pulse", self.energy_per_pulse)?;
        positive("pulse_width", self.pulse_width)?;
        finite("phase_offset", self.phase_offset)?;
        if self.kind != PulseKind::Cw && self.pulse_width * self.repetition_rate > 1.0 {
            return Err(Error::field(
                "pulse_width",
                "pulses overlap at this repetition rate",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Illumination {
    #[serde(default)]
    pub trains: Vec<PulseTrain>,
    /// Recorded time span, s. Must hold a whole number of gate periods.
    pub duration: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Gates simulated before recording starts so the bias droop settles.
    /// `None` picks a length from the droop time constant.
    #[serde(default)]
    pub warmup_periods: Option<usize>,
}

impl Illumination {
    pub fn new(trains: Vec<PulseTrain>, duration: f64, rng_seed: u64) -> Self {
        Illumination {
            trains,
            duration,
            rng_seed,
            warmup_periods: None,
        }
    }

    /// Illumination spanning exactly `periods` gates of `config`.
    pub fn for_periods(
        config: &DetectorConfig,
        trains: Vec<PulseTrain>,
        periods: usize,
        rng_seed: u64,
    ) -> Self {
        Self::new(trains, periods as f64 * config.gate_period(), rng_seed)
    }

    pub fn dark(config: &DetectorConfig, periods: usize, rng_seed: u64) -> Self {
        Self::for_periods(config, Vec::new(), periods, rng_seed)
    }

    pub fn with_warmup(mut self, periods: usize) -> Self {
        self.warmup_periods = Some(periods);
        self
    }

    pub fn periods(&self, config: &DetectorConfig) -> usize {
        (self.duration * config.gate_frequency).round() as usize
    }

    /// Warm-up length actually used: at least 64 gates and twelve droop time
    /// constants, rounded up to an odd count so half-rate trains keep their
    /// recorded phase.
    pub fn warmup(&self, config: &DetectorConfig) -> usize {
        self.warmup_periods.unwrap_or_else(|| {
            let settle = (12.0 * config.recovery_time() / config.gate_period()).ceil() as usize;
            settle.max(64) | 1
        })
    }

    pub fn validate(&self, config: &DetectorConfig) -> Result<()> {
        positive("duration", self.duration)?;
        let gates = self.duration * config.gate_frequency;
        if (gates - gates.round()).abs() > 1e-6 * gates.max(1.0) {
            return Err(Error::field(
                "duration",
                format!("{gates} gate periods is not a whole number"),
            ));
        }
        for t in &self.trains {
            t.validate()?;
        }
        let blinding_rates: Vec<f64> = self
            .trains
            .iter()
            .filter(|t| t.kind == PulseKind::Blinding)
            .map(|t| t.repetition_rate)
            .collect();
        let reference = if blinding_rates.is_empty() {
            vec![config.gate_frequency]
        } else {
            blinding_rates
        };
        for t in self.trains.iter().filter(|t| t.kind == PulseKind::Trigger) {
            for &r in &reference {
                let ratio = r / t.repetition_rate;
                if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 * ratio {
                    return Err(Error::field(
                        "repetition_rate",
                        format!(
                            "trigger rate {} Hz does not divide the blinding rate {} Hz",
                            t.repetition_rate, r
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_is_odd_and_covers_droop() {
        let c = DetectorConfig::default();
        let w = Illumination::dark(&c, 10, 0).warmup(&c);
        assert_eq!(w % 2, 1);
        assert!(w as f64 * c.gate_period() >= 12.0 * c.recovery_time());
        let mut r0 = c.clone();
        r0.bias_resistor = 0.0;
        assert_eq!(Illumination::dark(&r0, 10, 0).warmup(&r0), 65);
    }

    #[test]
    fn rejects_fractional_duration() {
        let c = DetectorConfig::default();
        let mut i = Illumination::dark(&c, 10, 0);
        i.duration *= 1.05;
        assert_eq!(i.validate(&c).unwrap_err().field_name(), Some("duration"));
    }

    #[test]
    fn trigger_rate_must_divide_blinding_rate() {
        let c = DetectorConfig::default();
        let ok = Illumination::for_periods(
            &c,
            vec![PulseTrain::blinding(625e6, 1e-12), PulseTrain::trigger(312.5e6, 1e-12)],
            10,
            0,
        );
        ok.validate(&c).unwrap();
        let bad = Illumination::for_periods(
            &c,
            vec![PulseTrain::blinding(625e6, 1e-12), PulseTrain::trigger(250e6 * 1.1, 1e-12)],
            10,
            0,
        );
        assert_eq!(bad.validate(&c).unwrap_err().field_name(), Some("repetition_rate"));
    }

    #[test]
    fn rejects_negative_energy() {
        let t = PulseTrain::blinding(625e6, -1e-12);
        assert_eq!(t.validate().unwrap_err().field_name(), Some("energy_per_pulse"));
    }

    #[test]
    fn cw_power_round_trips() {
        let t = PulseTrain::cw(7.22e-3);
        assert!((t.mean_power() - 7.22e-3).abs() < 1e-15);
        assert_eq!(t.peak_power(), t.mean_power());
    }
}
