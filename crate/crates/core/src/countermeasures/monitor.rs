use serde::{Deserialize, Serialize};

use crate::detector::{
    positive, simulate_peaks, DetectorConfig, DetectorState, Illumination, PulseTrain,
};
use crate::error::{Error, Result};

/// Alarm on the sliding-window mean of the APD photocurrent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotocurrentMonitor {
    /// Averaging window, s.
    pub averaging_window: f64,
    /// Alarm threshold on the window mean, A.
    pub alarm_threshold: f64,
}

impl Default for PhotocurrentMonitor {
    fn default() -> Self {
        PhotocurrentMonitor {
            averaging_window: 1e-3,
            alarm_threshold: 2e-3,
        }
    }
}

impl PhotocurrentMonitor {
    pub fn validate(&self) -> Result<()> {
        positive("averaging_window", self.averaging_window)?;
        positive("alarm_threshold", self.alarm_threshold)
    }

    /// Window length in gates, at least one.
    pub fn window_gates(&self, gate_period: f64) -> usize {
        ((self.averaging_window / gate_period).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub alarm: bool,
    /// Largest window mean seen, A.
    pub max_windowed_current: f64,
}

/// Slide the monitor window over a per-gate state trace.
pub fn monitor_photocurrent(
    trace: &[DetectorState],
    gate_period: f64,
    monitor: &PhotocurrentMonitor,
) -> Result<MonitorVerdict> {
    monitor.validate()?;
    positive("gate_period", gate_period)?;
    let w = monitor.window_gates(gate_period);
    if trace.len() < w {
        return Err(Error::InvalidInput(format!(
            "trace of {} gates is shorter than the {w}-gate averaging window",
            trace.len()
        )));
    }
    let mut prefix = Vec::with_capacity(trace.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for s in trace {
        acc += s.accumulated_photocurrent;
        prefix.push(acc);
    }
    let max_sum = (w..=trace.len())
        .map(|end| prefix[end] - prefix[end - w])
        .fold(f64::NEG_INFINITY, f64::max);
    let max_windowed_current = (max_sum / w as f64).max(0.0);
    Ok(MonitorVerdict {
        alarm: max_windowed_current > monitor.alarm_threshold,
        max_windowed_current,
    })
}

/// A duty-cycled blinding pattern that blinds during its bursts while the
/// monitor stays silent.
#[derive(Debug, Clone, PartialEq)]
pub struct BypassScenario {
    pub illumination: Illumination,
    /// Gates per burst.
    pub burst_gates: usize,
    /// Gates per burst cycle (the monitor window).
    pub cycle_gates: usize,
    /// Gate ranges over which blinding was checked.
    pub assessed: Vec<std::ops::Range<usize>>,
    pub verdict: MonitorVerdict,
}

/// Gates allowed for the bias droop to settle after a burst starts.
pub(crate) fn settle_gates(config: &DetectorConfig) -> usize {
    ((12.0 * config.recovery_time() / config.gate_period()).ceil() as usize).max(64)
}

/// Bursts of blinding pulses filling the first `burst` gates of every
/// `cycle`-gate cycle, over `cycles` cycles.
pub(crate) fn burst_illumination(
    config: &DetectorConfig,
    energy: f64,
    burst: usize,
    cycle: usize,
    cycles: usize,
    seed: u64,
) -> (Illumination, Vec<std::ops::Range<usize>>) {
    let t = config.gate_period();
    let settle = settle_gates(config);
    let trains = (0..cycles)
        .map(|c| {
            PulseTrain::blinding(config.gate_frequency, energy)
                .with_phase((c * cycle) as f64 * t)
                .with_count(burst as u64)
        })
        .collect();
    let assessed = (0..cycles)
        .map(|c| c * cycle + settle.min(burst)..c * cycle + burst)
        .collect();
    let illum = Illumination::for_periods(config, trains, cycle * cycles, seed).with_warmup(0);
    (illum, assessed)
}

/// Search for a monitor bypass with blinding pulses of `energy`.
///
/// Bursts repeat once per averaging window, so every window holds exactly
/// one burst. Starting from a burst that fills half the window, the burst is
/// halved until the window mean falls below the alarm threshold, as long as
/// a burst still outlasts the droop settling time. Two cycles are simulated
/// and blinding is required in every settled burst gate.
pub fn find_monitor_bypass(
    config: &DetectorConfig,
    monitor: &PhotocurrentMonitor,
    energy: f64,
    seed: u64,
) -> Result<Option<BypassScenario>> {
    monitor.validate()?;
    let cycle = monitor.window_gates(config.gate_period());
    let settle = settle_gates(config);
    let mut burst = cycle / 2;
    while burst > 2 * settle {
        let (illum, assessed) = burst_illumination(config, energy, burst, cycle, 2, seed);
        let trace = simulate_peaks(config, &illum)?;
        let verdict = monitor_photocurrent(&trace.states, config.gate_period(), monitor)?;
        if !verdict.alarm {
            let blinded = assessed
                .iter()
                .all(|r| trace.sd[r.clone()].iter().all(|&p| p < config.discrimination_level));
            return Ok(blinded.then_some(BypassScenario {
                illumination: illum,
                burst_gates: burst,
                cycle_gates: cycle,
                assessed,
                verdict,
            }));
        }
        burst /= 2;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(i: f64) -> DetectorState {
        DetectorState {
            excess_voltage: 0.0,
            accumulated_photocurrent: i,
            trapped_carriers: 0.0,
        }
    }

    #[test]
    fn window_mean_and_alarm() {
        let m = PhotocurrentMonitor {
            averaging_window: 4.0,
            alarm_threshold: 0.5,
        };
        let trace: Vec<_> = [0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0].iter().map(|&i| state(i)).collect();
        let v = monitor_photocurrent(&trace, 1.0, &m).unwrap();
        assert!((v.max_windowed_current - 0.75).abs() < 1e-12);
        assert!(v.alarm);
    }

    #[test]
    fn short_trace_is_rejected() {
        let m = PhotocurrentMonitor {
            averaging_window: 10.0,
            alarm_threshold: 0.5,
        };
        assert!(monitor_photocurrent(&[state(0.0); 3], 1.0, &m).is_err());
    }
}
