use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::{sweep_point, SweepPoint};
use crate::detector::{simulate_peaks, DetectorConfig, Illumination, PulseTrain};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::units::to_pj;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCurvePoint {
    pub trigger_energy: f64,
    pub detection_probability: f64,
    pub clicks: usize,
    pub trials: usize,
}

/// Blinding train plus `periods` half-rate trigger pulses on gates
/// 1, 3, 5, ..., recorded over `2 * periods + 1` gates so every trigger gate
/// is preceded by a blinding-only gate in the SD delay line.
pub fn control_illumination(
    config: &DetectorConfig,
    blind: f64,
    trigger: f64,
    periods: usize,
    seed: u64,
) -> Illumination {
    let t = config.gate_period();
    Illumination::for_periods(
        config,
        vec![
            PulseTrain::blinding(config.gate_frequency, blind),
            PulseTrain::trigger(config.gate_frequency / 2.0, trigger)
                .with_phase(t)
                .with_count(periods as u64),
        ],
        2 * periods + 1,
        seed,
    )
}

/// Blinding-only run over the window a control measurement uses. Fails with
/// [`Error::NotBlinded`] unless the sweep criterion holds at `blind`.
pub fn check_blinded(
    config: &DetectorConfig,
    blind: f64,
    periods: usize,
    seed: u64,
) -> Result<SweepPoint> {
    let p = sweep_point(config, blind, 2 * periods, seed)?;
    if !p.blinded {
        let clicks = p
            .sd
            .per_period_peaks
            .iter()
            .filter(|&&v| v >= config.discrimination_level)
            .count();
        return Err(Error::NotBlinded {
            energy_pj: to_pj(blind),
            clicks,
        });
    }
    Ok(p)
}

/// Detection probability per trigger pulse on a detector blinded at `blind`.
/// Only trigger-bearing gates are counted.
pub fn control_curve(
    config: &DetectorConfig,
    blind: f64,
    trigger_energies: &[f64],
    periods: usize,
    seed: u64,
) -> Result<Vec<ControlCurvePoint>> {
    if periods == 0 {
        return Err(Error::field("periods", "must be >= 1"));
    }
    if trigger_energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::field("trigger_energies", "must be strictly increasing"));
    }
    if let Some(e) = trigger_energies.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::field("trigger_energies", format!("{e} must be >= 0")));
    }
    check_blinded(config, blind, periods, derive_seed(seed, u64::MAX))?;
    trigger_energies
        .par_iter()
        .enumerate()
        .map(|(i, &e)| {
            let illum = control_illumination(config, blind, e, periods, derive_seed(seed, i as u64));
            let trace = simulate_peaks(config, &illum)?;
            let (mut trials, mut clicks) = (0, 0);
            for (peak, &trig) in trace.sd.iter().zip(&trace.triggered) {
                if trig {
                    trials += 1;
                    if *peak > config.discrimination_level {
                        clicks += 1;
                    }
                }
            }
            Ok(ControlCurvePoint {
                trigger_energy: e,
                detection_probability: if trials == 0 { 0.0 } else { clicks as f64 / trials as f64 },
                clicks,
                trials,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq1Report {
    /// Largest tested trigger energy with detection probability 0.
    pub e_never: Option<f64>,
    /// Smallest tested trigger energy with detection probability 1.
    pub e_always: Option<f64>,
    /// `e_always <= 2 * e_never`.
    pub feasible: bool,
    /// Largest detection probability among energies up to `2 * e_never`.
    pub max_silent_detection: Option<f64>,
    /// Why the check failed, when it did.
    pub reason: Option<String>,
}

/// Relative slack on `2 * e_never` so grid points that are exact multiples
/// survive floating-point rounding.
const DOUBLING_SLACK: f64 = 1e-9;

/// Perfect-control check on a control curve: Eve's half-energy trigger must
/// never click while the full-energy one always does.
pub fn eq1_feasibility(curve: &[ControlCurvePoint]) -> Result<Eq1Report> {
    if curve.is_empty() {
        return Err(Error::InvalidInput("control curve is empty".into()));
    }
    if curve.windows(2).any(|w| w[1].trigger_energy <= w[0].trigger_energy) {
        return Err(Error::InvalidInput(
            "control curve must be sorted by strictly increasing trigger energy".into(),
        ));
    }
    let e_never = curve
        .iter()
        .filter(|p| p.detection_probability == 0.0)
        .map(|p| p.trigger_energy)
        .last();
    let e_always = curve
        .iter()
        .find(|p| p.detection_probability == 1.0)
        .map(|p| p.trigger_energy);
    let Some(never) = e_never else {
        return Ok(Eq1Report {
            e_never,
            e_always,
            feasible: false,
            max_silent_detection: None,
            reason: Some("no tested trigger energy has detection probability 0".into()),
        });
    };
    let bound = 2.0 * never * (1.0 + DOUBLING_SLACK);
    let max_silent_detection = curve
        .iter()
        .filter(|p| p.trigger_energy <= bound)
        .map(|p| p.detection_probability)
        .fold(0.0, f64::max);
    let (feasible, reason) = match e_always {
        None => (false, Some("no tested trigger energy has detection probability 1".into())),
        Some(a) if a <= bound => (true, None),
        Some(a) => (
            false,
            Some(format!(
                "E_always = {:.4} pJ exceeds 2 x E_never = {:.4} pJ",
                to_pj(a),
                to_pj(2.0 * never)
            )),
        ),
    };
    Ok(Eq1Report {
        e_never,
        e_always,
        feasible,
        max_silent_detection: Some(max_silent_detection),
        reason,
    })
}
