//! Blinding sweeps, trigger control and the fake-state session.

mod bb84;
mod control;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::detector::{non_negative, positive};
use crate::error::{Error, Result};

pub use bb84::{
    detector_energies, fake_state_click_probabilities, run_bb84_fake_state,
    run_bb84_with_probabilities, Bb84SessionResult, ClickProbabilities,
};
pub use control::{
    check_blinded, control_curve, control_illumination, eq1_feasibility, ControlCurvePoint,
    Eq1Report,
};
pub use sweep::{blinding_illumination, blinding_sweep, SweepPoint};

/// Eve's light: a blinding train with trigger pulses on every other gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackParams {
    /// Energy per blinding pulse, J.
    pub blinding_energy: f64,
    /// Energy per trigger pulse, J.
    pub trigger_energy: f64,
    /// Trigger repetition rate, Hz. Must divide the gate frequency.
    pub trigger_rate: f64,
    /// Trigger pulses used to estimate each click probability.
    pub periods: usize,
}

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        non_negative("blinding_energy", self.blinding_energy)?;
        non_negative("trigger_energy", self.trigger_energy)?;
        positive("trigger_rate", self.trigger_rate)?;
        if self.periods == 0 {
            return Err(Error::field("periods", "must be >= 1"));
        }
        Ok(())
    }
}
