use rand::Rng;
use serde::{Deserialize, Serialize};

use super::control::{check_blinded, control_curve};
use super::AttackParams;
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::units::transmittance_from_db;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bb84SessionResult {
    pub sifted_key_length: usize,
    /// Error fraction of the sifted key; `None` when nothing was sifted.
    pub qber: Option<f64>,
    /// Fraction of sifted bits that equal Eve's bit.
    pub eve_information: f64,
    /// Rounds in which Bob registered at least one click.
    pub detection_rate_at_bob: f64,
    pub errors: usize,
    pub double_clicks: usize,
}

/// Click probability of one blinded detector per received trigger energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickProbabilities {
    /// Full trigger energy (Eve's basis matches Bob's).
    pub full: f64,
    /// Half trigger energy (bases differ).
    pub half: f64,
    /// Blinding light only.
    pub none: f64,
}

impl ClickProbabilities {
    fn validate(&self) -> Result<()> {
        for (name, p) in [("full", self.full), ("half", self.half), ("none", self.none)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::field(name, format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Trigger energy reaching each of Bob's detectors, indexed `2 * basis + bit`.
///
/// Eve resends bit `eve_bit` in `eve_basis`. If Bob measures in the same basis
/// the whole trigger lands on the matching detector; otherwise it splits
/// evenly over both detectors of Bob's basis. The other basis is dark.
pub fn detector_energies(eve_basis: usize, eve_bit: usize, bob_basis: usize, trigger: f64) -> [f64; 4] {
    let mut e = [0.0; 4];
    if eve_basis == bob_basis {
        e[2 * bob_basis + eve_bit] = trigger;
    } else {
        e[2 * bob_basis] = 0.5 * trigger;
        e[2 * bob_basis + 1] = 0.5 * trigger;
    }
    e
}

/// Read the three click probabilities off a simulated control curve.
pub fn fake_state_click_probabilities(
    config: &DetectorConfig,
    params: &AttackParams,
    seed: u64,
) -> Result<ClickProbabilities> {
    params.validate()?;
    let ratio = config.gate_frequency / params.trigger_rate;
    if (ratio - 2.0).abs() > 1e-9 {
        return Err(Error::field(
            "trigger_rate",
            "the control measurement uses triggers at half the gate frequency",
        ));
    }
    let e = params.trigger_energy;
    if e == 0.0 {
        check_blinded(config, params.blinding_energy, params.periods, derive_seed(seed, u64::MAX))?;
        let curve = control_curve(config, params.blinding_energy, &[0.0], params.periods, seed)?;
        let p = curve[0].detection_probability;
        return Ok(ClickProbabilities { full: p, half: p, none: p });
    }
    let curve = control_curve(
        config,
        params.blinding_energy,
        &[0.0, 0.5 * e, e],
        params.periods,
        seed,
    )?;
    Ok(ClickProbabilities {
        none: curve[0].detection_probability,
        half: curve[1].detection_probability,
        full: curve[2].detection_probability,
    })
}

/// Intercept-resend fake-state attack on BB84 with Bob's detectors blinded.
pub fn run_bb84_fake_state(
    config: &DetectorConfig,
    params: &AttackParams,
    n_qubits: usize,
    seed: u64,
    channel_loss_db: f64,
) -> Result<Bb84SessionResult> {
    let probs = fake_state_click_probabilities(config, params, derive_seed(seed, 0))?;
    run_bb84_with_probabilities(&probs, n_qubits, derive_seed(seed, 1), channel_loss_db)
}

/// Session driven by given per-detector click probabilities.
pub fn run_bb84_with_probabilities(
    probs: &ClickProbabilities,
    n_qubits: usize,
    seed: u64,
    channel_loss_db: f64,
) -> Result<Bb84SessionResult> {
    if n_qubits == 0 {
        return Err(Error::field("n_qubits", "must be >= 1"));
    }
    if !(channel_loss_db.is_finite() && channel_loss_db >= 0.0) {
        return Err(Error::field("channel_loss_db", "must be finite and >= 0"));
    }
    probs.validate()?;
    let transmittance = transmittance_from_db(channel_loss_db);
    let mut rng = rng_for(seed, 0);
    let (mut sifted, mut errors, mut known, mut detected, mut doubles) = (0, 0, 0, 0, 0);
    for _ in 0..n_qubits {
        let alice_basis = rng.random_range(0..2usize);
        let alice_bit = rng.random_range(0..2usize);
        let eve_basis = rng.random_range(0..2usize);
        let eve_bit = if eve_basis == alice_basis {
            alice_bit
        } else {
            rng.random_range(0..2usize)
        };
        let bob_basis = rng.random_range(0..2usize);
        let arrived = rng.random::<f64>() < transmittance;
        let trigger = if arrived { 1.0 } else { 0.0 };
        let energies = detector_energies(eve_basis, eve_bit, bob_basis, trigger);
        let mut click = [false; 2];
        for (bit, c) in click.iter_mut().enumerate() {
            let p = match energies[2 * bob_basis + bit] {
                x if x == 1.0 => probs.full,
                x if x == 0.5 => probs.half,
                _ => probs.none,
            };
            *c = rng.random::<f64>() < p;
        }
        let bob_bit = match click {
            [false, false] => continue,
            [true, false] => 0,
            [false, true] => 1,
            [true, true] => {
                doubles += 1;
                rng.random_range(0..2usize)
            }
        };
        detected += 1;
        if bob_basis != alice_basis {
            continue;
        }
        sifted += 1;
        if bob_bit != alice_bit {
            errors += 1;
        }
        if bob_bit == eve_bit {
            known += 1;
        }
    }
    Ok(Bb84SessionResult {
        sifted_key_length: sifted,
        qber: (sifted > 0).then(|| errors as f64 / sifted as f64),
        eve_information: if sifted > 0 { known as f64 / sifted as f64 } else { 0.0 },
        detection_rate_at_bob: detected as f64 / n_qubits as f64,
        errors,
        double_clicks: doubles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatch_splits_energy() {
        for eb in 0..2 {
            for bit in 0..2 {
                for bb in 0..2 {
                    let e = detector_energies(eb, bit, bb, 8.0);
                    assert_eq!(e.iter().sum::<f64>(), 8.0);
                    if eb != bb {
                        assert_eq!(e[2 * bb], 4.0);
                        assert_eq!(e[2 * bb + 1], 4.0);
                    } else {
                        assert_eq!(e[2 * bb + bit], 8.0);
                    }
                }
            }
        }
    }

    #[test]
    fn perfect_control_is_error_free() {
        let p = ClickProbabilities { full: 1.0, half: 0.0, none: 0.0 };
        let r = run_bb84_with_probabilities(&p, 20_000, 3, 0.0).unwrap();
        assert_eq!(r.qber, Some(0.0));
        assert_eq!(r.eve_information, 1.0);
        assert!((r.detection_rate_at_bob - 0.5).abs() < 0.02);
    }

    #[test]
    fn no_clicks_means_no_data() {
        let p = ClickProbabilities { full: 0.0, half: 0.0, none: 0.0 };
        let r = run_bb84_with_probabilities(&p, 1000, 3, 0.0).unwrap();
        assert_eq!(r.qber, None);
        assert_eq!(r.sifted_key_length, 0);
    }
}
