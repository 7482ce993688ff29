use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{simulate_peaks, DetectorConfig, Illumination, PulseTrain};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sd::PeakStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub energy: f64,
    pub pre_sd: PeakStats,
    pub sd: PeakStats,
    /// Every SD peak stayed below the discrimination level while the bias sat
    /// below breakdown on average. A Geiger-mode detector that merely saw no
    /// photons is not blinded.
    pub blinded: bool,
}

/// Gate-rate blinding train over `periods + 1` gates. Gate 0 only primes the
/// SD delay and is left out of the statistics.
pub fn blinding_illumination(
    config: &DetectorConfig,
    energy: f64,
    periods: usize,
    seed: u64,
) -> Illumination {
    Illumination::for_periods(
        config,
        vec![PulseTrain::blinding(config.gate_frequency, energy)],
        periods + 1,
        seed,
    )
}

pub(crate) fn sweep_point(
    config: &DetectorConfig,
    energy: f64,
    periods: usize,
    seed: u64,
) -> Result<SweepPoint> {
    let trace = simulate_peaks(config, &blinding_illumination(config, energy, periods, seed))?;
    let pre_sd = PeakStats::from_peaks(trace.pre_sd[1..].to_vec());
    let sd = PeakStats::from_peaks(trace.sd[1..].to_vec());
    let assessed = &trace.states[1..];
    let mean_excess = assessed.iter().map(|s| s.excess_voltage).sum::<f64>() / assessed.len() as f64;
    let blinded = mean_excess <= 0.0
        && sd
            .per_period_peaks
            .iter()
            .all(|&p| p < config.discrimination_level);
    Ok(SweepPoint {
        energy,
        pre_sd,
        sd,
        blinded,
    })
}

/// Peak statistics of the pre-SD and SD output for each blinding energy.
/// Points run in parallel on independent seed streams.
pub fn blinding_sweep(
    config: &DetectorConfig,
    energies: &[f64],
    periods: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if periods == 0 {
        return Err(Error::field("periods", "must be >= 1"));
    }
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::field("energies", "must be strictly increasing"));
    }
    if let Some(e) = energies.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::field("energies", format!("{e} must be >= 0")));
    }
    energies
        .par_iter()
        .enumerate()
        .map(|(i, &e)| sweep_point(config, e, periods, derive_seed(seed, i as u64)))
        .collect()
}
