use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{simulate_peaks, DetectorConfig, Illumination};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sd::PeakStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitivePoint {
    /// DC bias reduction below the configured bias, V.
    pub reduction: f64,
    pub pre_sd: PeakStats,
}

/// Dark pre-SD peak statistics with the DC bias lowered by each reduction.
pub fn capacitive_response_vs_bias(
    config: &DetectorConfig,
    bias_reductions: &[f64],
    periods: usize,
    seed: u64,
) -> Result<Vec<CapacitivePoint>> {
    if periods == 0 {
        return Err(Error::field("periods", "must be >= 1"));
    }
    if let Some(r) = bias_reductions.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::field("bias_reductions", format!("{r} must be >= 0")));
    }
    bias_reductions
        .par_iter()
        .enumerate()
        .map(|(i, &reduction)| {
            let mut c = config.clone();
            c.dc_bias -= reduction;
            let trace = simulate_peaks(&c, &Illumination::dark(&c, periods, derive_seed(seed, i as u64)))
                .map_err(|e| match e {
                    Error::InvalidField { field, reason } if field == "dc_bias" => Error::field(
                        "bias_reductions",
                        format!("reduction {reduction} V: {reason}"),
                    ),
                    e => e,
                })?;
            Ok(CapacitivePoint {
                reduction,
                pre_sd: PeakStats::from_peaks(trace.pre_sd),
            })
        })
        .collect()
}
