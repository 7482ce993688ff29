use std::f64::consts::PI;

use super::config::DetectorConfig;

/// Avalanche / photocurrent pulse over one gate period, unit peak.
///
/// An alpha function `x exp(1 - x)` starting at the gate centre, with `x`
/// the time since onset in units of the rise time. Truncated at the gate end.
pub fn pulse_shape(config: &DetectorConfig) -> Vec<f64> {
    let n = config.samples_per_gate();
    let dt = 1.0 / config.sample_rate;
    let onset = n / 2;
    (0..n)
        .map(|i| {
            if i < onset {
                0.0
            } else {
                let x = (i - onset) as f64 * dt / config.model.pulse_rise_time;
                x * (1.0 - x).exp()
            }
        })
        .collect()
}

/// Capacitive gate feed-through over one gate period for unit unfiltered
/// amplitude. With the filter enabled this is the steady-state output of a
/// single-pole high-pass filter driven by the periodic feed-through.
pub fn capacitive_template(config: &DetectorConfig) -> Vec<f64> {
    let n = config.samples_per_gate();
    let centre = (n / 2) as f64;
    let raw: Vec<f64> = (0..n)
        .map(|i| (2.0 * PI * (i as f64 - centre) / n as f64).sin())
        .collect();
    if !config.filter_enabled {
        return raw;
    }
    let rc = 1.0 / (2.0 * PI * config.model.filter_cutoff);
    let dt = 1.0 / config.sample_rate;
    let alpha = rc / (rc + dt);
    let mut y = 0.0;
    let mut x_prev = raw[n - 1];
    let mut out = vec![0.0; n];
    // The transient decays by alpha per sample; 64 periods leave far less
    // than one ulp of it for any cutoff above the gate frequency.
    for _ in 0..64 {
        for (i, &x) in raw.iter().enumerate() {
            y = alpha * (y + x - x_prev);
            x_prev = x;
            out[i] = y;
        }
    }
    out
}
