//! Software self-differencing and per-period peak statistics.

use serde::{Deserialize, Serialize};

use crate::detector::{simulate_peaks, DetectorConfig, Illumination};
use crate::error::{Error, Result};

pub const MIN_GATE_SAMPLES: usize = 16;

/// Uniformly sampled voltage trace made of whole gate periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub gate_period_samples: usize,
    pub start_time: f64,
}

impl Waveform {
    pub fn new(
        samples: Vec<f64>,
        sample_rate: f64,
        gate_period_samples: usize,
        start_time: f64,
    ) -> Result<Self> {
        let w = Waveform {
            samples,
            sample_rate,
            gate_period_samples,
            start_time,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::field("sample_rate", "must be finite and > 0"));
        }
        if !self.start_time.is_finite() {
            return Err(Error::field("start_time", "must be finite"));
        }
        if self.gate_period_samples < MIN_GATE_SAMPLES {
            return Err(Error::field(
                "gate_period_samples",
                format!(
                    "{} is below the minimum of {MIN_GATE_SAMPLES}",
                    self.gate_period_samples
                ),
            ));
        }
        if self.samples.len() % self.gate_period_samples != 0 {
            return Err(Error::field(
                "gate_period_samples",
                format!(
                    "{} samples is not a multiple of {}",
                    self.samples.len(),
                    self.gate_period_samples
                ),
            ));
        }
        Ok(())
    }

    pub fn period_count(&self) -> usize {
        self.samples.len() / self.gate_period_samples
    }

    pub fn periods(&self) -> std::slice::Chunks<'_, f64> {
        self.samples.chunks(self.gate_period_samples)
    }
}

/// Subtract the trace delayed by one gate period: `y[i] = x[i] - x[i - N]`,
/// with zeros before the start.
pub fn sd_transform(w: &Waveform) -> Result<Waveform> {
    w.validate()?;
    let n = w.gate_period_samples;
    let x = &w.samples;
    let samples = (0..x.len())
        .map(|i| if i < n { x[i] } else { x[i] - x[i - n] })
        .collect();
    Ok(Waveform {
        samples,
        ..w.clone()
    })
}

/// Per-period maximum sample with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakStats {
    pub per_period_peaks: Vec<f64>,
    pub mean_peak: f64,
    pub std_peak: f64,
    pub period_count: usize,
}

impl PeakStats {
    pub fn from_peaks(per_period_peaks: Vec<f64>) -> Self {
        let n = per_period_peaks.len();
        let (mean_peak, std_peak) = if n == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let mean = per_period_peaks.iter().sum::<f64>() / n as f64;
            let var = per_period_peaks
                .iter()
                .map(|p| (p - mean) * (p - mean))
                .sum::<f64>()
                / n as f64;
            (mean, var.sqrt())
        };
        PeakStats {
            per_period_peaks,
            mean_peak,
            std_peak,
            period_count: n,
        }
    }

    pub fn max_peak(&self) -> f64 {
        self.per_period_peaks
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Statistics over every period of `w`.
pub fn peak_stats(w: &Waveform) -> Result<PeakStats> {
    peak_stats_skip(w, 0)
}

/// Statistics over the periods of `w` after the first `skip`.
///
/// SD output is normally summarised with `skip = 1`: period 0 subtracts
/// zero padding and carries the raw pre-SD signal.
pub fn peak_stats_skip(w: &Waveform, skip: usize) -> Result<PeakStats> {
    w.validate()?;
    let peaks = w
        .periods()
        .skip(skip)
        .map(|p| p.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(PeakStats::from_peaks(peaks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clicks {
    pub count: usize,
    pub rate: f64,
}

/// Periods whose peak is strictly above `threshold`.
pub fn count_clicks(stats: &PeakStats, threshold: f64) -> Result<Clicks> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::field("threshold", format!("{threshold} must be > 0")));
    }
    let count = stats
        .per_period_peaks
        .iter()
        .filter(|&&p| p > threshold)
        .count();
    let rate = if stats.period_count == 0 {
        0.0
    } else {
        count as f64 / stats.period_count as f64
    };
    Ok(Clicks { count, rate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkRatePoint {
    pub level: f64,
    pub dark_rate: f64,
    pub clicks: usize,
}

/// Click probability per gate without light, as a function of the
/// discrimination level. A single dark run of `periods` gates is counted at
/// every level, so the curve is non-increasing by construction.
pub fn dark_count_scan(
    config: &DetectorConfig,
    levels: &[f64],
    periods: usize,
    seed: u64,
) -> Result<Vec<DarkRatePoint>> {
    if periods == 0 {
        return Err(Error::field("periods", "must be >= 1"));
    }
    if levels.is_empty() {
        return Err(Error::field("levels", "must not be empty"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::field("levels", "must be strictly increasing"));
    }
    if levels[0] <= 0.0 {
        return Err(Error::field("levels", "must be > 0"));
    }
    let illum = Illumination::dark(config, periods + 1, seed);
    let trace = simulate_peaks(config, &illum)?;
    let mut peaks = trace.sd[1..].to_vec();
    peaks.sort_by(f64::total_cmp);
    Ok(levels
        .iter()
        .map(|&level| {
            let below = peaks.partition_point(|&p| p <= level);
            let clicks = peaks.len() - below;
            DarkRatePoint {
                level,
                dark_rate: clicks as f64 / periods as f64,
                clicks,
            }
        })
        .collect())
}

/// Crossover level between the two regimes of a dark-count curve.
///
/// Fits `ln(rate)` with a straight line on the low-level side and a constant
/// plateau on the high-level side, choosing the split with the least squared
/// error. Returns the level where the line meets the plateau. Zero-rate
/// points carry no information on a log scale and are ignored.
pub fn dark_count_kink(curve: &[DarkRatePoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|p| p.dark_rate > 0.0)
        .map(|p| (p.level, p.dark_rate.ln()))
        .collect();
    if pts.len() < 5 {
        return None;
    }
    let mut best: Option<(f64, f64)> = None;
    for split in 2..pts.len() - 1 {
        let (left, right) = pts.split_at(split);
        let (slope, intercept, sse_l) = line_fit(left);
        let plateau = right.iter().map(|p| p.1).sum::<f64>() / right.len() as f64;
        let sse_r: f64 = right.iter().map(|p| (p.1 - plateau).powi(2)).sum();
        if slope >= 0.0 {
            continue;
        }
        let sse = sse_l + sse_r;
        let kink = (plateau - intercept) / slope;
        if best.is_none_or(|(b, _)| sse < b) {
            best = Some((sse, kink));
        }
    }
    best.map(|(_, k)| k)
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    (slope, intercept, sse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wf(samples: Vec<f64>, n: usize) -> Waveform {
        Waveform::new(samples, 20e9, n, 0.0).unwrap()
    }

    #[test]
    fn impulse_response() {
        let mut x = vec![0.0; 64];
        x[5] = 1.0;
        let y = sd_transform(&wf(x, 16)).unwrap().samples;
        assert_eq!(y[5], 1.0);
        assert_eq!(y[21], -1.0);
        assert_eq!(y.iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn constant_waveform_stats() {
        let s = peak_stats(&wf(vec![0.3; 48], 16)).unwrap();
        assert_eq!(s.mean_peak, 0.3);
        assert_eq!(s.std_peak, 0.0);
        assert_eq!(s.period_count, 3);
    }

    #[test]
    fn rejects_ragged_length() {
        let w = Waveform {
            samples: vec![0.0; 40],
            sample_rate: 1.0,
            gate_period_samples: 16,
            start_time: 0.0,
        };
        assert_eq!(sd_transform(&w).unwrap_err().field_name(), Some("gate_period_samples"));
    }

    #[test]
    fn clicks_mixed() {
        let s = PeakStats::from_peaks(vec![0.010, 0.030, 0.040]);
        let c = count_clicks(&s, 0.025).unwrap();
        assert_eq!(c.count, 2);
        assert!((c.rate - 2.0 / 3.0).abs() < 1e-15);
        assert!(count_clicks(&s, 0.0).is_err());
    }

    #[test]
    fn kink_of_synthetic_curve() {
        // Exponential fall meeting a flat plateau at 6 mV.
        let curve: Vec<DarkRatePoint> = (1..=20)
            .map(|i| {
                let level = i as f64 * 1e-3;
                let rate = if level < 6e-3 {
                    1e-3 * (-(level - 6e-3) * 2000.0).exp()
                } else {
                    1e-3
                };
                DarkRatePoint { level, dark_rate: rate, clicks: 0 }
            })
            .collect();
        let k = dark_count_kink(&curve).unwrap();
        assert!((k - 6e-3).abs() < 1e-9, "{k}");
    }
}
