use std::collections::HashMap;
use std::path::{Path, PathBuf};

use sdapd::detector::{simulate_response, DetectorConfig, Illumination, PulseTrain};
use sdapd::io::waveform_file::{parse_waveform, render_waveform};
use sdapd::io::{export_waveform, ingest_waveform};
use sdapd::sd::{count_clicks, peak_stats_skip, sd_transform};
use sdapd::Error;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn simulated() -> sdapd::sd::Waveform {
    let c = DetectorConfig::default();
    let illum = Illumination::for_periods(&c, vec![PulseTrain::blinding(c.gate_frequency, 3e-12)], 40, 11);
    simulate_response(&c, &illum).unwrap().waveform
}

#[test]
fn export_then_ingest_is_bit_identical() {
    let w = simulated();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.wfm");
    export_waveform(&w, &path).unwrap();
    let back = ingest_waveform(&path).unwrap();
    assert_eq!(back.gate_period_samples, w.gate_period_samples);
    assert_eq!(back.sample_rate.to_bits(), w.sample_rate.to_bits());
    assert_eq!(back.start_time.to_bits(), w.start_time.to_bits());
    assert_eq!(back.samples.len(), w.samples.len());
    assert!(back.samples.iter().zip(&w.samples).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn truncated_file_reports_record_count() {
    let text = render_waveform(&simulated()).unwrap();
    let kept: Vec<&str> = text.lines().collect();
    let truncated = kept[..kept.len() - 5].join("\n");
    match parse_waveform(&truncated) {
        Err(Error::WaveformFormat(msg)) => {
            assert!(msg.contains("declares 1280 samples but the file holds 1275"), "{msg}")
        }
        other => panic!("expected a record-count error, got {other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = ingest_waveform(Path::new("/nonexistent/capture.wfm")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(!err.is_validation());
}

fn expected() -> HashMap<String, f64> {
    std::fs::read_to_string(data("capture_n32.expected"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.trim().to_string(), v.trim().parse().unwrap())
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1e-3)
}

#[test]
fn external_capture_runs_through_the_pipeline() {
    let w = ingest_waveform(&data("capture_n32.wfm")).unwrap();
    let ex = expected();
    assert_eq!(w.gate_period_samples, 32);
    let pre = peak_stats_skip(&w, 1).unwrap();
    let sd = peak_stats_skip(&sd_transform(&w).unwrap(), 1).unwrap();
    assert_eq!(sd.period_count as f64, ex["periods"]);
    assert!(close(pre.mean_peak, ex["pre_sd_mean_v"]), "{}", pre.mean_peak);
    assert!(close(pre.std_peak, ex["pre_sd_std_v"]), "{}", pre.std_peak);
    assert!(close(sd.mean_peak, ex["sd_mean_v"]), "{}", sd.mean_peak);
    assert!(close(sd.std_peak, ex["sd_std_v"]), "{}", sd.std_peak);
    assert!(close(sd.max_peak(), ex["sd_max_v"]), "{}", sd.max_peak());
    assert_eq!(count_clicks(&sd, 0.025).unwrap().count as f64, ex["clicks_at_25mv"]);
}
