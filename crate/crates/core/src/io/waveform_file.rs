//! Plain-text waveform files.
//!
//! ```text
//! # free comment lines start with '#'
//! sample_rate = 20000000000
//! gate_period_samples = 32
//! start_time = 0
//! unit = V
//! samples = 1024
//! ---
//! 1.2e-3
//! ...
//! ```
//!
//! Header keys may appear in any order, each exactly once. `unit` is `V` or
//! `mV`; samples are scaled to volts on ingest. Export always writes volts
//! in shortest round-trip scientific notation, so export then ingest is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sd::Waveform;

pub const SEPARATOR: &str = "---";

#[derive(Default)]
struct Header {
    sample_rate: Option<f64>,
    gate_period_samples: Option<usize>,
    start_time: Option<f64>,
    scale: Option<f64>,
    samples: Option<usize>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::WaveformFormat(format!("line {line}: {msg}"))
}

fn once<T>(slot: &mut Option<T>, v: T, key: &str, line: usize) -> Result<()> {
    if slot.replace(v).is_some() {
        return Err(bad(line, format!("duplicate header key `{key}`")));
    }
    Ok(())
}

pub fn parse_waveform(text: &str) -> Result<Waveform> {
    let mut h = Header::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut body_start = None;
    for (n, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == SEPARATOR {
            body_start = Some(n);
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(n, format!("expected `key = value`, found `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(n, format!("`{key}` needs a finite number, found `{v}`")))
        };
        let count = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| bad(n, format!("`{key}` needs a non-negative integer, found `{v}`")))
        };
        match key {
            "sample_rate" => once(&mut h.sample_rate, num(value)?, key, n)?,
            "gate_period_samples" => once(&mut h.gate_period_samples, count(value)?, key, n)?,
            "start_time" => once(&mut h.start_time, num(value)?, key, n)?,
            "samples" => once(&mut h.samples, count(value)?, key, n)?,
            "unit" => {
                let scale = match value {
                    "V" => 1.0,
                    "mV" => 1e-3,
                    _ => return Err(bad(n, format!("unit must be `V` or `mV`, found `{value}`"))),
                };
                once(&mut h.scale, scale, key, n)?
            }
            _ => return Err(bad(n, format!("unknown header key `{key}`"))),
        }
    }
    let body_start = body_start.ok_or_else(|| {
        Error::WaveformFormat(format!("missing `{SEPARATOR}` line after the header"))
    })?;
    let missing = |k: &str| Error::WaveformFormat(format!("header is missing `{k}`"));
    let sample_rate = h.sample_rate.ok_or_else(|| missing("sample_rate"))?;
    let period = h.gate_period_samples.ok_or_else(|| missing("gate_period_samples"))?;
    let start_time = h.start_time.ok_or_else(|| missing("start_time"))?;
    let scale = h.scale.ok_or_else(|| missing("unit"))?;
    let expected = h.samples.ok_or_else(|| missing("samples"))?;
    if sample_rate <= 0.0 {
        return Err(bad(body_start, "sample_rate must be > 0"));
    }
    if start_time < 0.0 {
        return Err(bad(body_start, "start_time must be >= 0"));
    }
    if period == 0 {
        return Err(bad(body_start, "gate_period_samples must be > 0"));
    }
    if expected % period != 0 {
        return Err(Error::WaveformFormat(format!(
            "samples = {expected} is not a multiple of gate_period_samples = {period}"
        )));
    }

    let mut samples = Vec::with_capacity(expected);
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| bad(n, format!("expected a finite sample, found `{line}`")))?;
        samples.push(if scale == 1.0 { v } else { v * scale });
    }
    if samples.len() != expected {
        return Err(Error::WaveformFormat(format!(
            "header declares {expected} samples but the file holds {}",
            samples.len()
        )));
    }
    Waveform::new(samples, sample_rate, period, start_time)
}

pub fn ingest_waveform(path: &Path) -> Result<Waveform> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_waveform(&text)
}

pub fn render_waveform(w: &Waveform) -> Result<String> {
    w.validate()?;
    let mut s = String::with_capacity(16 * w.samples.len() + 128);
    writeln!(s, "sample_rate = {:e}", w.sample_rate).unwrap();
    writeln!(s, "gate_period_samples = {}", w.gate_period_samples).unwrap();
    writeln!(s, "start_time = {:e}", w.start_time).unwrap();
    writeln!(s, "unit = V").unwrap();
    writeln!(s, "samples = {}", w.samples.len()).unwrap();
    writeln!(s, "{SEPARATOR}").unwrap();
    for v in &w.samples {
        writeln!(s, "{v:e}").unwrap();
    }
    Ok(s)
}

pub fn export_waveform(w: &Waveform, path: &Path) -> Result<()> {
    fs::write(path, render_waveform(w)?).map_err(|e| Error::io(path, e))
}
