//! Calibration files: flat `name = number` lines in SI units.
//!
//! The format is a subset of TOML, so comments start with `#` and numbers
//! accept exponents. Every model constant must be present exactly once.

use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::detector::{DetectorConfig, ModelConstants};
use crate::error::{Error, Result};

/// Constants pinned by a calibration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub breakdown_voltage: f64,
    pub gate_amplitude: f64,
    pub apd_capacitance: f64,
    pub model: ModelConstants,
}

impl Calibration {
    /// `config` with the calibrated device constants and model swapped in.
    pub fn apply(&self, config: &DetectorConfig) -> DetectorConfig {
        DetectorConfig {
            breakdown_voltage: self.breakdown_voltage,
            gate_amplitude: self.gate_amplitude,
            apd_capacitance: self.apd_capacitance,
            model: self.model.clone(),
            ..config.clone()
        }
    }
}

pub const SHIPPED: &str = include_str!("../../calibration/default.cal");

/// The calibration compiled into the binary.
pub fn shipped() -> &'static Calibration {
    static CAL: OnceLock<Calibration> = OnceLock::new();
    CAL.get_or_init(|| {
        parse_calibration(SHIPPED, Path::new("calibration/default.cal"))
            .expect("shipped calibration is valid")
    })
}

pub fn load_calibration(path: &Path) -> Result<Calibration> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(&text, path)
}

pub fn parse_calibration(text: &str, path: &Path) -> Result<Calibration> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| super::parse_error(path, text, &e))?;
    for (key, value) in &table {
        let ok = match value {
            toml::Value::Float(v) => v.is_finite(),
            toml::Value::Integer(_) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::field(key.as_str(), "expected a finite number"));
        }
    }
    let mut take = |name: &str| -> Result<f64> {
        match table.remove(name) {
            Some(v) => Ok(as_f64(&v)),
            None => Err(Error::field(name, "missing from calibration file")),
        }
    };
    let breakdown_voltage = take("breakdown_voltage")?;
    let gate_amplitude = take("gate_amplitude")?;
    let apd_capacitance = take("apd_capacitance")?;
    // Integers are promoted so `trap_lifetime = 1` works like `1.0`.
    let floats: toml::Table = table
        .into_iter()
        .map(|(k, v)| {
            let f = as_f64(&v);
            (k, toml::Value::Float(f))
        })
        .collect();
    let model = ModelConstants::deserialize(floats).map_err(|e| {
        Error::InvalidInput(format!("{}: {}", path.display(), e.message()))
    })?;
    model.validate()?;
    Ok(Calibration {
        breakdown_voltage,
        gate_amplitude,
        apd_capacitance,
        model,
    })
}

fn as_f64(v: &toml::Value) -> f64 {
    match v {
        toml::Value::Float(f) => *f,
        toml::Value::Integer(i) => *i as f64,
        _ => f64::NAN,
    }
}

/// Render a calibration in the file format, one constant per line, in a
/// form that parses back to identical values.
pub fn render_calibration(cal: &Calibration) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: f64| out.push_str(&format!("{k} = {v:e}\n"));
    line("breakdown_voltage", cal.breakdown_voltage);
    line("gate_amplitude", cal.gate_amplitude);
    line("apd_capacitance", cal.apd_capacitance);
    let model = toml::Table::try_from(&cal.model).expect("model constants serialise");
    for (k, v) in &model {
        line(k, as_f64(v));
    }
    out
}
