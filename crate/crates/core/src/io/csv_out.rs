//! CSV artifacts. Every float is written with Rust's `{:e}` formatting, the
//! shortest scientific form that parses back to the same `f64`. Booleans are
//! `true`/`false`; absent values are empty fields. Column order is stable.

use std::io::Write;

use crate::attack::{Bb84SessionResult, ControlCurvePoint, Eq1Report, SweepPoint};
use crate::countermeasures::{AttackKind, CapacitivePoint, CriteriaReport, ToggleOutcome};
use crate::error::Result;
use crate::sd::DarkRatePoint;

pub const SWEEP_COLUMNS: [&str; 8] = [
    "energy_j",
    "pre_sd_mean_v",
    "pre_sd_std_v",
    "sd_mean_v",
    "sd_std_v",
    "sd_max_v",
    "periods",
    "blinded",
];
pub const CONTROL_COLUMNS: [&str; 5] = [
    "blinding_energy_j",
    "trigger_energy_j",
    "detection_probability",
    "clicks",
    "trials",
];
pub const FEASIBILITY_COLUMNS: [&str; 6] = [
    "blinding_energy_j",
    "e_never_j",
    "e_always_j",
    "feasible",
    "max_silent_detection",
    "reason",
];
pub const DARK_COLUMNS: [&str; 4] = ["level_v", "dark_rate", "clicks", "periods"];
pub const BB84_COLUMNS: [&str; 11] = [
    "label",
    "blinding_energy_j",
    "trigger_energy_j",
    "channel_loss_db",
    "n_qubits",
    "sifted_key_length",
    "errors",
    "qber",
    "eve_information",
    "detection_rate_at_bob",
    "double_clicks",
];
pub const CAPACITIVE_COLUMNS: [&str; 6] = [
    "reduction_v",
    "filter_enabled",
    "mean_peak_v",
    "std_peak_v",
    "max_peak_v",
    "periods",
];
pub const CRITERIA_COLUMNS: [&str; 10] = [
    "configuration",
    "configuration_pass",
    "scenario",
    "kind",
    "blinded",
    "alarmed",
    "compromised",
    "clicks",
    "assessed_gates",
    "max_windowed_current_a",
];

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = writer(out, &SWEEP_COLUMNS)?;
    for p in points {
        w.write_record([
            num(p.energy),
            num(p.pre_sd.mean_peak),
            num(p.pre_sd.std_peak),
            num(p.sd.mean_peak),
            num(p.sd.std_peak),
            num(p.sd.max_peak()),
            p.sd.period_count.to_string(),
            p.blinded.to_string(),
        ])?;
    }
    finish(w)
}

/// Control curves, one block of rows per blinding energy.
pub fn write_control<W: Write>(out: W, curves: &[(f64, Vec<ControlCurvePoint>)]) -> Result<()> {
    let mut w = writer(out, &CONTROL_COLUMNS)?;
    for (blind, curve) in curves {
        for p in curve {
            w.write_record([
                num(*blind),
                num(p.trigger_energy),
                num(p.detection_probability),
                p.clicks.to_string(),
                p.trials.to_string(),
            ])?;
        }
    }
    finish(w)
}

pub fn write_feasibility<W: Write>(out: W, reports: &[(f64, Eq1Report)]) -> Result<()> {
    let mut w = writer(out, &FEASIBILITY_COLUMNS)?;
    for (blind, r) in reports {
        w.write_record([
            num(*blind),
            opt(r.e_never),
            opt(r.e_always),
            r.feasible.to_string(),
            opt(r.max_silent_detection),
            r.reason.clone().unwrap_or_default(),
        ])?;
    }
    finish(w)
}

pub fn write_dark<W: Write>(out: W, curve: &[DarkRatePoint], periods: usize) -> Result<()> {
    let mut w = writer(out, &DARK_COLUMNS)?;
    for p in curve {
        w.write_record([num(p.level), num(p.dark_rate), p.clicks.to_string(), periods.to_string()])?;
    }
    finish(w)
}

/// One BB84 row: the session inputs followed by its result.
pub struct Bb84Row<'a> {
    pub label: &'a str,
    pub blinding_energy: f64,
    pub trigger_energy: f64,
    pub channel_loss_db: f64,
    pub n_qubits: usize,
    pub result: &'a Bb84SessionResult,
}

pub fn write_bb84<W: Write>(out: W, rows: &[Bb84Row<'_>]) -> Result<()> {
    let mut w = writer(out, &BB84_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.label.to_string(),
            num(r.blinding_energy),
            num(r.trigger_energy),
            num(r.channel_loss_db),
            r.n_qubits.to_string(),
            r.result.sifted_key_length.to_string(),
            r.result.errors.to_string(),
            opt(r.result.qber),
            num(r.result.eve_information),
            num(r.result.detection_rate_at_bob),
            r.result.double_clicks.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_capacitive<W: Write>(out: W, runs: &[(bool, Vec<CapacitivePoint>)]) -> Result<()> {
    let mut w = writer(out, &CAPACITIVE_COLUMNS)?;
    for (filter, points) in runs {
        for p in points {
            w.write_record([
                num(p.reduction),
                filter.to_string(),
                num(p.pre_sd.mean_peak),
                num(p.pre_sd.std_peak),
                num(p.pre_sd.max_peak()),
                p.pre_sd.period_count.to_string(),
            ])?;
        }
    }
    finish(w)
}

/// One row per (configuration, attack). Configurations are `baseline`, each
/// criterion name, and `all_criteria`.
pub fn write_criteria<W: Write>(out: W, report: &CriteriaReport) -> Result<()> {
    let mut w = writer(out, &CRITERIA_COLUMNS)?;
    let mut block = |name: &str, t: &ToggleOutcome| -> Result<()> {
        for s in &t.scenarios {
            w.write_record([
                name.to_string(),
                t.pass.to_string(),
                s.scenario.clone(),
                match s.kind {
                    AttackKind::Cw => "cw".to_string(),
                    AttackKind::Pulsed => "pulsed".to_string(),
                },
                s.blinded.to_string(),
                s.alarmed.to_string(),
                s.compromised().to_string(),
                s.clicks.to_string(),
                s.assessed_gates.to_string(),
                num(s.max_windowed_current),
            ])?;
        }
        Ok(())
    };
    block("baseline", &report.baseline)?;
    for v in &report.verdicts {
        block(v.criterion.name(), &v.outcome)?;
    }
    block("all_criteria", &report.combined)?;
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sd::PeakStats;

    #[test]
    fn floats_round_trip() {
        for v in [0.0, 1.0, 8.92e-12, 0.1 + 0.2, f64::MIN_POSITIVE, -3.5e7] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn sweep_layout() {
        let stats = PeakStats::from_peaks(vec![0.25, 0.75]);
        let p = SweepPoint {
            energy: 8.92e-12,
            pre_sd: stats.clone(),
            sd: stats,
            blinded: true,
        };
        let mut buf = Vec::new();
        write_sweep(&mut buf, &[p]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "8.92e-12,5e-1,2.5e-1,5e-1,2.5e-1,7.5e-1,2,true");
        assert!(lines.next().is_none());
    }
}
