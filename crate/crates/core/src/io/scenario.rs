//! Scenario files: TOML with one analysis section, strict about unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackParams;
use crate::countermeasures::{AttackKind, CriteriaSettings};
use crate::detector::{DetectorConfig, Illumination, PulseTrain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    BlindingSweep,
    ControlCurve,
    DarkScan,
    Bb84,
    CapacitiveVsBias,
    CriteriaEval,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::BlindingSweep => "blinding_sweep",
            Analysis::ControlCurve => "control_curve",
            Analysis::DarkScan => "dark_scan",
            Analysis::Bb84 => "bb84",
            Analysis::CapacitiveVsBias => "capacitive_vs_bias",
            Analysis::CriteriaEval => "criteria_eval",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// A sweep grid: an explicit list, `count` points from `start` to `stop`
/// inclusive, or `count` points `step` apart from `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Grid {
    /// Expand and check the grid is finite and strictly increasing.
    pub fn values(&self, field: &str) -> Result<Vec<f64>> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range(r) => {
                if r.count == 0 {
                    return Err(Error::field(field, "count must be >= 1"));
                }
                match (r.stop, r.step) {
                    (Some(_), Some(_)) => {
                        return Err(Error::field(field, "give either `stop` or `step`, not both"))
                    }
                    (None, None) => return Err(Error::field(field, "needs `stop` or `step`")),
                    (None, Some(step)) => {
                        if r.spacing == Spacing::Log {
                            return Err(Error::field(field, "`step` grids are linear"));
                        }
                        (0..r.count).map(|k| r.start + k as f64 * step).collect()
                    }
                    (Some(stop), None) if r.count == 1 => {
                        if stop != r.start {
                            return Err(Error::field(field, "a one-point range needs stop == start"));
                        }
                        vec![r.start]
                    }
                    (Some(stop), None) => {
                        let n = (r.count - 1) as f64;
                        match r.spacing {
                            Spacing::Linear => (0..r.count)
                                .map(|k| r.start + (stop - r.start) * k as f64 / n)
                                .collect(),
                            Spacing::Log => {
                                if r.start <= 0.0 || stop <= 0.0 {
                                    return Err(Error::field(field, "log grids need positive bounds"));
                                }
                                let (a, b) = (r.start.ln(), stop.ln());
                                (0..r.count)
                                    .map(|k| (a + (b - a) * k as f64 / n).exp())
                                    .collect()
                            }
                        }
                    }
                }
            }
        };
        if v.is_empty() {
            return Err(Error::field(field, "grid is empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::field(field, "grid values must be finite"));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::field(field, "grid must be strictly increasing"));
        }
        Ok(v)
    }

    fn non_negative(&self, field: &str) -> Result<Vec<f64>> {
        let v = self.values(field)?;
        if v[0] < 0.0 {
            return Err(Error::field(field, format!("{} must be >= 0", v[0])));
        }
        Ok(v)
    }
}

/// Detector fields a scenario may override. Model constants come from the
/// calibration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorOverrides {
    pub dc_bias: Option<f64>,
    pub breakdown_voltage: Option<f64>,
    pub gate_frequency: Option<f64>,
    pub gate_amplitude: Option<f64>,
    pub bias_resistor: Option<f64>,
    pub apd_capacitance: Option<f64>,
    pub temperature: Option<f64>,
    pub filter_enabled: Option<bool>,
    pub discrimination_level: Option<f64>,
    pub sample_rate: Option<f64>,
}

impl DetectorOverrides {
    pub fn apply(&self, base: &DetectorConfig) -> DetectorConfig {
        let mut c = base.clone();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            dc_bias,
            breakdown_voltage,
            gate_frequency,
            gate_amplitude,
            bias_resistor,
            apd_capacitance,
            temperature,
            filter_enabled,
            discrimination_level,
            sample_rate
        );
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindingSweepSpec {
    pub energies: Grid,
    #[serde(default = "default_sweep_periods")]
    pub periods: usize,
    #[serde(default)]
    pub expected: BlindingSweepExpect,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindingSweepExpect {
    /// Every point at or below this energy is not blinded, J.
    pub not_blinded_through: Option<f64>,
    /// Every point from this energy up to `blinded_through` is blinded, J.
    pub blinded_from: Option<f64>,
    pub blinded_through: Option<f64>,
    /// Mean pre-SD peak at `blinded_from`, V, with relative tolerance.
    pub pre_sd_at_blinded_from: Option<f64>,
    pub pre_sd_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlCurveSpec {
    pub blinding_energies: Grid,
    pub trigger_energies: Grid,
    #[serde(default = "default_control_periods")]
    pub periods: usize,
    #[serde(default)]
    pub expected: ControlCurveExpect,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlCurveExpect {
    /// Largest detection probability without added QBER, one per blinding
    /// energy; negative entries are not checked.
    pub max_silent_detection: Option<Vec<f64>>,
    /// Absolute tolerance on `max_silent_detection`.
    pub tolerance: Option<f64>,
    /// Blinding energies at which `E_always <= 2 E_never` must hold, J.
    pub feasible_at: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkScanSpec {
    pub levels: Grid,
    #[serde(default = "default_dark_periods")]
    pub periods: usize,
    #[serde(default)]
    pub expected: DarkScanExpect,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkScanExpect {
    /// Kink level, V, with absolute tolerance.
    pub kink_level: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bb84Session {
    pub label: String,
    pub blinding_energy: f64,
    pub trigger_energy: f64,
    /// Hz; defaults to half the gate frequency.
    pub trigger_rate: Option<f64>,
    #[serde(default = "default_control_periods")]
    pub periods: usize,
    #[serde(default = "default_qubits")]
    pub n_qubits: usize,
    #[serde(default)]
    pub channel_loss_db: f64,
    /// Expected QBER; checked exactly.
    pub expected_qber: Option<f64>,
    pub expected_eve_information: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bb84Spec {
    pub sessions: Vec<Bb84Session>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitiveSpec {
    pub reductions: Grid,
    #[serde(default = "default_cap_periods")]
    pub periods: usize,
    /// Also run with the filter toggled.
    #[serde(default = "default_true")]
    pub compare_filter: bool,
    #[serde(default)]
    pub expected: CapacitiveExpect,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitiveExpect {
    /// With the filter on, the mean peak stays below the discrimination level.
    pub filtered_below_level: Option<bool>,
    /// Upper bound on the filtered mean peak at zero reduction, V.
    pub filtered_at_zero_below: Option<f64>,
    /// With the filter off, some reduction crosses the discrimination level.
    pub unfiltered_crosses_level: Option<bool>,
}

/// Custom attack for the criteria evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub name: String,
    pub kind: AttackKind,
    pub duration: f64,
    #[serde(default)]
    pub warmup_periods: Option<usize>,
    pub trains: Vec<PulseTrain>,
    /// First recorded gate assessed for blinding. Defaults to 1 because
    /// gate 0 is self-differenced against an empty delay line.
    #[serde(default = "default_assess_from")]
    pub assess_from: usize,
}

fn default_assess_from() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSpec {
    /// Blinding energy of the standard suite, J.
    #[serde(default = "default_criteria_energy")]
    pub blinding_energy: f64,
    #[serde(default)]
    pub settings: CriteriaSettings,
    /// Replaces the standard suite when present.
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
    #[serde(default)]
    pub expected: CriteriaExpect,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaExpect {
    pub baseline_pass: Option<bool>,
    pub remove_bias_resistor: Option<bool>,
    pub optical_power_limiter: Option<bool>,
    pub remove_filter: Option<bool>,
    pub discrimination_level_adequate: Option<bool>,
    pub all_criteria: Option<bool>,
}

fn default_sweep_periods() -> usize {
    480
}
fn default_control_periods() -> usize {
    960
}
fn default_dark_periods() -> usize {
    400_000
}
fn default_cap_periods() -> usize {
    1920
}
fn default_qubits() -> usize {
    100_000
}
fn default_true() -> bool {
    true
}
fn default_criteria_energy() -> f64 {
    11.55e-12
}
fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    analysis: Analysis,
    #[serde(default = "default_seed")]
    seed: u64,
    output: PathBuf,
    #[serde(default)]
    detector: DetectorOverrides,
    blinding_sweep: Option<BlindingSweepSpec>,
    control_curve: Option<ControlCurveSpec>,
    dark_scan: Option<DarkScanSpec>,
    bb84: Option<Bb84Spec>,
    capacitive_vs_bias: Option<CapacitiveSpec>,
    criteria_eval: Option<CriteriaSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisSpec {
    BlindingSweep(BlindingSweepSpec),
    ControlCurve(ControlCurveSpec),
    DarkScan(DarkScanSpec),
    Bb84(Bb84Spec),
    CapacitiveVsBias(CapacitiveSpec),
    CriteriaEval(CriteriaSpec),
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub analysis: Analysis,
    pub seed: u64,
    pub output_path: PathBuf,
    pub detector: DetectorConfig,
    pub spec: AnalysisSpec,
}

pub fn load_scenario(path: &Path, base: &DetectorConfig) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path, base)
}

/// Parse and validate a scenario. `base` supplies every detector field the
/// file does not override.
pub fn parse_scenario(text: &str, path: &Path, base: &DetectorConfig) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| super::parse_error(path, text, &e))?;
    let name = raw.name.clone();
    build(raw, base).map_err(|e| Error::Scenario {
        scenario: name,
        source: Box::new(e),
    })
}

fn build(raw: RawScenario, base: &DetectorConfig) -> Result<Scenario> {
    if raw.name.is_empty()
        || !raw
            .name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(Error::field("name", "must be a non-empty identifier of [A-Za-z0-9_-]"));
    }
    if raw.output.as_os_str().is_empty() || raw.output.is_absolute() {
        return Err(Error::field("output", "must be a relative file path"));
    }
    let sections = [
        (Analysis::BlindingSweep, raw.blinding_sweep.is_some()),
        (Analysis::ControlCurve, raw.control_curve.is_some()),
        (Analysis::DarkScan, raw.dark_scan.is_some()),
        (Analysis::Bb84, raw.bb84.is_some()),
        (Analysis::CapacitiveVsBias, raw.capacitive_vs_bias.is_some()),
        (Analysis::CriteriaEval, raw.criteria_eval.is_some()),
    ];
    for (a, present) in sections {
        if present && a != raw.analysis {
            return Err(Error::field(
                a.name(),
                format!("section does not belong to a `{}` scenario", raw.analysis.name()),
            ));
        }
    }
    let missing = || Error::field(raw.analysis.name(), "required section is missing");
    let spec = match raw.analysis {
        Analysis::BlindingSweep => AnalysisSpec::BlindingSweep(raw.blinding_sweep.ok_or_else(missing)?),
        Analysis::ControlCurve => AnalysisSpec::ControlCurve(raw.control_curve.ok_or_else(missing)?),
        Analysis::DarkScan => AnalysisSpec::DarkScan(raw.dark_scan.ok_or_else(missing)?),
        Analysis::Bb84 => AnalysisSpec::Bb84(raw.bb84.ok_or_else(missing)?),
        Analysis::CapacitiveVsBias => {
            AnalysisSpec::CapacitiveVsBias(raw.capacitive_vs_bias.ok_or_else(missing)?)
        }
        Analysis::CriteriaEval => AnalysisSpec::CriteriaEval(raw.criteria_eval.ok_or_else(missing)?),
    };
    let detector = raw.detector.apply(base);
    detector.validate()?;
    validate_spec(&spec, &detector)?;
    Ok(Scenario {
        name: raw.name,
        analysis: raw.analysis,
        seed: raw.seed,
        output_path: raw.output,
        detector,
        spec,
    })
}

fn periods(field: &str, p: usize) -> Result<()> {
    if p == 0 {
        Err(Error::field(field, "must be >= 1"))
    } else {
        Ok(())
    }
}

impl Bb84Session {
    pub fn params(&self, config: &DetectorConfig) -> AttackParams {
        AttackParams {
            blinding_energy: self.blinding_energy,
            trigger_energy: self.trigger_energy,
            trigger_rate: self.trigger_rate.unwrap_or(config.gate_frequency / 2.0),
            periods: self.periods,
        }
    }
}

impl AttackSpec {
    pub fn illumination(&self, seed: u64) -> Illumination {
        Illumination {
            trains: self.trains.clone(),
            duration: self.duration,
            rng_seed: seed,
            warmup_periods: self.warmup_periods,
        }
    }
}

fn validate_spec(spec: &AnalysisSpec, config: &DetectorConfig) -> Result<()> {
    match spec {
        AnalysisSpec::BlindingSweep(s) => {
            s.energies.non_negative("energies")?;
            periods("periods", s.periods)
        }
        AnalysisSpec::ControlCurve(s) => {
            s.blinding_energies.non_negative("blinding_energies")?;
            s.trigger_energies.non_negative("trigger_energies")?;
            periods("periods", s.periods)
        }
        AnalysisSpec::DarkScan(s) => {
            let v = s.levels.values("levels")?;
            if v[0] <= 0.0 {
                return Err(Error::field("levels", "must be > 0"));
            }
            periods("periods", s.periods)
        }
        AnalysisSpec::Bb84(s) => {
            if s.sessions.is_empty() {
                return Err(Error::field("sessions", "at least one session is required"));
            }
            for session in &s.sessions {
                session.params(config).validate()?;
                if session.n_qubits == 0 {
                    return Err(Error::field("n_qubits", "must be >= 1"));
                }
                if !(session.channel_loss_db.is_finite() && session.channel_loss_db >= 0.0) {
                    return Err(Error::field("channel_loss_db", "must be finite and >= 0"));
                }
            }
            Ok(())
        }
        AnalysisSpec::CapacitiveVsBias(s) => {
            let v = s.reductions.non_negative("reductions")?;
            if let Some(r) = v.iter().find(|&&r| config.dc_bias - r <= config.breakdown_voltage) {
                return Err(Error::field(
                    "reductions",
                    format!("reduction {r} V takes the bias to or below breakdown"),
                ));
            }
            periods("periods", s.periods)
        }
        AnalysisSpec::CriteriaEval(s) => {
            if !(s.blinding_energy.is_finite() && s.blinding_energy >= 0.0) {
                return Err(Error::field("blinding_energy", "must be >= 0"));
            }
            s.settings.monitor.validate()?;
            crate::detector::positive("limiter_power", s.settings.limiter_power)?;
            periods("dark_scan_periods", s.settings.dark_scan_periods)?;
            for a in &s.attacks {
                a.illumination(0).validate(config)?;
            }
            if !s.attacks.is_empty() {
                for kind in [AttackKind::Cw, AttackKind::Pulsed] {
                    if !s.attacks.iter().any(|a| a.kind == kind) {
                        return Err(Error::field(
                            "attacks",
                            "the suite needs at least one cw and one pulsed attack",
                        ));
                    }
                }
            }
            Ok(())
        }
    }
}
