use std::fmt;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::limiter::{power_limiter, DEFAULT_RESPONSE_TIME};
use super::monitor::{burst_illumination, monitor_photocurrent, PhotocurrentMonitor};
use crate::detector::{simulate_peaks, DetectorConfig, Illumination, PulseTrain};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sd::{dark_count_kink, dark_count_scan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Cw,
    Pulsed,
}

/// One attack in the evaluation suite.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackScenario {
    pub name: String,
    pub kind: AttackKind,
    pub illumination: Illumination,
    /// Recorded gates over which the attack is meant to hold the detector
    /// blinded. Settling transients are left out.
    pub assessed: Vec<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSettings {
    #[serde(default)]
    pub monitor: PhotocurrentMonitor,
    /// Optical power limit, W.
    #[serde(default = "default_limit")]
    pub limiter_power: f64,
    #[serde(default = "default_response")]
    pub limiter_response_time: f64,
    /// Noise margin added to the dark-count kink, V.
    #[serde(default = "default_margin")]
    pub discrimination_margin: f64,
    #[serde(default = "default_levels")]
    pub dark_scan_levels: Vec<f64>,
    #[serde(default = "default_dark_periods")]
    pub dark_scan_periods: usize,
}

fn default_limit() -> f64 {
    1e-3
}
fn default_response() -> f64 {
    DEFAULT_RESPONSE_TIME
}
fn default_margin() -> f64 {
    3e-3
}
fn default_levels() -> Vec<f64> {
    (1..=40).map(|k| k as f64 * 0.5e-3).collect()
}
fn default_dark_periods() -> usize {
    400_000
}

impl Default for CriteriaSettings {
    fn default() -> Self {
        CriteriaSettings {
            monitor: PhotocurrentMonitor::default(),
            limiter_power: default_limit(),
            limiter_response_time: default_response(),
            discrimination_margin: default_margin(),
            dark_scan_levels: default_levels(),
            dark_scan_periods: default_dark_periods(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    RemoveBiasResistor,
    OpticalPowerLimiter,
    RemoveFilter,
    DiscriminationLevelAdequate,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::RemoveBiasResistor,
        Criterion::OpticalPowerLimiter,
        Criterion::RemoveFilter,
        Criterion::DiscriminationLevelAdequate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::RemoveBiasResistor => "remove_bias_resistor",
            Criterion::OpticalPowerLimiter => "optical_power_limiter",
            Criterion::RemoveFilter => "remove_filter",
            Criterion::DiscriminationLevelAdequate => "discrimination_level_adequate",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub kind: AttackKind,
    /// No SD click in any assessed gate.
    pub blinded: bool,
    pub alarmed: bool,
    pub clicks: usize,
    pub assessed_gates: usize,
    pub max_windowed_current: f64,
}

impl ScenarioOutcome {
    /// Blinded without the monitor noticing.
    pub fn compromised(&self) -> bool {
        self.blinded && !self.alarmed
    }
}

/// Suite results under one detector configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToggleOutcome {
    pub toggle: String,
    pub scenarios: Vec<ScenarioOutcome>,
    /// No scenario is compromised.
    pub pass: bool,
}

impl ToggleOutcome {
    pub fn evidence(&self) -> String {
        self.scenarios
            .iter()
            .map(|s| {
                format!(
                    "{}: blinded={} alarmed={} clicks={}/{}",
                    s.scenario, s.blinded, s.alarmed, s.clicks, s.assessed_gates
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: Criterion,
    pub pass: bool,
    pub evidence: String,
    pub outcome: ToggleOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub baseline: ToggleOutcome,
    /// One verdict per criterion, in [`Criterion::ALL`] order.
    pub verdicts: Vec<Verdict>,
    /// All four criteria applied together.
    pub combined: ToggleOutcome,
    pub kink_level: Option<f64>,
    pub adequate_level: Option<f64>,
}

impl CriteriaReport {
    pub fn verdict(&self, c: Criterion) -> &Verdict {
        self.verdicts
            .iter()
            .find(|v| v.criterion == c)
            .expect("every criterion has a verdict")
    }

    /// Human-readable summary table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let mut row = |name: &str, pass: bool, evidence: &str| {
            out.push_str(&format!(
                "{:<32} {:<4}  {}\n",
                name,
                if pass { "pass" } else { "fail" },
                evidence
            ));
        };
        row("baseline", self.baseline.pass, &self.baseline.evidence());
        for v in &self.verdicts {
            row(v.criterion.name(), v.pass, &v.evidence);
        }
        row("all_criteria", self.combined.pass, &self.combined.evidence());
        out
    }
}

/// Cw blinding, a continuous pulsed train and a duty-cycled pulsed train,
/// all at the mean power of `blind_energy` pulses at the gate rate.
///
/// The duty-cycled attack fires one burst per monitor window holding one
/// eighth of the window, so its window mean stays well below that of the
/// continuous attacks.
pub fn standard_attack_suite(
    config: &DetectorConfig,
    monitor: &PhotocurrentMonitor,
    blind_energy: f64,
    seed: u64,
) -> Vec<AttackScenario> {
    let window = monitor.window_gates(config.gate_period());
    // Gate 0 is compared against the zero-padded delay line and always
    // shows the full pre-SD pulse, so it is never assessed.
    let all = vec![1..window];
    let cw = Illumination::for_periods(
        config,
        vec![PulseTrain::cw(blind_energy * config.gate_frequency)],
        window,
        derive_seed(seed, 0),
    );
    let pulsed = Illumination::for_periods(
        config,
        vec![PulseTrain::blinding(config.gate_frequency, blind_energy)],
        window,
        derive_seed(seed, 1),
    );
    let (bursts, assessed) =
        burst_illumination(config, blind_energy, window / 8, window, 2, derive_seed(seed, 2));
    vec![
        AttackScenario {
            name: "cw".into(),
            kind: AttackKind::Cw,
            illumination: cw,
            assessed: all.clone(),
        },
        AttackScenario {
            name: "pulsed".into(),
            kind: AttackKind::Pulsed,
            illumination: pulsed,
            assessed: all,
        },
        AttackScenario {
            name: "duty_cycled".into(),
            kind: AttackKind::Pulsed,
            illumination: bursts,
            assessed,
        },
    ]
}

#[derive(Debug, Clone, Default)]
struct Toggles {
    no_resistor: bool,
    limiter: bool,
    no_filter: bool,
    level: Option<f64>,
}

fn run_scenario(
    config: &DetectorConfig,
    s: &AttackScenario,
    toggles: &Toggles,
    settings: &CriteriaSettings,
) -> Result<ScenarioOutcome> {
    let mut c = config.clone();
    if toggles.no_resistor {
        c.bias_resistor = 0.0;
    }
    if toggles.no_filter {
        c.filter_enabled = false;
    }
    if let Some(l) = toggles.level {
        c.discrimination_level = l;
    }
    let illum = if toggles.limiter {
        power_limiter(&s.illumination, settings.limiter_power, settings.limiter_response_time)?
    } else {
        s.illumination.clone()
    };
    let trace = simulate_peaks(&c, &illum)?;
    let monitor = monitor_photocurrent(&trace.states, c.gate_period(), &settings.monitor)?;
    let mut clicks = 0;
    let mut assessed_gates = 0;
    for r in &s.assessed {
        let gates = trace.sd.get(r.clone()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "scenario `{}` assesses gates {r:?} beyond its {} recorded gates",
                s.name,
                trace.sd.len()
            ))
        })?;
        assessed_gates += gates.len();
        clicks += gates.iter().filter(|&&p| p >= c.discrimination_level).count();
    }
    Ok(ScenarioOutcome {
        scenario: s.name.clone(),
        kind: s.kind,
        blinded: clicks == 0 && assessed_gates > 0,
        alarmed: monitor.alarm,
        clicks,
        assessed_gates,
        max_windowed_current: monitor.max_windowed_current,
    })
}

fn run_toggle(
    name: &str,
    config: &DetectorConfig,
    suite: &[AttackScenario],
    toggles: &Toggles,
    settings: &CriteriaSettings,
) -> Result<ToggleOutcome> {
    let scenarios = suite
        .par_iter()
        .map(|s| run_scenario(config, s, toggles, settings))
        .collect::<Result<Vec<_>>>()?;
    let pass = scenarios.iter().all(|s| !s.compromised());
    Ok(ToggleOutcome {
        toggle: name.to_string(),
        scenarios,
        pass,
    })
}

/// Run the attack suite against the baseline detector, each criterion on its
/// own and all criteria together.
///
/// A configuration passes when no attack leaves the detector blinded while
/// the photocurrent monitor stays silent. The discrimination criterion sets
/// the level to the dark-count kink plus `discrimination_margin`.
pub fn evaluate_criteria(
    config: &DetectorConfig,
    suite: &[AttackScenario],
    settings: &CriteriaSettings,
    seed: u64,
) -> Result<CriteriaReport> {
    if !suite.iter().any(|s| s.kind == AttackKind::Cw) {
        return Err(Error::InvalidInput("attack suite needs a cw scenario".into()));
    }
    if !suite.iter().any(|s| s.kind == AttackKind::Pulsed) {
        return Err(Error::InvalidInput("attack suite needs a pulsed scenario".into()));
    }
    settings.monitor.validate()?;
    let scan = dark_count_scan(
        config,
        &settings.dark_scan_levels,
        settings.dark_scan_periods,
        derive_seed(seed, 0),
    )?;
    let kink_level = dark_count_kink(&scan);
    let adequate_level = kink_level.map(|k| k + settings.discrimination_margin);

    let baseline = run_toggle("baseline", config, suite, &Toggles::default(), settings)?;
    let mut verdicts = Vec::with_capacity(4);
    for criterion in Criterion::ALL {
        let toggles = match criterion {
            Criterion::RemoveBiasResistor => Toggles {
                no_resistor: true,
                ..Default::default()
            },
            Criterion::OpticalPowerLimiter => Toggles {
                limiter: true,
                ..Default::default()
            },
            Criterion::RemoveFilter => Toggles {
                no_filter: true,
                ..Default::default()
            },
            Criterion::DiscriminationLevelAdequate => match adequate_level {
                Some(l) => Toggles {
                    level: Some(l),
                    ..Default::default()
                },
                None => {
                    verdicts.push(Verdict {
                        criterion,
                        pass: false,
                        evidence: "dark-count scan shows no two-regime kink".into(),
                        outcome: ToggleOutcome {
                            toggle: criterion.name().into(),
                            scenarios: Vec::new(),
                            pass: false,
                        },
                    });
                    continue;
                }
            },
        };
        let outcome = run_toggle(criterion.name(), config, suite, &toggles, settings)?;
        verdicts.push(Verdict {
            criterion,
            pass: outcome.pass,
            evidence: outcome.evidence(),
            outcome,
        });
    }
    let combined = run_toggle(
        "all_criteria",
        config,
        suite,
        &Toggles {
            no_resistor: true,
            limiter: true,
            no_filter: true,
            level: adequate_level,
        },
        settings,
    )?;
    Ok(CriteriaReport {
        baseline,
        verdicts,
        combined,
        kink_level,
        adequate_level,
    })
}
