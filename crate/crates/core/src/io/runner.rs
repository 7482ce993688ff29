//! Scenario execution: run the analysis, write its CSV, compare against the
//! expected values the scenario embeds.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::csv_out::{self, Bb84Row};
use super::scenario::{
    AnalysisSpec, Bb84Spec, BlindingSweepSpec, CapacitiveSpec, ControlCurveSpec, CriteriaSpec,
    DarkScanSpec, Scenario,
};
use crate::attack::{blinding_sweep, control_curve, eq1_feasibility, run_bb84_fake_state};
use crate::countermeasures::{
    capacitive_response_vs_bias, evaluate_criteria, standard_attack_suite, AttackScenario,
    Criterion,
};
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sd::{dark_count_kink, dark_count_scan};
use crate::units::to_pj;

/// Comparison of one embedded expectation against the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, expected: String, observed: String, pass: bool) -> Self {
        Check {
            name: name.into(),
            expected,
            observed,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub scenario: String,
    pub outputs: Vec<PathBuf>,
    pub checks: Vec<Check>,
    /// Human-readable progress lines; energies in pJ.
    pub log: Vec<String>,
}

impl RunReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Run `s`, writing its artifacts under `out_dir`. Output is a deterministic
/// function of the scenario, including its seed.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let ctx = |e: Error| match e {
        Error::Scenario { .. } => e,
        e => Error::Scenario {
            scenario: s.name.clone(),
            source: Box::new(e),
        },
    };
    let mut report = RunReport {
        scenario: s.name.clone(),
        ..RunReport::default()
    };
    let path = out_dir.join(&s.output_path);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ctx(Error::io(dir, e)))?;
    }
    let c = &s.detector;
    match &s.spec {
        AnalysisSpec::BlindingSweep(spec) => sweep(c, spec, s.seed, &path, &mut report),
        AnalysisSpec::ControlCurve(spec) => control(c, spec, s.seed, &path, &mut report),
        AnalysisSpec::DarkScan(spec) => dark(c, spec, s.seed, &path, &mut report),
        AnalysisSpec::Bb84(spec) => bb84(c, spec, s.seed, &path, &mut report),
        AnalysisSpec::CapacitiveVsBias(spec) => capacitive(c, spec, s.seed, &path, &mut report),
        AnalysisSpec::CriteriaEval(spec) => criteria(c, spec, s.seed, &path, &mut report),
    }
    .map_err(ctx)?;
    Ok(report)
}

fn create(path: &Path, report: &mut RunReport) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    report.outputs.push(path.to_path_buf());
    Ok(BufWriter::new(f))
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn sweep(
    c: &DetectorConfig,
    spec: &BlindingSweepSpec,
    seed: u64,
    path: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let energies = spec.energies.values("energies")?;
    let points = blinding_sweep(c, &energies, spec.periods, seed)?;
    csv_out::write_sweep(create(path, report)?, &points)?;
    for p in &points {
        report.log.push(format!(
            "{:>9.3} pJ  pre-SD {:>7.2} mV  SD {:>6.2} mV (max {:>6.2})  {}",
            to_pj(p.energy),
            p.pre_sd.mean_peak * 1e3,
            p.sd.mean_peak * 1e3,
            p.sd.max_peak() * 1e3,
            if p.blinded { "blinded" } else { "not blinded" }
        ));
    }
    let ex = &spec.expected;
    if let Some(limit) = ex.not_blinded_through {
        let bad: Vec<_> = points
            .iter()
            .filter(|p| p.energy <= limit * (1.0 + 1e-9) && p.blinded)
            .map(|p| format!("{:.3}", to_pj(p.energy)))
            .collect();
        report.checks.push(Check::new(
            "not_blinded_through",
            format!("no blinded point <= {:.3} pJ", to_pj(limit)),
            if bad.is_empty() { "none".into() } else { format!("blinded at {} pJ", bad.join(", ")) },
            bad.is_empty(),
        ));
    }
    if let Some(from) = ex.blinded_from {
        let through = ex.blinded_through.unwrap_or(f64::INFINITY);
        let inside: Vec<_> = points
            .iter()
            .filter(|p| p.energy >= from * (1.0 - 1e-9) && p.energy <= through * (1.0 + 1e-9))
            .collect();
        let bad: Vec<_> = inside
            .iter()
            .filter(|p| !p.blinded)
            .map(|p| format!("{:.3}", to_pj(p.energy)))
            .collect();
        report.checks.push(Check::new(
            "blinded_range",
            format!("blinded from {:.3} through {:.3} pJ", to_pj(from), to_pj(through)),
            if bad.is_empty() {
                format!("{} points blinded", inside.len())
            } else {
                format!("clicks at {} pJ", bad.join(", "))
            },
            bad.is_empty() && !inside.is_empty(),
        ));
        if let Some(v) = ex.pre_sd_at_blinded_from {
            let tol = ex.pre_sd_tolerance.unwrap_or(0.1);
            let observed = points.iter().find(|p| same(p.energy, from)).map(|p| p.pre_sd.mean_peak);
            report.checks.push(Check::new(
                "pre_sd_at_blinded_from",
                format!("{:.1} mV +/- {:.0}%", v * 1e3, tol * 100.0),
                observed.map_or("no grid point".into(), |o| format!("{:.2} mV", o * 1e3)),
                observed.is_some_and(|o| (o - v).abs() <= tol * v),
            ));
        }
    }
    Ok(())
}

fn control(
    c: &DetectorConfig,
    spec: &ControlCurveSpec,
    seed: u64,
    path: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let blinds = spec.blinding_energies.values("blinding_energies")?;
    let triggers = spec.trigger_energies.values("trigger_energies")?;
    let mut curves = Vec::with_capacity(blinds.len());
    let mut feasibility = Vec::with_capacity(blinds.len());
    for (i, &b) in blinds.iter().enumerate() {
        let curve = control_curve(c, b, &triggers, spec.periods, derive_seed(seed, i as u64))?;
        let r = eq1_feasibility(&curve)?;
        report.log.push(format!(
            "blind {:>7.3} pJ  E_never {}  E_always {}  feasible {}  max silent {}",
            to_pj(b),
            r.e_never.map_or("-".into(), |e| format!("{:.3} pJ", to_pj(e))),
            r.e_always.map_or("-".into(), |e| format!("{:.3} pJ", to_pj(e))),
            r.feasible,
            r.max_silent_detection.map_or("-".into(), |p| format!("{:.2}%", p * 100.0)),
        ));
        curves.push((b, curve));
        feasibility.push((b, r));
    }
    csv_out::write_control(create(path, report)?, &curves)?;
    csv_out::write_feasibility(create(&feasibility_path(path), report)?, &feasibility)?;

    let ex = &spec.expected;
    if let Some(targets) = &ex.max_silent_detection {
        if targets.len() != blinds.len() {
            return Err(Error::field(
                "expected.max_silent_detection",
                format!("{} entries for {} blinding energies", targets.len(), blinds.len()),
            ));
        }
        let tol = ex.tolerance.unwrap_or(0.03);
        for ((b, r), &t) in feasibility.iter().zip(targets) {
            if t < 0.0 {
                continue;
            }
            let m = r.max_silent_detection;
            report.checks.push(Check::new(
                format!("max_silent_detection@{:.2}pJ", to_pj(*b)),
                format!("{:.2}% +/- {:.1} pp", t * 100.0, tol * 100.0),
                m.map_or("undefined".into(), |m| format!("{:.2}%", m * 100.0)),
                m.is_some_and(|m| (m - t).abs() <= tol),
            ));
        }
    }
    if let Some(at) = &ex.feasible_at {
        for &e in at {
            let r = feasibility.iter().find(|(b, _)| same(*b, e));
            report.checks.push(Check::new(
                format!("feasible@{:.2}pJ", to_pj(e)),
                "E_always <= 2 E_never".into(),
                r.map_or("no such blinding energy".into(), |(_, r)| {
                    r.reason.clone().unwrap_or_else(|| "feasible".into())
                }),
                r.is_some_and(|(_, r)| r.feasible),
            ));
        }
    }
    Ok(())
}

/// `<stem>_feasibility.csv` next to `path`.
pub fn feasibility_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_feasibility.csv"))
}

fn dark(
    c: &DetectorConfig,
    spec: &DarkScanSpec,
    seed: u64,
    path: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let levels = spec.levels.values("levels")?;
    let curve = dark_count_scan(c, &levels, spec.periods, seed)?;
    csv_out::write_dark(create(path, report)?, &curve, spec.periods)?;
    let kink = dark_count_kink(&curve);
    report.log.push(format!(
        "dark scan over {} levels, {} gates; kink {}",
        curve.len(),
        spec.periods,
        kink.map_or("not found".into(), |k| format!("{:.2} mV", k * 1e3))
    ));
    let monotone = curve.windows(2).all(|w| w[1].dark_rate <= w[0].dark_rate);
    report.checks.push(Check::new(
        "monotone_non_increasing",
        "true".into(),
        monotone.to_string(),
        monotone,
    ));
    if let Some(k) = spec.expected.kink_level {
        let tol = spec.expected.tolerance.unwrap_or(1e-3);
        report.checks.push(Check::new(
            "kink_level",
            format!("{:.1} mV +/- {:.1} mV", k * 1e3, tol * 1e3),
            kink.map_or("not found".into(), |o| format!("{:.2} mV", o * 1e3)),
            kink.is_some_and(|o| (o - k).abs() <= tol),
        ));
    }
    Ok(())
}

fn bb84(c: &DetectorConfig, spec: &Bb84Spec, seed: u64, path: &Path, report: &mut RunReport) -> Result<()> {
    let mut results = Vec::with_capacity(spec.sessions.len());
    for (i, s) in spec.sessions.iter().enumerate() {
        let r = run_bb84_fake_state(
            c,
            &s.params(c),
            s.n_qubits,
            derive_seed(seed, i as u64),
            s.channel_loss_db,
        )?;
        report.log.push(format!(
            "{}: blind {:.3} pJ trigger {:.3} pJ  sifted {}  QBER {}  Eve info {:.4}",
            s.label,
            to_pj(s.blinding_energy),
            to_pj(s.trigger_energy),
            r.sifted_key_length,
            r.qber.map_or("-".into(), |q| format!("{:.4}", q)),
            r.eve_information
        ));
        if let Some(q) = s.expected_qber {
            report.checks.push(Check::new(
                format!("{}.qber", s.label),
                num_text(q),
                r.qber.map_or("undefined".into(), num_text),
                r.qber == Some(q),
            ));
        }
        if let Some(v) = s.expected_eve_information {
            report.checks.push(Check::new(
                format!("{}.eve_information", s.label),
                num_text(v),
                num_text(r.eve_information),
                r.eve_information == v,
            ));
        }
        results.push(r);
    }
    let rows: Vec<_> = spec
        .sessions
        .iter()
        .zip(&results)
        .map(|(s, r)| Bb84Row {
            label: &s.label,
            blinding_energy: s.blinding_energy,
            trigger_energy: s.trigger_energy,
            channel_loss_db: s.channel_loss_db,
            n_qubits: s.n_qubits,
            result: r,
        })
        .collect();
    csv_out::write_bb84(create(path, report)?, &rows)
}

fn num_text(v: f64) -> String {
    csv_out::num(v)
}

fn capacitive(
    c: &DetectorConfig,
    spec: &CapacitiveSpec,
    seed: u64,
    path: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let reductions = spec.reductions.values("reductions")?;
    let mut configs = vec![c.clone()];
    if spec.compare_filter {
        let mut other = c.clone();
        other.filter_enabled = !c.filter_enabled;
        configs.push(other);
    }
    let mut runs = Vec::new();
    for cfg in &configs {
        let pts = capacitive_response_vs_bias(cfg, &reductions, spec.periods, seed)?;
        let worst = pts.iter().map(|p| p.pre_sd.mean_peak).fold(0.0, f64::max);
        report.log.push(format!(
            "filter {}: largest mean peak {:.2} mV over {:.2}..{:.2} V",
            if cfg.filter_enabled { "on " } else { "off" },
            worst * 1e3,
            reductions[0],
            reductions[reductions.len() - 1]
        ));
        runs.push((cfg.filter_enabled, pts));
    }
    csv_out::write_capacitive(create(path, report)?, &runs)?;

    let level = c.discrimination_level;
    let means = |filter: bool| -> Option<Vec<f64>> {
        runs.iter()
            .find(|(f, _)| *f == filter)
            .map(|(_, p)| p.iter().map(|p| p.pre_sd.mean_peak).collect())
    };
    let ex = &spec.expected;
    if let Some(want) = ex.filtered_below_level {
        let got = means(true).map(|m| m.iter().all(|&v| v < level));
        report.checks.push(Check::new(
            "filtered_below_level",
            want.to_string(),
            got.map_or("filter-on run missing".into(), |g| g.to_string()),
            got == Some(want),
        ));
    }
    if let Some(bound) = ex.filtered_at_zero_below {
        let got = runs
            .iter()
            .find(|(f, _)| *f)
            .and_then(|(_, p)| p.iter().find(|p| p.reduction == 0.0))
            .map(|p| p.pre_sd.mean_peak);
        report.checks.push(Check::new(
            "filtered_at_zero_below",
            format!("< {:.1} mV", bound * 1e3),
            got.map_or("no zero-reduction point".into(), |g| format!("{:.2} mV", g * 1e3)),
            got.is_some_and(|g| g < bound),
        ));
    }
    if let Some(want) = ex.unfiltered_crosses_level {
        let got = means(false).map(|m| m.iter().any(|&v| v >= level));
        report.checks.push(Check::new(
            "unfiltered_crosses_level",
            want.to_string(),
            got.map_or("filter-off run missing".into(), |g| g.to_string()),
            got == Some(want),
        ));
    }
    Ok(())
}

fn criteria(
    c: &DetectorConfig,
    spec: &CriteriaSpec,
    seed: u64,
    path: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let suite: Vec<AttackScenario> = if spec.attacks.is_empty() {
        standard_attack_suite(c, &spec.settings.monitor, spec.blinding_energy, derive_seed(seed, 0))
    } else {
        spec.attacks
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let illum = a.illumination(derive_seed(seed, 100 + i as u64));
                let gates = illum.periods(c);
                AttackScenario {
                    name: a.name.clone(),
                    kind: a.kind,
                    illumination: illum,
                    assessed: vec![a.assess_from.min(gates)..gates],
                }
            })
            .collect()
    };
    let r = evaluate_criteria(c, &suite, &spec.settings, derive_seed(seed, 1))?;
    csv_out::write_criteria(create(path, report)?, &r)?;
    report.log.extend(r.table().lines().map(str::to_string));
    report.log.push(format!(
        "dark-count kink {}; adequate level {}",
        r.kink_level.map_or("-".into(), |k| format!("{:.2} mV", k * 1e3)),
        r.adequate_level.map_or("-".into(), |k| format!("{:.2} mV", k * 1e3)),
    ));
    let ex = &spec.expected;
    let mut expect = |name: &str, want: Option<bool>, got: bool| {
        if let Some(w) = want {
            report.checks.push(Check::new(name, w.to_string(), got.to_string(), w == got));
        }
    };
    expect("baseline_pass", ex.baseline_pass, r.baseline.pass);
    expect(
        Criterion::RemoveBiasResistor.name(),
        ex.remove_bias_resistor,
        r.verdict(Criterion::RemoveBiasResistor).pass,
    );
    expect(
        Criterion::OpticalPowerLimiter.name(),
        ex.optical_power_limiter,
        r.verdict(Criterion::OpticalPowerLimiter).pass,
    );
    expect(Criterion::RemoveFilter.name(), ex.remove_filter, r.verdict(Criterion::RemoveFilter).pass);
    expect(
        Criterion::DiscriminationLevelAdequate.name(),
        ex.discrimination_level_adequate,
        r.verdict(Criterion::DiscriminationLevelAdequate).pass,
    );
    expect("all_criteria", ex.all_criteria, r.combined.pass);
    Ok(())
}
