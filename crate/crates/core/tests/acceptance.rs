//! End-to-end acceptance run. Every criterion is evaluated even if an earlier
//! one fails; one PASS/FAIL line is printed per criterion and the test fails
//! if any criterion does.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdapd::attack::{
    blinding_sweep, control_curve, eq1_feasibility, fake_state_click_probabilities,
    run_bb84_fake_state,
};
use sdapd::countermeasures::{
    capacitive_response_vs_bias, evaluate_criteria, standard_attack_suite, AttackKind, Criterion,
    CriteriaSettings,
};
use sdapd::detector::DetectorConfig;
use sdapd::io::scenario::AnalysisSpec;
use sdapd::io::{load_scenario, run_scenario, Scenario};
use sdapd::rng::derive_seed;
use sdapd::sd::{dark_count_kink, dark_count_scan, sd_transform, Waveform};
use sdapd::units::{pj, to_pj};

use common::{enumerate_bb84, within_sigma};

const LEVEL: f64 = 0.025;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scenario(name: &str) -> Scenario {
    let path = scenario_dir().join(format!("{name}.toml"));
    load_scenario(&path, &DetectorConfig::default()).unwrap_or_else(|e| panic!("{e}"))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn sd_cancellation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(16..=64);
        let periods = rng.random_range(2..=20);
        let period: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x: Vec<f64> = period.iter().cycle().take(n * periods).copied().collect();
        let w = Waveform::new(x, 20e9, n, 0.0).unwrap();
        let y = sd_transform(&w).unwrap();
        worst = y.samples[n..].iter().fold(worst, |m, v| m.max(v.abs()));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("max |SD| beyond period 0 = {worst:e} V in {elapsed:.2?}"),
    )
}

fn blinding_threshold() -> Outcome {
    let s = scenario("blinding_sweep");
    let AnalysisSpec::BlindingSweep(spec) = &s.spec else { unreachable!() };
    let energies = spec.energies.values("energies").unwrap();
    let start = Instant::now();
    let points = blinding_sweep(&s.detector, &energies, 480, s.seed).unwrap();
    let elapsed = start.elapsed();
    let eps = 1e-9;
    let low_ok = points.iter().filter(|p| p.energy <= pj(8.09) * (1.0 + eps)).all(|p| !p.blinded);
    let high_ok = points
        .iter()
        .filter(|p| p.energy >= pj(8.92) * (1.0 - eps) && p.energy <= pj(61.09) * (1.0 + eps))
        .all(|p| p.blinded);
    let covers = energies.first().is_some_and(|&e| e <= pj(0.001) * (1.0 + eps))
        && energies.last().is_some_and(|&e| e >= pj(61.09) * (1.0 - eps));
    let flip = points.iter().find(|p| p.blinded).map(|p| to_pj(p.energy));
    outcome(
        low_ok && high_ok && covers && elapsed < Duration::from_secs(10),
        format!(
            "{} points, first blinded at {:?} pJ, {elapsed:.2?}",
            points.len(),
            flip
        ),
    )
}

fn pre_sd_amplitude() -> Outcome {
    let c = DetectorConfig::default();
    let p = &blinding_sweep(&c, &[pj(8.92)], 480, 5).unwrap()[0];
    let mv = p.pre_sd.mean_peak * 1e3;
    outcome((mv - 81.0).abs() <= 8.1, format!("{mv:.2} mV at 8.92 pJ"))
}

fn control_spec() -> (Scenario, Vec<f64>, Vec<f64>, usize) {
    let s = scenario("control_curve");
    let AnalysisSpec::ControlCurve(spec) = &s.spec else { unreachable!() };
    let blinds = spec.blinding_energies.values("blinding_energies").unwrap();
    let triggers = spec.trigger_energies.values("trigger_energies").unwrap();
    let periods = spec.periods;
    (s, blinds, triggers, periods)
}

fn control_endpoints() -> Outcome {
    let (s, blinds, triggers, periods) = control_spec();
    assert_eq!(periods, 960);
    let i = blinds.iter().position(|&b| (b - pj(11.55)).abs() < 1e-18).expect("11.55 pJ in the grid");
    let curve = control_curve(&s.detector, blinds[i], &triggers, periods, derive_seed(s.seed, i as u64)).unwrap();
    let eps = 1e-9;
    let never_ok = curve
        .iter()
        .filter(|p| p.trigger_energy <= pj(6.656) * (1.0 + eps))
        .all(|p| p.detection_probability == 0.0);
    let at = curve.iter().find(|p| (p.trigger_energy - pj(13.312)).abs() < pj(1e-6));
    let always_ok = at.is_some_and(|p| p.detection_probability == 1.0);
    let r = eq1_feasibility(&curve).unwrap();
    outcome(
        never_ok && always_ok && r.feasible,
        format!(
            "E_never = {:?} pJ, E_always = {:?} pJ, P(13.312 pJ) = {:?}, feasible = {}",
            r.e_never.map(to_pj),
            r.e_always.map(to_pj),
            at.map(|p| p.detection_probability),
            r.feasible
        ),
    )
}

fn max_silent_detection() -> Outcome {
    let (s, blinds, triggers, periods) = control_spec();
    let targets = [(16.51, 0.9937), (21.47, 0.273), (24.77, 0.0708), (28.06, 0.092), (31.36, 0.0367)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (blind, target) in targets {
        let i = blinds.iter().position(|&b| (b - pj(blind)).abs() < 1e-18).expect("blind in the grid");
        let curve = control_curve(&s.detector, blinds[i], &triggers, periods, derive_seed(s.seed, i as u64)).unwrap();
        let r = eq1_feasibility(&curve).unwrap();
        let ok = r.max_silent_detection.is_some_and(|m| (m - target).abs() <= 0.03);
        pass &= ok;
        parts.push(format!(
            "{blind} pJ: {:.2}% vs {:.2}%{}",
            r.max_silent_detection.unwrap_or(f64::NAN) * 100.0,
            target * 100.0,
            if ok { "" } else { " (off)" }
        ));
    }
    outcome(pass, parts.join(", "))
}

fn fake_state_qber() -> Outcome {
    let s = scenario("bb84_fake_state");
    let AnalysisSpec::Bb84(spec) = &s.spec else { unreachable!() };
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, session) in spec.sessions.iter().enumerate() {
        let params = session.params(&s.detector);
        let seed = derive_seed(s.seed, i as u64);
        let r = run_bb84_fake_state(&s.detector, &params, session.n_qubits, seed, session.channel_loss_db)
            .unwrap();
        let probs = fake_state_click_probabilities(&s.detector, &params, derive_seed(seed, 0)).unwrap();
        // Perfect control holds when half a trigger never clicks and a
        // full one always does.
        let feasible = probs.half == 0.0 && probs.full == 1.0 && probs.none == 0.0;
        let qber = r.qber.unwrap_or(f64::NAN);
        let ok = if feasible {
            session.n_qubits == 100_000 && r.errors == 0 && r.qber == Some(0.0) && r.eve_information == 1.0
        } else {
            let e = enumerate_bb84(&probs, session.channel_loss_db);
            within_sigma(qber, e.errors / e.sifted, r.sifted_key_length as f64, 3.0)
        };
        pass &= ok;
        parts.push(format!(
            "{}: feasible={feasible} qber={qber:.4} eve_information={:.4}",
            session.label, r.eve_information
        ));
    }
    let both_kinds = parts.iter().any(|p| p.contains("feasible=true")) && parts.iter().any(|p| p.contains("feasible=false"));
    let elapsed = start.elapsed();
    outcome(
        pass && both_kinds && elapsed < Duration::from_secs(30),
        format!("{} in {elapsed:.2?}", parts.join("; ")),
    )
}

fn dark_count_kink_anchor() -> Outcome {
    let c = DetectorConfig::default();
    let levels: Vec<f64> = (1..=40).map(|k| k as f64 * 0.5e-3).collect();
    let curve = dark_count_scan(&c, &levels, 400_000, 4).unwrap();
    let monotone = curve.windows(2).all(|w| w[1].dark_rate <= w[0].dark_rate);
    let kink = dark_count_kink(&curve);
    let ok = kink.is_some_and(|k| (k - 6e-3).abs() <= 1e-3);
    outcome(ok && monotone, format!("kink {:?} mV, monotone = {monotone}", kink.map(|k| k * 1e3)))
}

fn capacitive_flatness() -> Outcome {
    let reductions: Vec<f64> = (0..=12).map(|k| k as f64 * 0.5).collect();
    let mut on = DetectorConfig::default();
    on.filter_enabled = true;
    let mut off = on.clone();
    off.filter_enabled = false;
    let filtered = capacitive_response_vs_bias(&on, &reductions, 1920, 8).unwrap();
    let raw = capacitive_response_vs_bias(&off, &reductions, 1920, 8).unwrap();
    let max_on = filtered.iter().map(|p| p.pre_sd.mean_peak).fold(f64::NEG_INFINITY, f64::max);
    let crossing = raw.iter().find(|p| p.pre_sd.mean_peak >= LEVEL).map(|p| p.reduction);
    outcome(
        max_on < LEVEL && crossing.is_some(),
        format!(
            "filter on max {:.2} mV; filter off crosses 25 mV at {:?} V reduction",
            max_on * 1e3,
            crossing
        ),
    )
}

fn countermeasure_outcomes() -> Outcome {
    let c = DetectorConfig::default();
    let settings = CriteriaSettings::default();
    let suite = standard_attack_suite(&c, &settings.monitor, pj(11.55), derive_seed(9, 0));
    let r = evaluate_criteria(&c, &suite, &settings, derive_seed(9, 1)).unwrap();
    let baseline_pulsed = r
        .baseline
        .scenarios
        .iter()
        .filter(|s| s.kind == AttackKind::Pulsed)
        .any(|s| s.compromised());
    let cw_alarmed = r
        .baseline
        .scenarios
        .iter()
        .filter(|s| s.kind == AttackKind::Cw)
        .all(|s| s.alarmed);
    let bypass = r
        .baseline
        .scenarios
        .iter()
        .find(|s| s.scenario == "duty_cycled")
        .is_some_and(|s| s.blinded && !s.alarmed);
    let resistor = r.verdict(Criterion::RemoveBiasResistor).pass;
    let limiter = r.verdict(Criterion::OpticalPowerLimiter).pass;
    outcome(
        !r.baseline.pass && baseline_pulsed && resistor && limiter && bypass && cw_alarmed,
        format!(
            "baseline pass={} (pulsed compromised={baseline_pulsed}), no resistor pass={resistor}, \
             limiter pass={limiter}, duty-cycled bypass={bypass}, cw alarmed={cw_alarmed}",
            r.baseline.pass
        ),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), bytes);
            }
        }
    }
    out
}

fn reproducibility() -> Outcome {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let runs: Vec<BTreeMap<PathBuf, Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            for p in &paths {
                let s = load_scenario(p, &DetectorConfig::default()).unwrap();
                run_scenario(&s, dir.path()).unwrap();
            }
            read_tree(dir.path())
        })
        .collect();
    let identical = runs[0] == runs[1];
    outcome(
        identical && paths.len() == 6 && !runs[0].is_empty(),
        format!("{} scenarios, {} files, identical = {identical}", paths.len(), runs[0].len()),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 SD cancellation", sd_cancellation),
        ("2 blinding threshold", blinding_threshold),
        ("3 pre-SD amplitude", pre_sd_amplitude),
        ("4 control-curve endpoints", control_endpoints),
        ("5 maximum silent detection", max_silent_detection),
        ("6 fake-state QBER", fake_state_qber),
        ("7 dark-count kink", dark_count_kink_anchor),
        ("8 capacitive flatness", capacitive_flatness),
        ("9 countermeasure outcomes", countermeasure_outcomes),
        ("10 reproducibility", reproducibility),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let o = check();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
