use rand::Rng;
use rand_distr::StandardNormal;

use super::config::DetectorConfig;
use super::filter::{capacitive_template, pulse_shape};
use super::light::{Illumination, PulseKind, PulseTrain};
use super::model::{
    avalanche_amplitude, bias_droop_step, capacitive_amplitude, firing_rate, geiger_jitter,
    linear_noise, linear_response, DetectorState,
};
use crate::error::Result;
use crate::rng::{rng_for, SimRng};
use crate::sd::Waveform;

/// Pre-SD waveform plus the bias state at the start of every recorded gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub waveform: Waveform,
    pub states: Vec<DetectorState>,
}

/// Per-gate peaks of a run, computed without materialising the waveform.
///
/// `sd[k]` is the period-`k` peak of the self-differenced recording, so it
/// equals the peak of `sd_transform(simulate_response(..).waveform)` in that
/// period, including the zero-padded first period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakTrace {
    pub pre_sd: Vec<f64>,
    pub sd: Vec<f64>,
    /// Gates that received at least one trigger pulse.
    pub triggered: Vec<bool>,
    pub states: Vec<DetectorState>,
}

#[derive(Debug, Clone, Copy, Default)]
struct GateLight {
    /// Total pulse energy arriving in the gate period, J.
    energy: f64,
    /// Pulse energy weighted by the gate's sensitive window, J.
    window_energy: f64,
    /// Mean cw power over the gate period, W.
    cw_power: f64,
    triggered: bool,
}

struct Engine<'a> {
    config: &'a DetectorConfig,
    trains: &'a [PulseTrain],
    period: f64,
    shape: Vec<f64>,
    cap: Vec<f64>,
    window_scale: f64,
}

impl<'a> Engine<'a> {
    fn new(config: &'a DetectorConfig, illum: &'a Illumination) -> Self {
        let sigma = config.model.gate_window;
        Engine {
            config,
            trains: &illum.trains,
            period: config.gate_period(),
            shape: pulse_shape(config),
            cap: capacitive_template(config),
            window_scale: 1.0 / (2.0 * sigma * sigma),
        }
    }

    fn energy_jitter(&self, kind: PulseKind) -> f64 {
        match kind {
            PulseKind::Blinding => self.config.model.blinding_energy_jitter,
            PulseKind::Trigger => self.config.model.trigger_energy_jitter,
            PulseKind::SignalPhoton | PulseKind::Cw => 0.0,
        }
    }

    fn light(&self, gate: i64, rng: &mut SimRng) -> GateLight {
        let t = self.period;
        let start = gate as f64 * t;
        let end = start + t;
        let centre = start + 0.5 * t;
        let mut out = GateLight::default();
        for train in self.trains {
            let rate = train.repetition_rate;
            if train.kind == PulseKind::Cw {
                let (on, off) = if train.is_continuous() {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    let on = train.phase_offset;
                    (on, on + train.pulse_count as f64 / rate)
                };
                let overlap = (end.min(off) - start.max(on)).max(0.0);
                out.cw_power += train.mean_power() * overlap / t;
                continue;
            }
            let t0 = train.pulse_time(0, t);
            let mut lo = ((start - t0) * rate - 1e-9).ceil() as i64;
            let mut hi = ((end - t0) * rate - 1e-9).ceil() as i64;
            if !train.is_continuous() {
                lo = lo.max(0);
                hi = hi.min(train.pulse_count as i64);
            }
            let jitter = self.energy_jitter(train.kind);
            for m in lo..hi {
                let z: f64 = rng.sample(StandardNormal);
                let e = train.energy_per_pulse * (1.0 + jitter * z).max(0.0);
                let d = train.pulse_time(m, t) - centre;
                out.energy += e;
                out.window_energy += e * (-d * d * self.window_scale).exp();
                if train.kind == PulseKind::Trigger {
                    out.triggered = true;
                }
            }
        }
        out
    }
}

/// Drive the gate recurrence. `on_gate` sees every recorded gate in order
/// with its start-of-gate state, trigger flag and, if `want_samples`, its
/// output samples.
fn run<F>(config: &DetectorConfig, illum: &Illumination, want_samples: bool, mut on_gate: F) -> Result<()>
where
    F: FnMut(&DetectorState, bool, &[f64]),
{
    config.validate()?;
    illum.validate(config)?;
    let engine = Engine::new(config, illum);
    let m = &config.model;
    let periods = illum.periods(config) as i64;
    let warmup = illum.warmup(config) as i64;
    let n = config.samples_per_gate();
    let t = engine.period;
    let window_width = (2.0 * std::f64::consts::PI).sqrt() * m.gate_window;
    let mut rng = rng_for(illum.rng_seed, 0);
    let mut state = DetectorState::fresh(config);
    let mut samples = vec![0.0; if want_samples { n } else { 0 }];
    let nominal_cap = capacitive_amplitude(config, config.nominal_excess());

    for gate in -warmup..periods {
        let light = engine.light(gate, &mut rng);
        let u: f64 = rng.random();
        let z_g: f64 = rng.sample(StandardNormal);
        let z_l: f64 = rng.sample(StandardNormal);
        let z_c: f64 = rng.sample(StandardNormal);

        let window_energy = light.window_energy + light.cw_power * window_width;
        let lambda = firing_rate(config, &state, window_energy);
        let fired = lambda > 0.0 && u < -(-lambda).exp_m1();
        let a_geiger = if fired {
            let mean = avalanche_amplitude(config, &state, window_energy);
            (mean * (1.0 + geiger_jitter(config, state.excess_voltage) * z_g)).max(0.0)
        } else {
            0.0
        };

        if gate >= 0 {
            if want_samples {
                let v = state.excess_voltage;
                let a_lin = linear_response(config, light.energy)
                    + linear_noise(config, v, light.energy) * z_l;
                let a_cap = (capacitive_amplitude(config, v) + nominal_cap * m.capacitive_jitter * z_c)
                    .max(0.0);
                let a_pulse = a_geiger + a_lin;
                for (i, s) in samples.iter_mut().enumerate() {
                    *s = a_cap * engine.cap[i] + a_pulse * engine.shape[i];
                }
            }
            on_gate(&state, light.triggered, &samples);
        }

        let charge = m.responsivity * (light.energy + light.cw_power * t)
            + m.avalanche_charge_per_volt * a_geiger;
        let mut next = bias_droop_step(config, &state, charge / t, t);
        if fired {
            next.trapped_carriers += 1.0;
        }
        state = next;
    }
    Ok(())
}

/// Pre-SD output waveform and per-gate bias state for `illum`.
pub fn simulate_response(config: &DetectorConfig, illum: &Illumination) -> Result<Response> {
    let n = config.samples_per_gate();
    let periods = illum.periods(config);
    let mut samples = Vec::with_capacity(n * periods);
    let mut states = Vec::with_capacity(periods);
    run(config, illum, true, |s, _, x| {
        states.push(*s);
        samples.extend_from_slice(x);
    })?;
    let waveform = Waveform::new(samples, config.sample_rate, n, 0.0)?;
    Ok(Response { waveform, states })
}

/// Per-gate pre-SD and SD peaks for `illum`, streaming one gate at a time.
pub fn simulate_peaks(config: &DetectorConfig, illum: &Illumination) -> Result<PeakTrace> {
    let n = config.samples_per_gate();
    let periods = illum.periods(config);
    let mut trace = PeakTrace {
        pre_sd: Vec::with_capacity(periods),
        sd: Vec::with_capacity(periods),
        triggered: Vec::with_capacity(periods),
        states: Vec::with_capacity(periods),
    };
    let mut prev = vec![0.0; n];
    run(config, illum, true, |s, trig, x| {
        let mut pre = f64::NEG_INFINITY;
        let mut sd = f64::NEG_INFINITY;
        for (v, p) in x.iter().zip(prev.iter_mut()) {
            pre = pre.max(*v);
            sd = sd.max(*v - *p);
            *p = *v;
        }
        trace.pre_sd.push(pre);
        trace.sd.push(sd);
        trace.triggered.push(trig);
        trace.states.push(*s);
    })?;
    Ok(trace)
}

/// Per-gate bias state only. Draws the same random numbers as the waveform
/// paths, so the trace is identical to theirs.
pub fn simulate_states(config: &DetectorConfig, illum: &Illumination) -> Result<Vec<DetectorState>> {
    let mut states = Vec::with_capacity(illum.periods(config));
    run(config, illum, false, |s, _, _| states.push(*s))?;
    Ok(states)
}
