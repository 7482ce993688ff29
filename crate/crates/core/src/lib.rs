//! Simulator of a gated self-differencing InGaAs APD single-photon detector
//! under bright pulsed illumination.
//!
//! The crate is organised in layers:
//!
//! * [`detector`] turns an [`Illumination`](detector::Illumination) into a
//!   pre-SD output waveform and a per-gate trace of the bias state.
//! * [`sd`] applies the software self-differencing transform and collects
//!   per-period peak statistics. It works on simulated and ingested traces.
//! * [`attack`] drives blinding sweeps, trigger-control curves, the
//!   `E_always <= 2 E_never` check and a fake-state BB84 session.
//! * [`countermeasures`] models photocurrent monitoring, an optical power
//!   limiter and the capacitive-response probe, and scores detector
//!   configurations against an attack suite.
//! * [`io`] reads calibration, scenario and waveform files and writes CSV.

pub mod attack;
pub mod countermeasures;
pub mod detector;
pub mod error;
pub mod io;
pub mod rng;
pub mod sd;
pub mod units;

pub use error::{Error, Result};
