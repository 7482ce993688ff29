//! Oracles shared by several test targets.
#![allow(dead_code)]

use sdapd::attack::ClickProbabilities;
use sdapd::units::transmittance_from_db;

/// Expected per-qubit rates of the intercept-resend session, by exhaustive
/// enumeration of Alice's, Eve's and Bob's choices and of channel survival.
pub struct Bb84Expectation {
    pub detected: f64,
    pub sifted: f64,
    pub errors: f64,
    pub known: f64,
    pub doubles: f64,
}

pub fn enumerate_bb84(p: &ClickProbabilities, loss_db: f64) -> Bb84Expectation {
    let t = transmittance_from_db(loss_db);
    let mut e = Bb84Expectation { detected: 0.0, sifted: 0.0, errors: 0.0, known: 0.0, doubles: 0.0 };
    for ab in 0..2 {
        for abit in 0..2 {
            for eb in 0..2 {
                for ebit in 0..2 {
                    // Eve reads Alice's bit in the matching basis, a coin otherwise.
                    let w_eve = if eb == ab { if ebit == abit { 1.0 } else { 0.0 } } else { 0.5 };
                    for bb in 0..2 {
                        for (arrived, w_arr) in [(true, t), (false, 1.0 - t)] {
                            let w = 0.125 * w_eve * w_arr * 0.5;
                            if w == 0.0 {
                                continue;
                            }
                            let click = |bit: usize| {
                                if !arrived {
                                    p.none
                                } else if eb != bb {
                                    p.half
                                } else if bit == ebit {
                                    p.full
                                } else {
                                    p.none
                                }
                            };
                            let (p0, p1) = (click(0), click(1));
                            let only = [p0 * (1.0 - p1), p1 * (1.0 - p0)];
                            let both = p0 * p1;
                            // Probability that Bob ends up with bit b.
                            let bob = |b: usize| only[b] + 0.5 * both;
                            let any = only[0] + only[1] + both;
                            e.detected += w * any;
                            e.doubles += w * both;
                            if bb == ab {
                                e.sifted += w * any;
                                e.errors += w * bob(1 - abit);
                                e.known += w * bob(ebit);
                            }
                        }
                    }
                }
            }
        }
    }
    e
}

/// `observed` lies within `k` binomial standard deviations of `expected_rate`.
pub fn within_sigma(observed: f64, expected_rate: f64, trials: f64, k: f64) -> bool {
    let sd = (expected_rate * (1.0 - expected_rate) / trials).sqrt().max(1e-12);
    (observed - expected_rate).abs() <= k * sd
}
