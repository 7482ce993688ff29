use crate::detector::{positive, Illumination, PulseKind, PulseTrain};
use crate::error::Result;

/// Clamp response time of the modelled limiter, s.
pub const DEFAULT_RESPONSE_TIME: f64 = 1e-9;

/// Ideal optical power limiter in front of the detector.
///
/// Every pulse whose peak power exceeds `limit` leaves with energy
/// `limit * pulse_width`. The clamp needs `response_time` to engage, so the
/// first pulse of a finite train may additionally pass up to
/// `limit * response_time` of its excess energy; continuous trains are taken
/// to have been clamped since long before the record starts. Cw light is
/// clamped to `limit`.
pub fn power_limiter(illum: &Illumination, limit: f64, response_time: f64) -> Result<Illumination> {
    positive("limit", limit)?;
    if response_time != 0.0 {
        positive("response_time", response_time)?;
    }
    let mut trains = Vec::with_capacity(illum.trains.len());
    for t in &illum.trains {
        if t.peak_power() <= limit {
            trains.push(t.clone());
            continue;
        }
        if t.kind == PulseKind::Cw {
            trains.push(PulseTrain {
                energy_per_pulse: limit / t.repetition_rate,
                ..t.clone()
            });
            continue;
        }
        let clamped = limit * t.pulse_width;
        if t.is_continuous() {
            trains.push(PulseTrain {
                energy_per_pulse: clamped,
                ..t.clone()
            });
            continue;
        }
        let transient = (t.energy_per_pulse - clamped).min(limit * response_time);
        trains.push(PulseTrain {
            // min() keeps rounding in clamped + transient from adding energy.
            energy_per_pulse: (clamped + transient).min(t.energy_per_pulse),
            pulse_count: 1,
            ..t.clone()
        });
        if t.pulse_count > 1 {
            trains.push(PulseTrain {
                energy_per_pulse: clamped,
                phase_offset: t.phase_offset + 1.0 / t.repetition_rate,
                pulse_count: t.pulse_count - 1,
                ..t.clone()
            });
        }
    }
    Ok(Illumination {
        trains,
        ..illum.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn illum(trains: Vec<PulseTrain>) -> Illumination {
        Illumination::new(trains, 1.6e-9 * 10.0, 0)
    }

    #[test]
    fn weak_light_passes_unchanged() {
        let i = illum(vec![PulseTrain::blinding(625e6, 1e-15)]);
        assert_eq!(power_limiter(&i, 1e-3, 1e-9).unwrap(), i);
    }

    #[test]
    fn strong_pulses_are_clamped() {
        let i = illum(vec![PulseTrain::blinding(625e6, 11.55e-12)]);
        let o = power_limiter(&i, 1e-3, 1e-9).unwrap();
        assert!((o.trains[0].energy_per_pulse - 0.1e-12).abs() < 1e-24);
    }

    #[test]
    fn finite_train_gets_bounded_transient() {
        let i = illum(vec![PulseTrain::trigger(312.5e6, 11.55e-12).with_count(5)]);
        let o = power_limiter(&i, 1e-3, 1e-9).unwrap();
        assert_eq!(o.trains.len(), 2);
        assert!((o.trains[0].energy_per_pulse - 1.1e-12).abs() < 1e-24);
        assert_eq!(o.trains[0].pulse_count, 1);
        assert_eq!(o.trains[1].pulse_count, 4);
        assert!((o.trains[1].pulse_time(0, 1.6e-9) - i.trains[0].pulse_time(1, 1.6e-9)).abs() < 1e-20);
    }

    #[test]
    fn cw_is_clamped_to_limit() {
        let i = illum(vec![PulseTrain::cw(7.22e-3)]);
        let o = power_limiter(&i, 1e-3, 1e-9).unwrap();
        assert!((o.trains[0].mean_power() - 1e-3).abs() < 1e-15);
    }
}
