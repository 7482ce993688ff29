//! Physical constants and unit helpers. Everything inside the crate is SI.

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Operating wavelength of the attack lasers and the QKD channel, m.
pub const WAVELENGTH: f64 = 1550e-9;

/// Energy of one 1550 nm photon, J.
pub fn photon_energy() -> f64 {
    PLANCK * SPEED_OF_LIGHT / WAVELENGTH
}

pub const PICOJOULE: f64 = 1e-12;

pub fn to_pj(energy: f64) -> f64 {
    energy / PICOJOULE
}

pub fn pj(energy_pj: f64) -> f64 {
    energy_pj * PICOJOULE
}

/// Convert a channel loss in dB to a power transmittance.
pub fn transmittance_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn photon_energy_at_1550nm() {
        let e = photon_energy();
        assert!((e - 1.2816e-19).abs() < 1e-22, "{e}");
    }

    #[test]
    fn loss_conversion() {
        assert_eq!(transmittance_from_db(0.0), 1.0);
        assert!((transmittance_from_db(10.0) - 0.1).abs() < 1e-15);
        assert!((transmittance_from_db(3.0) - 0.501_187).abs() < 1e-6);
    }
}
