//! Unit conversions between the internal angular units (rad/µs) and the
//! cyclic units used at human-facing boundaries (kHz, MHz).

use std::f64::consts::PI;

/// Cyclic detuning in kHz to angular frequency in rad/µs.
pub fn khz_to_rad_per_us(khz: f64) -> f64 {
    2.0 * PI * khz * 1e-3
}

pub fn rad_per_us_to_khz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e3
}

/// Cyclic frequency in MHz to angular frequency in rad/µs.
pub fn mhz_to_rad_per_us(mhz: f64) -> f64 {
    2.0 * PI * mhz
}

pub fn rad_per_us_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}
