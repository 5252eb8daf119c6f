//! Physical constants and unit conversions.
//!
//! Internally everything is angular (rad/us). Configuration files and CLI
//! flags carry linear frequencies with explicit unit suffixes, exactly as
//! quoted on instruments, and are converted here once at the boundary.

use std::f64::consts::TAU;

/// Reduced Planck constant, J s (CODATA 2018, h exact).
pub const HBAR_J_S: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K (exact).
pub const KB_J_PER_K: f64 = 1.380_649e-23;

/// hbar/kB in kelvin per (rad/us).
///
/// For an angular frequency `w` in rad/us, `hbar w / kB = HBAR_OVER_KB * w`
/// kelvin. Equivalently, a linear frequency of 1 GHz corresponds to
/// 47.9924 mK, the number used for every occupation/temperature conversion.
pub const HBAR_OVER_KB_K_PER_RAD_US: f64 = HBAR_J_S / KB_J_PER_K * 1e6;

/// Linear GHz to angular rad/us.
pub fn ghz(f: f64) -> f64 {
    TAU * 1e3 * f
}

/// Linear MHz to angular rad/us.
pub fn mhz(f: f64) -> f64 {
    TAU * f
}

/// Linear kHz to angular rad/us.
pub fn khz(f: f64) -> f64 {
    TAU * 1e-3 * f
}

/// Angular rad/us back to linear GHz.
pub fn to_ghz(w: f64) -> f64 {
    w / (TAU * 1e3)
}

/// Angular rad/us back to linear MHz.
pub fn to_mhz(w: f64) -> f64 {
    w / TAU
}

/// Millikelvin to kelvin.
pub fn mk(t: f64) -> f64 {
    1e-3 * t
}

/// Kelvin to millikelvin.
pub fn to_mk(t: f64) -> f64 {
    1e3 * t
}

/// Canonical rendering of the constants table, hashed into run manifests so
/// outputs can be tied to the exact constant values that produced them.
pub fn constants_table() -> String {
    format!(
        "hbar_J_s={HBAR_J_S:e};kB_J_per_K={KB_J_PER_K:e};hbar_over_kB_K_per_rad_us={HBAR_OVER_KB_K_PER_RAD_US:e}"
    )
}
