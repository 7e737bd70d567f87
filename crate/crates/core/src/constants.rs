//! Physical constants (CODATA 2018, SI) and unit conversions.
//!
//! Public configuration uses cyclic MHz; everything internal is angular rad/s.
//!
//! | quantity       | external        | internal          |
//! |----------------|-----------------|-------------------|
//! | frequency      | MHz (ν = ω/2π)  | rad/s             |
//! | drive power    | photons/ns      | photons/s         |
//! | time           | ns              | s                 |
//! | temperature    | K               | K                 |

use std::f64::consts::TAU;

/// Planck constant (J·s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = PLANCK / TAU;

/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Boltzmann constant (J/K), exact.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Magnetic flux quantum h/2e (Wb).
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

/// Resonator frequency used when none is configured (7 GHz).
pub const DEFAULT_RESONATOR_MHZ: f64 = 7000.0;

/// Cyclic MHz to angular rad/s.
#[inline]
pub fn mhz(nu_mhz: f64) -> f64 {
    TAU * 1e6 * nu_mhz
}

/// Angular rad/s to cyclic MHz.
#[inline]
pub fn to_mhz(omega: f64) -> f64 {
    omega / (TAU * 1e6)
}

/// Photons per ns to photons per s.
#[inline]
pub fn per_ns(p: f64) -> f64 {
    p * 1e9
}

#[inline]
pub fn to_per_ns(p: f64) -> f64 {
    p * 1e-9
}

#[inline]
pub fn ns(t_ns: f64) -> f64 {
    t_ns * 1e-9
}
