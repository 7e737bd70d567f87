//! Steady-state cavity transmission conditioned on the qubit state.
//!
//! The ancilla is resonant with the cavity when the qubit is in `g` and pushed
//! away by 2g_zz when it is in `e`. In the low-power limit the transmission is a
//! linear response; at higher drive the ancilla saturates and the response
//! interpolates back to the empty-cavity Lorentzian.

use std::fmt;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::CouplingSet;
use crate::{Error, Result};

/// Logical qubit state. `Ground` has σz = −1, `Excited` has σz = +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitState {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
}

impl QubitState {
    pub const BOTH: [QubitState; 2] = [QubitState::Ground, QubitState::Excited];

    pub fn sigma_z(self) -> i8 {
        match self {
            QubitState::Ground => -1,
            QubitState::Excited => 1,
        }
    }

    pub fn label(self) -> char {
        match self {
            QubitState::Ground => 'g',
            QubitState::Excited => 'e',
        }
    }

    /// Ancilla frequency shift δ = −g_zz (1 + σz): 0 for `g`, −2g_zz for `e`.
    pub fn shift(self, couplings: &CouplingSet) -> f64 {
        -couplings.g_zz() * (1.0 + f64::from(self.sigma_z()))
    }

    pub fn other(self) -> Self {
        match self {
            QubitState::Ground => QubitState::Excited,
            QubitState::Excited => QubitState::Ground,
        }
    }
}

impl fmt::Display for QubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl std::str::FromStr for QubitState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(QubitState::Ground),
            "e" => Ok(QubitState::Excited),
            other => Err(Error::domain(format!("unknown qubit state `{other}`"))),
        }
    }
}

/// Units in which Γ and κ enter the saturation power.
///
/// With `Angular` the saturation power is directly a photon flux in s⁻¹.
/// `Cyclic` divides it by 2π and is kept only so both readings can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    Angular,
    Cyclic,
}

pub const DEFAULT_RATE_CONVENTION: RateConvention = RateConvention::Angular;

/// Drive tone: angular frequency and incident flux in photons/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub omega: f64,
    pub flux: f64,
}

impl Probe {
    pub fn new(omega: f64, flux: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::domain("probe frequency must be finite"));
        }
        if !(flux.is_finite() && flux >= 0.0) {
            return Err(Error::domain(format!("probe flux must be >= 0, got {flux}")));
        }
        Ok(Self { omega, flux })
    }

    /// Drive amplitude b_in = √p, real and positive.
    pub fn amplitude(&self) -> f64 {
        self.flux.sqrt()
    }
}

fn inverse_t_empty(omega: f64, couplings: &CouplingSet) -> C64 {
    C64::new(-1.0, -(couplings.omega_r() - omega) / couplings.kappa())
}

/// Empty-cavity transmission t₀(ω) = −[1 + i(ω_r − ω)/κ]⁻¹.
pub fn t_empty(omega: f64, couplings: &CouplingSet) -> C64 {
    inverse_t_empty(omega, couplings).inv()
}

/// Shift δ_L = g_zz(√(1 + g_a²/g_zz²) − 1) of the excited-state cavity peak.
pub fn dispersive_shift(couplings: &CouplingSet) -> f64 {
    let (g_zz, g_a) = (couplings.g_zz(), couplings.g_a());
    // Same quantity, written without the cancellation for small g_a/g_zz.
    g_a * g_a / (g_zz.hypot(g_a) + g_zz)
}

/// Readout tone ω_r + δ_L, where the excited-state transmission peaks.
pub fn readout_frequency(couplings: &CouplingSet) -> f64 {
    couplings.omega_r() + dispersive_shift(couplings)
}

fn ancilla_detuning(omega: f64, state: QubitState, couplings: &CouplingSet) -> f64 {
    couplings.omega_r() + state.shift(couplings) - omega
}

/// Low-power transmission t_j = [1/t₀ + iΓ/(2Δ_a)]⁻¹ with Δ_a = ω_r + δ_j − ω.
///
/// At the ancilla pole Δ_a = 0 the limit value 0 is returned.
pub fn t_linear(omega: f64, state: QubitState, couplings: &CouplingSet) -> C64 {
    if couplings.g_a() == 0.0 {
        return t_empty(omega, couplings);
    }
    let detuning = ancilla_detuning(omega, state, couplings);
    if detuning == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let atom = C64::new(0.0, couplings.gamma() / (2.0 * detuning));
    (inverse_t_empty(omega, couplings) + atom).inv()
}

/// Saturation power in photons/s under the default rate convention.
pub fn saturation_power(omega: f64, state: QubitState, couplings: &CouplingSet) -> f64 {
    saturation_power_with(omega, state, couplings, DEFAULT_RATE_CONVENTION)
}

/// p_s/Γ = (Δ_a/Γ)² + [(ω_r − ω)Δ_a/(Γκ) − 1/2]².
pub fn saturation_power_with(
    omega: f64,
    state: QubitState,
    couplings: &CouplingSet,
    convention: RateConvention,
) -> f64 {
    let gamma = couplings.gamma();
    if gamma == 0.0 {
        return f64::INFINITY;
    }
    let detuning = ancilla_detuning(omega, state, couplings);
    let cavity_detuning = couplings.omega_r() - omega;
    let a = detuning / gamma;
    let b = cavity_detuning * detuning / (gamma * couplings.kappa()) - 0.5;
    let ps = gamma * (a * a + b * b);
    match convention {
        RateConvention::Angular => ps,
        RateConvention::Cyclic => ps / std::f64::consts::TAU,
    }
}

/// Saturating transmission at drive flux `p` (photons/s).
pub fn t_full(omega: f64, state: QubitState, p: f64, couplings: &CouplingSet) -> C64 {
    t_full_with(omega, state, p, couplings, DEFAULT_RATE_CONVENTION)
}

pub fn t_full_with(
    omega: f64,
    state: QubitState,
    p: f64,
    couplings: &CouplingSet,
    convention: RateConvention,
) -> C64 {
    let t0 = t_empty(omega, couplings);
    if couplings.g_a() == 0.0 {
        return t0;
    }
    let ps = saturation_power_with(omega, state, couplings, convention);
    let saturation = 1.0 / (1.0 + p / ps);
    let detuning = ancilla_detuning(omega, state, couplings);
    // 2iΔ_a / (Γ t₀)
    let x = C64::new(0.0, 2.0 * detuning / couplings.gamma()) * inverse_t_empty(omega, couplings);
    t0 * (1.0 - saturation / (1.0 - x))
}

/// Conditional transmitted flux p_t|j = |t_j|² p.
pub fn transmitted_power(omega: f64, state: QubitState, p: f64, couplings: &CouplingSet) -> f64 {
    transmitted_power_with(omega, state, p, couplings, DEFAULT_RATE_CONVENTION)
}

pub fn transmitted_power_with(
    omega: f64,
    state: QubitState,
    p: f64,
    couplings: &CouplingSet,
    convention: RateConvention,
) -> f64 {
    t_full_with(omega, state, p, couplings, convention).norm_sqr() * p
}

/// Mean intracavity photon number n̄_j = p_t|j / κ.
pub fn intracavity_photons(omega: f64, state: QubitState, p: f64, couplings: &CouplingSet) -> f64 {
    transmitted_power(omega, state, p, couplings) / couplings.kappa()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionPoint {
    pub omega: f64,
    pub t: C64,
    pub power_ratio: f64,
}

/// A local maximum of |t|², refined by a three-point parabola.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub grid_index: usize,
    pub omega: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub qubit_state: QubitState,
    pub probe_power: f64,
    pub points: Vec<TransmissionPoint>,
}

/// Vertex of the parabola through three points; falls back to the middle
/// point when the three are collinear.
pub(crate) fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let (y0, y1, y2) = (y[0], y[1], y[2]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if curvature >= 0.0 || !curvature.is_finite() {
        return (x1, y1);
    }
    // y = y1 + s (x - x1) + c (x - x1)^2 around the middle point.
    let slope = d01 + curvature * (x1 - x0);
    let shift = (-slope / (2.0 * curvature)).clamp(x0 - x1, x2 - x1);
    (x1 + shift, y1 + slope * shift + curvature * shift * shift)
}

impl Spectrum {
    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|pt| pt.omega)
    }

    /// Interior local maxima of |t|², in increasing frequency.
    pub fn peaks(&self) -> Vec<Peak> {
        let pts = &self.points;
        let mut peaks = Vec::new();
        for i in 1..pts.len().saturating_sub(1) {
            let (l, c, r) = (
                pts[i - 1].power_ratio,
                pts[i].power_ratio,
                pts[i + 1].power_ratio,
            );
            if c > l && c >= r {
                let (omega, height) = parabolic_vertex(
                    [pts[i - 1].omega, pts[i].omega, pts[i + 1].omega],
                    [l, c, r],
                );
                peaks.push(Peak {
                    grid_index: i,
                    omega,
                    height,
                });
            }
        }
        peaks
    }

    pub fn dominant_peak(&self) -> Option<Peak> {
        self.peaks()
            .into_iter()
            .max_by(|a, b| a.height.total_cmp(&b.height))
    }
}

pub fn spectrum(
    state: QubitState,
    p: f64,
    omega_grid: &[f64],
    couplings: &CouplingSet,
) -> Result<Spectrum> {
    spectrum_with(state, p, omega_grid, couplings, DEFAULT_RATE_CONVENTION)
}

pub fn spectrum_with(
    state: QubitState,
    p: f64,
    omega_grid: &[f64],
    couplings: &CouplingSet,
    convention: RateConvention,
) -> Result<Spectrum> {
    if omega_grid.is_empty() {
        return Err(Error::domain("spectrum grid is empty"));
    }
    if omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("spectrum grid must be strictly increasing"));
    }
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::domain(format!("probe power must be >= 0, got {p}")));
    }
    let points = omega_grid
        .par_iter()
        .map(|&omega| {
            let t = t_full_with(omega, state, p, couplings, convention);
            TransmissionPoint {
                omega,
                t,
                power_ratio: t.norm_sqr(),
            }
        })
        .collect();
    Ok(Spectrum {
        qubit_state: state,
        probe_power: p,
        points,
    })
}

/// Evenly spaced grid of `n` points on [lo, hi].
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Argmax of |t_e(ω)|² at drive flux `p` near ω_r + δ_L.
pub fn refined_probe_frequency(couplings: &CouplingSet, p: f64) -> f64 {
    let center = readout_frequency(couplings);
    let half_span = if couplings.g_a() > 0.0 {
        0.5 * couplings.g_a()
    } else {
        couplings.kappa()
    };
    let grid = linear_grid(center - half_span, center + half_span, 4001);
    let resp = spectrum(QubitState::Excited, p, &grid, couplings)
        .expect("refinement grid is non-empty and increasing");
    resp.dominant_peak().map(|pk| pk.omega).unwrap_or(center)
}
