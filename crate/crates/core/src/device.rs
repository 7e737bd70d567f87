//! Circuit parameters, the coupling constants they imply, and regime checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constants::{mhz, to_mhz, ELEMENTARY_CHARGE, FLUX_QUANTUM, HBAR};
use crate::{Error, Result};

/// Transmon regime bounds on E_J/E_C.
pub const TRANSMON_RATIO_RANGE: (f64, f64) = (25.0, 100.0);

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and > 0, got {value}")))
    }
}

/// Per-junction critical current and capacitance plus the coupling inductance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionCircuit {
    critical_current: f64,
    capacitance: f64,
    inductance: f64,
}

impl JunctionCircuit {
    /// Amperes, farads, henries.
    pub fn new(critical_current: f64, capacitance: f64, inductance: f64) -> Result<Self> {
        require_positive("critical current", critical_current)?;
        require_positive("capacitance", capacitance)?;
        require_positive("inductance", inductance)?;
        Ok(Self {
            critical_current,
            capacitance,
            inductance,
        })
    }

    pub fn critical_current(&self) -> f64 {
        self.critical_current
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    pub fn inductance(&self) -> f64 {
        self.inductance
    }
}

/// Josephson, charging and inductive energies in joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitEnergies {
    pub josephson: f64,
    pub charging: f64,
    pub inductive: f64,
}

impl CircuitEnergies {
    pub fn new(josephson: f64, charging: f64, inductive: f64) -> Result<Self> {
        require_positive("E_J", josephson)?;
        require_positive("E_C", charging)?;
        require_positive("E_L", inductive)?;
        Ok(Self {
            josephson,
            charging,
            inductive,
        })
    }

    pub fn ej_over_ec(&self) -> f64 {
        self.josephson / self.charging
    }

    pub fn warnings(&self) -> Vec<RegimeWarning> {
        let ratio = self.ej_over_ec();
        let (lo, hi) = TRANSMON_RATIO_RANGE;
        if (lo..=hi).contains(&ratio) {
            Vec::new()
        } else {
            vec![RegimeWarning::TransmonRatio { ratio }]
        }
    }
}

/// E_J = Φ₀I_c/2π, E_C = e²/2C, E_L = (Φ₀/2π)²/L.
pub fn energies_from_junction(circuit: &JunctionCircuit) -> CircuitEnergies {
    let reduced_flux = FLUX_QUANTUM / std::f64::consts::TAU;
    CircuitEnergies {
        josephson: reduced_flux * circuit.critical_current,
        charging: ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * circuit.capacitance),
        inductive: reduced_flux * reduced_flux / circuit.inductance,
    }
}

/// Longitudinal qubit–ancilla coupling g_zz = E_C / (ħ √(1 + 2E_L/E_J)), in rad/s.
pub fn cross_kerr(energies: &CircuitEnergies) -> f64 {
    energies.charging / (HBAR * (1.0 + 2.0 * energies.inductive / energies.josephson).sqrt())
}

/// Every frequency and coupling of the model, stored as angular frequencies (rad/s).
///
/// `g_a` may be zero (empty-cavity limit); all other fields are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    omega_r: f64,
    omega_a: f64,
    omega_qb: f64,
    g_zz: f64,
    g_a: f64,
    kappa: f64,
}

impl CouplingSet {
    /// Fully explicit constructor; no frequency matching is imposed.
    pub fn new(
        omega_r: f64,
        omega_a: f64,
        omega_qb: f64,
        g_zz: f64,
        g_a: f64,
        kappa: f64,
    ) -> Result<Self> {
        require_positive("omega_r", omega_r)?;
        require_positive("omega_a", omega_a)?;
        require_positive("omega_qb", omega_qb)?;
        require_positive("g_zz", g_zz)?;
        require_positive("kappa", kappa)?;
        if !(g_a.is_finite() && g_a >= 0.0) {
            return Err(Error::domain(format!("g_a must be finite and >= 0, got {g_a}")));
        }
        Ok(Self {
            omega_r,
            omega_a,
            omega_qb,
            g_zz,
            g_a,
            kappa,
        })
    }

    /// Frequency-matched set with the ancilla placed at ω_a = ω_r − g_zz.
    pub fn matched_to_resonator(
        omega_r: f64,
        omega_qb: f64,
        g_zz: f64,
        g_a: f64,
        kappa: f64,
    ) -> Result<Self> {
        Self::new(omega_r, omega_r - g_zz, omega_qb, g_zz, g_a, kappa)
    }

    /// Frequency-matched set with the resonator placed at ω_r = ω_a + g_zz.
    pub fn matched_to_ancilla(
        omega_a: f64,
        omega_qb: f64,
        g_zz: f64,
        g_a: f64,
        kappa: f64,
    ) -> Result<Self> {
        Self::new(omega_a + g_zz, omega_a, omega_qb, g_zz, g_a, kappa)
    }

    /// Frequency-matched set from cyclic MHz values. The qubit frequency
    /// defaults to the ancilla frequency; it enters no readout formula.
    pub fn from_mhz(omega_r_mhz: f64, g_zz_mhz: f64, g_a_mhz: f64, kappa_mhz: f64) -> Result<Self> {
        let omega_r = mhz(omega_r_mhz);
        let g_zz = mhz(g_zz_mhz);
        Self::matched_to_resonator(omega_r, omega_r - g_zz, g_zz, mhz(g_a_mhz), mhz(kappa_mhz))
    }

    pub fn omega_r(&self) -> f64 {
        self.omega_r
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn omega_qb(&self) -> f64 {
        self.omega_qb
    }

    pub fn g_zz(&self) -> f64 {
        self.g_zz
    }

    pub fn g_a(&self) -> f64 {
        self.g_a
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Γ = 2g_a²/κ.
    pub fn gamma(&self) -> f64 {
        2.0 * self.g_a * self.g_a / self.kappa
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(self.omega_r, self.omega_a, self.omega_qb, self.g_zz, self.g_a, kappa)
    }

    pub fn with_g_a(&self, g_a: f64) -> Result<Self> {
        Self::new(self.omega_r, self.omega_a, self.omega_qb, self.g_zz, g_a, self.kappa)
    }

    /// ω_r − ω_a − g_zz; zero for a frequency-matched set.
    pub fn matching_residual(&self) -> f64 {
        self.omega_r - self.omega_a - self.g_zz
    }
}

/// Operating-regime conditions that are violated but not fatal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegimeWarning {
    /// E_J/E_C outside the transmon window.
    TransmonRatio { ratio: f64 },
    /// g_zz ≤ g_a: the excited-state ancilla is no longer dispersive.
    WeakCrossKerr { g_zz_mhz: f64, g_a_mhz: f64 },
    /// κ ≥ g_a: vacuum-Rabi peaks are not resolved.
    Unresolved { kappa_mhz: f64, g_a_mhz: f64 },
    /// Integration time shorter than the amplifier correlation time 1/(2B).
    ShortIntegration { tau_s: f64, bandwidth_hz: f64 },
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeWarning::TransmonRatio { ratio } => {
                write!(f, "E_J/E_C = {ratio:.1} outside transmon range [25, 100]")
            }
            RegimeWarning::WeakCrossKerr { g_zz_mhz, g_a_mhz } => write!(
                f,
                "g_zz/2pi = {g_zz_mhz} MHz <= g_a/2pi = {g_a_mhz} MHz: no dispersive contrast"
            ),
            RegimeWarning::Unresolved { kappa_mhz, g_a_mhz } => write!(
                f,
                "kappa/2pi = {kappa_mhz} MHz >= g_a/2pi = {g_a_mhz} MHz: splitting unresolved"
            ),
            RegimeWarning::ShortIntegration { tau_s, bandwidth_hz } => write!(
                f,
                "tau = {tau_s:e} s shorter than 1/(2B) with B = {bandwidth_hz:e} Hz"
            ),
        }
    }
}

pub fn validate(couplings: &CouplingSet) -> Vec<RegimeWarning> {
    let mut warnings = Vec::new();
    if couplings.g_zz <= couplings.g_a {
        warnings.push(RegimeWarning::WeakCrossKerr {
            g_zz_mhz: to_mhz(couplings.g_zz),
            g_a_mhz: to_mhz(couplings.g_a),
        });
    }
    if couplings.kappa >= couplings.g_a {
        warnings.push(RegimeWarning::Unresolved {
            kappa_mhz: to_mhz(couplings.kappa),
            g_a_mhz: to_mhz(couplings.g_a),
        });
    }
    warnings
}
