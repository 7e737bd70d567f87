//! Run configuration (TOML). Unknown keys are rejected everywhere.
//!
//! Frequencies are cyclic MHz (GHz where the key says so), powers photons/ns,
//! times ns, temperatures K.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constants::{mhz, ns, per_ns, DEFAULT_RESONATOR_MHZ};
use crate::device::{cross_kerr, energies_from_junction, CouplingSet, JunctionCircuit};
use crate::photostats::DetectionChain;
use crate::{Error, Result};

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Either the direct form {g_zz, g_a, kappa, omega_r} or the circuit form
/// {critical current, capacitance, inductance, g_a, kappa, omega_a}.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub g_a_mhz: f64,
    pub kappa_mhz: f64,
    pub g_zz_mhz: Option<f64>,
    pub omega_r_mhz: Option<f64>,
    pub critical_current_a: Option<f64>,
    pub capacitance_f: Option<f64>,
    pub inductance_h: Option<f64>,
    pub omega_a_mhz: Option<f64>,
    pub omega_qb_mhz: Option<f64>,
}

impl DeviceConfig {
    pub fn couplings(&self) -> Result<CouplingSet> {
        let circuit_keys = [self.critical_current_a, self.capacitance_f, self.inductance_h];
        let circuit_given = circuit_keys.iter().filter(|v| v.is_some()).count();
        let wrap = |key: &'static str| move |e: Error| config_err(key, e.to_string());
        let g_a = mhz(self.g_a_mhz);
        let kappa = mhz(self.kappa_mhz);

        match (self.g_zz_mhz, circuit_given) {
            (Some(g_zz_mhz), 0) => {
                if self.omega_a_mhz.is_some() {
                    return Err(config_err(
                        "device.omega_a_mhz",
                        "only valid with the circuit form; give omega_r_mhz instead",
                    ));
                }
                let omega_r = mhz(self.omega_r_mhz.unwrap_or(DEFAULT_RESONATOR_MHZ));
                let g_zz = mhz(g_zz_mhz);
                let omega_qb = self.omega_qb_mhz.map(mhz).unwrap_or(omega_r - g_zz);
                CouplingSet::matched_to_resonator(omega_r, omega_qb, g_zz, g_a, kappa)
                    .map_err(wrap("device"))
            }
            (None, 3) => {
                if self.omega_r_mhz.is_some() {
                    return Err(config_err(
                        "device.omega_r_mhz",
                        "the circuit form fixes omega_r = omega_a + g_zz; give omega_a_mhz",
                    ));
                }
                let omega_a = self
                    .omega_a_mhz
                    .ok_or_else(|| config_err("device.omega_a_mhz", "required with the circuit form"))?;
                let circuit = JunctionCircuit::new(
                    self.critical_current_a.unwrap(),
                    self.capacitance_f.unwrap(),
                    self.inductance_h.unwrap(),
                )
                .map_err(wrap("device"))?;
                let g_zz = cross_kerr(&energies_from_junction(&circuit));
                let omega_a = mhz(omega_a);
                let omega_qb = self.omega_qb_mhz.map(mhz).unwrap_or(omega_a);
                CouplingSet::matched_to_ancilla(omega_a, omega_qb, g_zz, g_a, kappa).map_err(wrap("device"))
            }
            (Some(_), _) => Err(config_err(
                "device.g_zz_mhz",
                "give either g_zz_mhz or the circuit parameters, not both",
            )),
            (None, _) => Err(config_err(
                "device",
                "need g_zz_mhz, or all of critical_current_a, capacitance_f, inductance_h",
            )),
        }
    }

    pub fn circuit(&self) -> Option<JunctionCircuit> {
        match (self.critical_current_a, self.capacitance_f, self.inductance_h) {
            (Some(i), Some(c), Some(l)) => JunctionCircuit::new(i, c, l).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub power_photons_per_ns: f64,
    /// Fixed probe frequency as an offset from ω_r.
    pub frequency_offset_mhz: Option<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            power_photons_per_ns: 1.0,
            frequency_offset_mhz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub noise_temperature_k: f64,
    pub tau_ns: f64,
    /// Defaults to 1/(2τ).
    pub bandwidth_mhz: Option<f64>,
    /// Defaults to the resonator frequency.
    pub carrier_ghz: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            noise_temperature_k: 0.14,
            tau_ns: 10.0,
            bandwidth_mhz: Some(50.0),
            carrier_ghz: None,
        }
    }
}

impl ChainConfig {
    pub fn chain(&self, couplings: &CouplingSet) -> Result<DetectionChain> {
        let tau = ns(self.tau_ns);
        let carrier = self
            .carrier_ghz
            .map(|g| mhz(1000.0 * g))
            .unwrap_or(couplings.omega_r());
        let bandwidth = self.bandwidth_mhz.map(|b| b * 1e6).unwrap_or(0.5 / tau);
        DetectionChain::new(self.noise_temperature_k, bandwidth, tau, carrier)
            .map_err(|e| config_err("chain", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Log
}

impl AxisConfig {
    pub fn values(&self, key: &str) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Err(config_err(key, "points must be >= 1"));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || (self.points > 1 && !(self.max > self.min)) {
            return Err(config_err(key, "need finite min < max"));
        }
        match self.spacing {
            Spacing::Linear => Ok(crate::transmission::linear_grid(self.min, self.max, self.points)),
            Spacing::Log => {
                if !(self.min > 0.0) {
                    return Err(config_err(key, "log spacing needs min > 0"));
                }
                Ok(crate::readout::log_grid(self.min, self.max, self.points))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kappa_mhz: AxisConfig,
    pub power_photons_per_ns: AxisConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kappa_mhz: AxisConfig {
                min: 5.0,
                max: 200.0,
                points: 30,
                spacing: Spacing::Log,
            },
            power_photons_per_ns: AxisConfig {
                min: 0.01,
                max: 10.0,
                points: 30,
                spacing: Spacing::Log,
            },
        }
    }
}

impl SweepConfig {
    /// (κ in rad/s, p in photons/s)
    pub fn axes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let kappa = self.kappa_mhz.values("sweep.kappa_mhz")?.into_iter().map(mhz).collect();
        let p = self
            .power_photons_per_ns
            .values("sweep.power_photons_per_ns")?
            .into_iter()
            .map(per_ns)
            .collect();
        Ok((kappa, p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub offset_min_mhz: f64,
    pub offset_max_mhz: f64,
    pub points: usize,
    /// Defaults to a drive far below saturation (1e-6 photons/ns).
    pub power_photons_per_ns: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            offset_min_mhz: -400.0,
            offset_max_mhz: 400.0,
            points: 1601,
            power_photons_per_ns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub points: usize,
    pub span_mhz: f64,
    /// Drive power as a fraction of the local saturation power.
    pub saturation_fraction: f64,
    pub tolerance: f64,
    pub ode_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            points: 201,
            span_mhz: 400.0,
            saturation_fraction: 1e-4,
            tolerance: 1e-3,
            ode_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    pub monte_carlo: Option<MonteCarloConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Configuration used when no file is given: the default operating point.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(&path.display().to_string(), e.to_string()))?;
        Ok((Self::parse(&text)?, text))
    }

    fn validate(&self) -> Result<()> {
        self.couplings()?;
        self.detection_chain()?;
        self.sweep.axes()?;
        if !(self.probe.power_photons_per_ns.is_finite() && self.probe.power_photons_per_ns >= 0.0) {
            return Err(config_err("probe.power_photons_per_ns", "must be >= 0"));
        }
        if self.spectrum.points == 0 || !(self.spectrum.offset_max_mhz > self.spectrum.offset_min_mhz) {
            return Err(config_err("spectrum", "need points >= 1 and offset_min_mhz < offset_max_mhz"));
        }
        if self.oracle.points < 2 || !(self.oracle.span_mhz > 0.0) {
            return Err(config_err("oracle", "need points >= 2 and span_mhz > 0"));
        }
        if !(self.oracle.saturation_fraction > 0.0) {
            return Err(config_err("oracle.saturation_fraction", "must be > 0"));
        }
        if !(1e-12..=1e-4).contains(&self.oracle.ode_tolerance) {
            return Err(config_err("oracle.ode_tolerance", "must lie in [1e-12, 1e-4]"));
        }
        if let Some(mc) = &self.monte_carlo {
            if mc.samples == 0 {
                return Err(config_err("monte_carlo.samples", "must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn couplings(&self) -> Result<CouplingSet> {
        self.device.couplings()
    }

    pub fn detection_chain(&self) -> Result<DetectionChain> {
        self.chain.chain(&self.couplings()?)
    }

    /// Drive flux in photons/s.
    pub fn probe_power(&self) -> f64 {
        per_ns(self.probe.power_photons_per_ns)
    }

    /// Probe offset from ω_r in rad/s, if fixed by the config.
    pub fn probe_offset(&self) -> Option<f64> {
        self.probe.frequency_offset_mhz.map(mhz)
    }
}
