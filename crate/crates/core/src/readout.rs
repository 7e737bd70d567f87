//! Single-shot discrimination of the qubit state from transmitted photon counts.

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::to_mhz;
use crate::device::CouplingSet;
use crate::photostats::{count_distribution, noise_flux, DetectionChain, PhotonDistribution};
use crate::transmission::{
    readout_frequency, refined_probe_frequency, transmitted_power_with, QubitState, RateConvention,
    DEFAULT_RATE_CONVENTION,
};
use crate::{Error, Result};

/// Which state is assigned to counts at or below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    LowIsGround,
    LowIsExcited,
}

impl Orientation {
    pub fn low_state(self) -> QubitState {
        match self {
            Orientation::LowIsGround => QubitState::Ground,
            Orientation::LowIsExcited => QubitState::Excited,
        }
    }
}

/// Integer-threshold decision rule: n ≤ threshold → `orientation.low_state()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub threshold: usize,
    pub orientation: Orientation,
    /// P(assign e | g)
    pub err_g: f64,
    /// P(assign g | e)
    pub err_e: f64,
}

impl Decision {
    pub fn mean_error(&self) -> f64 {
        0.5 * (self.err_g + self.err_e)
    }

    pub fn fidelity(&self) -> f64 {
        1.0 - self.mean_error()
    }

    pub fn assign(&self, n: usize) -> QubitState {
        let low = self.orientation.low_state();
        if n <= self.threshold {
            low
        } else {
            low.other()
        }
    }
}

/// Errors of one threshold/orientation pair.
pub fn threshold_errors(
    dist_g: &PhotonDistribution,
    dist_e: &PhotonDistribution,
    threshold: usize,
    orientation: Orientation,
) -> (f64, f64) {
    let len = dist_g.probs().len().max(dist_e.probs().len());
    let below = |d: &PhotonDistribution| (0..=threshold.min(len)).map(|n| d.prob(n)).sum::<f64>();
    let above = |d: &PhotonDistribution| (threshold + 1..len).map(|n| d.prob(n)).sum::<f64>();
    match orientation {
        Orientation::LowIsGround => (above(dist_g), below(dist_e)),
        Orientation::LowIsExcited => (below(dist_g), above(dist_e)),
    }
}

/// Exhaustive scan over every integer threshold up to the larger cutoff, in
/// both orientations. Ties go to the lowest threshold, `LowIsGround` first.
pub fn decision_threshold(dist_g: &PhotonDistribution, dist_e: &PhotonDistribution) -> Decision {
    let len = dist_g.probs().len().max(dist_e.probs().len());
    let cumulative = |d: &PhotonDistribution| {
        let mut acc = 0.0;
        (0..len)
            .map(|n| {
                acc += d.prob(n);
                acc
            })
            .collect::<Vec<_>>()
    };
    // Upper tails are summed from the top to avoid 1 − cdf cancellation.
    let upper = |d: &PhotonDistribution| {
        let mut tail = vec![0.0; len];
        let mut acc = 0.0;
        for n in (0..len).rev() {
            tail[n] = acc;
            acc += d.prob(n);
        }
        tail
    };
    let (cdf_g, cdf_e) = (cumulative(dist_g), cumulative(dist_e));
    let (tail_g, tail_e) = (upper(dist_g), upper(dist_e));

    let mut best: Option<Decision> = None;
    for threshold in 0..len {
        for orientation in [Orientation::LowIsGround, Orientation::LowIsExcited] {
            let (err_g, err_e) = match orientation {
                Orientation::LowIsGround => (tail_g[threshold], cdf_e[threshold]),
                Orientation::LowIsExcited => (cdf_g[threshold], tail_e[threshold]),
            };
            let candidate = Decision {
                threshold,
                orientation,
                err_g,
                err_e,
            };
            if best.is_none_or(|b| candidate.mean_error() < b.mean_error()) {
                best = Some(candidate);
            }
        }
    }
    best.expect("distributions are non-empty")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutOptions {
    pub convention: RateConvention,
    /// Use the argmax of |t_e|² at the drive power instead of ω_r + δ_L.
    pub refine_probe: bool,
    /// Fixed probe offset from ω_r (rad/s); takes precedence over `refine_probe`.
    pub probe_offset: Option<f64>,
}

impl Default for ReadoutOptions {
    fn default() -> Self {
        Self {
            convention: DEFAULT_RATE_CONVENTION,
            refine_probe: false,
            probe_offset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    /// Probe frequency relative to ω_r, cyclic MHz.
    pub probe_offset_mhz: f64,
    /// Transmitted flux for each qubit state (photons/s).
    pub p_t_g: f64,
    pub p_t_e: f64,
    pub nbar_g: f64,
    pub nbar_e: f64,
    /// Amplifier noise flux (photons/s).
    pub noise_flux: f64,
    /// Mean signal counts p_t|j τ and mean noise count 𝒩τ.
    pub signal_count_g: f64,
    pub signal_count_e: f64,
    pub noise_count: f64,
    pub threshold: usize,
    pub orientation: Orientation,
    pub err_g: f64,
    pub err_e: f64,
    pub fidelity: f64,
}

struct Conditional {
    probe: f64,
    p_t: [f64; 2],
    noise: f64,
    dists: [PhotonDistribution; 2],
}

fn conditional(
    couplings: &CouplingSet,
    probe_power: f64,
    chain: &DetectionChain,
    options: &ReadoutOptions,
) -> Result<Conditional> {
    if !(probe_power.is_finite() && probe_power >= 0.0) {
        return Err(Error::domain(format!("probe power must be >= 0, got {probe_power}")));
    }
    let probe = if let Some(offset) = options.probe_offset {
        couplings.omega_r() + offset
    } else if options.refine_probe {
        refined_probe_frequency(couplings, probe_power)
    } else {
        readout_frequency(couplings)
    };
    let noise = noise_flux(chain);
    let p_t = QubitState::BOTH
        .map(|s| transmitted_power_with(probe, s, probe_power, couplings, options.convention));
    let tau = chain.integration_time;
    let dists = [
        count_distribution(p_t[0], noise, tau)?,
        count_distribution(p_t[1], noise, tau)?,
    ];
    Ok(Conditional {
        probe,
        p_t,
        noise,
        dists,
    })
}

/// The two conditional count distributions (g, e).
pub fn histogram_pair(
    couplings: &CouplingSet,
    probe_power: f64,
    chain: &DetectionChain,
) -> Result<(PhotonDistribution, PhotonDistribution)> {
    histogram_pair_with(couplings, probe_power, chain, &ReadoutOptions::default())
}

pub fn histogram_pair_with(
    couplings: &CouplingSet,
    probe_power: f64,
    chain: &DetectionChain,
    options: &ReadoutOptions,
) -> Result<(PhotonDistribution, PhotonDistribution)> {
    let [g, e] = conditional(couplings, probe_power, chain, options)?.dists;
    Ok((g, e))
}

pub fn fidelity(couplings: &CouplingSet, probe_power: f64, chain: &DetectionChain) -> Result<FidelityReport> {
    fidelity_with(couplings, probe_power, chain, &ReadoutOptions::default())
}

pub fn fidelity_with(
    couplings: &CouplingSet,
    probe_power: f64,
    chain: &DetectionChain,
    options: &ReadoutOptions,
) -> Result<FidelityReport> {
    let cond = conditional(couplings, probe_power, chain, options)?;
    let decision = decision_threshold(&cond.dists[0], &cond.dists[1]);
    let tau = chain.integration_time;
    Ok(FidelityReport {
        probe_offset_mhz: to_mhz(cond.probe - couplings.omega_r()),
        p_t_g: cond.p_t[0],
        p_t_e: cond.p_t[1],
        nbar_g: cond.p_t[0] / couplings.kappa(),
        nbar_e: cond.p_t[1] / couplings.kappa(),
        noise_flux: cond.noise,
        signal_count_g: cond.p_t[0] * tau,
        signal_count_e: cond.p_t[1] * tau,
        noise_count: cond.noise * tau,
        threshold: decision.threshold,
        orientation: decision.orientation,
        err_g: decision.err_g,
        err_e: decision.err_e,
        fidelity: decision.fidelity(),
    })
}

/// Fidelity over a (κ, p) grid. Rows follow `kappa_values`, columns `p_values`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    /// rad/s
    pub kappa_values: Vec<f64>,
    /// photons/s
    pub p_values: Vec<f64>,
    pub fidelity: Vec<Vec<f64>>,
    /// (κ, p) of the best cell.
    pub argmax: (f64, f64),
    pub argmax_index: (usize, usize),
    pub max_fidelity: f64,
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::domain(format!("{name} grid is empty")));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

pub fn fidelity_map(
    kappa_grid: &[f64],
    p_grid: &[f64],
    chain: &DetectionChain,
    couplings_template: &CouplingSet,
) -> Result<SweepGrid> {
    fidelity_map_with(kappa_grid, p_grid, chain, couplings_template, &ReadoutOptions::default())
}

pub fn fidelity_map_with(
    kappa_grid: &[f64],
    p_grid: &[f64],
    chain: &DetectionChain,
    couplings_template: &CouplingSet,
    options: &ReadoutOptions,
) -> Result<SweepGrid> {
    check_axis("kappa", kappa_grid)?;
    check_axis("power", p_grid)?;
    let cells: Vec<(usize, usize)> = (0..kappa_grid.len())
        .flat_map(|i| (0..p_grid.len()).map(move |j| (i, j)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| {
            let couplings = couplings_template.with_kappa(kappa_grid[i])?;
            Ok(fidelity_with(&couplings, p_grid[j], chain, options)?.fidelity)
        })
        .collect::<Result<Vec<f64>>>()?;

    let fidelity: Vec<Vec<f64>> = values.chunks(p_grid.len()).map(<[f64]>::to_vec).collect();
    let mut argmax_index = (0, 0);
    let mut max_fidelity = f64::NEG_INFINITY;
    for (i, row) in fidelity.iter().enumerate() {
        for (j, &f) in row.iter().enumerate() {
            if f > max_fidelity {
                max_fidelity = f;
                argmax_index = (i, j);
            }
        }
    }
    Ok(SweepGrid {
        kappa_values: kappa_grid.to_vec(),
        p_values: p_grid.to_vec(),
        argmax: (kappa_grid[argmax_index.0], p_grid[argmax_index.1]),
        argmax_index,
        max_fidelity,
        fidelity,
    })
}

/// `n` log-spaced points on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}
