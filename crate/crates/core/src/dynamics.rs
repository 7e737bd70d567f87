//! Direct integration of the semiclassical equations of motion for the driven
//! cavity, the ancilla and the qubit coherence, in the frame rotating at the
//! probe frequency. Operators are replaced by their mean values.
//!
//! ```text
//! dσz/dt  = −2 g_a (σ₊ a + σ₋ a*)
//! dσ₋/dt  = −i (ω_r − ω + δ_j) σ₋ + g_a σz a
//! dσ_qb/dt = i g_zz σz σ_qb              (frame co-rotating at ω_qb)
//! da/dt   = −i (ω_r − ω) a − κ a + g_a σ₋ + i √κ b_in
//! ```
//!
//! The qubit's free precession at ω_qb is removed analytically; it changes only
//! the phase of σ_qb, never its modulus.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::device::CouplingSet;
use crate::ode::DormandPrince;
use crate::transmission::{Probe, QubitState};
use crate::{Error, Result};

/// Absolute error floor used by the step controller (per 1/κ of evolution).
pub const ABS_TOL: f64 = 1e-12;

/// Relative spread of |a| below which a window counts as stationary.
pub const STEADY_SPREAD: f64 = 1e-6;

/// Averaging window for [`Trajectory::steady_value`], in units of 1/κ.
pub const DEFAULT_WINDOW_KAPPA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemiclassicalState {
    pub sigma_z_a: f64,
    pub sigma_minus_a: C64,
    pub sigma_minus_qb: C64,
    pub field: C64,
}

impl SemiclassicalState {
    /// Ancilla in its ground state, qubit on the equator, empty cavity.
    pub fn initial() -> Self {
        Self {
            sigma_z_a: -1.0,
            sigma_minus_a: C64::new(0.0, 0.0),
            sigma_minus_qb: C64::new(0.5, 0.0),
            field: C64::new(0.0, 0.0),
        }
    }

    /// (σz)² + 4|σ₋|², conserved by the undamped ancilla.
    pub fn bloch_length(&self) -> f64 {
        self.sigma_z_a * self.sigma_z_a + 4.0 * self.sigma_minus_a.norm_sqr()
    }

    fn to_array(self) -> [f64; 7] {
        [
            self.sigma_z_a,
            self.sigma_minus_a.re,
            self.sigma_minus_a.im,
            self.sigma_minus_qb.re,
            self.sigma_minus_qb.im,
            self.field.re,
            self.field.im,
        ]
    }

    fn from_array(y: &[f64; 7]) -> Self {
        Self {
            sigma_z_a: y[0],
            sigma_minus_a: C64::new(y[1], y[2]),
            sigma_minus_qb: C64::new(y[3], y[4]),
            field: C64::new(y[5], y[6]),
        }
    }
}

/// Right-hand side for one qubit state and one probe.
#[derive(Debug, Clone, Copy)]
pub struct SemiclassicalModel {
    cavity_detuning: f64,
    ancilla_detuning: f64,
    g_a: f64,
    g_zz: f64,
    kappa: f64,
    drive: f64,
}

impl SemiclassicalModel {
    pub fn new(state: QubitState, probe: &Probe, couplings: &CouplingSet) -> Self {
        let cavity_detuning = couplings.omega_r() - probe.omega;
        Self {
            cavity_detuning,
            ancilla_detuning: cavity_detuning + state.shift(couplings),
            g_a: couplings.g_a(),
            g_zz: couplings.g_zz(),
            kappa: couplings.kappa(),
            drive: couplings.kappa().sqrt() * probe.amplitude(),
        }
    }

    pub fn derivative(&self, s: &SemiclassicalState) -> SemiclassicalState {
        let i = C64::i();
        let a = s.field;
        let sm = s.sigma_minus_a;
        SemiclassicalState {
            sigma_z_a: -4.0 * self.g_a * (sm.conj() * a).re,
            sigma_minus_a: -i * self.ancilla_detuning * sm + self.g_a * s.sigma_z_a * a,
            sigma_minus_qb: i * self.g_zz * s.sigma_z_a * s.sigma_minus_qb,
            field: -i * self.cavity_detuning * a - self.kappa * a
                + self.g_a * sm
                + i * self.drive,
        }
    }

    fn rhs(&self, y: &[f64; 7]) -> [f64; 7] {
        self.derivative(&SemiclassicalState::from_array(y)).to_array()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SemiclassicalState>,
    pub converged: bool,
    pub steady_value: SemiclassicalState,
}

impl Trajectory {
    pub fn final_state(&self) -> SemiclassicalState {
        *self.states.last().expect("trajectory holds at least the initial point")
    }

    pub fn duration(&self) -> f64 {
        self.times.last().unwrap() - self.times[0]
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if (1e-12..=1e-4).contains(&tol) {
        Ok(())
    } else {
        Err(Error::domain(format!("tolerance {tol:e} outside [1e-12, 1e-4]")))
    }
}

/// Integrate from the standard initial condition up to `t_end` seconds.
pub fn integrate(
    state: QubitState,
    probe: &Probe,
    couplings: &CouplingSet,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    integrate_from(SemiclassicalState::initial(), 0.0, state, probe, couplings, t_end, tol)
}

/// Integrate from an arbitrary state at `t_start` up to `t_end`.
pub fn integrate_from(
    initial: SemiclassicalState,
    t_start: f64,
    state: QubitState,
    probe: &Probe,
    couplings: &CouplingSet,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_tol(tol)?;
    let kappa = couplings.kappa();
    if !(t_end - t_start >= 20.0 / kappa) {
        return Err(Error::domain(format!(
            "integration span {:e} s shorter than 20/kappa = {:e} s",
            t_end - t_start,
            20.0 / kappa
        )));
    }
    let model = SemiclassicalModel::new(state, probe, couplings);
    // Per-step errors are budgeted per 1/κ of evolution so that long runs with
    // many fast Rabi cycles do not accumulate drift in the invariants.
    let solver = DormandPrince::new(tol, ABS_TOL).with_unit_time(1.0 / kappa);
    let mut times = Vec::new();
    let mut states = Vec::new();
    solver
        .integrate(
            |_, y| model.rhs(y),
            t_start,
            initial.to_array(),
            t_end,
            |t, y| {
                times.push(t);
                states.push(SemiclassicalState::from_array(y));
            },
        )
        .map_err(|e| {
            let (t, y) = e.last_good();
            Error::Integration {
                t,
                reason: e.to_string(),
                last_state: Box::new(SemiclassicalState::from_array(&y)),
            }
        })?;
    let mut trajectory = Trajectory {
        times,
        states,
        converged: false,
        steady_value: initial,
    };
    let (steady, converged) = steady_state(&trajectory, DEFAULT_WINDOW_KAPPA / kappa)?;
    trajectory.steady_value = steady;
    trajectory.converged = converged;
    Ok(trajectory)
}

/// Stationarity test over the trailing `window` seconds.
///
/// Converged when the spread of |a| in the window is below
/// 1e-6·max(|a|, 1); the final state is then returned. Otherwise the
/// time-average over the window is returned with `false`.
pub fn steady_state(trajectory: &Trajectory, window: f64) -> Result<(SemiclassicalState, bool)> {
    let t_last = *trajectory
        .times
        .last()
        .ok_or_else(|| Error::domain("empty trajectory"))?;
    if !(window <= trajectory.duration()) {
        return Err(Error::domain(format!(
            "window {window:e} s longer than trajectory {:e} s",
            trajectory.duration()
        )));
    }
    let start = trajectory.times.partition_point(|&t| t < t_last - window);
    let times = &trajectory.times[start..];
    let states = &trajectory.states[start..];

    let n = states.len() as f64;
    let mean_abs = states.iter().map(|s| s.field.norm()).sum::<f64>() / n;
    let spread = (states
        .iter()
        .map(|s| (s.field.norm() - mean_abs).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if spread < STEADY_SPREAD * mean_abs.max(1.0) {
        return Ok((*states.last().unwrap(), true));
    }

    // Trapezoidal time average.
    let mut acc = [0.0f64; 7];
    let mut total = 0.0;
    for k in 1..states.len() {
        let dt = times[k] - times[k - 1];
        let (y0, y1) = (states[k - 1].to_array(), states[k].to_array());
        for j in 0..7 {
            acc[j] += 0.5 * dt * (y0[j] + y1[j]);
        }
        total += dt;
    }
    if total == 0.0 {
        return Ok((*states.last().unwrap(), false));
    }
    for v in acc.iter_mut() {
        *v /= total;
    }
    Ok((SemiclassicalState::from_array(&acc), false))
}

/// Keep integrating in segments of `segment` seconds until the trailing window
/// is stationary or `max_time` is reached. Returns the last segment.
pub fn settle(
    state: QubitState,
    probe: &Probe,
    couplings: &CouplingSet,
    tol: f64,
    segment: f64,
    max_time: f64,
) -> Result<Trajectory> {
    let mut traj = integrate(state, probe, couplings, segment, tol)?;
    while !traj.converged && *traj.times.last().unwrap() + segment <= max_time {
        let t0 = *traj.times.last().unwrap();
        traj = integrate_from(traj.final_state(), t0, state, probe, couplings, t0 + segment, tol)?;
    }
    Ok(traj)
}

fn require_drive(probe: &Probe) -> Result<f64> {
    if probe.flux > 0.0 {
        Ok(probe.amplitude())
    } else {
        Err(Error::domain("transmission undefined at zero drive"))
    }
}

/// t = b_t / b_in = i√κ a / √p.
pub fn t_from_ode(steady: &SemiclassicalState, probe: &Probe, couplings: &CouplingSet) -> Result<C64> {
    let b_in = require_drive(probe)?;
    Ok(C64::i() * couplings.kappa().sqrt() * steady.field / b_in)
}

/// r = b_r / b_in = 1 + i√κ a / √p.
pub fn r_from_ode(steady: &SemiclassicalState, probe: &Probe, couplings: &CouplingSet) -> Result<C64> {
    Ok(1.0 + t_from_ode(steady, probe, couplings)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::mhz;
    use crate::transmission::{readout_frequency, t_empty, t_linear};

    fn nominal() -> CouplingSet {
        CouplingSet::from_mhz(7000.0, 250.0, 150.0, 40.0).unwrap()
    }

    #[test]
    fn undriven_stays_put() {
        let c = nominal();
        let probe = Probe::new(c.omega_r(), 0.0).unwrap();
        let traj = integrate(QubitState::Ground, &probe, &c, 30.0 / c.kappa(), 1e-10).unwrap();
        let init = SemiclassicalState::initial();
        for s in &traj.states {
            assert_eq!(s.sigma_z_a, init.sigma_z_a);
            assert_eq!(s.field, init.field);
            assert_eq!(s.sigma_minus_a, init.sigma_minus_a);
        }
        assert!(traj.converged);
    }

    #[test]
    fn empty_cavity_relaxes_to_lorentzian() {
        let c = nominal().with_g_a(0.0).unwrap();
        for (dw, expect_sq) in [(0.0, 1.0), (c.kappa(), 0.5)] {
            let probe = Probe::new(c.omega_r() + dw, 1e8).unwrap();
            let traj = integrate(QubitState::Excited, &probe, &c, 40.0 / c.kappa(), 1e-10).unwrap();
            assert!(traj.converged);
            let t = t_from_ode(&traj.steady_value, &probe, &c).unwrap();
            assert!((t - t_empty(probe.omega, &c)).norm() < 1e-8);
            assert!((t.norm_sqr() - expect_sq).abs() < 1e-8);
            if dw == 0.0 {
                assert!((t - C64::new(-1.0, 0.0)).norm() < 1e-8);
            }
            // closed-form amplitude a = i√κ√p / (κ + i(ω_r − ω))
            let a_ss = C64::i() * c.kappa().sqrt() * probe.amplitude()
                / C64::new(c.kappa(), c.omega_r() - probe.omega);
            assert!((traj.steady_value.field - a_ss).norm() < 1e-8 * a_ss.norm());
        }
    }

    #[test]
    fn linear_regime_matches_closed_form_at_low_power() {
        let c = nominal();
        for state in QubitState::BOTH {
            let w = readout_frequency(&c);
            let ps = crate::transmission::saturation_power(w, state, &c);
            let probe = Probe::new(w, ps * 1e-4).unwrap();
            let traj = settle(state, &probe, &c, 1e-10, 50.0 / c.kappa(), 2000.0 / c.kappa()).unwrap();
            assert!(traj.converged);
            let t = t_from_ode(&traj.steady_value, &probe, &c).unwrap();
            assert!((t - t_linear(w, state, &c)).norm() < 1e-3);
        }
    }

    #[test]
    fn invariants_hold_along_trajectory() {
        let c = nominal();
        let probe = Probe::new(c.omega_r() + mhz(120.0), 3e8).unwrap();
        let traj = integrate(QubitState::Ground, &probe, &c, 100.0 / c.kappa(), 1e-10).unwrap();
        for s in &traj.states {
            assert!((s.bloch_length() - 1.0).abs() < 1e-8);
            assert!((s.sigma_minus_qb.norm() - 0.5).abs() < 0.5e-8);
        }
    }

    #[test]
    fn reflected_plus_transmitted_is_incident() {
        let c = nominal();
        let probe = Probe::new(c.omega_r() + mhz(60.0), 1e5).unwrap();
        let traj = settle(QubitState::Ground, &probe, &c, 1e-10, 50.0 / c.kappa(), 2000.0 / c.kappa()).unwrap();
        assert!(traj.converged);
        let t = t_from_ode(&traj.steady_value, &probe, &c).unwrap();
        let r = r_from_ode(&traj.steady_value, &probe, &c).unwrap();
        assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bit_identical_reruns() {
        let c = nominal();
        let probe = Probe::new(c.omega_r() - mhz(30.0), 1e9).unwrap();
        let a = integrate(QubitState::Excited, &probe, &c, 25.0 / c.kappa(), 1e-9).unwrap();
        let b = integrate(QubitState::Excited, &probe, &c, 25.0 / c.kappa(), 1e-9).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn preconditions() {
        let c = nominal();
        let probe = Probe::new(c.omega_r(), 1e6).unwrap();
        assert!(integrate(QubitState::Ground, &probe, &c, 5.0 / c.kappa(), 1e-8).is_err());
        assert!(integrate(QubitState::Ground, &probe, &c, 30.0 / c.kappa(), 1e-3).is_err());
        assert!(integrate(QubitState::Ground, &probe, &c, 30.0 / c.kappa(), 1e-13).is_err());
        let traj = integrate(QubitState::Ground, &probe, &c, 20.0 / c.kappa(), 1e-8).unwrap();
        assert!(steady_state(&traj, 21.0 / c.kappa()).is_err());
        let zero = Probe::new(c.omega_r(), 0.0).unwrap();
        assert!(t_from_ode(&traj.steady_value, &zero, &c).is_err());
    }

    #[test]
    fn constant_trajectory_is_converged() {
        let s = SemiclassicalState::initial();
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0, 3.0],
            states: vec![s; 4],
            converged: false,
            steady_value: s,
        };
        let (value, ok) = steady_state(&traj, 2.0).unwrap();
        assert!(ok);
        assert_eq!(value, s);
    }

    #[test]
    fn oscillating_window_reports_average() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
        let states: Vec<SemiclassicalState> = times
            .iter()
            .map(|&t| SemiclassicalState {
                field: C64::new(2.0 + (std::f64::consts::TAU * 10.0 * t).sin(), 0.0),
                ..SemiclassicalState::initial()
            })
            .collect();
        let traj = Trajectory {
            times,
            states,
            converged: false,
            steady_value: SemiclassicalState::initial(),
        };
        let (avg, ok) = steady_state(&traj, 0.5).unwrap();
        assert!(!ok);
        assert!((avg.field.re - 2.0).abs() < 1e-3);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn invariants_within_ten_tol(
            kappa_mhz in 10.0f64..100.0,
            offset_mhz in -400.0f64..400.0,
            log_drive in -3.0f64..1.0,
            excited in proptest::bool::ANY,
            tight in proptest::bool::ANY,
        ) {
            let c = nominal().with_kappa(mhz(kappa_mhz)).unwrap();
            let state = if excited { QubitState::Excited } else { QubitState::Ground };
            let w = c.omega_r() + mhz(offset_mhz);
            let p = crate::transmission::saturation_power(w, state, &c) * 10f64.powf(log_drive);
            let tol = if tight { 1e-10 } else { 1e-8 };
            let traj = integrate(state, &Probe::new(w, p).unwrap(), &c, 100.0 / c.kappa(), tol).unwrap();
            for s in &traj.states {
                proptest::prop_assert!((s.bloch_length() - 1.0).abs() < 10.0 * tol);
                proptest::prop_assert!((s.sigma_minus_qb.norm() - 0.5).abs() < 10.0 * tol * 0.5);
            }
        }
    }
}
