//! Command-line front end. Each subcommand reads one configuration, runs the
//! corresponding computation and writes its data files into the output
//! directory. Frequencies on the command-line side are cyclic MHz, powers
//! photons/ns, times ns and temperatures K.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, RunConfig, DEFAULT_CONFIG};
use crate::constants::{mhz, to_mhz, to_per_ns};
use crate::device::{validate, CouplingSet, RegimeWarning};
use crate::dynamics::{settle, t_from_ode};
use crate::output::{OutputDir, Provenance};
use crate::photostats::{sample_counts, MonteCarloReport, PhotonDistribution};
use crate::readout::{fidelity_map_with, fidelity_with, histogram_pair_with, FidelityReport, ReadoutOptions};
use crate::transmission::{
    dispersive_shift, linear_grid, saturation_power, spectrum, t_linear, Probe, QubitState,
};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "diamond-readout", version, about = "Cross-Kerr ancilla readout: spectra, count statistics and fidelity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// Run configuration (TOML). Defaults to the bundled operating point.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Table format; overrides `[output] format`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Probe at the argmax of |t_e|² at the drive power instead of ω_r + δ_L.
    #[arg(long, global = true)]
    pub refine_probe: bool,
    /// Monte Carlo seed; overrides `[monte_carlo] seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    G,
    E,
    Both,
}

impl StateArg {
    fn states(self) -> Vec<QubitState> {
        match self {
            StateArg::G => vec![QubitState::Ground],
            StateArg::E => vec![QubitState::Excited],
            StateArg::Both => QubitState::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional transmission spectra and their peaks.
    Spectrum {
        #[arg(long, value_enum, default_value = "both")]
        state: StateArg,
        /// Write frequencies as offsets from ω_r.
        #[arg(long)]
        offsets: bool,
    },
    /// Conditional photon-count histograms, plus Monte Carlo checks when configured.
    Histogram,
    /// Single-shot fidelity report at the configured operating point.
    Fidelity,
    /// Fidelity over the (κ, p) sweep grid.
    Map,
    /// Compare the integrated equations of motion with the linear-response transmission.
    OracleCheck,
}

/// Process exit code for an error: 1 for usage/config/I/O, 2 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::ConfigParse(_) | Error::Io(_) => 1,
        Error::Domain(_)
        | Error::Overflow { .. }
        | Error::Integration { .. }
        | Error::Oracle(_)
        | Error::Json(_) => 2,
    }
}

/// Everything a subcommand needs: parsed config, its text and the CLI overrides.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub config_text: String,
    pub out: PathBuf,
    pub format: Format,
    pub refine_probe: bool,
    pub seed: Option<u64>,
}

impl Context {
    pub fn from_args(args: &CommonArgs) -> Result<Self> {
        let (config, config_text) = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => (RunConfig::parse(DEFAULT_CONFIG)?, DEFAULT_CONFIG.to_string()),
        };
        Ok(Self {
            out: args.out.clone().unwrap_or_else(|| config.output.directory.clone()),
            format: args.format.unwrap_or(config.output.format),
            refine_probe: args.refine_probe,
            seed: args.seed,
            config,
            config_text,
        })
    }

    fn output(&self) -> Result<OutputDir> {
        OutputDir::create(&self.out, Provenance::for_config(&self.config_text))
    }

    fn options(&self) -> ReadoutOptions {
        ReadoutOptions {
            refine_probe: self.refine_probe,
            probe_offset: self.config.probe_offset(),
            ..ReadoutOptions::default()
        }
    }
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let ctx = Context::from_args(&cli.common)?;
    for w in warnings(&ctx)? {
        eprintln!("warning: {w}");
    }
    match cli.command {
        Command::Spectrum { state, offsets } => cmd_spectrum(&ctx, state, offsets),
        Command::Histogram => cmd_histogram(&ctx),
        Command::Fidelity => cmd_fidelity(&ctx),
        Command::Map => cmd_map(&ctx),
        Command::OracleCheck => cmd_oracle_check(&ctx),
    }
}

fn warnings(ctx: &Context) -> Result<Vec<RegimeWarning>> {
    let mut out = validate(&ctx.config.couplings()?);
    out.extend(ctx.config.detection_chain()?.warnings());
    if let Some(circuit) = ctx.config.device.circuit() {
        out.extend(crate::device::energies_from_junction(&circuit).warnings());
    }
    Ok(out)
}

/// Device parameters as resolved from the config, in CLI units.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedDevice {
    pub omega_r_mhz: f64,
    pub omega_a_mhz: f64,
    pub g_zz_mhz: f64,
    pub g_a_mhz: f64,
    pub kappa_mhz: f64,
    pub delta_l_mhz: f64,
}

impl ResolvedDevice {
    pub fn new(c: &CouplingSet) -> Self {
        Self {
            omega_r_mhz: to_mhz(c.omega_r()),
            omega_a_mhz: to_mhz(c.omega_a()),
            g_zz_mhz: to_mhz(c.g_zz()),
            g_a_mhz: to_mhz(c.g_a()),
            kappa_mhz: to_mhz(c.kappa()),
            delta_l_mhz: to_mhz(dispersive_shift(c)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Parameters<'a> {
    pub config: &'a RunConfig,
    pub resolved: ResolvedDevice,
    pub refine_probe: bool,
}

fn parameters(ctx: &Context) -> Result<Parameters<'_>> {
    Ok(Parameters {
        config: &ctx.config,
        resolved: ResolvedDevice::new(&ctx.config.couplings()?),
        refine_probe: ctx.refine_probe,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakSidecar {
    pub peak_positions_mhz: Vec<f64>,
    pub peak_heights: Vec<f64>,
}

pub fn cmd_spectrum(ctx: &Context, states: StateArg, offsets: bool) -> Result<Vec<PathBuf>> {
    let c = ctx.config.couplings()?;
    let sc = &ctx.config.spectrum;
    let p = crate::constants::per_ns(sc.power_photons_per_ns.unwrap_or(1e-6));
    let offsets_mhz = linear_grid(sc.offset_min_mhz, sc.offset_max_mhz, sc.points);
    let grid: Vec<f64> = offsets_mhz.iter().map(|&nu| c.omega_r() + mhz(nu)).collect();
    let origin = if offsets { c.omega_r() } else { 0.0 };
    // Written from the cyclic grid itself so no rad/s round trip shows up.
    let label_base = if offsets { 0.0 } else { to_mhz(c.omega_r()) };
    let out = ctx.output()?;
    let mut files = Vec::new();
    for state in states.states() {
        let lines = spectrum(state, p, &grid, &c)?;
        let rows: Vec<Vec<f64>> = lines
            .points
            .iter()
            .zip(&offsets_mhz)
            .map(|(pt, nu)| vec![label_base + nu, pt.t.re, pt.t.im, pt.power_ratio])
            .collect();
        let stem = format!("spectrum_{}", state.label());
        files.push(out.write_table(&stem, ctx.format, &["omega_mhz", "re_t", "im_t", "power_ratio"], &rows)?);
        let peaks = lines.peaks();
        let sidecar = PeakSidecar {
            peak_positions_mhz: peaks.iter().map(|pk| to_mhz(pk.omega - origin)).collect(),
            peak_heights: peaks.iter().map(|pk| pk.height).collect(),
        };
        files.push(out.write_json(&format!("{stem}_peaks.json"), &sidecar)?);
    }
    Ok(files)
}

pub fn cmd_histogram(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = ctx.config.couplings()?;
    let chain = ctx.config.detection_chain()?;
    let p = ctx.config.probe_power();
    let options = ctx.options();
    let (g, e) = histogram_pair_with(&c, p, &chain, &options)?;
    let out = ctx.output()?;
    let len = g.cutoff().max(e.cutoff());
    let rows: Vec<Vec<f64>> = (0..=len).map(|n| vec![n as f64, g.prob(n), e.prob(n)]).collect();
    let mut files = vec![out.write_table("histogram", ctx.format, &["n", "prob_g", "prob_e"], &rows)?];

    if let Some(mc) = &ctx.config.monte_carlo {
        let seed = ctx.seed.unwrap_or(mc.seed);
        let report = fidelity_with(&c, p, &chain, &options)?;
        let tau = chain.integration_time;
        let cases = [
            (QubitState::Ground, report.p_t_g, &g),
            (QubitState::Excited, report.p_t_e, &e),
        ];
        for (k, (state, p_t, exact)) in cases.into_iter().enumerate() {
            let state_seed = seed.wrapping_add(k as u64);
            let sampled = sample_counts(p_t, report.noise_flux, tau, mc.samples, state_seed)?;
            let mc_report = monte_carlo_report(p_t, report.noise_flux, tau, mc.samples, state_seed, exact, &sampled);
            files.push(out.write_json(&format!("monte_carlo_{}.json", state.label()), &mc_report)?);
        }
    }
    Ok(files)
}

fn monte_carlo_report(
    p_t: f64,
    noise: f64,
    tau: f64,
    n_samples: usize,
    seed: u64,
    exact: &PhotonDistribution,
    sampled: &PhotonDistribution,
) -> MonteCarloReport {
    MonteCarloReport {
        s: p_t * tau,
        m: noise * tau,
        tau: tau * 1e9,
        n_samples,
        seed,
        tv_distance: exact.tv_distance(sampled),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityOutput<'a> {
    pub report: FidelityReport,
    pub parameters: Parameters<'a>,
}

pub fn cmd_fidelity(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = ctx.config.couplings()?;
    let chain = ctx.config.detection_chain()?;
    let report = fidelity_with(&c, ctx.config.probe_power(), &chain, &ctx.options())?;
    let out = ctx.output()?;
    let doc = FidelityOutput {
        report,
        parameters: parameters(ctx)?,
    };
    Ok(vec![out.write_json("fidelity.json", &doc)?])
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSummary<'a> {
    pub max_fidelity: f64,
    pub argmax_kappa_mhz: f64,
    pub argmax_p_photons_per_ns: f64,
    /// Same power expressed per 10 ns.
    pub argmax_p_photons_per_10ns: f64,
    pub argmax_report: FidelityReport,
    pub parameters: Parameters<'a>,
}

pub fn cmd_map(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = ctx.config.couplings()?;
    let chain = ctx.config.detection_chain()?;
    let (kappas, powers) = ctx.config.sweep.axes()?;
    let options = ctx.options();
    let grid = fidelity_map_with(&kappas, &powers, &chain, &c, &options)?;
    let rows: Vec<Vec<f64>> = grid
        .fidelity
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            let kappa = to_mhz(grid.kappa_values[i]);
            row.iter()
                .enumerate()
                .map(move |(j, &f)| (kappa, j, f))
        })
        .map(|(kappa, j, f)| vec![kappa, to_per_ns(grid.p_values[j]), f])
        .collect();
    let out = ctx.output()?;
    let mut files = vec![out.write_table(
        "map",
        ctx.format,
        &["kappa_mhz", "p_photons_per_ns", "fidelity"],
        &rows,
    )?];
    let (kappa, p) = grid.argmax;
    let summary = MapSummary {
        max_fidelity: grid.max_fidelity,
        argmax_kappa_mhz: to_mhz(kappa),
        argmax_p_photons_per_ns: to_per_ns(p),
        argmax_p_photons_per_10ns: 10.0 * to_per_ns(p),
        argmax_report: fidelity_with(&c.with_kappa(kappa)?, p, &chain, &options)?,
        parameters: parameters(ctx)?,
    };
    files.push(out.write_json("map_summary.json", &summary)?);
    Ok(files)
}

/// Outcome of comparing the integrated dynamics with the linear-response transmission.
#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub points: usize,
    pub saturation_fraction: f64,
    pub tolerance: f64,
    pub ode_tolerance: f64,
    pub max_abs_err_t_g: f64,
    pub max_abs_err_t_e: f64,
    pub worst_omega_mhz: f64,
    /// Grid points whose trajectory never became stationary (time-averaged instead).
    pub unconverged: usize,
    pub passed: bool,
}

/// Absolute error |t_ode − t_linear| for one state and probe frequency, with the
/// drive set to `fraction` of the local saturation power.
pub fn oracle_error(
    omega: f64,
    state: QubitState,
    couplings: &CouplingSet,
    fraction: f64,
    ode_tol: f64,
) -> Result<(f64, bool)> {
    let kappa = couplings.kappa();
    let p_s = saturation_power(omega, state, couplings);
    let p = if p_s.is_finite() { fraction * p_s } else { fraction * kappa };
    let probe = Probe::new(omega, p)?;
    let traj = settle(state, &probe, couplings, ode_tol, 100.0 / kappa, 2000.0 / kappa)?;
    let t_ode = t_from_ode(&traj.steady_value, &probe, couplings)?;
    Ok(((t_ode - t_linear(omega, state, couplings)).norm(), traj.converged))
}

pub fn cmd_oracle_check(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = ctx.config.couplings()?;
    let oc = &ctx.config.oracle;
    let half = 0.5 * oc.span_mhz;
    let omegas: Vec<f64> = linear_grid(-half, half, oc.points)
        .into_iter()
        .map(|nu| c.omega_r() + mhz(nu))
        .collect();
    let results = omegas
        .par_iter()
        .map(|&omega| {
            let g = oracle_error(omega, QubitState::Ground, &c, oc.saturation_fraction, oc.ode_tolerance)?;
            let e = oracle_error(omega, QubitState::Excited, &c, oc.saturation_fraction, oc.ode_tolerance)?;
            Ok((omega, g, e))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<Vec<f64>> = results
        .iter()
        .map(|&(omega, (eg, _), (ee, _))| vec![to_mhz(omega), eg, ee])
        .collect();
    let max_g = results.iter().map(|r| r.1 .0).fold(0.0, f64::max);
    let max_e = results.iter().map(|r| r.2 .0).fold(0.0, f64::max);
    let worst = results
        .iter()
        .max_by(|a, b| a.1 .0.max(a.2 .0).total_cmp(&b.1 .0.max(b.2 .0)))
        .map(|r| to_mhz(r.0))
        .unwrap_or(f64::NAN);
    let summary = OracleSummary {
        points: results.len(),
        saturation_fraction: oc.saturation_fraction,
        tolerance: oc.tolerance,
        ode_tolerance: oc.ode_tolerance,
        max_abs_err_t_g: max_g,
        max_abs_err_t_e: max_e,
        worst_omega_mhz: worst,
        unconverged: results.iter().filter(|r| !(r.1 .1 && r.2 .1)).count(),
        passed: max_g.max(max_e) <= oc.tolerance,
    };
    let out = ctx.output()?;
    let files = vec![
        out.write_table("oracle", ctx.format, &["omega_mhz", "abs_err_t_g", "abs_err_t_e"], &rows)?,
        out.write_json("oracle_summary.json", &summary)?,
    ];
    if !summary.passed {
        return Err(Error::Oracle(format!(
            "max |t_ode - t_linear| = {:e} exceeds tolerance {:e} (near {:.3} MHz)",
            max_g.max(max_e),
            oc.tolerance,
            worst
        )));
    }
    Ok(files)
}
