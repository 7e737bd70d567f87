//! End-to-end runs of the command-line binary on the bundled and ad-hoc configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diamond_readout::config::RunConfig;
use diamond_readout::constants::{mhz, per_ns};
use diamond_readout::output::sha256_hex;
use diamond_readout::readout::histogram_pair;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diamond-readout"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn peak_positions(path: &Path) -> Vec<f64> {
    read_json(path)["data"]["peak_positions_mhz"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

#[test]
fn bundled_configs_parse() {
    for name in ["default", "spectra", "histogram_cold_fast", "histogram_cold_slow", "histogram_warm_fast", "histogram_warm_slow", "map"] {
        let path = configs().join(format!("{name}.toml"));
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn spectrum_peaks_for_bundled_spectra_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("spectra.toml");
    let out = run(&["spectrum", "--offsets", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let step = 0.5;
    let g = peak_positions(&dir.path().join("spectrum_g_peaks.json"));
    assert_eq!(g.len(), 2);
    assert!((g[0] + 150.0).abs() < step && (g[1] - 150.0).abs() < step, "{g:?}");
    let e = peak_positions(&dir.path().join("spectrum_e_peaks.json"));
    assert_eq!(e.len(), 1);
    assert!((e[0] - 41.6).abs() < step, "{e:?}");

    let rows = csv_rows(&dir.path().join("spectrum_g.csv"));
    assert_eq!(rows.len(), 1601);
    assert_eq!(rows[800][0], 0.0);
    for r in &rows {
        assert!((r[1] * r[1] + r[2] * r[2] - r[3]).abs() < 1e-12);
    }
}

#[test]
fn spectrum_without_ancilla_is_single_lorentzian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[device]\ng_zz_mhz = 250.0\ng_a_mhz = 0.0\nkappa_mhz = 40.0\n");
    let out = run(&["spectrum", "--offsets", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for s in ["g", "e"] {
        let peaks = peak_positions(&dir.path().join(format!("spectrum_{s}_peaks.json")));
        assert_eq!(peaks.len(), 1);
        assert!(peaks[0].abs() < 1e-9, "{peaks:?}");
    }
}

#[test]
fn spectrum_peak_in_dispersive_limit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[device]\ng_zz_mhz = 1000.0\ng_a_mhz = 150.0\nkappa_mhz = 40.0\n\
         [spectrum]\noffset_min_mhz = -100.0\noffset_max_mhz = 100.0\npoints = 2001\n",
    );
    let out = run(&["spectrum", "--state", "e", "--offsets", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    assert!(!dir.path().join("spectrum_g.csv").exists());
    let e = peak_positions(&dir.path().join("spectrum_e_peaks.json"));
    let dispersive = 150.0f64.powi(2) / 2000.0;
    assert!((e[0] - dispersive).abs() < 0.1, "{e:?} vs {dispersive}");
}

#[test]
fn outputs_are_byte_identical_and_carry_provenance() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("histogram_cold_fast.toml");
    for dir in [&a, &b] {
        let out = run(&["histogram", "--config", cfg.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = fs::read_to_string(&cfg).unwrap();
    let hash = sha256_hex(text.as_bytes());
    for name in ["histogram.csv", "monte_carlo_g.json", "monte_carlo_e.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
        let s = String::from_utf8(x).unwrap();
        assert!(s.contains(&hash), "{name} lacks config hash");
        assert!(s.contains(env!("CARGO_PKG_VERSION")), "{name} lacks version");
        assert!(s.contains("photons/ns"), "{name} lacks units");
    }
    let mc = read_json(&a.path().join("monte_carlo_e.json"))["data"].clone();
    for key in ["s", "m", "tau", "n_samples", "seed", "tv_distance"] {
        assert!(mc.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn seed_flag_changes_monte_carlo_only() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("histogram_cold_slow.toml");
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["histogram", "--config", cfg], a.path()).status.success());
    assert!(run(&["histogram", "--config", cfg, "--seed", "99"], b.path()).status.success());
    assert_eq!(
        fs::read(a.path().join("histogram.csv")).unwrap(),
        fs::read(b.path().join("histogram.csv")).unwrap()
    );
    let mc = read_json(&b.path().join("monte_carlo_g.json"));
    assert_eq!(mc["data"]["seed"], 99);
    assert_ne!(
        fs::read(a.path().join("monte_carlo_g.json")).unwrap(),
        fs::read(b.path().join("monte_carlo_g.json")).unwrap()
    );
}

#[test]
fn bundled_histograms_match_library() {
    for name in ["histogram_cold_fast", "histogram_cold_slow", "histogram_warm_fast", "histogram_warm_slow"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = configs().join(format!("{name}.toml"));
        let out = run(&["histogram", "--config", cfg_path.to_str().unwrap()], dir.path());
        assert!(out.status.success());
        let (cfg, _) = RunConfig::load(&cfg_path).unwrap();
        let (g, e) =
            histogram_pair(&cfg.couplings().unwrap(), cfg.probe_power(), &cfg.detection_chain().unwrap()).unwrap();
        let rows = csv_rows(&dir.path().join("histogram.csv"));
        assert_eq!(rows.len(), g.cutoff().max(e.cutoff()) + 1);
        for r in &rows {
            let n = r[0] as usize;
            assert_eq!(r[1], g.prob(n), "{name} n = {n}");
            assert_eq!(r[2], e.prob(n), "{name} n = {n}");
        }
    }
}

#[test]
fn fidelity_report_echoes_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fidelity"], dir.path());
    assert!(out.status.success());
    let doc = read_json(&dir.path().join("fidelity.json"));
    let f = doc["data"]["report"]["fidelity"].as_f64().unwrap();
    assert!((f - 0.95).abs() <= 0.03, "{f}");
    assert_eq!(doc["data"]["parameters"]["config"]["device"]["kappa_mhz"], 40.0);
    assert!((doc["data"]["parameters"]["resolved"]["delta_l_mhz"].as_f64().unwrap() - 41.55).abs() < 0.01);
    assert!(doc["provenance"]["config_sha256"].is_string());

    let refined = tempfile::tempdir().unwrap();
    assert!(run(&["fidelity", "--refine-probe"], refined.path()).status.success());
    let doc = read_json(&refined.path().join("fidelity.json"));
    assert_eq!(doc["data"]["parameters"]["refine_probe"], true);
}

#[test]
fn bundled_map_argmax_near_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("map.toml");
    let out = run(&["map", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("map.csv"));
    assert_eq!(rows.len(), 900);
    let summary = &read_json(&dir.path().join("map_summary.json"))["data"];
    let kappa = summary["argmax_kappa_mhz"].as_f64().unwrap();
    let p = summary["argmax_p_photons_per_ns"].as_f64().unwrap();
    assert!((20.0..=80.0).contains(&kappa), "{kappa}");
    assert!((0.5..=2.0).contains(&p), "{p}");
    let per_10ns = summary["argmax_p_photons_per_10ns"].as_f64().unwrap();
    assert!((per_10ns - 10.0 * p).abs() <= 1e-12 * per_10ns);
    let best = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    assert_eq!(best, summary["max_fidelity"].as_f64().unwrap());
}

#[test]
fn json_format_mirrors_csv_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[device]\ng_zz_mhz = 250.0\ng_a_mhz = 150.0\nkappa_mhz = 40.0\n\
         [sweep]\nkappa_mhz = { min = 20.0, max = 80.0, points = 3 }\n\
         power_photons_per_ns = { min = 0.5, max = 2.0, points = 2, spacing = \"linear\" }\n",
    );
    let out = run(&["map", "--format", "json", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let doc = read_json(&dir.path().join("map.json"));
    let records = doc["data"].as_array().unwrap();
    assert_eq!(records.len(), 6);
    assert_eq!(records[1]["p_photons_per_ns"], 2.0);
    assert!(records[0]["kappa_mhz"].as_f64().unwrap() - 20.0 < 1e-12);
    assert!(records[0]["fidelity"].is_number());
}

#[test]
fn oracle_check_passes_on_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["oracle-check"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("oracle.csv"));
    assert_eq!(rows.len(), 201);
    assert!(rows.iter().all(|r| r[1] < 1e-3 && r[2] < 1e-3));
}

#[test]
fn oracle_check_reports_violation_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[device]\ng_zz_mhz = 250.0\ng_a_mhz = 150.0\nkappa_mhz = 40.0\n\
         [oracle]\npoints = 11\nspan_mhz = 400.0\nsaturation_fraction = 0.01\ntolerance = 1e-3\node_tolerance = 1e-10\n",
    );
    let out = run(&["oracle-check", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    // The data files are still written for inspection.
    assert!(dir.path().join("oracle.csv").exists());
    assert_eq!(read_json(&dir.path().join("oracle_summary.json"))["data"]["passed"], false);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[device]\ng_zz_mhz = 250.0\ng_a_mhz = 150.0\nkappa_mhz = 40.0\nflavour = 1\n");
    let out = run(&["fidelity", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("flavour"), "{err}");

    let missing = dir.path().join("absent.toml");
    assert_eq!(run(&["map", "--config", missing.to_str().unwrap()], dir.path()).status.code(), Some(1));
    assert_eq!(bin().arg("bogus").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["map", "--format", "xml"]).output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn probe_offset_override_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[device]\ng_zz_mhz = 250.0\ng_a_mhz = 150.0\nkappa_mhz = 40.0\n\
         [probe]\npower_photons_per_ns = 1.0\nfrequency_offset_mhz = 30.0\n",
    );
    assert!(run(&["fidelity", "--config", cfg.to_str().unwrap()], dir.path()).status.success());
    let report = &read_json(&dir.path().join("fidelity.json"))["data"]["report"];
    assert!((report["probe_offset_mhz"].as_f64().unwrap() - 30.0).abs() < 1e-9);
    // Sanity on unit handling: the transmitted flux cannot exceed the drive.
    assert!(report["p_t_e"].as_f64().unwrap() <= per_ns(1.0) * (1.0 + 1e-12));
    assert!(mhz(30.0) > 0.0);
}
