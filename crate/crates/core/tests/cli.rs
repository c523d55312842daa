use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn grinpol(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grinpol"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = grinpol(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version() {
    for flag in ["--help", "--version"] {
        let o = Command::new(env!("CARGO_BIN_EXE_grinpol"))
            .arg(flag)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        assert!(!o.stdout.is_empty());
    }
    let o = Command::new(env!("CARGO_BIN_EXE_grinpol"))
        .arg("bogus")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = grinpol(&["grin"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`grin`"), "{}", stderr(&o));

    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"seed": 1, "grin": {"wavelength_m": 7.28e-7, "colour": 1}}"#,
    )
    .unwrap();
    let o = grinpol(&["grin", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    fs::write(&cfg, "{ not json").unwrap();
    let o = grinpol(&["grin", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(4));

    let o = grinpol(&["grin", "--preset", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn grin_writes_report_sweeps_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["grin", "--preset", "grin-default"], dir.path());
    let r = json(&dir.path().join("grin_report.json"));
    assert!((r["focal_length_m"].as_f64().unwrap() - 2e-3).abs() < 1e-12);
    assert!((r["coupled_waist_m"].as_f64().unwrap() - 185.38e-6).abs() < 0.01e-6);
    let profile = fs::read_to_string(dir.path().join("lateral_profile.csv")).unwrap();
    assert!(profile.starts_with("offset_m,efficiency\n"));
    assert_eq!(profile.lines().count(), 42);

    let m = json(&dir.path().join("manifest-grin.json"));
    assert_eq!(m["command"], "grin");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);

    // the written profile fits back to the model FWHM
    let fit_dir = dir.path().join("fit");
    let csv = dir.path().join("lateral_profile.csv");
    ok(
        &["fit", csv.to_str().unwrap(), "--model", "profile"],
        &fit_dir,
    );
    let fit = json(&fit_dir.join("fit.json"));
    let fwhm = fit["result"]["fwhm"].as_f64().unwrap();
    assert!((fwhm - r["lateral_fwhm_m"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn simulated_fringe_fits_to_preset_visibility() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--preset", "fringe-6nm"], dir.path());
    let csv = dir.path().join("fringe.csv");
    ok(
        &["fit", csv.to_str().unwrap(), "--model", "fringe"],
        dir.path(),
    );
    let fit = json(&dir.path().join("fit.json"));
    assert_eq!(fit["weighted"], true);
    let v = fit["result"]["visibility"].as_f64().unwrap();
    assert!((v - 0.9785).abs() <= 0.01, "{v}");
    let period = fit["result"]["period"].as_f64().unwrap();
    assert!((period - 364e-9).abs() < 5e-9, "{period}");
}

#[test]
fn tomography_counts_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["simulate", "--preset", "tomo-phi-minus"], &a);
    ok(&["simulate", "--preset", "tomo-phi-minus"], &b);
    ok(
        &["simulate", "--preset", "tomo-phi-minus", "--seed", "2"],
        &c,
    );
    let text = fs::read_to_string(a.join("counts.csv")).unwrap();
    assert_eq!(text.lines().count(), 17);
    assert!(text.starts_with("setting_label,coincidences,singles_1,singles_2,duration_s\n"));
    assert_eq!(
        fs::read(a.join("counts.csv")).unwrap(),
        fs::read(b.join("counts.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("manifest-simulate.json")).unwrap(),
        fs::read(b.join("manifest-simulate.json")).unwrap()
    );
    assert_ne!(
        fs::read(a.join("counts.csv")).unwrap(),
        fs::read(c.join("counts.csv")).unwrap()
    );
}

#[test]
fn reconstruct_psi_minus() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--preset", "tomo-psi-minus"], dir.path());
    let counts = dir.path().join("counts.csv");
    ok(
        &[
            "reconstruct",
            counts.to_str().unwrap(),
            "--preset",
            "tomo-psi-minus",
        ],
        dir.path(),
    );
    let r = json(&dir.path().join("reconstruction.json"));
    assert_eq!(r["best_target"], "psi-");
    assert!(r["tangle"].as_f64().unwrap() >= 0.85);
    let bars = &r["error_bars"];
    let std = bars["fidelity_std"].as_f64().unwrap();
    assert!(std > 1e-3 && std < 0.05, "{std}");
    let m = json(&dir.path().join("manifest-reconstruct.json"));
    assert_eq!(m["inputs"][0]["file"], "counts.csv");
}

#[test]
fn bad_count_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--preset", "tomo-phi-plus"], dir.path());
    let good = fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    let lines: Vec<&str> = good.lines().collect();

    let malformed = dir.path().join("malformed.csv");
    let mut broken = lines.clone();
    broken[5] = "DH,lots,1,1,1";
    fs::write(&malformed, broken.join("\n") + "\n").unwrap();
    let o = grinpol(
        &["reconstruct", malformed.to_str().unwrap(), "--seed", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));

    let partial = dir.path().join("partial.csv");
    fs::write(&partial, lines[..16].join("\n") + "\n").unwrap();
    let o = grinpol(
        &["reconstruct", partial.to_str().unwrap(), "--seed", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(8));
    assert!(
        stderr(&o).contains("informationally complete"),
        "{}",
        stderr(&o)
    );

    let missing = dir.path().join("missing.csv");
    let o = grinpol(&["reconstruct", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(7));
}

#[test]
fn empty_fit_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let o = grinpol(
        &["fit", empty.to_str().unwrap(), "--model", "fringe"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(!dir.path().join("fit.json").exists());
}

#[test]
fn report_from_preset_and_from_state_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["report", "--preset", "tomo-psi-plus"], dir.path());
    let r = json(&dir.path().join("report.json"));
    assert!((r["fidelities"]["psi+"].as_f64().unwrap() - 0.923).abs() < 1e-9);
    assert!((r["tangle"].as_f64().unwrap() - 0.846).abs() < 1e-9);

    // the density matrix in a report can be fed back in
    let state = dir.path().join("state.json");
    fs::write(&state, serde_json::to_vec(&r["density_matrix"]).unwrap()).unwrap();
    let again = dir.path().join("again");
    ok(&["report", state.to_str().unwrap()], &again);
    let r2 = json(&again.join("report.json"));
    assert_eq!(r["tangle"], r2["tangle"]);
}
