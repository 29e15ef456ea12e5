use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nslab_cli::{run_and_write, Manifest, RunConfig, SCHEMA, SCHEMA_VERSION};

fn verify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verify")).args(args).output().expect("spawn verify")
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn monodromy_exits_zero_with_chi_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = verify(&["monodromy", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m.schema, SCHEMA);
    assert_eq!(m.schema_version, SCHEMA_VERSION);
    assert!(m.pass);
    let s = &m.suites[0];
    assert_eq!(s.suite, "monodromy");
    for v in 0..4 {
        assert_eq!(s.constants[&format!("example1_variant{v}_chi")], 2.0);
    }
    assert!(dir.path().join("monodromy_example1.csv").exists());
}

#[test]
fn local_model_epsilon_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = verify(&["local-model", "--epsilon", "0.05", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let m = manifest(dir.path());
    assert_eq!(m.config.epsilon, vec![0.05]);
    let c = m.suites[0].checks.iter().find(|c| c.name == "omega_squared_eq_p4").unwrap();
    assert!(c.pass && c.value < 1e-12, "{c:?}");
    let holo = fs::read_to_string(dir.path().join("local-model_holonomy.csv")).unwrap();
    assert_eq!(holo.lines().count(), 2);
}

#[test]
fn unknown_suite_fails_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = verify(&["nonsense", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown suite") && err.contains("usage:"), "{err}");
    assert!(!dir.path().join("manifest.json").exists());
    let out = verify(&[]);
    assert!(!out.status.success());
}

#[test]
fn bad_flags_rejected() {
    for args in [&["holo", "--epsilon", "1.5"][..], &["holo", "--tol", "x"], &["holo", "--grid", "4"]] {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args.to_vec();
        a.extend(["--out", dir.path().to_str().unwrap()]);
        let out = verify(&a);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn csv_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = verify(&["forms", "--seed", "7", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    let names = manifest(a.path()).suites[0].csv.clone();
    assert!(!names.is_empty());
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n}");
    }
    // the manifest records its own output dir, so compare it with that field aligned
    let (mut ma, mb) = (manifest(a.path()), manifest(b.path()));
    ma.config.out = mb.config.out.clone();
    assert_eq!(ma, mb);
}

#[test]
fn floats_have_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { out: dir.path().to_path_buf(), ..Default::default() };
    run_and_write("holo", &cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("holo_profiles.csv")).unwrap();
    let row = text.lines().nth(3).unwrap();
    for cell in row.split(',') {
        let mant = cell.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mant.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{cell}");
        let v: f64 = cell.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), cell);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let out_dir = dir.path().join("o");
    fs::write(
        &cfg_path,
        format!(r#"{{"suite": "local-model", "epsilon": [0.1], "seed": 11, "grid": {{"identities": 500}}, "out": {:?}}}"#, out_dir),
    )
    .unwrap();
    let out = verify(&["--config", cfg_path.to_str().unwrap(), "--seed", "12", "--grid", "psi=100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir);
    assert_eq!(m.config.seed, 12);
    assert_eq!(m.config.epsilon, vec![0.1]);
    assert_eq!(m.config.grid["identities"], 500);
    assert_eq!(m.config.grid["psi"], 100);
    assert_eq!(m.suites[0].suite, "local-model");

    fs::write(&cfg_path, r#"{"suite": "holo", "bogus": 1}"#).unwrap();
    let out = verify(&["--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { out: dir.path().to_path_buf(), ..Default::default() };
    let m = run_and_write("monodromy", &cfg).unwrap();
    assert_eq!(manifest(dir.path()), m);
}
