//! End-to-end tests of the command-line front end: exit codes, report files,
//! reproducibility and total rejection of invalid configurations.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contact-kk"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("CONTACT_KK_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
seed = 7
eps_list = [0.4, 0.2, 0.1]
z_list = [-20.0]

[system]
n = 2
masses = [1.0, 1.0]
g = 1.0

[[grid]]
box_length = 8.0
points = 32

[bounds]
samples = 20000
masses = [[1.0, 1.0]]
couplings = [1.0]
z = [-2.0]

[kk_check]
grid = { box_length = 4.0, points = 32 }
eps = 0.5
rhs = 3

[forms]
grid = { box_length = 8.0, points = 16 }
fields = 4
consistency_grid = { box_length = 6.0, points = 128 }
consistency_eps = [0.4, 0.3, 0.2]

[spectrum]
levels = [{ box_length = 20.0, points = 1024 }]
eps_list = [0.4, 0.2, 0.1]
"#;

#[test]
fn converge_small_config_passes_with_decreasing_distances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["converge", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/converge.csv")).unwrap();
    let distances: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(8).unwrap().parse().unwrap()).collect();
    assert_eq!(distances.len(), 3);
    assert!(distances.windows(2).all(|w| w[1] < w[0]), "{distances:?}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/converge.json")).unwrap()).unwrap();
    let rec = &json["report"]["records"][0];
    for key in ["spec", "grid", "z", "eps", "mode_pair", "distance", "iterations", "wallclock_ms"] {
        assert!(rec.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn z_above_threshold_exits_2_and_names_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("z_list = [-20.0]", "z_list = [-20.0, -1.0]"));
    let o = run(&["converge", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("z = -1") && msg.contains("z0 = -2.25"), "{msg}");
    assert!(!dir.path().join("out").exists(), "no partial output on rejection");
}

#[test]
fn empty_eps_list_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("eps_list = [0.4, 0.2, 0.1]\nz_list", "eps_list = []\nz_list"));
    let o = run(&["converge", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eps_list"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn malformed_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[system]\nn = 2\nmasses = [1.0, 1.0]\ng = 1.0\nspin = 1\n");
    let o = run(&["kernels", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));
}

#[test]
fn mass_count_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[system]\nn = 3\nmasses = [1.0, 1.0]\ng = 1.0\n");
    let o = run(&["kernels", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kernels_table_contains_closed_form_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["kernels"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/kernels.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("d,z,x,value,method"));
    let row = csv.lines().find(|l| l.starts_with("3,-1,1,") && l.ends_with(",closed")).expect("d=3 z=-1 x=1 row");
    let value: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((value - 0.029_274_915_762_159_58).abs() < 1e-15);
}

#[test]
fn bounds_are_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["bounds", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = std::fs::read(dir.path().join("out/bounds.csv")).unwrap();
    let o = run(&["bounds", "--config", &cfg, "--threads", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("out/bounds.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().next(), Some("name,inputs,claimed,measured,ci,verdict"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",PASS")));
}

#[test]
fn seed_flag_changes_monte_carlo_stream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    run(&["bounds", "--config", &cfg, "--seed", "1"], dir.path());
    let a = std::fs::read(dir.path().join("out/bounds.csv")).unwrap();
    run(&["bounds", "--config", &cfg, "--seed", "2"], dir.path());
    let b = std::fs::read(dir.path().join("out/bounds.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn kk_check_small_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["kk-check", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn spectrum_attractive_and_repulsive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["spectrum", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let repulsive = write_config(dir.path(), &SMALL.replace("g = 1.0", "g = -1.0"));
    let o = run(&["spectrum", "--config", &repulsive], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/spectrum.json")).unwrap()).unwrap();
    assert!(json["report"]["comparison"]["lowest"].as_f64().unwrap() >= -1e-6);
}

#[test]
fn forms_small_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["forms", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn forced_run_is_labeled_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("z_list = [-20.0]", "z_list = [-2.0]"));
    let o = run(&["converge", "--config", &cfg, "--force"], dir.path());
    assert!(matches!(o.status.code(), Some(0) | Some(3) | Some(4)), "{}", stderr(&o));
    if o.status.code() != Some(3) {
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/converge.json")).unwrap()).unwrap();
        assert_eq!(json["metadata"]["unsupported"], serde_json::Value::Bool(true));
    }
}

#[test]
fn unresolved_regularization_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("consistency_eps = [0.4, 0.3, 0.2]", "consistency_eps = [0.1]"));
    let o = run(&["forms", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("under-resolved"));
    assert!(!dir.path().join("out").exists());
}
