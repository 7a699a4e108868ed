use std::path::Path;
use std::process::{Command, Output};

use isac_core::output::{CASE_A_COLUMNS, CASE_B_COLUMNS};

fn isac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isac")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let o = isac(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Schema line and header row of a result CSV.
fn head(text: &str) -> (&str, &str) {
    let mut l = text.lines();
    (l.next().unwrap(), l.next().unwrap())
}

const CASE_A: &str = r#"
experiment = "case_a"
n_setups = 2

[sweep]
gamma_db = [0.0, 8.0]

[scenario]
n_bs = 3
antennas_per_bs = [4, 4, 4]
n_cu = 3
"#;

const CASE_B: &str = r#"
experiment = "case_b"
n_setups = 2

[sweep]
antennas = [4, 8]

[scenario]
n_bs = 2
antennas_per_bs = [2, 2]
n_cu = 2
n_st = 1
"#;

#[test]
fn case_a_sweep_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "a.toml", CASE_A);
    let (o1, o2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    run_ok(&["--config", &cfg, "--out", o1.to_str().unwrap(), "sweep", "--trace"]);
    run_ok(&["--config", &cfg, "--out", o2.to_str().unwrap(), "run"]);
    let csv = read(&o1, "case_a.csv");
    assert_eq!(head(&csv), ("# schema: isac-case-a-sweep/v1", CASE_A_COLUMNS.join(",").as_str()));
    assert_eq!(csv.lines().count(), 2 + 4 * 2);
    assert_eq!(csv, read(&o2, "case_a.csv"));
    assert_eq!(head(&read(&o1, "trace.csv")).0, "# schema: isac-trace/v1");
    let manifest: serde_json::Value = serde_json::from_str(&read(&o1, "manifest.json")).unwrap();
    assert_eq!(manifest["schema"], "isac-manifest/v1");
    assert_eq!(manifest["master_seed"], 1);
    assert_eq!(manifest["setup_seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn case_b_sweep_is_reproducible_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.toml", CASE_B);
    let dirs: Vec<_> = (0..3).map(|i| tmp.path().join(format!("r{i}"))).collect();
    run_ok(&["--config", &cfg, "--out", dirs[0].to_str().unwrap(), "sweep"]);
    run_ok(&["--config", &cfg, "--out", dirs[1].to_str().unwrap(), "sweep"]);
    run_ok(&["--config", &cfg, "--seed", "5", "--out", dirs[2].to_str().unwrap(), "sweep"]);
    let csv = read(&dirs[0], "case_b.csv");
    assert_eq!(head(&csv), ("# schema: isac-case-b-sweep/v1", CASE_B_COLUMNS.join(",").as_str()));
    assert_eq!(csv.lines().count(), 2 + 3 * 2);
    assert_eq!(csv, read(&dirs[1], "case_b.csv"));
    assert_ne!(read(&dirs[0], "case_b_setups.json"), read(&dirs[2], "case_b_setups.json"));
}

#[test]
fn scene_and_demos_write_their_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scene");
    run_ok(&["--out", out.to_str().unwrap(), "generate-scene"]);
    let scene = read(&out, "scene.csv");
    assert_eq!(head(&scene), ("# schema: isac-scene/v1", "role,index,x_m,y_m,antennas,serving_bs"));
    // 4 BSs, 5 CUs, 1 ST, 3 clutter patches.
    assert_eq!(scene.lines().count(), 2 + 13);
    serde_json::from_str::<serde_json::Value>(&read(&out, "scene.json")).unwrap();

    let hdbf = tmp.path().join("hdbf");
    run_ok(&["--out", hdbf.to_str().unwrap(), "--trace", "demo-technique", "hdbf"]);
    assert_eq!(head(&read(&hdbf, "beampattern.csv")), ("# schema: isac-beampattern/v1", "theta_deg,gain,ideal"));
    assert_eq!(head(&read(&hdbf, "demo.csv")).1, "technique,subject,metric,value");
    assert!(hdbf.join("trace.csv").exists());

    let sa = tmp.path().join("sa");
    run_ok(&["--out", sa.to_str().unwrap(), "demo-technique", "sa"]);
    assert!(read(&sa, "demo.csv").contains("sa,exact,collisions,0"));
}

#[test]
fn errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let bad_key = write(tmp.path(), "bad.toml", "seed = 1\n[scenario]\nbogus = 2\n");
    let o = isac(&["--config", &bad_key, "--out", out, "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let bad_value = write(tmp.path(), "neg.toml", "[scenario]\nservice_radius = -1.0\n");
    assert_eq!(isac(&["--config", &bad_value, "--out", out, "run"]).status.code(), Some(2));
    let demo = write(tmp.path(), "demo.toml", "experiment = \"demo\"\n");
    assert_eq!(isac(&["--config", &demo, "--out", out, "sweep"]).status.code(), Some(2));
    let missing = tmp.path().join("missing.toml");
    assert_eq!(isac(&["--config", missing.to_str().unwrap(), "run"]).status.code(), Some(4));
    let file = write(tmp.path(), "file", "");
    let under_file = format!("{file}/out");
    assert_eq!(isac(&["--out", &under_file, "generate-scene"]).status.code(), Some(4));
    assert_eq!(isac(&["demo-technique", "nope"]).status.code(), Some(2));
}
