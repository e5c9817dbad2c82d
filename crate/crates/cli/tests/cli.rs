use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn divfree(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divfree"))
        .args(args)
        .current_dir(dir)
        .env_remove("DIVFREE_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = divfree(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not json: {text}"))
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn demo_config() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.conf");
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for name in ["a.json", "b.json"] {
        ok(p, &["generate", "--kind", "manhattan", "--d", "2", "--L", "8", "--seed", "3", "--out", name]);
    }
    assert_eq!(read(p, "a.json"), read(p, "b.json"));
    assert!(p.join("a.json.manifest").exists());
}

#[test]
fn bad_values_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = divfree(p, &["generate", "--kind", "spiral", "--d", "2", "--L", "8", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["key"], "kind");

    std::fs::write(p.join("bad.conf"), "[generate]\nkind = manhattan\ncolour = red\n").unwrap();
    let out = divfree(p, &["generate", "--config", "bad.conf"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["key"], "colour");

    std::fs::write(p.join("bad.conf"), "[generate]\nkind = manhattan\nd = two\n").unwrap();
    let out = divfree(p, &["generate", "--config", "bad.conf"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["key"], "d");
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = divfree(dir.path(), &["corrector", "--env", "nope.json", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["key"], "env");
}

#[test]
fn plotdata_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("diff.json"),
        r#"{"msd_curve": [{"t": 10.0, "msd_over_t": 4.1, "se": 0.05, "samples": 1000}]}"#,
    )
    .unwrap();
    ok(p, &["plotdata", "--report", "diff.json", "--out", "msd.csv"]);
    let text = read(p, "msd.csv");
    assert_eq!(text.lines().next(), Some("T,msd_over_t,se"));
    assert_eq!(text.lines().count(), 2);

    std::fs::write(p.join("empty.json"), r#"{"msd_curve": []}"#).unwrap();
    ok(p, &["plotdata", "--report", "empty.json", "--out", "empty.csv"]);
    assert_eq!(read(p, "empty.csv").trim_end(), "T,msd_over_t,se");

    ok(p, &["generate", "--kind", "manhattan", "--d", "2", "--L", "16", "--out", "env.json"]);
    ok(p, &["heatkernel", "--env", "env.json", "--nmax", "6", "--out", "hk.json"]);
    ok(p, &["plotdata", "--report", "hk.json", "--out", "hk.csv", "--svg", "hk.svg"]);
    let text = read(p, "hk.csv");
    assert_eq!(text.lines().next(), Some("n,sup_p,sup_times_n_half_d"));
    assert!(read(p, "hk.svg").contains("<polyline"));

    std::fs::write(p.join("other.json"), r#"{"something": 1}"#).unwrap();
    let out = divfree(p, &["plotdata", "--report", "other.json", "--out", "o.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "schema_mismatch");
}

#[test]
fn demo_pipeline_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // a lighter copy of the shipped demo
    let conf = demo_config().replace("samples = 20000", "samples = 2000");
    std::fs::write(p.join("demo.conf"), conf).unwrap();
    ok(p, &["pipeline", "--config", "demo.conf", "--manifest", "out/pipeline.manifest", "--workers", "1"]);
    let report: Value = serde_json::from_str(&read(p, "out/diff.json")).unwrap();
    assert_eq!(report["bound_check"]["passed"], true);
    assert!(read(p, "out/msd.csv").starts_with("T,msd_over_t,se"));

    let before = read(p, "out/endpoints.csv");
    let out = divfree(p, &["rerun", "--manifest", "out/pipeline.manifest", "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("reproduced"));
    assert_eq!(before, read(p, "out/endpoints.csv"));

    // an edited manifest no longer matches its hash
    let m = read(p, "out/pipeline.manifest").replace("samples = 2000", "samples = 2001");
    std::fs::write(p.join("edited.manifest"), m).unwrap();
    let out = divfree(p, &["rerun", "--manifest", "edited.manifest"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["key"], "config_hash");
}
