//! End-to-end runs of the `stable-fields` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stable-fields"));
    c.env_remove("STABLE_FIELDS_OUTPUT");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BN_IID: &str = r#"{
  "model": {"tag": "iid_delta", "alpha": 1.2, "d": 1},
  "experiment": {"kind": "bn"},
  "numeric": {"n_grid": [1, 2, 4, 8, 16, 32, 64]}
}"#;

const MOMENTS_EMBEDDED: &str = r#"{
  "model": {"tag": "embedded", "alpha": 1.2, "d": 2, "p": 1},
  "experiment": {"kind": "moments"},
  "numeric": {"n_grid": [16, 32, 64, 128, 256, 512, 1024], "beta": 0.3, "replicates": 600, "seed": 11}
}"#;

#[test]
fn bn_on_iid_field_is_a_pure_power() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bn.json", BN_IID);
    let out = tmp.path().join("bn");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("bn.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,bn,err"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 7);
    for (n, bn) in rows {
        let exact = f64::powf(n, 1.0 / 1.2);
        assert!((bn - exact).abs() <= 1e-12 * exact, "n={n}: {bn} vs {exact}");
    }
    let report = json(&out.join("report.json"));
    assert_eq!(report["verdict"], "pass");
    assert!((report["fitted"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(fs::read_to_string(out.join("plot.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn embedded_moments_follow_effective_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.json", MOMENTS_EMBEDDED);
    let out = tmp.path().join("m");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&out.join("report.json"));
    // p β / α with p = 1, β = 0.3, α = 1.2.
    let fitted = report["fitted"].as_f64().unwrap();
    assert!((fitted - 0.25).abs() < 0.04, "{report}");
    assert!((fitted - 0.5).abs() > 0.04);
    assert_eq!(report["predicted"].as_f64().unwrap(), 0.25);
    assert!(report["details"]["constant_check"]["exponent_expected"].is_number());
    assert!(fs::read_to_string(out.join("moments.csv")).unwrap().starts_with("n,estimate,stderr,R\n"));
}

#[test]
fn reruns_reproduce_every_checksum() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.json", MOMENTS_EMBEDDED);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a, &[]).status.success());
    assert!(run(&cfg, &b, &["--threads", "2"]).status.success());
    let (ma, mb) = (json(&a.join("manifest.json")), json(&b.join("manifest.json")));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["seed"], 11);

    let c = tmp.path().join("c");
    assert!(run(&cfg, &c, &["--seed", "12"]).status.success());
    let mc = json(&c.join("manifest.json"));
    assert_eq!(mc["seed"], 12);
    assert_ne!(ma["config_hash"], mc["config_hash"]);
    assert_ne!(
        fs::read(a.join("moments.csv")).unwrap(),
        fs::read(c.join("moments.csv")).unwrap()
    );
}

#[test]
fn manifest_lists_exactly_the_files_written() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bn.json", BN_IID);
    let out = tmp.path().join("run");
    assert!(run(&cfg, &out, &[]).status.success());
    let manifest = json(&out.join("manifest.json"));
    let mut listed: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["path"].as_str().unwrap().to_string())
        .collect();
    listed.push("manifest.json".into());
    listed.sort();
    let mut present: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    present.sort();
    assert_eq!(listed, present);
    let mut siblings: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    siblings.sort();
    assert_eq!(siblings, vec!["bn.json", "run"]);
}

#[test]
fn formats_select_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = BN_IID.replace("\"experiment\"", "\"output\": {\"formats\": [\"csv\"]}, \"experiment\"");
    let cfg = write_config(tmp.path(), "bn.json", &text);
    let out = tmp.path().join("run");
    assert!(run(&cfg, &out, &[]).status.success());
    assert!(out.join("bn.csv").exists());
    assert!(!out.join("report.json").exists());
    assert!(!out.join("plot.svg").exists());
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bn.json", BN_IID);
    let root = tmp.path().join("root");
    let o = bin()
        .arg("run")
        .arg(&cfg)
        .env("STABLE_FIELDS_OUTPUT", &root)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("bn").join("manifest.json").exists());

    let o = bin().arg("run").arg(&cfg).current_dir(tmp.path()).output().unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("stable-fields-runs/bn/manifest.json").exists());

    let named = BN_IID.replace("\"experiment\"", "\"output\": {\"directory\": \"named\"}, \"experiment\"");
    let cfg = write_config(tmp.path(), "named.json", &named);
    let o = bin()
        .arg("run")
        .arg(&cfg)
        .env("STABLE_FIELDS_OUTPUT", &root)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("named/manifest.json").exists());
}

#[test]
fn lattice_kernel_file_resolves_next_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let sub = tmp.path().join("configs");
    fs::create_dir(&sub).unwrap();
    fs::write(sub.join("k.txt"), "# i value\n0 1.0\n1 -2.0\n2 0.5\n").unwrap();
    let cfg = write_config(
        &sub,
        "ma.json",
        r#"{"model": {"tag": "lattice_ma", "alpha": 1.0, "kernel_file": "k.txt"},
            "experiment": {"kind": "bn"}, "numeric": {"n_grid": [1, 2]}}"#,
    );
    let out = tmp.path().join("ma");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("bn.csv")).unwrap();
    // α = 1: b_1 = Σ|f| = 3.5, b_2 = Σ_s max(|f(−s)|, |f(1−s)|) = 1 + 2 + 2 + 0.5 = 5.5.
    let bn: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(bn, vec![3.5, 5.5]);
    assert!(out.join("kernel.txt").exists());
}

#[test]
fn validation_failures_exit_2_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1, "colour": 1}, "experiment": {"kind": "bn"}}"#,
            "model.colour",
        ),
        (
            r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1}, "experiment": {"kind": "moments"}, "numeric": {"beta": 2.0}}"#,
            "numeric.beta",
        ),
        (
            r#"{"model": {"tag": "constant_field", "alpha": 1.2, "d": 1}, "experiment": {"kind": "frechet"}}"#,
            "model.tag",
        ),
        (r#"{"model": {"tag": "lfsm", "alpha": 1.5}, "experiment": {"kind": "holder"}}"#, "model.hurst"),
        (r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1}}"#, "experiment"),
    ];
    for (i, (text, path)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("c{i}.json"), text);
        let o = run(&cfg, &tmp.path().join(format!("o{i}")), &[]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(path), "{path} not in {}", stderr(&o));
        assert!(!tmp.path().join(format!("o{i}")).exists());
    }
}

#[test]
fn numerical_and_io_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // Less than two octaves of window sizes: the growth fit cannot run.
    let cfg = write_config(
        tmp.path(),
        "short.json",
        r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1}, "experiment": {"kind": "moments"},
            "numeric": {"n_grid": [4, 5, 6, 7], "replicates": 100}}"#,
    );
    let o = run(&cfg, &tmp.path().join("short"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = run(&tmp.path().join("missing.json"), &tmp.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn report_tabulates_runs_and_skips_broken_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");
    let bn = write_config(tmp.path(), "bn.json", BN_IID);
    let m = write_config(tmp.path(), "m.json", MOMENTS_EMBEDDED);
    assert!(run(&bn, &runs.join("bn"), &[]).status.success());
    assert!(run(&m, &runs.join("nested/m"), &[]).status.success());
    // A copied run without its manifest, and one whose output was edited.
    assert!(run(&bn, &runs.join("orphan"), &[]).status.success());
    fs::remove_file(runs.join("orphan/manifest.json")).unwrap();
    assert!(run(&bn, &runs.join("tampered"), &[]).status.success());
    fs::write(runs.join("tampered/bn.csv"), "n,bn,err\n").unwrap();

    let o = bin().arg("report").arg(&runs).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("orphan") && err.contains("no manifest.json"), "{err}");
    assert!(err.contains("tampered") && err.contains("checksum mismatch"), "{err}");
    let md = fs::read_to_string(runs.join("report.md")).unwrap();
    assert!(md.contains("| model | theorem | predicted | fitted | stderr | verdict |"));
    let rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| model")).collect();
    assert_eq!(rows.len(), 2, "{md}");
    assert!(rows[0].contains("iid_delta") && rows[0].contains("b_n growth"));
    assert!(rows[1].contains("embedded") && rows[1].contains("maximal moments"));
    assert!(fs::read_to_string(runs.join("report.svg")).unwrap().starts_with("<svg"));

    // The report's own manifest does not add a row on a second pass.
    let o = bin().arg("report").arg(&runs).output().unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(runs.join("report.md")).unwrap(), md);
}

#[test]
fn report_on_a_single_run_and_on_empty_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let bn = write_config(tmp.path(), "bn.json", BN_IID);
    let single = tmp.path().join("single");
    assert!(run(&bn, &single, &[]).status.success());
    let dest = tmp.path().join("summary");
    let o = bin().arg("report").arg(&single).arg("--out").arg(&dest).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let md = fs::read_to_string(dest.join("report.md")).unwrap();
    assert!(md.contains("1 of 1 runs pass"));

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = bin().arg("report").arg(&empty).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!empty.join("report.md").exists());

    let o = bin().arg("report").arg(tmp.path().join("absent")).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn report_experiment_in_a_config() {
    let tmp = tempfile::tempdir().unwrap();
    let bn = write_config(tmp.path(), "bn.json", BN_IID);
    assert!(run(&bn, &tmp.path().join("runs/bn"), &[]).status.success());
    let cfg = write_config(
        tmp.path(),
        "rep.json",
        r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1}, "experiment": {"kind": "report", "source": "runs"}}"#,
    );
    let out = tmp.path().join("consolidated");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("report.md").exists());
}

#[test]
fn every_experiment_kind_runs_at_small_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            "frechet",
            r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1}, "experiment": {"kind": "frechet"},
                "numeric": {"n": 256, "replicates": 500, "seed": 3}}"#,
            "frechet.csv",
        ),
        (
            "holder",
            r#"{"model": {"tag": "lfsm", "alpha": 1.8, "hurst": 0.8}, "experiment": {"kind": "holder"},
                "numeric": {"level": 11, "replicates": 50, "seed": 4}}"#,
            "modulus.csv",
        ),
        (
            "modulus",
            r#"{"model": {"tag": "lfsm", "alpha": 1.8, "hurst": 0.8}, "experiment": {"kind": "modulus"},
                "numeric": {"level": 10, "replicates": 20, "seed": 5}}"#,
            "ratios.csv",
        ),
        (
            "chaining",
            r#"{"model": {"tag": "lfsm", "alpha": 1.6, "hurst": 0.8}, "experiment": {"kind": "chaining"},
                "numeric": {"level": 4, "replicates": 40, "seed": 6}}"#,
            "chaining.csv",
        ),
        (
            "conservative",
            r#"{"model": {"tag": "constant_field", "alpha": 1.5, "d": 1}, "experiment": {"kind": "moments"},
                "numeric": {"n_grid": [16, 32, 64, 128], "replicates": 200, "seed": 7}}"#,
            "moments.csv",
        ),
    ];
    for (name, text, csv) in cases {
        let cfg = write_config(tmp.path(), &format!("{name}.json"), text);
        let out = tmp.path().join(name);
        let o = run(&cfg, &out, &[]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert!(out.join(csv).exists(), "{name}");
        let report = json(&out.join("report.json"));
        assert!(report["fitted"].is_number(), "{name}: {report}");
    }
    let conservative = json(&tmp.path().join("conservative/report.json"));
    assert_eq!(conservative["verdict"], "pass");
    assert!(conservative["fitted"].as_f64().unwrap().abs() < 1e-12);
}
