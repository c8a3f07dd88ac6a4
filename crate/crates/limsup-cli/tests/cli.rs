use std::path::Path;
use std::process::{Command, Output};

fn limsup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limsup")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn dim_table_and_json() {
    let o = limsup(&["dim", "similarity", "--ratios", "1/3,1/3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().contains("equality_claimed"));
    assert!(out.contains("0.630930"), "{out}");

    let o = limsup(&["--json", "dim", "rect", "--dim-mu", "2", "--tau", "1,2"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["value"], 1.5);
    assert_eq!(v["formula"], "rectangle");
    assert_eq!(v["equality_claimed"], false);

    let o = limsup(&["--json", "dim", "mahler", "--delta", "6/5"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["inputs"]["saturated"], true);
}

#[test]
fn dim_reports_missing_inputs() {
    let o = limsup(&["dim", "jarnik"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--delta"));
    let o = limsup(&["dim", "jarnik", "--delta", "1/2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn content_json_on_cantor_cells() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("k.jsonl");
    std::fs::write(&f, "{\"kind\":\"cube\",\"base\":3,\"level\":1,\"coords\":[0]}\n{\"kind\":\"cube\",\"base\":3,\"level\":1,\"coords\":[2]}\n").unwrap();
    let s = (2f64.ln() / 3f64.ln()).to_string();
    let o = limsup(&["--json", "content", "--regions", f.to_str().unwrap(), "--s", &s, "--base", "3", "--max-level", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for k in ["s", "lower", "upper", "witness_count", "runtime_ms"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert!((v["upper"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(v["lower"].as_f64().unwrap() <= v["upper"].as_f64().unwrap());
}

#[test]
fn bad_region_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.jsonl");
    std::fs::write(&f, "{\"kind\":\"ball\",\"center\":[0.5],\"radius\":0.1}\n{\"kind\":\"ball\"}\n").unwrap();
    let o = limsup(&["content", "--regions", f.to_str().unwrap(), "--s", "0.5", "--max-level", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn build_then_boxcount() {
    let dir = tempfile::tempdir().unwrap();
    let stage = dir.path().join("stage.jsonl");
    let csv = dir.path().join("counts.csv");
    let o = limsup(&["limsup", "build", "rational", "--q-max", "2", "--delta", "1", "--out", stage.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8(read(&stage)).unwrap().lines().count(), 5);

    let o = limsup(&["limsup", "boxcount", "--stage", stage.to_str().unwrap(), "--levels", "2..6", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(read(&csv)).unwrap();
    assert_eq!(text.lines().next(), Some("level,N"));
    assert_eq!(text.lines().nth(1), Some("2,4"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn cantor_build_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let cfg = dir.path().join("c.kv");
    std::fs::write(&cfg, "[cantor]\ndelta = 2\nq_max = 400\n").unwrap();
    let o = limsup(&["cantor", "build", "--config", cfg.to_str().unwrap(), "--depth", "1", "--seed", "3", "--out", tree.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = limsup(&["--json", "cantor", "verify", "--tree", tree.to_str().unwrap(), "--samples", "500", "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["samples"], 500);
    assert!(v["max_ratio"].as_f64().unwrap() <= 1.05);
}

#[test]
fn unknown_experiment_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = limsup(&["experiment", "hausdorff", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown experiment"));
}

#[test]
fn randomized_experiments_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = limsup(&["experiment", "cantor", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn misspelled_parameter_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = limsup(&["experiment", "jarnik", "--set", "detla=2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("detla"));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = limsup(&["experiment", "jarnik", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = a.path().join("mahler.kv");
    std::fs::write(&cfg, "[experiment]\nid = mahler\nseed = 11\n\n[params]\nq = 60\nsamples = 3\nmax_level = 24\n").unwrap();
    for d in [&a, &b] {
        let o = limsup(&["experiment", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    }
    for f in ["mahler.csv", "mahler.summary.json"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f} differs");
    }
    let csv = String::from_utf8(read(&a.path().join("mahler.csv"))).unwrap();
    for line in ["# seed=11", "# q=60", "# samples=3", "# delta=1.2"] {
        assert!(csv.lines().any(|l| l == line), "header lacks {line}");
    }
    assert!(std::fs::read_to_string(a.path().join("mahler.log")).unwrap().contains("runtime_s="));
}

#[test]
fn experiment_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = limsup(&["--json", "experiment", "jarnik", "--set", "q=64", "--set", "q_min=64", "--out", dir.path().to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let row = &v["rows"][0];
    assert_eq!(row["predicted"], 0.5);
    for k in ["label", "measured", "tolerance", "pass"] {
        assert!(row.get(k).is_some(), "missing {k}");
    }
    assert_eq!(o.status.code() == Some(0), v["pass"].as_bool().unwrap());
}
