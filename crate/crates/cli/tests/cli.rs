use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn loopgas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopgas"))
        .args(args)
        .current_dir(dir)
        .env("LOOPGAS_OUT", dir.join("out"))
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_parse_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&loopgas(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&loopgas(tmp.path(), &["--version"])), 0);
    assert_eq!(code(&loopgas(tmp.path(), &["no-such-command"])), 1);
    assert_eq!(
        code(&loopgas(tmp.path(), &["gen-data", "--rows", "two"])),
        1
    );
}

#[test]
fn usage_and_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(code(&loopgas(p, &["qkmeans"])), 1);
    assert_eq!(
        code(&loopgas(p, &["gen-data", "--rows", "1", "--cols", "3"])),
        1
    );
    assert_eq!(
        code(&loopgas(
            p,
            &["gen-data", "--rows", "2", "--cols", "2", "--trials", "0"]
        )),
        1
    );
    assert_eq!(code(&loopgas(p, &["qkmeans", "--dataset", "missing"])), 2);
    assert_eq!(
        code(&loopgas(p, &["gen-data", "--config", "missing.json"])),
        1
    );
    fs::write(p.join("bad.json"), "[1, 2]").unwrap();
    assert_eq!(code(&loopgas(p, &["gen-data", "--config", "bad.json"])), 1);
}

#[test]
fn config_file_and_flags_merge() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    fs::write(
        p.join("cfg.json"),
        r#"{"rows": 2, "cols": 3, "trials": 2, "iterations": 50, "unrelated": true}"#,
    )
    .unwrap();
    let o = loopgas(
        p,
        &[
            "gen-data", "--config", "cfg.json", "--cols", "2", "--out", "data",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let echo = read_json(&p.join("data/effective_config.json"));
    assert_eq!(echo["command"], "gen-data");
    assert_eq!(echo["config"]["rows"], 2);
    assert_eq!(echo["config"]["cols"], 2);
    assert_eq!(echo["config"]["trials"], 2);
    assert_eq!(echo["config"]["iterations"], 50);
    assert_eq!(echo["config"]["samples_per_phase"], 150);
    let manifest = read_json(&p.join("data/manifest.json"));
    assert_eq!(manifest["samples"].as_array().unwrap().len(), 300);
}

#[test]
fn pipeline_commands_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let run = |args: &[&str]| {
        let o = loopgas(p, args);
        assert_eq!(
            code(&o),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    };
    run(&[
        "gen-data",
        "--rows",
        "2",
        "--cols",
        "2",
        "--trials",
        "3",
        "--iterations",
        "200",
    ]);
    let data = "out/data/2x2";
    assert!(p.join(data).join("manifest.json").is_file());
    assert!(!p.join(data).join("INCOMPLETE").exists());

    run(&["validate-ed", "--dataset", data, "--stride", "30"]);
    run(&["qkmeans", "--dataset", data]);
    run(&["train-qcnn", "--dataset", data, "--epochs", "5"]);
    let model = "out/train-qcnn/2x2/random/model_rep0.json";
    assert!(p.join(model).is_file());
    run(&[
        "eval-qcnn",
        "--dataset",
        data,
        "--model",
        model,
        "--out",
        "eval",
    ]);
    run(&[
        "baseline",
        "--dataset",
        data,
        "--sizes",
        "30,60",
        "--repetitions",
        "2",
        "--epochs",
        "5",
    ]);
    run(&[
        "flip",
        "--input",
        "out/qkmeans/2x2/assignments.csv",
        "--label-column",
        "oriented_label",
    ]);
    run(&["report"]);

    let report = fs::read_to_string(p.join("out/report/report.csv")).unwrap();
    for source in ["data/2x2", "qkmeans/2x2", "train-qcnn/2x2/random", "flip"] {
        assert!(
            report.contains(&format!("\n{source},command,")),
            "missing {source}"
        );
    }
    let eval = fs::read_to_string(p.join("eval/predictions.csv")).unwrap();
    assert_eq!(eval.lines().count(), 301);
}

#[test]
fn flip_without_transition_is_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    fs::write(p.join("flat.csv"), "x,predicted\n0.1,-1\n0.2,-1\n0.3,-1\n").unwrap();
    assert_eq!(code(&loopgas(p, &["flip", "--input", "flat.csv"])), 3);
    fs::write(
        p.join("ok.csv"),
        "x,predicted\n0.3,1\n0.1,-1\n0.2,-1\n0.4,1\n",
    )
    .unwrap();
    let o = loopgas(p, &["flip", "--input", "ok.csv", "--out", "f"]);
    assert_eq!(code(&o), 0);
    let out = fs::read_to_string(p.join("f/flip.csv")).unwrap();
    assert!(out.starts_with("samples,x_lo,x_hi,center,half_width\n4,0.2,0.3,0.25,"));
    assert_eq!(
        code(&loopgas(
            p,
            &["flip", "--input", "ok.csv", "--x-column", "t"]
        )),
        2
    );
}

#[test]
fn fss_fits_lattice_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    fs::write(
        p.join("centers.csv"),
        "lattice,center\n2x2,0.272\n2x3,0.267\n3x3,0.282\n4x3,0.246\n",
    )
    .unwrap();
    let o = loopgas(p, &["fss", "--input", "centers.csv", "--out", "fss"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(p.join("fss/fss.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let intercept: f64 = row[0].parse().unwrap();
    assert!((intercept - 0.252).abs() < 0.002, "{intercept}");
    assert_eq!(
        fs::read_to_string(p.join("fss/fss_points.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    fs::write(p.join("one.csv"), "plaquettes,center\n1,0.27\n").unwrap();
    assert_eq!(code(&loopgas(p, &["fss", "--input", "one.csv"])), 1);
}
