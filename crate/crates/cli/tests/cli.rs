use std::path::PathBuf;
use std::process::{Command, Output};

fn gdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdl"))
        .args(args)
        .output()
        .expect("spawn gdl")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gdl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn plan_prints_the_sized_networks() {
    let v = json(&gdl(&[
        "plan", "--n", "1024", "--beta", "3", "--d", "1", "--h-star", "2",
    ]));
    assert_eq!(v["k"], 2);
    assert_eq!(v["gen"]["depth"], 18);
    assert_eq!(v["gen"]["width"], 132);
    assert_eq!(v["disc"]["nonzeros"], 3390);
}

#[test]
fn plan_rejects_small_smoothness() {
    let out = gdl(&["plan", "--n", "1024", "--beta", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("β > 2"));
}

#[test]
fn default_config_round_trips_through_the_parser() {
    let out = gdl(&["rate", "--print-default"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = gdl_core::experiments::ExperimentConfig::parse(&text).unwrap();
    assert_eq!(cfg, gdl_core::experiments::ExperimentConfig::default());
}

#[test]
fn small_rate_run_writes_csv_and_plot() {
    let cfg = tmp("small.toml");
    std::fs::write(
        &cfg,
        "ns = [32, 64, 128]\nseeds = 2\nepochs = 4\nsnapshot_every = 2\n",
    )
    .unwrap();
    let csv = tmp("small.csv");
    let out = gdl(&[
        "rate",
        "--config",
        cfg.to_str().unwrap(),
        "--out-csv",
        csv.to_str().unwrap(),
    ]);
    let fit = json(&out);
    assert_eq!(fit["summary"].as_array().unwrap().len(), 3);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);

    let svg = tmp("small.svg");
    let out = gdl(&[
        "plot",
        "--in",
        csv.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(std::fs::read_to_string(&svg)
        .unwrap()
        .contains(r#"class="guide""#));
    assert_eq!(
        std::fs::read_to_string(svg.with_extension("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn unknown_config_key_is_an_error() {
    let cfg = tmp("bad.toml");
    std::fs::write(&cfg, "epoch = 3\n").unwrap();
    let out = gdl(&["rate", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn lower_bound_lab_passes_and_writes_rows() {
    let csv = tmp("lab.csv");
    let v = json(&gdl(&["lower-bound-lab", "--csv", csv.to_str().unwrap()]));
    assert_eq!(v["pass"], true);
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap().lines().count(),
        1 + 9
    );
}

#[test]
fn verify_all_writes_one_line_per_suite() {
    let out_path = tmp("verify.jsonl");
    let out = gdl(&[
        "verify-all",
        "--seed",
        "0",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&out_path).unwrap();
    let names: Vec<String> = text
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["name"]
                .as_str()
                .unwrap()
                .to_owned()
        })
        .collect();
    assert_eq!(names.len(), 7);
    assert!(text.lines().all(|l| l.contains(r#""pass":true"#)));
}
