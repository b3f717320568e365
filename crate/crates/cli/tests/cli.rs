use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn groundcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groundcast"))
        .args(args)
        .env_remove("GROUNDCAST_PARALLELISM")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small generated dataset with a level column.
fn dataset(dir: &Path, kind: &str, years: &str) -> PathBuf {
    let path = dir.join(format!("{kind}.csv"));
    let out = groundcast(&[
        "generate",
        "--kind",
        kind,
        "--seed",
        "3",
        "--years",
        years,
        "--out",
        p(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = groundcast(&[
            "generate",
            "--kind",
            "simple",
            "--seed",
            "7",
            "--out",
            p(path),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let ma = fs::read_to_string(dir.path().join("a.manifest.json")).unwrap();
    let mb = fs::read_to_string(dir.path().join("b.manifest.json")).unwrap();
    assert_eq!(ma, mb);
    assert!(ma.contains("\"schema_version\": 1"));
}

#[test]
fn gr4j_from_a_two_year_source_gives_ten_years() {
    let dir = TempDir::new().unwrap();
    let source = dataset(dir.path(), "bootstrap", "2");
    let text = fs::read_to_string(&source).unwrap();
    assert_eq!(text.lines().next().unwrap(), "date,rain,evap");
    assert_eq!(text.lines().count(), 731);

    let out_path = dir.path().join("gr4j.csv");
    let out = groundcast(&[
        "generate",
        "--kind",
        "gr4j",
        "--source",
        p(&source),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 3651);
}

#[test]
fn missing_evap_column_cites_the_header_contract() {
    let dir = TempDir::new().unwrap();
    let src = write_config(
        dir.path(),
        "src.csv",
        "date,rain\n2000-01-01,1.0\n2000-01-02,0.0\n",
    );
    let out = groundcast(&[
        "generate",
        "--kind",
        "gr4j",
        "--source",
        p(&src),
        "--out",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("date,rain,evap"), "{}", stderr(&out));
}

#[test]
fn bad_rows_are_named() {
    let dir = TempDir::new().unwrap();
    let src = write_config(
        dir.path(),
        "src.csv",
        "date,rain,evap\n2000-01-01,1.0,2.0\n2000-01-02,oops,2.0\n",
    );
    let out = groundcast(&[
        "generate",
        "--kind",
        "gr4j",
        "--source",
        p(&src),
        "--out",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn arima_fit_writes_interval_columns() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path(), "gr4j", "3");
    let out_dir = dir.path().join("fit");
    let out = groundcast(&[
        "fit",
        "--model",
        "arima",
        "--lags",
        "5",
        "--data",
        p(&data),
        "--out",
        p(&out_dir),
        "--emit-intervals",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let preds = fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
    assert_eq!(
        preds.lines().next().unwrap(),
        "date,target,mean,lo80,hi80,lo95,hi95"
    );
    let model = fs::read_to_string(out_dir.join("model.json")).unwrap();
    assert!(model.contains("\"family\": \"arima\""));
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn neural_fit_writes_a_trace_and_honours_the_horizon() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path(), "simple", "2");
    let cfg = write_config(
        dir.path(),
        "fit.json",
        r#"{"schema_version": 1, "experiment": {"model": "lstm1", "lags": 3, "nodes": 4, "max_epochs": 3}}"#,
    );
    let out_dir = dir.path().join("fit");
    let out = groundcast(&[
        "fit",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&out_dir),
        "--forecast-h",
        "7",
        "--levels",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "epoch,train_loss,val_loss");
    assert_eq!(trace.lines().count(), 4);
    let preds = fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 8);
}

#[test]
fn zero_horizon_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path(), "simple", "2");
    let out = groundcast(&[
        "fit",
        "--model",
        "arima",
        "--lags",
        "2",
        "--data",
        p(&data),
        "--forecast-h",
        "0",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("forecast-h"));
}

#[test]
fn divergence_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path(), "simple", "2");
    let cfg = write_config(
        dir.path(),
        "fit.json",
        r#"{"schema_version": 1, "experiment": {"model": "ffnn2", "lags": 3, "learning_rate": 1e300, "max_epochs": 5}}"#,
    );
    let out = groundcast(&[
        "fit",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"), "{}", stderr(&out));
}

const GRID: &str = r#"{
  "schema_version": 1,
  "grid": {
    "models": ["arima", "ffnn1"],
    "lags": [2, 4],
    "nodes": [4],
    "max_epochs": 5,
    "replicates": 2,
    "base_seed": 5,
    "data": {"generated": {"kind": "simple", "bootstrap": {"target_years": 2}}}
  }
}"#;

#[test]
fn grid_results_match_across_parallelism() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "grid.json", GRID);
    let mut outputs = Vec::new();
    for n in ["1", "3"] {
        let out_dir = dir.path().join(format!("out{n}"));
        let out = groundcast(&[
            "grid",
            "--config",
            p(&cfg),
            "--parallelism",
            n,
            "--out",
            p(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stderr(&out).contains("8 cells"), "{}", stderr(&out));
        outputs.push(fs::read(out_dir.join("results.csv")).unwrap());
        let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
        assert!(manifest.contains("\"complete\": true"));
        let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
        assert_eq!(
            summary.lines().next().unwrap(),
            "model,n,failed,min,q1,median,q3,max"
        );
        assert_eq!(summary.lines().count(), 3);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 9);
}

#[test]
fn empty_grid_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.json",
        r#"{"schema_version": 1, "grid": {"models": []}}"#,
    );
    let out = groundcast(&[
        "grid",
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("grid.models"), "{}", stderr(&out));
}

#[test]
fn schema_errors_list_every_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.json",
        r#"{"grid": {"lagz": [1], "nodes": "x"}, "extra": 1}"#,
    );
    let out = groundcast(&[
        "grid",
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    for needle in ["schema_version", "grid.lagz", "grid.nodes", "extra"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
}

#[test]
fn lag_study_has_the_five_published_rows() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("lags");
    let out = groundcast(&[
        "study",
        "--kind",
        "lags",
        "--quick",
        "--years",
        "2",
        "--max-epochs",
        "3",
        "--parallelism",
        "1",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = fs::read_to_string(out_dir.join("lags.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "lags,arima_mse,arima_order,lstm_mse,lstm_epochs,error"
    );
    let lags: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(lags, ["1", "5", "20", "50", "120"]);
}

#[test]
fn evolution_study_marks_truncated_snapshots() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("evo");
    let out = groundcast(&[
        "study",
        "--kind",
        "evolution",
        "--years",
        "2",
        "--max-epochs",
        "3",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let snaps = fs::read_to_string(out_dir.join("snapshots.csv")).unwrap();
    let rows: Vec<&str> = snaps.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(
        rows[2].starts_with("3,") && rows[2].ends_with(",true"),
        "{snaps}"
    );
}
