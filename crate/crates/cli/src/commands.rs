use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use groundcast::datagen::{
    dataset_digest, generate as generate_dataset, GenerationKind, GenerationSpec,
};
use groundcast::harness::{
    epoch_evolution, fit_experiment, lag_sensitivity, load_data, replicate_grid, run_grid,
    summarize, write_csv_file, write_evolution_csv, write_json, write_lag_table_csv,
    write_results_csv, write_summary_csv, write_timings_csv, DataSource, ExperimentConfig,
    FittedModel, GridSpec, ModelKind, RunManifest, StudySettings, EVOLUTION_EPOCHS, LAG_STUDY_LAGS,
};
use groundcast::series::{read_dataset_csv, write_dataset_csv, ScalerParams};
use serde::Serialize;

use crate::config::{read_config, RunConfigFile};
use crate::{FitArgs, GenerateArgs, GridArgs, KindArg, StudyArgs, StudyKind};

fn parallelism(requested: Option<usize>) -> Result<usize> {
    match requested {
        Some(0) => bail!("parallelism must be at least 1"),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Flag raised by Ctrl-C; the run then finishes the cells in flight and
/// writes what it has.
fn cancel_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    // A handler may already be installed (only one is allowed per process).
    let _ = ctrlc::set_handler(move || {
        eprintln!("interrupt: finishing running cells, partial results will be marked incomplete");
        f.store(true, Ordering::SeqCst);
    });
    flag
}

#[derive(Serialize)]
struct GenerateManifest {
    version: String,
    command: &'static str,
    spec: RunConfigFile,
    source: String,
    source_digest: String,
    rows: usize,
    columns: Vec<String>,
    output_digest: String,
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => read_config(path)?.generation.unwrap_or_default(),
        None => GenerationSpec::default(),
    };
    if let Some(kind) = args.kind {
        spec.kind = match kind {
            KindArg::Simple => GenerationKind::Simple,
            KindArg::Gr4j => GenerationKind::Gr4j,
            KindArg::Bootstrap => GenerationKind::Bootstrap,
        };
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(years) = args.years {
        if years == 0 {
            bail!("--years must be at least 1");
        }
        spec.bootstrap.target_years = years;
    }
    let (data, manifest) = match &args.source {
        Some(path) => {
            let source = read_dataset_csv(path)
                .with_context(|| format!("reading source {}", path.display()))?;
            generate_dataset(&spec, Some((&source, &path.display().to_string())))?
        }
        None => generate_dataset(&spec, None)?,
    };
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_dataset_csv(&data, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let manifest_path = args.out.with_extension("manifest.json");
    write_json(
        &GenerateManifest {
            version: manifest.version,
            command: "generate",
            spec: RunConfigFile::with_generation(spec),
            source: manifest.source,
            source_digest: manifest.source_digest,
            rows: manifest.rows,
            columns: manifest.columns,
            output_digest: dataset_digest(&data),
        },
        &manifest_path,
    )?;
    eprintln!(
        "wrote {} rows to {} and {}",
        data.len(),
        args.out.display(),
        manifest_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ModelFile<'a> {
    config: &'a ExperimentConfig,
    scaler: &'a ScalerParams,
    #[serde(flatten)]
    model: &'a FittedModel,
}

pub fn fit(args: FitArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => read_config(path)?.experiment.unwrap_or_default(),
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &args.model {
        config.model = m.parse::<ModelKind>()?;
    }
    if let Some(l) = args.lags {
        config.lags = l;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    match (&args.data, &config.data) {
        (Some(path), _) => config.data = DataSource::Csv(path.clone()),
        (None, DataSource::Csv(_)) => {}
        (None, DataSource::Generated(_)) if args.config.is_none() => {
            bail!("--data is required without a config")
        }
        (None, DataSource::Generated(_)) => {}
    }
    if args.forecast_h == Some(0) {
        bail!("--forecast-h must be at least 1");
    }
    config.validate()?;
    let data = load_data(&config.data).context("loading data")?;
    let outcome =
        fit_experiment(&config, &data).with_context(|| format!("fitting {}", config.model))?;
    let horizon = match args.forecast_h {
        Some(h) if h > outcome.test_target.len() => {
            bail!(
                "--forecast-h {h} exceeds the {} test days",
                outcome.test_target.len()
            )
        }
        Some(h) => h,
        None => outcome.test_target.len(),
    };

    create_dir(&args.out)?;
    let model_path = args
        .out_model
        .clone()
        .unwrap_or_else(|| args.out.join("model.json"));
    write_json(
        &ModelFile {
            config: &config,
            scaler: &outcome.scaler,
            model: &outcome.model,
        },
        &model_path,
    )?;

    let scale = |v: f64| {
        if args.levels {
            outcome.scaler.inverse_value(0, v)
        } else {
            v
        }
    };
    let intervals = if args.emit_intervals {
        match &outcome.intervals {
            Some(iv) => Some(iv),
            None => bail!("--emit-intervals is only available for arima"),
        }
    } else {
        None
    };
    let mut header = vec!["date", "target", "mean"];
    if intervals.is_some() {
        header.extend(["lo80", "hi80", "lo95", "hi95"]);
    }
    let mut rows = vec![header.join(",")];
    for i in 0..horizon {
        let mut cols = vec![
            outcome.test_dates[i].to_string(),
            scale(outcome.test_target[i]).to_string(),
            scale(outcome.test_pred[i]).to_string(),
        ];
        if let Some(iv) = intervals {
            for v in [iv.lower80[i], iv.upper80[i], iv.lower95[i], iv.upper95[i]] {
                cols.push(scale(v).to_string());
            }
        }
        rows.push(cols.join(","));
    }
    let pred_path = args.out.join("predictions.csv");
    fs::write(&pred_path, rows.join("\n") + "\n")?;
    let mut artifacts = vec![
        model_path.display().to_string(),
        pred_path.display().to_string(),
    ];
    if let Some(trace) = &outcome.trace {
        let path = args.out.join("trace.csv");
        trace.write_csv(fs::File::create(&path)?)?;
        artifacts.push(path.display().to_string());
    }
    let mut manifest = RunManifest::new(
        "fit",
        &RunConfigFile::with_experiment(config.clone()),
        vec![config.seed],
        1,
    )?;
    manifest.artifacts = artifacts;
    write_json(&manifest, args.out.join("manifest.json"))?;
    eprintln!(
        "{}: test mse {:.6}, mae {:.6}{}",
        config.model,
        outcome.test_mse,
        outcome.test_mae,
        outcome
            .arima_order()
            .map(|o| format!(", order {o}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn write_grid_outputs(
    command: &str,
    spec: &RunConfigFile,
    grid: &GridSpec,
    out: &Path,
    rows: &[groundcast::harness::ResultRow],
    complete: bool,
) -> Result<()> {
    create_dir(out)?;
    write_results_csv(rows, out.join("results.csv"))?;
    write_json(rows, out.join("results.json"))?;
    write_summary_csv(&summarize(rows, &grid.models), out.join("summary.csv"))?;
    write_timings_csv(rows, out.join("timings.csv"))?;
    let seeds = (0..grid.replicates)
        .map(|r| grid.replicate_seed(r))
        .collect();
    let mut manifest = RunManifest::new(command, spec, seeds, grid.size())?;
    manifest.complete = complete;
    manifest.artifacts = ["results.csv", "results.json", "summary.csv", "timings.csv"]
        .map(String::from)
        .to_vec();
    write_json(&manifest, out.join("manifest.json"))?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    eprintln!(
        "{} of {} cells done ({failed} failed){}; results in {}",
        rows.len(),
        grid.size(),
        if complete { "" } else { ", run interrupted" },
        out.display()
    );
    Ok(())
}

pub fn grid(args: GridArgs) -> Result<()> {
    let file = read_config(&args.config)?;
    let Some(grid) = file.grid.clone() else {
        bail!("{} has no grid section", args.config.display())
    };
    grid.validate()?;
    let workers = parallelism(args.parallelism)?;
    eprintln!(
        "grid has {} cells; running on {workers} workers",
        grid.size()
    );
    let cancel = cancel_flag();
    let outcome = run_grid(&grid, workers, Some(&cancel))?;
    write_grid_outputs(
        "grid",
        &file,
        &grid,
        &args.out,
        &outcome.rows,
        outcome.complete,
    )
}

/// Replicates and epoch cap are divided by these under `--quick`.
const QUICK_REPLICATES: usize = 3;
const QUICK_MAX_EPOCHS: usize = 100;

fn study_settings(lags: usize, args: &StudyArgs) -> StudySettings {
    StudySettings {
        lags,
        nodes: 32,
        patience: 10,
        batch_size: 32,
        max_epochs: args
            .max_epochs
            .unwrap_or(if args.quick { QUICK_MAX_EPOCHS } else { 1000 }),
        ..Default::default()
    }
}

fn generation(kind: GenerationKind, args: &StudyArgs) -> GenerationSpec {
    let mut spec = GenerationSpec::new(kind, args.seed);
    if let Some(years) = args.years {
        spec.bootstrap.target_years = years;
    }
    spec
}

pub fn study(args: StudyArgs) -> Result<()> {
    let workers = parallelism(args.parallelism)?;
    if args.years == Some(0) || args.max_epochs == Some(0) {
        bail!("--years and --max-epochs must be at least 1");
    }
    let gr4j_source = || DataSource::Generated(generation(GenerationKind::Gr4j, &args));
    match args.kind {
        StudyKind::Simple | StudyKind::Gr4j => {
            let (kind, lags) = if args.kind == StudyKind::Simple {
                (GenerationKind::Simple, 20)
            } else {
                (GenerationKind::Gr4j, 50)
            };
            let replicates =
                args.replicates
                    .unwrap_or(if args.quick { QUICK_REPLICATES } else { 10 });
            if replicates == 0 {
                bail!("--replicates must be at least 1");
            }
            let mut grid = replicate_grid(
                kind,
                replicates,
                &ModelKind::STUDY,
                &study_settings(lags, &args),
                args.seed,
            );
            grid.data = DataSource::Generated(generation(kind, &args));
            eprintln!(
                "study has {} cells; running on {workers} workers",
                grid.size()
            );
            let cancel = cancel_flag();
            let outcome = run_grid(&grid, workers, Some(&cancel))?;
            let spec = RunConfigFile::with_grid(grid.clone());
            write_grid_outputs(
                "study",
                &spec,
                &grid,
                &args.out,
                &outcome.rows,
                outcome.complete,
            )?;
            print_summary(&args.out.join("summary.csv"))
        }
        StudyKind::Lags => {
            let settings = study_settings(0, &args);
            let template = settings.config(ModelKind::Lstm1, args.seed, gr4j_source());
            eprintln!(
                "lag study: {} lag counts x 2 models on {workers} workers",
                LAG_STUDY_LAGS.len()
            );
            let (table, rows) = lag_sensitivity(&template, &LAG_STUDY_LAGS, workers)?;
            create_dir(&args.out)?;
            write_lag_table_csv(&table, args.out.join("lags.csv"))?;
            write_results_csv(&rows, args.out.join("results.csv"))?;
            let mut manifest = RunManifest::new(
                "study lags",
                &RunConfigFile::with_experiment(template),
                vec![args.seed],
                table.len() * 2,
            )?;
            manifest.artifacts = vec!["lags.csv".into(), "results.csv".into()];
            write_json(&manifest, args.out.join("manifest.json"))?;
            print_summary(&args.out.join("lags.csv"))
        }
        StudyKind::Evolution => {
            let settings = study_settings(50, &args);
            let config = settings.config(ModelKind::Lstm1, args.seed, gr4j_source());
            let evo = epoch_evolution(&config, &EVOLUTION_EPOCHS)?;
            create_dir(&args.out)?;
            write_evolution_csv(&evo, fs::File::create(args.out.join("evolution.csv"))?)?;
            #[derive(Serialize)]
            struct SnapshotRow {
                epoch: usize,
                mse: f64,
                truncated: bool,
            }
            let snaps: Vec<SnapshotRow> = evo
                .snapshots
                .iter()
                .map(|s| SnapshotRow {
                    epoch: s.epoch,
                    mse: s.mse,
                    truncated: s.truncated,
                })
                .collect();
            write_csv_file(&snaps, args.out.join("snapshots.csv"))?;
            let mut manifest = RunManifest::new(
                "study evolution",
                &RunConfigFile::with_experiment(config),
                vec![args.seed],
                1,
            )?;
            manifest.artifacts = vec!["evolution.csv".into(), "snapshots.csv".into()];
            write_json(&manifest, args.out.join("manifest.json"))?;
            if evo.snapshots.iter().any(|s| s.truncated) {
                eprintln!(
                    "training stopped at epoch {}; later snapshots use that epoch",
                    evo.stopped_epoch
                );
            }
            print_summary(&args.out.join("snapshots.csv"))
        }
    }
}

fn print_summary(path: &PathBuf) -> Result<()> {
    print!("{}", fs::read_to_string(path)?);
    Ok(())
}
