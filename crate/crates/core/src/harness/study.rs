//! The study shapes: replicate comparisons, lag sensitivity and the
//! evolution of predictions over training.

use std::sync::atomic::AtomicBool;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, ModelKind};
use super::fit::{fit_experiment_with_snapshots, load_data, Snapshot};
use super::grid::{run_grid, run_on, GridOutcome, GridSpec, ResultRow};
use crate::datagen::{GenerationKind, GenerationSpec};
use crate::error::{Error, Result};
use crate::stats::FiveNumber;

/// Test-MSE distribution of one model across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    /// Replicates that produced a score.
    pub n: usize,
    pub failed: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

/// Five-number summaries of test MSE per model, in first-seen model order
/// of `models`.
pub fn summarize(rows: &[ResultRow], models: &[ModelKind]) -> Vec<SummaryRow> {
    models
        .iter()
        .map(|&model| {
            let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.model == model).collect();
            let scores: Vec<f64> = mine.iter().filter_map(|r| r.test_mse).collect();
            let f = (!scores.is_empty()).then(|| FiveNumber::of(&scores));
            SummaryRow {
                model,
                n: scores.len(),
                failed: mine.len() - scores.len(),
                min: f.map(|f| f.min),
                q1: f.map(|f| f.q1),
                median: f.map(|f| f.median),
                q3: f.map(|f| f.q3),
                max: f.map(|f| f.max),
            }
        })
        .collect()
}

/// Settings shared by every model of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySettings {
    pub lags: usize,
    pub nodes: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
}

impl Default for StudySettings {
    fn default() -> Self {
        let c = ExperimentConfig::default();
        Self {
            lags: c.lags,
            nodes: c.nodes,
            patience: c.patience,
            weight_decay: c.weight_decay,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            learning_rate: c.learning_rate,
        }
    }
}

impl StudySettings {
    pub fn config(&self, model: ModelKind, seed: u64, data: DataSource) -> ExperimentConfig {
        ExperimentConfig {
            model,
            lags: self.lags,
            nodes: self.nodes,
            patience: self.patience,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            learning_rate: self.learning_rate,
            seed,
            data,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicateStudy {
    pub grid: GridSpec,
    pub outcome: GridOutcome,
    pub summary: Vec<SummaryRow>,
}

/// Grid of `models` over `n_replicates` freshly generated datasets of
/// `kind`; every model sees the same dataset within a replicate.
pub fn replicate_grid(
    kind: GenerationKind,
    n_replicates: usize,
    models: &[ModelKind],
    settings: &StudySettings,
    base_seed: u64,
) -> GridSpec {
    GridSpec {
        models: models.to_vec(),
        lags: vec![settings.lags],
        nodes: vec![settings.nodes],
        patience: vec![settings.patience],
        weight_decay: vec![settings.weight_decay],
        batch_size: vec![settings.batch_size],
        learning_rate: vec![settings.learning_rate],
        dropout_rate: vec![0.0],
        replicates: n_replicates,
        base_seed,
        max_epochs: settings.max_epochs,
        data: DataSource::Generated(GenerationSpec::new(kind, base_seed)),
        ..Default::default()
    }
}

pub fn replicate_simulation_study(
    kind: GenerationKind,
    n_replicates: usize,
    models: &[ModelKind],
    settings: &StudySettings,
    base_seed: u64,
    parallelism: usize,
    cancel: Option<&AtomicBool>,
) -> Result<ReplicateStudy> {
    if kind == GenerationKind::Bootstrap {
        return Err(Error::InvalidArgument(
            "a replicate study needs a simple or gr4j response".into(),
        ));
    }
    let grid = replicate_grid(kind, n_replicates, models, settings, base_seed);
    let outcome = run_grid(&grid, parallelism, cancel)?;
    let summary = summarize(&outcome.rows, models);
    Ok(ReplicateStudy {
        grid,
        outcome,
        summary,
    })
}

/// One row of the lag-sensitivity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagRow {
    pub lags: usize,
    pub arima_mse: Option<f64>,
    pub arima_order: Option<String>,
    pub lstm_mse: Option<f64>,
    pub lstm_epochs: Option<usize>,
    pub error: Option<String>,
}

/// The lag counts of the published table.
pub const LAG_STUDY_LAGS: [usize; 5] = [1, 5, 20, 50, 120];

/// ARIMA and single-layer LSTM fitted on one dataset at each lag count.
/// `template` supplies everything but the model and lag count.
pub fn lag_sensitivity(
    template: &ExperimentConfig,
    lags: &[usize],
    parallelism: usize,
) -> Result<(Vec<LagRow>, Vec<ResultRow>)> {
    if lags.is_empty() {
        return Err(Error::InvalidArgument("lag list is empty".into()));
    }
    let data = load_data(&template.data)?;
    let cells: Vec<ExperimentConfig> = lags
        .iter()
        .flat_map(|&l| {
            [ModelKind::Arima, ModelKind::Lstm1].map(|model| ExperimentConfig {
                model,
                lags: l,
                ..template.clone()
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(ExperimentConfig, Result<ResultRow>)> = pool.install(|| {
        cells
            .into_par_iter()
            .map(|c| {
                let r = run_on(&c, &data, 0);
                (c, r)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut table: Vec<LagRow> = lags
        .iter()
        .map(|&l| LagRow {
            lags: l,
            arima_mse: None,
            arima_order: None,
            lstm_mse: None,
            lstm_epochs: None,
            error: None,
        })
        .collect();
    for (config, result) in results {
        let slot = table
            .iter_mut()
            .find(|t| t.lags == config.lags)
            .expect("lag present");
        match result {
            Ok(row) => {
                if config.model == ModelKind::Arima {
                    slot.arima_mse = row.test_mse;
                    slot.arima_order = row.arima_order.clone();
                } else {
                    slot.lstm_mse = row.test_mse;
                    slot.lstm_epochs = row.epochs_run;
                }
                rows.push(row);
            }
            Err(e) => {
                let msg = format!("{}: {e}", config.model);
                slot.error = Some(match slot.error.take() {
                    Some(prev) => format!("{prev}; {msg}"),
                    None => msg,
                });
            }
        }
    }
    Ok((table, rows))
}

/// Epochs at which the published evolution figure shows predictions.
pub const EVOLUTION_EPOCHS: [usize; 3] = [1, 2, 100];

#[derive(Debug, Clone)]
pub struct Evolution {
    pub dates: Vec<NaiveDate>,
    pub target: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub stopped_epoch: usize,
    /// Predictions of the restored best parameters.
    pub final_predictions: Vec<f64>,
}

/// Train a neural `config` and record its test predictions after each of
/// `epochs`. Requested epochs past the stop are replaced by the last epoch,
/// flagged `truncated`.
pub fn epoch_evolution(config: &ExperimentConfig, epochs: &[usize]) -> Result<Evolution> {
    if !config.model.is_neural() {
        return Err(Error::InvalidArgument(
            "epoch evolution needs a neural model".into(),
        ));
    }
    if epochs.is_empty() || epochs.contains(&0) {
        return Err(Error::InvalidArgument(
            "snapshot epochs must be nonempty and count from 1".into(),
        ));
    }
    let data = load_data(&config.data)?;
    let (outcome, snapshots) = fit_experiment_with_snapshots(config, &data, epochs)?;
    Ok(Evolution {
        dates: outcome.test_dates,
        target: outcome.test_target,
        snapshots,
        stopped_epoch: outcome.trace.map(|t| t.stopped_epoch).unwrap_or(0),
        final_predictions: outcome.test_pred,
    })
}
