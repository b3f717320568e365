//! Result rows, hyperparameter grids and their parallel execution.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ArimaCaps, DataSource, ExperimentConfig, ModelKind};
use super::fit::{fit_experiment, load_data};
use crate::error::{Error, Result};
use crate::series::{Dataset, SplitSpec};

/// Outcome of one experiment cell. Failed cells carry `error` and no scores.
/// Equality ignores the wall time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub fingerprint: String,
    pub model: ModelKind,
    pub replicate: usize,
    pub seed: u64,
    pub lags: usize,
    pub nodes: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub test_mse: Option<f64>,
    pub test_mae: Option<f64>,
    pub epochs_run: Option<usize>,
    pub best_epoch: Option<usize>,
    pub arima_order: Option<String>,
    pub error: Option<String>,
    /// Excluded from serialised results so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time_ms: u64,
}

impl PartialEq for ResultRow {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self, other);
        (
            &a.fingerprint,
            a.model,
            a.replicate,
            a.seed,
            a.lags,
            a.nodes,
            a.patience,
            a.batch_size,
        ) == (
            &b.fingerprint,
            b.model,
            b.replicate,
            b.seed,
            b.lags,
            b.nodes,
            b.patience,
            b.batch_size,
        ) && [a.weight_decay, a.learning_rate, a.dropout_rate].map(f64::to_bits)
            == [b.weight_decay, b.learning_rate, b.dropout_rate].map(f64::to_bits)
            && a.test_mse.map(f64::to_bits) == b.test_mse.map(f64::to_bits)
            && a.test_mae.map(f64::to_bits) == b.test_mae.map(f64::to_bits)
            && (a.epochs_run, a.best_epoch, &a.arima_order, &a.error)
                == (b.epochs_run, b.best_epoch, &b.arima_order, &b.error)
    }
}

impl ResultRow {
    fn blank(config: &ExperimentConfig, replicate: usize) -> Self {
        Self {
            fingerprint: config.fingerprint(),
            model: config.model,
            replicate,
            seed: config.seed,
            lags: config.lags,
            nodes: config.nodes,
            patience: config.patience,
            weight_decay: config.weight_decay,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            dropout_rate: config.dropout_rate,
            test_mse: None,
            test_mae: None,
            epochs_run: None,
            best_epoch: None,
            arima_order: None,
            error: None,
            wall_time_ms: 0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn attach(config: &ExperimentConfig, e: Error) -> Error {
    match e {
        e @ Error::Experiment { .. } => e,
        e => Error::Experiment {
            fingerprint: config.fingerprint(),
            source: Box::new(e),
        },
    }
}

/// Fit `config` on an already loaded dataset.
pub fn run_on(config: &ExperimentConfig, data: &Dataset, replicate: usize) -> Result<ResultRow> {
    let start = Instant::now();
    let outcome = fit_experiment(config, data).map_err(|e| attach(config, e))?;
    let mut row = ResultRow::blank(config, replicate);
    row.test_mse = Some(outcome.test_mse);
    row.test_mae = Some(outcome.test_mae);
    row.arima_order = outcome.arima_order();
    if let Some(t) = &outcome.trace {
        row.epochs_run = Some(t.stopped_epoch);
        row.best_epoch = Some(t.best_epoch);
    }
    row.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(row)
}

/// Load the config's data and fit it. Failures name the config fingerprint.
pub fn run_single(config: &ExperimentConfig) -> Result<ResultRow> {
    let data = load_data(&config.data).map_err(|e| attach(config, e))?;
    run_on(config, &data, 0)
}

fn one<T>(v: T) -> Vec<T> {
    vec![v]
}

/// Value lists for each hyperparameter, crossed with `replicates` datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub models: Vec<ModelKind>,
    pub lags: Vec<usize>,
    pub nodes: Vec<usize>,
    pub patience: Vec<usize>,
    pub weight_decay: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub dropout_rate: Vec<f64>,
    pub replicates: usize,
    /// Replicate `r` uses seed `base_seed + r` for its data and its training.
    pub base_seed: u64,
    pub max_epochs: usize,
    pub shuffle: bool,
    pub split: Option<SplitSpec>,
    pub arima: ArimaCaps,
    /// A generated source is regenerated per replicate with the replicate
    /// seed; a CSV source is shared by every replicate.
    pub data: DataSource,
}

impl Default for GridSpec {
    fn default() -> Self {
        let c = ExperimentConfig::default();
        Self {
            models: one(c.model),
            lags: one(c.lags),
            nodes: one(c.nodes),
            patience: one(c.patience),
            weight_decay: one(c.weight_decay),
            batch_size: one(c.batch_size),
            learning_rate: one(c.learning_rate),
            dropout_rate: one(c.dropout_rate),
            replicates: 10,
            base_seed: 0,
            max_epochs: c.max_epochs,
            shuffle: c.shuffle,
            split: None,
            arima: ArimaCaps::default(),
            data: c.data,
        }
    }
}

impl GridSpec {
    /// Number of cells: product of the list lengths times the replicates.
    pub fn size(&self) -> usize {
        [
            self.models.len(),
            self.lags.len(),
            self.nodes.len(),
            self.patience.len(),
            self.weight_decay.len(),
            self.batch_size.len(),
            self.learning_rate.len(),
            self.dropout_rate.len(),
            self.replicates,
        ]
        .iter()
        .product()
    }

    /// Names of every empty axis.
    pub fn empty_axes(&self) -> Vec<&'static str> {
        let axes = [
            ("models", self.models.is_empty()),
            ("lags", self.lags.is_empty()),
            ("nodes", self.nodes.is_empty()),
            ("patience", self.patience.is_empty()),
            ("weight_decay", self.weight_decay.is_empty()),
            ("batch_size", self.batch_size.is_empty()),
            ("learning_rate", self.learning_rate.is_empty()),
            ("dropout_rate", self.dropout_rate.is_empty()),
            ("replicates", self.replicates == 0),
        ];
        axes.iter().filter(|(_, e)| *e).map(|(n, _)| *n).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let empty = self.empty_axes();
        if !empty.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "grid is empty along: {}",
                empty.join(", ")
            )));
        }
        Ok(())
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        self.base_seed.wrapping_add(replicate as u64)
    }

    /// Data source of one replicate.
    pub fn replicate_data(&self, replicate: usize) -> DataSource {
        match &self.data {
            DataSource::Generated(spec) => {
                let mut spec = spec.clone();
                spec.seed = self.replicate_seed(replicate);
                DataSource::Generated(spec)
            }
            other => other.clone(),
        }
    }

    /// Every cell as `(replicate, config)`.
    pub fn cells(&self) -> Vec<(usize, ExperimentConfig)> {
        let mut out = Vec::with_capacity(self.size());
        for r in 0..self.replicates {
            let data = self.replicate_data(r);
            for &model in &self.models {
                for &lags in &self.lags {
                    for &nodes in &self.nodes {
                        for &patience in &self.patience {
                            for &weight_decay in &self.weight_decay {
                                for &batch_size in &self.batch_size {
                                    for &learning_rate in &self.learning_rate {
                                        for &dropout_rate in &self.dropout_rate {
                                            out.push((
                                                r,
                                                ExperimentConfig {
                                                    model,
                                                    lags,
                                                    nodes,
                                                    patience,
                                                    weight_decay,
                                                    batch_size,
                                                    max_epochs: self.max_epochs,
                                                    learning_rate,
                                                    dropout_rate,
                                                    shuffle: self.shuffle,
                                                    split: self.split,
                                                    seed: self.replicate_seed(r),
                                                    arima: self.arima,
                                                    data: data.clone(),
                                                },
                                            ));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Rows of a grid run, sorted by fingerprint. `complete` is false when the
/// run was cancelled before every cell finished.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub rows: Vec<ResultRow>,
    pub complete: bool,
}

/// Run every cell on `parallelism` workers. Cells that fail become error
/// rows. Setting `cancel` stops new cells from starting.
pub fn run_grid(
    grid: &GridSpec,
    parallelism: usize,
    cancel: Option<&AtomicBool>,
) -> Result<GridOutcome> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let cancelled = || cancel.is_some_and(|c| c.load(Ordering::SeqCst));

    pool.install(|| {
        // Datasets are built once per replicate and shared by its cells.
        let datasets: Vec<Result<Dataset>> = (0..grid.replicates)
            .into_par_iter()
            .map(|r| load_data(&grid.replicate_data(r)))
            .collect();
        if let DataSource::Csv(_) = grid.data {
            // A broken input file is fatal rather than a cell failure.
            if let Some(Err(_)) = datasets.first() {
                return Err(datasets.into_iter().next().unwrap().unwrap_err());
            }
        }
        let cells = grid.cells();
        let rows: Vec<Option<ResultRow>> = cells
            .par_iter()
            .map(|(r, config)| {
                if cancelled() {
                    return None;
                }
                let result = match &datasets[*r] {
                    Ok(data) => run_on(config, data, *r),
                    Err(e) => Err(attach(
                        config,
                        Error::InvalidArgument(format!("data generation failed: {e}")),
                    )),
                };
                Some(result.unwrap_or_else(|e| {
                    let mut row = ResultRow::blank(config, *r);
                    row.error = Some(e.to_string());
                    row
                }))
            })
            .collect();
        let complete = rows.iter().all(Option::is_some);
        let mut rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
        rows.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
        Ok(GridOutcome { rows, complete })
    })
}
