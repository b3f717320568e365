//! One experiment: scale, fit, forecast the test block, score.

use std::ops::Range;

use chrono::NaiveDate;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, ModelKind};
use crate::arima::{forecast, select_order, DynRegModel, Forecast};
use crate::datagen::generate;
use crate::error::{Error, Result};
use crate::nnet::{
    train_with_hook, Activation, MlpParams, MlpSpec, Network, TrainTrace, WindowedData,
};
use crate::recurrent::{train_rnn_with_hook, RecurrentKind, RecurrentModel, RecurrentSpec};
use crate::series::{embed_lags, mae, mse, read_dataset_csv, Dataset, ScalerParams};

pub const TARGET: &str = "level";
pub const PREDICTORS: [&str; 2] = ["rain", "evap"];

/// Load or generate the dataset an experiment runs on.
pub fn load_data(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Generated(spec) => Ok(generate(spec, None)?.0),
        DataSource::Csv(path) => read_dataset_csv(path),
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "lowercase")]
pub enum FittedModel {
    Arima(DynRegModel),
    Mlp(MlpParams),
    Recurrent(RecurrentModel),
}

/// Everything produced by one fit. Targets and predictions are on the
/// scaled target axis; `scaler` column 0 maps them back to levels.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: FittedModel,
    /// Columns `level, rain, evap`, fitted on the training period only.
    pub scaler: ScalerParams,
    pub test_dates: Vec<NaiveDate>,
    pub test_target: Vec<f64>,
    pub test_pred: Vec<f64>,
    pub test_mse: f64,
    pub test_mae: f64,
    /// ARIMA prediction intervals over the test block.
    pub intervals: Option<Forecast>,
    pub trace: Option<TrainTrace>,
}

impl FitOutcome {
    pub fn arima_order(&self) -> Option<String> {
        match &self.model {
            FittedModel::Arima(m) => Some(m.order.to_string()),
            _ => None,
        }
    }
}

/// Test-block predictions of the parameters reached after one epoch.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub predictions: Vec<f64>,
    pub mse: f64,
    /// Training stopped before a requested epoch; this is the last epoch run.
    pub truncated: bool,
}

fn take_snapshots<N>(
    requested: &[usize],
    captured: Vec<(usize, N)>,
    last: Option<(usize, N)>,
    target: &[f64],
    predict: impl Fn(&N) -> Vec<f64>,
) -> Result<Vec<Snapshot>> {
    let mut out = Vec::new();
    for (epoch, net) in captured {
        let predictions = predict(&net);
        out.push(Snapshot {
            epoch,
            mse: mse(target, &predictions)?,
            predictions,
            truncated: false,
        });
    }
    if let Some((stopped, net)) = last {
        if requested.iter().any(|&e| e > stopped) && !out.iter().any(|s| s.epoch == stopped) {
            let predictions = predict(&net);
            out.push(Snapshot {
                epoch: stopped,
                mse: mse(target, &predictions)?,
                predictions,
                truncated: true,
            });
        } else if let Some(s) = out.iter_mut().find(|s| s.epoch == stopped) {
            s.truncated = requested.iter().any(|&e| e > stopped);
        }
    }
    Ok(out)
}

/// Row blocks of the lagged design and the day range the scaler may see.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    /// Days `0..scaler_days` cover every input and target of the training rows.
    pub scaler_days: usize,
}

pub(crate) fn layout(config: &ExperimentConfig, n: usize) -> Result<Layout> {
    let lags = config.lags;
    if lags >= n {
        return Err(Error::InsufficientData(format!(
            "{lags} lags need more than {n} rows"
        )));
    }
    let (train, val, test) = config.split().ranges(n - lags)?;
    if train.is_empty() {
        return Err(Error::InsufficientData("training block is empty".into()));
    }
    Ok(Layout {
        scaler_days: lags + train.end,
        train,
        val,
        test,
    })
}

/// Min-max scaler for `level, rain, evap` fitted on days `0..days`.
pub(crate) fn fit_scaler(data: &Dataset, days: usize) -> Result<ScalerParams> {
    let cols = [TARGET, PREDICTORS[0], PREDICTORS[1]]
        .iter()
        .map(|c| data.values(c).map(|v| &v[..days]))
        .collect::<Result<Vec<_>>>()?;
    ScalerParams::fit_columns(&cols)
}

fn scaled_dataset(data: &Dataset, scaler: &ScalerParams) -> Result<Dataset> {
    let columns = [TARGET, PREDICTORS[0], PREDICTORS[1]]
        .iter()
        .enumerate()
        .map(|(i, c)| Ok((*c, scaler.apply_slice(i, data.values(c)?))))
        .collect::<Result<Vec<_>>>()?;
    Dataset::from_columns(data.t0(), columns)
}

fn mlp_spec(config: &ExperimentConfig, input_dim: usize) -> Option<MlpSpec> {
    let hidden = match config.model {
        ModelKind::LinearFfnn => vec![],
        ModelKind::Ffnn1 => vec![config.nodes],
        ModelKind::Ffnn2 => vec![config.nodes, config.nodes],
        _ => return None,
    };
    Some(MlpSpec::new(input_dim, hidden, Activation::Relu))
}

fn recurrent_spec(config: &ExperimentConfig) -> Option<RecurrentSpec> {
    let (kind, hidden) = match config.model {
        ModelKind::Lstm1 => (RecurrentKind::Lstm, vec![config.nodes]),
        ModelKind::Lstm2 => (RecurrentKind::Lstm, vec![config.nodes, config.nodes]),
        ModelKind::Jordan => (RecurrentKind::Jordan, vec![config.nodes]),
        ModelKind::Elman => (RecurrentKind::Elman, vec![config.nodes]),
        _ => return None,
    };
    Some(RecurrentSpec::new(kind, PREDICTORS.len(), hidden))
}

/// Fit `config` on `data` and score it on the test block.
pub fn fit_experiment(config: &ExperimentConfig, data: &Dataset) -> Result<FitOutcome> {
    fit_experiment_with_snapshots(config, data, &[]).map(|(o, _)| o)
}

/// As [`fit_experiment`], also capturing the parameters after each epoch in
/// `snapshot_epochs` that training reaches.
pub fn fit_experiment_with_snapshots(
    config: &ExperimentConfig,
    data: &Dataset,
    snapshot_epochs: &[usize],
) -> Result<(FitOutcome, Vec<Snapshot>)> {
    config.validate()?;
    let lay = layout(config, data.len())?;
    let scaler = fit_scaler(data, lay.scaler_days)?;
    let scaled = scaled_dataset(data, &scaler)?;
    let design = embed_lags(&scaled, TARGET, &PREDICTORS, config.lags, true)?;
    let y = &design.target;
    let test_dates: Vec<NaiveDate> = lay
        .test
        .clone()
        .map(|r| data.columns()[0].date(design.target_time(r)))
        .collect();
    let test_target = y[lay.test.clone()].to_vec();

    let mut snapshots = Vec::new();
    let want = |epoch: usize| snapshot_epochs.contains(&epoch);
    let track = !snapshot_epochs.is_empty();
    let (model, test_pred, intervals, trace) = if config.model == ModelKind::Arima {
        let x = design.matrix.view();
        let (_, model) = select_order(
            &y[lay.train.clone()],
            x.slice(s![lay.train.clone(), ..]),
            &config.select_options(),
        )?;
        // Forecast through the validation block (if any) and keep the test part.
        let ahead = lay.val.start..lay.test.end;
        let fc = forecast(&model, x.slice(s![ahead.clone(), ..]), ahead.len())?;
        let skip = lay.val.len();
        let keep = |v: &[f64]| v[skip..].to_vec();
        let fc = Forecast {
            mean: keep(&fc.mean),
            lower80: keep(&fc.lower80),
            upper80: keep(&fc.upper80),
            lower95: keep(&fc.lower95),
            upper95: keep(&fc.upper95),
        };
        (FittedModel::Arima(model), fc.mean.clone(), Some(fc), None)
    } else if let Some(spec) = mlp_spec(config, design.matrix.ncols()) {
        let block = |r: Range<usize>| {
            WindowedData::from_design(
                design.matrix.slice(s![r.clone(), ..]).to_owned(),
                y[r].to_vec(),
            )
        };
        let (train, val, test) = (
            block(lay.train.clone())?,
            block(lay.val.clone())?,
            block(lay.test.clone())?,
        );
        let (mut captured, mut last) = (Vec::new(), None);
        let mut hook = |epoch: usize, net: &MlpParams| {
            if want(epoch) {
                captured.push((epoch, net.clone()));
            }
            if track {
                last = Some((epoch, net.clone()));
            }
        };
        let (net, trace) = train_with_hook(
            MlpParams::init(&spec, config.seed),
            &config.train_config(),
            &train,
            &val,
            &mut hook,
        )?;
        let pred = net.predict_all(&test);
        snapshots = take_snapshots(snapshot_epochs, captured, last, &test_target, |n| {
            n.predict_all(&test)
        })?;
        (FittedModel::Mlp(net), pred, None, Some(trace))
    } else {
        let spec = recurrent_spec(config).expect("every model kind is covered");
        // Daily scaled predictors; the sample for design row r spans days r..=r+lags.
        let n = scaled.len();
        let mut daily = Array2::<f64>::zeros((n, PREDICTORS.len()));
        for (j, c) in PREDICTORS.iter().enumerate() {
            for (i, v) in scaled.values(c)?.iter().enumerate() {
                daily[[i, j]] = *v;
            }
        }
        let window = config.lags + 1;
        let block = |r: Range<usize>| {
            let days = r.start..r.end + config.lags;
            WindowedData::new(daily.slice(s![days, ..]).to_owned(), y[r].to_vec(), window)
        };
        let (train, val, test) = (
            block(lay.train.clone())?,
            block(lay.val.clone())?,
            block(lay.test.clone())?,
        );
        let (mut captured, mut last) = (Vec::new(), None);
        let mut hook = |epoch: usize, net: &RecurrentModel| {
            if want(epoch) {
                captured.push((epoch, net.clone()));
            }
            if track {
                last = Some((epoch, net.clone()));
            }
        };
        let (net, trace) =
            train_rnn_with_hook(&spec, &config.train_config(), &train, &val, &mut hook)?;
        let pred = net.predict_all(&test);
        snapshots = take_snapshots(snapshot_epochs, captured, last, &test_target, |n| {
            n.predict_all(&test)
        })?;
        (FittedModel::Recurrent(net), pred, None, Some(trace))
    };

    if test_pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite test prediction".into()));
    }
    let test_mse = mse(&test_target, &test_pred)?;
    let test_mae = mae(&test_target, &test_pred)?;
    Ok((
        FitOutcome {
            model,
            scaler,
            test_dates,
            test_target,
            test_pred,
            test_mse,
            test_mae,
            intervals,
            trace,
        },
        snapshots,
    ))
}
