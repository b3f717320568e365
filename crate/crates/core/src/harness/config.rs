use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arima::SelectOptions;
use crate::datagen::{GenerationKind, GenerationSpec};
use crate::error::{Error, Result};
use crate::nnet::{LossKind, TrainConfig};
use crate::series::SplitSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Arima,
    LinearFfnn,
    Ffnn1,
    Ffnn2,
    Lstm1,
    Lstm2,
    Jordan,
    Elman,
}

impl ModelKind {
    /// The six models compared in the simulation studies.
    pub const STUDY: [ModelKind; 6] = [
        ModelKind::Arima,
        ModelKind::LinearFfnn,
        ModelKind::Ffnn1,
        ModelKind::Ffnn2,
        ModelKind::Lstm1,
        ModelKind::Lstm2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Arima => "arima",
            Self::LinearFfnn => "linear_ffnn",
            Self::Ffnn1 => "ffnn1",
            Self::Ffnn2 => "ffnn2",
            Self::Lstm1 => "lstm1",
            Self::Lstm2 => "lstm2",
            Self::Jordan => "jordan",
            Self::Elman => "elman",
        }
    }

    pub fn is_neural(self) -> bool {
        self != Self::Arima
    }

    /// Whether the model reads windows of daily inputs rather than a
    /// lagged design row.
    pub fn is_sequential(self) -> bool {
        matches!(self, Self::Lstm1 | Self::Lstm2 | Self::Jordan | Self::Elman)
    }

    pub fn default_split(self) -> SplitSpec {
        if self.is_neural() {
            SplitSpec::NEURAL
        } else {
            SplitSpec::ARIMA
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Self::Arima,
            Self::LinearFfnn,
            Self::Ffnn1,
            Self::Ffnn2,
            Self::Lstm1,
            Self::Lstm2,
            Self::Jordan,
            Self::Elman,
        ];
        all.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = all.iter().map(|m| m.name()).collect();
            Error::InvalidArgument(format!(
                "unknown model {s:?}; expected one of {}",
                names.join(", ")
            ))
        })
    }
}

/// Where an experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum DataSource {
    Generated(GenerationSpec),
    /// A dataset file with columns `date,rain,evap,level`.
    Csv(PathBuf),
}

impl Default for DataSource {
    fn default() -> Self {
        Self::Generated(GenerationSpec::new(GenerationKind::Simple, 0))
    }
}

/// Order caps for the ARIMA search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArimaCaps {
    pub p_max: usize,
    pub q_max: usize,
}

impl Default for ArimaCaps {
    fn default() -> Self {
        Self { p_max: 3, q_max: 3 }
    }
}

/// One model fit on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Lagged days of each predictor; lag 0 is always included.
    pub lags: usize,
    pub nodes: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    /// Reshuffle training samples every epoch.
    pub shuffle: bool,
    /// `None` picks 80/0/20 for ARIMA and 60/20/20 otherwise.
    pub split: Option<SplitSpec>,
    pub seed: u64,
    pub arima: ArimaCaps,
    pub data: DataSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Lstm1,
            lags: 20,
            nodes: 32,
            patience: 10,
            weight_decay: 0.0,
            batch_size: 32,
            max_epochs: 1000,
            learning_rate: 1e-3,
            dropout_rate: 0.0,
            shuffle: true,
            split: None,
            seed: 0,
            arima: ArimaCaps::default(),
            data: DataSource::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn split(&self) -> SplitSpec {
        self.split.unwrap_or_else(|| self.model.default_split())
    }

    pub fn validate(&self) -> Result<()> {
        self.split().validate()?;
        if self.model.is_neural() {
            self.train_config().validate()?;
            if self.nodes == 0 && self.model != ModelKind::LinearFfnn {
                return Err(Error::InvalidArgument("nodes must be at least 1".into()));
            }
        } else {
            if self.arima.p_max > crate::arima::MAX_ORDER_CAP
                || self.arima.q_max > crate::arima::MAX_ORDER_CAP
            {
                return Err(Error::InvalidArgument(format!(
                    "ARIMA order caps may not exceed {}",
                    crate::arima::MAX_ORDER_CAP
                )));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            weight_decay: self.weight_decay,
            learning_rate: self.learning_rate,
            dropout_rate: self.dropout_rate,
            seed: self.seed,
            shuffle: self.shuffle,
            loss: LossKind::Mse,
            clip_norm: None,
        }
    }

    pub fn select_options(&self) -> SelectOptions {
        SelectOptions {
            p_max: self.arima.p_max,
            q_max: self.arima.q_max,
            d: 0,
            parallel: false,
        }
    }

    /// First 16 hex digits of the SHA-256 of the config's JSON form. Field
    /// order is fixed by the struct, so the value is stable across runs.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
