//! End-to-end generation of synthetic study datasets.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    block_bootstrap_days, gr4j_run, simulate_simple_gw, synthetic_climate, BootstrapSpec,
    ClimateSpec, GammaLagSpec, Gr4jParams, RainCropSpec,
};
use crate::error::{Error, Result};
use crate::series::{calendar, Dataset};
use crate::stochastic::ArfimaSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationKind {
    /// Gamma-lag rainfall response plus long-memory noise.
    Simple,
    /// Production store of a GR4J run.
    Gr4j,
    /// Resampled climate only.
    Bootstrap,
}

impl std::str::FromStr for GenerationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Self::Simple),
            "gr4j" => Ok(Self::Gr4j),
            "bootstrap" => Ok(Self::Bootstrap),
            other => Err(Error::InvalidArgument(format!(
                "unknown generation kind {other:?}"
            ))),
        }
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSpec {
    pub kind: GenerationKind,
    /// Drives the bootstrap and the noise; replicates differ only here.
    pub seed: u64,
    pub bootstrap: BootstrapSpec,
    /// Climate record standing in for observations when no source file is
    /// given. Its seed is fixed so replicates resample the same record.
    pub climate: ClimateSpec,
    pub climate_seed: u64,
    pub gamma: GammaLagSpec,
    pub crop: RainCropSpec,
    pub noise: ArfimaSpec,
    pub beta0: f64,
    pub gr4j: Gr4jParams,
    pub initial_fill: f64,
    /// Simulated days discarded before the GR4J output starts.
    pub spinup_days: usize,
}

pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

impl Default for GenerationSpec {
    fn default() -> Self {
        Self {
            kind: GenerationKind::Simple,
            seed: 0,
            bootstrap: BootstrapSpec::default(),
            climate: ClimateSpec::default(),
            climate_seed: 1,
            gamma: GammaLagSpec::default(),
            crop: RainCropSpec::default(),
            noise: ArfimaSpec::groundwater_default(DEFAULT_NOISE_SIGMA),
            beta0: 5.0,
            gr4j: Gr4jParams::default(),
            initial_fill: 0.5,
            spinup_days: calendar::DAYS_PER_YEAR,
        }
    }
}

impl GenerationSpec {
    pub fn new(kind: GenerationKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            ..Default::default()
        }
    }

    /// Number of output rows.
    pub fn output_days(&self) -> usize {
        self.bootstrap.target_years * calendar::DAYS_PER_YEAR
    }
}

/// Provenance recorded next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub version: String,
    pub spec: GenerationSpec,
    /// `synthetic` or the path of the source file.
    pub source: String,
    /// SHA-256 of the source columns, for checking a source file later.
    pub source_digest: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

/// SHA-256 over column names and the little-endian bytes of every value.
pub fn dataset_digest(data: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(data.t0().to_string().as_bytes());
    for c in data.columns() {
        h.update(c.name().as_bytes());
        for v in c.values() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Generate a dataset from `source` (columns `rain` and `evap`), or from
/// the synthetic climate when `source` is `None`.
pub fn generate(
    spec: &GenerationSpec,
    source: Option<(&Dataset, &str)>,
) -> Result<(Dataset, GenerationManifest)> {
    let owned;
    let (src, label) = match source {
        Some((d, label)) => (d, label.to_string()),
        None => {
            owned = synthetic_climate(&spec.climate, spec.climate_seed)?;
            (&owned, "synthetic".to_string())
        }
    };
    for col in ["rain", "evap"] {
        if !src.has(col) {
            return Err(Error::UnknownColumn(format!(
                "source lacks column {col:?}; expected header {}",
                crate::series::HEADER_CONTRACT
            )));
        }
    }
    let src = Dataset::new(vec![src.get("rain")?.clone(), src.get("evap")?.clone()])?;
    let days = spec.output_days();
    let mut boot = spec.bootstrap.clone();
    boot.seed = spec.seed;
    let noise_seed = spec.seed ^ 0x9e37_79b9_7f4a_7c15;
    let data = match spec.kind {
        GenerationKind::Bootstrap => block_bootstrap_days(&src, &boot, days)?.data,
        GenerationKind::Simple => {
            let lead = spec.gamma.t_mem;
            let forcing = block_bootstrap_days(&src, &boot, days + lead)?.data;
            let level = simulate_simple_gw(
                forcing.get("rain")?,
                &spec.gamma,
                &spec.crop,
                &spec.noise,
                spec.beta0,
                noise_seed,
            )?;
            forcing.slice(lead..days + lead)?.with_column(level)?
        }
        GenerationKind::Gr4j => {
            let lead = spec.spinup_days;
            let forcing = block_bootstrap_days(&src, &boot, days + lead)?.data;
            let run = gr4j_run(
                &spec.gr4j,
                forcing.get("rain")?,
                forcing.get("evap")?,
                spec.initial_fill,
            )?;
            forcing
                .slice(lead..days + lead)?
                .with_column(run.storage.slice(lead..days + lead)?)?
        }
    };
    let manifest = GenerationManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: GenerationSpec {
            bootstrap: boot,
            ..spec.clone()
        },
        source: label,
        source_digest: dataset_digest(&src),
        rows: data.len(),
        columns: data.column_names().iter().map(|s| s.to_string()).collect(),
    };
    Ok((data, manifest))
}
