//! Synthetic forcing and response generation.

mod bootstrap;
mod climate;
mod gr4j;
mod pipeline;
mod response;

pub use bootstrap::{block_bootstrap, block_bootstrap_days, Block, BootstrapSpec, Bootstrapped};
pub use climate::{synthetic_climate, ClimateSpec};
pub use gr4j::{gr4j_run, gr4j_step, uh_ordinates, Gr4jFluxes, Gr4jParams, Gr4jRun, Gr4jState};
pub use pipeline::{
    dataset_digest, generate, GenerationKind, GenerationManifest, GenerationSpec,
    DEFAULT_NOISE_SIGMA,
};
pub use response::{
    crop_rainfall, gamma_lag_weights, lagged_response, simulate_simple_gw, CropThresholds,
    GammaLagSpec, RainCropSpec, DEFAULT_TOTAL_SCALE,
};
