//! `groundcast`: generate datasets, fit models, run grids and studies.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "groundcast",
    version,
    about = "Groundwater level forecasting toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV plus manifest).
    Generate(GenerateArgs),
    /// Fit one model and write the model, test predictions and trace.
    Fit(FitArgs),
    /// Run a hyperparameter grid.
    Grid(GridArgs),
    /// Run one of the preset studies.
    Study(StudyArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Response to simulate (default simple, or the config's kind).
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Source record with `date,rain,evap` columns; a synthetic climate is used when absent.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output length in years.
    #[arg(long)]
    pub years: Option<usize>,
    /// Config file with a `generation` section; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV; the manifest is written next to it as `<stem>.manifest.json`.
    #[arg(long, default_value = "dataset.csv")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KindArg {
    Simple,
    Gr4j,
    Bootstrap,
}

#[derive(Args)]
pub struct FitArgs {
    /// arima, linear_ffnn, ffnn1, ffnn2, lstm1, lstm2, jordan or elman.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Config file with an `experiment` section; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV with `date,rain,evap,level` columns.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Directory for predictions, trace and manifest.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Model JSON path (default `<out>/model.json`).
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    /// Keep only the first H test days in the predictions file.
    #[arg(long)]
    pub forecast_h: Option<usize>,
    /// Add 80% and 95% interval columns (ARIMA only).
    #[arg(long)]
    pub emit_intervals: bool,
    /// Report predictions in level units instead of the scaled [0, 1] axis.
    #[arg(long)]
    pub levels: bool,
}

#[derive(Args)]
pub struct GridArgs {
    /// Config file with a `grid` section.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, env = "GROUNDCAST_PARALLELISM")]
    pub parallelism: Option<usize>,
    #[arg(long, default_value = "grid-out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct StudyArgs {
    #[arg(long, value_enum)]
    pub kind: StudyKind,
    /// Fewer replicates and epochs, for smoke runs.
    #[arg(long)]
    pub quick: bool,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Length of each generated dataset in years (default 10).
    #[arg(long)]
    pub years: Option<usize>,
    /// Epoch cap for the neural models (default 1000, or 100 with --quick).
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "GROUNDCAST_PARALLELISM")]
    pub parallelism: Option<usize>,
    #[arg(long, default_value = "study-out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    /// Six models on replicates of the simple response.
    Simple,
    /// Six models on replicates of the GR4J response.
    Gr4j,
    /// ARIMA and LSTM across lag counts on one GR4J dataset.
    Lags,
    /// LSTM test predictions after selected epochs.
    Evolution,
}

/// Numerical failures exit 3; everything else that goes wrong exits 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<groundcast::Error>())
        .any(groundcast::Error::is_numerical);
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Grid(a) => commands::grid(a),
        Command::Study(a) => commands::study(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
