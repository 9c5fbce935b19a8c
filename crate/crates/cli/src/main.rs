//! `nvreadout`: simulate NV nuclear-spin readout traces, train and score
//! discriminators, and reproduce the fidelity experiments.
//!
//! Exit codes: 0 success, 1 internal error, 2 config error, 3 I/O error,
//! 4 contract violation (malformed or incompatible input data).

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nvreadout::nvmodel::Diagnostic;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "nvreadout", version, args_override_self = true)]
#[command(about = "NV-center nuclear-spin readout simulator and classifier benchmark")]
pub struct Cli {
    /// TOML run configuration; unspecified keys keep their defaults.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `run.output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core (overrides `run.workers`).
    #[arg(long, global = true, env = "NVREADOUT_WORKERS")]
    workers: Option<usize>,
    /// Dataset seed (`data.data_seed`).
    #[arg(long, global = true)]
    data_seed: Option<u64>,
    /// Network training seeds, comma separated (`data.training_seeds`).
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, global = true)]
    n_train: Option<usize>,
    #[arg(long, global = true)]
    n_test: Option<usize>,
    /// Repetitions simulated per trace (`data.max_repetitions`).
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Transverse hyperfine coupling of the simulated cell, MHz.
    #[arg(long, global = true, allow_hyphen_values = true)]
    a_perp: Option<f64>,
    /// Ionization coefficient of the simulated cell (k_ion / beta).
    #[arg(long, global = true)]
    k_ion: Option<f64>,
    /// No progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Calibrate the cell and write labeled training and test datasets.
    Simulate {
        /// Also write the traces as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Train one network per training seed on a dataset file.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Score the trained networks on this dataset.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Per-trace network probabilities for a dataset.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Threshold (fit on --train) and network fidelities on --test.
    Eval {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Network files to score; repeatable.
        #[arg(long)]
        model: Vec<PathBuf>,
    },
    /// Fidelity against repetition count and the threshold optimum N_opt.
    SweepN,
    /// N_opt and fidelities over the configured (A_perp, k_ion) cells.
    SweepParams,
    /// Kept-set fidelity against discard ratio for threshold and network.
    Discard,
    /// Accuracy on traces with and without nuclear flips.
    Flips,
    /// Networks trained on the configured cell, scored on other cells.
    Robustness,
    /// Drop the smallest k-means cluster inside each threshold group.
    Kmeans,
    /// Write the 33×33 transition-rate matrix as CSV.
    DumpRates {
        /// Calibrate beta to the photon budget first.
        #[arg(long)]
        calibrated: bool,
        /// The laser-off matrix instead of the illuminated one.
        #[arg(long)]
        relaxation: bool,
    },
    /// Print config diagnostics as JSON; always exits 0.
    Validate {
        /// Config file; defaults to --config.
        file: Option<PathBuf>,
    },
}

impl Cli {
    fn apply_overrides(&self, config: &mut RunConfig) {
        if let Some(out) = &self.out {
            config.run.output = out.clone();
        }
        if let Some(w) = self.workers {
            config.run.workers = w;
        }
        let data = &mut config.data;
        if let Some(s) = self.data_seed {
            data.data_seed = s;
        }
        if let Some(s) = &self.seeds {
            data.training_seeds = s.clone();
        }
        if let Some(n) = self.n_train {
            data.n_train = n;
        }
        if let Some(n) = self.n_test {
            data.n_test = n;
        }
        if let Some(n) = self.reps {
            data.max_repetitions = n;
        }
        if let Some(a) = self.a_perp {
            config.cell.a_perp = a;
        }
        if let Some(k) = self.k_ion {
            config.cell.k_ion = k;
        }
    }

    /// Defaults, then the config file, then flags. Returns every diagnostic.
    fn resolve(&self, file: Option<&PathBuf>) -> Result<(RunConfig, Vec<Diagnostic>), CliError> {
        let (mut config, mut diagnostics) = match file {
            Some(path) => config::load(path)?,
            None => (RunConfig::default(), Vec::new()),
        };
        self.apply_overrides(&mut config);
        diagnostics.extend(config.diagnostics());
        Ok((config, diagnostics))
    }
}

fn validate(cli: &Cli, file: Option<&PathBuf>) -> Vec<Diagnostic> {
    match cli.resolve(file) {
        Ok((_, d)) => d,
        Err(e) => vec![Diagnostic::new("", e.to_string())],
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Validate { file } = &cli.command {
        let diagnostics = validate(cli, file.as_ref().or(cli.config.as_ref()));
        println!("{}", serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize"));
        return Ok(());
    }
    let (config, diagnostics) = cli.resolve(cli.config.as_ref())?;
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(|d| format!("{}: {}", d.field, d.message)).collect();
        return Err(CliError::Config(lines.join("; ")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.workers)
        .build_global()
        .map_err(|e| CliError::Other(format!("worker pool: {e}")))?;
    commands::execute(&cli.command, &config, cli.quiet)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvreadout: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
