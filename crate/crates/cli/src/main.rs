mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;

#[derive(Parser)]
#[command(name = "admd", version, about = "Augmented dynamic mode decomposition for time-series forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on one training window of a CSV record.
    Fit {
        csv: PathBuf,
        /// Training length in waves.
        #[arg(long, default_value_t = 4)]
        niw: usize,
        /// Number of time derivatives appended to the state.
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=4))]
        nde: u8,
        /// Number of time shifts appended to the state.
        #[arg(long, default_value_t = 0)]
        nts: usize,
        #[arg(long, default_value_t = admd::timeseries::DEFAULT_STEPS_PER_WAVE)]
        steps_per_wave: usize,
        /// First training step; defaults to the earliest step with enough history.
        #[arg(long)]
        start: Option<usize>,
        #[arg(long)]
        no_stabilize: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast from the end of a model's training window and compare with the record.
    Forecast {
        model: PathBuf,
        csv: PathBuf,
        #[arg(long, default_value_t = 1)]
        horizon_waves: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the randomized factorial sweep.
    Experiment {
        csv: PathBuf,
        /// TOML file with any of niw_set, now_set, nde_set, nts_set, samples, seed, stabilize, steps_per_wave.
        #[arg(long)]
        config_file: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; does not affect results.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Sorted mode tables, and statistics across several models.
    Modes {
        #[arg(required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic record.
    Synth {
        #[arg(long, default_value = "single-tone")]
        kind: String,
        #[arg(long, default_value_t = 1)]
        vars: usize,
        #[arg(long, default_value_t = 2048)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Signal-to-noise ratio for tone-plus-noise.
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = admd::timeseries::DEFAULT_STEPS_PER_WAVE)]
        steps_per_wave: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    admd::linalg::use_sequential_kernels();
    match cli.command {
        Command::Fit {
            csv,
            niw,
            nde,
            nts,
            steps_per_wave,
            start,
            no_stabilize,
            out,
        } => commands::fit(
            argv,
            &csv,
            commands::FitArgs {
                niw,
                nde: nde as usize,
                nts,
                steps_per_wave,
                start,
                stabilize: !no_stabilize,
            },
            &out,
        ),
        Command::Forecast {
            model,
            csv,
            horizon_waves,
            out,
        } => commands::forecast(argv, &model, &csv, horizon_waves, &out),
        Command::Experiment {
            csv,
            config_file,
            out_dir,
            jobs,
        } => commands::experiment(argv, &csv, config_file.as_deref(), &out_dir, jobs),
        Command::Modes { models, out } => commands::modes(argv, &models, &out),
        Command::Synth {
            kind,
            vars,
            steps,
            seed,
            snr_db,
            dt,
            steps_per_wave,
            out,
        } => commands::synth(&kind, vars, steps, seed, snr_db, dt, steps_per_wave, &out),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
