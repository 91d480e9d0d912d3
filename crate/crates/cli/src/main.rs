// SPDX-License-Identifier: MIT OR Apache-2.0

//! `tsgan`: simulate, train, detect, eval and diagnose pipelines.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric failure, 4 I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Metric, Preset};
use tsgan::cpd::{FakeDraws, JumpRule};

#[derive(Parser, Debug)]
#[command(name = "tsgan", version, about = "GAN time-series estimation and change-point detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides TSGAN_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a series; writes CSV plus a `.meta.json` sidecar.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a GAN; writes a checkpoint and a `.trace.csv` loss trace.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Train on the first `t` rows only.
        #[arg(long)]
        t: Option<usize>,
        /// Generator updates; 0 writes the initialization untouched.
        #[arg(long)]
        steps: Option<usize>,
        /// 100 warm-up critic updates, 25 critic updates per generator
        /// update, batches of 64.
        #[arg(long = "paper-schedule")]
        standard_schedule: bool,
    },
    /// Run change-point detection; writes a JSON report.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        block_size: Option<usize>,
        #[arg(long)]
        window_radius: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_enum)]
        jump_rule: Option<JumpRuleArg>,
        #[arg(long, value_enum)]
        fake_draws: Option<FakeDrawsArg>,
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        allow_training_overlap: bool,
        /// Also write `.blocks.csv` and `.windows.csv` next to the report.
        #[arg(long)]
        emit_plots: bool,
    },
    /// Compare generator samples against a reference CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generator samples to draw (default: reference size).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        projections: Option<usize>,
        #[arg(long, value_enum, value_delimiter = ',')]
        metrics: Option<Vec<Metric>>,
        /// Write the drawn generator samples to this CSV.
        #[arg(long)]
        samples_out: Option<PathBuf>,
    },
    /// Coupling decay, tail and s-dependence diagnostics for a VAR spec.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Run the tail diagnostic on this CSV instead of a simulated series.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        surrogate_s: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum JumpRuleArg {
    Signed,
    Absolute,
}

impl From<JumpRuleArg> for JumpRule {
    fn from(a: JumpRuleArg) -> Self {
        match a {
            JumpRuleArg::Signed => JumpRule::Signed,
            JumpRuleArg::Absolute => JumpRule::Absolute,
        }
    }
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum FakeDrawsArg {
    Fresh,
    SharedPool,
}

impl From<FakeDrawsArg> for FakeDraws {
    fn from(a: FakeDrawsArg) -> Self {
        match a {
            FakeDrawsArg::Fresh => FakeDraws::Fresh,
            FakeDrawsArg::SharedPool => FakeDraws::SharedPool,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, out } => commands::simulate(&common.into(), out),
        Command::Train {
            common,
            data,
            out,
            t,
            steps,
            standard_schedule,
        } => commands::train(
            &common.into(),
            commands::TrainArgs {
                data,
                out,
                t,
                steps,
                standard_schedule,
            },
        ),
        Command::Detect {
            common,
            data,
            checkpoint,
            out,
            t,
            block_size,
            window_radius,
            threshold,
            jump_rule,
            fake_draws,
            parallel,
            allow_training_overlap,
            emit_plots,
        } => commands::detect(
            &common.into(),
            commands::DetectArgs {
                data,
                checkpoint,
                out,
                t,
                block_size,
                window_radius,
                threshold,
                jump_rule: jump_rule.map(Into::into),
                fake_draws: fake_draws.map(Into::into),
                parallel,
                allow_training_overlap,
                emit_plots,
            },
        ),
        Command::Eval {
            common,
            checkpoint,
            reference,
            out,
            samples,
            projections,
            metrics,
            samples_out,
        } => commands::eval(
            &common.into(),
            commands::EvalArgs {
                checkpoint,
                reference,
                out,
                samples,
                projections,
                metrics,
                samples_out,
            },
        ),
        Command::Diagnose {
            common,
            data,
            out,
            horizon,
            surrogate_s,
        } => commands::diagnose(
            &common.into(),
            commands::DiagnoseArgs {
                data,
                out,
                horizon,
                surrogate_s,
            },
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl From<Common> for commands::Context {
    fn from(c: Common) -> Self {
        commands::Context {
            config_path: c.config,
            seed: c.seed,
            preset: c.preset,
        }
    }
}
