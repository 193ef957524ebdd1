//! Command-line front end for the in-context vibration-fault classifier.
//!
//! One binary, `tsicl`, ties the pipeline together as subcommands:
//!
//! - `synth` — generate a labeled synthetic recording store
//! - `preprocess` — turn recordings into banded spectral covariate matrices
//! - `train` — fit the forecaster on sampled few-shot episodes
//! - `eval` — classify drawn contexts and report the confusion matrix
//! - `classify <recording>` — classify one recording against a drawn context
//! - `plot <csv>` — render an intensity or loss CSV as an SVG
//!
//! Configuration is flat `key=value` text (see [`config`]) overridden by
//! flags, and every run echoes its effective configuration.  All randomness
//! derives from the single `seed`, so any command rerun with the same
//! configuration reproduces its artifacts byte for byte.
//!
//! Process exit codes, asserted by the integration tests: 0 success, 2
//! argument or configuration error, 3 data or format error, 4 numeric
//! failure.

use std::fmt;

use tsicl_core::dataset::DatasetError;
use tsicl_core::dsp::DspError;
use tsicl_core::metrics::MetricsError;
use tsicl_core::model::{CheckpointError, ModelError};
use tsicl_core::prompt::PromptError;
use tsicl_core::synth::SynthError;

pub mod commands;
pub mod config;
pub mod plot;

pub use config::{parse_args, Invocation, RunConfig};

// ─── Errors ──────────────────────────────────────────────────────────────────

/// Failure modes, each mapped onto one process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration — exit code 2.
    Usage(String),
    /// Unreadable, malformed, or inconsistent data on disk — exit code 3.
    Data(String),
    /// A numeric failure inside the model — exit code 4.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // The message prints bare; the exit code already encodes the kind.
        match self {
            CliError::Usage(msg) | CliError::Data(msg) | CliError::Numeric(msg) => {
                write!(f, "{msg}")
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        match e {
            DatasetError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        match e {
            ModelError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            ModelError::InvalidConfig(_) | ModelError::InvalidArgument(_) => {
                CliError::Usage(e.to_string())
            }
            ModelError::ShapeMismatch { .. } | ModelError::Tensor(_) => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> CliError {
        match e {
            PromptError::Model(m) => m.into(),
            PromptError::DrawTooSmall { .. } | PromptError::InsufficientPool { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

// ─── Entry point ─────────────────────────────────────────────────────────────

/// Help text printed on usage errors and by `tsicl help`.
pub fn usage() -> String {
    "usage: tsicl <command> [args] [flags]

commands:
  synth                 generate a labeled synthetic recording store
  preprocess            turn recordings into spectral covariate matrices
  train                 fit the forecaster on sampled few-shot episodes
  eval                  classify drawn contexts and report the metrics
  classify <recording>  classify one .f32 or .csv recording
  plot <csv>            render an intensity or loss CSV as an SVG
  help                  print this text

flags (each overrides the matching config key; flags win over --config):
  --config <path>               load key=value configuration first
  --seed <u64>                  master seed for every stage
  --data-dir <path>             recording store directory
  --checkpoint <path>           model checkpoint file
  --n-contexts <n>              evaluation contexts to draw
  --samples-per-context <n>     samples per drawn context (context + query)
  --n-channels <n>              covariate channels per recording
  --sub-bands <n>               spectral sub-bands (steps) per sample
  --out <path>                  output directory for run artifacts
"
    .to_string()
}

/// Parses `args`, echoes the effective configuration, and dispatches.
pub fn run(args: &[String]) -> Result<(), CliError> {
    let inv = parse_args(args)?;
    if inv.command == "help" {
        print!("{}", usage());
        return Ok(());
    }
    let cmd = match inv.command.as_str() {
        "synth" => commands::cmd_synth,
        "preprocess" => commands::cmd_preprocess,
        "train" => commands::cmd_train,
        "eval" => commands::cmd_eval,
        "classify" => commands::cmd_classify,
        "plot" => commands::cmd_plot,
        other => {
            return Err(CliError::Usage(format!(
                "unknown command '{other}'\n\n{}",
                usage()
            )))
        }
    };
    print!("{}", inv.config.echo());
    cmd(&inv.config, &inv.positionals)
}
