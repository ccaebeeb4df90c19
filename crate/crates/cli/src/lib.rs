//! Experiment harness for the `symtest` binary: configuration, data
//! ingestion, simulation loops, bandwidth tuning and reports.

pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod report;
pub mod tune;

use std::path::Path;

pub use config::{ExperimentConfig, Format, Method, Overrides};
pub use error::{CliError, Result};
pub use harness::{run_power, run_simulation, run_single};
pub use report::{emit_report, pvalue_uniformity_check, SimulationReport};
pub use tune::{tune_bandwidths, tune_config, TuneOutcome};

/// Subcommands of the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Invariance,
    Equivariance,
    Simulate,
    Power,
    Tune,
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Loads the config, applies overrides, runs the command and returns what
/// should be printed on standard output.
pub fn execute(cmd: Command, config: &Path, overrides: &Overrides) -> Result<String> {
    let mut cfg = ExperimentConfig::load(config)?;
    cfg.apply(overrides)?;
    match cmd {
        Command::Invariance | Command::Equivariance => {
            let want = cmd == Command::Equivariance;
            if cfg.method.is_conditional() != want {
                return Err(CliError::config(format!(
                    "method '{}' is not a{} test",
                    cfg.method,
                    if want { "n equivariance" } else { "n invariance" }
                )));
            }
            Ok(json(&run_single(&cfg)?))
        }
        Command::Simulate => {
            let report = run_simulation(&cfg)?;
            match &cfg.output {
                Some(path) => {
                    emit_report(&report, path, cfg.output_format())?;
                    Ok(format!(
                        "{} N={} rejection_rate={} std_error={} -> {}\n",
                        report.method,
                        report.replications,
                        report.rejection_rate,
                        report.std_error,
                        path.display()
                    ))
                }
                None => Ok(report.to_json()),
            }
        }
        Command::Power => Ok(json(&run_power(&cfg)?)),
        Command::Tune => {
            let (outcome, tuned) = tune_config(&cfg)?;
            let out = serde_json::json!({ "outcome": outcome, "config": tuned });
            if let Some(path) = &cfg.output {
                std::fs::write(path, json(&tuned)).map_err(|e| CliError::io(path, e))?;
            }
            Ok(json(&out))
        }
    }
}
