//! One module per subcommand family. Each command has a serde config with
//! defaults, a clap flag struct whose options mirror the config fields, and
//! an `execute` function that takes the merged config and an output directory.

use std::path::{Path, PathBuf};

use clap::Args;
use loopgas::plgc::SpsaConfig;
use loopgas::{load_dataset, PhaseDataset, VqeConfig};
use serde::{Deserialize, Serialize};

use crate::config::output_root;
use crate::error::{CliError, CliResult};

pub mod analysis;
pub mod baseline;
pub mod cluster;
pub mod data;
pub mod qcnn;

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [default: a per-command directory under $LOOPGAS_OUT].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn out_dir(&self, parts: &[&str]) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let mut p = output_root();
            p.extend(parts);
            p
        })
    }
}

/// Variational ground-state settings shared by `gen-data` and `validate-ed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqeOptions {
    pub seed: u64,
    pub trials: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub perturbation_scale: f64,
    pub lr_exponent: f64,
    pub perturbation_exponent: f64,
}

impl Default for VqeOptions {
    fn default() -> Self {
        let v = VqeConfig::default();
        Self {
            seed: v.seed,
            trials: v.trials,
            iterations: v.spsa.iterations,
            learning_rate: v.spsa.learning_rate,
            perturbation_scale: v.spsa.perturbation_scale,
            lr_exponent: v.spsa.lr_exponent,
            perturbation_exponent: v.spsa.perturbation_exponent,
        }
    }
}

impl VqeOptions {
    pub fn vqe_config(&self) -> CliResult<VqeConfig> {
        if self.trials == 0
            || self.iterations == 0
            || self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
        {
            return Err(CliError::Usage(
                "trials, iterations, and learning rate must be positive".into(),
            ));
        }
        Ok(VqeConfig {
            trials: self.trials,
            seed: self.seed,
            spsa: SpsaConfig {
                iterations: self.iterations,
                learning_rate: self.learning_rate,
                perturbation_scale: self.perturbation_scale,
                lr_exponent: self.lr_exponent,
                perturbation_exponent: self.perturbation_exponent,
            },
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct VqeFlags {
    /// Base seed for all random draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent SPSA trials per field value.
    #[arg(long)]
    pub trials: Option<usize>,
    /// SPSA steps per trial.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// SPSA step size.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// SPSA perturbation size.
    #[arg(long)]
    pub perturbation_scale: Option<f64>,
    /// Step-size decay exponent (0 keeps it constant).
    #[arg(long)]
    pub lr_exponent: Option<f64>,
    /// Perturbation decay exponent (0 keeps it constant).
    #[arg(long)]
    pub perturbation_exponent: Option<f64>,
}

pub fn require_dataset(path: &Option<PathBuf>) -> CliResult<&Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage("a dataset directory is required (--dataset)".into()))
}

pub fn open_dataset(path: &Path) -> CliResult<PhaseDataset> {
    if !path.is_dir() {
        return Err(CliError::Data(format!(
            "dataset {} not found",
            path.display()
        )));
    }
    Ok(load_dataset(path)?)
}

pub fn lattice_label(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
