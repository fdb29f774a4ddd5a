//! `baseline`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use loopgas::analysis::{flip_interval, mean_stddev};
use loopgas::baselines::{
    predict_labels, train_cnn1d, train_logreg, BaselineTrainConfig, FeatureKind, FeatureMatrix,
    Standardization,
};
use loopgas::datastore::split_physics_aware;
use loopgas::PhaseDataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{open_dataset, require_dataset, CommonArgs};
use crate::config::{echo_config, merge};
use crate::error::{CliError, CliResult};
use crate::output::{write_csv, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Logreg,
    Cnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Squared amplitudes in the computational basis.
    #[default]
    Amps,
    /// Optimized loop-gas angles.
    Params,
}

impl InputKind {
    fn feature_kind(self) -> FeatureKind {
        match self {
            InputKind::Amps => FeatureKind::AmplitudeSq,
            InputKind::Params => FeatureKind::PlgcTheta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub dataset: Option<PathBuf>,
    pub model: ModelKind,
    pub input: InputKind,
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub window_lo: f64,
    pub window_hi: f64,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_strength: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let t = BaselineTrainConfig::default();
        Self {
            dataset: None,
            model: ModelKind::Logreg,
            input: InputKind::Amps,
            sizes: vec![50, 100, 200, 300],
            repetitions: 10,
            window_lo: 0.2,
            window_hi: 0.4,
            seed: 0,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            l2_strength: t.l2_strength,
            lr_decay_factor: t.lr_decay_factor,
            lr_decay_every: t.lr_decay_every,
        }
    }
}

/// Train classical classifiers on random off-window subsets and estimate the
/// transition inside the window.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct BaselineArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Classifier.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Feature source.
    #[arg(long, value_enum)]
    pub input: Option<InputKind>,
    /// Training-subset sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Repetitions per size.
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Lower edge of the test window.
    #[arg(long)]
    pub window_lo: Option<f64>,
    /// Upper edge of the test window.
    #[arg(long)]
    pub window_hi: Option<f64>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial Adam step size.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// L2 penalty strength.
    #[arg(long)]
    pub l2_strength: Option<f64>,
    /// Step-decay factor for the learning rate.
    #[arg(long)]
    pub lr_decay_factor: Option<f64>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    pub lr_decay_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRunRow {
    pub size: usize,
    pub repetition: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_accuracy: Option<f64>,
    pub sign_changes: Option<usize>,
    pub flip_x_lo: Option<f64>,
    pub flip_x_hi: Option<f64>,
    pub flip_center: Option<f64>,
    pub flip_half_width: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSizeRow {
    pub size: usize,
    pub train_size: usize,
    pub runs_with_flip: usize,
    pub flip_center_mean: Option<f64>,
    pub flip_center_stddev: Option<f64>,
    pub flip_half_width_mean: Option<f64>,
    pub test_accuracy_mean: Option<f64>,
    pub sign_changes_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub feature_dim: usize,
    pub runs: Vec<BaselineRunRow>,
    pub sizes: Vec<BaselineSizeRow>,
}

pub fn run(args: &BaselineArgs) -> CliResult<PathBuf> {
    let cfg: BaselineConfig = merge(args.common.config.as_deref(), args)?;
    let ds = open_dataset(require_dataset(&cfg.dataset)?)?;
    let tag = format!(
        "{}-{}",
        format!("{:?}", cfg.model).to_lowercase(),
        format!("{:?}", cfg.input).to_lowercase()
    );
    let out = args
        .common
        .out_dir(&["baseline", &ds.geometry()?.label(), &tag]);
    execute(&cfg, &ds, &out)?;
    Ok(out)
}

/// Number of adjacent label changes along the sequence.
pub fn sign_changes(labels: &[i8]) -> usize {
    labels.windows(2).filter(|w| w[0] != w[1]).count()
}

fn train_and_predict(
    cfg: &BaselineConfig,
    train: &FeatureMatrix,
    labels: &[i8],
    test: &FeatureMatrix,
    seed: u64,
) -> CliResult<Vec<i8>> {
    let tc = BaselineTrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        l2_strength: cfg.l2_strength,
        lr_decay_factor: cfg.lr_decay_factor,
        lr_decay_every: cfg.lr_decay_every,
        seed,
    };
    Ok(match cfg.model {
        ModelKind::Logreg => predict_labels(&train_logreg(train, labels, &tc)?.model, test)?,
        ModelKind::Cnn => predict_labels(&train_cnn1d(train, labels, &tc)?.model, test)?,
    })
}

fn opt_mean(values: &[f64]) -> (Option<f64>, Option<f64>) {
    match mean_stddev(values) {
        Ok((m, s)) => (Some(m), Some(s)),
        Err(_) => (None, None),
    }
}

pub fn execute(cfg: &BaselineConfig, ds: &PhaseDataset, out: &Path) -> CliResult<BaselineReport> {
    if cfg.sizes.is_empty() || cfg.sizes.contains(&0) || cfg.repetitions == 0 {
        return Err(CliError::Usage(
            "sizes and repetitions must be positive".into(),
        ));
    }
    let split = split_physics_aware(&ds.xs(), cfg.window_lo, cfg.window_hi)?;
    let all: Vec<_> = ds.samples.iter().collect();
    let features = FeatureMatrix::extract(&all, cfg.input.feature_kind())?;
    let feature_dim = features.num_features();
    echo_config(out, "baseline", cfg)?;
    println!("feature dimension {feature_dim}");

    let test_x: Vec<f64> = split.test.iter().map(|&i| ds.samples[i].x).collect();
    let test_labels: Vec<i8> = split.test.iter().map(|&i| ds.samples[i].label).collect();

    let mut runs = Vec::new();
    let mut sizes = Vec::new();
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let mut size_runs = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.repetitions {
            let seed = cfg
                .seed
                .wrapping_add((si as u64) << 32)
                .wrapping_add(rep as u64);
            let mut pool = split.train.clone();
            pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            pool.truncate(size);
            pool.sort_unstable();

            let mut train = features.select(&pool);
            let mut test = features.select(&split.test);
            let labels: Vec<i8> = pool.iter().map(|&i| ds.samples[i].label).collect();
            let scaler = Standardization::fit(&train)?;
            scaler.apply(&mut train)?;
            scaler.apply(&mut test)?;

            let mut row = BaselineRunRow {
                size,
                repetition: rep,
                seed,
                train_size: pool.len(),
                test_accuracy: None,
                sign_changes: None,
                flip_x_lo: None,
                flip_x_hi: None,
                flip_center: None,
                flip_half_width: None,
                status: "ok".into(),
            };
            match train_and_predict(cfg, &train, &labels, &test, seed) {
                Ok(pred) => {
                    let correct = pred
                        .iter()
                        .zip(&test_labels)
                        .filter(|(a, b)| a == b)
                        .count();
                    row.test_accuracy = Some(correct as f64 / pred.len() as f64);
                    row.sign_changes = Some(sign_changes(&pred));
                    match flip_interval(&test_x, &pred) {
                        Ok(f) => {
                            row.flip_x_lo = Some(f.x_lo);
                            row.flip_x_hi = Some(f.x_hi);
                            row.flip_center = Some(f.center);
                            row.flip_half_width = Some(f.half_width);
                        }
                        Err(e) => row.status = e.to_string(),
                    }
                }
                Err(e) => row.status = e.to_string(),
            }
            size_runs.push(row);
        }
        let centers: Vec<f64> = size_runs.iter().filter_map(|r| r.flip_center).collect();
        let widths: Vec<f64> = size_runs.iter().filter_map(|r| r.flip_half_width).collect();
        let accs: Vec<f64> = size_runs.iter().filter_map(|r| r.test_accuracy).collect();
        let changes: Vec<f64> = size_runs
            .iter()
            .filter_map(|r| r.sign_changes.map(|c| c as f64))
            .collect();
        let (flip_center_mean, flip_center_stddev) = opt_mean(&centers);
        let row = BaselineSizeRow {
            size,
            train_size: size.min(split.train.len()),
            runs_with_flip: centers.len(),
            flip_center_mean,
            flip_center_stddev,
            flip_half_width_mean: opt_mean(&widths).0,
            test_accuracy_mean: opt_mean(&accs).0,
            sign_changes_mean: opt_mean(&changes).0,
        };
        println!(
            "size {size}: flip {} over {} runs",
            row.flip_center_mean.map_or("none".into(), |m| format!(
                "{m:.4} +/- {:.4}",
                row.flip_center_stddev.unwrap_or(0.0)
            )),
            centers.len()
        );
        sizes.push(row);
        runs.extend(size_runs);
    }
    write_csv(&out.join("baseline_runs.csv"), &runs)?;
    write_csv(&out.join("baseline_summary.csv"), &sizes)?;
    let mut summary = Summary::new("baseline");
    summary
        .add("lattice", ds.geometry()?.label())
        .add("model", format!("{:?}", cfg.model).to_lowercase())
        .add("input", format!("{:?}", cfg.input).to_lowercase())
        .add("feature_dim", feature_dim)
        .add("test_samples", split.test.len())
        .add("available_training_samples", split.train.len());
    summary.write(out)?;
    Ok(BaselineReport {
        feature_dim,
        runs,
        sizes,
    })
}
