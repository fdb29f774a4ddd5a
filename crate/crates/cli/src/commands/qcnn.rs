//! `train-qcnn` and `eval-qcnn`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use loopgas::analysis::{flip_interval, mean_stddev, FlipIntervalEstimate};
use loopgas::datastore::{split_physics_aware, split_random, Split};
use loopgas::qcnn::{predict_phase, qcnn_outputs, train_qcnn, QcnnModelFile};
use loopgas::{PhaseDataset, QcnnArchitecture, StateVector, TrainConfig};
use serde::{Deserialize, Serialize};

use super::{open_dataset, require_dataset, CommonArgs};
use crate::config::{echo_config, merge};
use crate::error::{CliError, CliResult};
use crate::output::{write_csv, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    /// Seeded random train/test split.
    #[default]
    Random,
    /// Test on a field window around the transition, train outside it.
    Physics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainQcnnConfig {
    pub dataset: Option<PathBuf>,
    pub split: SplitKind,
    pub train_fraction: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_strength: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub convergence_delta: f64,
    pub min_epochs: usize,
    pub patience: usize,
}

impl Default for TrainQcnnConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            dataset: None,
            split: SplitKind::Random,
            train_fraction: 0.8,
            window_lo: 0.2,
            window_hi: 0.4,
            repetitions: 1,
            seed: 0,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            l2_strength: t.l2_strength,
            lr_decay_factor: t.lr_decay_factor,
            lr_decay_every: t.lr_decay_every,
            convergence_delta: t.convergence_delta,
            min_epochs: t.min_epochs,
            patience: t.patience,
        }
    }
}

impl TrainQcnnConfig {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            l2_strength: self.l2_strength,
            lr_decay_factor: self.lr_decay_factor,
            lr_decay_every: self.lr_decay_every,
            convergence_delta: self.convergence_delta,
            min_epochs: self.min_epochs,
            patience: self.patience,
            seed,
        }
    }

    fn split(&self, ds: &PhaseDataset, seed: u64) -> CliResult<Split> {
        Ok(match self.split {
            SplitKind::Random => split_random(ds.len(), self.train_fraction, seed)?,
            SplitKind::Physics => split_physics_aware(&ds.xs(), self.window_lo, self.window_hi)?,
        })
    }
}

/// Train the classifier on a dataset split and report accuracy and flip estimates.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainQcnnArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Split protocol.
    #[arg(long, value_enum)]
    pub split: Option<SplitKind>,
    /// Training share for the random split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Lower edge of the physics-aware test window.
    #[arg(long)]
    pub window_lo: Option<f64>,
    /// Upper edge of the physics-aware test window.
    #[arg(long)]
    pub window_hi: Option<f64>,
    /// Independent training runs with seeds seed, seed+1, ...
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Base seed for splits, initialization, and batching.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum training epochs.
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
    /// Early-stopping threshold on the epoch-loss change.
    #[arg(long)]
    pub convergence_delta: Option<f64>,
    /// Epochs before early stopping may trigger.
    #[arg(long)]
    pub min_epochs: Option<usize>,
    /// Consecutive calm epochs needed to stop early.
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub index: usize,
    pub x: f64,
    pub label: i8,
    pub split: &'static str,
    pub y_out: f64,
    pub predicted: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub repetition: usize,
    pub seed: u64,
    pub split: SplitKind,
    pub train_size: usize,
    pub test_size: usize,
    pub epochs_run: usize,
    pub converged: bool,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub flip_x_lo: Option<f64>,
    pub flip_x_hi: Option<f64>,
    pub flip_center: Option<f64>,
    pub flip_half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainQcnnReport {
    pub runs: Vec<RunRow>,
    pub flip_mean: Option<f64>,
    pub flip_stddev: Option<f64>,
}

fn accuracy(rows: &[&PredictionRow]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    rows.iter().filter(|r| r.label == r.predicted).count() as f64 / rows.len() as f64
}

/// Flip interval over predictions already ordered by ascending `x`.
pub fn flip_of(rows: &[&PredictionRow]) -> Option<FlipIntervalEstimate> {
    let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
    let labels: Vec<i8> = rows.iter().map(|r| r.predicted).collect();
    flip_interval(&xs, &labels).ok()
}

fn predictions(
    ds: &PhaseDataset,
    arch: &QcnnArchitecture,
    params: &[f64],
    split_of: impl Fn(usize) -> &'static str,
) -> CliResult<Vec<PredictionRow>> {
    let states: Vec<&StateVector> = ds.states();
    let ys = qcnn_outputs(&states, arch, params)?;
    Ok(ds
        .samples
        .iter()
        .zip(ys)
        .enumerate()
        .map(|(index, (s, y_out))| PredictionRow {
            index,
            x: s.x,
            label: s.label,
            split: split_of(index),
            y_out,
            predicted: predict_phase(y_out),
        })
        .collect())
}

pub fn train(args: &TrainQcnnArgs) -> CliResult<PathBuf> {
    let cfg: TrainQcnnConfig = merge(args.common.config.as_deref(), args)?;
    let ds_path = require_dataset(&cfg.dataset)?;
    let ds = open_dataset(ds_path)?;
    let split_name = match cfg.split {
        SplitKind::Random => "random",
        SplitKind::Physics => "physics",
    };
    let lattice = ds.geometry()?.label();
    let out = args.common.out_dir(&["train-qcnn", &lattice, split_name]);
    execute_train(&cfg, &ds, &out)?;
    Ok(out)
}

pub fn execute_train(
    cfg: &TrainQcnnConfig,
    ds: &PhaseDataset,
    out: &Path,
) -> CliResult<TrainQcnnReport> {
    if cfg.repetitions == 0 {
        return Err(CliError::Usage("repetitions must be positive".into()));
    }
    let geometry = ds.geometry()?;
    let arch = QcnnArchitecture::new(geometry.num_qubits())?;
    echo_config(out, "train-qcnn", cfg)?;

    let mut runs = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let seed = cfg.seed.wrapping_add(rep as u64);
        let split = cfg.split(ds, seed)?;
        let train_states: Vec<&StateVector> =
            split.train.iter().map(|&i| &ds.samples[i].state).collect();
        let train_labels: Vec<i8> = split.train.iter().map(|&i| ds.samples[i].label).collect();
        let outcome = train_qcnn(&train_states, &train_labels, &arch, &cfg.train_config(seed))?;

        let mut is_test = vec![false; ds.len()];
        for &i in &split.test {
            is_test[i] = true;
        }
        let preds = predictions(ds, &arch, &outcome.params, |i| {
            if is_test[i] {
                "test"
            } else {
                "train"
            }
        })?;
        let train_rows: Vec<&PredictionRow> = preds.iter().filter(|r| r.split == "train").collect();
        let test_rows: Vec<&PredictionRow> = preds.iter().filter(|r| r.split == "test").collect();
        let flip = match cfg.split {
            SplitKind::Physics => flip_of(&test_rows),
            SplitKind::Random => flip_of(&preds.iter().collect::<Vec<_>>()),
        };

        QcnnModelFile::new(&arch, &outcome.params)?
            .save(&out.join(format!("model_rep{rep}.json")))?;
        write_csv(&out.join(format!("predictions_rep{rep}.csv")), &preds)?;
        let losses: Vec<LossRow> = outcome
            .loss_history
            .iter()
            .enumerate()
            .map(|(epoch, &loss)| LossRow { epoch, loss })
            .collect();
        write_csv(&out.join(format!("loss_rep{rep}.csv")), &losses)?;

        let row = RunRow {
            repetition: rep,
            seed,
            split: cfg.split,
            train_size: split.train.len(),
            test_size: split.test.len(),
            epochs_run: outcome.loss_history.len(),
            converged: outcome.converged,
            final_loss: outcome.loss_history.last().copied().unwrap_or(f64::NAN),
            train_accuracy: accuracy(&train_rows),
            test_accuracy: accuracy(&test_rows),
            flip_x_lo: flip.map(|f| f.x_lo),
            flip_x_hi: flip.map(|f| f.x_hi),
            flip_center: flip.map(|f| f.center),
            flip_half_width: flip.map(|f| f.half_width),
        };
        println!(
            "rep {rep}: test accuracy {:.4}, flip center {}",
            row.test_accuracy,
            row.flip_center.map_or("none".into(), |c| format!("{c:.4}"))
        );
        runs.push(row);
    }
    write_csv(&out.join("metrics.csv"), &runs)?;

    let centers: Vec<f64> = runs.iter().filter_map(|r| r.flip_center).collect();
    let half_widths: Vec<f64> = runs.iter().filter_map(|r| r.flip_half_width).collect();
    let accs: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let (flip_mean, flip_stddev) = match mean_stddev(&centers) {
        Ok((m, s)) => (Some(m), Some(s)),
        Err(_) => (None, None),
    };
    let mut summary = Summary::new("train-qcnn");
    summary
        .add("lattice", geometry.label())
        .add("split", format!("{:?}", cfg.split).to_lowercase())
        .add("repetitions", cfg.repetitions)
        .add("mean_test_accuracy", mean_stddev(&accs)?.0)
        .add(
            "min_test_accuracy",
            accs.iter().copied().fold(f64::INFINITY, f64::min),
        )
        .add("runs_with_flip", centers.len())
        .add_opt("flip_center_mean", flip_mean)
        .add_opt("flip_center_stddev", flip_stddev)
        .add_opt(
            "flip_half_width_mean",
            mean_stddev(&half_widths).ok().map(|m| m.0),
        );
    summary.write(out)?;
    Ok(TrainQcnnReport {
        runs,
        flip_mean,
        flip_stddev,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalQcnnConfig {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

/// Evaluate a saved model on every sample of a dataset.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct EvalQcnnArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Trained model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn eval(args: &EvalQcnnArgs) -> CliResult<PathBuf> {
    let cfg: EvalQcnnConfig = merge(args.common.config.as_deref(), args)?;
    let ds = open_dataset(require_dataset(&cfg.dataset)?)?;
    let out = args.common.out_dir(&["eval-qcnn", &ds.geometry()?.label()]);
    execute_eval(&cfg, &ds, &out)?;
    Ok(out)
}

pub fn execute_eval(cfg: &EvalQcnnConfig, ds: &PhaseDataset, out: &Path) -> CliResult<f64> {
    let model_path = cfg
        .model
        .as_deref()
        .ok_or_else(|| CliError::Usage("a model file is required (--model)".into()))?;
    let model = QcnnModelFile::load(model_path)?;
    let n = ds.geometry()?.num_qubits();
    if model.input_qubits != n {
        return Err(CliError::Data(format!(
            "model expects {} qubits, dataset has {n}",
            model.input_qubits
        )));
    }
    echo_config(out, "eval-qcnn", cfg)?;
    let preds = predictions(ds, &model.architecture(), &model.params, |_| "eval")?;
    write_csv(&out.join("predictions.csv"), &preds)?;
    let all: Vec<&PredictionRow> = preds.iter().collect();
    let acc = accuracy(&all);
    let flip = flip_of(&all);
    let mut summary = Summary::new("eval-qcnn");
    summary
        .add("lattice", ds.geometry()?.label())
        .add("samples", preds.len())
        .add("accuracy", acc)
        .add_opt("flip_x_lo", flip.map(|f| f.x_lo))
        .add_opt("flip_x_hi", flip.map(|f| f.x_hi))
        .add_opt("flip_center", flip.map(|f| f.center))
        .add_opt("flip_half_width", flip.map(|f| f.half_width));
    summary.write(out)?;
    println!("accuracy {acc:.4}");
    Ok(acc)
}
