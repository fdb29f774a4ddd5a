//! `qkmeans`.

use std::path::{Path, PathBuf};

use clap::Args;
use loopgas::analysis::{flip_interval, FlipIntervalEstimate};
use loopgas::qkmeans::{fidelity_matrix, hs_distance_matrix, kmedoids_two, orient_clusters};
use loopgas::{Clustering, PhaseDataset};
use serde::{Deserialize, Serialize};

use super::{open_dataset, require_dataset, CommonArgs};
use crate::config::{echo_config, merge};
use crate::error::{CliError, CliResult};
use crate::output::{write_csv, Summary};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QkmeansConfig {
    pub dataset: Option<PathBuf>,
}

/// Two-cluster fidelity clustering of every state in a dataset.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct QkmeansArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentRow {
    pub index: usize,
    pub x: f64,
    pub label: i8,
    pub cluster: u8,
    pub oriented_label: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QkmeansReport {
    pub clustering: Clustering,
    pub rows: Vec<AssignmentRow>,
    pub flip: Option<FlipIntervalEstimate>,
    pub degenerate: bool,
}

pub fn run(args: &QkmeansArgs) -> CliResult<PathBuf> {
    let cfg: QkmeansConfig = merge(args.common.config.as_deref(), args)?;
    let ds = open_dataset(require_dataset(&cfg.dataset)?)?;
    let out = args.common.out_dir(&["qkmeans", &ds.geometry()?.label()]);
    execute(&cfg, &ds, &out)?;
    Ok(out)
}

/// Writes the outputs, then fails with a numerical error when the clustering
/// collapses to one cluster or shows no transition.
pub fn execute(cfg: &QkmeansConfig, ds: &PhaseDataset, out: &Path) -> CliResult<QkmeansReport> {
    echo_config(out, "qkmeans", cfg)?;
    let xs = ds.xs();
    let fidelity = fidelity_matrix(&ds.states())?;
    let dist = hs_distance_matrix(&fidelity)?;
    let clustering = kmedoids_two(&dist)?;
    let oriented = orient_clusters(&clustering, &xs)?;
    let flip = flip_interval(&xs, &oriented.labels).ok();

    let rows: Vec<AssignmentRow> = ds
        .samples
        .iter()
        .enumerate()
        .map(|(index, s)| AssignmentRow {
            index,
            x: s.x,
            label: s.label,
            cluster: clustering.assignments[index],
            oriented_label: oriented.labels[index],
        })
        .collect();
    write_csv(&out.join("assignments.csv"), &rows)?;

    let agreement =
        rows.iter().filter(|r| r.label == r.oriented_label).count() as f64 / rows.len() as f64;
    let [m0, m1] = clustering.medoids;
    let mut summary = Summary::new("qkmeans");
    summary
        .add("lattice", ds.geometry()?.label())
        .add("samples", rows.len())
        .add("medoid_0_index", m0)
        .add("medoid_0_x", xs[m0])
        .add("medoid_1_index", m1)
        .add("medoid_1_x", xs[m1])
        .add("loss", clustering.loss)
        .add("updates", clustering.loss_trace.len() - 1)
        .add("degenerate", oriented.degenerate)
        .add("label_agreement", agreement)
        .add_opt("flip_x_lo", flip.map(|f| f.x_lo))
        .add_opt("flip_x_hi", flip.map(|f| f.x_hi))
        .add_opt("flip_center", flip.map(|f| f.center))
        .add_opt("flip_half_width", flip.map(|f| f.half_width));
    summary.write(out)?;

    if oriented.degenerate {
        return Err(CliError::Numerical(
            "clustering collapsed to a single cluster".into(),
        ));
    }
    match flip {
        Some(f) => println!("cluster flip at {:.4} +/- {:.4}", f.center, f.half_width),
        None => {
            return Err(CliError::Numerical(
                "cluster labels show no transition along x".into(),
            ))
        }
    }
    Ok(QkmeansReport {
        clustering,
        rows,
        flip,
        degenerate: oriented.degenerate,
    })
}
