//! `gen-data` and `validate-ed`.

use std::path::{Path, PathBuf};

use clap::Args;
use loopgas::datastore::generate_dataset_to_disk;
use loopgas::ed::{ground_state_ed, LanczosConfig};
use loopgas::{magnetization_per_qubit, vqe_ground_state, DatasetConfig, LatticeGeometry};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lattice_label, open_dataset, CommonArgs, VqeFlags, VqeOptions};
use crate::config::{echo_config, merge};
use crate::error::{CliError, CliResult};
use crate::output::{write_csv, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenDataConfig {
    pub rows: usize,
    pub cols: usize,
    #[serde(flatten)]
    pub vqe: VqeOptions,
    pub samples_per_phase: usize,
    pub x_c_ref: f64,
    pub ferro_offset: f64,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            rows: 0,
            cols: 0,
            vqe: VqeOptions::default(),
            samples_per_phase: d.samples_per_phase,
            x_c_ref: d.x_c_ref,
            ferro_offset: d.ferro_offset,
        }
    }
}

impl GenDataConfig {
    pub fn geometry(&self) -> CliResult<LatticeGeometry> {
        lattice(self.rows, self.cols)
    }

    pub fn dataset_config(&self) -> CliResult<DatasetConfig> {
        Ok(DatasetConfig {
            vqe: self.vqe.vqe_config()?,
            x_c_ref: self.x_c_ref,
            samples_per_phase: self.samples_per_phase,
            ferro_offset: self.ferro_offset,
        })
    }
}

fn lattice(rows: usize, cols: usize) -> CliResult<LatticeGeometry> {
    let g = LatticeGeometry::new(rows, cols)
        .map_err(|e| CliError::Usage(format!("lattice {rows}x{cols}: {e}")))?;
    if g.num_plaquettes() == 0 {
        return Err(CliError::Usage(format!(
            "lattice {rows}x{cols} has no plaquettes"
        )));
    }
    Ok(g)
}

/// Run the VQE on the field grid and write a dataset directory.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct GenDataArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Vertex rows of the lattice.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Vertex columns of the lattice.
    #[arg(long)]
    pub cols: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub vqe: VqeFlags,
    /// Field values per phase.
    #[arg(long)]
    pub samples_per_phase: Option<usize>,
    /// Labelling reference point.
    #[arg(long)]
    pub x_c_ref: Option<f64>,
    /// Gap between the reference point and the first ordered-phase sample.
    #[arg(long)]
    pub ferro_offset: Option<f64>,
}

pub fn gen_data(args: &GenDataArgs) -> CliResult<PathBuf> {
    let cfg: GenDataConfig = merge(args.common.config.as_deref(), args)?;
    let out = args
        .common
        .out_dir(&["data", &lattice_label(cfg.rows, cfg.cols)]);
    execute_gen_data(&cfg, &out)?;
    Ok(out)
}

pub fn execute_gen_data(cfg: &GenDataConfig, out: &Path) -> CliResult<()> {
    let geometry = cfg.geometry()?;
    let dataset_config = cfg.dataset_config()?;
    dataset_config.x_grid()?;
    echo_config(out, "gen-data", cfg)?;
    let ds = generate_dataset_to_disk(&geometry, &dataset_config, out)?;
    let mut summary = Summary::new("gen-data");
    summary
        .add("lattice", geometry.label())
        .add("num_qubits", geometry.num_qubits())
        .add("num_plaquettes", geometry.num_plaquettes())
        .add("samples", ds.len())
        .add(
            "topological_samples",
            ds.labels().iter().filter(|&&l| l < 0).count(),
        )
        .add("x_c_ref", dataset_config.x_c_ref);
    summary.write(out)?;
    println!(
        "generated {} samples for lattice {} ({} qubits)",
        ds.len(),
        geometry.label(),
        geometry.num_qubits()
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateEdConfig {
    /// Compare against a stored dataset; otherwise run fresh VQE on a grid.
    pub dataset: Option<PathBuf>,
    pub rows: usize,
    pub cols: usize,
    /// Equidistant field values over `[0, 1]` in fresh mode.
    pub points: usize,
    /// Use every `stride`-th dataset sample.
    pub stride: usize,
    #[serde(flatten)]
    pub vqe: VqeOptions,
    pub krylov_dim: usize,
    pub tolerance: f64,
    pub max_restarts: usize,
}

impl Default for ValidateEdConfig {
    fn default() -> Self {
        let l = LanczosConfig::default();
        Self {
            dataset: None,
            rows: 0,
            cols: 0,
            points: 21,
            stride: 1,
            vqe: VqeOptions::default(),
            krylov_dim: l.krylov_dim,
            tolerance: l.tolerance,
            max_restarts: l.max_restarts,
        }
    }
}

/// Compare variational energies and magnetizations with exact diagonalization.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ValidateEdArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Dataset directory to validate.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Vertex rows (fresh mode).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Vertex columns (fresh mode).
    #[arg(long)]
    pub cols: Option<usize>,
    /// Grid points over [0, 1] (fresh mode).
    #[arg(long)]
    pub points: Option<usize>,
    /// Validate every n-th dataset sample.
    #[arg(long)]
    pub stride: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub vqe: VqeFlags,
    /// Lanczos Krylov dimension.
    #[arg(long)]
    pub krylov_dim: Option<usize>,
    /// Lanczos residual tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Lanczos restarts before giving up.
    #[arg(long)]
    pub max_restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdRow {
    pub index: usize,
    pub x: f64,
    pub e_vqe_per_qubit: f64,
    pub e_ed_per_qubit: Option<f64>,
    pub delta_e_per_qubit: Option<f64>,
    pub mz_vqe: f64,
    pub mz_ed: Option<f64>,
    pub delta_mz: Option<f64>,
    pub ed_residual: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdValidation {
    pub rows: Vec<EdRow>,
    pub max_delta_e: f64,
    pub max_delta_mz: f64,
    pub failures: usize,
}

pub fn validate_ed(args: &ValidateEdArgs) -> CliResult<PathBuf> {
    let cfg: ValidateEdConfig = merge(args.common.config.as_deref(), args)?;
    let label = match &cfg.dataset {
        Some(path) => path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
        None => lattice_label(cfg.rows, cfg.cols),
    };
    let out = args.common.out_dir(&["validate-ed", &label]);
    execute_validate_ed(&cfg, &out)?;
    Ok(out)
}

struct Point {
    index: usize,
    x: f64,
    energy: f64,
    mz: f64,
}

pub fn execute_validate_ed(cfg: &ValidateEdConfig, out: &Path) -> CliResult<EdValidation> {
    if cfg.stride == 0 {
        return Err(CliError::Usage("stride must be positive".into()));
    }
    let (geometry, points) = match &cfg.dataset {
        Some(path) => {
            let ds = open_dataset(path)?;
            let g = ds.geometry()?;
            let pts = ds
                .samples
                .iter()
                .enumerate()
                .step_by(cfg.stride)
                .map(|(index, s)| Point {
                    index,
                    x: s.x,
                    energy: s.vqe_energy,
                    mz: magnetization_per_qubit(&s.state),
                })
                .collect::<Vec<_>>();
            (g, pts)
        }
        None => {
            let g = lattice(cfg.rows, cfg.cols)?;
            if cfg.points < 2 {
                return Err(CliError::Usage("need at least two grid points".into()));
            }
            let vqe = cfg.vqe.vqe_config()?;
            let pts = (0..cfg.points)
                .into_par_iter()
                .map(|i| {
                    let x = i as f64 / (cfg.points - 1) as f64;
                    let r = vqe_ground_state(&g, x, &vqe)?;
                    Ok(Point {
                        index: i,
                        x,
                        energy: r.energy,
                        mz: magnetization_per_qubit(&r.state),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            (g, pts)
        }
    };
    let lanczos = LanczosConfig {
        krylov_dim: cfg.krylov_dim,
        tolerance: cfg.tolerance,
        max_restarts: cfg.max_restarts,
        seed: cfg.vqe.seed,
    };
    echo_config(out, "validate-ed", cfg)?;

    let n = geometry.num_qubits() as f64;
    let rows: Vec<EdRow> = points
        .par_iter()
        .map(|p| {
            let base = EdRow {
                index: p.index,
                x: p.x,
                e_vqe_per_qubit: p.energy / n,
                e_ed_per_qubit: None,
                delta_e_per_qubit: None,
                mz_vqe: p.mz,
                mz_ed: None,
                delta_mz: None,
                ed_residual: None,
                status: "ok".into(),
            };
            match ground_state_ed(&geometry, p.x, &lanczos) {
                Ok(ed) => {
                    let e = ed.energy / n;
                    let mz = magnetization_per_qubit(&ed.state);
                    EdRow {
                        e_ed_per_qubit: Some(e),
                        delta_e_per_qubit: Some(base.e_vqe_per_qubit - e),
                        mz_ed: Some(mz),
                        delta_mz: Some(base.mz_vqe - mz),
                        ed_residual: Some(ed.residual),
                        ..base
                    }
                }
                Err(e) => EdRow {
                    status: format!("ed failed: {e}"),
                    ..base
                },
            }
        })
        .collect();

    let max_abs =
        |f: fn(&EdRow) -> Option<f64>| rows.iter().filter_map(f).map(f64::abs).fold(0.0, f64::max);
    let result = EdValidation {
        max_delta_e: max_abs(|r| r.delta_e_per_qubit),
        max_delta_mz: max_abs(|r| r.delta_mz),
        failures: rows.iter().filter(|r| r.status != "ok").count(),
        rows,
    };
    write_csv(&out.join("ed_validation.csv"), &result.rows)?;
    let mut summary = Summary::new("validate-ed");
    summary
        .add("lattice", geometry.label())
        .add("points", result.rows.len())
        .add("max_abs_delta_e_per_qubit", result.max_delta_e)
        .add("max_abs_delta_mz", result.max_delta_mz)
        .add("ed_failures", result.failures);
    summary.write(out)?;
    println!(
        "{}: {} points, max |dE/N| = {:.3e}, max |dm_z| = {:.3e}",
        geometry.label(),
        result.rows.len(),
        result.max_delta_e,
        result.max_delta_mz
    );
    if result.failures > 0 {
        return Err(CliError::Numerical(format!(
            "exact diagonalization failed at {} points",
            result.failures
        )));
    }
    Ok(result)
}
