//! `flip`, `fss`, and `report`.

use std::path::{Path, PathBuf};

use clap::Args;
use loopgas::analysis::{fit_finite_size, flip_interval, FitWeighting, ScalingFit, ScalingPoint};
use loopgas::{Error, FlipIntervalEstimate};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::CommonArgs;
use crate::config::{echo_config, merge, output_root};
use crate::error::{CliError, CliResult};
use crate::output::{write_csv, Summary, Table, SUMMARY_FILE};

fn require_input(input: &Option<PathBuf>) -> CliResult<&Path> {
    input
        .as_deref()
        .ok_or_else(|| CliError::Usage("an input CSV is required (--input)".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlipConfig {
    pub input: Option<PathBuf>,
    pub x_column: String,
    /// Positive values count as +1, everything else as -1.
    pub label_column: String,
}

impl Default for FlipConfig {
    fn default() -> Self {
        Self {
            input: None,
            x_column: "x".into(),
            label_column: "predicted".into(),
        }
    }
}

/// Flip-interval estimate from a CSV of x values and labels or outputs.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct FlipArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// CSV with an x column and a label or output column.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Name of the x column.
    #[arg(long)]
    pub x_column: Option<String>,
    /// Name of the label column; positive values map to +1.
    #[arg(long)]
    pub label_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FlipRow {
    samples: usize,
    x_lo: f64,
    x_hi: f64,
    center: f64,
    half_width: f64,
}

pub fn flip(args: &FlipArgs) -> CliResult<PathBuf> {
    let cfg: FlipConfig = merge(args.common.config.as_deref(), args)?;
    let out = args.common.out_dir(&["flip"]);
    execute_flip(&cfg, &out)?;
    Ok(out)
}

pub fn execute_flip(cfg: &FlipConfig, out: &Path) -> CliResult<FlipIntervalEstimate> {
    let table = Table::read(require_input(&cfg.input)?)?;
    let xc = table.column(&cfg.x_column)?;
    let lc = table.column(&cfg.label_column)?;
    let mut pairs = (0..table.rows.len())
        .map(|r| Ok((table.f64_at(r, xc)?, table.f64_at(r, lc)?)))
        .collect::<CliResult<Vec<(f64, f64)>>>()?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let labels: Vec<i8> = pairs
        .iter()
        .map(|p| if p.1 > 0.0 { 1 } else { -1 })
        .collect();
    echo_config(out, "flip", cfg)?;
    let est = flip_interval(&xs, &labels).map_err(|e| match e {
        Error::InvalidArgument(m) => CliError::Data(m),
        other => other.into(),
    })?;
    write_csv(
        &out.join("flip.csv"),
        &[FlipRow {
            samples: xs.len(),
            x_lo: est.x_lo,
            x_hi: est.x_hi,
            center: est.center,
            half_width: est.half_width,
        }],
    )?;
    let mut summary = Summary::new("flip");
    summary
        .add("samples", xs.len())
        .add("flip_center", est.center)
        .add("flip_half_width", est.half_width);
    summary.write(out)?;
    println!("flip at {:.6} +/- {:.6}", est.center, est.half_width);
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FssConfig {
    pub input: Option<PathBuf>,
    pub weighted: bool,
    pub center_column: String,
    pub uncertainty_column: String,
}

impl Default for FssConfig {
    fn default() -> Self {
        Self {
            input: None,
            weighted: false,
            center_column: "center".into(),
            uncertainty_column: "uncertainty".into(),
        }
    }
}

/// Finite-size extrapolation of transition estimates against 1/sqrt(plaquettes).
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct FssArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// CSV with a `plaquettes` (or `lattice`, as RxC) column and estimates.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Weight points by inverse squared uncertainty.
    #[arg(long)]
    pub weighted: Option<bool>,
    /// Name of the estimate column.
    #[arg(long)]
    pub center_column: Option<String>,
    /// Name of the optional uncertainty column.
    #[arg(long)]
    pub uncertainty_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FitRow {
    intercept: f64,
    slope: f64,
    intercept_stderr: f64,
    slope_stderr: f64,
    weighting: FitWeighting,
    points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PointRow {
    plaquettes: usize,
    inv_l_eff: f64,
    center: f64,
    uncertainty: f64,
    fitted: f64,
    residual: f64,
}

fn plaquettes_from_label(label: &str) -> Option<usize> {
    let (r, c) = label.trim().split_once(['x', 'X'])?;
    let r: usize = r.parse().ok()?;
    let c: usize = c.parse().ok()?;
    Some(r.checked_sub(1)? * c.checked_sub(1)?)
}

pub fn fss(args: &FssArgs) -> CliResult<PathBuf> {
    let cfg: FssConfig = merge(args.common.config.as_deref(), args)?;
    let out = args.common.out_dir(&["fss"]);
    execute_fss(&cfg, &out)?;
    Ok(out)
}

pub fn execute_fss(cfg: &FssConfig, out: &Path) -> CliResult<ScalingFit> {
    let table = Table::read(require_input(&cfg.input)?)?;
    let cc = table.column(&cfg.center_column)?;
    let uc = table.optional_column(&cfg.uncertainty_column);
    let pc = table.optional_column("plaquettes");
    let lc = table.optional_column("lattice");
    let points = (0..table.rows.len())
        .map(|r| {
            let plaquettes = match (pc, lc) {
                (Some(c), _) => table.f64_at(r, c)? as usize,
                (None, Some(c)) => plaquettes_from_label(&table.rows[r][c])
                    .ok_or_else(|| CliError::Data(format!("row {}: bad lattice label", r + 1)))?,
                (None, None) => {
                    return Err(CliError::Data("need a plaquettes or lattice column".into()))
                }
            };
            Ok(ScalingPoint {
                plaquettes,
                estimate: table.f64_at(r, cc)?,
                uncertainty: uc.map(|c| table.f64_at(r, c)).transpose()?.unwrap_or(0.0),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let weighting = if cfg.weighted {
        FitWeighting::InverseVariance
    } else {
        FitWeighting::Unweighted
    };
    echo_config(out, "fss", cfg)?;
    let fit = fit_finite_size(&points, weighting)?;
    write_csv(
        &out.join("fss.csv"),
        &[FitRow {
            intercept: fit.intercept,
            slope: fit.slope,
            intercept_stderr: fit.intercept_stderr,
            slope_stderr: fit.slope_stderr,
            weighting,
            points: points.len(),
        }],
    )?;
    let rows: Vec<PointRow> = points
        .iter()
        .zip(&fit.points)
        .map(|(p, &(inv, c, u))| PointRow {
            plaquettes: p.plaquettes,
            inv_l_eff: inv,
            center: c,
            uncertainty: u,
            fitted: fit.predict(p.plaquettes),
            residual: c - fit.predict(p.plaquettes),
        })
        .collect();
    write_csv(&out.join("fss_points.csv"), &rows)?;
    let mut summary = Summary::new("fss");
    summary
        .add("points", points.len())
        .add("intercept", fit.intercept)
        .add("intercept_stderr", fit.intercept_stderr)
        .add("slope", fit.slope);
    summary.write(out)?;
    println!(
        "x_c(inf) = {:.4} +/- {:.4}, slope {:.4}",
        fit.intercept, fit.intercept_stderr, fit.slope
    );
    Ok(fit)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    /// Directory tree to scan [default: $LOOPGAS_OUT].
    pub root: Option<PathBuf>,
}

/// Collect every command summary under a directory into one table.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: CommonArgs,
    /// Directory tree to scan.
    #[arg(long)]
    pub root: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub source: String,
    pub key: String,
    pub value: String,
}

pub fn report(args: &ReportArgs) -> CliResult<PathBuf> {
    let cfg: ReportConfig = merge(args.common.config.as_deref(), args)?;
    let root = cfg.root.clone().unwrap_or_else(output_root);
    let out = args
        .common
        .out
        .clone()
        .unwrap_or_else(|| root.join("report"));
    execute_report(&cfg, &root, &out)?;
    Ok(out)
}

pub fn execute_report(cfg: &ReportConfig, root: &Path, out: &Path) -> CliResult<Vec<ReportRow>> {
    if !root.is_dir() {
        return Err(CliError::Data(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let mut rows = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Data(e.to_string()))?;
        if entry.file_name() != SUMMARY_FILE || entry.path().starts_with(out) {
            continue;
        }
        let dir = entry.path().parent().expect("file has a parent");
        let source = dir
            .strip_prefix(root)
            .unwrap_or(dir)
            .to_string_lossy()
            .replace('\\', "/");
        let table = Table::read(entry.path())?;
        let (kc, vc) = (table.column("key")?, table.column("value")?);
        for r in &table.rows {
            rows.push(ReportRow {
                source: source.clone(),
                key: r[kc].to_string(),
                value: r[vc].to_string(),
            });
        }
    }
    echo_config(out, "report", cfg)?;
    write_csv(&out.join("report.csv"), &rows)?;
    println!("collected {} summary entries", rows.len());
    Ok(rows)
}
