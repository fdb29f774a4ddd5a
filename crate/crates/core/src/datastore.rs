//! Labelled ground-state datasets: generation, splits, and on-disk layout.
//!
//! A dataset directory holds `manifest.json` and one binary state file per
//! sample under `states/<index>.lgsv`. Each state file's FNV-1a 64 checksum is
//! recorded in the manifest. Generation writes an `INCOMPLETE` marker first and
//! removes it only after the manifest is in place.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::plgc::{vqe_ground_state, PlgcParams, VqeConfig};
use crate::simulator::StateVector;

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATES_DIR: &str = "states";
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub vqe: VqeConfig,
    /// Reference transition point used for labelling.
    pub x_c_ref: f64,
    pub samples_per_phase: usize,
    /// The ordered half starts at `x_c_ref + ferro_offset`.
    pub ferro_offset: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            vqe: VqeConfig::default(),
            x_c_ref: 0.25,
            samples_per_phase: 150,
            ferro_offset: 0.01,
        }
    }
}

impl DatasetConfig {
    fn validate(&self) -> Result<()> {
        if self.samples_per_phase < 2 {
            return Err(Error::invalid("need at least two samples per phase"));
        }
        let start = self.x_c_ref + self.ferro_offset;
        if !(self.x_c_ref > 0.0 && self.ferro_offset > 0.0 && start < 1.0) {
            return Err(Error::invalid(format!(
                "reference point {} with offset {} leaves no ordered interval",
                self.x_c_ref, self.ferro_offset
            )));
        }
        Ok(())
    }

    /// Equidistant grid over `[0, x_c_ref]` followed by one over
    /// `[x_c_ref + ferro_offset, 1]`, both endpoints included.
    pub fn x_grid(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let m = self.samples_per_phase;
        let step = (m - 1) as f64;
        let start = self.x_c_ref + self.ferro_offset;
        let topo = (0..m).map(|i| self.x_c_ref * i as f64 / step);
        let ferro = (0..m).map(|i| {
            if i == m - 1 {
                1.0
            } else {
                start + (1.0 - start) * i as f64 / step
            }
        });
        Ok(topo.chain(ferro).collect())
    }

    pub fn label(&self, x: f64) -> i8 {
        if x <= self.x_c_ref {
            -1
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSample {
    pub x: f64,
    pub label: i8,
    pub thetas: PlgcParams,
    pub vqe_energy: f64,
    pub state: StateVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDataset {
    pub rows: usize,
    pub cols: usize,
    pub config: DatasetConfig,
    pub samples: Vec<PhaseSample>,
}

/// Manifest entry for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub x: f64,
    pub label: i8,
    pub thetas: PlgcParams,
    pub vqe_energy: f64,
    /// Relative to the dataset root.
    pub state_path: String,
    /// FNV-1a 64 of the state file, 16 lowercase hex digits.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub rows: usize,
    pub cols: usize,
    pub num_qubits: usize,
    pub x_c_ref: f64,
    pub config: DatasetConfig,
    pub samples: Vec<SampleRecord>,
}

impl PhaseDataset {
    pub fn geometry(&self) -> Result<LatticeGeometry> {
        LatticeGeometry::new(self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn labels(&self) -> Vec<i8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn states(&self) -> Vec<&StateVector> {
        self.samples.iter().map(|s| &s.state).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<&PhaseSample> {
        indices.iter().map(|&i| &self.samples[i]).collect()
    }
}

fn state_rel_path(index: usize) -> String {
    format!("{STATES_DIR}/{index}.lgsv")
}

fn run_sample(geometry: &LatticeGeometry, config: &DatasetConfig, x: f64) -> Result<PhaseSample> {
    let r = vqe_ground_state(geometry, x, &config.vqe)?;
    Ok(PhaseSample {
        x,
        label: config.label(x),
        thetas: r.params,
        vqe_energy: r.energy,
        state: r.state,
    })
}

/// Runs the VQE at every grid point, in memory.
pub fn generate_dataset(
    geometry: &LatticeGeometry,
    config: &DatasetConfig,
) -> Result<PhaseDataset> {
    let xs = config.x_grid()?;
    let samples = xs
        .par_iter()
        .map(|&x| run_sample(geometry, config, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDataset {
        rows: geometry.rows(),
        cols: geometry.cols(),
        config: *config,
        samples,
    })
}

fn write_state(root: &Path, index: usize, state: &StateVector) -> Result<SampleRecordPart> {
    let rel = state_rel_path(index);
    let bytes = state.to_bytes();
    fs::write(root.join(&rel), &bytes)?;
    Ok(SampleRecordPart {
        state_path: rel,
        checksum: format!("{:016x}", fnv1a64(&bytes)),
    })
}

struct SampleRecordPart {
    state_path: String,
    checksum: String,
}

fn record(index: usize, s: &PhaseSample, part: SampleRecordPart) -> SampleRecord {
    SampleRecord {
        index,
        x: s.x,
        label: s.label,
        thetas: s.thetas.clone(),
        vqe_energy: s.vqe_energy,
        state_path: part.state_path,
        checksum: part.checksum,
    }
}

fn manifest_for(dataset: &PhaseDataset, records: Vec<SampleRecord>) -> Result<Manifest> {
    Ok(Manifest {
        format_version: DATASET_FORMAT_VERSION,
        rows: dataset.rows,
        cols: dataset.cols,
        num_qubits: dataset.geometry()?.num_qubits(),
        x_c_ref: dataset.config.x_c_ref,
        config: dataset.config,
        samples: records,
    })
}

fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(root.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

/// Generates the dataset while writing each state file as soon as it is
/// ready. On failure the `INCOMPLETE` marker is left in `root`.
pub fn generate_dataset_to_disk(
    geometry: &LatticeGeometry,
    config: &DatasetConfig,
    root: &Path,
) -> Result<PhaseDataset> {
    let xs = config.x_grid()?;
    fs::create_dir_all(root.join(STATES_DIR))?;
    let marker = root.join(INCOMPLETE_MARKER);
    fs::write(&marker, "generation in progress\n")?;
    let _ = fs::remove_file(root.join(MANIFEST_FILE));

    let generated = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let s = run_sample(geometry, config, x)?;
            let part = write_state(root, i, &s.state)?;
            Ok((s, part))
        })
        .collect::<Result<Vec<_>>>();
    let generated = match generated {
        Ok(g) => g,
        Err(e) => {
            fs::write(&marker, format!("generation failed: {e}\n"))?;
            return Err(e);
        }
    };
    let mut samples = Vec::with_capacity(generated.len());
    let mut records = Vec::with_capacity(generated.len());
    for (i, (s, part)) in generated.into_iter().enumerate() {
        records.push(record(i, &s, part));
        samples.push(s);
    }
    let dataset = PhaseDataset {
        rows: geometry.rows(),
        cols: geometry.cols(),
        config: *config,
        samples,
    };
    write_manifest(root, &manifest_for(&dataset, records)?)?;
    fs::remove_file(&marker)?;
    Ok(dataset)
}

pub fn save_dataset(dataset: &PhaseDataset, root: &Path) -> Result<()> {
    fs::create_dir_all(root.join(STATES_DIR))?;
    let marker = root.join(INCOMPLETE_MARKER);
    fs::write(&marker, "write in progress\n")?;
    let records = dataset
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| Ok(record(i, s, write_state(root, i, &s.state)?)))
        .collect::<Result<Vec<_>>>()?;
    write_manifest(root, &manifest_for(dataset, records)?)?;
    fs::remove_file(&marker)?;
    Ok(())
}

pub fn load_manifest(root: &Path) -> Result<Manifest> {
    if root.join(INCOMPLETE_MARKER).exists() {
        return Err(Error::Format(format!(
            "{} holds an incomplete dataset",
            root.display()
        )));
    }
    let text = fs::read_to_string(root.join(MANIFEST_FILE))?;
    let version: VersionProbe = serde_json::from_str(&text)?;
    if version.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Version {
            found: version.format_version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    Ok(serde_json::from_str(&text)?)
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn load_dataset(root: &Path) -> Result<PhaseDataset> {
    let manifest = load_manifest(root)?;
    let geometry = LatticeGeometry::new(manifest.rows, manifest.cols)?;
    if geometry.num_qubits() != manifest.num_qubits {
        return Err(Error::Format("qubit count disagrees with lattice".into()));
    }
    let config = DatasetConfig {
        x_c_ref: manifest.x_c_ref,
        ..manifest.config
    };
    let samples = manifest
        .samples
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.index != i {
                return Err(Error::Format(format!(
                    "sample {i} recorded as index {}",
                    r.index
                )));
            }
            if r.label != config.label(r.x) {
                return Err(Error::Format(format!("sample {i} label disagrees with x")));
            }
            if r.thetas.len() != geometry.num_plaquettes() {
                return Err(Error::Format(format!("sample {i} has wrong angle count")));
            }
            let path: PathBuf = root.join(&r.state_path);
            let bytes = fs::read(&path)?;
            let expected = u64::from_str_radix(&r.checksum, 16)
                .map_err(|_| Error::Format(format!("bad checksum field {:?}", r.checksum)))?;
            let found = fnv1a64(&bytes);
            if found != expected {
                return Err(Error::Checksum {
                    path,
                    expected,
                    found,
                });
            }
            let state = StateVector::from_bytes(&bytes)?;
            if state.num_qubits() != geometry.num_qubits() {
                return Err(Error::DimensionMismatch {
                    expected: geometry.num_qubits(),
                    found: state.num_qubits(),
                });
            }
            Ok(PhaseSample {
                x: r.x,
                label: r.label,
                thetas: r.thetas.clone(),
                vqe_energy: r.vqe_energy,
                state,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDataset {
        rows: manifest.rows,
        cols: manifest.cols,
        config,
        samples,
    })
}

/// Train/test sample indices, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n`; at least one sample lands on each side.
pub fn split_random(n: usize, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two samples to split"));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Samples with `lo <= x <= hi` form the test set.
pub fn split_physics_aware(xs: &[f64], lo: f64, hi: f64) -> Result<Split> {
    if !(lo < hi) {
        return Err(Error::invalid("test window needs lo < hi"));
    }
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..xs.len()).partition(|&i| lo <= xs[i] && xs[i] <= hi);
    if train.is_empty() {
        return Err(Error::invalid("test window leaves no training samples"));
    }
    if test.is_empty() {
        return Err(Error::invalid("test window contains no samples"));
    }
    Ok(Split { train, test })
}
