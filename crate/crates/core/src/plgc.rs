//! Parametrized loop-gas states and their variational optimization.
//!
//! The loop-gas state is `prod_p [cos(t_p/2) + sin(t_p/2) B_p] |0...0>`.
//! Because plaquette boundaries are independent on a disk, this state is a
//! product state over "plaquette qubits", which gives the closed-form energy
//! used by [`LoopGasEnergy`] during optimization.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::model::ToricHamiltonian;
use crate::simulator::StateVector;

/// One rotation angle per plaquette, in raster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlgcParams(pub Vec<f64>);

impl PlgcParams {
    pub fn uniform(num_plaquettes: usize, theta: f64) -> Self {
        Self(vec![theta; num_plaquettes])
    }

    pub fn thetas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Angles reduced to `[0, 2pi)`.
    pub fn canonical(&self) -> Self {
        Self(self.0.iter().map(|t| t.rem_euclid(TAU)).collect())
    }
}

fn check_params(geometry: &LatticeGeometry, params: &PlgcParams) -> Result<()> {
    if params.len() != geometry.num_plaquettes() {
        return Err(Error::DimensionMismatch {
            expected: geometry.num_plaquettes(),
            found: params.len(),
        });
    }
    if params.0.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("loop-gas angles must be finite"));
    }
    Ok(())
}

/// Prepares the loop-gas state by applying `cos(t/2) + sin(t/2) B_p` for
/// every plaquette in raster order.
pub fn prepare_plgc(geometry: &LatticeGeometry, params: &PlgcParams) -> Result<StateVector> {
    check_params(geometry, params)?;
    let mut state = StateVector::zero_state(geometry.num_qubits())?;
    let mut scratch = state.amplitudes().to_vec();
    for (p, &theta) in params.0.iter().enumerate() {
        let mask = geometry.plaquette_mask(p);
        let (s, c) = (theta / 2.0).sin_cos();
        let amps = state.amplitudes_mut();
        for (b, out) in scratch.iter_mut().enumerate() {
            *out = amps[b] * c + amps[b ^ mask] * s;
        }
        amps.copy_from_slice(&scratch);
    }
    Ok(state)
}

/// Gate-level preparation: for each plaquette an `Ry` on a root edge not
/// touched by earlier plaquettes, then CNOTs from the root to the other three
/// edges. Equivalent to [`prepare_plgc`].
pub fn prepare_plgc_circuit(
    geometry: &LatticeGeometry,
    params: &PlgcParams,
) -> Result<StateVector> {
    check_params(geometry, params)?;
    let mut state = StateVector::zero_state(geometry.num_qubits())?;
    let mut touched = vec![false; geometry.num_qubits()];
    for (face, &theta) in geometry.plaquettes().iter().zip(&params.0) {
        let root = *face
            .iter()
            .find(|&&e| !touched[e])
            .ok_or_else(|| Error::invalid("no untouched root edge for plaquette"))?;
        state.apply_ry(root, theta)?;
        for &e in face.iter().filter(|&&e| e != root) {
            state.apply_cnot(root, e)?;
        }
        face.iter().for_each(|&e| touched[e] = true);
    }
    Ok(state)
}

/// Closed-form `E(theta; x)` for loop-gas states:
/// `-(1-x) (S + sum_p sin t_p) - x sum_i prod_{p contains i} cos t_p`.
#[derive(Debug, Clone)]
pub struct LoopGasEnergy {
    x: f64,
    num_stars: usize,
    edge_plaquettes: Vec<Vec<usize>>,
}

impl LoopGasEnergy {
    pub fn new(geometry: &LatticeGeometry, x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!(
                "field parameter {x} outside [0, 1]"
            )));
        }
        Ok(Self {
            x,
            num_stars: geometry.num_stars(),
            edge_plaquettes: geometry.edge_plaquettes(),
        })
    }

    pub fn energy(&self, thetas: &[f64]) -> f64 {
        let stabilizers = self.num_stars as f64 + thetas.iter().map(|t| t.sin()).sum::<f64>();
        let field: f64 = self
            .edge_plaquettes
            .iter()
            .map(|ps| ps.iter().map(|&p| thetas[p].cos()).product::<f64>())
            .sum();
        -(1.0 - self.x) * stabilizers - self.x * field
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub iterations: usize,
    /// Step gain `a` in `a_k = a / (k+1)^lr_exponent`.
    pub learning_rate: f64,
    /// Perturbation `c` in `c_k = c / (k+1)^perturbation_exponent`.
    pub perturbation_scale: f64,
    pub lr_exponent: f64,
    pub perturbation_exponent: f64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.01,
            perturbation_scale: 0.1,
            lr_exponent: 0.0,
            perturbation_exponent: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpsaOutcome {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    /// Objective value at every iterate, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Minimizes `objective` with simultaneous-perturbation gradient estimates,
/// starting at `initial`. Returns the best iterate seen.
pub fn spsa_minimize<F, R>(
    mut objective: F,
    initial: Vec<f64>,
    config: &SpsaConfig,
    rng: &mut R,
) -> Result<SpsaOutcome>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if initial.is_empty() {
        return Err(Error::invalid("SPSA needs at least one parameter"));
    }
    if config.iterations == 0 || config.learning_rate <= 0.0 || config.perturbation_scale <= 0.0 {
        return Err(Error::invalid("SPSA iterations and gains must be positive"));
    }
    let mut eval = |p: &[f64]| -> Result<f64> {
        let v = objective(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!("objective returned {v}")))
        }
    };

    let dim = initial.len();
    let mut params = initial;
    let mut value = eval(&params)?;
    let mut best_params = params.clone();
    let mut best_value = value;
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(value);

    let mut delta = vec![0.0; dim];
    let mut probe = vec![0.0; dim];
    for k in 0..config.iterations {
        let step = (k + 1) as f64;
        let a_k = config.learning_rate / step.powf(config.lr_exponent);
        let c_k = config.perturbation_scale / step.powf(config.perturbation_exponent);
        for d in delta.iter_mut() {
            *d = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        for ((q, p), d) in probe.iter_mut().zip(&params).zip(&delta) {
            *q = p + c_k * d;
        }
        let plus = eval(&probe)?;
        for ((q, p), d) in probe.iter_mut().zip(&params).zip(&delta) {
            *q = p - c_k * d;
        }
        let minus = eval(&probe)?;
        let scale = (plus - minus) / (2.0 * c_k);
        for (p, d) in params.iter_mut().zip(&delta) {
            // Rademacher entries are their own inverse
            *p -= a_k * scale * d;
        }
        value = eval(&params)?;
        trace.push(value);
        if value < best_value {
            best_value = value;
            best_params.copy_from_slice(&params);
        }
    }
    Ok(SpsaOutcome {
        best_params,
        best_value,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqeConfig {
    pub trials: usize,
    pub spsa: SpsaConfig,
    pub seed: u64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            spsa: SpsaConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VqeResult {
    /// Best angles, reduced to `[0, 2pi)`.
    pub params: PlgcParams,
    /// `<psi|H(x)|psi>` of `state`, evaluated on the full register.
    pub energy: f64,
    pub state: StateVector,
    /// Best objective value reached by each trial, in trial order.
    pub trial_energies: Vec<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-(lattice, x, trial) RNG seed.
pub fn trial_seed(seed: u64, geometry: &LatticeGeometry, x: f64, trial: usize) -> u64 {
    [
        geometry.rows() as u64,
        geometry.cols() as u64,
        x.to_bits(),
        trial as u64,
    ]
    .iter()
    .fold(splitmix64(seed), |h, &v| splitmix64(h ^ v))
}

/// Runs `config.trials` independent SPSA trials from uniform random angles
/// and keeps the lowest-energy result.
pub fn vqe_ground_state(
    geometry: &LatticeGeometry,
    x: f64,
    config: &VqeConfig,
) -> Result<VqeResult> {
    let objective = LoopGasEnergy::new(geometry, x)?;
    if config.trials == 0 {
        return Err(Error::invalid("VQE needs at least one trial"));
    }
    let dim = geometry.num_plaquettes();
    if dim == 0 {
        return Err(Error::invalid("lattice has no plaquettes to optimize"));
    }

    let outcomes: Vec<Result<SpsaOutcome>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, geometry, x, trial));
            let initial = (0..dim).map(|_| rng.gen_range(0.0..TAU)).collect();
            spsa_minimize(|t| objective.energy(t), initial, &config.spsa, &mut rng)
        })
        .collect();

    let mut best: Option<SpsaOutcome> = None;
    let mut trial_energies = Vec::with_capacity(outcomes.len());
    let mut last_err = None;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                trial_energies.push(o.best_value);
                if best.as_ref().is_none_or(|b| o.best_value < b.best_value) {
                    best = Some(o);
                }
            }
            Err(e) => {
                trial_energies.push(f64::NAN);
                last_err = Some(e);
            }
        }
    }
    let best = best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Numerical("every VQE trial failed".into()))
    })?;

    let params = PlgcParams(best.best_params).canonical();
    let state = prepare_plgc(geometry, &params)?;
    let energy = ToricHamiltonian::new(geometry, x)?.energy(&state)?;
    Ok(VqeResult {
        params,
        energy,
        state,
        trial_energies,
    })
}
