//! Quantum convolutional neural network.
//!
//! Each stage applies a brickwork of two-qubit convolution blocks over its
//! active qubits (pairs `(0,1),(2,3),...` then `(1,2),(3,4),...`), followed by
//! pooling blocks on `(2i, 2i+1)` that keep the second qubit. An unpaired last
//! qubit passes through. All blocks of a stage share one set of 8 convolution
//! angles and one set of 4 pooling angles. Discarded qubits stay in the
//! register untouched, which is equivalent to tracing them out.
//!
//! Gate sequences below are listed in time order.
//!
//! Training evaluates each block as a fused 4x4 unitary. Gradients come from a
//! reverse (adjoint) sweep: per block, the 4x4 cross matrix between the
//! back-propagated cotangent and the block input is accumulated in the same
//! pass that un-applies the block, and every angle derivative is then read off
//! the small matrix.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{bce, step_decay, Adam};
use crate::simulator::StateVector;

pub const CONV_PARAMS: usize = 8;
pub const POOL_PARAMS: usize = 4;
pub const STAGE_PARAMS: usize = CONV_PARAMS + POOL_PARAMS;

const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub active: Vec<usize>,
    pub conv_pairs: Vec<(usize, usize)>,
    /// `(discard, keep)`
    pub pool_pairs: Vec<(usize, usize)>,
    pub passthrough: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcnnArchitecture {
    pub num_qubits: usize,
    pub stages: Vec<Stage>,
}

impl QcnnArchitecture {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("QCNN needs at least two input qubits"));
        }
        let mut stages = Vec::new();
        let mut active: Vec<usize> = (0..n).collect();
        while active.len() > 1 {
            let mut conv_pairs: Vec<(usize, usize)> =
                active.chunks_exact(2).map(|p| (p[0], p[1])).collect();
            conv_pairs.extend(active[1..].chunks_exact(2).map(|p| (p[0], p[1])));
            let pool_pairs: Vec<(usize, usize)> =
                active.chunks_exact(2).map(|p| (p[0], p[1])).collect();
            let passthrough = (active.len() % 2 == 1).then(|| *active.last().unwrap());
            let next: Vec<usize> = pool_pairs
                .iter()
                .map(|&(_, keep)| keep)
                .chain(passthrough)
                .collect();
            stages.push(Stage {
                active: std::mem::replace(&mut active, next),
                conv_pairs,
                pool_pairs,
                passthrough,
            });
        }
        Ok(Self {
            num_qubits: n,
            stages,
        })
    }

    pub fn num_params(&self) -> usize {
        STAGE_PARAMS * self.stages.len()
    }

    /// The qubit measured in Z at the end of the circuit.
    pub fn output_qubit(&self) -> usize {
        let last = self.stages.last().expect("architecture has stages");
        last.pool_pairs
            .last()
            .map(|&(_, keep)| keep)
            .or(last.passthrough)
            .expect("final stage keeps one qubit")
    }

    /// Active-qubit count entering each stage, plus the final 1.
    pub fn active_counts(&self) -> Vec<usize> {
        self.stages
            .iter()
            .map(|s| s.active.len())
            .chain(std::iter::once(1))
            .collect()
    }

    fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        for (k, stage) in self.stages.iter().enumerate() {
            let base = k * STAGE_PARAMS;
            out.extend(stage.conv_pairs.iter().map(|&(a, b)| Block {
                kind: BlockKind::Conv,
                q0: a,
                q1: b,
                offset: base,
            }));
            out.extend(stage.pool_pairs.iter().map(|&(a, b)| Block {
                kind: BlockKind::Pool,
                q0: a,
                q1: b,
                offset: base + CONV_PARAMS,
            }));
        }
        out
    }
}

/// Convolution block on `(q0, q1)`: `Rz(a1) Ry(a2) Rz(a3)` on q0,
/// `Rz(a4) Ry(a5) Rz(a6)` on q1, CNOT(q0->q1), `Ry(a7)` on q1, CNOT(q0->q1),
/// `Ry(a8)` on q1.
pub fn conv_block(state: &mut StateVector, q0: usize, q1: usize, alpha: &[f64; 8]) -> Result<()> {
    if q0 == q1 {
        return Err(Error::invalid(
            "convolution block needs two distinct qubits",
        ));
    }
    state.apply_rz(q0, alpha[0])?;
    state.apply_ry(q0, alpha[1])?;
    state.apply_rz(q0, alpha[2])?;
    state.apply_rz(q1, alpha[3])?;
    state.apply_ry(q1, alpha[4])?;
    state.apply_rz(q1, alpha[5])?;
    state.apply_cnot(q0, q1)?;
    state.apply_ry(q1, alpha[6])?;
    state.apply_cnot(q0, q1)?;
    state.apply_ry(q1, alpha[7])
}

/// Pooling block: `Ry(b1) Rz(b2)` on the discarded qubit, `Ry(b3) Rz(b4)` on
/// the kept qubit, CNOT(discard->keep), then `Rz(-b4) Ry(-b3)` on the kept qubit.
pub fn pool_block(
    state: &mut StateVector,
    discard: usize,
    keep: usize,
    beta: &[f64; 4],
) -> Result<()> {
    if discard == keep {
        return Err(Error::invalid("pooling block needs two distinct qubits"));
    }
    state.apply_ry(discard, beta[0])?;
    state.apply_rz(discard, beta[1])?;
    state.apply_ry(keep, beta[2])?;
    state.apply_rz(keep, beta[3])?;
    state.apply_cnot(discard, keep)?;
    state.apply_rz(keep, -beta[3])?;
    state.apply_ry(keep, -beta[2])
}

/// Gate-by-gate evaluation of the whole network; the reference path.
pub fn apply_qcnn_gates(
    state: &mut StateVector,
    arch: &QcnnArchitecture,
    params: &[f64],
) -> Result<()> {
    check_inputs(state, arch, params)?;
    for (k, stage) in arch.stages.iter().enumerate() {
        let p = &params[k * STAGE_PARAMS..(k + 1) * STAGE_PARAMS];
        let alpha: &[f64; 8] = p[..CONV_PARAMS].try_into().unwrap();
        let beta: &[f64; 4] = p[CONV_PARAMS..].try_into().unwrap();
        for &(a, b) in &stage.conv_pairs {
            conv_block(state, a, b, alpha)?;
        }
        for &(d, keep) in &stage.pool_pairs {
            pool_block(state, d, keep, beta)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Conv,
    Pool,
}

#[derive(Debug, Clone, Copy)]
struct Block {
    kind: BlockKind,
    q0: usize,
    q1: usize,
    offset: usize,
}

/// Gate on a block's local wires: wire 0 is `q0`, wire 1 is `q1`.
#[derive(Debug, Clone, Copy)]
enum LocalGate {
    Ry {
        wire: usize,
        param: usize,
        sign: f64,
    },
    Rz {
        wire: usize,
        param: usize,
        sign: f64,
    },
    Cnot,
}

const CONV_GATES: [LocalGate; 10] = [
    LocalGate::Rz {
        wire: 0,
        param: 0,
        sign: 1.0,
    },
    LocalGate::Ry {
        wire: 0,
        param: 1,
        sign: 1.0,
    },
    LocalGate::Rz {
        wire: 0,
        param: 2,
        sign: 1.0,
    },
    LocalGate::Rz {
        wire: 1,
        param: 3,
        sign: 1.0,
    },
    LocalGate::Ry {
        wire: 1,
        param: 4,
        sign: 1.0,
    },
    LocalGate::Rz {
        wire: 1,
        param: 5,
        sign: 1.0,
    },
    LocalGate::Cnot,
    LocalGate::Ry {
        wire: 1,
        param: 6,
        sign: 1.0,
    },
    LocalGate::Cnot,
    LocalGate::Ry {
        wire: 1,
        param: 7,
        sign: 1.0,
    },
];

const POOL_GATES: [LocalGate; 7] = [
    LocalGate::Ry {
        wire: 0,
        param: 0,
        sign: 1.0,
    },
    LocalGate::Rz {
        wire: 0,
        param: 1,
        sign: 1.0,
    },
    LocalGate::Ry {
        wire: 1,
        param: 2,
        sign: 1.0,
    },
    LocalGate::Rz {
        wire: 1,
        param: 3,
        sign: 1.0,
    },
    LocalGate::Cnot,
    LocalGate::Rz {
        wire: 1,
        param: 3,
        sign: -1.0,
    },
    LocalGate::Ry {
        wire: 1,
        param: 2,
        sign: -1.0,
    },
];

type M4 = Matrix4<Complex64>;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Lifts a 2x2 matrix onto local wire `wire` (local index = b0 + 2 b1).
fn lift(m: [[Complex64; 2]; 2], wire: usize) -> M4 {
    M4::from_fn(|i, j| {
        let (bi, bj) = ((i >> wire) & 1, (j >> wire) & 1);
        let (oi, oj) = ((i >> (1 - wire)) & 1, (j >> (1 - wire)) & 1);
        if oi == oj {
            m[bi][bj]
        } else {
            cx(0.0, 0.0)
        }
    })
}

fn cnot_local() -> M4 {
    // control wire 0, target wire 1: swaps local 1 <-> 3
    let mut m = M4::zeros();
    for (i, j) in [(0, 0), (2, 2), (3, 1), (1, 3)] {
        m[(i, j)] = cx(1.0, 0.0);
    }
    m
}

impl LocalGate {
    fn matrix(&self, angles: &[f64]) -> M4 {
        match *self {
            LocalGate::Ry { wire, param, sign } => {
                lift(crate::simulator::ry(sign * angles[param]), wire)
            }
            LocalGate::Rz { wire, param, sign } => {
                lift(crate::simulator::rz(sign * angles[param]), wire)
            }
            LocalGate::Cnot => cnot_local(),
        }
    }

    /// `d G / d angle` for the gate's own parameter: `sign * (-i/2) P G`.
    fn derivative(&self, angles: &[f64]) -> Option<(usize, M4)> {
        let (param, sign, pauli, wire) = match *self {
            LocalGate::Ry { wire, param, sign } => (
                param,
                sign,
                [[cx(0.0, 0.0), cx(0.0, -1.0)], [cx(0.0, 1.0), cx(0.0, 0.0)]],
                wire,
            ),
            LocalGate::Rz { wire, param, sign } => (
                param,
                sign,
                [[cx(1.0, 0.0), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(-1.0, 0.0)]],
                wire,
            ),
            LocalGate::Cnot => return None,
        };
        let factor = cx(0.0, -0.5 * sign);
        Some((param, lift(pauli, wire) * self.matrix(angles) * factor))
    }
}

fn gates(kind: BlockKind) -> &'static [LocalGate] {
    match kind {
        BlockKind::Conv => &CONV_GATES,
        BlockKind::Pool => &POOL_GATES,
    }
}

fn block_unitary(kind: BlockKind, angles: &[f64]) -> M4 {
    gates(kind)
        .iter()
        .fold(M4::identity(), |acc, g| g.matrix(angles) * acc)
}

/// `dU/d angle_j` for every local parameter of the block.
fn block_derivatives(kind: BlockKind, angles: &[f64]) -> Vec<M4> {
    let seq = gates(kind);
    let mats: Vec<M4> = seq.iter().map(|g| g.matrix(angles)).collect();
    let mut out = vec![M4::zeros(); angles.len()];
    for (k, g) in seq.iter().enumerate() {
        if let Some((param, dg)) = g.derivative(angles) {
            let before = mats[..k].iter().fold(M4::identity(), |acc, m| m * acc);
            let after = mats[k + 1..].iter().fold(M4::identity(), |acc, m| m * acc);
            out[param] += after * dg * before;
        }
    }
    out
}

/// Base indices (bits q0 and q1 clear) of a `dim`-sized register.
fn group_bases(dim: usize, q0: usize, q1: usize) -> impl Iterator<Item = usize> {
    let (lo, hi) = if q0 < q1 { (q0, q1) } else { (q1, q0) };
    (0..dim / 4).map(move |i| {
        let low_mask = (1 << lo) - 1;
        let i = (i & low_mask) | ((i & !low_mask) << 1);
        let mid_mask = (1 << hi) - 1;
        (i & mid_mask) | ((i & !mid_mask) << 1)
    })
}

fn group_indices(base: usize, q0: usize, q1: usize) -> [usize; 4] {
    let (b0, b1) = (1 << q0, 1 << q1);
    [base, base | b0, base | b1, base | b0 | b1]
}

fn rows(u: &M4) -> [[Complex64; 4]; 4] {
    std::array::from_fn(|r| std::array::from_fn(|c| u[(r, c)]))
}

fn mat_vec(u: &[[Complex64; 4]; 4], v: &[Complex64; 4]) -> [Complex64; 4] {
    std::array::from_fn(|r| u[r][0] * v[0] + u[r][1] * v[1] + u[r][2] * v[2] + u[r][3] * v[3])
}

fn apply_block(amps: &mut [Complex64], q0: usize, q1: usize, u: &M4) {
    let u = rows(u);
    for base in group_bases(amps.len(), q0, q1) {
        let idx = group_indices(base, q0, q1);
        let v = mat_vec(
            &u,
            &[amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]],
        );
        for (r, &i) in idx.iter().enumerate() {
            amps[i] = v[r];
        }
    }
}

/// Reverse step through one block: un-applies `u` to `phi` and `lambda`
/// and returns `C[i][j] = sum conj(lambda_i) phi_in_j` over the block wires.
fn reverse_block(
    phi: &mut [Complex64],
    lambda: &mut [Complex64],
    q0: usize,
    q1: usize,
    u: &M4,
) -> M4 {
    let ud = rows(&u.adjoint());
    let mut cross = [[Complex64::new(0.0, 0.0); 4]; 4];
    for base in group_bases(phi.len(), q0, q1) {
        let idx = group_indices(base, q0, q1);
        let l = [
            lambda[idx[0]],
            lambda[idx[1]],
            lambda[idx[2]],
            lambda[idx[3]],
        ];
        let p_in = mat_vec(&ud, &[phi[idx[0]], phi[idx[1]], phi[idx[2]], phi[idx[3]]]);
        let l_in = mat_vec(&ud, &l);
        for r in 0..4 {
            phi[idx[r]] = p_in[r];
            lambda[idx[r]] = l_in[r];
        }
        for (row, li) in cross.iter_mut().zip(l) {
            let li = li.conj();
            for (c, pj) in row.iter_mut().zip(p_in) {
                *c += li * pj;
            }
        }
    }
    M4::from_fn(|i, j| cross[i][j])
}

fn check_inputs(state: &StateVector, arch: &QcnnArchitecture, params: &[f64]) -> Result<()> {
    if state.num_qubits() != arch.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: arch.num_qubits,
            found: state.num_qubits(),
        });
    }
    if params.len() != arch.num_params() {
        return Err(Error::DimensionMismatch {
            expected: arch.num_params(),
            found: params.len(),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("non-finite QCNN parameter".into()));
    }
    Ok(())
}

/// A network with its parameters bound, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledQcnn {
    num_qubits: usize,
    output: usize,
    blocks: Vec<(Block, M4)>,
}

impl CompiledQcnn {
    pub fn new(arch: &QcnnArchitecture, params: &[f64]) -> Result<Self> {
        if params.len() != arch.num_params() {
            return Err(Error::DimensionMismatch {
                expected: arch.num_params(),
                found: params.len(),
            });
        }
        let blocks = arch
            .blocks()
            .into_iter()
            .map(|b| {
                let n = if b.kind == BlockKind::Conv {
                    CONV_PARAMS
                } else {
                    POOL_PARAMS
                };
                (b, block_unitary(b.kind, &params[b.offset..b.offset + n]))
            })
            .collect();
        Ok(Self {
            num_qubits: arch.num_qubits,
            output: arch.output_qubit(),
            blocks,
        })
    }

    /// Runs the network on `state` in place.
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        if state.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: state.num_qubits(),
            });
        }
        let amps = state.amplitudes_mut();
        for (b, u) in &self.blocks {
            apply_block(amps, b.q0, b.q1, u);
        }
        Ok(())
    }

    /// `<Z>` on the output qubit after the network.
    pub fn forward(&self, state: &StateVector) -> Result<f64> {
        let mut s = state.clone();
        self.apply(&mut s)?;
        Ok(z_expectation(s.amplitudes(), self.output))
    }
}

fn z_expectation(amps: &[Complex64], qubit: usize) -> f64 {
    let bit = 1 << qubit;
    amps.iter()
        .enumerate()
        .map(|(i, a)| {
            if i & bit == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum()
}

/// QCNN output `y_out` in `[-1, 1]`.
pub fn qcnn_forward(state: &StateVector, arch: &QcnnArchitecture, params: &[f64]) -> Result<f64> {
    check_inputs(state, arch, params)?;
    CompiledQcnn::new(arch, params)?.forward(state)
}

/// `y_out` and `d y_out / d params` by a reverse sweep.
pub fn qcnn_output_gradient(
    state: &StateVector,
    arch: &QcnnArchitecture,
    params: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_inputs(state, arch, params)?;
    let compiled = CompiledQcnn::new(arch, params)?;
    output_gradient(&compiled, state, params)
}

fn output_gradient(
    compiled: &CompiledQcnn,
    state: &StateVector,
    params: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let mut phi = state.clone();
    compiled.apply(&mut phi)?;
    let phi = phi.amplitudes_mut();
    let y = z_expectation(phi, compiled.output);
    let bit = 1 << compiled.output;
    let mut lambda: Vec<Complex64> = phi
        .iter()
        .enumerate()
        .map(|(i, &a)| if i & bit == 0 { a } else { -a })
        .collect();

    let mut grad = vec![0.0; params.len()];
    for (b, u) in compiled.blocks.iter().rev() {
        let cross = reverse_block(phi, &mut lambda, b.q0, b.q1, u);
        let n = if b.kind == BlockKind::Conv {
            CONV_PARAMS
        } else {
            POOL_PARAMS
        };
        let angles = &params[b.offset..b.offset + n];
        for (j, du) in block_derivatives(b.kind, angles).iter().enumerate() {
            let overlap: Complex64 = du.component_mul(&cross).sum();
            grad[b.offset + j] += 2.0 * overlap.re;
        }
    }
    Ok((y, grad))
}

/// Probability of the ferromagnetic class, `(1 + y) / 2`, clamped.
pub fn output_probability(y_out: f64) -> f64 {
    ((1.0 + y_out) / 2.0).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn check_batch(states: &[&StateVector], targets: &[f64]) -> Result<()> {
    if states.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if states.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            found: targets.len(),
        });
    }
    if targets.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::invalid("targets must be 0 or 1"));
    }
    Ok(())
}

/// Mean binary cross-entropy plus `l2 * ||params||^2 / batch`.
/// Targets are 0 (topological) or 1 (ferromagnetic).
pub fn qcnn_loss(
    states: &[&StateVector],
    targets: &[f64],
    arch: &QcnnArchitecture,
    params: &[f64],
    l2_strength: f64,
) -> Result<f64> {
    check_batch(states, targets)?;
    let compiled = CompiledQcnn::new(arch, params)?;
    let outputs = states
        .par_iter()
        .map(|s| compiled.forward(s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(loss_from_outputs(&outputs, targets, params, l2_strength))
}

fn loss_from_outputs(outputs: &[f64], targets: &[f64], params: &[f64], l2: f64) -> f64 {
    let n = outputs.len() as f64;
    let data: f64 = outputs
        .iter()
        .zip(targets)
        .map(|(&y, &t)| bce(output_probability(y), t))
        .sum();
    let norm2: f64 = params.iter().map(|p| p * p).sum();
    (data + l2 * norm2) / n
}

/// Loss and its exact gradient with respect to all shared parameters.
pub fn qcnn_gradient(
    states: &[&StateVector],
    targets: &[f64],
    arch: &QcnnArchitecture,
    params: &[f64],
    l2_strength: f64,
) -> Result<(f64, Vec<f64>)> {
    check_batch(states, targets)?;
    for s in states {
        check_inputs(s, arch, params)?;
    }
    let compiled = CompiledQcnn::new(arch, params)?;
    let per_sample = states
        .par_iter()
        .map(|s| output_gradient(&compiled, s, params))
        .collect::<Result<Vec<_>>>()?;

    let n = states.len() as f64;
    let outputs: Vec<f64> = per_sample.iter().map(|(y, _)| *y).collect();
    let loss = loss_from_outputs(&outputs, targets, params, l2_strength);
    let mut grad: Vec<f64> = params.iter().map(|p| 2.0 * l2_strength * p / n).collect();
    for ((y, dy), &t) in per_sample.iter().zip(targets) {
        let raw = (1.0 + y) / 2.0;
        if raw <= PROB_CLAMP || raw >= 1.0 - PROB_CLAMP {
            continue;
        }
        // d bce / d y = d bce / d p * 1/2
        let dl_dy = -(t / raw - (1.0 - t) / (1.0 - raw)) * 0.5 / n;
        for (g, d) in grad.iter_mut().zip(dy) {
            *g += dl_dy * d;
        }
    }
    Ok((loss, grad))
}

/// `-1` (topological) when `y_out <= 0`, else `+1`.
pub fn predict_phase(y_out: f64) -> i8 {
    if y_out <= 0.0 {
        -1
    } else {
        1
    }
}

/// Maps a phase label to the loss target: -1 -> 0, +1 -> 1.
pub fn phase_target(label: i8) -> f64 {
    if label > 0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_strength: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    /// Stop once successive epoch-mean losses differ by less than this.
    pub convergence_delta: f64,
    /// Epochs always run before the convergence test applies.
    pub min_epochs: usize,
    /// Consecutive epochs under `convergence_delta` needed to stop.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 24,
            learning_rate: 0.01,
            l2_strength: 1e-4,
            lr_decay_factor: 0.5,
            lr_decay_every: 30,
            convergence_delta: 1e-3,
            min_epochs: 10,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) || self.l2_strength < 0.0 || !(self.lr_decay_factor > 0.0) {
            return Err(Error::invalid(
                "learning rate, decay and L2 strength out of range",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Vec<f64>,
    /// Mean batch loss per epoch.
    pub loss_history: Vec<f64>,
    pub converged: bool,
}

/// Seeded initial parameters, uniform in `[-pi, pi)`.
pub fn initial_params(arch: &QcnnArchitecture, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5143_4e4e);
    (0..arch.num_params())
        .map(|_| rng.gen_range(-PI..PI))
        .collect()
}

/// Minibatch Adam with step-decayed learning rate and early stopping.
pub fn train_qcnn(
    states: &[&StateVector],
    labels: &[i8],
    arch: &QcnnArchitecture,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if states.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if states.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            found: labels.len(),
        });
    }
    let targets: Vec<f64> = labels.iter().map(|&l| phase_target(l)).collect();
    let mut params = initial_params(arch, config.seed);
    let mut adam = Adam::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..states.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut converged = false;
    let mut calm = 0;

    for epoch in 0..config.epochs {
        let lr = step_decay(
            config.learning_rate,
            config.lr_decay_factor,
            config.lr_decay_every,
            epoch,
        );
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&StateVector> = chunk.iter().map(|&i| states[i]).collect();
            let t: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grad) = qcnn_gradient(&batch, &t, arch, &params, config.l2_strength)?;
            adam.step(&mut params, &grad, lr);
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical("training loss diverged".into()));
        }
        let previous = history.last().copied();
        history.push(mean);
        calm = match previous {
            Some(prev) if (prev - mean).abs() < config.convergence_delta => calm + 1,
            _ => 0,
        };
        if epoch + 1 >= config.min_epochs && calm >= config.patience.max(1) {
            converged = true;
            break;
        }
    }
    Ok(TrainOutcome {
        params,
        loss_history: history,
        converged,
    })
}

/// Outputs for many states under fixed parameters.
pub fn qcnn_outputs(
    states: &[&StateVector],
    arch: &QcnnArchitecture,
    params: &[f64],
) -> Result<Vec<f64>> {
    let compiled = CompiledQcnn::new(arch, params)?;
    states.par_iter().map(|s| compiled.forward(s)).collect()
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk trained model: architecture descriptor plus the flat parameter
/// vector in stage order (`a1..a8, b1..b4` per stage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcnnModelFile {
    pub format_version: u32,
    pub input_qubits: usize,
    pub stages: Vec<Stage>,
    #[serde(serialize_with = "serialize_17_digits")]
    pub params: Vec<f64>,
}

fn serialize_17_digits<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::{Error as _, SerializeSeq};
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        let raw = serde_json::value::RawValue::from_string(format!("{x:.16e}"))
            .map_err(S::Error::custom)?;
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

impl QcnnModelFile {
    pub fn new(arch: &QcnnArchitecture, params: &[f64]) -> Result<Self> {
        if params.len() != arch.num_params() {
            return Err(Error::DimensionMismatch {
                expected: arch.num_params(),
                found: params.len(),
            });
        }
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            input_qubits: arch.num_qubits,
            stages: arch.stages.clone(),
            params: params.to_vec(),
        })
    }

    pub fn architecture(&self) -> QcnnArchitecture {
        QcnnArchitecture {
            num_qubits: self.input_qubits,
            stages: self.stages.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: model.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let rebuilt = QcnnArchitecture::new(model.input_qubits)?;
        if rebuilt.stages != model.stages || model.params.len() != rebuilt.num_params() {
            return Err(Error::Format("model architecture is inconsistent".into()));
        }
        Ok(model)
    }
}
