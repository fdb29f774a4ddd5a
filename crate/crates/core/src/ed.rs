//! Exact ground states via matrix-free Lanczos.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::model::ToricHamiltonian;
use crate::simulator::{inner, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosConfig {
    pub krylov_dim: usize,
    /// Required residual norm `||H psi - E psi||`.
    pub tolerance: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            krylov_dim: 80,
            tolerance: 1e-8,
            max_restarts: 30,
            seed: 0,
        }
    }
}

/// A Pauli sum compiled for repeated matrix-vector products: diagonal terms
/// are folded into one vector, off-diagonal terms keep their flip masks.
#[derive(Debug, Clone)]
pub struct CompiledHamiltonian {
    diagonal: Vec<f64>,
    off_diagonal: Vec<OffDiagonalTerm>,
}

#[derive(Debug, Clone)]
struct OffDiagonalTerm {
    flip: usize,
    sign: usize,
    /// `coeff * i^{#Y}`
    weight: Complex64,
}

impl CompiledHamiltonian {
    pub fn new(hamiltonian: &ToricHamiltonian) -> Result<Self> {
        let n = hamiltonian.num_qubits();
        let mut diagonal = vec![0.0; 1 << n];
        let mut off_diagonal = Vec::new();
        for term in hamiltonian.terms() {
            if term.coeff == 0.0 {
                continue;
            }
            let (flip, sign, y_count) = term.action(n)?;
            if flip == 0 {
                for (b, d) in diagonal.iter_mut().enumerate() {
                    let parity = (b & sign).count_ones() & 1;
                    *d += if parity == 0 { term.coeff } else { -term.coeff };
                }
            } else {
                let i_pow = Complex64::i().powu(y_count);
                off_diagonal.push(OffDiagonalTerm {
                    flip,
                    sign,
                    weight: i_pow * term.coeff,
                });
            }
        }
        Ok(Self {
            diagonal,
            off_diagonal,
        })
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// `out = H v`.
    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        for ((o, &d), &a) in out.iter_mut().zip(&self.diagonal).zip(v) {
            *o = a * d;
        }
        for term in &self.off_diagonal {
            for (b, &a) in v.iter().enumerate() {
                let phase = if (b & term.sign).count_ones() & 1 == 0 {
                    term.weight
                } else {
                    -term.weight
                };
                out[b ^ term.flip] += phase * a;
            }
        }
    }

    /// Dense matrix, for small-system checks.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![Complex64::new(0.0, 0.0); dim];
        let mut col = vec![Complex64::new(0.0, 0.0); dim];
        for j in 0..dim {
            e[j] = Complex64::new(1.0, 0.0);
            self.apply_into(&e, &mut col);
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
            e[j] = Complex64::new(0.0, 0.0);
        }
        m
    }
}

/// `H |in>`; the result is generally not normalized.
pub fn apply_hamiltonian(
    hamiltonian: &ToricHamiltonian,
    state: &[Complex64],
) -> Result<Vec<Complex64>> {
    let expected = 1usize << hamiltonian.num_qubits();
    if state.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: state.len(),
        });
    }
    let op = CompiledHamiltonian::new(hamiltonian)?;
    let mut out = vec![Complex64::new(0.0, 0.0); expected];
    op.apply_into(state, &mut out);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EdResult {
    pub energy: f64,
    pub state: StateVector,
    pub residual: f64,
    pub restarts: usize,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest eigenpair of a Hermitian operator by restarted Lanczos with full
/// reorthogonalization. Each restart begins from the previous best Ritz vector.
pub fn lanczos_ground_state(
    op: &CompiledHamiltonian,
    config: &LanczosConfig,
) -> Result<(f64, Vec<Complex64>, f64, usize)> {
    if config.krylov_dim < 2 || config.tolerance <= 0.0 {
        return Err(Error::invalid(
            "Lanczos needs krylov_dim >= 2 and tolerance > 0",
        ));
    }
    let dim = op.dim();
    let m_max = config.krylov_dim.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut start: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
        .collect();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut last_residual = f64::INFINITY;

    for restart in 0..=config.max_restarts {
        let n0 = norm(&start);
        let mut basis: Vec<Vec<Complex64>> = vec![start.iter().map(|a| a / n0).collect()];
        let mut alphas: Vec<f64> = Vec::with_capacity(m_max);
        let mut betas: Vec<f64> = Vec::with_capacity(m_max);

        loop {
            let j = basis.len() - 1;
            op.apply_into(&basis[j], &mut w);
            let alpha = inner(&basis[j], &w).re;
            alphas.push(alpha);
            // two passes of Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for v in &basis {
                    let overlap = inner(v, &w);
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= overlap * vi;
                    }
                }
            }
            let beta = norm(&w);
            if basis.len() == m_max || beta < 1e-12 {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|a| a / beta).collect());
        }

        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (idx, &energy) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty tridiagonal matrix");
        let coeffs = eig.eigenvectors.column(idx);

        let mut ritz = vec![Complex64::new(0.0, 0.0); dim];
        for (v, &c) in basis.iter().zip(coeffs.iter()) {
            for (r, vi) in ritz.iter_mut().zip(v) {
                *r += vi * c;
            }
        }
        let rn = norm(&ritz);
        ritz.iter_mut().for_each(|a| *a /= rn);

        op.apply_into(&ritz, &mut w);
        let residual = w
            .iter()
            .zip(&ritz)
            .map(|(hv, v)| (hv - v * energy).norm_sqr())
            .sum::<f64>()
            .sqrt();
        last_residual = residual;
        if residual < config.tolerance {
            return Ok((energy, ritz, residual, restart));
        }
        start = ritz;
    }
    Err(Error::Numerical(format!(
        "Lanczos did not converge after {} restarts (residual {last_residual:.3e})",
        config.max_restarts
    )))
}

/// Ground state of `H(x)` on `geometry`.
pub fn ground_state_ed(
    geometry: &LatticeGeometry,
    x: f64,
    config: &LanczosConfig,
) -> Result<EdResult> {
    if geometry.num_qubits() > crate::simulator::MAX_QUBITS {
        return Err(Error::invalid(
            "lattice too large for exact diagonalization",
        ));
    }
    let h = ToricHamiltonian::new(geometry, x)?;
    let op = CompiledHamiltonian::new(&h)?;
    let (energy, vec, residual, restarts) = lanczos_ground_state(&op, config)?;
    Ok(EdResult {
        energy,
        state: StateVector::normalized(vec)?,
        residual,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;

    fn lattice(r: usize, c: usize) -> LatticeGeometry {
        LatticeGeometry::new(r, c).unwrap()
    }

    fn dense_ground_energy(h: &ToricHamiltonian) -> f64 {
        // H is real symmetric here: no Y terms.
        let dense = CompiledHamiltonian::new(h).unwrap().to_dense();
        let real = dense.map(|z| {
            assert_eq!(z.im, 0.0);
            z.re
        });
        SymmetricEigen::new(real).eigenvalues.min()
    }

    #[test]
    fn field_limit_is_diagonal() {
        let g = lattice(2, 3);
        let h = ToricHamiltonian::new(&g, 1.0).unwrap();
        let zero = StateVector::zero_state(7).unwrap();
        let out = apply_hamiltonian(&h, zero.amplitudes()).unwrap();
        assert_eq!(out[0], Complex64::new(-7.0, 0.0));
        assert!(out[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn loop_gas_is_an_eigenstate_at_zero_field() {
        let g = lattice(2, 2);
        let h = ToricHamiltonian::new(&g, 0.0).unwrap();
        let mut v = vec![Complex64::new(0.0, 0.0); 16];
        v[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        v[15] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let out = apply_hamiltonian(&h, &v).unwrap();
        for (o, a) in out.iter().zip(&v) {
            assert!((o + a * 5.0).norm() < 1e-12);
        }
    }

    #[test]
    fn matvec_is_linear_and_hermitian() {
        let g = lattice(2, 3);
        let h = ToricHamiltonian::new(&g, 0.37).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rand_vec = || -> Vec<Complex64> {
            (0..128)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        };
        let (a, b) = (rand_vec(), rand_vec());
        let (alpha, beta) = (Complex64::new(0.3, -1.2), Complex64::new(-0.7, 0.4));
        let combo: Vec<Complex64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        let ha = apply_hamiltonian(&h, &a).unwrap();
        let hb = apply_hamiltonian(&h, &b).unwrap();
        let hc = apply_hamiltonian(&h, &combo).unwrap();
        for i in 0..128 {
            assert!((hc[i] - (alpha * ha[i] + beta * hb[i])).norm() < 1e-12);
        }
        let lhs = inner(&a, &hb);
        let rhs = inner(&b, &ha).conj();
        assert!((lhs - rhs).norm() < 1e-12);
        assert!(apply_hamiltonian(&h, &a[..64]).is_err());
    }

    #[test]
    fn ground_energy_at_zero_field() {
        let r = ground_state_ed(&lattice(2, 2), 0.0, &LanczosConfig::default()).unwrap();
        assert!((r.energy + 5.0).abs() < 1e-9);
    }

    #[test]
    fn ground_state_at_full_field() {
        for &(rows, cols) in &[(2, 2), (2, 3), (3, 3)] {
            let g = lattice(rows, cols);
            let r = ground_state_ed(&g, 1.0, &LanczosConfig::default()).unwrap();
            assert!((r.energy + g.num_qubits() as f64).abs() < 1e-9);
            assert!((r.state.amplitudes()[0].norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lanczos_matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(rows, cols) in &[(2, 2), (2, 3), (3, 2), (1, 5)] {
            let g = lattice(rows, cols);
            for x in [0.0, 0.25, 0.5, rng.gen_range(0.0..1.0)] {
                let h = ToricHamiltonian::new(&g, x).unwrap();
                let r = ground_state_ed(&g, x, &LanczosConfig::default()).unwrap();
                let dense = dense_ground_energy(&h);
                assert!((r.energy - dense).abs() < 1e-9, "{rows}x{cols} x={x}");
                assert!(r.residual < 1e-8);
                let e = h.energy(&r.state).unwrap();
                assert!((e - r.energy).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_degenerate_config() {
        let cfg = LanczosConfig {
            krylov_dim: 1,
            ..Default::default()
        };
        assert!(ground_state_ed(&lattice(2, 2), 0.5, &cfg).is_err());
    }
}
