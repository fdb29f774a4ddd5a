//! Dense state-vector simulation.
//!
//! Bit `b` of a basis index encodes qubit `b`. Rotation conventions are
//! `Ry(t) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]` and
//! `Rz(t) = diag(exp(-i t/2), exp(i t/2))`.

use std::io::{Read, Write};

pub use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 20;

const NORM_TOLERANCE: f64 = 1e-10;
const UNITARY_TOLERANCE: f64 = 1e-12;

/// A 2x2 single-qubit gate, row-major.
pub type Gate1 = [[Complex64; 2]; 2];

pub fn ry(theta: f64) -> Gate1 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz(theta: f64) -> Gate1 {
    let zero = Complex64::new(0.0, 0.0);
    [
        [Complex64::from_polar(1.0, -theta / 2.0), zero],
        [zero, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}

fn is_unitary(u: &Gate1) -> bool {
    for i in 0..2 {
        for j in 0..2 {
            let dot: Complex64 = (0..2).map(|k| u[k][i].conj() * u[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            if (dot - target).norm() > UNITARY_TOLERANCE {
                return false;
            }
        }
    }
    true
}

/// Normalized amplitudes over `2^num_qubits` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::invalid(format!(
            "qubit count must be in 1..={MAX_QUBITS}, got {n}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn zero_state(n: usize) -> Result<Self> {
        Self::basis_state(n, 0)
    }

    pub fn basis_state(n: usize, index: usize) -> Result<Self> {
        check_qubit_count(n)?;
        if index >= 1 << n {
            return Err(Error::invalid(format!(
                "basis index {index} out of range for {n} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits: n,
            amps,
        })
    }

    /// Wraps an amplitude vector; rejects non-power-of-two lengths and
    /// vectors whose norm is not 1 within 1e-10.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let state = Self::from_amplitudes_unchecked(amps)?;
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Numerical(format!("state norm {norm} is not 1")));
        }
        Ok(state)
    }

    /// Like [`StateVector::from_amplitudes`] but rescales to unit norm.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes_unchecked(amps)
    }

    pub(crate) fn from_amplitudes_unchecked(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        check_qubit_count(n)?;
        Ok(Self {
            num_qubits: n,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|psi_b|^2` for every basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::invalid(format!(
                "qubit {q} out of range for {} qubits",
                self.num_qubits
            )));
        }
        Ok(())
    }

    /// Applies an arbitrary single-qubit unitary.
    pub fn apply_1q(&mut self, qubit: usize, u: &Gate1) -> Result<()> {
        self.check_qubit(qubit)?;
        if !is_unitary(u) {
            return Err(Error::invalid("single-qubit gate is not unitary"));
        }
        let bit = 1 << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[i | bit] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let (s, c) = (theta / 2.0).sin_cos();
        let bit = 1 << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = a0 * c - a1 * s;
                self.amps[i | bit] = a0 * s + a1 * c;
            }
        }
        Ok(())
    }

    pub fn apply_rz(&mut self, qubit: usize, theta: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let lo = Complex64::from_polar(1.0, -theta / 2.0);
        let hi = Complex64::from_polar(1.0, theta / 2.0);
        let bit = 1 << qubit;
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & bit == 0 { lo } else { hi };
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::invalid("CNOT control and target must differ"));
        }
        let (cbit, tbit) = (1 << control, 1 << target);
        for i in 0..self.amps.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amps.swap(i, i | tbit);
            }
        }
        Ok(())
    }

    /// Applies `prod_{e in edges} X_e`.
    pub fn apply_x_string(&mut self, edges: &[usize]) -> Result<()> {
        let mut mask = 0usize;
        for &e in edges {
            self.check_qubit(e)?;
            mask ^= 1 << e;
        }
        self.apply_x_mask(mask);
        Ok(())
    }

    pub(crate) fn apply_x_mask(&mut self, mask: usize) {
        if mask == 0 {
            return;
        }
        for i in 0..self.amps.len() {
            let j = i ^ mask;
            if i < j {
                self.amps.swap(i, j);
            }
        }
    }

    /// `<self|other>`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: other.num_qubits,
            });
        }
        Ok(inner(&self.amps, &other.amps))
    }

    /// `P|psi>` for a Pauli string, including its coefficient.
    pub fn apply_pauli(&self, string: &PauliString) -> Result<StateVector> {
        let masks = string.masks(self.num_qubits)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            out[b ^ masks.flip] += masks.phase(b) * a * string.coeff;
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amps: out,
        })
    }

    /// `<psi|P|psi>`; real because Pauli strings are Hermitian.
    pub fn expect_pauli(&self, string: &PauliString) -> Result<f64> {
        let masks = string.masks(self.num_qubits)?;
        let mut acc = 0.0;
        if masks.flip == 0 {
            for (b, a) in self.amps.iter().enumerate() {
                let sign = if (b & masks.sign).count_ones() & 1 == 0 {
                    1.0
                } else {
                    -1.0
                };
                acc += sign * a.norm_sqr();
            }
        } else {
            for (b, &a) in self.amps.iter().enumerate() {
                acc += (self.amps[b ^ masks.flip].conj() * masks.phase(b) * a).re;
            }
        }
        Ok(acc * string.coeff)
    }

    /// Serializes in the `LGSV` binary format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(STATE_MAGIC)?;
        w.write_all(&STATE_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.num_qubits as u16).to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.amps.len());
        for a in &self.amps {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 16 * self.amps.len());
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    /// Parses the `LGSV` binary format. The norm is not re-validated so that
    /// stored data round-trips bit-exactly.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)
            .map_err(|_| Error::Format("truncated state header".into()))?;
        if &header[..4] != STATE_MAGIC {
            return Err(Error::Format("bad state magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != STATE_FORMAT_VERSION {
            return Err(Error::Version {
                found: version as u32,
                expected: STATE_FORMAT_VERSION as u32,
            });
        }
        let n = u16::from_le_bytes([header[6], header[7]]) as usize;
        check_qubit_count(n)?;
        let mut payload = vec![0u8; 16 << n];
        r.read_exact(&mut payload)
            .map_err(|_| Error::Format("truncated state payload".into()))?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Format("trailing bytes after state payload".into()));
        }
        let amps = payload
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Ok(Self {
            num_qubits: n,
            amps,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Magic bytes opening every serialized state.
pub const STATE_MAGIC: &[u8; 4] = b"LGSV";
pub const STATE_FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// A weighted tensor product of Pauli operators, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    ops: Vec<(usize, Pauli)>,
    pub coeff: f64,
}

struct PauliMasks {
    flip: usize,
    sign: usize,
    y_count: u32,
}

impl PauliMasks {
    /// Phase picked up by basis state `b`: `P|b> = phase(b) |b ^ flip>`.
    fn phase(&self, b: usize) -> Complex64 {
        let i_pow = match self.y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        if (b & self.sign).count_ones() & 1 == 0 {
            i_pow
        } else {
            -i_pow
        }
    }
}

impl PauliString {
    pub fn new(coeff: f64, ops: impl IntoIterator<Item = (usize, Pauli)>) -> Result<Self> {
        let mut ops: Vec<(usize, Pauli)> =
            ops.into_iter().filter(|&(_, p)| p != Pauli::I).collect();
        ops.sort_by_key(|&(q, _)| q);
        if ops.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("Pauli string repeats a qubit"));
        }
        Ok(Self { ops, coeff })
    }

    /// `coeff * prod_q X_q`.
    pub fn x_string(coeff: f64, qubits: &[usize]) -> Result<Self> {
        Self::new(coeff, qubits.iter().map(|&q| (q, Pauli::X)))
    }

    /// `coeff * prod_q Z_q`.
    pub fn z_string(coeff: f64, qubits: &[usize]) -> Result<Self> {
        Self::new(coeff, qubits.iter().map(|&q| (q, Pauli::Z)))
    }

    pub fn ops(&self) -> &[(usize, Pauli)] {
        &self.ops
    }

    /// True when the string has no X or Y factor.
    pub fn is_diagonal(&self) -> bool {
        self.ops.iter().all(|&(_, p)| p == Pauli::Z)
    }

    fn masks(&self, num_qubits: usize) -> Result<PauliMasks> {
        let mut m = PauliMasks {
            flip: 0,
            sign: 0,
            y_count: 0,
        };
        for &(q, p) in &self.ops {
            if q >= num_qubits {
                return Err(Error::invalid(format!(
                    "Pauli string acts on qubit {q} outside a {num_qubits}-qubit register"
                )));
            }
            match p {
                Pauli::I => {}
                Pauli::X => m.flip |= 1 << q,
                Pauli::Z => m.sign |= 1 << q,
                Pauli::Y => {
                    m.flip |= 1 << q;
                    m.sign |= 1 << q;
                    m.y_count += 1;
                }
            }
        }
        Ok(m)
    }

    /// `(flip mask, sign mask, y count)` describing `P|b> = i^y (-1)^{|b & sign|} |b ^ flip>`.
    pub(crate) fn action(&self, num_qubits: usize) -> Result<(usize, usize, u32)> {
        let m = self.masks(num_qubits)?;
        Ok((m.flip, m.sign, m.y_count))
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
        let amps = (0..1 << n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn zero_states() {
        assert_eq!(
            StateVector::zero_state(2).unwrap().amplitudes(),
            &[c(1.0), c(0.0), c(0.0), c(0.0)]
        );
        assert_eq!(
            StateVector::zero_state(1).unwrap().amplitudes(),
            &[c(1.0), c(0.0)]
        );
        let s = StateVector::zero_state(4).unwrap();
        assert_eq!(s.norm(), 1.0);
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0)));
        assert!(StateVector::zero_state(0).is_err());
        assert!(StateVector::zero_state(21).is_err());
    }

    #[test]
    fn pinned_gate_matrices() {
        let t = 0.7f64;
        let y = ry(t);
        assert_eq!(y[0][0], c((t / 2.0).cos()));
        assert_eq!(y[0][1], c(-(t / 2.0).sin()));
        assert_eq!(y[1][0], c((t / 2.0).sin()));
        let z = rz(t);
        assert!((z[0][0] - Complex64::new((t / 2.0).cos(), -(t / 2.0).sin())).norm() < 1e-15);
        assert!((z[1][1] - Complex64::new((t / 2.0).cos(), (t / 2.0).sin())).norm() < 1e-15);
    }

    #[test]
    fn rotations_on_zero() {
        let mut s = StateVector::zero_state(1).unwrap();
        s.apply_1q(0, &ry(PI)).unwrap();
        assert!(close(s.amplitudes(), &[c(0.0), c(1.0)], 1e-15));

        let mut s = StateVector::zero_state(1).unwrap();
        s.apply_1q(0, &ry(PI / 2.0)).unwrap();
        assert!(close(
            s.amplitudes(),
            &[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)],
            1e-15
        ));

        let mut s = StateVector::zero_state(1).unwrap();
        s.apply_1q(0, &rz(1.3)).unwrap();
        let z = PauliString::z_string(1.0, &[0]).unwrap();
        assert!((s.expect_pauli(&z).unwrap() - 1.0).abs() < 1e-15);
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn specialized_kernels_match_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(3, &mut rng);
        for q in 0..3 {
            let t = rng.gen_range(-PI..PI);
            let (mut a, mut b) = (s.clone(), s.clone());
            a.apply_ry(q, t).unwrap();
            b.apply_1q(q, &ry(t)).unwrap();
            assert!(close(a.amplitudes(), b.amplitudes(), 1e-14));
            let (mut a, mut b) = (s.clone(), s.clone());
            a.apply_rz(q, t).unwrap();
            b.apply_1q(q, &rz(t)).unwrap();
            assert!(close(a.amplitudes(), b.amplitudes(), 1e-14));
        }
    }

    #[test]
    fn rejects_non_unitary_and_bad_indices() {
        let mut s = StateVector::zero_state(2).unwrap();
        let bad = [[c(1.0), c(1.0)], [c(0.0), c(1.0)]];
        assert!(s.apply_1q(0, &bad).is_err());
        assert!(s.apply_1q(2, &ry(0.1)).is_err());
        assert!(s.apply_cnot(1, 1).is_err());
        assert!(s.apply_cnot(0, 5).is_err());
        assert!(s.apply_x_string(&[0, 2]).is_err());
    }

    #[test]
    fn cnot_examples() {
        // |10> means qubit 0 set: index 1
        let mut s = StateVector::basis_state(2, 0b01).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s, StateVector::basis_state(2, 0b11).unwrap());

        let mut s = StateVector::zero_state(2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s, StateVector::zero_state(2).unwrap());

        let h = FRAC_1_SQRT_2;
        let mut s = StateVector::from_amplitudes(vec![c(h), c(h), c(0.0), c(0.0)]).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s.amplitudes(), &[c(h), c(0.0), c(0.0), c(h)]);
    }

    #[test]
    fn x_strings() {
        let mut s = StateVector::zero_state(4).unwrap();
        s.apply_x_string(&[0, 1, 2, 3]).unwrap();
        assert_eq!(s, StateVector::basis_state(4, 0b1111).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_state(4, &mut rng);
        let mut t = r.clone();
        t.apply_x_string(&[]).unwrap();
        assert_eq!(t, r);
        t.apply_x_string(&[1, 3]).unwrap();
        t.apply_x_string(&[1, 3]).unwrap();
        assert_eq!(t, r);
        let mut t = r.clone();
        t.apply_cnot(2, 0).unwrap();
        t.apply_cnot(2, 0).unwrap();
        assert_eq!(t, r);
    }

    #[test]
    fn pauli_expectations() {
        let z0 = PauliString::z_string(1.0, &[0]).unwrap();
        assert_eq!(
            StateVector::zero_state(1)
                .unwrap()
                .expect_pauli(&z0)
                .unwrap(),
            1.0
        );

        let h = FRAC_1_SQRT_2;
        let plus = StateVector::from_amplitudes(vec![c(h), c(h)]).unwrap();
        assert!(plus.expect_pauli(&z0).unwrap().abs() < 1e-15);

        let mut amps = vec![c(0.0); 16];
        amps[0] = c(h);
        amps[15] = c(h);
        let ghz = StateVector::from_amplitudes(amps).unwrap();
        let xxxx = PauliString::x_string(1.0, &[0, 1, 2, 3]).unwrap();
        assert!((ghz.expect_pauli(&xxxx).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn y_action() {
        // Y|0> = i|1>
        let y = PauliString::new(1.0, [(0, Pauli::Y)]).unwrap();
        let out = StateVector::zero_state(1).unwrap().apply_pauli(&y).unwrap();
        assert_eq!(out.amplitudes(), &[c(0.0), Complex64::new(0.0, 1.0)]);
        // <+i|Y|+i> = 1
        let h = FRAC_1_SQRT_2;
        let s = StateVector::from_amplitudes(vec![c(h), Complex64::new(0.0, h)]).unwrap();
        assert!((s.expect_pauli(&y).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_expectation_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        for _ in 0..50 {
            let s = random_state(4, &mut rng);
            let ops: Vec<(usize, Pauli)> =
                (0..4).map(|q| (q, letters[rng.gen_range(0..4)])).collect();
            let p = PauliString::new(rng.gen_range(-2.0..2.0), ops).unwrap();
            let direct = s.expect_pauli(&p).unwrap();
            let via_apply = s.inner_product(&s.apply_pauli(&p).unwrap()).unwrap();
            assert!((direct - via_apply.re).abs() < 1e-12);
            assert!(via_apply.im.abs() < 1e-12);
        }
    }

    #[test]
    fn pauli_string_validation() {
        assert!(PauliString::new(1.0, [(0, Pauli::X), (0, Pauli::Z)]).is_err());
        let p = PauliString::z_string(1.0, &[5]).unwrap();
        assert!(StateVector::zero_state(2)
            .unwrap()
            .expect_pauli(&p)
            .is_err());
    }

    #[test]
    fn inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_state(3, &mut rng);
        assert!((s.inner_product(&s).unwrap() - c(1.0)).norm() < 1e-12);
        let zero = StateVector::basis_state(1, 0).unwrap();
        let one = StateVector::basis_state(1, 1).unwrap();
        assert_eq!(zero.inner_product(&one).unwrap(), c(0.0));
        let h = FRAC_1_SQRT_2;
        let plus = StateVector::from_amplitudes(vec![c(h), c(h)]).unwrap();
        assert!((zero.inner_product(&plus).unwrap() - c(h)).norm() < 1e-15);
        assert!(matches!(
            zero.inner_product(&s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn norm_drift_over_long_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = random_state(6, &mut rng);
        for _ in 0..10_000 {
            match rng.gen_range(0..4) {
                0 => s
                    .apply_1q(rng.gen_range(0..6), &ry(rng.gen_range(-PI..PI)))
                    .unwrap(),
                1 => s
                    .apply_1q(rng.gen_range(0..6), &rz(rng.gen_range(-PI..PI)))
                    .unwrap(),
                2 => {
                    let a = rng.gen_range(0..6);
                    let b = (a + rng.gen_range(1..6)) % 6;
                    s.apply_cnot(a, b).unwrap()
                }
                _ => s.apply_x_mask(rng.gen_range(0..64)),
            }
        }
        assert!((s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn binary_format_layout() {
        let h = FRAC_1_SQRT_2;
        let s = StateVector::from_amplitudes(vec![c(h), Complex64::new(0.0, -h)]).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..4], b"LGSV");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..8], &[1, 0]);
        assert_eq!(bytes.len(), 8 + 2 * 16);
        assert_eq!(&bytes[8..16], &h.to_le_bytes());
        assert_eq!(&bytes[32..40], &(-h).to_le_bytes());
        assert_eq!(StateVector::from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn binary_format_errors() {
        let bytes = StateVector::zero_state(3).unwrap().to_bytes();
        assert!(matches!(
            StateVector::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            StateVector::from_bytes(&bad),
            Err(Error::Version { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(StateVector::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(StateVector::from_bytes(&long).is_err());
    }

    proptest::proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(seed in 0u64..1000, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_state(n, &mut rng);
            let back = StateVector::from_bytes(&s.to_bytes()).unwrap();
            for (a, b) in s.amplitudes().iter().zip(back.amplitudes()) {
                proptest::prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                proptest::prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
