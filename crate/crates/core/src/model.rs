//! The field-tuned toric-code Hamiltonian and its observables.
//!
//! `H(x) = -(1-x) (sum_s A_s + sum_p B_p) - x sum_i Z_i` with Z-type star
//! operators `A_s` and X-type plaquette operators `B_p`.

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::simulator::{PauliString, StateVector};

#[derive(Debug, Clone)]
pub struct ToricHamiltonian {
    geometry: LatticeGeometry,
    x: f64,
    star_terms: Vec<PauliString>,
    plaquette_terms: Vec<PauliString>,
    field_terms: Vec<PauliString>,
}

impl ToricHamiltonian {
    pub fn new(geometry: &LatticeGeometry, x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!(
                "field parameter {x} outside [0, 1]"
            )));
        }
        let stabilizer = -(1.0 - x);
        let star_terms = geometry
            .stars()
            .iter()
            .map(|star| PauliString::z_string(stabilizer, star))
            .collect::<Result<Vec<_>>>()?;
        let plaquette_terms = geometry
            .plaquettes()
            .iter()
            .map(|face| PauliString::x_string(stabilizer, face))
            .collect::<Result<Vec<_>>>()?;
        let field_terms = (0..geometry.num_qubits())
            .map(|q| PauliString::z_string(-x, &[q]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geometry: geometry.clone(),
            x,
            star_terms,
            plaquette_terms,
            field_terms,
        })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn star_terms(&self) -> &[PauliString] {
        &self.star_terms
    }

    pub fn plaquette_terms(&self) -> &[PauliString] {
        &self.plaquette_terms
    }

    pub fn field_terms(&self) -> &[PauliString] {
        &self.field_terms
    }

    /// All terms: stars, then plaquettes, then field terms.
    pub fn terms(&self) -> impl Iterator<Item = &PauliString> {
        self.star_terms
            .iter()
            .chain(&self.plaquette_terms)
            .chain(&self.field_terms)
    }

    pub fn num_qubits(&self) -> usize {
        self.geometry.num_qubits()
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.num_qubits() != self.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits(),
                found: state.num_qubits(),
            });
        }
        Ok(())
    }

    /// `<psi|H|psi>`.
    pub fn energy(&self, state: &StateVector) -> Result<f64> {
        self.check_state(state)?;
        let mut total = 0.0;
        for term in self.terms() {
            if term.coeff != 0.0 {
                total += state.expect_pauli(term)?;
            }
        }
        Ok(total)
    }
}

/// `m_z(b) = (N - 2 popcount(b)) / N` for every basis index.
fn magnetization_values(n: usize) -> impl Iterator<Item = f64> {
    (0usize..1 << n).map(move |b| (n as f64 - 2.0 * b.count_ones() as f64) / n as f64)
}

/// `(1/N) sum_i <Z_i>`.
pub fn magnetization_per_qubit(state: &StateVector) -> f64 {
    magnetization_values(state.num_qubits())
        .zip(state.amplitudes())
        .map(|(m, a)| m * a.norm_sqr())
        .sum()
}

/// `<m^2>^2 / <m^4>` over the diagonal distribution of the magnetization.
pub fn binder_cumulant(state: &StateVector) -> Result<f64> {
    let (mut m2, mut m4) = (0.0, 0.0);
    for (m, a) in magnetization_values(state.num_qubits()).zip(state.amplitudes()) {
        let p = a.norm_sqr();
        let sq = m * m;
        m2 += p * sq;
        m4 += p * sq * sq;
    }
    if m4 <= 1e-14 {
        return Err(Error::Numerical(
            "fourth magnetization moment vanishes; Binder cumulant undefined".into(),
        ));
    }
    Ok(m2 * m2 / m4)
}
