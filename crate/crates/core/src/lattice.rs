//! Open-boundary square lattice with qubits on edges.
//!
//! Vertices are indexed row-major, `v = r * cols + c`. Edge numbering puts all
//! horizontal edges first (row-major), then all vertical edges (row-major).
//! Plaquettes are numbered in raster order over faces, top-left first.

use crate::error::{Error, Result};

/// Geometry of an `rows x cols` vertex grid under open boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeometry {
    rows: usize,
    cols: usize,
    edges: Vec<(usize, usize)>,
    stars: Vec<Vec<usize>>,
    plaquettes: Vec<[usize; 4]>,
}

impl LatticeGeometry {
    /// Builds the lattice for a grid of `rows x cols` vertices.
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "lattice dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if rows * cols < 2 {
            return Err(Error::invalid("lattice needs at least two vertices"));
        }

        let vertex = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
        for r in 0..rows {
            for c in 0..cols - 1 {
                edges.push((vertex(r, c), vertex(r, c + 1)));
            }
        }
        let vertical_base = edges.len();
        for r in 0..rows - 1 {
            for c in 0..cols {
                edges.push((vertex(r, c), vertex(r + 1, c)));
            }
        }

        let mut stars = vec![Vec::new(); rows * cols];
        for (e, &(a, b)) in edges.iter().enumerate() {
            stars[a].push(e);
            stars[b].push(e);
        }
        for star in &mut stars {
            star.sort_unstable();
        }

        let horizontal = |r: usize, c: usize| r * (cols - 1) + c;
        let vertical = |r: usize, c: usize| vertical_base + r * cols + c;
        let mut plaquettes = Vec::with_capacity((rows - 1) * (cols - 1));
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols.saturating_sub(1) {
                let mut face = [
                    horizontal(r, c),
                    horizontal(r + 1, c),
                    vertical(r, c),
                    vertical(r, c + 1),
                ];
                face.sort_unstable();
                plaquettes.push(face);
            }
        }

        Ok(Self {
            rows,
            cols,
            edges,
            stars,
            plaquettes,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of qubits, one per edge.
    pub fn num_qubits(&self) -> usize {
        self.edges.len()
    }

    pub fn num_stars(&self) -> usize {
        self.stars.len()
    }

    pub fn num_plaquettes(&self) -> usize {
        self.plaquettes.len()
    }

    /// Endpoint vertices of every edge, indexed by qubit.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Incident edge indices per vertex (2, 3 or 4 entries).
    pub fn stars(&self) -> &[Vec<usize>] {
        &self.stars
    }

    /// Bounding edge indices per face, ascending.
    pub fn plaquettes(&self) -> &[[usize; 4]] {
        &self.plaquettes
    }

    /// Bit mask of the edges bounding plaquette `p`.
    pub fn plaquette_mask(&self, p: usize) -> usize {
        self.plaquettes[p].iter().fold(0, |m, &e| m | (1 << e))
    }

    /// Plaquettes containing each edge (0, 1 or 2 entries per edge).
    pub fn edge_plaquettes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_qubits()];
        for (p, face) in self.plaquettes.iter().enumerate() {
            for &e in face {
                out[e].push(p);
            }
        }
        out
    }

    /// `sqrt(p)` with `p` the plaquette count; the length used for size scaling.
    pub fn effective_length(&self) -> Result<f64> {
        if self.plaquettes.is_empty() {
            return Err(Error::invalid(
                "effective length undefined for a lattice without plaquettes",
            ));
        }
        Ok((self.plaquettes.len() as f64).sqrt())
    }

    /// Short `RxC` label, e.g. `4x3`.
    pub fn label(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_lattice_sizes() {
        for &(r, c, n, p) in &[(2, 2, 4, 1), (2, 3, 7, 2), (3, 3, 12, 4), (4, 3, 17, 6)] {
            let g = LatticeGeometry::new(r, c).unwrap();
            assert_eq!(g.num_qubits(), n, "{r}x{c}");
            assert_eq!(g.num_plaquettes(), p, "{r}x{c}");
            assert_eq!(g.num_stars(), r * c);
        }
    }

    #[test]
    fn single_edge_lattice() {
        let g = LatticeGeometry::new(1, 2).unwrap();
        assert_eq!(g.num_qubits(), 1);
        assert_eq!(g.num_plaquettes(), 0);
        assert_eq!(g.num_stars(), 2);
        assert!(g.effective_length().is_err());
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(LatticeGeometry::new(0, 3).is_err());
        assert!(LatticeGeometry::new(3, 0).is_err());
        assert!(LatticeGeometry::new(1, 1).is_err());
    }

    #[test]
    fn effective_lengths() {
        assert_eq!(
            LatticeGeometry::new(2, 2)
                .unwrap()
                .effective_length()
                .unwrap(),
            1.0
        );
        assert_eq!(
            LatticeGeometry::new(3, 3)
                .unwrap()
                .effective_length()
                .unwrap(),
            2.0
        );
        let l = LatticeGeometry::new(4, 3)
            .unwrap()
            .effective_length()
            .unwrap();
        assert!((l - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_numbering() {
        let g = LatticeGeometry::new(2, 2).unwrap();
        // horizontal: 0 = (0,1), 1 = (2,3); vertical: 2 = (0,2), 3 = (1,3)
        assert_eq!(g.edges(), &[(0, 1), (2, 3), (0, 2), (1, 3)]);
        assert_eq!(g.plaquettes(), &[[0, 1, 2, 3]]);
        assert_eq!(g.plaquette_mask(0), 0b1111);
        assert_eq!(g.stars()[0], vec![0, 2]);
    }

    #[test]
    fn counts_and_incidence_for_small_grids() {
        for rows in 1..=6 {
            for cols in 1..=6 {
                if rows * cols < 2 {
                    continue;
                }
                let g = LatticeGeometry::new(rows, cols).unwrap();
                assert_eq!(g.num_qubits(), rows * (cols - 1) + cols * (rows - 1));
                assert_eq!(g.num_plaquettes(), (rows - 1) * (cols - 1));
                assert_eq!(g.num_stars(), rows * cols);

                let mut star_hits = vec![0; g.num_qubits()];
                for star in g.stars() {
                    assert!((1..=4).contains(&star.len()));
                    for &e in star {
                        star_hits[e] += 1;
                    }
                }
                assert!(star_hits.iter().all(|&h| h == 2));
                assert!(g.edge_plaquettes().iter().all(|ps| ps.len() <= 2));

                for star in g.stars() {
                    for face in g.plaquettes() {
                        let shared = star.iter().filter(|e| face.contains(e)).count();
                        assert!(shared == 0 || shared == 2);
                    }
                }
            }
        }
    }

    #[test]
    fn star_degrees_under_open_boundaries() {
        let g = LatticeGeometry::new(3, 3).unwrap();
        let degrees: Vec<usize> = g.stars().iter().map(Vec::len).collect();
        assert_eq!(degrees, vec![2, 3, 2, 3, 4, 3, 2, 3, 2]);
    }

    #[test]
    fn plaquette_boundaries_are_independent() {
        for &(r, c) in &[(2, 2), (2, 3), (3, 3), (4, 3), (3, 4)] {
            let g = LatticeGeometry::new(r, c).unwrap();
            let p = g.num_plaquettes();
            let mut seen = std::collections::HashSet::new();
            for subset in 0usize..(1 << p) {
                let mask = (0..p)
                    .filter(|&q| subset >> q & 1 == 1)
                    .fold(0, |m, q| m ^ g.plaquette_mask(q));
                assert!(seen.insert(mask), "{r}x{c} subset {subset:b} collides");
            }
        }
    }
}
