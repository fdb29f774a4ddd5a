//! Two-cluster phase detection from pairwise state fidelities.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulator::StateVector;

/// `F[i][j] = |<psi_i|psi_j>|^2`, row-major `n x n`.
pub fn fidelity_matrix(states: &[&StateVector]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = states.first() {
        for s in states {
            if s.num_qubits() != first.num_qubits() {
                return Err(Error::DimensionMismatch {
                    expected: first.num_qubits(),
                    found: s.num_qubits(),
                });
            }
        }
    }
    let n = states.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        let z = states[i]
                            .inner_product(states[j])
                            .expect("checked dimensions");
                        z.norm_sqr()
                    }
                })
                .collect()
        })
        .collect();
    let mut f = vec![vec![0.0; n]; n];
    for i in 0..n {
        for (k, &v) in upper[i].iter().enumerate() {
            f[i][i + k] = v;
            f[i + k][i] = v;
        }
    }
    Ok(f)
}

/// Symmetric Hilbert-Schmidt distances `d = sqrt(2 (1 - F))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    /// Wraps an explicit symmetric matrix with a zero diagonal.
    pub fn from_matrix(d: Vec<Vec<f64>>) -> Result<Self> {
        let n = d.len();
        for (i, row) in d.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            if row[i] != 0.0 {
                return Err(Error::invalid("distance matrix diagonal must be zero"));
            }
            for j in 0..i {
                if row[j] != d[j][i] || row[j] < 0.0 || !row[j].is_finite() {
                    return Err(Error::invalid(
                        "distances must be symmetric and non-negative",
                    ));
                }
            }
        }
        Ok(Self { d })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.d
    }
}

/// Converts fidelities to distances, clamping `F` into `[0, 1]` first.
pub fn hs_distance_matrix(fidelity: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let n = fidelity.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        if fidelity[i].len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: fidelity[i].len(),
            });
        }
        for j in 0..n {
            if i != j {
                let f = fidelity[i][j].clamp(0.0, 1.0);
                d[i][j] = (2.0 * (1.0 - f)).sqrt();
            }
        }
    }
    // enforce exact symmetry against rounding in the input
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in 0..i {
            d[j][i] = d[i][j];
        }
    }
    Ok(DistanceMatrix { d })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster id (0 or 1) per sample.
    pub assignments: Vec<u8>,
    pub medoids: [usize; 2],
    /// `sum_c sum_{i in C_c} d(i, m_c)^2`.
    pub loss: f64,
    /// Loss after every assignment step, starting from the initialization.
    pub loss_trace: Vec<f64>,
}

fn assign(dist: &DistanceMatrix, medoids: [usize; 2]) -> (Vec<u8>, f64) {
    let mut loss = 0.0;
    let assignments = (0..dist.len())
        .map(|i| {
            let d0 = dist.get(i, medoids[0]).powi(2);
            let d1 = dist.get(i, medoids[1]).powi(2);
            if d1 < d0 {
                loss += d1;
                1
            } else {
                loss += d0;
                0
            }
        })
        .collect();
    (assignments, loss)
}

/// In-cluster point minimizing summed squared distance; ties to the smallest index.
fn update_medoid(dist: &DistanceMatrix, assignments: &[u8], cluster: u8) -> Option<usize> {
    let members: Vec<usize> = (0..assignments.len())
        .filter(|&i| assignments[i] == cluster)
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for &candidate in &members {
        let cost: f64 = members
            .iter()
            .map(|&i| dist.get(i, candidate).powi(2))
            .sum();
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((candidate, cost));
        }
    }
    best.map(|(i, _)| i)
}

/// Exhaustive search over medoid pairs for a strictly lower loss.
fn best_medoid_pair(dist: &DistanceMatrix, current: f64) -> Option<[usize; 2]> {
    let n = dist.len();
    let mut best = (current, None);
    for a in 0..n {
        for b in a + 1..n {
            let loss: f64 = (0..n)
                .map(|i| dist.get(i, a).powi(2).min(dist.get(i, b).powi(2)))
                .sum();
            if loss < best.0 {
                best = (loss, Some([a, b]));
            }
        }
    }
    best.1
}

/// Two-medoid clustering minimizing the summed squared distance to the
/// cluster medoid.
///
/// Starts from the farthest pair (smallest index pair on ties) and alternates
/// assignment and medoid updates until assignments are stable. The converged
/// medoids are then checked against every other medoid pair; if a strictly
/// better pair exists the alternation restarts from it, so the returned loss
/// is the global minimum.
pub fn kmedoids_two(dist: &DistanceMatrix) -> Result<Clustering> {
    let n = dist.len();
    if n < 2 {
        return Err(Error::invalid("clustering needs at least two samples"));
    }
    let mut medoids = [0, 1];
    let mut far = dist.get(0, 1);
    for i in 0..n {
        for j in i + 1..n {
            if dist.get(i, j) > far {
                far = dist.get(i, j);
                medoids = [i, j];
            }
        }
    }

    let (mut assignments, mut loss) = assign(dist, medoids);
    let mut loss_trace = vec![loss];
    loop {
        for _ in 0..10 * n + 10 {
            let m0 = update_medoid(dist, &assignments, 0).unwrap_or(medoids[0]);
            let m1 = update_medoid(dist, &assignments, 1).unwrap_or(medoids[1]);
            let (next, next_loss) = assign(dist, [m0, m1]);
            if next_loss > loss {
                break;
            }
            medoids = [m0, m1];
            let stable = next == assignments;
            assignments = next;
            loss = next_loss;
            loss_trace.push(loss);
            if stable {
                break;
            }
        }
        match best_medoid_pair(dist, loss) {
            Some(pair) => {
                medoids = pair;
                let (next, next_loss) = assign(dist, medoids);
                assignments = next;
                loss = next_loss;
                loss_trace.push(loss);
            }
            None => break,
        }
    }
    Ok(Clustering {
        assignments,
        medoids,
        loss,
        loss_trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientedLabels {
    /// -1 for the cluster holding the smallest-x sample, +1 otherwise.
    pub labels: Vec<i8>,
    /// True when every sample landed in one cluster.
    pub degenerate: bool,
}

pub fn orient_clusters(clustering: &Clustering, xs: &[f64]) -> Result<OrientedLabels> {
    let n = clustering.assignments.len();
    if xs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: xs.len(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("no samples to orient"));
    }
    let lowest = (0..n)
        .min_by(|&a, &b| xs[a].total_cmp(&xs[b]))
        .expect("non-empty");
    let topological = clustering.assignments[lowest];
    let labels: Vec<i8> = clustering
        .assignments
        .iter()
        .map(|&c| if c == topological { -1 } else { 1 })
        .collect();
    let degenerate = labels.iter().all(|&l| l == -1);
    Ok(OrientedLabels { labels, degenerate })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
        let amps = (0..1 << n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    /// Minimum loss over every medoid pair, by enumerating all 2-partitions
    /// and the best medoid inside each part.
    fn brute_force_loss(dist: &DistanceMatrix) -> f64 {
        let n = dist.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let mut total = 0.0;
            for side in [true, false] {
                let members: Vec<usize> =
                    (0..n).filter(|&i| (mask >> i & 1 == 1) == side).collect();
                total += members
                    .iter()
                    .map(|&m| members.iter().map(|&i| dist.get(i, m).powi(2)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
            }
            best = best.min(total);
        }
        best
    }

    #[allow(clippy::needless_range_loop)]
    fn random_distances(n: usize, rng: &mut impl Rng) -> DistanceMatrix {
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..i {
                let v = rng.gen_range(0.0..1.5);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        DistanceMatrix::from_matrix(d).unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::basis_state(1, 0).unwrap();
        let one = StateVector::basis_state(1, 1).unwrap();
        let plus =
            StateVector::from_amplitudes(vec![Complex64::new(FRAC_1_SQRT_2, 0.0); 2]).unwrap();
        let f = fidelity_matrix(&[&zero, &one, &plus]).unwrap();
        assert_eq!(f[0][0], 1.0);
        assert_eq!(f[0][1], 0.0);
        assert!((f[0][2] - 0.5).abs() < 1e-15);
        assert_eq!(f[2][0], f[0][2]);
        let two = StateVector::zero_state(2).unwrap();
        assert!(fidelity_matrix(&[&zero, &two]).is_err());
    }

    #[test]
    fn distance_examples() {
        let d = hs_distance_matrix(&[
            vec![1.0, 0.0, 0.5],
            vec![0.0, 1.0, 1.0],
            vec![0.5, 1.0, 1.0],
        ])
        .unwrap();
        assert_eq!(d.get(0, 0), 0.0);
        assert!((d.get(0, 1) - 2f64.sqrt()).abs() < 1e-15);
        assert!((d.get(0, 2) - 1.0).abs() < 1e-15);
        assert_eq!(d.get(1, 2), 0.0);
        // slightly out-of-range fidelities are clamped
        let d = hs_distance_matrix(&[vec![1.0, 1.0 + 1e-12], vec![1.0 + 1e-12, 1.0]]).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn distances_on_random_states_form_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let states: Vec<StateVector> = (0..12).map(|_| random_state(3, &mut rng)).collect();
        let refs: Vec<&StateVector> = states.iter().collect();
        let d = hs_distance_matrix(&fidelity_matrix(&refs).unwrap()).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert!(d.get(i, j) <= 2f64.sqrt() + 1e-12);
                assert_eq!(d.get(i, j), d.get(j, i));
                for k in 0..12 {
                    assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn separated_groups() {
        let a = StateVector::basis_state(2, 0).unwrap();
        let b = StateVector::basis_state(2, 3).unwrap();
        let states = [&a, &a, &b, &a, &b, &b];
        let d = hs_distance_matrix(&fidelity_matrix(&states).unwrap()).unwrap();
        let c = kmedoids_two(&d).unwrap();
        assert_eq!(c.loss, 0.0);
        assert_eq!(c.assignments, vec![0, 0, 1, 0, 1, 1]);
    }

    #[test]
    fn two_samples() {
        let d = DistanceMatrix::from_matrix(vec![vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let c = kmedoids_two(&d).unwrap();
        assert_eq!(c.medoids, [0, 1]);
        assert_eq!(c.loss, 0.0);
        let one = DistanceMatrix::from_matrix(vec![vec![0.0]]).unwrap();
        assert!(kmedoids_two(&one).is_err());
    }

    #[test]
    fn matches_exhaustive_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.gen_range(2..=8);
            let d = random_distances(n, &mut rng);
            let c = kmedoids_two(&d).unwrap();
            assert!((c.loss - brute_force_loss(&d)).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = random_distances(30, &mut rng);
            let c = kmedoids_two(&d).unwrap();
            for w in c.loss_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert_eq!(*c.loss_trace.last().unwrap(), c.loss);
            assert_eq!(c.assignments[c.medoids[0]], 0);
            assert_eq!(c.assignments[c.medoids[1]], 1);
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        // two noisy groups so the optimum is unique
        let states: Vec<StateVector> = xs
            .iter()
            .map(|&x| {
                let t: f64 = if x < 0.5 { 0.1 } else { 1.4 } + rng.gen_range(-0.05..0.05);
                StateVector::from_amplitudes(vec![
                    Complex64::new(t.cos(), 0.0),
                    Complex64::new(t.sin(), 0.0),
                ])
                .unwrap()
            })
            .collect();
        let refs: Vec<&StateVector> = states.iter().collect();
        let d = hs_distance_matrix(&fidelity_matrix(&refs).unwrap()).unwrap();
        let base = orient_clusters(&kmedoids_two(&d).unwrap(), &xs).unwrap();

        let mut perm: Vec<usize> = (0..20).collect();
        perm.reverse();
        perm.swap(3, 11);
        let p_refs: Vec<&StateVector> = perm.iter().map(|&i| &states[i]).collect();
        let p_xs: Vec<f64> = perm.iter().map(|&i| xs[i]).collect();
        let pd = hs_distance_matrix(&fidelity_matrix(&p_refs).unwrap()).unwrap();
        let permuted = orient_clusters(&kmedoids_two(&pd).unwrap(), &p_xs).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(permuted.labels[k], base.labels[i]);
        }
    }

    #[test]
    fn orientation_rules() {
        let c = Clustering {
            assignments: vec![1, 0],
            medoids: [1, 0],
            loss: 0.0,
            loss_trace: vec![0.0],
        };
        let o = orient_clusters(&c, &[0.1, 0.9]).unwrap();
        assert_eq!(o.labels, vec![-1, 1]);
        assert!(!o.degenerate);

        let c = Clustering {
            assignments: vec![0, 0, 0],
            medoids: [0, 1],
            loss: 0.0,
            loss_trace: vec![0.0],
        };
        let o = orient_clusters(&c, &[0.5, 0.2, 0.9]).unwrap();
        assert_eq!(o.labels, vec![-1, -1, -1]);
        assert!(o.degenerate);
        assert!(orient_clusters(&c, &[0.5]).is_err());
    }

    #[test]
    fn identical_states_are_degenerate() {
        let a = StateVector::zero_state(2).unwrap();
        let d = hs_distance_matrix(&fidelity_matrix(&[&a, &a, &a]).unwrap()).unwrap();
        let c = kmedoids_two(&d).unwrap();
        let o = orient_clusters(&c, &[0.0, 0.5, 1.0]).unwrap();
        assert!(o.degenerate);
    }
}
