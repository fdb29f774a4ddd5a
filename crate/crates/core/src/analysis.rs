//! Transition-point estimation from label sequences and finite-size
//! extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval between the end of the uniform-label prefix and the start of the
/// opposite-label suffix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipIntervalEstimate {
    pub x_lo: f64,
    pub x_hi: f64,
    pub center: f64,
    pub half_width: f64,
}

impl FlipIntervalEstimate {
    pub fn from_bounds(x_lo: f64, x_hi: f64) -> Result<Self> {
        if !(x_lo < x_hi) {
            return Err(Error::invalid(format!(
                "interval bounds out of order: {x_lo} >= {x_hi}"
            )));
        }
        Ok(Self {
            x_lo,
            x_hi,
            center: 0.5 * (x_lo + x_hi),
            half_width: 0.5 * (x_hi - x_lo),
        })
    }
}

/// Flip-interval estimate over labels ordered by strictly increasing `xs`.
///
/// `j_min` is the last index of the run of labels equal to `labels[0]`, `j_max`
/// the first index from which every label equals the opposite value.
pub fn flip_interval(xs: &[f64], labels: &[i8]) -> Result<FlipIntervalEstimate> {
    if xs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: labels.len(),
        });
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("x values must be strictly increasing"));
    }
    if labels.iter().any(|&l| l != -1 && l != 1) {
        return Err(Error::invalid("labels must be -1 or +1"));
    }
    let Some(&first) = labels.first() else {
        return Err(Error::NoTransition("empty label sequence".into()));
    };
    let Some(j_min) = labels.iter().position(|&l| l != first).map(|j| j - 1) else {
        return Err(Error::NoTransition(format!("every label is {first:+}")));
    };
    if *labels.last().expect("non-empty") == first {
        return Err(Error::NoTransition(
            "labels at both ends agree; no opposite-label suffix".into(),
        ));
    }
    let j_max = labels
        .iter()
        .rposition(|&l| l == first)
        .expect("first label present")
        + 1;
    FlipIntervalEstimate::from_bounds(xs[j_min], xs[j_max])
}

/// One lattice's transition estimate for the scaling fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub plaquettes: usize,
    pub estimate: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWeighting {
    #[default]
    Unweighted,
    /// Weights `1 / uncertainty^2`.
    InverseVariance,
}

/// `estimate = intercept + slope / sqrt(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_stderr: f64,
    pub slope_stderr: f64,
    /// `(1 / L_eff, estimate, uncertainty)` per input point.
    pub points: Vec<(f64, f64, f64)>,
    pub weighting: FitWeighting,
}

impl ScalingFit {
    pub fn predict(&self, plaquettes: usize) -> f64 {
        self.intercept + self.slope / (plaquettes as f64).sqrt()
    }
}

/// Least-squares fit of the estimates against `1 / sqrt(p)`.
///
/// Standard errors use the residual variance with `n - 2` degrees of freedom
/// and are zero for exactly two points.
pub fn fit_finite_size(points: &[ScalingPoint], weighting: FitWeighting) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::invalid("scaling fit needs at least two lattices"));
    }
    for (i, a) in points.iter().enumerate() {
        if a.plaquettes == 0 {
            return Err(Error::invalid("scaling points need at least one plaquette"));
        }
        if !a.estimate.is_finite() {
            return Err(Error::invalid("non-finite estimate"));
        }
        if points[..i].iter().any(|b| b.plaquettes == a.plaquettes) {
            return Err(Error::invalid(format!(
                "duplicate plaquette count {}",
                a.plaquettes
            )));
        }
    }
    let weights: Vec<f64> = match weighting {
        FitWeighting::Unweighted => vec![1.0; points.len()],
        FitWeighting::InverseVariance => points
            .iter()
            .map(|p| {
                if p.uncertainty > 0.0 && p.uncertainty.is_finite() {
                    Ok(1.0 / (p.uncertainty * p.uncertainty))
                } else {
                    Err(Error::invalid("weighted fit needs positive uncertainties"))
                }
            })
            .collect::<Result<_>>()?,
    };
    let xs: Vec<f64> = points
        .iter()
        .map(|p| 1.0 / (p.plaquettes as f64).sqrt())
        .collect();
    let ys: Vec<f64> = points.iter().map(|p| p.estimate).collect();

    let sw: f64 = weights.iter().sum();
    let xbar = xs.iter().zip(&weights).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ybar = ys.iter().zip(&weights).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in xs.iter().zip(&ys).zip(&weights) {
        sxx += w * (x - xbar) * (x - xbar);
        sxy += w * (x - xbar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;

    let n = points.len();
    let (intercept_stderr, slope_stderr) = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .zip(&weights)
            .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
            .sum();
        let s2 = rss / (n - 2) as f64;
        (
            (s2 * (1.0 / sw + xbar * xbar / sxx)).sqrt(),
            (s2 / sxx).sqrt(),
        )
    } else {
        (0.0, 0.0)
    };

    Ok(ScalingFit {
        intercept,
        slope,
        intercept_stderr,
        slope_stderr,
        points: points
            .iter()
            .zip(&xs)
            .map(|(p, &x)| (x, p.estimate, p.uncertainty))
            .collect(),
        weighting,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation of the centers; zero for a single estimate.
    pub stddev: f64,
    pub mean_half_width: f64,
}

pub fn aggregate_repetitions(estimates: &[FlipIntervalEstimate]) -> Result<RepetitionSummary> {
    let centers: Vec<f64> = estimates.iter().map(|e| e.center).collect();
    let (mean, stddev) = mean_stddev(&centers)?;
    Ok(RepetitionSummary {
        count: estimates.len(),
        mean,
        stddev,
        mean_half_width: estimates.iter().map(|e| e.half_width).sum::<f64>()
            / estimates.len() as f64,
    })
}

/// Mean and `n - 1` normalized standard deviation.
pub fn mean_stddev(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("no values to aggregate"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    use super::*;

    const XS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

    fn pts(data: &[(usize, f64)]) -> Vec<ScalingPoint> {
        data.iter()
            .map(|&(plaquettes, estimate)| ScalingPoint {
                plaquettes,
                estimate,
                uncertainty: 0.0,
            })
            .collect()
    }

    #[test]
    fn clean_single_flip() {
        let e = flip_interval(&XS, &[-1, -1, 1, 1]).unwrap();
        assert_eq!((e.x_lo, e.x_hi), (0.2, 0.3));
        assert!((e.center - 0.25).abs() < 1e-15);
        assert!((e.half_width - 0.05).abs() < 1e-15);
    }

    #[test]
    fn noisy_multi_flip() {
        let e = flip_interval(&XS, &[-1, 1, -1, 1]).unwrap();
        assert_eq!((e.x_lo, e.x_hi), (0.1, 0.4));
        assert!((e.center - 0.25).abs() < 1e-15);
        assert!((e.half_width - 0.15).abs() < 1e-15);
    }

    #[test]
    fn starting_from_positive_labels() {
        let e = flip_interval(&XS, &[1, -1, -1, -1]).unwrap();
        assert_eq!((e.x_lo, e.x_hi), (0.1, 0.2));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            flip_interval(&XS, &[-1; 4]),
            Err(Error::NoTransition(_))
        ));
        assert!(matches!(
            flip_interval(&XS, &[-1, 1, 1, -1]),
            Err(Error::NoTransition(_))
        ));
        assert!(matches!(
            flip_interval(&[], &[]),
            Err(Error::NoTransition(_))
        ));
        assert!(flip_interval(&[0.1, 0.1], &[-1, 1]).is_err());
        assert!(flip_interval(&XS, &[-1, 1]).is_err());
        assert!(flip_interval(&XS, &[-1, 0, 1, 1]).is_err());
    }

    #[test]
    fn noiseless_line_recovery() {
        let data: Vec<(usize, f64)> = [1, 2, 4, 6]
            .iter()
            .map(|&p| (p, 0.25 + 0.02 / (p as f64).sqrt()))
            .collect();
        let fit = fit_finite_size(&pts(&data), FitWeighting::Unweighted).unwrap();
        assert!((fit.intercept - 0.25).abs() < 1e-12);
        assert!((fit.slope - 0.02).abs() < 1e-12);
        assert!(fit.intercept_stderr < 1e-12);
        assert!((fit.predict(4) - 0.26).abs() < 1e-12);
    }

    #[test]
    fn published_qcnn_centers() {
        let fit = fit_finite_size(
            &pts(&[(1, 0.272), (2, 0.267), (4, 0.282), (6, 0.246)]),
            FitWeighting::Unweighted,
        )
        .unwrap();
        assert!((fit.intercept - 0.252).abs() < 2e-3, "{}", fit.intercept);
    }

    #[test]
    fn published_kmeans_centers() {
        let fit = fit_finite_size(
            &pts(&[(1, 0.262), (2, 0.272), (4, 0.282), (6, 0.277)]),
            FitWeighting::Unweighted,
        )
        .unwrap();
        assert!((0.28..=0.30).contains(&fit.intercept), "{}", fit.intercept);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_finite_size(&pts(&[(1, 0.2)]), FitWeighting::Unweighted).is_err());
        assert!(fit_finite_size(&pts(&[(2, 0.2), (2, 0.3)]), FitWeighting::Unweighted).is_err());
        assert!(fit_finite_size(&pts(&[(0, 0.2), (2, 0.3)]), FitWeighting::Unweighted).is_err());
        assert!(
            fit_finite_size(&pts(&[(1, 0.2), (2, 0.3)]), FitWeighting::InverseVariance).is_err()
        );
    }

    #[test]
    fn weighted_fit_favours_precise_points() {
        let mut p = pts(&[(1, 0.30), (2, 0.27), (4, 0.26), (6, 0.20)]);
        for (pt, u) in p.iter_mut().zip([0.001, 0.001, 0.001, 1.0]) {
            pt.uncertainty = u;
        }
        let w = fit_finite_size(&p, FitWeighting::InverseVariance).unwrap();
        let three = fit_finite_size(&p[..3], FitWeighting::Unweighted).unwrap();
        assert!((w.intercept - three.intercept).abs() < 1e-3);
    }

    #[test]
    fn aggregation() {
        let e = |c: f64| FlipIntervalEstimate::from_bounds(c - 0.01, c + 0.01).unwrap();
        let s = aggregate_repetitions(&[e(0.2), e(0.3)]).unwrap();
        assert!((s.mean - 0.25).abs() < 1e-15);
        assert!((s.stddev - 0.005f64.sqrt()).abs() < 1e-12);
        assert!((s.mean_half_width - 0.01).abs() < 1e-12);
        let s = aggregate_repetitions(&[e(0.27); 3]).unwrap();
        assert!(s.stddev < 1e-15);
        let s = aggregate_repetitions(&[e(0.27)]).unwrap();
        assert_eq!((s.mean, s.stddev), (e(0.27).center, 0.0));
        assert!(aggregate_repetitions(&[]).is_err());
    }

    fn sorted_xs(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.001f64..0.1, n).prop_map(|steps| {
            steps
                .iter()
                .scan(0.0, |acc, s| {
                    *acc += s;
                    Some(*acc)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn negation_with_reversal_is_a_symmetry(
            (xs, labels) in (2usize..20).prop_flat_map(|n| {
                (sorted_xs(n), proptest::collection::vec(prop_oneof![Just(-1i8), Just(1i8)], n))
            })
        ) {
            let mirrored_xs: Vec<f64> = xs.iter().rev().map(|x| -x).collect();
            let mirrored_labels: Vec<i8> = labels.iter().rev().map(|l| -l).collect();
            match (flip_interval(&xs, &labels), flip_interval(&mirrored_xs, &mirrored_labels)) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.x_lo, -b.x_hi);
                    prop_assert_eq!(a.x_hi, -b.x_lo);
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn monotone_labels_straddle_the_flip(
            (xs, k) in (2usize..20).prop_flat_map(|n| (sorted_xs(n), 1..n))
        ) {
            let labels: Vec<i8> = (0..xs.len()).map(|i| if i < k { -1 } else { 1 }).collect();
            let e = flip_interval(&xs, &labels).unwrap();
            prop_assert_eq!(e.half_width, 0.5 * (xs[k] - xs[k - 1]));
        }

        #[test]
        fn ols_matches_normal_equations(
            ys in proptest::collection::vec(0.1f64..0.4, 3..7)
        ) {
            let data: Vec<(usize, f64)> = ys.iter().enumerate().map(|(i, &y)| (i + 1, y)).collect();
            let fit = fit_finite_size(&pts(&data), FitWeighting::Unweighted).unwrap();
            let n = ys.len();
            let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { 1.0 / ((r + 1) as f64).sqrt() });
            let y = DVector::from_vec(ys.clone());
            let xtx = x.transpose() * &x;
            let inv = xtx.try_inverse().unwrap();
            let beta = &inv * x.transpose() * &y;
            let resid = &y - &x * &beta;
            let s2 = resid.norm_squared() / (n - 2) as f64;
            prop_assert!((fit.intercept - beta[0]).abs() < 1e-12);
            prop_assert!((fit.slope - beta[1]).abs() < 1e-12);
            prop_assert!((fit.intercept_stderr - (s2 * inv[(0, 0)]).sqrt()).abs() < 1e-12);
        }

        #[test]
        fn two_points_interpolate(a in 0.1f64..0.4, b in 0.1f64..0.4, p in 1usize..5, q in 5usize..10) {
            let fit = fit_finite_size(&pts(&[(p, a), (q, b)]), FitWeighting::Unweighted).unwrap();
            prop_assert!((fit.predict(p) - a).abs() < 1e-12);
            prop_assert!((fit.predict(q) - b).abs() < 1e-12);
            prop_assert_eq!(fit.intercept_stderr, 0.0);
        }
    }
}
