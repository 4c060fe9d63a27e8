//! Scan and ALR summary statistics over a score vector.
//!
//! The scan statistic is `M = sup_B S(B)`; the ALR statistic is
//! `U = 2 log((1/N) sum_B exp(S(B)))`, kept on the 2-log scale so chi-square
//! and G thresholds apply to it directly. The weighted variant replaces the
//! flat average by `sum_B w_B exp(S(B))` on the same scale, so uniform
//! weights reproduce `U` exactly.

use thiserror::Error;

use crate::likelihood::{ScoreVector, Sidedness};

#[derive(Debug, Error)]
pub enum StatError {
    #[error("score vector is empty")]
    Empty,
    #[error("weights length {got} does not match window count {expected}")]
    WeightsLength { got: usize, expected: usize },
    #[error("weights must all be positive (index {0})")]
    NonPositiveWeight(usize),
    #[error("weights sum to {0}, expected 1 within 1e-12")]
    WeightsNotNormalized(f64),
}

/// Which summary was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    Scan,
    Alr,
    WeightedAlr,
}

/// A computed summary statistic.
#[derive(Debug, Clone)]
pub struct TestStatistic {
    pub kind: StatKind,
    pub sidedness: Sidedness,
    pub value: f64,
    /// First window attaining the maximum (scan only; ties break by window
    /// order).
    pub argmax: Option<usize>,
    /// Family size N entering the average.
    pub n_windows: usize,
    /// Short description of the weights (weighted ALR only).
    pub weights: Option<String>,
}

/// log(sum exp(x)) with a global max shift; the result does not depend on
/// any partitioning of the input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Maximum score and first argmax.
pub fn scan_value(scores: &[f64]) -> (f64, usize) {
    assert!(!scores.is_empty());
    let mut best = scores[0];
    let mut arg = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > best {
            best = s;
            arg = i;
        }
    }
    (best, arg)
}

/// ALR value 2 log((1/N) sum exp(S_B)).
pub fn alr_value(scores: &[f64]) -> f64 {
    2.0 * (logsumexp(scores) - (scores.len() as f64).ln())
}

/// Weighted ALR value 2 log(sum w_B exp(S_B)); weights already validated.
pub fn weighted_alr_value(scores: &[f64], weights: &[f64]) -> f64 {
    let shifted: Vec<f64> = scores
        .iter()
        .zip(weights)
        .map(|(&s, &w)| s + w.ln())
        .collect();
    2.0 * logsumexp(&shifted)
}

/// The spatial scan statistic of a score vector.
pub fn scan_statistic(sv: &ScoreVector) -> Result<TestStatistic, StatError> {
    if sv.is_empty() {
        return Err(StatError::Empty);
    }
    let (value, arg) = scan_value(&sv.scores);
    Ok(TestStatistic {
        kind: StatKind::Scan,
        sidedness: sv.sidedness,
        value,
        argmax: Some(arg),
        n_windows: sv.len(),
        weights: None,
    })
}

fn validate_weights(weights: &[f64], n: usize) -> Result<(), StatError> {
    if weights.len() != n {
        return Err(StatError::WeightsLength {
            got: weights.len(),
            expected: n,
        });
    }
    if let Some(i) = weights.iter().position(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(StatError::NonPositiveWeight(i));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(StatError::WeightsNotNormalized(sum));
    }
    Ok(())
}

/// The ALR statistic; uniform weights when none are given.
pub fn alr_statistic(
    sv: &ScoreVector,
    weights: Option<&[f64]>,
) -> Result<TestStatistic, StatError> {
    if sv.is_empty() {
        return Err(StatError::Empty);
    }
    match weights {
        None => Ok(TestStatistic {
            kind: StatKind::Alr,
            sidedness: sv.sidedness,
            value: alr_value(&sv.scores),
            argmax: None,
            n_windows: sv.len(),
            weights: None,
        }),
        Some(w) => {
            validate_weights(w, sv.len())?;
            Ok(TestStatistic {
                kind: StatKind::WeightedAlr,
                sidedness: sv.sidedness,
                value: weighted_alr_value(&sv.scores, w),
                argmax: None,
                n_windows: sv.len(),
                weights: Some(format!("user-supplied ({} weights)", w.len())),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::Baseline;
    use proptest::prelude::*;

    fn sv(scores: Vec<f64>) -> ScoreVector {
        ScoreVector {
            scores,
            sidedness: Sidedness::Two,
            baseline: Baseline::FlatRate { p0_hat: 0.5 },
        }
    }

    #[test]
    fn scan_tie_breaks_by_order() {
        let t = scan_statistic(&sv(vec![0.0, 3.0, 3.0])).unwrap();
        assert_eq!(t.value, 3.0);
        assert_eq!(t.argmax, Some(1));
    }

    #[test]
    fn single_window() {
        let t = scan_statistic(&sv(vec![1.25])).unwrap();
        assert_eq!(t.value, 1.25);
        let u = alr_statistic(&sv(vec![1.25]), None).unwrap();
        assert!((u.value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn constant_scores_give_twice_the_score() {
        let scores = vec![0.7; 9];
        let u = alr_statistic(&sv(scores.clone()), None).unwrap();
        assert!((u.value - 1.4).abs() < 1e-12);
        let w = vec![1.0 / 9.0; 9];
        let uw = alr_statistic(&sv(scores), Some(&w)).unwrap();
        assert!((uw.value - 1.4).abs() < 1e-12);
    }

    #[test]
    fn weight_validation() {
        let s = sv(vec![1.0, 2.0]);
        assert!(matches!(
            alr_statistic(&s, Some(&[0.5, 0.4])),
            Err(StatError::WeightsNotNormalized(_))
        ));
        assert!(matches!(
            alr_statistic(&s, Some(&[1.0, 0.0])),
            Err(StatError::NonPositiveWeight(1))
        ));
        assert!(matches!(
            alr_statistic(&s, Some(&[1.0])),
            Err(StatError::WeightsLength { .. })
        ));
    }

    #[test]
    fn shift_stability() {
        let scores: Vec<f64> = (0..50).map(|i| i as f64 / 7.0).collect();
        let u = alr_value(&scores);
        let shifted: Vec<f64> = scores.iter().map(|s| s + 1000.0).collect();
        let u2 = alr_value(&shifted);
        assert!((u2 - (u + 2000.0)).abs() < 1e-6, "{u2} vs {}", u + 2000.0);
    }

    proptest! {
        #[test]
        fn sandwich_bound(scores in proptest::collection::vec(0.0f64..30.0, 1..200)) {
            let (m, _) = scan_value(&scores);
            let u = alr_value(&scores);
            let n = scores.len() as f64;
            prop_assert!(2.0 * (m - n.ln()) <= u + 1e-9);
            prop_assert!(u <= 2.0 * m + 1e-9);
        }

        #[test]
        fn uniform_weights_match_plain_alr(scores in proptest::collection::vec(0.0f64..20.0, 1..100)) {
            let n = scores.len();
            let w = vec![1.0 / n as f64; n];
            let a = alr_value(&scores);
            let b = weighted_alr_value(&scores, &w);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_each_score(scores in proptest::collection::vec(0.0f64..10.0, 2..50),
                                  idx in 0usize..49, bump in 0.01f64..2.0) {
            let idx = idx % scores.len();
            let (m0, _) = scan_value(&scores);
            let u0 = alr_value(&scores);
            let mut more = scores.clone();
            more[idx] += bump;
            let (m1, _) = scan_value(&more);
            let u1 = alr_value(&more);
            prop_assert!(u1 > u0);
            prop_assert!(m1 >= m0);
        }
    }
}
