//! Per-window log generalized likelihood ratio scores.
//!
//! With `p0 = I/J` the null MLE of the case rate, the building block is
//!
//! ```text
//! phi(p) = p log(p/p0) + (1-p) log((1-p)/(1-p0))
//! ```
//!
//! under the conventions `0 log 0 = 0` and `0^0 = 1`. The two-sided window
//! score is
//!
//! ```text
//! S2(B) = n_B phi(m_B/n_B) + (J - n_B) phi((I - m_B)/(J - n_B))
//! ```
//!
//! and the one-sided score keeps `S2(B)` only when the inside rate exceeds
//! `p0`. Risk-adjusted scores compare observed window case counts against a
//! fitted baseline `eta_B` instead of the flat rate.

use thiserror::Error;

use crate::windows::WindowSet;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("degenerate null MLE: need 0 < I < J, got I = {i}, J = {j}")]
    DegenerateNull { i: u64, j: u64 },
    #[error("window counts inconsistent: window {window} has m = {m} > min(n = {n}, I = {i})")]
    BadCounts {
        window: usize,
        m: u64,
        n: u64,
        i: u64,
    },
    #[error("expected risks must be positive and finite (location {0})")]
    BadRisk(usize),
    #[error("expected risks sum to {got}, should equal I = {expected} (tolerance {tol})")]
    RiskSum { got: f64, expected: f64, tol: f64 },
    #[error("window {window}: degenerate baseline (eta_B = {eta} with I = {i}, m_B = {m})")]
    DegenerateBaseline {
        window: usize,
        eta: f64,
        i: u64,
        m: u64,
    },
    #[error(transparent)]
    Window(#[from] crate::windows::WindowError),
}

/// One- or two-sided alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    One,
    Two,
}

impl Sidedness {
    /// The k of the tail formula k * P{chisq_1 >= c} / 2.
    pub fn k(self) -> u32 {
        match self {
            Sidedness::One => 1,
            Sidedness::Two => 2,
        }
    }
}

/// What the scores were measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// Flat null rate p0 = I/J.
    FlatRate { p0_hat: f64 },
    /// Per-location expected risks from a fitted null model.
    FittedRisks,
    /// Per-window logistic refits.
    LogisticRefit,
    /// Quadratic (efficient score) approximation to the refits.
    LogisticQuadratic,
}

/// Per-window scores aligned with a [`WindowSet`].
#[derive(Debug, Clone)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub sidedness: Sidedness,
    pub baseline: Baseline,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// x log(x/y) with the 0 log 0 convention; callers keep y > 0 when x > 0.
#[inline]
fn xlogratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// The convex rate-divergence phi of the score displays.
///
/// Requires `0 <= p <= 1` and `0 < p0 < 1`; zero exactly at `p = p0`.
pub fn phi(p: f64, p0: f64) -> f64 {
    assert!(p0 > 0.0 && p0 < 1.0, "p0 must lie strictly inside (0,1)");
    assert!((0.0..=1.0).contains(&p), "p must lie in [0,1]");
    xlogratio(p, p0) + xlogratio(1.0 - p, 1.0 - p0)
}

/// Two-sided score from raw counts; zero when the window is empty or full.
#[inline]
pub fn score_two_sided(m: u64, n: u64, i_total: u64, j_total: u64) -> f64 {
    debug_assert!(m <= n && n <= j_total && m <= i_total);
    if n == 0 || n == j_total {
        return 0.0;
    }
    let p0 = i_total as f64 / j_total as f64;
    let inside = phi(m as f64 / n as f64, p0);
    let out_n = (j_total - n) as f64;
    let outside = phi((i_total - m) as f64 / out_n, p0);
    n as f64 * inside + out_n * outside
}

/// One-sided score: the two-sided value gated on `m/n > I/J` (compared in
/// exact integer arithmetic).
#[inline]
pub fn score_one_sided(m: u64, n: u64, i_total: u64, j_total: u64) -> f64 {
    if n == 0 || m * j_total <= i_total * n {
        return 0.0;
    }
    score_two_sided(m, n, i_total, j_total)
}

#[inline]
pub fn score_from_counts(m: u64, n: u64, i_total: u64, j_total: u64, k: Sidedness) -> f64 {
    match k {
        Sidedness::One => score_one_sided(m, n, i_total, j_total),
        Sidedness::Two => score_two_sided(m, n, i_total, j_total),
    }
}

/// Scores a whole count vector; the low-level path used by Monte Carlo loops.
pub fn scores_from_counts(
    n: &[u32],
    m: &[u32],
    i_total: u64,
    j_total: u64,
    k: Sidedness,
) -> Vec<f64> {
    n.iter()
        .zip(m)
        .map(|(&n_b, &m_b)| score_from_counts(m_b as u64, n_b as u64, i_total, j_total, k))
        .collect()
}

/// GLR scores for every window of a family.
pub fn glr_scores(
    ws: &WindowSet,
    i_total: u64,
    j_total: u64,
    k: Sidedness,
) -> Result<ScoreVector, ScoreError> {
    if i_total == 0 || i_total >= j_total {
        return Err(ScoreError::DegenerateNull {
            i: i_total,
            j: j_total,
        });
    }
    for (widx, w) in ws.windows().iter().enumerate() {
        let (m, n) = (w.m() as u64, w.n() as u64);
        if m > n || m > i_total || n > j_total {
            return Err(ScoreError::BadCounts {
                window: widx,
                m,
                n,
                i: i_total,
            });
        }
    }
    let scores = scores_from_counts(&ws.subject_counts(), &ws.case_counts(), i_total, j_total, k);
    Ok(ScoreVector {
        scores,
        sidedness: k,
        baseline: Baseline::FlatRate {
            p0_hat: i_total as f64 / j_total as f64,
        },
    })
}

/// Risk-adjusted two-sided score of one window: observed `m` against
/// baseline `eta` out of `i_total` cases.
#[inline]
pub fn adjusted_score_value(m: f64, eta: f64, i_total: f64) -> f64 {
    xlogratio(m, eta) + xlogratio(i_total - m, i_total - eta)
}

/// Risk-adjusted scores S~2(B) against per-location expected risks.
///
/// `eta_by_site[j]` is the summed fitted risk at location j; the risks must
/// total I (the fit's intercept score equation guarantees this).
pub fn adjusted_scores(
    ws: &WindowSet,
    eta_by_site: &[f64],
    i_total: u64,
) -> Result<ScoreVector, ScoreError> {
    for (j, &e) in eta_by_site.iter().enumerate() {
        if !(e.is_finite() && e > 0.0) {
            return Err(ScoreError::BadRisk(j));
        }
    }
    let total: f64 = eta_by_site.iter().sum();
    let tol = 1e-6 * i_total as f64;
    if (total - i_total as f64).abs() > tol {
        return Err(ScoreError::RiskSum {
            got: total,
            expected: i_total as f64,
            tol,
        });
    }
    let eta_b = ws.sum_site_values(eta_by_site)?;
    let i_f = i_total as f64;
    let mut scores = Vec::with_capacity(ws.len());
    for (widx, w) in ws.windows().iter().enumerate() {
        let m = w.m() as f64;
        let eta = eta_b[widx];
        if (eta <= 0.0 && m > 0.0) || (eta >= i_f && m < i_f) {
            return Err(ScoreError::DegenerateBaseline {
                window: widx,
                eta,
                i: i_total,
                m: w.m() as u64,
            });
        }
        scores.push(adjusted_score_value(m, eta, i_f));
    }
    Ok(ScoreVector {
        scores,
        sidedness: Sidedness::Two,
        baseline: Baseline::FittedRisks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PointDataset;
    use crate::windows::{build_windows, WindowSpec};
    use proptest::prelude::*;

    const TIGHT: f64 = 1e-12;

    #[test]
    fn phi_at_null_rate_is_zero() {
        for p0 in [0.1, 0.3, 0.5, 0.9] {
            assert_eq!(phi(p0, p0), 0.0);
        }
    }

    #[test]
    fn phi_boundary_values() {
        // second term vanishes by the 0 log 0 convention
        assert!((phi(1.0, 0.3) - 1.203_972_804_325_936).abs() < TIGHT);
        assert!((phi(0.0, 0.3) - (0.7f64).recip().ln()).abs() < TIGHT);
    }

    #[test]
    fn phi_reference_value() {
        // high-precision evaluation of the divergence at p = 3/4, p0 = 1/2
        assert!((phi(0.75, 0.5) - 0.130_812_035_941_137).abs() < TIGHT);
    }

    #[test]
    #[should_panic]
    fn phi_rejects_bad_p0() {
        phi(0.5, 1.0);
    }

    #[test]
    fn two_sided_score_reference() {
        // J=10, I=5, n=4, m=4: 4 phi(1; .5) + 6 phi(1/6; .5)
        let s = score_two_sided(4, 4, 5, 10);
        assert!((s - 4.228_104_552_401_625).abs() < 1e-12, "{s}");
        // indicator active, so the one-sided score agrees
        assert_eq!(score_one_sided(4, 4, 5, 10), s);
        // m/n = 0.25 <= 0.5 kills the one-sided score
        assert_eq!(score_one_sided(1, 4, 5, 10), 0.0);
    }

    #[test]
    fn empty_and_full_windows_score_zero() {
        assert_eq!(score_two_sided(0, 0, 5, 10), 0.0);
        assert_eq!(score_two_sided(5, 10, 5, 10), 0.0);
        assert_eq!(score_one_sided(5, 10, 5, 10), 0.0);
    }

    #[test]
    fn adjusted_score_cases() {
        // m = eta: both logs vanish
        assert_eq!(adjusted_score_value(4.0, 4.0, 10.0), 0.0);
        // m = I, eta = I/2: second term is 0 log 0
        let s = adjusted_score_value(10.0, 5.0, 10.0);
        assert!((s - 10.0 * (2f64).ln()).abs() < TIGHT);
        // independent evaluation of 7 log(7/4) + 3 log(3/6)
        let s = adjusted_score_value(7.0, 4.0, 10.0);
        assert!((s - 1.837_868_973_868_123).abs() < TIGHT, "{s}");
    }

    #[test]
    fn glr_scores_rejects_degenerate_totals() {
        let data = PointDataset::new(2, vec![0.0; 8], vec![true; 4], None).unwrap();
        let ws = build_windows(&data, &WindowSpec::all_pairs(0.0)).unwrap();
        assert!(matches!(
            glr_scores(&ws, 4, 4, Sidedness::Two),
            Err(ScoreError::DegenerateNull { .. })
        ));
        assert!(matches!(
            glr_scores(&ws, 0, 4, Sidedness::Two),
            Err(ScoreError::DegenerateNull { .. })
        ));
    }

    fn random_counts() -> impl Strategy<Value = (u64, u64, u64, u64)> {
        // (J, I, n, m) with 0 < I < J, 0 <= n <= J, m <= min(n, I), I-m <= J-n
        (2u64..200).prop_flat_map(|j| {
            (1u64..j).prop_flat_map(move |i| {
                (0u64..=j).prop_flat_map(move |n| {
                    let lo = i.saturating_sub(j - n);
                    let hi = n.min(i);
                    (lo..=hi).prop_map(move |m| (j, i, n, m))
                })
            })
        })
    }

    proptest! {
        #[test]
        fn complement_symmetry((j, i, n, m) in random_counts()) {
            let s = score_two_sided(m, n, i, j);
            let sc = score_two_sided(i - m, j - n, i, j);
            prop_assert!((s - sc).abs() <= 1e-10 * (1.0 + s.abs()));
        }

        #[test]
        fn decomposition_identity((j, i, n, m) in random_counts()) {
            // exp(S2(B)) = exp(S1(B)) + exp(S1(complement)) - 1
            let s2 = score_two_sided(m, n, i, j);
            let s1 = score_one_sided(m, n, i, j);
            let s1c = score_one_sided(i - m, j - n, i, j);
            let lhs = s2.exp();
            let rhs = s1.exp() + s1c.exp() - 1.0;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "J={j} I={i} n={n} m={m}: {lhs} vs {rhs}");
        }

        #[test]
        fn scores_nonnegative_and_zero_iff_null_rate((j, i, n, m) in random_counts()) {
            let s = score_two_sided(m, n, i, j);
            prop_assert!(s >= 0.0);
            if n > 0 && n < j {
                let at_null = m * j == i * n;
                prop_assert_eq!(s == 0.0, at_null, "J={} I={} n={} m={}", j, i, n, m);
            }
        }

        #[test]
        fn phi_convexity(a in 0.0f64..=1.0, b in 0.0f64..=1.0, lam in 0.0f64..=1.0,
                         p0 in 0.01f64..=0.99) {
            let mix = lam * a + (1.0 - lam) * b;
            let lhs = phi(mix.clamp(0.0, 1.0), p0);
            let rhs = lam * phi(a, p0) + (1.0 - lam) * phi(b, p0);
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
