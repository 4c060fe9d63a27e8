//! P-value backends: analytic tails, permutation Monte Carlo, risk-adjusted
//! multinomial Monte Carlo, and an exact small-instance enumeration oracle.
//!
//! Analytic backends implement the moderate-deviation approximation
//! `p = k * P{chisq_1 >= c} / 2` and its conservative companion based on the
//! tail `1 - G(x) = sqrt(2 exp(-x) / (pi x))` for `x >= x0`, where
//! `x0 ~= 0.42` solves `2 exp(-x) = pi x`. Monte Carlo backends return the
//! estimate `(1 + #{replicate >= observed}) / (1 + L)` and are deterministic
//! for a fixed `(seed, L)` on any number of threads, because each replicate
//! owns its own RNG stream.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::PointDataset;
use crate::likelihood::{self, Sidedness};
use crate::logistic::LogisticFit;
use crate::rng::{multinomial_counts, replicate_rng};
use crate::stats::{self, StatKind};
use crate::windows::WindowSet;

#[derive(Debug, Error)]
pub enum PValueError {
    #[error("replicate count must be >= 1")]
    NoReplicates,
    #[error("enumeration too large: C(J, I) = {comb} exceeds limit {limit}")]
    TooManyAssignments { comb: u128, limit: u128 },
    #[error("risk-adjusted Monte Carlo is defined for two-sided statistics only")]
    RiskRequiresTwoSided,
    #[error("weighted statistics are not supported by this backend")]
    WeightsUnsupported,
    #[error("null model fit did not converge")]
    FitNotConverged,
    #[error(transparent)]
    Score(#[from] likelihood::ScoreError),
    #[error(transparent)]
    Stat(#[from] stats::StatError),
    #[error(transparent)]
    Window(#[from] crate::windows::WindowError),
}

/// How a p-value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Chi2,
    GDist,
    McPermutation,
    McRiskAdjusted,
    ExactEnumeration,
}

/// A p-value with its provenance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PValueResult {
    pub method: PValueMethod,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_replicates: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_exceed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Binomial standard error sqrt(p(1-p)/L) for Monte Carlo estimates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

impl PValueResult {
    fn analytic(method: PValueMethod, p: f64) -> Self {
        PValueResult {
            method,
            p,
            mc_replicates: None,
            mc_exceed: None,
            seed: None,
            std_error: None,
        }
    }

    fn monte_carlo(method: PValueMethod, exceed: u64, replicates: u64, seed: u64) -> Self {
        let p = (1 + exceed) as f64 / (1 + replicates) as f64;
        PValueResult {
            method,
            p,
            mc_replicates: Some(replicates),
            mc_exceed: Some(exceed),
            seed: Some(seed),
            std_error: Some((p * (1.0 - p) / replicates as f64).sqrt()),
        }
    }
}

/// Upper tail of the chi-square distribution with one degree of freedom,
/// `P{chisq_1 >= c} = erfc(sqrt(c/2))`.
pub fn chi2_tail(c: f64) -> f64 {
    assert!(c >= 0.0, "chi-square threshold must be >= 0");
    libm::erfc((c / 2.0).sqrt())
}

/// Inverse of [`chi2_tail`]: the c with `P{chisq_1 >= c} = tail`.
pub fn chi2_quantile(tail: f64) -> f64 {
    assert!(tail > 0.0 && tail <= 1.0);
    bisect_decreasing(chi2_tail, tail, 0.0, 400.0)
}

/// The crossing point x0 of `2 exp(-x) = pi x`, below which the G tail is 1.
pub fn g_x0() -> f64 {
    static X0: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *X0.get_or_init(|| {
        // 2 exp(-x) - pi x is strictly decreasing on [0, 1]
        let f = |x: f64| 2.0 * (-x).exp() - std::f64::consts::PI * x;
        let (mut lo, mut hi) = (0.1f64, 1.0f64);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Upper tail 1 - G(c) of the G distribution; equal to 1 below x0.
pub fn g_tail(c: f64) -> f64 {
    assert!(c >= 0.0, "G threshold must be >= 0");
    if c < g_x0() {
        1.0
    } else {
        (2.0 * (-c).exp() / (std::f64::consts::PI * c)).sqrt()
    }
}

/// Inverse of [`g_tail`] on (0, 1): bisection on [x0, 200] to 1e-10.
pub fn g_quantile(tail: f64) -> f64 {
    assert!(tail > 0.0 && tail <= 1.0);
    if tail >= 1.0 {
        return g_x0();
    }
    bisect_decreasing(g_tail, tail, g_x0(), 200.0)
}

fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Moderate-deviation p-value `min(1, k P{chisq_1 >= c} / 2)`.
pub fn chi2_pvalue(c: f64, k: Sidedness) -> PValueResult {
    let p = (k.k() as f64 * chi2_tail(c) / 2.0).min(1.0);
    PValueResult::analytic(PValueMethod::Chi2, p)
}

/// Conservative p-value `min(1, k (1 - G(c)) / 2)` from the G tail.
pub fn gdist_pvalue(c: f64, k: Sidedness) -> PValueResult {
    let p = (k.k() as f64 * g_tail(c) / 2.0).min(1.0);
    PValueResult::analytic(PValueMethod::GDist, p)
}

/// The statistic a Monte Carlo backend recomputes per replicate.
#[derive(Debug, Clone)]
pub struct StatPipeline {
    pub kind: StatKind,
    pub sidedness: Sidedness,
    /// Weights for the weighted ALR; must match the window count.
    pub weights: Option<Vec<f64>>,
}

impl StatPipeline {
    pub fn new(kind: StatKind, sidedness: Sidedness) -> Self {
        StatPipeline {
            kind,
            sidedness,
            weights: None,
        }
    }

    /// Statistic value from a score vector.
    pub fn value(&self, scores: &[f64]) -> f64 {
        match (self.kind, &self.weights) {
            (StatKind::Scan, _) => stats::scan_value(scores).0,
            (StatKind::Alr, _) | (StatKind::WeightedAlr, None) => stats::alr_value(scores),
            (StatKind::WeightedAlr, Some(w)) => stats::weighted_alr_value(scores, w),
        }
    }

    fn unadjusted_value(&self, ws: &WindowSet, labels: &[bool], i: u64, j: u64) -> f64 {
        let m = ws
            .recount_cases(labels)
            .expect("labels validated by caller");
        let scores = likelihood::scores_from_counts(&ws.subject_counts(), &m, i, j, self.sidedness);
        self.value(&scores)
    }
}

/// Generic permutation Monte Carlo: shuffles `labels` with one RNG stream per
/// replicate and counts statistics at least as large as `observed`.
pub fn permutation_pvalue_with<F>(
    labels: &[bool],
    observed: f64,
    stat_fn: F,
    replicates: u64,
    seed: u64,
) -> Result<PValueResult, PValueError>
where
    F: Fn(&[bool]) -> f64 + Sync,
{
    if replicates == 0 {
        return Err(PValueError::NoReplicates);
    }
    let exceed: u64 = (1..=replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let mut perm = labels.to_vec();
            perm.shuffle(&mut rng);
            u64::from(stat_fn(&perm) >= observed)
        })
        .sum();
    Ok(PValueResult::monte_carlo(
        PValueMethod::McPermutation,
        exceed,
        replicates,
        seed,
    ))
}

/// Conditional p-value of an unadjusted scan/ALR statistic by label
/// permutation, given the case total and the location configuration.
pub fn permutation_pvalue(
    data: &PointDataset,
    ws: &WindowSet,
    pipeline: &StatPipeline,
    replicates: u64,
    seed: u64,
) -> Result<PValueResult, PValueError> {
    let (i, j) = (data.num_cases() as u64, data.num_subjects() as u64);
    if i == 0 || i >= j {
        return Err(likelihood::ScoreError::DegenerateNull { i, j }.into());
    }
    if let Some(w) = &pipeline.weights {
        crate::stats::alr_statistic(
            &likelihood::glr_scores(ws, i, j, pipeline.sidedness)?,
            Some(w),
        )?;
    }
    let observed = pipeline.unadjusted_value(ws, data.cases(), i, j);
    permutation_pvalue_with(
        data.cases(),
        observed,
        |labels| pipeline.unadjusted_value(ws, labels, i, j),
        replicates,
        seed,
    )
}

fn binomial_coefficient(n: u64, k: u64, limit: u128) -> Result<u128, PValueError> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
        if acc > limit.saturating_mul(4) {
            return Err(PValueError::TooManyAssignments { comb: acc, limit });
        }
    }
    if acc > limit {
        return Err(PValueError::TooManyAssignments { comb: acc, limit });
    }
    Ok(acc)
}

/// Exact conditional p-value by enumerating all placements of the I cases
/// among the J subjects. Feasible for C(J, I) <= 1e6.
///
/// Returns the plain fraction `#{assignments >= observed} / C(J, I)`: unlike
/// the Monte Carlo estimator there is no `+1` correction, so for large L the
/// Monte Carlo estimate converges to `(fraction * C + 1) / (C + 1)` of this
/// oracle under exchangeable ties.
pub fn exact_permutation_oracle(
    data: &PointDataset,
    ws: &WindowSet,
    pipeline: &StatPipeline,
    observed: f64,
) -> Result<PValueResult, PValueError> {
    let (i, j) = (data.num_cases() as u64, data.num_subjects() as u64);
    if i == 0 || i >= j {
        return Err(likelihood::ScoreError::DegenerateNull { i, j }.into());
    }
    let total = binomial_coefficient(j, i, 1_000_000)?;
    let mut labels = vec![false; j as usize];
    let mut comb: Vec<usize> = (0..i as usize).collect();
    let mut hits: u128 = 0;
    let mut count: u128 = 0;
    loop {
        labels.iter_mut().for_each(|l| *l = false);
        for &c in &comb {
            labels[c] = true;
        }
        if pipeline.unadjusted_value(ws, &labels, i, j) >= observed {
            hits += 1;
        }
        count += 1;
        // advance the combination in lexicographic order
        let mut pos = comb.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if comb[pos] != j as usize - comb.len() + pos {
                comb[pos] += 1;
                for t in pos + 1..comb.len() {
                    comb[t] = comb[t - 1] + 1;
                }
                pos = usize::MAX;
                break;
            }
        }
        if pos != usize::MAX {
            break;
        }
    }
    debug_assert_eq!(count, total);
    let mut out =
        PValueResult::analytic(PValueMethod::ExactEnumeration, hits as f64 / total as f64);
    out.mc_replicates = Some(total as u64);
    out.mc_exceed = Some(hits as u64);
    Ok(out)
}

/// Per-location expected risks `eta_j = sum of fitted p_i at location j`.
pub fn expected_risks_by_site(ws: &WindowSet, fit: &LogisticFit) -> Vec<f64> {
    (0..ws.num_sites())
        .map(|s| {
            ws.site_subjects(s)
                .iter()
                .map(|&i| fit.fitted[i as usize])
                .sum()
        })
        .collect()
}

/// Risk-adjusted Monte Carlo p-value: location case counts are resampled
/// from a multinomial with I trials and probabilities `eta_j / I`, and the
/// adjusted statistic (scan by default, optionally ALR) is recomputed from
/// the adjusted two-sided scores per replicate.
pub fn risk_adjusted_mc_pvalue(
    data: &PointDataset,
    ws: &WindowSet,
    fit0: &LogisticFit,
    kind: StatKind,
    replicates: u64,
    seed: u64,
) -> Result<PValueResult, PValueError> {
    if replicates == 0 {
        return Err(PValueError::NoReplicates);
    }
    if !fit0.converged {
        return Err(PValueError::FitNotConverged);
    }
    if kind == StatKind::WeightedAlr {
        return Err(PValueError::WeightsUnsupported);
    }
    let i_total = data.num_cases() as u64;
    let eta = expected_risks_by_site(ws, fit0);
    // validates eta > 0, sum eta = I, and window/site alignment
    let observed_scores = likelihood::adjusted_scores(ws, &eta, i_total)?;
    let eta_b = ws.sum_site_values(&eta)?;
    let pipeline = StatPipeline::new(kind, Sidedness::Two);
    let observed = pipeline.value(&observed_scores.scores);
    let probs: Vec<f64> = eta.iter().map(|&e| e / i_total as f64).collect();
    let i_f = i_total as f64;
    let exceed: u64 = (1..=replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let m_site = multinomial_counts(&mut rng, i_total, &probs);
            let m_b = ws
                .sum_site_values(&m_site)
                .expect("alignment checked before the loop");
            let scores: Vec<f64> = m_b
                .iter()
                .zip(&eta_b)
                .map(|(&m, &e)| likelihood::adjusted_score_value(m as f64, e, i_f))
                .collect();
            u64::from(pipeline.value(&scores) >= observed)
        })
        .sum();
    Ok(PValueResult::monte_carlo(
        PValueMethod::McRiskAdjusted,
        exceed,
        replicates,
        seed,
    ))
}
