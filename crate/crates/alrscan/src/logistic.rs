//! Logistic null-model fitting and covariate-adjusted window scores.
//!
//! The null model is `p_i = (1 + exp(-beta' u_i))^{-1}` with `u_i1 = 1`; a
//! window alternative adds `theta` on the linear scale for subjects inside
//! the window. Window scores are log likelihood ratios between the refitted
//! alternative and the null fit. Two paths are provided:
//!
//! * full per-window refits (the default), and
//! * a quadratic approximation: the squared efficient score of `theta` at
//!   `theta = 0`, normalized by its variance after projecting the window
//!   indicator out of the covariate span under the weight inner product
//!   `(a, b)_w = sum_i a_i b_i w_i`, `w_i = p_i (1 - p_i)`.
//!
//! Fitting is damped Newton from a fixed start, so a fit is a deterministic
//! function of the data. Divergence of a coefficient past |30| is declared
//! separation; a window refit that fails falls back to its quadratic score
//! and is flagged.

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{Covariates, PointDataset};
use crate::likelihood::{Baseline, ScoreVector, Sidedness};
use crate::windows::WindowSet;

const MAX_ITER: u32 = 50;
const GRAD_TOL_PER_SUBJECT: f64 = 1e-9;
// The Newton decrement g'd bounds the remaining likelihood gap. Requiring it
// besides the gradient rule keeps boundary windows (no cases inside, theta
// running off to -inf) iterating until their score is exact to ~1e-9, where
// the gradient shrinks only linearly and would stop too early on its own.
const DECREMENT_TOL: f64 = 1e-9;
const SEPARATION_BOUND: f64 = 30.0;
const MAX_STEP: f64 = 5.0;

#[derive(Debug, Error)]
pub enum LogisticError {
    #[error("degenerate labels: need 0 < I < J, got I = {i}, J = {j}")]
    Degenerate { i: usize, j: usize },
    #[error("separation detected: coefficient {coef} diverged to {value}")]
    Separation { coef: usize, value: f64 },
    #[error("no convergence within {iterations} iterations (gradient max-norm {grad_norm})")]
    NoConvergence { iterations: u32, grad_norm: f64 },
    #[error("observed information is singular (collinear columns)")]
    SingularInformation,
    #[error("null fit has not converged")]
    NullNotConverged,
    #[error("window set is over {ws} subjects but the dataset has {data}")]
    DimensionMismatch { ws: usize, data: usize },
    #[error(transparent)]
    Window(#[from] crate::windows::WindowError),
}

/// A fitted logistic null model.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    /// Coefficients, intercept first.
    pub beta: Vec<f64>,
    /// Fitted probabilities per subject.
    pub fitted: Vec<f64>,
    /// IRLS weights p(1-p) per subject.
    pub weights: Vec<f64>,
    pub converged: bool,
    pub iterations: u32,
    /// Final gradient max-norm.
    pub grad_norm: f64,
    pub log_likelihood: f64,
}

/// Design matrix view: optional covariates (virtual intercept when absent),
/// optionally augmented with a window indicator as the last column.
#[derive(Clone, Copy)]
struct DesignView<'a> {
    rows: usize,
    cov: Option<&'a Covariates>,
    indicator: Option<&'a [bool]>,
}

impl<'a> DesignView<'a> {
    fn base(data: &'a PointDataset) -> Self {
        DesignView {
            rows: data.num_subjects(),
            cov: data.covariates(),
            indicator: None,
        }
    }

    fn with_indicator(data: &'a PointDataset, indicator: &'a [bool]) -> Self {
        DesignView {
            rows: data.num_subjects(),
            cov: data.covariates(),
            indicator: Some(indicator),
        }
    }

    fn base_cols(&self) -> usize {
        self.cov.map(|c| c.cols()).unwrap_or(1)
    }

    fn cols(&self) -> usize {
        self.base_cols() + usize::from(self.indicator.is_some())
    }

    #[inline]
    fn value(&self, i: usize, k: usize) -> f64 {
        let base = self.base_cols();
        if k < base {
            match self.cov {
                Some(c) => c.value(i, k),
                None => 1.0,
            }
        } else {
            f64::from(self.indicator.unwrap()[i])
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
#[inline]
fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Solves `a x = b` for symmetric positive definite `a` (in place, row-major).
fn solve_spd(a: &mut [f64], b: &mut [f64], r: usize) -> Option<()> {
    for i in 0..r {
        for k in 0..=i {
            let mut sum = a[i * r + k];
            for t in 0..k {
                sum -= a[i * r + t] * a[k * r + t];
            }
            if i == k {
                if sum <= 0.0 {
                    return None;
                }
                a[i * r + i] = sum.sqrt();
            } else {
                a[i * r + k] = sum / a[k * r + k];
            }
        }
    }
    for i in 0..r {
        let mut s = b[i];
        for t in 0..i {
            s -= a[i * r + t] * b[t];
        }
        b[i] = s / a[i * r + i];
    }
    for i in (0..r).rev() {
        let mut s = b[i];
        for t in i + 1..r {
            s -= a[t * r + i] * b[t];
        }
        b[i] = s / a[i * r + i];
    }
    Some(())
}

struct NewtonFit {
    beta: Vec<f64>,
    fitted: Vec<f64>,
    iterations: u32,
    grad_norm: f64,
    log_likelihood: f64,
}

fn log_likelihood(
    design: &DesignView,
    labels: &[bool],
    offsets: Option<&[f64]>,
    beta: &[f64],
) -> f64 {
    let mut ll = 0.0;
    for i in 0..design.rows {
        let mut z: f64 = offsets.map(|o| o[i]).unwrap_or(0.0);
        for (k, &b) in beta.iter().enumerate() {
            z += design.value(i, k) * b;
        }
        ll += f64::from(labels[i]) * z - log1pexp(z);
    }
    ll
}

/// Damped Newton ascent of the Bernoulli log likelihood, from `init`.
fn newton(
    design: &DesignView,
    labels: &[bool],
    offsets: Option<&[f64]>,
    init: &[f64],
) -> Result<NewtonFit, LogisticError> {
    let (j, r) = (design.rows, design.cols());
    let tol = GRAD_TOL_PER_SUBJECT * j as f64;
    let mut beta = init.to_vec();
    let mut fitted = vec![0.0; j];
    let mut ll = log_likelihood(design, labels, offsets, &beta);
    let mut grad = vec![0.0; r];
    let mut hess = vec![0.0; r * r];
    let mut grad_norm = f64::INFINITY;

    for iter in 0..=MAX_ITER {
        for i in 0..j {
            let mut z: f64 = offsets.map(|o| o[i]).unwrap_or(0.0);
            for (k, &b) in beta.iter().enumerate() {
                z += design.value(i, k) * b;
            }
            fitted[i] = sigmoid(z);
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..j {
            let resid = f64::from(labels[i]) - fitted[i];
            for (k, g) in grad.iter_mut().enumerate() {
                *g += design.value(i, k) * resid;
            }
        }
        grad_norm = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        hess.iter_mut().for_each(|h| *h = 0.0);
        for i in 0..j {
            let w = fitted[i] * (1.0 - fitted[i]);
            if w == 0.0 {
                continue;
            }
            for a in 0..r {
                let ua = design.value(i, a) * w;
                if ua == 0.0 {
                    continue;
                }
                for b in a..r {
                    hess[a * r + b] += ua * design.value(i, b);
                }
            }
        }
        for a in 0..r {
            for b in 0..a {
                hess[a * r + b] = hess[b * r + a];
            }
        }
        let mut delta = grad.clone();
        let mut chol = hess.clone();
        if solve_spd(&mut chol, &mut delta, r).is_none() {
            return Err(LogisticError::SingularInformation);
        }
        let decrement: f64 = grad.iter().zip(&delta).map(|(&g, &d)| g * d).sum();
        if grad_norm < tol && decrement <= DECREMENT_TOL {
            return Ok(NewtonFit {
                beta,
                fitted,
                iterations: iter,
                grad_norm,
                log_likelihood: ll,
            });
        }
        if iter == MAX_ITER {
            break;
        }
        let dmax = delta.iter().fold(0.0f64, |a, &d| a.max(d.abs()));
        if dmax > MAX_STEP {
            let scale = MAX_STEP / dmax;
            delta.iter_mut().for_each(|d| *d *= scale);
        }
        // accept the first step that does not lose likelihood beyond float
        // noise; near the optimum true gains underflow the comparison
        let noise = 1e-12 * (1.0 + ll.abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta
                .iter()
                .zip(&delta)
                .map(|(&b, &d)| b + step * d)
                .collect();
            let cand_ll = log_likelihood(design, labels, offsets, &cand);
            if cand_ll >= ll - noise {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        for (k, &b) in beta.iter().enumerate() {
            if b.abs() > SEPARATION_BOUND {
                return Err(LogisticError::Separation { coef: k, value: b });
            }
        }
    }
    Err(LogisticError::NoConvergence {
        iterations: MAX_ITER,
        grad_norm,
    })
}

/// Fits the logistic null model (theta = 0). Intercept-only when the dataset
/// carries no covariates. Deterministic: starts from beta = 0 with a fixed
/// convergence rule.
pub fn fit_logistic_null(data: &PointDataset) -> Result<LogisticFit, LogisticError> {
    let (i, j) = (data.num_cases(), data.num_subjects());
    if i == 0 || i >= j {
        return Err(LogisticError::Degenerate { i, j });
    }
    let design = DesignView::base(data);
    let init = vec![0.0; design.cols()];
    let fit = newton(&design, data.cases(), None, &init)?;
    let weights = fit.fitted.iter().map(|&p| p * (1.0 - p)).collect();
    Ok(LogisticFit {
        beta: fit.beta,
        fitted: fit.fitted,
        weights,
        converged: true,
        iterations: fit.iterations,
        grad_norm: fit.grad_norm,
        log_likelihood: fit.log_likelihood,
    })
}

/// A fitted window alternative (beta, theta).
#[derive(Debug, Clone)]
pub struct WindowAltFit {
    pub beta: Vec<f64>,
    pub theta: f64,
    pub log_likelihood: f64,
    pub iterations: u32,
}

/// Fits the alternative model with a free theta on `in_window`, starting
/// from the null coefficients.
pub fn fit_window_alternative(
    data: &PointDataset,
    fit0: &LogisticFit,
    in_window: &[bool],
) -> Result<WindowAltFit, LogisticError> {
    let design = DesignView::with_indicator(data, in_window);
    let mut init = fit0.beta.clone();
    init.push(0.0);
    let fit = newton(&design, data.cases(), None, &init)?;
    let theta = *fit.beta.last().unwrap();
    Ok(WindowAltFit {
        beta: fit.beta[..fit.beta.len() - 1].to_vec(),
        theta,
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
    })
}

/// Profile log likelihood of theta: beta maximized with theta held fixed.
pub fn profile_loglik(
    data: &PointDataset,
    fit0: &LogisticFit,
    in_window: &[bool],
    theta: f64,
) -> Result<f64, LogisticError> {
    let design = DesignView::base(data);
    let offsets: Vec<f64> = in_window
        .iter()
        .map(|&inside| if inside { theta } else { 0.0 })
        .collect();
    let fit = newton(&design, data.cases(), Some(&offsets), &fit0.beta)?;
    Ok(fit.log_likelihood)
}

/// Covariate-adjusted window scores from full refits.
#[derive(Debug)]
pub struct RefitScores {
    pub scores: ScoreVector,
    /// Windows whose refit failed; their score is the quadratic fallback.
    pub fallback_windows: Vec<u32>,
    /// Windows degenerate even for the quadratic score (scored 0).
    pub degenerate_windows: Vec<u32>,
}

enum WindowOutcome {
    Score(f64),
    Fallback(f64),
    FallbackDegenerate,
}

/// Per-window refit scores `S(B) = ll(alt) - ll(null)`.
///
/// For one-sided scores the alternative is constrained to `theta >= 0`: when
/// the profile derivative at 0 is nonpositive the constrained optimum is the
/// null fit and the score is 0, so no refit is run.
pub fn refit_window_scores(
    data: &PointDataset,
    ws: &WindowSet,
    fit0: &LogisticFit,
    k: Sidedness,
) -> Result<RefitScores, LogisticError> {
    if !fit0.converged {
        return Err(LogisticError::NullNotConverged);
    }
    if ws.num_subjects() != data.num_subjects() {
        return Err(LogisticError::DimensionMismatch {
            ws: ws.num_subjects(),
            data: data.num_subjects(),
        });
    }
    let j = data.num_subjects();
    let quad = QuadraticBasis::new(data, fit0)?;
    let outcomes: Vec<WindowOutcome> = (0..ws.len())
        .into_par_iter()
        .map(|widx| {
            let w = ws.window(widx);
            let n = w.n() as usize;
            if n == 0 || n == j {
                return WindowOutcome::Score(0.0);
            }
            let members = ws.membership(widx);
            let mut mask = vec![false; j];
            for &i in &members {
                mask[i as usize] = true;
            }
            let eta0: f64 = members.iter().map(|&i| fit0.fitted[i as usize]).sum();
            // count window cases from the live labels: the window set may
            // have been built under different ones (permutation replicates)
            let m_b = members
                .iter()
                .filter(|&&i| data.cases()[i as usize])
                .count();
            if k == Sidedness::One && (m_b as f64) <= eta0 {
                return WindowOutcome::Score(0.0);
            }
            match fit_window_alternative(data, fit0, &mask) {
                Ok(alt) => {
                    let mut s = alt.log_likelihood - fit0.log_likelihood;
                    if k == Sidedness::One && alt.theta < 0.0 {
                        s = 0.0;
                    }
                    WindowOutcome::Score(s.max(0.0))
                }
                Err(_) => match quad.score_members(&members, k) {
                    Some(s) => WindowOutcome::Fallback(s),
                    None => WindowOutcome::FallbackDegenerate,
                },
            }
        })
        .collect();
    let mut scores = Vec::with_capacity(outcomes.len());
    let mut fallback_windows = Vec::new();
    let mut degenerate_windows = Vec::new();
    for (widx, o) in outcomes.into_iter().enumerate() {
        match o {
            WindowOutcome::Score(s) => scores.push(s),
            WindowOutcome::Fallback(s) => {
                fallback_windows.push(widx as u32);
                scores.push(s);
            }
            WindowOutcome::FallbackDegenerate => {
                fallback_windows.push(widx as u32);
                degenerate_windows.push(widx as u32);
                scores.push(0.0);
            }
        }
    }
    Ok(RefitScores {
        scores: ScoreVector {
            scores,
            sidedness: k,
            baseline: Baseline::LogisticRefit,
        },
        fallback_windows,
        degenerate_windows,
    })
}

/// Covariate columns orthogonalized under the weight inner product, plus the
/// residual sums needed to score any window without refitting.
pub struct QuadraticBasis {
    /// Orthogonalized columns, column-major.
    basis: Vec<Vec<f64>>,
    /// Weighted squared norms of the basis columns.
    norms: Vec<f64>,
    /// Per-subject residual X_i - p_i.
    residual: Vec<f64>,
    /// Global sums sum_i u~_ik (X_i - p_i) (zero at the MLE up to tolerance).
    basis_residual: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadraticBasis {
    pub fn new(data: &PointDataset, fit0: &LogisticFit) -> Result<Self, LogisticError> {
        if !fit0.converged {
            return Err(LogisticError::NullNotConverged);
        }
        let design = DesignView::base(data);
        let (j, r) = (design.rows, design.cols());
        let w = &fit0.weights;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(r);
        let mut norms = Vec::with_capacity(r);
        for k in 0..r {
            let mut col: Vec<f64> = (0..j).map(|i| design.value(i, k)).collect();
            let orig: f64 = col.iter().zip(w).map(|(&c, &wi)| c * c * wi).sum();
            for (prev, &nrm) in basis.iter().zip(&norms) {
                let prev: &Vec<f64> = prev;
                let dot: f64 = col
                    .iter()
                    .zip(prev.iter())
                    .zip(w)
                    .map(|((&c, &p), &wi)| c * p * wi)
                    .sum();
                let coef = dot / nrm;
                col.iter_mut().zip(prev).for_each(|(c, &p)| *c -= coef * p);
            }
            let nrm: f64 = col.iter().zip(w).map(|(&c, &wi)| c * c * wi).sum();
            if nrm <= 1e-12 * orig.max(f64::MIN_POSITIVE) {
                return Err(LogisticError::SingularInformation);
            }
            basis.push(col);
            norms.push(nrm);
        }
        let residual: Vec<f64> = data
            .cases()
            .iter()
            .zip(&fit0.fitted)
            .map(|(&x, &p)| f64::from(x) - p)
            .collect();
        let basis_residual: Vec<f64> = basis
            .iter()
            .map(|col| col.iter().zip(&residual).map(|(&c, &res)| c * res).sum())
            .collect();
        Ok(QuadraticBasis {
            basis,
            norms,
            residual,
            basis_residual,
            weights: w.clone(),
        })
    }

    /// Quadratic score of a window given its member subjects; `None` when the
    /// indicator lies in the covariate span (degenerate window).
    pub fn score_members(&self, members: &[u32], k: Sidedness) -> Option<f64> {
        if members.is_empty() {
            return Some(0.0);
        }
        let mut sum_w = 0.0;
        let mut sum_res = 0.0;
        let mut proj = vec![0.0; self.basis.len()];
        for &iu in members {
            let i = iu as usize;
            sum_w += self.weights[i];
            sum_res += self.residual[i];
            for (p, col) in proj.iter_mut().zip(&self.basis) {
                *p += col[i] * self.weights[i];
            }
        }
        let mut v2 = sum_w;
        let mut num = sum_res;
        for (k2, &a) in proj.iter().enumerate() {
            v2 -= a * a / self.norms[k2];
            num -= a / self.norms[k2] * self.basis_residual[k2];
        }
        if !(v2 > 1e-10 * sum_w.max(f64::MIN_POSITIVE)) {
            return None;
        }
        if k == Sidedness::One && num <= 0.0 {
            return Some(0.0);
        }
        Some(num * num / (2.0 * v2))
    }
}

/// Covariate-adjusted window scores from the quadratic approximation.
#[derive(Debug)]
pub struct QuadraticScores {
    pub scores: ScoreVector,
    /// Windows whose indicator lies in the covariate span (scored 0).
    pub degenerate_windows: Vec<u32>,
}

/// Efficient-score approximation to the refit scores, one pass per window.
pub fn quadratic_window_scores(
    data: &PointDataset,
    ws: &WindowSet,
    fit0: &LogisticFit,
    k: Sidedness,
) -> Result<QuadraticScores, LogisticError> {
    if ws.num_subjects() != data.num_subjects() {
        return Err(LogisticError::DimensionMismatch {
            ws: ws.num_subjects(),
            data: data.num_subjects(),
        });
    }
    let basis = QuadraticBasis::new(data, fit0)?;
    let results: Vec<Option<f64>> = (0..ws.len())
        .into_par_iter()
        .map(|widx| basis.score_members(&ws.membership(widx), k))
        .collect();
    let mut scores = Vec::with_capacity(results.len());
    let mut degenerate_windows = Vec::new();
    for (widx, r) in results.into_iter().enumerate() {
        match r {
            Some(s) => scores.push(s),
            None => {
                degenerate_windows.push(widx as u32);
                scores.push(0.0);
            }
        }
    }
    Ok(QuadraticScores {
        scores: ScoreVector {
            scores,
            sidedness: k,
            baseline: Baseline::LogisticQuadratic,
        },
        degenerate_windows,
    })
}
