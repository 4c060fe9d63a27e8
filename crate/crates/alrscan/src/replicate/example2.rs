//! Circle-cluster study with regenerated geometry.
//!
//! Unlike the block study, nothing is conditioned on: each replicate draws
//! fresh uniform locations on the unit square, places a fixed number of
//! subjects at each, elevates the case probability inside a fixed circle,
//! gives subjects a dummy covariate shifted inside the circle, scans with
//! nearest-neighbor circles, and tests with the risk-adjusted Monte Carlo
//! scan and the covariate-adjusted ALR (chi-square p-values). Rejection
//! rates therefore estimate unconditional error probabilities and power.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{rate_std_error, ExperimentError, RateEstimate};
use crate::config::Config;
use crate::data::PointDataset;
use crate::likelihood::Sidedness;
use crate::logistic::{fit_logistic_null, quadratic_window_scores, refit_window_scores};
use crate::pvalue::{chi2_pvalue, risk_adjusted_mc_pvalue};
use crate::rng::{derive_seed, replicate_rng};
use crate::stats::{alr_statistic, StatKind};
use crate::windows::{build_windows, WindowSpec};

/// Which covariate-adjusted score feeds the ALR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorePath {
    Refit,
    Quadratic,
}

#[derive(Debug, Clone)]
pub struct Example2Config {
    pub replicates: u64,
    pub mc_replicates: u64,
    pub alphas: Vec<f64>,
    pub p0: f64,
    pub p1_list: Vec<f64>,
    pub n_locations: usize,
    pub subjects_per_location: usize,
    pub circle_center: [f64; 2],
    pub circle_radius: f64,
    pub max_rank: usize,
    pub score_path: ScorePath,
    /// Mean shift of the dummy covariate inside the circle (1.0 in the
    /// published design; 0 removes the covariate imbalance entirely).
    pub covariate_shift: f64,
}

impl Example2Config {
    /// The parameterization of the reference comparison study.
    pub fn reference() -> Self {
        Example2Config {
            replicates: 1000,
            mc_replicates: 999,
            alphas: vec![0.05, 0.01],
            p0: 0.05,
            p1_list: vec![0.05, 0.2, 0.4, 0.6],
            n_locations: 20,
            subjects_per_location: 50,
            circle_center: [0.5, 0.5],
            circle_radius: 0.3,
            max_rank: 10,
            score_path: ScorePath::Refit,
            covariate_shift: 1.0,
        }
    }

    pub fn from_config(cfg: &Config) -> Result<Self, ExperimentError> {
        let d = Self::reference();
        let score_path = match cfg.str_or("score_path", "refit") {
            "refit" => ScorePath::Refit,
            "quadratic" => ScorePath::Quadratic,
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "score_path must be refit or quadratic, got {other}"
                )))
            }
        };
        Ok(Example2Config {
            replicates: cfg.u64_or("replicates", d.replicates)?,
            mc_replicates: cfg.u64_or("mc_replicates", d.mc_replicates)?,
            alphas: cfg.f64_list_or("alphas", &d.alphas)?,
            p0: cfg.f64_or("p0", d.p0)?,
            p1_list: cfg.f64_list_or("p1", &d.p1_list)?,
            n_locations: cfg.usize_or("locations", d.n_locations)?,
            subjects_per_location: cfg
                .usize_or("subjects_per_location", d.subjects_per_location)?,
            circle_center: [
                cfg.f64_or("circle_x", d.circle_center[0])?,
                cfg.f64_or("circle_y", d.circle_center[1])?,
            ],
            circle_radius: cfg.f64_or("circle_radius", d.circle_radius)?,
            max_rank: cfg.usize_or("max_rank", d.max_rank)?,
            score_path,
            covariate_shift: cfg.f64_or("covariate_shift", d.covariate_shift)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Example2Row {
    pub p1: f64,
    pub mc: Vec<RateEstimate>,
    pub alr: Vec<RateEstimate>,
    pub failures: u64,
}

#[derive(Debug, Clone)]
pub struct Example2Result {
    pub alphas: Vec<f64>,
    pub replicates: u64,
    pub rows: Vec<Example2Row>,
}

pub fn run_example2(cfg: &Example2Config, seed: u64) -> Result<Example2Result, ExperimentError> {
    let n_alpha = cfg.alphas.len();
    let mut rows = Vec::with_capacity(cfg.p1_list.len());
    for (p_idx, &p1) in cfg.p1_list.iter().enumerate() {
        let rep_seed = derive_seed(derive_seed(seed, 11), p_idx as u64);
        let mc_seed_base = derive_seed(derive_seed(seed, 12), p_idx as u64);
        let results: Vec<(Vec<bool>, Vec<bool>, bool)> = (0..cfg.replicates)
            .into_par_iter()
            .map(
                |rep| match run_one(cfg, p1, rep_seed, rep, derive_seed(mc_seed_base, rep)) {
                    Ok((mc, alr)) => (mc, alr, false),
                    Err(_) => (vec![false; n_alpha], vec![false; n_alpha], true),
                },
            )
            .collect();
        let mut mc_counts = vec![0u64; n_alpha];
        let mut alr_counts = vec![0u64; n_alpha];
        let mut failures = 0u64;
        for (mc, alr, failed) in &results {
            failures += u64::from(*failed);
            for a in 0..n_alpha {
                mc_counts[a] += u64::from(mc[a]);
                alr_counts[a] += u64::from(alr[a]);
            }
        }
        let to_rate = |counts: &[u64]| -> Vec<RateEstimate> {
            counts
                .iter()
                .map(|&c| {
                    let rate = c as f64 / cfg.replicates as f64;
                    RateEstimate {
                        rate,
                        std_error: rate_std_error(rate, cfg.replicates),
                    }
                })
                .collect()
        };
        rows.push(Example2Row {
            p1,
            mc: to_rate(&mc_counts),
            alr: to_rate(&alr_counts),
            failures,
        });
    }
    Ok(Example2Result {
        alphas: cfg.alphas.clone(),
        replicates: cfg.replicates,
        rows,
    })
}

fn run_one(
    cfg: &Example2Config,
    p1: f64,
    rep_seed: u64,
    rep: u64,
    mc_seed: u64,
) -> Result<(Vec<bool>, Vec<bool>), ExperimentError> {
    let mut rng = replicate_rng(rep_seed, rep + 1);
    let q = cfg.n_locations;
    let per = cfg.subjects_per_location;
    let j = q * per;

    // geometry first, then per-subject label and covariate draws
    let locations: Vec<[f64; 2]> = (0..q).map(|_| [rng.random(), rng.random()]).collect();
    let inside: Vec<bool> = locations
        .iter()
        .map(|v| {
            let dx = v[0] - cfg.circle_center[0];
            let dy = v[1] - cfg.circle_center[1];
            (dx * dx + dy * dy).sqrt() <= cfg.circle_radius
        })
        .collect();
    let mut coords = Vec::with_capacity(2 * j);
    let mut cases = Vec::with_capacity(j);
    let mut covariates = Vec::with_capacity(j);
    for (s, v) in locations.iter().enumerate() {
        let p_case = if inside[s] { p1 } else { cfg.p0 };
        let shift = if inside[s] { cfg.covariate_shift } else { 0.0 };
        for _ in 0..per {
            coords.extend_from_slice(v);
            cases.push(rng.random::<f64>() < p_case);
            covariates.push(shift + rng.sample::<f64, _>(StandardNormal));
        }
    }
    let i_total = cases.iter().filter(|&&c| c).count();
    if i_total == 0 || i_total == j {
        return Err(ExperimentError::Invalid("degenerate case total".into()));
    }
    let data = PointDataset::new(2, coords, cases, Some((1, covariates)))
        .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let ws = build_windows(
        &data,
        &WindowSpec::KnnCircles {
            min_rank: 1,
            max_rank: cfg.max_rank,
            max_radius: None,
        },
    )?;
    let fit0 = fit_logistic_null(&data)?;

    let scores = match cfg.score_path {
        ScorePath::Refit => refit_window_scores(&data, &ws, &fit0, Sidedness::Two)?.scores,
        ScorePath::Quadratic => quadratic_window_scores(&data, &ws, &fit0, Sidedness::Two)?.scores,
    };
    let u = alr_statistic(&scores, None)?;
    let p_alr = chi2_pvalue(u.value, Sidedness::Two).p;
    let p_mc = risk_adjusted_mc_pvalue(
        &data,
        &ws,
        &fit0,
        StatKind::Scan,
        cfg.mc_replicates,
        mc_seed,
    )?
    .p;

    Ok((
        cfg.alphas.iter().map(|&a| p_mc <= a).collect(),
        cfg.alphas.iter().map(|&a| p_alr <= a).collect(),
    ))
}

impl Example2Result {
    pub fn write_tsv(&self, path: &Path) -> Result<(), ExperimentError> {
        let mut f = std::fs::File::create(path)?;
        let mut header = String::from("p1");
        for a in &self.alphas {
            header.push_str(&format!("\tmc_alpha{a}\talr_alpha{a}"));
        }
        writeln!(f, "{header}\tfailures")?;
        for row in &self.rows {
            let mut line = format!("{}", row.p1);
            for a in 0..self.alphas.len() {
                line.push_str(&format!("\t{:.4}\t{:.4}", row.mc[a].rate, row.alr[a].rate));
            }
            writeln!(f, "{line}\t{}", row.failures)?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": "example2",
            "replicates": self.replicates,
            "alphas": self.alphas,
            "rows": self.rows.iter().map(|r| serde_json::json!({
                "p1": r.p1,
                "mc_rate": r.mc.iter().map(|e| e.rate).collect::<Vec<_>>(),
                "mc_se": r.mc.iter().map(|e| e.std_error).collect::<Vec<_>>(),
                "alr_rate": r.alr.iter().map(|e| e.rate).collect::<Vec<_>>(),
                "alr_se": r.alr.iter().map(|e| e.std_error).collect::<Vec<_>>(),
                "failures": r.failures,
            })).collect::<Vec<_>>(),
        })
    }
}
