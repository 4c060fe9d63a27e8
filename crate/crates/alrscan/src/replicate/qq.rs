//! Null-distribution qq experiments for the ALR statistics.
//!
//! Two modes:
//!
//! * `gaussian`: simulate the Gaussian window field over all-pairs circles
//!   on uniform locations and collect `U_Z` for both sidedness variants.
//! * `bernoulli`: synthetic aggregated data (uniform tracts of equal
//!   population); each replicate draws independent per-tract binomial case
//!   counts at a flat rate and collects the unadjusted `U`.
//!
//! The emitted TSV has one row per replicate: the sorted simulated value,
//! the chi-square quantile, and the G quantile matched at plotting position
//! `(l - 0.5) / L`, ready for plotting either qq comparison.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::ExperimentError;
use crate::config::Config;
use crate::data::PointDataset;
use crate::gaussian::ZSimulator;
use crate::likelihood::{scores_from_counts, Sidedness};
use crate::pvalue::{chi2_quantile, g_quantile};
use crate::rng::{derive_seed, replicate_rng};
use crate::stats::alr_value;
use crate::windows::{build_windows, WindowSpec};

#[derive(Debug, Clone)]
pub enum QqMode {
    Gaussian {
        n_locations: usize,
        max_radius: f64,
    },
    Bernoulli {
        n_locations: usize,
        population_per_location: u64,
        p0: f64,
        max_radius: f64,
    },
}

#[derive(Debug, Clone)]
pub struct QqConfig {
    pub mode: QqMode,
    pub replicates: u64,
}

impl QqConfig {
    pub fn from_config(cfg: &Config) -> Result<Self, ExperimentError> {
        let replicates = cfg.u64_or("replicates", 10_000)?;
        let mode = match cfg.str_or("mode", "gaussian") {
            "gaussian" => QqMode::Gaussian {
                n_locations: cfg.usize_or("locations", 100)?,
                max_radius: cfg.f64_or("w1", 0.2)?,
            },
            "bernoulli" => QqMode::Bernoulli {
                n_locations: cfg.usize_or("locations", 100)?,
                population_per_location: cfg.u64_or("population_per_location", 3000)?,
                p0: cfg.f64_or("p0", 5e-4)?,
                max_radius: cfg.f64_or("w1", 0.2)?,
            },
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "mode must be gaussian or bernoulli, got {other}"
                )))
            }
        };
        Ok(QqConfig { mode, replicates })
    }
}

/// Sorted simulated statistics for both sidedness variants.
#[derive(Debug, Clone)]
pub struct QqResult {
    pub u2_sorted: Vec<f64>,
    pub u1_sorted: Vec<f64>,
    pub n_windows: usize,
    /// Windows dropped because their Z value is undefined (gaussian mode).
    pub dropped: usize,
}

fn sort(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn run_qq(cfg: &QqConfig, seed: u64) -> Result<QqResult, ExperimentError> {
    match &cfg.mode {
        QqMode::Gaussian {
            n_locations,
            max_radius,
        } => run_gaussian(*n_locations, *max_radius, cfg.replicates, seed),
        QqMode::Bernoulli {
            n_locations,
            population_per_location,
            p0,
            max_radius,
        } => run_bernoulli(
            *n_locations,
            *population_per_location,
            *p0,
            *max_radius,
            cfg.replicates,
            seed,
        ),
    }
}

fn uniform_locations(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = replicate_rng(seed, 0);
    let coords: Vec<f64> = (0..2 * n).map(|_| rng.random()).collect();
    (coords, vec![false; n])
}

fn run_gaussian(
    n: usize,
    w1: f64,
    replicates: u64,
    seed: u64,
) -> Result<QqResult, ExperimentError> {
    // locations drawn once per experiment; windows fixed across replicates
    let (coords, cases) = uniform_locations(n, derive_seed(seed, 21));
    let data = PointDataset::new(2, coords, cases, None)
        .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let ws = build_windows(&data, &WindowSpec::all_pairs(w1))?;
    let sim = ZSimulator::filtered(&ws)?;
    let uz = sim.simulate_uz(derive_seed(seed, 22), replicates);
    let (u2, u1): (Vec<f64>, Vec<f64>) = uz.into_iter().unzip();
    Ok(QqResult {
        u2_sorted: sort(u2),
        u1_sorted: sort(u1),
        n_windows: sim.len(),
        dropped: sim.dropped(),
    })
}

fn run_bernoulli(
    q: usize,
    population: u64,
    p0: f64,
    w1: f64,
    replicates: u64,
    seed: u64,
) -> Result<QqResult, ExperimentError> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(ExperimentError::Invalid("p0 must lie in (0,1)".into()));
    }
    let agg = {
        let (coords, _) = uniform_locations(q, derive_seed(seed, 23));
        crate::data::AggregatedDataset::new(2, coords, vec![0; q], vec![population; q])
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?
    };
    let ws = crate::windows::build_windows_aggregated(&agg, &WindowSpec::all_pairs(w1))?;
    let n_b = ws.subject_counts();
    let j_total = agg.total_population();
    let draw_seed = derive_seed(seed, 24);
    let stats: Vec<(f64, f64)> = (1..=replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(draw_seed, rep);
            // redraw within the replicate's own stream until nondegenerate
            let (m_site, i_total) = loop {
                let m: Vec<u64> = (0..q)
                    .map(|_| {
                        rng.sample(rand_distr::Binomial::new(population, p0).expect("valid p"))
                    })
                    .collect();
                let i: u64 = m.iter().sum();
                if i > 0 && i < j_total {
                    break (m, i);
                }
            };
            let m_b = ws
                .sum_site_values(&m_site)
                .expect("all-pairs windows are site aligned");
            let m_b: Vec<u32> = m_b.iter().map(|&m| m as u32).collect();
            let s2 = scores_from_counts(&n_b, &m_b, i_total, j_total, Sidedness::Two);
            let s1 = scores_from_counts(&n_b, &m_b, i_total, j_total, Sidedness::One);
            (alr_value(&s2), alr_value(&s1))
        })
        .collect();
    let (u2, u1): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();
    Ok(QqResult {
        u2_sorted: sort(u2),
        u1_sorted: sort(u1),
        n_windows: ws.len(),
        dropped: 0,
    })
}

impl QqResult {
    fn sorted(&self, k: Sidedness) -> &[f64] {
        match k {
            Sidedness::One => &self.u1_sorted,
            Sidedness::Two => &self.u2_sorted,
        }
    }

    /// Fraction of simulated statistics at or above `c`.
    pub fn empirical_tail(&self, k: Sidedness, c: f64) -> f64 {
        let v = self.sorted(k);
        let idx = v.partition_point(|&x| x < c);
        (v.len() - idx) as f64 / v.len() as f64
    }

    /// Empirical quantile at cumulative probability `q` (plotting-position
    /// convention: order statistic l at (l - 0.5) / L).
    pub fn empirical_quantile(&self, k: Sidedness, q: f64) -> f64 {
        let v = self.sorted(k);
        let pos = (q * v.len() as f64 - 0.5)
            .round()
            .clamp(0.0, v.len() as f64 - 1.0);
        v[pos as usize]
    }

    /// Theoretical quantile of the tail approximation `k * tail(c) / 2` at
    /// cumulative probability `q`.
    fn approx_quantile(k: Sidedness, q: f64, tail_inv: impl Fn(f64) -> f64) -> f64 {
        let tail = (1.0 - q) * 2.0 / k.k() as f64;
        if tail >= 1.0 {
            0.0
        } else {
            tail_inv(tail)
        }
    }

    /// Mean absolute qq deviation from the chi-square and G approximations
    /// over plotting positions inside `[lo_q, hi_q]`.
    pub fn band_fit_errors(&self, k: Sidedness, lo_q: f64, hi_q: f64) -> (f64, f64) {
        let v = self.sorted(k);
        let l = v.len() as f64;
        let mut chi = 0.0;
        let mut g = 0.0;
        let mut count = 0usize;
        for (idx, &u) in v.iter().enumerate() {
            let q = (idx as f64 + 0.5) / l;
            if q < lo_q || q > hi_q {
                continue;
            }
            chi += (u - Self::approx_quantile(k, q, chi2_quantile)).abs();
            g += (u - Self::approx_quantile(k, q, g_quantile)).abs();
            count += 1;
        }
        (chi / count as f64, g / count as f64)
    }

    /// Writes `u  chi2_quantile  g_quantile` rows for one sidedness.
    pub fn write_tsv(&self, path: &Path, k: Sidedness) -> Result<(), ExperimentError> {
        let v = self.sorted(k);
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "u\tchi2_quantile\tg_quantile")?;
        let l = v.len() as f64;
        for (idx, &u) in v.iter().enumerate() {
            let q = (idx as f64 + 0.5) / l;
            let cq = Self::approx_quantile(k, q, chi2_quantile);
            let gq = Self::approx_quantile(k, q, g_quantile);
            writeln!(f, "{u}\t{cq}\t{gq}")?;
        }
        Ok(())
    }

    pub fn summary_json(&self, replicates: u64) -> serde_json::Value {
        serde_json::json!({
            "experiment": "qq",
            "replicates": replicates,
            "windows": self.n_windows,
            "dropped_windows": self.dropped,
            "u2_median": self.empirical_quantile(Sidedness::Two, 0.5),
            "u2_q99": self.empirical_quantile(Sidedness::Two, 0.99),
            "u1_median": self.empirical_quantile(Sidedness::One, 0.5),
            "u1_q99": self.empirical_quantile(Sidedness::One, 0.99),
        })
    }
}
