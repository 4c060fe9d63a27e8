//! Conditional power study on fixed locations.
//!
//! Locations and the case total I are held fixed. A target circle with n
//! interior subjects gets an elevated case probability p, the exterior gets
//! p-tilde, solved from the relative risk RR = p / p-tilde and the constraint
//! `n p + (J - n) p-tilde = I`. Labels are rejection-sampled until exactly I
//! cases appear. Power of the one-sided scan and ALR statistics is reported
//! against critical values estimated from a null permutation run on the
//! observed labels.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::{rate_std_error, ExperimentError, RateEstimate};
use crate::config::Config;
use crate::data::PointDataset;
use crate::likelihood::{scores_from_counts, Sidedness};
use crate::rng::{derive_seed, replicate_rng};
use crate::stats::{alr_value, scan_value};
use crate::windows::{build_windows, WindowSet, WindowSpec};

#[derive(Debug, Clone)]
pub struct PowerConfig {
    pub circle_center: Vec<f64>,
    pub circle_radius: f64,
    pub rr_list: Vec<f64>,
    pub replicates: u64,
    /// Level of the estimated critical values.
    pub critical_alpha: f64,
    /// Null permutation replicates used to estimate the critical values.
    pub critical_replicates: u64,
    pub windows: WindowSpec,
}

impl PowerConfig {
    pub fn from_config(cfg: &Config, windows: WindowSpec) -> Result<Self, ExperimentError> {
        Ok(PowerConfig {
            circle_center: vec![cfg.get_f64("circle_x")?, cfg.get_f64("circle_y")?],
            circle_radius: cfg.get_f64("circle_radius")?,
            rr_list: cfg.f64_list_or("rr", &[1.0, 2.0, 5.0, 10.0])?,
            replicates: cfg.u64_or("replicates", 1000)?,
            critical_alpha: cfg.f64_or("critical_alpha", 0.01)?,
            critical_replicates: cfg.u64_or("critical_replicates", 1999)?,
            windows,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PowerRow {
    pub rr: f64,
    pub p_inside: f64,
    pub p_outside: f64,
    pub power_alr: RateEstimate,
    pub power_scan: RateEstimate,
}

#[derive(Debug, Clone)]
pub struct PowerResult {
    pub subjects_inside: usize,
    pub case_total: usize,
    pub critical_alr: f64,
    pub critical_scan: f64,
    pub critical_alpha: f64,
    pub replicates: u64,
    pub rows: Vec<PowerRow>,
}

/// Solves (p, p-tilde) from RR and the expected-total constraint.
pub fn solve_rates(
    n_inside: usize,
    j_total: usize,
    i_total: usize,
    rr: f64,
) -> Result<(f64, f64), ExperimentError> {
    if rr <= 0.0 {
        return Err(ExperimentError::Invalid("RR must be positive".into()));
    }
    let p_out = i_total as f64 / (n_inside as f64 * rr + (j_total - n_inside) as f64);
    let p_in = rr * p_out;
    if p_in > 1.0 {
        return Err(ExperimentError::Invalid(format!(
            "infeasible: RR {rr} with {n_inside} interior subjects needs p = {p_in} > 1"
        )));
    }
    Ok((p_in, p_out))
}

fn one_sided_stats(ws: &WindowSet, labels: &[bool], i: u64, j: u64) -> (f64, f64) {
    let m = ws.recount_cases(labels).expect("label length fixed");
    let s = scores_from_counts(&ws.subject_counts(), &m, i, j, Sidedness::One);
    (alr_value(&s), scan_value(&s).0)
}

/// Critical value from a null sample: the smallest observed threshold c with
/// `#{null >= c} <= floor(alpha (L+1))`. Starting from the k-th largest value
/// and stepping above its tie group keeps the test at level alpha even when
/// the null distribution has atoms (discrete count data produce exact ties).
fn critical_value(mut null_stats: Vec<f64>, alpha: f64) -> f64 {
    null_stats.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = ((alpha * (null_stats.len() + 1) as f64).floor() as usize)
        .max(1)
        .min(null_stats.len());
    let cand = null_stats[k - 1];
    let count_ge = null_stats.partition_point(|&v| v >= cand);
    if count_ge <= k {
        return cand;
    }
    match null_stats[..k - 1].iter().rev().find(|&&v| v > cand) {
        Some(&next) => next,
        // the whole top of the null sample is one tie group
        None => cand.next_up(),
    }
}

pub fn run_power_study(
    data: &PointDataset,
    cfg: &PowerConfig,
    seed: u64,
) -> Result<PowerResult, ExperimentError> {
    let j = data.num_subjects();
    let i_total = data.num_cases();
    if i_total == 0 || i_total == j {
        return Err(ExperimentError::Invalid("degenerate case total".into()));
    }
    if cfg.circle_center.len() != data.dim() {
        return Err(ExperimentError::Invalid(
            "circle center dimension does not match data".into(),
        ));
    }
    let ws = build_windows(data, &cfg.windows)?;
    let inside: Vec<bool> = (0..j)
        .map(|s| {
            let d: f64 = data
                .point(s)
                .iter()
                .zip(&cfg.circle_center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d <= cfg.circle_radius
        })
        .collect();
    let n_inside = inside.iter().filter(|&&x| x).count();

    // null permutation run for the critical values
    let crit_seed = derive_seed(seed, 31);
    let labels = data.cases().to_vec();
    let null_stats: Vec<(f64, f64)> = (1..=cfg.critical_replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(crit_seed, rep);
            let mut perm = labels.clone();
            rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
            one_sided_stats(&ws, &perm, i_total as u64, j as u64)
        })
        .collect();
    let critical_alr = critical_value(null_stats.iter().map(|s| s.0).collect(), cfg.critical_alpha);
    let critical_scan =
        critical_value(null_stats.iter().map(|s| s.1).collect(), cfg.critical_alpha);

    let mut rows = Vec::with_capacity(cfg.rr_list.len());
    for (r_idx, &rr) in cfg.rr_list.iter().enumerate() {
        let (p_in, p_out) = solve_rates(n_inside, j, i_total, rr)?;
        let rep_seed = derive_seed(derive_seed(seed, 32), r_idx as u64);
        let hits: (u64, u64) = (1..=cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replicate_rng(rep_seed, rep);
                // rejection sampling: redraw until exactly I cases
                let mut draws = vec![false; j];
                let mut hit = false;
                for _attempt in 0..10_000_000 {
                    let mut count = 0usize;
                    for (s, d) in draws.iter_mut().enumerate() {
                        let p = if inside[s] { p_in } else { p_out };
                        *d = rng.random::<f64>() < p;
                        count += usize::from(*d);
                    }
                    if count == i_total {
                        hit = true;
                        break;
                    }
                }
                assert!(hit, "rejection sampling failed to reach the case total");
                let (u, m) = one_sided_stats(&ws, &draws, i_total as u64, j as u64);
                (u64::from(u >= critical_alr), u64::from(m >= critical_scan))
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let rate = |c: u64| {
            let r = c as f64 / cfg.replicates as f64;
            RateEstimate {
                rate: r,
                std_error: rate_std_error(r, cfg.replicates),
            }
        };
        rows.push(PowerRow {
            rr,
            p_inside: p_in,
            p_outside: p_out,
            power_alr: rate(hits.0),
            power_scan: rate(hits.1),
        });
    }
    Ok(PowerResult {
        subjects_inside: n_inside,
        case_total: i_total,
        critical_alr,
        critical_scan,
        critical_alpha: cfg.critical_alpha,
        replicates: cfg.replicates,
        rows,
    })
}

impl PowerResult {
    pub fn write_tsv(&self, path: &Path) -> Result<(), ExperimentError> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "rr\tp_inside\tp_outside\tpower_alr\tpower_scan")?;
        for r in &self.rows {
            writeln!(
                f,
                "{}\t{:.6}\t{:.6}\t{:.4}\t{:.4}",
                r.rr, r.p_inside, r.p_outside, r.power_alr.rate, r.power_scan.rate
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": "power",
            "subjects_inside": self.subjects_inside,
            "case_total": self.case_total,
            "critical_alpha": self.critical_alpha,
            "critical_alr": self.critical_alr,
            "critical_scan": self.critical_scan,
            "replicates": self.replicates,
            "rows": self.rows.iter().map(|r| serde_json::json!({
                "rr": r.rr,
                "p_inside": r.p_inside,
                "p_outside": r.p_outside,
                "power_alr": r.power_alr.rate,
                "power_alr_se": r.power_alr.std_error,
                "power_scan": r.power_scan.rate,
                "power_scan_se": r.power_scan.std_error,
            })).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_data(seed: u64) -> PointDataset {
        let mut rng = replicate_rng(seed, 0);
        let j = 300;
        let coords: Vec<f64> = (0..2 * j).map(|_| rng.random::<f64>() * 100.0).collect();
        let cases: Vec<bool> = (0..j).map(|_| rng.random::<f64>() < 0.08).collect();
        PointDataset::new(2, coords, cases, None).unwrap()
    }

    #[test]
    fn rate_constraint_is_exact() {
        for (n, j, i, rr) in [
            (12, 1036, 58, 10.0),
            (100, 1000, 50, 2.5),
            (5, 300, 30, 1.0),
        ] {
            let (p, pt) = solve_rates(n, j, i, rr).unwrap();
            let total = n as f64 * p + (j - n) as f64 * pt;
            assert!((total - i as f64).abs() < 1e-12 * i as f64);
            assert!((p / pt - rr).abs() < 1e-12 * rr);
        }
    }

    #[test]
    fn infeasible_rr_is_rejected() {
        assert!(solve_rates(2, 100, 60, 50.0).is_err());
    }

    #[test]
    fn null_rr_gives_nominal_power() {
        let data = synthetic_data(17);
        let cfg = PowerConfig {
            circle_center: vec![50.0, 50.0],
            circle_radius: 20.0,
            rr_list: vec![1.0],
            replicates: 400,
            critical_alpha: 0.05,
            critical_replicates: 999,
            windows: WindowSpec::knn(5),
        };
        let r = run_power_study(&data, &cfg, 23).unwrap();
        let row = &r.rows[0];
        // RR = 1 is the permutation null: power should be near alpha
        for est in [row.power_alr, row.power_scan] {
            assert!(
                (est.rate - 0.05).abs() <= 3.0 * rate_std_error(0.05, 400) + 0.01,
                "rate {}",
                est.rate
            );
        }
    }

    #[test]
    fn critical_value_respects_tie_groups() {
        // ten values, two-way tie at the 5% cutoff position
        let nulls = vec![9.0, 8.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0];
        // k = floor(0.2 * 11) = 2 -> candidate 8.0, but three values are >= 8
        let c = critical_value(nulls.clone(), 0.2);
        assert_eq!(c, 9.0);
        // without ties the k-th largest is used directly
        let c = critical_value(vec![5.0, 4.0, 3.0, 2.0, 1.0], 0.34);
        assert_eq!(c, 4.0);
        // fully tied top collapses to "reject only above the ties"
        let c = critical_value(vec![2.0, 2.0, 2.0, 1.0], 0.25);
        assert!(c > 2.0);
    }
}
