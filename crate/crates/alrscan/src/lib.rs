//! Spatial cluster detection with scan and average likelihood ratio (ALR)
//! test statistics.
//!
//! Given a merged case-control point pattern (or an aggregated
//! case-population table), the library scores every window `B` of a scanning
//! family with a log generalized likelihood ratio `S(B)` comparing the case
//! rate inside `B` against the outside, and summarizes the window scores into
//! either
//!
//! * the spatial scan statistic `M = sup_B S(B)`, or
//! * the ALR statistic `U = 2 log( (1/N) * sum_B exp(S(B)) )`,
//!
//! optionally weighting the average. Significance can be assessed four ways:
//! a chi-square tail approximation `k * P{chisq_1 >= c} / 2` valid in the
//! moderate-deviation range, the more conservative `G` tail
//! `sqrt(2 exp(-c) / (pi c))`, permutation Monte Carlo conditional on the
//! case total, and a risk-adjusted multinomial Monte Carlo for models with
//! logistic covariate adjustment.
//!
//! The crate ships as a library plus a thin `alrscan` binary with `analyze`
//! and `simulate` subcommands; the `examples/` directory has one runnable
//! example per capability.

pub mod cli;
pub mod config;
pub mod data;
pub mod gaussian;
pub mod likelihood;
pub mod logistic;
pub mod pvalue;
pub mod replicate;
pub mod report;
pub mod rng;
pub mod stats;
pub mod windows;

pub use data::{AggregatedDataset, PointDataset};
pub use likelihood::{ScoreVector, Sidedness};
pub use logistic::LogisticFit;
pub use pvalue::{PValueMethod, PValueResult};
pub use stats::{StatKind, TestStatistic};
pub use windows::{WindowSet, WindowSpec};
