//! Gaussian-limit calibration of the ALR tail approximations.
//!
//! Simulates the Gaussian window field over all-pairs circles on uniform
//! locations, then compares the empirical tail of U_Z with the chi-square
//! and G approximations, the way the moderate-deviation theory predicts:
//! the chi-square form takes over in the deep tail, the G form fits better
//! at moderate thresholds.
//!
//! ```bash
//! cargo run --release --example gaussian_qq
//! ```

use alrscan::likelihood::Sidedness;
use alrscan::pvalue::{chi2_tail, g_quantile, g_tail};
use alrscan::replicate::qq::{run_qq, QqConfig, QqMode};

fn main() {
    let replicates = 20_000;
    let cfg = QqConfig {
        mode: QqMode::Gaussian {
            n_locations: 100,
            max_radius: 0.2,
        },
        replicates,
    };
    let qq = run_qq(&cfg, 9).unwrap();
    println!(
        "windows N = {} (dropped {} degenerate), replicates L = {replicates}\n",
        qq.n_windows, qq.dropped
    );

    println!(
        "{:>10} {:>12} {:>12} {:>12}",
        "c", "empirical", "chi2 tail", "G tail"
    );
    for target in [0.2, 0.1, 0.05, 0.02, 0.01] {
        let c = g_quantile(target);
        println!(
            "{c:>10.3} {:>12.4} {:>12.4} {:>12.4}",
            qq.empirical_tail(Sidedness::Two, c),
            chi2_tail(c),
            g_tail(c)
        );
    }

    let (chi_err, g_err) = qq.band_fit_errors(Sidedness::Two, 0.9, 0.999);
    println!("\nmean qq deviation over the 0.9-0.999 band: chi-square {chi_err:.3}, G {g_err:.3}");
    println!("one-sided check at 1 - G(c) = 0.02:");
    let c1 = g_quantile(0.02);
    println!(
        "  empirical P{{U_Z(1) >= {c1:.3}}} = {:.4} vs k=1 approximation {:.4}",
        qq.empirical_tail(Sidedness::One, c1),
        chi2_tail(c1) / 2.0
    );
}
