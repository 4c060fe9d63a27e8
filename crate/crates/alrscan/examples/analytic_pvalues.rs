//! The two analytic tails behind the ALR p-values.
//!
//! `chi2`: the moderate-deviation approximation k P{chisq_1 >= c} / 2.
//! `gdist`: the conservative tail sqrt(2 exp(-c) / (pi c)), which dominates
//! the chi-square tail everywhere and agrees with it as c grows.
//!
//! ```bash
//! cargo run --example analytic_pvalues
//! ```

use alrscan::likelihood::Sidedness;
use alrscan::pvalue::{
    chi2_pvalue, chi2_quantile, chi2_tail, g_quantile, g_tail, g_x0, gdist_pvalue,
};

fn main() {
    println!("G-tail crossover x0 = {:.6} (tail is 1 below it)\n", g_x0());

    println!(
        "{:>8} {:>12} {:>12} {:>9}",
        "c", "chi2 tail", "G tail", "ratio"
    );
    for c in [0.5, 1.0, 2.0, 3.84, 5.29, 8.0, 12.0, 20.0, 40.0] {
        let t = chi2_tail(c);
        let g = g_tail(c);
        println!("{c:>8.2} {t:>12.3e} {g:>12.3e} {:>9.4}", t / g);
    }

    println!("\ntwo-sided / one-sided p-values at the chi-square 95% point:");
    let c = chi2_quantile(0.05);
    for k in [Sidedness::Two, Sidedness::One] {
        println!(
            "  c = {c:.4}, k = {:?}: chi2 p = {:.4}, G p = {:.4}",
            k,
            chi2_pvalue(c, k).p,
            gdist_pvalue(c, k).p
        );
    }

    println!("\nthresholds for target G tails (as used in calibration studies):");
    for tail in [0.05, 0.02, 0.01, 0.001] {
        println!(
            "  1 - G(c) = {tail:<6}: c = {:>8.4}   (chi-square would need c = {:.4})",
            g_quantile(tail),
            chi2_quantile(tail)
        );
    }
}
