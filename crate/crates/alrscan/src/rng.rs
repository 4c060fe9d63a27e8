//! Reproducible random number streams.
//!
//! Every Monte Carlo routine in this crate owns one ChaCha stream per
//! replicate, keyed by `(seed, replicate index)`. Workers can then be
//! scheduled in any order, on any number of threads, and still produce
//! bit-identical results.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for one Monte Carlo replicate: a fixed seed selects the generator key,
/// the stream index selects one of 2^64 independent ChaCha streams.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a sub-seed from a master seed and a tag (SplitMix64 finalizer).
///
/// Used when an experiment needs several unrelated generator families from
/// one user-facing seed, e.g. "covariate draw", "replicate labels", and
/// "inner Monte Carlo" of a simulation study.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a multinomial count vector by sequential conditional binomials.
///
/// `probs` must be nonnegative with a positive sum; it is normalized
/// internally. The draw consumes a deterministic amount of entropy per cell.
pub fn multinomial_counts<R: Rng>(rng: &mut R, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = trials;
    let mut mass: f64 = probs.iter().sum();
    for (j, &pj) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j + 1 == probs.len() {
            out[j] = remaining;
            break;
        }
        let p = if mass > 0.0 {
            (pj / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = if p >= 1.0 {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            let bin =
                rand_distr::Binomial::new(remaining, p).expect("binomial probability validated");
            rng.sample(bin)
        };
        out[j] = draw;
        remaining -= draw;
        mass -= pj;
    }
    out
}
