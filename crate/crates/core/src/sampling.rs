//! Random-variate helpers and seed derivation for reproducible chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

/// Generator used for every chain; fixed so traces are reproducible across
/// platforms for a given seed.
pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of stream `index` derived from `base`:
/// `splitmix64(base ^ splitmix64(index))`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

/// Normalizes log weights in place into probabilities (max-subtraction,
/// then division by the sum). Entries equal to `-inf` get probability 0.
pub fn normalize_log_weights(logw: &mut [f64]) {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(max.is_finite(), "all categories have zero or undefined weight");
    let mut total = 0.0;
    for x in logw.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in logw.iter_mut() {
        *x /= total;
    }
}

/// Inverse-CDF draw from normalized probabilities with a single uniform.
/// Categories with zero probability are never selected.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma shape and rate must be positive")
        .sample(rng)
}

pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    1.0 / sample_gamma(shape, rate, rng)
}

pub fn sample_normal<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> f64 {
    Normal::new(mean, variance.sqrt())
        .expect("normal variance must be finite and non-negative")
        .sample(rng)
}

pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b)
        .expect("beta parameters must be positive")
        .sample(rng)
}

/// Dirichlet draw via normalized gamma variates. A single-component
/// Dirichlet returns `[1.0]` without consuming randomness.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    if alpha.len() == 1 {
        return vec![1.0];
    }
    let mut draws: Vec<f64> = alpha.iter().map(|&a| sample_gamma(a, 1.0, rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter_mut().for_each(|x| *x /= total);
    } else {
        // every gamma underflowed; put the mass on the largest parameter
        let best = (0..alpha.len())
            .max_by(|&a, &b| alpha[a].total_cmp(&alpha[b]).then(b.cmp(&a)))
            .expect("non-empty");
        draws.iter_mut().enumerate().for_each(|(i, x)| *x = if i == best { 1.0 } else { 0.0 });
    }
    draws
}
