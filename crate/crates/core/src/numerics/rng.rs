//! Deterministic pseudo-random numbers and exact Poisson sampling.
//!
//! The generator is splitmix64 (Steele/Lea/Vigna): a 64-bit counter pushed
//! through a fixed avalanche mixer. It is tiny, has no platform-dependent
//! state, and the same seed yields the same stream everywhere, which is what
//! makes the benchmark reproducible. Sub-streams for independent runs are
//! derived from the master seed with the same mixer.

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 avalanche mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// splitmix64 generator.
#[derive(Debug, Clone)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Deterministic sub-seed for work item `index` of a master seed.
    pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
        mix64(master_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform double in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        // First uniform shifted away from zero so the log is finite.
        let u1 = (self.next_u64() >> 11).wrapping_add(1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Largest chunk mean handled directly by the Knuth multiplication method.
const KNUTH_CHUNK: f64 = 10.0;

/// Exact Poisson variate with the given mean.
///
/// Means up to 10 use Knuth's uniform-product method; larger means are split
/// into chunks of mean at most 10 whose draws are summed, which is again
/// exactly Poisson by additivity. No normal approximation anywhere.
pub fn poisson_sample(rng: &mut Prng, mean: f64) -> Result<u64> {
    if !(mean >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Poisson mean must be nonnegative, got {mean}"
        )));
    }
    let chunks = (mean / KNUTH_CHUNK).ceil().max(1.0) as u64;
    let chunk_mean = mean / chunks as f64;
    let mut total = 0u64;
    for _ in 0..chunks {
        total += poisson_knuth(rng, chunk_mean);
    }
    Ok(total)
}

fn poisson_knuth(rng: &mut Prng, mean: f64) -> u64 {
    let limit = (-mean).exp();
    let mut k = 0u64;
    let mut p = 1.0;
    loop {
        p *= rng.next_f64();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_identical_streams() {
        let mut a = Prng::new(42);
        let mut b = Prng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut a = Prng::new(42);
        let mut b = Prng::new(42);
        for _ in 0..100 {
            assert_eq!(
                poisson_sample(&mut a, 7.3).unwrap(),
                poisson_sample(&mut b, 7.3).unwrap()
            );
        }
    }

    #[test]
    fn first_values_of_reference_stream() {
        // splitmix64 with seed 0: published reference values.
        let mut rng = Prng::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn zero_mean_always_zero() {
        let mut rng = Prng::new(1);
        for _ in 0..1000 {
            assert_eq!(poisson_sample(&mut rng, 0.0).unwrap(), 0);
        }
    }

    #[test]
    fn negative_mean_rejected() {
        let mut rng = Prng::new(1);
        assert!(poisson_sample(&mut rng, -1.0).is_err());
    }

    #[test]
    fn large_mean_empirical_moments() {
        // Law of large numbers at mean 55.6 over 1e6 draws.
        let mut rng = Prng::new(123);
        let n = 1_000_000usize;
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for _ in 0..n {
            let k = poisson_sample(&mut rng, 55.6).unwrap() as f64;
            sum += k;
            sum_sq += k * k;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((mean - 55.6).abs() < 0.1, "empirical mean {mean}");
        assert!((var - 55.6).abs() < 1.0, "empirical variance {var}");
    }

    #[test]
    fn zero_probability_mass_at_small_mean() {
        // P(k = 0 | mean 5) = exp(-5) within 0.002 over 1e6 draws.
        let mut rng = Prng::new(321);
        let n = 1_000_000usize;
        let mut zeros = 0usize;
        for _ in 0..n {
            if poisson_sample(&mut rng, 5.0).unwrap() == 0 {
                zeros += 1;
            }
        }
        let p0 = zeros as f64 / n as f64;
        assert!((p0 - (-5.0f64).exp()).abs() < 0.002, "P(0) = {p0}");
    }

    #[test]
    fn derived_seeds_are_spread_out() {
        let s1 = Prng::derive_seed(7, 0);
        let s2 = Prng::derive_seed(7, 1);
        let s3 = Prng::derive_seed(8, 0);
        assert_ne!(s1, s2);
        assert_ne!(s1, s3);
    }

    #[test]
    fn gaussian_sanity() {
        let mut rng = Prng::new(9);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let g = rng.next_gaussian();
            sum += g;
            sum_sq += g * g;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }
}
