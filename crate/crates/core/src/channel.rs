//! Real AWGN channel and counter-based seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream tags for [`derive_seed`], one per independent random source.
pub const STREAM_CCDM: u64 = 0x4343_444d;
pub const STREAM_UNIFORM_BITS: u64 = 0x5542_4954;
pub const STREAM_NOISE: u64 = 0x4e4f_4953;
pub const STREAM_AMPLITUDES: u64 = 0x414d_504c;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d1_49bb_133a_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of counters (stream tag, point, codeword, ...)
/// into an independent sub-seed. The result depends only on the inputs, so
/// work can be split across threads in any way without changing the output.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Generator for the sub-stream identified by `path`.
pub fn rng_for(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Per-dimension AWGN channel. SNR is `E[X^2] / sigma^2` with unit-energy
/// symbols, so `sigma^2 = 10^(-snr_db / 10)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        ChannelConfig { snr_db, seed }
    }

    /// Noise variance for unit signal energy. Zero for `snr_db = +inf`.
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn sigma(&self) -> f64 {
        self.noise_variance().sqrt()
    }

    /// Adds noise to `x` using the sub-stream `path` of the configured seed.
    pub fn transmit(&self, x: &[f64], path: &[u64]) -> Vec<f64> {
        let sigma = self.sigma();
        if sigma == 0.0 {
            return x.to_vec();
        }
        let mut full = Vec::with_capacity(path.len() + 1);
        full.push(STREAM_NOISE);
        full.extend_from_slice(path);
        let mut rng = rng_for(self.seed, &full);
        x.iter()
            .map(|&xi| {
                let n: f64 = StandardNormal.sample(&mut rng);
                xi + sigma * n
            })
            .collect()
    }
}
