//! Constant-composition distribution matching.
//!
//! The matcher maps `k` uniform input bits to a sequence of `N_s` amplitude
//! indices with a fixed composition. It is realized as exact enumerative
//! coding: the input, read as a big-endian integer, is the lexicographic rank
//! of the output among all sequences of the configured composition. This is
//! arithmetic coding with the constant-composition model evaluated in exact
//! integer arithmetic, so the map is injective and order preserving.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::entropy;
use crate::error::{Error, Result};

/// Output block length used by default.
pub const DEFAULT_BLOCK_LEN: usize = 1024;

/// Sequence of amplitude indices produced by the matcher.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AmplitudeBlock(pub Vec<u8>);

impl AmplitudeBlock {
    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn composition(&self, levels: usize) -> Vec<usize> {
        let mut counts = vec![0; levels];
        for &a in &self.0 {
            if let Some(c) = counts.get_mut(a as usize) {
                *c += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcdmConfig {
    block_len: usize,
    composition: Vec<usize>,
    input_bits: usize,
    sequences: BigUint,
}

impl CcdmConfig {
    /// Builds a matcher for an explicit composition.
    pub fn new(composition: Vec<usize>) -> Result<Self> {
        if composition.is_empty() || composition.len() > 256 {
            return Err(Error::Config(format!(
                "composition must have 1..=256 levels, got {}",
                composition.len()
            )));
        }
        let block_len: usize = composition.iter().sum();
        if block_len == 0 {
            return Err(Error::Config("empty composition".into()));
        }
        let sequences = multinomial(&composition);
        let input_bits = (sequences.bits() - 1) as usize;
        Ok(CcdmConfig {
            block_len,
            composition,
            input_bits,
            sequences,
        })
    }

    /// Rounds `block_len * pmf` to integer counts with the largest-remainder
    /// rule so that the counts sum to `block_len`.
    pub fn composition_for(pmf: &[f64], block_len: usize) -> Result<Self> {
        if block_len == 0 {
            return Err(Error::Config("block length must be positive".into()));
        }
        let total: f64 = pmf.iter().sum();
        if pmf.is_empty() || pmf.iter().any(|p| !p.is_finite() || *p < 0.0) || total <= 0.0 {
            return Err(Error::Config("invalid amplitude distribution".into()));
        }
        let raw: Vec<f64> = pmf.iter().map(|p| p / total * block_len as f64).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..pmf.len()).collect();
        // Stable: ties go to the smaller amplitude.
        order.sort_by(|&a, &b| {
            let ra = raw[a] - counts[a] as f64;
            let rb = raw[b] - counts[b] as f64;
            rb.partial_cmp(&ra).expect("finite remainders")
        });
        for &i in order.iter().take(block_len.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        Self::new(counts)
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn composition(&self) -> &[usize] {
        &self.composition
    }

    pub fn levels(&self) -> usize {
        self.composition.len()
    }

    /// Number of input bits per block, `floor(log2(N_s! / prod n_a!))`.
    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    /// Number of sequences with the configured composition.
    pub fn sequences(&self) -> &BigUint {
        &self.sequences
    }

    /// Matcher rate in bits per amplitude.
    pub fn rate(&self) -> f64 {
        self.input_bits as f64 / self.block_len as f64
    }

    /// Empirical amplitude distribution `n_a / N_s`.
    pub fn composition_pmf(&self) -> Vec<f64> {
        self.composition
            .iter()
            .map(|&n| n as f64 / self.block_len as f64)
            .collect()
    }

    /// Relative rate loss against a PAS symbol carrying a uniform sign bit and
    /// an amplitude of entropy `amplitude_entropy`:
    /// `(H(X) - (1 + k/N_s)) / H(X)` with `H(X) = 1 + amplitude_entropy`.
    pub fn rate_loss(&self, amplitude_entropy: f64) -> f64 {
        let symbol_entropy = 1.0 + amplitude_entropy;
        (symbol_entropy - (1.0 + self.rate())) / symbol_entropy
    }

    /// Entropy of the composition itself.
    pub fn composition_entropy(&self) -> f64 {
        entropy(&self.composition_pmf())
    }

    /// Maps `k` bits (most significant first) to an amplitude block.
    pub fn encode(&self, bits: &[u8]) -> Result<AmplitudeBlock> {
        if bits.len() != self.input_bits {
            return Err(Error::Framing(format!(
                "matcher expects {} input bits, got {}",
                self.input_bits,
                bits.len()
            )));
        }
        let mut rank = bits_to_int(bits);
        let mut counts = self.composition.clone();
        let mut total = self.sequences.clone();
        let mut out = Vec::with_capacity(self.block_len);
        for remaining in (1..=self.block_len).rev() {
            let mut chosen = None;
            for (a, count) in counts.iter().enumerate() {
                if *count == 0 {
                    continue;
                }
                // Sequences continuing with amplitude `a`.
                let sub = &total * *count / remaining;
                if rank < sub {
                    total = sub;
                    chosen = Some(a);
                    break;
                }
                rank -= sub;
            }
            let a = chosen.expect("rank below the number of sequences");
            counts[a] -= 1;
            out.push(a as u8);
        }
        Ok(AmplitudeBlock(out))
    }

    /// Inverts [`CcdmConfig::encode`].
    pub fn decode(&self, block: &AmplitudeBlock) -> Result<Vec<u8>> {
        if block.0.len() != self.block_len
            || block.composition(self.levels()) != self.composition
            || block.0.iter().any(|&a| a as usize >= self.levels())
        {
            return Err(Error::Integrity(
                "amplitude block does not have the configured composition".into(),
            ));
        }
        let mut rank = BigUint::zero();
        let mut counts = self.composition.clone();
        let mut total = self.sequences.clone();
        for (pos, &sym) in block.0.iter().enumerate() {
            let remaining = self.block_len - pos;
            let sym = sym as usize;
            for count in counts.iter().take(sym) {
                if *count > 0 {
                    rank += &total * *count / remaining;
                }
            }
            total = &total * counts[sym] / remaining;
            counts[sym] -= 1;
        }
        if rank.bits() as usize > self.input_bits {
            return Err(Error::Integrity(
                "amplitude block is outside the matcher's image".into(),
            ));
        }
        Ok(int_to_bits(&rank, self.input_bits))
    }

    /// Amplitudes `[start, start + len)` of the endless stream formed by
    /// concatenating blocks, where block `b` encodes bits drawn from a
    /// generator seeded with `(seed, b)`.
    pub fn stream_segment(&self, seed: u64, start: u64, len: usize) -> Vec<u8> {
        let n = self.block_len as u64;
        let mut out = Vec::with_capacity(len);
        let mut pos = start;
        let end = start + len as u64;
        while pos < end {
            let block_index = pos / n;
            let block = self.stream_block(seed, block_index);
            let from = (pos - block_index * n) as usize;
            let to = ((end - block_index * n).min(n)) as usize;
            out.extend_from_slice(&block.0[from..to]);
            pos = block_index * n + to as u64;
        }
        out
    }

    /// Block `index` of the stream described in [`CcdmConfig::stream_segment`].
    pub fn stream_block(&self, seed: u64, index: u64) -> AmplitudeBlock {
        let mut rng =
            ChaCha8Rng::seed_from_u64(crate::channel::derive_seed(seed, &[crate::channel::STREAM_CCDM, index]));
        let bits: Vec<u8> = (0..self.input_bits).map(|_| rng.random::<bool>() as u8).collect();
        self.encode(&bits).expect("bit count matches the configuration")
    }
}

fn multinomial(counts: &[usize]) -> BigUint {
    let mut result = BigUint::one();
    let mut placed = 0usize;
    for &c in counts {
        // C(placed + c, c) built incrementally stays an integer at every step.
        for j in 1..=c {
            placed += 1;
            result *= placed;
            result /= j;
        }
    }
    result
}

fn bits_to_int(bits: &[u8]) -> BigUint {
    let mut v = BigUint::zero();
    for chunk in bits.chunks(32) {
        let mut word = 0u32;
        for &b in chunk {
            word = (word << 1) | u32::from(b & 1);
        }
        v <<= chunk.len();
        v += word;
    }
    v
}

fn int_to_bits(v: &BigUint, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    let mut rest = v.clone();
    let mask = BigUint::from(u32::MAX);
    let mut pos = len;
    while pos > 0 && !rest.is_zero() {
        let word = (&rest & &mask).to_u32().expect("masked to 32 bits");
        let take = pos.min(32);
        for i in 0..take {
            out[pos - 1 - i] = ((word >> i) & 1) as u8;
        }
        rest >>= 32;
        pos -= take;
    }
    out
}
