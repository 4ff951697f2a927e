//! PAS bit layout inside one LDPC codeword.
//!
//! The systematic part of the codeword holds every amplitude bit followed by
//! the uniform information bits that ride on sign slots; the parity bits fill
//! the remaining sign slots:
//!
//! ```text
//! | amplitude bits (m-1)·n_sym | uniform sign bits | parity (n-k) |
//! |<------------- information k ------------->|
//!                              |<------- sign bits n_sym ------->|
//! ```
//!
//! Symbol `j` takes its amplitude bits from positions `j(m-1) .. (j+1)(m-1)`
//! (tributaries 2..m in order) and its sign bit from position
//! `(m-1)·n_sym + j`. There is no further interleaving.

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::fec::LdpcCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodewordFrame {
    n: usize,
    k: usize,
    m: usize,
    symbols: usize,
}

impl CodewordFrame {
    pub fn new(code: &LdpcCode, c: &Constellation) -> Result<Self> {
        Self::with_sizes(code.n(), code.k(), c)
    }

    pub fn with_sizes(n: usize, k: usize, c: &Constellation) -> Result<Self> {
        let m = c.bits_per_symbol();
        if c.sign_tributary() != Some(0) {
            return Err(Error::Config("the first tributary must carry the sign bit".into()));
        }
        if !n.is_multiple_of(m) {
            return Err(Error::Config(format!(
                "codeword length {n} is not a multiple of {m} bits per symbol"
            )));
        }
        let symbols = n / m;
        let amplitude_bits = (m - 1) * symbols;
        if k < amplitude_bits {
            return Err(Error::Config(format!(
                "code rate {k}/{n} is below (m-1)/m = {}/{m}; amplitude bits do not fit",
                m - 1
            )));
        }
        Ok(CodewordFrame { n, k, m, symbols })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m
    }

    pub fn codeword_len(&self) -> usize {
        self.n
    }

    pub fn info_len(&self) -> usize {
        self.k
    }

    pub fn amplitude_bits(&self) -> usize {
        (self.m - 1) * self.symbols
    }

    pub fn uniform_sign_bits(&self) -> usize {
        self.k - self.amplitude_bits()
    }

    pub fn parity_bits(&self) -> usize {
        self.n - self.k
    }

    /// Codeword position of the bit that `tributary` (0-based) carries in
    /// symbol `symbol`.
    #[inline]
    pub fn position(&self, symbol: usize, tributary: usize) -> usize {
        if tributary == 0 {
            self.amplitude_bits() + symbol
        } else {
            symbol * (self.m - 1) + tributary - 1
        }
    }

    /// Amplitude bits for a sequence of amplitude levels.
    pub fn amplitude_bits_for(&self, c: &Constellation, amplitudes: &[u8]) -> Vec<u8> {
        let mut bits = Vec::with_capacity(amplitudes.len() * (self.m - 1));
        for &a in amplitudes {
            let point = c.point_index(false, a as usize);
            bits.extend_from_slice(&c.tributary_bits(point)[1..]);
        }
        bits
    }

    /// Builds the information word, encodes it and maps it to point indices.
    pub fn assemble_tx(
        &self,
        code: &LdpcCode,
        c: &Constellation,
        amplitudes: &[u8],
        uniform: &[u8],
    ) -> Result<(Vec<u8>, Vec<usize>)> {
        if amplitudes.len() != self.symbols || uniform.len() != self.uniform_sign_bits() {
            return Err(Error::Framing(format!(
                "frame needs {} amplitudes and {} uniform bits, got {} and {}",
                self.symbols,
                self.uniform_sign_bits(),
                amplitudes.len(),
                uniform.len()
            )));
        }
        if let Some(bad) = amplitudes.iter().find(|&&a| a as usize >= c.amplitude_levels()) {
            return Err(Error::Framing(format!("amplitude level {bad} out of range")));
        }
        let mut info = self.amplitude_bits_for(c, amplitudes);
        info.extend(uniform.iter().map(|b| b & 1));
        let codeword = code.encode(&info)?;
        let symbols = amplitudes
            .iter()
            .enumerate()
            .map(|(j, &a)| c.point_index(codeword[self.amplitude_bits() + j] == 1, a as usize))
            .collect();
        Ok((codeword, symbols))
    }

    /// Reassembles the codeword from the tributary bits of the sent points.
    pub fn extract_codeword(&self, c: &Constellation, symbols: &[usize]) -> Vec<u8> {
        let mut cw = vec![0u8; self.n];
        for (j, &point) in symbols.iter().enumerate() {
            for (t, &b) in c.tributary_bits(point).iter().enumerate() {
                cw[self.position(j, t)] = b;
            }
        }
        cw
    }

    /// Splits a codeword into its `m` tributaries.
    pub fn demux(&self, codeword: &[u8]) -> Vec<Vec<u8>> {
        (0..self.m)
            .map(|t| (0..self.symbols).map(|j| codeword[self.position(j, t)]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pam8() -> Constellation {
        Constellation::gray_pam(3, &[3, 2, 1]).unwrap()
    }

    #[test]
    fn dvbs2_layouts() {
        let c = pam8();
        let f = CodewordFrame::with_sizes(64800, 43200, &c).unwrap();
        assert_eq!(
            (f.amplitude_bits(), f.uniform_sign_bits(), f.parity_bits()),
            (43200, 0, 21600)
        );
        let f = CodewordFrame::with_sizes(64800, 48600, &c).unwrap();
        assert_eq!(
            (f.amplitude_bits(), f.uniform_sign_bits(), f.parity_bits()),
            (43200, 5400, 16200)
        );
        assert_eq!(f.uniform_sign_bits() + f.parity_bits(), f.symbols());
    }

    #[test]
    fn infeasible_rate_is_rejected() {
        let code = LdpcCode::toy();
        assert!(matches!(CodewordFrame::new(&code, &pam8()), Err(Error::Config(_))));
        let swapped = Constellation::gray_pam(3, &[2, 3, 1]).unwrap();
        assert!(CodewordFrame::with_sizes(64800, 48600, &swapped).is_err());
    }

    #[test]
    fn all_zero_inputs() {
        let code = LdpcCode::toy();
        let c = Constellation::gray_pam(2, &[2, 1]).unwrap();
        let f = CodewordFrame::new(&code, &c).unwrap();
        // amplitude level whose label bits are zero: +3 (label 00)
        let a = c.amplitude_of(3) as u8;
        let (cw, symbols) = f.assemble_tx(&code, &c, &[a; 6], &[0; 0]).unwrap();
        assert_eq!(cw, vec![0; 12]);
        for &s in &symbols {
            assert!(c.tributary_bits(s).iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn random_frames_round_trip() {
        let code = LdpcCode::from_table("12 9 3\n0 1\n1 2\n0 2\n").unwrap();
        let c = pam8();
        let f = CodewordFrame::new(&code, &c).unwrap();
        assert_eq!((f.symbols(), f.amplitude_bits(), f.uniform_sign_bits()), (4, 8, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let amps: Vec<u8> = (0..4).map(|_| rng.random_range(0..4)).collect();
            let uni = vec![rng.random::<bool>() as u8];
            let (cw, symbols) = f.assemble_tx(&code, &c, &amps, &uni).unwrap();
            assert!(code.is_codeword(&cw));
            let sent: Vec<u8> = symbols.iter().map(|&s| c.amplitude_of(s) as u8).collect();
            assert_eq!(sent, amps);
            assert_eq!(f.extract_codeword(&c, &symbols), cw);
            let tribs = f.demux(&cw);
            for (j, &s) in symbols.iter().enumerate() {
                for t in 0..3 {
                    assert_eq!(tribs[t][j], c.tributary_bit(s, t));
                }
            }
        }
    }

    #[test]
    fn count_mismatch() {
        let code = LdpcCode::toy();
        let c = Constellation::gray_pam(2, &[2, 1]).unwrap();
        let f = CodewordFrame::new(&code, &c).unwrap();
        assert!(matches!(f.assemble_tx(&code, &c, &[0; 5], &[]), Err(Error::Framing(_))));
        assert!(f.assemble_tx(&code, &c, &[0; 6], &[1]).is_err());
    }
}
