//! A-posteriori bit LLRs for PAM under a Gaussian channel with nonuniform
//! priors, and the trace of (tributary, sent bit, LLR) samples they produce.

use std::io::{Read, Write};

use crate::constellation::{Constellation, ShapedDistribution};
use crate::error::{Error, Result};

/// LLR clipping bound (natural-log units).
pub const L_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DemapperKind {
    /// Full log-sum-exp evaluation of the a-posteriori ratio.
    #[default]
    Exact,
    /// Max-log approximation.
    MaxLog,
}

/// Per-symbol LLR computer for a fixed constellation, prior and noise level.
///
/// `L_i(y) = ln sum_{x: b_i(x)=0} P(x) p(y|x) - ln sum_{x: b_i(x)=1} P(x) p(y|x)`
/// with `p(y|x)` Gaussian of standard deviation `sigma`. Positive values
/// favour bit 0.
#[derive(Debug, Clone)]
pub struct Demapper {
    m: usize,
    points: Vec<f64>,
    log_prior: Vec<f64>,
    bits: Vec<u8>,
    inv_two_var: f64,
    kind: DemapperKind,
    clip: f64,
}

impl Demapper {
    /// `c` must already be scaled to the operating energy (usually unit energy).
    pub fn new(c: &Constellation, d: &ShapedDistribution, sigma: f64) -> Result<Self> {
        if d.len() != c.len() {
            return Err(Error::Config("distribution does not match the constellation".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("noise deviation must be positive, got {sigma}")));
        }
        let m = c.bits_per_symbol();
        let bits = (0..c.len()).flat_map(|p| c.tributary_bits(p).to_vec()).collect();
        Ok(Demapper {
            m,
            points: c.points().to_vec(),
            log_prior: d.probabilities().iter().map(|p| p.ln()).collect(),
            bits,
            inv_two_var: 1.0 / (2.0 * sigma * sigma),
            kind: DemapperKind::Exact,
            clip: L_MAX,
        })
    }

    pub fn with_kind(mut self, kind: DemapperKind) -> Self {
        self.kind = kind;
        self
    }

    /// Sets the clipping bound; `f64::INFINITY` disables clipping.
    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip = clip;
        self
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m
    }

    /// Writes the `m` tributary LLRs of one received value into `out`.
    pub fn demap(&self, y: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        let mut metric = [0.0f64; 1 << crate::constellation::MAX_BITS_PER_SYMBOL];
        for ((mt, &x), &lp) in metric.iter_mut().zip(&self.points).zip(&self.log_prior) {
            let d = y - x;
            *mt = lp - d * d * self.inv_two_var;
        }
        let metric = &metric[..self.points.len()];
        for (t, o) in out.iter_mut().enumerate() {
            let mut best = [f64::NEG_INFINITY; 2];
            for (p, &mt) in metric.iter().enumerate() {
                let b = self.bits[p * self.m + t] as usize;
                if mt > best[b] {
                    best[b] = mt;
                }
            }
            let l = match self.kind {
                DemapperKind::MaxLog => best[0] - best[1],
                DemapperKind::Exact => {
                    let mut sum = [0.0f64; 2];
                    for (p, &mt) in metric.iter().enumerate() {
                        let b = self.bits[p * self.m + t] as usize;
                        if best[b].is_finite() {
                            sum[b] += (mt - best[b]).exp();
                        }
                    }
                    (best[0] + sum[0].ln()) - (best[1] + sum[1].ln())
                }
            };
            *o = if l.is_nan() {
                0.0
            } else {
                l.clamp(-self.clip, self.clip)
            };
        }
    }

    /// LLRs for a received sequence, symbol-major (`m` values per symbol).
    pub fn llrs(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len() * self.m];
        for (yi, chunk) in y.iter().zip(out.chunks_exact_mut(self.m)) {
            self.demap(*yi, chunk);
        }
        out
    }

    /// Demaps `y` and pairs each LLR with the bit actually sent.
    pub fn trace(&self, c: &Constellation, y: &[f64], sent: &[usize]) -> LlrTrace {
        assert_eq!(y.len(), sent.len());
        let llrs = self.llrs(y);
        let mut trace = LlrTrace::with_capacity(self.m, llrs.len());
        for (j, &point) in sent.iter().enumerate() {
            for t in 0..self.m {
                trace.push(t, c.tributary_bit(point, t), llrs[j * self.m + t]);
            }
        }
        trace
    }
}

/// Ensemble of `(tributary, sent bit, LLR)` samples.
///
/// Tributaries are 0-based in memory and 1-based in the CSV export.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LlrTrace {
    m: usize,
    tributary: Vec<u8>,
    bits: Vec<u8>,
    llrs: Vec<f64>,
}

impl LlrTrace {
    pub fn new(m: usize) -> Self {
        Self::with_capacity(m, 0)
    }

    pub fn with_capacity(m: usize, capacity: usize) -> Self {
        LlrTrace {
            m,
            tributary: Vec::with_capacity(capacity),
            bits: Vec::with_capacity(capacity),
            llrs: Vec::with_capacity(capacity),
        }
    }

    #[inline]
    pub fn push(&mut self, tributary: usize, bit: u8, llr: f64) {
        debug_assert!(tributary < self.m);
        self.tributary.push(tributary as u8);
        self.bits.push(bit & 1);
        self.llrs.push(llr);
    }

    pub fn append(&mut self, other: &LlrTrace) {
        assert_eq!(self.m, other.m, "traces with different bits per symbol");
        self.tributary.extend_from_slice(&other.tributary);
        self.bits.extend_from_slice(&other.bits);
        self.llrs.extend_from_slice(&other.llrs);
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.llrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llrs.is_empty()
    }

    pub fn tributaries(&self) -> &[u8] {
        &self.tributary
    }

    /// Pooled sent bits `B(k)`.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Pooled LLRs `L(k)`.
    pub fn llrs(&self) -> &[f64] {
        &self.llrs
    }

    /// Asymmetric LLRs `L_a = (-1)^B L`.
    pub fn asymmetric(&self) -> impl Iterator<Item = f64> + '_ {
        self.bits
            .iter()
            .zip(&self.llrs)
            .map(|(&b, &l)| if b == 0 { l } else { -l })
    }

    /// `(bit, llr)` pairs of one tributary.
    pub fn tributary(&self, t: usize) -> impl Iterator<Item = (u8, f64)> + '_ {
        self.tributary
            .iter()
            .zip(self.bits.iter().zip(&self.llrs))
            .filter(move |(&ti, _)| ti as usize == t)
            .map(|(_, (&b, &l))| (b, l))
    }

    /// Samples per tributary.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.m];
        for &t in &self.tributary {
            c[t as usize] += 1;
        }
        c
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i", "B", "L"])?;
        for ((t, b), l) in self.tributary.iter().zip(&self.bits).zip(&self.llrs) {
            wtr.write_record([(t + 1).to_string(), b.to_string(), l.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a trace CSV. The number of tributaries is the largest `i` seen.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["i", "B", "L"] {
            return Err(Error::Data(format!("expected trace columns i,B,L, got {headers:?}")));
        }
        let mut trace = LlrTrace::new(0);
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or("").trim();
            let bad = |what: &str| Error::Data(format!("row {}: bad {what}", row + 1));
            let i: usize = field(0).parse().map_err(|_| bad("tributary"))?;
            let b: u8 = field(1).parse().map_err(|_| bad("bit"))?;
            let l: f64 = field(2).parse().map_err(|_| bad("LLR"))?;
            if i == 0 || i > 255 || b > 1 || !l.is_finite() {
                return Err(bad("value"));
            }
            trace.m = trace.m.max(i);
            trace.tributary.push((i - 1) as u8);
            trace.bits.push(b);
            trace.llrs.push(l);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::derive_bit_statistics;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(m: usize, d: Option<&ShapedDistribution>) -> (Constellation, ShapedDistribution) {
        let c = Constellation::gray_pam(m, &Constellation::default_mapper(m)).unwrap();
        let d = d.cloned().unwrap_or_else(|| ShapedDistribution::uniform(&c));
        (c.normalized(&d), d)
    }

    /// Direct evaluation of the posterior ratio, no log-domain tricks.
    fn brute_force(c: &Constellation, d: &ShapedDistribution, sigma: f64, y: f64, t: usize) -> f64 {
        let mut num = [0.0f64; 2];
        for p in 0..c.len() {
            let x = c.points()[p];
            let like = (-(y - x).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            num[c.tributary_bit(p, t) as usize] += d.probabilities()[p] * like;
        }
        (num[0] / num[1]).ln()
    }

    #[test]
    fn binary_closed_form() {
        let c = Constellation::gray_pam(1, &[1]).unwrap();
        let d = ShapedDistribution::uniform(&c);
        let dm = Demapper::new(&c, &d, 1.0).unwrap();
        let mut out = [0.0];
        for (y, expect) in [(-1.0, -2.0), (0.0, 0.0), (1.0, 2.0)] {
            dm.demap(y, &mut out);
            assert!((out[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_llr_vanishes_at_origin() {
        let c3 = Constellation::gray_pam(3, &[3, 2, 1]).unwrap();
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c3, 2.803).unwrap();
        let (c, d) = unit(3, Some(&d));
        let dm = Demapper::new(&c, &d, 0.4).unwrap();
        let mut out = [0.0; 3];
        dm.demap(0.0, &mut out);
        assert!(out[0].abs() < 1e-12);
    }

    #[test]
    fn four_pam_matches_brute_force() {
        let (c, d) = unit(2, None);
        // y = 3 in the integer-spaced geometry
        let y = 3.0 * c.points()[3] / 3.0;
        let dm = Demapper::new(&c, &d, 0.5).unwrap().with_clip(f64::INFINITY);
        let mut out = [0.0; 2];
        dm.demap(y, &mut out);
        for t in 0..2 {
            assert!((out[t] - brute_force(&c, &d, 0.5, y, t)).abs() < 1e-9);
        }
    }

    #[test]
    fn saturates_outside_the_constellation() {
        let c3 = Constellation::gray_pam(3, &[3, 2, 1]).unwrap();
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c3, 2.5).unwrap();
        let (c, d) = unit(3, Some(&d));
        let dm = Demapper::new(&c, &d, 0.05).unwrap();
        let mut out = [0.0; 3];
        dm.demap(50.0, &mut out);
        // outermost point +7 has label 000
        for &l in &out {
            assert_eq!(l, L_MAX);
        }
        dm.demap(-50.0, &mut out);
        assert_eq!(out[0], -L_MAX);
    }

    #[test]
    fn prior_limit_at_huge_noise() {
        let c3 = Constellation::gray_pam(3, &[3, 2, 1]).unwrap();
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c3, 2.803).unwrap();
        let stats = derive_bit_statistics(&c3, &d).unwrap();
        let (c, d) = unit(3, Some(&d));
        let dm = Demapper::new(&c, &d, 1e3).unwrap();
        let mut out = [0.0; 3];
        for y in [-3.0, -0.5, 0.0, 1.2, 4.0] {
            dm.demap(y, &mut out);
            for t in 0..3 {
                let p0 = stats.tributary_p0[t];
                assert!((out[t] - (p0 / (1.0 - p0)).ln()).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn random_cases_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let m = rng.random_range(1..=4);
            let c0 = Constellation::gray_pam(m, &Constellation::default_mapper(m)).unwrap();
            let target = rng.random_range(1.0..=m as f64);
            let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c0, target).unwrap();
            let (c, d) = unit(m, Some(&d));
            let sigma = rng.random_range(0.3..2.0);
            let y = rng.random_range(-2.0..2.0);
            let dm = Demapper::new(&c, &d, sigma).unwrap().with_clip(f64::INFINITY);
            let mut out = vec![0.0; m];
            dm.demap(y, &mut out);
            for t in 0..m {
                assert!((out[t] - brute_force(&c, &d, sigma, y, t)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn max_log_is_an_approximation() {
        let (c, d) = unit(2, None);
        let exact = Demapper::new(&c, &d, 0.8).unwrap();
        let approx = Demapper::new(&c, &d, 0.8).unwrap().with_kind(DemapperKind::MaxLog);
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        exact.demap(0.3, &mut a);
        approx.demap(0.3, &mut b);
        assert!(a[1] != b[1]);
        assert_eq!(a[0].signum(), b[0].signum());
    }

    #[test]
    fn trace_views_and_csv() {
        let mut t = LlrTrace::new(2);
        t.push(0, 0, 1.5);
        t.push(1, 1, 2.0);
        t.push(0, 1, -0.25);
        assert_eq!(t.asymmetric().collect::<Vec<_>>(), vec![1.5, -2.0, 0.25]);
        assert_eq!(t.tributary(0).collect::<Vec<_>>(), vec![(0, 1.5), (1, -0.25)]);
        assert_eq!(t.counts(), vec![2, 1]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("i,B,L\n1,0,1.5\n"));
        assert_eq!(LlrTrace::read_csv(&buf[..]).unwrap(), t);
        assert!(LlrTrace::read_csv(&b"i,B,L\n0,0,1\n"[..]).is_err());
        assert!(LlrTrace::read_csv(&b"a,b\n1,2\n"[..]).is_err());
    }

    #[test]
    fn pooled_prior_consistency() {
        let c3 = Constellation::gray_pam(3, &[3, 2, 1]).unwrap();
        let d0 = ShapedDistribution::maxwell_boltzmann_for_entropy(&c3, 2.803).unwrap();
        let stats = derive_bit_statistics(&c3, &d0).unwrap();
        let (c, d) = unit(3, Some(&d0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cdf: Vec<f64> = d
            .probabilities()
            .iter()
            .scan(0.0, |s, p| {
                *s += p;
                Some(*s)
            })
            .collect();
        let sent: Vec<usize> = (0..20000)
            .map(|_| {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(7)
            })
            .collect();
        let y: Vec<f64> = sent.iter().map(|&p| c.points()[p]).collect();
        let trace = Demapper::new(&c, &d, 0.3).unwrap().trace(&c, &y, &sent);
        assert_eq!(trace.len(), 3 * sent.len());
        let zeros = trace.bits().iter().filter(|&&b| b == 0).count() as f64 / trace.len() as f64;
        let sd = (stats.pooled_p0 * (1.0 - stats.pooled_p0) / trace.len() as f64).sqrt();
        // bits within a symbol are dependent; allow a wider band
        assert!((zeros - stats.pooled_p0).abs() < 6.0 * sd);
    }
}
