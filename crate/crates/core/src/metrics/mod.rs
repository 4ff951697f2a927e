//! Post-FEC BER predictors estimated from LLR traces.
//!
//! All information quantities are in bits. Histogram estimates use
//! [`DEFAULT_LEVELS`] levels per family; the source priors `H(B_i)`, `H(B)`
//! and `H(B_1..B_m)` come from the design distribution, not from the trace.

pub mod accuracy;
pub mod histogram;

use serde::{Deserialize, Serialize};

use crate::constellation::BitStatistics;
use crate::demapper::LlrTrace;
use crate::error::{Error, Result};

pub use histogram::{Binning, ConditionalHistogram, Histogram, Sample, DEFAULT_LEVELS};

/// Hard-decision error rate of the LLRs. A zero LLR is half an error.
pub fn ber_pre(trace: &LlrTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Data("empty trace".into()));
    }
    let errors: f64 = trace
        .asymmetric()
        .map(|la| {
            if la < 0.0 {
                1.0
            } else if la == 0.0 {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Ok(errors / trace.len() as f64)
}

/// Bit error rate between sent and decoded information bits.
pub fn ber_post(sent: &[u8], decoded: &[u8]) -> Result<f64> {
    if sent.len() != decoded.len() {
        return Err(Error::Data(format!(
            "sent and decoded lengths differ: {} vs {}",
            sent.len(),
            decoded.len()
        )));
    }
    if sent.is_empty() {
        return Ok(0.0);
    }
    Ok(bit_errors(sent, decoded) as f64 / sent.len() as f64)
}

pub fn bit_errors(sent: &[u8], decoded: &[u8]) -> u64 {
    sent.iter().zip(decoded).filter(|(a, b)| (*a ^ *b) & 1 == 1).count() as u64
}

/// `f(beta, lambda) = log2(1 + exp(-(-1)^beta lambda))`.
#[inline]
pub fn bit_loss(bit: u8, llr: f64) -> f64 {
    let x = if bit == 0 { -llr } else { llr };
    // softplus(x) / ln 2
    (x.max(0.0) + (-x.abs()).exp().ln_1p()) / std::f64::consts::LN_2
}

/// Monte Carlo rate estimate `1 - mean f(B, L)` over every sample.
pub fn mc_air_estimate(trace: &LlrTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Data("empty trace".into()));
    }
    let loss: f64 = trace
        .bits()
        .iter()
        .zip(trace.llrs())
        .map(|(&b, &l)| bit_loss(b, l))
        .sum();
    Ok(1.0 - loss / trace.len() as f64)
}

/// Histogram families built from one trace.
#[derive(Debug, Clone)]
pub struct TraceHistograms {
    /// `L_i | B_i`, one per tributary.
    pub tributary: Vec<ConditionalHistogram>,
    /// Pooled `L | B`.
    pub pooled: ConditionalHistogram,
    /// `L_a` on edges symmetric about zero.
    pub asymmetric: Histogram,
    /// `|L_a|`, the fold of `asymmetric`.
    pub magnitude: Histogram,
}

impl TraceHistograms {
    pub fn build(trace: &LlrTrace, stats: &BitStatistics, levels: usize, binning: Binning) -> Self {
        let m = trace.bits_per_symbol();
        let mut per_trib: Vec<Vec<Sample>> = vec![Vec::new(); m];
        for ((&t, &bit), &value) in trace.tributaries().iter().zip(trace.bits()).zip(trace.llrs()) {
            per_trib[t as usize].push(Sample { value, bit });
        }
        let tributary = per_trib
            .iter()
            .enumerate()
            .map(|(t, samples)| {
                let p0 = stats.tributary_p0.get(t).copied().unwrap_or(0.5);
                let edges = histogram::signed_edges(samples, levels, binning, p0);
                let mut h = ConditionalHistogram::new(edges);
                for s in samples {
                    h.add(s.value, s.bit);
                }
                h
            })
            .collect();

        let pooled_samples: Vec<Sample> = trace
            .bits()
            .iter()
            .zip(trace.llrs())
            .map(|(&bit, &value)| Sample { value, bit })
            .collect();
        let mut pooled = ConditionalHistogram::new(histogram::signed_edges(
            &pooled_samples,
            levels,
            binning,
            stats.pooled_p0,
        ));
        for s in &pooled_samples {
            pooled.add(s.value, s.bit);
        }
        drop(pooled_samples);

        let la: Vec<f64> = trace.asymmetric().collect();
        let mags: Vec<f64> = la.iter().map(|v| v.abs()).collect();
        let negative: Vec<u8> = la.iter().map(|&v| u8::from(v < 0.0)).collect();
        let edges = histogram::symmetric_edges(&mags, levels, binning, Some(&negative));
        let mut asymmetric = Histogram::new(edges);
        for &v in &la {
            asymmetric.add(v);
        }
        let magnitude = asymmetric.fold();
        TraceHistograms {
            tributary,
            pooled,
            asymmetric,
            magnitude,
        }
    }
}

/// `I(B_i; L_i)` per tributary.
pub fn tributary_mutual_information(h: &TraceHistograms, stats: &BitStatistics) -> Vec<f64> {
    h.tributary
        .iter()
        .zip(&stats.tributary_p0)
        .map(|(hist, &p0)| hist.mutual_information(p0))
        .collect()
}

/// `R_BMD = max(0, H(B_1..B_m) - sum_i (H(B_i) - I(B_i; L_i)))`.
pub fn r_bmd(tributary_mi: &[f64], stats: &BitStatistics) -> f64 {
    let loss: f64 = stats
        .tributary_entropy
        .iter()
        .zip(tributary_mi)
        .map(|(h, i)| h - i)
        .sum();
    (stats.joint_entropy - loss).max(0.0)
}

/// Normalized AIR `I_n = R_BMD / H(B_1..B_m)`, in `[0, 1]`.
pub fn normalized_air(tributary_mi: &[f64], stats: &BitStatistics) -> f64 {
    if stats.joint_entropy <= 0.0 {
        return 0.0;
    }
    (r_bmd(tributary_mi, stats) / stats.joint_entropy).clamp(0.0, 1.0)
}

/// Asymmetric information `I_a = 1 + h(|L_a|) - h(L_a)` (unclamped).
pub fn asi_raw(asymmetric: &Histogram, magnitude: &Histogram) -> f64 {
    1.0 + magnitude.differential_entropy() - asymmetric.differential_entropy()
}

/// Asymmetric information clamped to `[0, 1]`.
pub fn asi(asymmetric: &Histogram, magnitude: &Histogram) -> f64 {
    asi_raw(asymmetric, magnitude).clamp(0.0, 1.0)
}

/// NGMI and the largest PAS code rate `R_c,max`.
///
/// `GMI = H(B_1..B_m) - sum_i H(B_i | L_i)`, `NGMI = 1 - (H(B_1..B_m) - GMI) / m`
/// and `R_c,max = 1 - (H(B_1..B_m) - R_BMD) / m`.
pub fn ngmi(stats: &BitStatistics, conditional_entropies: &[f64]) -> (f64, f64) {
    let m = conditional_entropies.len() as f64;
    let sum_cond: f64 = conditional_entropies.iter().sum();
    let gmi = stats.joint_entropy - sum_cond;
    let ngmi = 1.0 - (stats.joint_entropy - gmi) / m;
    let mi: Vec<f64> = stats
        .tributary_entropy
        .iter()
        .zip(conditional_entropies)
        .map(|(h, c)| h - c)
        .collect();
    let rbmd = r_bmd(&mi, stats);
    let rc_max = 1.0 - (stats.joint_entropy - rbmd) / m;
    (ngmi, rc_max)
}

/// Every trace-based metric of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMetrics {
    pub ber_pre: f64,
    pub tributary_mi: Vec<f64>,
    pub pooled_mi: f64,
    pub r_bmd: f64,
    pub i_n: f64,
    pub i_s: f64,
    pub i_a: f64,
    pub i_a_raw: f64,
    pub ngmi: f64,
    pub r_c_max: f64,
    pub i_hat: f64,
    /// Fraction of zero bits in the trace, for comparison with the design prior.
    pub empirical_p0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub levels: usize,
    pub binning: Binning,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            levels: DEFAULT_LEVELS,
            binning: Binning::default(),
        }
    }
}

/// Minimum trace length below which histogram estimates are unreliable.
pub const RECOMMENDED_SAMPLES: usize = 10_000;

pub fn trace_metrics(trace: &LlrTrace, stats: &BitStatistics, opts: MetricOptions) -> Result<TraceMetrics> {
    if trace.bits_per_symbol() != stats.tributary_p0.len() {
        return Err(Error::Data(format!(
            "trace has {} tributaries but the distribution has {}",
            trace.bits_per_symbol(),
            stats.tributary_p0.len()
        )));
    }
    let ber_pre = ber_pre(trace)?;
    let i_hat = mc_air_estimate(trace)?;
    let h = TraceHistograms::build(trace, stats, opts.levels, opts.binning);
    let tributary_mi = tributary_mutual_information(&h, stats);
    let pooled_mi = h.pooled.mutual_information(stats.pooled_p0);
    let r_bmd = r_bmd(&tributary_mi, stats);
    let i_n = normalized_air(&tributary_mi, stats);
    let i_s = if stats.pooled_entropy > 0.0 {
        (pooled_mi / stats.pooled_entropy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let i_a_raw = asi_raw(&h.asymmetric, &h.magnitude);
    let cond: Vec<f64> = stats
        .tributary_entropy
        .iter()
        .zip(&tributary_mi)
        .map(|(hb, i)| (hb - i).max(0.0))
        .collect();
    let (ngmi, r_c_max) = ngmi(stats, &cond);
    let zeros = trace.bits().iter().filter(|&&b| b == 0).count();
    Ok(TraceMetrics {
        ber_pre,
        tributary_mi,
        pooled_mi,
        r_bmd,
        i_n,
        i_s,
        i_a: i_a_raw.clamp(0.0, 1.0),
        i_a_raw,
        ngmi: ngmi.clamp(0.0, 1.0),
        r_c_max: r_c_max.clamp(0.0, 1.0),
        i_hat: i_hat.clamp(0.0, 1.0),
        empirical_p0: zeros as f64 / trace.len() as f64,
    })
}

/// One row of a sweep: every metric at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub rate: String,
    pub snr_db: f64,
    pub ber_pre: f64,
    pub ber_post: f64,
    pub i_n: f64,
    pub i_s: f64,
    pub i_a: f64,
    pub ngmi: f64,
    pub r_c_max: f64,
    pub i_hat: f64,
    pub r_bmd: f64,
    pub h_b: f64,
    pub h_joint: f64,
    pub sum_h_bi: f64,
    pub codewords: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub info_bits: u64,
    pub samples: u64,
    pub seed: u64,
    pub config_hash: String,
    pub table_hash: String,
}

impl MetricReport {
    /// Value of a metric column by name; `one_minus_ber_pre` is accepted as
    /// the information-like form of the pre-FEC BER.
    pub fn column(&self, name: &str) -> Option<f64> {
        Some(match name {
            "snr_db" => self.snr_db,
            "ber_pre" => self.ber_pre,
            "one_minus_ber_pre" => 1.0 - self.ber_pre,
            "ber_post" => self.ber_post,
            "i_n" => self.i_n,
            "i_s" => self.i_s,
            "i_a" => self.i_a,
            "ngmi" => self.ngmi,
            "r_c_max" => self.r_c_max,
            "i_hat" => self.i_hat,
            "r_bmd" => self.r_bmd,
            _ => return None,
        })
    }
}

pub fn write_reports<W: std::io::Write>(rows: &[MetricReport], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    if rows.is_empty() {
        wtr.write_record(REPORT_COLUMNS)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_reports<R: std::io::Read>(r: R) -> Result<Vec<MetricReport>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.map_err(|e| Error::Data(format!("bad sweep row: {e}")))?);
    }
    Ok(rows)
}

/// Column order of the sweep CSV.
pub const REPORT_COLUMNS: [&str; 23] = [
    "label",
    "rate",
    "snr_db",
    "ber_pre",
    "ber_post",
    "i_n",
    "i_s",
    "i_a",
    "ngmi",
    "r_c_max",
    "i_hat",
    "r_bmd",
    "h_b",
    "h_joint",
    "sum_h_bi",
    "codewords",
    "frame_errors",
    "bit_errors",
    "info_bits",
    "samples",
    "seed",
    "config_hash",
    "table_hash",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{derive_bit_statistics, Constellation, ShapedDistribution};

    fn uniform_stats(m: usize) -> BitStatistics {
        let c = Constellation::gray_pam(m, &Constellation::default_mapper(m)).unwrap();
        derive_bit_statistics(&c, &ShapedDistribution::uniform(&c)).unwrap()
    }

    #[test]
    fn ber_pre_cases() {
        let mut t = LlrTrace::new(1);
        for _ in 0..10 {
            t.push(0, 0, 2.0);
            t.push(0, 1, -1.0);
        }
        assert_eq!(ber_pre(&t).unwrap(), 0.0);
        let mut t = LlrTrace::new(1);
        for i in 0..10 {
            t.push(0, 0, if i % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert_eq!(ber_pre(&t).unwrap(), 0.5);
        let mut t = LlrTrace::new(1);
        t.push(0, 1, 0.0);
        assert_eq!(ber_pre(&t).unwrap(), 0.5);
        assert!(ber_pre(&LlrTrace::new(1)).is_err());
    }

    #[test]
    fn ber_post_cases() {
        let sent = vec![0u8; 43200];
        assert_eq!(ber_post(&sent, &sent).unwrap(), 0.0);
        let mut d = sent.clone();
        d[100] = 1;
        assert_eq!(ber_post(&sent, &d).unwrap(), 1.0 / 43200.0);
        assert!(ber_post(&sent, &d[1..]).is_err());
    }

    #[test]
    fn loss_function() {
        assert!((bit_loss(0, 0.0) - 1.0).abs() < 1e-15);
        assert!(bit_loss(0, 50.0) < 1e-20);
        assert!((bit_loss(1, 50.0) - 50.0 / std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(bit_loss(0, 3.0), bit_loss(1, -3.0));
        let mut t = LlrTrace::new(1);
        for _ in 0..10 {
            t.push(0, 0, 0.0);
        }
        assert!(mc_air_estimate(&t).unwrap().abs() < 1e-15);
        let mut t = LlrTrace::new(1);
        for _ in 0..10 {
            t.push(0, 0, 50.0);
            t.push(0, 1, -50.0);
        }
        assert!((mc_air_estimate(&t).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn normalized_air_limits() {
        let c = Constellation::gray_pam(3, &[3, 2, 1]).unwrap();
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, 2.803).unwrap();
        let s = derive_bit_statistics(&c, &d).unwrap();
        assert!((normalized_air(&s.tributary_entropy, &s) - 1.0).abs() < 1e-12);
        assert!((r_bmd(&s.tributary_entropy, &s) - s.joint_entropy).abs() < 1e-12);
        assert_eq!(normalized_air(&[0.0; 3], &s), 0.0);
        let u = uniform_stats(3);
        let mi = [0.9, 0.7, 0.5];
        assert!((normalized_air(&mi, &u) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn ngmi_limits() {
        let c = Constellation::gray_pam(3, &[3, 2, 1]).unwrap();
        let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, 2.803).unwrap();
        let s = derive_bit_statistics(&c, &d).unwrap();
        let (n, r) = ngmi(&s, &[0.0; 3]);
        assert!((n - 1.0).abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
        // R_BMD > 0: NGMI equals R_c,max
        let cond = [0.1, 0.05, 0.2];
        let (n, r) = ngmi(&s, &cond);
        assert!((n - r).abs() < 1e-12);
        let u = uniform_stats(3);
        let (n, _) = ngmi(&u, &[0.1, 0.3, 0.5]);
        let mi = [0.9, 0.7, 0.5];
        assert!((n - normalized_air(&mi, &u)).abs() < 1e-12);
    }

    #[test]
    fn asi_limits() {
        // symmetric L_a
        let edges = histogram::symmetric_edges(&[0.5, 1.0, 2.0, 3.0], 8, Binning::EqualMass, None);
        let mut h = Histogram::new(edges);
        for v in [0.5, 1.0, 2.0, 3.0] {
            h.add(v);
            h.add(-v);
        }
        assert!(asi(&h, &h.fold()).abs() < 1e-12);
        // fully asymmetric
        let edges = histogram::symmetric_edges(&[50.0; 10], 32, Binning::EqualMass, None);
        let mut h = Histogram::new(edges);
        for _ in 0..10 {
            h.add(50.0);
        }
        assert!((asi(&h, &h.fold()) - 1.0).abs() < 1e-12);
    }
}
