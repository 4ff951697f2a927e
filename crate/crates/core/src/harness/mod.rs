//! Configuration-driven Monte Carlo sweeps.
//!
//! A point simulates `codewords` frames through
//! shape → frame → encode → map → AWGN → demap → decode, pools the LLR
//! traces of all frames, and reports every metric next to the measured
//! post-FEC BER. Frames run in parallel; every random source is derived from
//! `(seed, stream, codeword)` so results do not depend on the thread count.
//! Noise is drawn independently of the SNR, which makes curves over SNR
//! smooth (common random numbers).

pub mod config;
pub mod plot;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{rng_for, ChannelConfig, STREAM_AMPLITUDES, STREAM_UNIFORM_BITS};
use crate::demapper::{Demapper, LlrTrace};
use crate::error::{Error, Result};
use crate::fec::Decoder;
use crate::metrics::{bit_errors, trace_metrics, MetricReport};

pub use config::{Experiment, SweepConfig};

/// Per-frame result.
struct FrameOutcome {
    trace: LlrTrace,
    bit_errors: u64,
}

/// A point's report together with its pooled trace.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub report: MetricReport,
    pub trace: LlrTrace,
}

impl Experiment {
    /// Amplitude levels of frame `index`.
    pub fn amplitudes(&self, index: u64) -> Vec<u8> {
        let n = self.frame.symbols();
        if let Some(ccdm) = &self.ccdm {
            return ccdm.stream_segment(self.seed, index * n as u64, n);
        }
        let mut rng = rng_for(self.seed, &[STREAM_AMPLITUDES, index]);
        let pmf = self.distribution.amplitude_pmf();
        if self.distribution.nu() == Some(0.0) {
            let levels = pmf.len() as u8;
            (0..n).map(|_| rng.random_range(0..levels)).collect()
        } else {
            let w = WeightedIndex::new(&pmf).expect("amplitude pmf has positive mass");
            (0..n).map(|_| w.sample(&mut rng) as u8).collect()
        }
    }

    /// Uniform information bits carried by the signs of frame `index`.
    pub fn uniform_bits(&self, index: u64) -> Vec<u8> {
        let mut rng = rng_for(self.seed, &[STREAM_UNIFORM_BITS, index]);
        (0..self.frame.uniform_sign_bits())
            .map(|_| rng.random::<bool>() as u8)
            .collect()
    }

    fn channel(&self, snr_db: f64) -> Result<(ChannelConfig, Demapper)> {
        if snr_db.is_nan() {
            return Err(Error::Domain("SNR is NaN".into()));
        }
        let channel = ChannelConfig::new(snr_db, self.seed);
        // the demapper needs a finite noise level even on a noiseless channel
        let sigma = channel.sigma().max(1e-6);
        let demapper = Demapper::new(&self.normalized, &self.distribution, sigma)?;
        Ok((channel, demapper))
    }

    fn frame(
        &self,
        index: u64,
        channel: &ChannelConfig,
        demapper: &Demapper,
        decoder: Option<&mut Decoder<'_>>,
    ) -> Result<FrameOutcome> {
        let amplitudes = self.amplitudes(index);
        let uniform = self.uniform_bits(index);
        let (codeword, symbols) = self
            .frame
            .assemble_tx(&self.code, &self.constellation, &amplitudes, &uniform)?;
        let x: Vec<f64> = symbols.iter().map(|&p| self.normalized.points()[p]).collect();
        let y = channel.transmit(&x, &[index]);
        let trace = demapper.trace(&self.normalized, &y, &symbols);
        let bit_errors = match decoder {
            Some(decoder) => {
                let m = self.frame.bits_per_symbol();
                let mut llrs = vec![0.0; self.frame.codeword_len()];
                for (i, &l) in trace.llrs().iter().enumerate() {
                    llrs[self.frame.position(i / m, i % m)] = l;
                }
                let decoded = decoder.decode(&llrs, self.max_iter);
                let k = self.frame.info_len();
                bit_errors(&codeword[..k], &decoded.bits[..k])
            }
            None => 0,
        };
        Ok(FrameOutcome { trace, bit_errors })
    }

    fn frames(&self, snr_db: f64, decode: bool) -> Result<(LlrTrace, Vec<u64>)> {
        let (channel, demapper) = self.channel(snr_db)?;
        let outcomes: Vec<Result<FrameOutcome>> = (0..self.codewords)
            .into_par_iter()
            .map_init(
                || Decoder::new(&self.code),
                |decoder, i| self.frame(i, &channel, &demapper, decode.then_some(decoder)),
            )
            .collect();
        let m = self.frame.bits_per_symbol();
        let mut trace = LlrTrace::with_capacity(m, self.frame.codeword_len() * self.codewords as usize);
        let mut errors = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let o = o?;
            trace.append(&o.trace);
            errors.push(o.bit_errors);
        }
        Ok((trace, errors))
    }

    /// Simulates one SNR point and keeps the pooled trace.
    pub fn simulate_point(&self, snr_db: f64) -> Result<PointOutcome> {
        let (trace, errors) = self.frames(snr_db, true)?;
        let report = self.report(snr_db, &trace, &errors)?;
        Ok(PointOutcome { report, trace })
    }

    /// Simulates one SNR point.
    pub fn run_point(&self, snr_db: f64) -> Result<MetricReport> {
        self.simulate_point(snr_db).map(|p| p.report)
    }

    /// Metrics of one SNR point without decoding; BER columns are zero.
    pub fn estimate_point(&self, snr_db: f64) -> Result<MetricReport> {
        let (trace, errors) = self.frames(snr_db, false)?;
        self.report(snr_db, &trace, &errors)
    }

    fn report(&self, snr_db: f64, trace: &LlrTrace, errors: &[u64]) -> Result<MetricReport> {
        let tm = trace_metrics(trace, &self.stats, self.metric_options)?;
        let bit_errors: u64 = errors.iter().sum();
        let info_bits = self.frame.info_len() as u64 * self.codewords;
        Ok(MetricReport {
            label: self.label.clone(),
            rate: self.rate.clone(),
            snr_db,
            ber_pre: tm.ber_pre,
            ber_post: bit_errors as f64 / info_bits as f64,
            i_n: tm.i_n,
            i_s: tm.i_s,
            i_a: tm.i_a,
            ngmi: tm.ngmi,
            r_c_max: tm.r_c_max,
            i_hat: tm.i_hat,
            r_bmd: tm.r_bmd,
            h_b: self.stats.pooled_entropy,
            h_joint: self.stats.joint_entropy,
            sum_h_bi: self.stats.sum_tributary_entropy(),
            codewords: self.codewords,
            frame_errors: errors.iter().filter(|&&e| e > 0).count() as u64,
            bit_errors,
            info_bits,
            samples: trace.len() as u64,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            table_hash: self.code.table_hash().to_string(),
        })
    }

    /// SNR at which the Monte Carlo rate estimate reaches `rate`, found by
    /// bisection on `[lo, hi]` without decoding.
    pub fn snr_for_rate(&self, rate: f64, mut lo: f64, mut hi: f64, tol_db: f64) -> Result<f64> {
        let at = |snr: f64| self.estimate_point(snr).map(|r| r.i_hat);
        if at(lo)? > rate || at(hi)? < rate {
            return Err(Error::Domain(format!("rate {rate} not bracketed by [{lo}, {hi}] dB")));
        }
        while hi - lo > tol_db {
            let mid = 0.5 * (lo + hi);
            if at(mid)? < rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// A copy simulating `codewords` frames per point.
    pub fn with_codewords(&self, codewords: u64) -> Result<Experiment> {
        let mut spec = self.spec.clone();
        spec.codewords = Some(codewords);
        Experiment::new(&spec, &config::Defaults::default(), self.code.clone())
    }

    /// A copy sweeping `start..=stop` in steps of `step`.
    pub fn with_snr_range(&self, start: f64, stop: f64, step: f64) -> Result<Experiment> {
        let mut spec = self.spec.clone();
        spec.snr_start = config::round_snr(start);
        spec.snr_stop = config::round_snr(stop);
        spec.snr_step = Some(step);
        Experiment::new(&spec, &config::Defaults::default(), self.code.clone())
    }

    /// First SNR on `start, start + step, ...` whose post-FEC BER is below
    /// `target`, scanning at most `max_steps` points.
    pub fn first_snr_below(&self, target: f64, start: f64, step: f64, max_steps: usize) -> Result<f64> {
        for i in 0..max_steps {
            let snr = config::round_snr(start + i as f64 * step);
            if self.run_point(snr)?.ber_post < target {
                return Ok(snr);
            }
        }
        Err(Error::Domain(format!(
            "post-FEC BER stays above {target} up to {} dB",
            start + max_steps as f64 * step
        )))
    }

    /// Runs the SNR grid upwards, stopping after the first point without
    /// bit errors, then refines around `refine_target` if configured.
    pub fn run_sweep(&self) -> Result<SweepResult> {
        self.run_sweep_with(|_| {})
    }

    pub fn run_sweep_with(&self, mut on_point: impl FnMut(&MetricReport)) -> Result<SweepResult> {
        let mut rows = Vec::new();
        for snr in self.snr_grid() {
            let r = self.run_point(snr)?;
            on_point(&r);
            let done = r.bit_errors == 0;
            rows.push(r);
            if done {
                break;
            }
        }
        if let Some(target) = self.refine_target {
            for _ in 0..self.refine_points {
                let Some(snr) = refinement_point(&rows, target) else {
                    break;
                };
                let r = self.run_point(snr)?;
                on_point(&r);
                rows.push(r);
                rows.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
            }
        }
        Ok(SweepResult {
            rows,
            config_hash: self.config_hash.clone(),
            table_hash: self.code.table_hash().to_string(),
            seed: self.seed,
        })
    }
}

/// Midpoint of the first bracket `ber >= target > 0 = ber` on an
/// SNR-sorted sweep, where a nonzero BER below the target is still missing.
pub fn refinement_point(rows: &[MetricReport], target: f64) -> Option<f64> {
    let i = rows
        .windows(2)
        .position(|w| w[0].ber_post >= target && w[1].ber_post < target)?;
    let (a, b) = (&rows[i], &rows[i + 1]);
    if b.ber_post > 0.0 {
        return None;
    }
    let mid = config::round_snr(0.5 * (a.snr_db + b.snr_db));
    (mid > a.snr_db && mid < b.snr_db).then_some(mid)
}

/// One experiment's rows, sorted by SNR, plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<MetricReport>,
    pub config_hash: String,
    pub table_hash: String,
    pub seed: u64,
}

/// Runs every experiment of a configuration in order.
pub fn run_config(cfg: &SweepConfig, mut on_point: impl FnMut(&MetricReport)) -> Result<Vec<MetricReport>> {
    let mut rows = Vec::new();
    for exp in cfg.resolve()? {
        rows.extend(exp.run_sweep_with(&mut on_point)?.rows);
    }
    Ok(rows)
}
