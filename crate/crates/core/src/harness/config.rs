//! Sweep configuration.
//!
//! ```toml
//! seed = 7
//! codewords = 100
//!
//! [[experiment]]
//! label = "shaped-i"
//! m = 3
//! entropy = 2.803
//! code = "data/ldpc/dvbs2_2_3.txt"
//! snr_start = 9.0
//! snr_stop = 11.0
//! ```
//!
//! Top-level keys are defaults for every experiment. Relative code paths
//! resolve against the configuration file's directory; `code = "toy"` selects
//! the bundled 12-bit code.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constellation::{derive_bit_statistics, BitStatistics, Constellation, ShapedDistribution};
use crate::error::{Error, Result};
use crate::fec::{LdpcCode, DEFAULT_MAX_ITERATIONS};
use crate::framing::CodewordFrame;
use crate::metrics::{Binning, MetricOptions, DEFAULT_LEVELS};
use crate::shaping::{CcdmConfig, DEFAULT_BLOCK_LEN};

pub const DEFAULT_SNR_STEP: f64 = 0.1;
pub const DEFAULT_CODEWORDS: u64 = 100;

/// How shaped amplitudes are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeSource {
    /// Constant-composition matcher over blocks of `block_len`.
    #[default]
    Ccdm,
    /// Independent draws from the target pmf.
    Iid,
}

/// Settings shared by every experiment unless overridden.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Defaults {
    pub seed: Option<u64>,
    pub codewords: Option<u64>,
    pub max_iter: Option<usize>,
    pub block_len: Option<usize>,
    pub levels: Option<usize>,
    pub binning: Option<Binning>,
    pub amplitudes: Option<AmplitudeSource>,
    pub snr_step: Option<f64>,
    /// Adds SNR points until the crossing of this BER is bracketed by
    /// nonzero measurements.
    pub refine_target: Option<f64>,
    pub refine_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub label: String,
    pub m: usize,
    pub mapper: Option<Vec<usize>>,
    /// Target `H(B)` of a Maxwell–Boltzmann input; uniform when absent.
    pub entropy: Option<f64>,
    pub code: String,
    pub snr_start: f64,
    pub snr_stop: f64,
    pub seed: Option<u64>,
    pub codewords: Option<u64>,
    pub max_iter: Option<usize>,
    pub block_len: Option<usize>,
    pub levels: Option<usize>,
    pub binning: Option<Binning>,
    pub amplitudes: Option<AmplitudeSource>,
    pub snr_step: Option<f64>,
    pub refine_target: Option<f64>,
    pub refine_points: Option<usize>,
}

impl ExperimentSpec {
    /// Settings given on the experiment itself.
    pub fn overrides(&self) -> Defaults {
        Defaults {
            seed: self.seed,
            codewords: self.codewords,
            max_iter: self.max_iter,
            block_len: self.block_len,
            levels: self.levels,
            binning: self.binning,
            amplitudes: self.amplitudes,
            snr_step: self.snr_step,
            refine_target: self.refine_target,
            refine_points: self.refine_points,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    codewords: Option<u64>,
    max_iter: Option<usize>,
    block_len: Option<usize>,
    levels: Option<usize>,
    binning: Option<Binning>,
    amplitudes: Option<AmplitudeSource>,
    snr_step: Option<f64>,
    refine_target: Option<f64>,
    refine_points: Option<usize>,
    #[serde(default)]
    experiment: Vec<ExperimentSpec>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepConfig {
    pub defaults: Defaults,
    pub experiment: Vec<ExperimentSpec>,
    pub base_dir: PathBuf,
}

impl SweepConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(format!("bad configuration: {e}")))?;
        let cfg = SweepConfig {
            defaults: Defaults {
                seed: raw.seed,
                codewords: raw.codewords,
                max_iter: raw.max_iter,
                block_len: raw.block_len,
                levels: raw.levels,
                binning: raw.binning,
                amplitudes: raw.amplitudes,
                snr_step: raw.snr_step,
                refine_target: raw.refine_target,
                refine_points: raw.refine_points,
            },
            experiment: raw.experiment,
            base_dir: base_dir.into(),
        };
        if cfg.experiment.is_empty() {
            return Err(Error::Config("configuration has no [[experiment]]".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &cfg.experiment {
            if !seen.insert((&e.label, &e.code)) {
                return Err(Error::Config(format!(
                    "duplicate experiment `{}` with code `{}`",
                    e.label, e.code
                )));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, dir)
    }

    /// Resolves every experiment, loading each code table once.
    pub fn resolve(&self) -> Result<Vec<Experiment>> {
        let mut codes: HashMap<String, Arc<LdpcCode>> = HashMap::new();
        self.experiment
            .iter()
            .map(|spec| {
                let code = match codes.get(&spec.code) {
                    Some(c) => c.clone(),
                    None => {
                        let c = Arc::new(load_code(&self.base_dir, &spec.code)?);
                        codes.insert(spec.code.clone(), c.clone());
                        c
                    }
                };
                Experiment::new(spec, &self.defaults, code)
            })
            .collect()
    }
}

fn load_code(base: &Path, name: &str) -> Result<LdpcCode> {
    if name == "toy" {
        return Ok(LdpcCode::toy());
    }
    let p = Path::new(name);
    let path = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    LdpcCode::load(&path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read code table {}: {io}", path.display())),
        other => other,
    })
}

/// Code rate as a reduced fraction, e.g. `"2/3"`.
pub fn rate_label(n: usize, k: usize) -> String {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let g = gcd(n, k).max(1);
    format!("{}/{}", k / g, n / g)
}

/// A fully resolved experiment, ready to simulate.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub label: String,
    pub rate: String,
    /// Constellation on the integer grid.
    pub constellation: Constellation,
    /// Constellation scaled to unit energy under `distribution`.
    pub normalized: Constellation,
    /// Design distribution.
    pub target: ShapedDistribution,
    /// Distribution actually transmitted (the matcher's composition when
    /// shaping with a CCDM).
    pub distribution: ShapedDistribution,
    pub stats: BitStatistics,
    pub code: Arc<LdpcCode>,
    pub frame: CodewordFrame,
    pub ccdm: Option<CcdmConfig>,
    pub seed: u64,
    pub codewords: u64,
    pub max_iter: usize,
    pub metric_options: MetricOptions,
    pub snr_start: f64,
    pub snr_stop: f64,
    pub snr_step: f64,
    pub refine_target: Option<f64>,
    pub refine_points: usize,
    pub config_hash: String,
    /// The experiment with every default filled in.
    pub spec: ExperimentSpec,
}

impl Experiment {
    pub fn new(spec: &ExperimentSpec, defaults: &Defaults, code: Arc<LdpcCode>) -> Result<Self> {
        let o = &spec.overrides();
        let seed = o.seed.or(defaults.seed).unwrap_or(0);
        let codewords = o.codewords.or(defaults.codewords).unwrap_or(DEFAULT_CODEWORDS);
        let max_iter = o.max_iter.or(defaults.max_iter).unwrap_or(DEFAULT_MAX_ITERATIONS);
        let block_len = o.block_len.or(defaults.block_len).unwrap_or(DEFAULT_BLOCK_LEN);
        let levels = o.levels.or(defaults.levels).unwrap_or(DEFAULT_LEVELS);
        let binning = o.binning.or(defaults.binning).unwrap_or_default();
        let source = o.amplitudes.or(defaults.amplitudes).unwrap_or_default();
        let snr_step = o.snr_step.or(defaults.snr_step).unwrap_or(DEFAULT_SNR_STEP);
        let refine_target = o.refine_target.or(defaults.refine_target);
        let refine_points = o.refine_points.or(defaults.refine_points).unwrap_or(4);

        if !(snr_step > 0.0 && snr_step.is_finite()) {
            return Err(Error::Config(format!("snr_step must be positive, got {snr_step}")));
        }
        if !(spec.snr_start.is_finite() && spec.snr_stop.is_finite() && spec.snr_stop >= spec.snr_start) {
            return Err(Error::Config(format!(
                "bad SNR range [{}, {}] for `{}`",
                spec.snr_start, spec.snr_stop, spec.label
            )));
        }
        if codewords == 0 {
            return Err(Error::Config("codewords must be at least 1".into()));
        }
        if levels < 2 || !levels.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "levels must be even and at least 2, got {levels}"
            )));
        }
        if let Some(t) = refine_target {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("refine_target {t} outside (0, 1)")));
            }
        }

        let mapper = spec
            .mapper
            .clone()
            .unwrap_or_else(|| Constellation::default_mapper(spec.m));
        let constellation = Constellation::gray_pam(spec.m, &mapper)?;
        let target = match spec.entropy {
            Some(h) => ShapedDistribution::maxwell_boltzmann_for_entropy(&constellation, h)?,
            None => ShapedDistribution::uniform(&constellation),
        };
        let frame = CodewordFrame::new(&code, &constellation).map_err(|e| match e {
            Error::Framing(msg) => Error::Config(format!("`{}`: {msg}", spec.label)),
            other => other,
        })?;
        let (ccdm, distribution) = match (spec.entropy, source) {
            (None, _) | (_, AmplitudeSource::Iid) => (None, target.clone()),
            (Some(_), AmplitudeSource::Ccdm) => {
                let ccdm = CcdmConfig::composition_for(&target.amplitude_pmf(), block_len)?;
                let d = ShapedDistribution::from_amplitude_pmf(&ccdm.composition_pmf())?;
                (Some(ccdm), d)
            }
        };
        let stats = derive_bit_statistics(&constellation, &distribution)?;
        let normalized = constellation.normalized(&distribution);

        let canonical = toml::to_string(&ResolvedView {
            label: &spec.label,
            m: spec.m,
            mapper: &mapper,
            entropy: spec.entropy,
            table_hash: code.table_hash(),
            block_len,
            source,
            seed,
            codewords,
            max_iter,
            levels,
            binning,
            snr_start: spec.snr_start,
            snr_stop: spec.snr_stop,
            snr_step,
            refine_target,
            refine_points,
        })
        .map_err(|e| Error::Config(e.to_string()))?;
        let config_hash = hex(&Sha256::digest(canonical.as_bytes()))[..16].to_string();

        Ok(Experiment {
            label: spec.label.clone(),
            rate: rate_label(code.n(), code.k()),
            constellation,
            normalized,
            target,
            distribution,
            stats,
            code,
            frame,
            ccdm,
            seed,
            codewords,
            max_iter,
            metric_options: MetricOptions { levels, binning },
            snr_start: spec.snr_start,
            snr_stop: spec.snr_stop,
            snr_step,
            refine_target,
            refine_points,
            config_hash,
            spec: ExperimentSpec {
                label: spec.label.clone(),
                m: spec.m,
                mapper: Some(mapper),
                entropy: spec.entropy,
                code: spec.code.clone(),
                snr_start: spec.snr_start,
                snr_stop: spec.snr_stop,
                seed: Some(seed),
                codewords: Some(codewords),
                max_iter: Some(max_iter),
                block_len: Some(block_len),
                levels: Some(levels),
                binning: Some(binning),
                amplitudes: Some(source),
                snr_step: Some(snr_step),
                refine_target,
                refine_points: Some(refine_points),
            },
        })
    }

    /// The SNR grid `snr_start, snr_start + step, ..., <= snr_stop`.
    pub fn snr_grid(&self) -> Vec<f64> {
        let n = ((self.snr_stop - self.snr_start) / self.snr_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| round_snr(self.snr_start + i as f64 * self.snr_step))
            .collect()
    }
}

/// Rounds to 1e-6 dB so grid points print and compare cleanly.
pub fn round_snr(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Serialize)]
struct ResolvedView<'a> {
    label: &'a str,
    m: usize,
    mapper: &'a [usize],
    entropy: Option<f64>,
    table_hash: &'a str,
    block_len: usize,
    source: AmplitudeSource,
    seed: u64,
    codewords: u64,
    max_iter: usize,
    levels: usize,
    binning: Binning,
    snr_start: f64,
    snr_stop: f64,
    snr_step: f64,
    refine_target: Option<f64>,
    refine_points: usize,
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
