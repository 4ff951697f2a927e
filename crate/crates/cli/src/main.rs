use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pasbench::constellation::{derive_bit_statistics, Constellation, ShapedDistribution};
use pasbench::demapper::LlrTrace;
use pasbench::fec::LdpcCode;
use pasbench::harness::{self, plot::plot, SweepConfig};
use pasbench::metrics::accuracy::{accuracy_analysis, write_accuracy};
use pasbench::metrics::{read_reports, trace_metrics, write_reports, Binning, MetricOptions, MetricReport};
use pasbench::shaping::{AmplitudeBlock, CcdmConfig, DEFAULT_BLOCK_LEN};
use pasbench::{Error, Result};

/// Probabilistic amplitude shaping workbench.
#[derive(Parser)]
#[command(name = "pasbench", version, about)]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a configuration and write the sweep CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Suppress per-point progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Metrics of an LLR trace (columns i,B,L), or prediction accuracy of a
    /// sweep CSV when `--target-ber` is given.
    Analyze(AnalyzeArgs),
    /// Plot post-FEC BER against a metric column as SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Constant-composition distribution matcher.
    Ccdm {
        #[command(subcommand)]
        op: CcdmOp,
    },
    /// LDPC address tables.
    Ldpc {
        #[command(subcommand)]
        op: LdpcOp,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Target post-FEC BER for the accuracy analysis of a sweep.
    #[arg(long)]
    target_ber: Option<f64>,
    /// Maxwell–Boltzmann entropy `H(B)` of the traced input; uniform if absent.
    #[arg(long)]
    entropy: Option<f64>,
    /// Label-bit weights per tributary, e.g. `3,2,1`.
    #[arg(long, value_delimiter = ',')]
    mapper: Option<Vec<usize>>,
    /// Histogram levels.
    #[arg(long, default_value_t = pasbench::metrics::DEFAULT_LEVELS)]
    levels: usize,
    /// Edge placement: `max-information` or `equal-mass`.
    #[arg(long, default_value = "max-information", value_parser = parse_binning)]
    binning: Binning,
    /// Label written to the report row.
    #[arg(long)]
    label: Option<String>,
    /// SNR written to the report row.
    #[arg(long, default_value_t = f64::NAN)]
    snr_db: f64,
}

#[derive(Args)]
struct Matcher {
    /// Explicit composition, e.g. `423,324,191,86`.
    #[arg(long, value_delimiter = ',', conflicts_with = "entropy")]
    composition: Option<Vec<usize>>,
    /// Maxwell–Boltzmann entropy `H(B)` to match on a `2^m`-PAM.
    #[arg(long, requires = "m")]
    entropy: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_LEN)]
    block_len: usize,
}

#[derive(Subcommand)]
enum CcdmOp {
    /// Bits (`0`/`1` characters) to amplitude blocks, one block per line.
    Encode {
        #[command(flatten)]
        matcher: Matcher,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Amplitude blocks back to bits.
    Decode {
        #[command(flatten)]
        matcher: Matcher,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum LdpcOp {
    /// Load a table, print its parameters and verify the encoder.
    Check {
        #[arg(long)]
        table: PathBuf,
    },
}

fn parse_binning(s: &str) -> std::result::Result<Binning, String> {
    match s {
        "max-information" => Ok(Binning::MaxInformation),
        "equal-mass" => Ok(Binning::EqualMass),
        _ => Err(format!("unknown binning `{s}`")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

fn simulate(config: &Path, out: &Path, quiet: bool) -> Result<()> {
    let cfg = SweepConfig::load(config)?;
    let rows = harness::run_config(&cfg, |r| {
        if !quiet {
            eprintln!(
                "{} R={} {:.2} dB: ber_pre={:.3e} ber_post={:.3e} i_a={:.4}",
                r.label, r.rate, r.snr_db, r.ber_pre, r.ber_post, r.i_a
            );
        }
    })?;
    let mut w = create(out)?;
    write_reports(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let mut text = String::new();
    open(&a.input)?.read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or_default().trim();
    if header == "i,B,L" {
        if a.target_ber.is_some() {
            return Err(Error::Config("--target-ber needs a sweep CSV, not a trace".into()));
        }
        return analyze_trace(a, &text);
    }
    let target = a
        .target_ber
        .ok_or_else(|| Error::Config("--target-ber is required for a sweep CSV".into()))?;
    let rows = read_reports(text.as_bytes())?;
    if rows.is_empty() {
        return Err(Error::Data("sweep has no rows".into()));
    }
    let analysis = accuracy_analysis(&rows, target)?;
    for m in &analysis {
        eprintln!(
            "{:>18}: delta_metric={:.5} delta_ber=10^{:.2}{}",
            m.metric,
            m.delta_metric,
            m.log10_delta_ber,
            if m.excluded.is_empty() {
                String::new()
            } else {
                format!(" (excluded: {})", m.excluded.join(", "))
            }
        );
    }
    let mut w = create(&a.out)?;
    write_accuracy(&analysis, &mut w)?;
    w.flush()?;
    Ok(())
}

fn analyze_trace(a: &AnalyzeArgs, text: &str) -> Result<()> {
    let trace = LlrTrace::read_csv(text.as_bytes())?;
    if trace.is_empty() {
        return Err(Error::Data("trace has no samples".into()));
    }
    let m = trace.bits_per_symbol();
    let mapper = a.mapper.clone().unwrap_or_else(|| Constellation::default_mapper(m));
    let c = Constellation::gray_pam(m, &mapper)?;
    let d = match a.entropy {
        Some(h) => ShapedDistribution::maxwell_boltzmann_for_entropy(&c, h)?,
        None => ShapedDistribution::uniform(&c),
    };
    let stats = derive_bit_statistics(&c, &d)?;
    let opts = MetricOptions {
        levels: a.levels,
        binning: a.binning,
    };
    if opts.levels < 2 || !opts.levels.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "levels must be even and at least 2, got {}",
            opts.levels
        )));
    }
    let tm = trace_metrics(&trace, &stats, opts)?;
    if trace.len() < pasbench::metrics::RECOMMENDED_SAMPLES {
        eprintln!(
            "warning: only {} samples; histogram estimates are unreliable",
            trace.len()
        );
    }
    let label = a.label.clone().unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let row = MetricReport {
        label,
        rate: String::new(),
        snr_db: a.snr_db,
        ber_pre: tm.ber_pre,
        ber_post: f64::NAN,
        i_n: tm.i_n,
        i_s: tm.i_s,
        i_a: tm.i_a,
        ngmi: tm.ngmi,
        r_c_max: tm.r_c_max,
        i_hat: tm.i_hat,
        r_bmd: tm.r_bmd,
        h_b: stats.pooled_entropy,
        h_joint: stats.joint_entropy,
        sum_h_bi: stats.sum_tributary_entropy(),
        codewords: 0,
        frame_errors: 0,
        bit_errors: 0,
        info_bits: 0,
        samples: trace.len() as u64,
        seed: 0,
        config_hash: String::new(),
        table_hash: String::new(),
    };
    let mut w = create(&a.out)?;
    write_reports(&[row], &mut w)?;
    w.flush()?;
    Ok(())
}

fn plot_cmd(input: &Path, x: &str, out: &Path) -> Result<()> {
    let rows = read_reports(open(input)?)?;
    let svg = plot(&rows, x)?;
    std::fs::write(out, svg)?;
    Ok(())
}

fn matcher(m: &Matcher) -> Result<CcdmConfig> {
    match (&m.composition, m.entropy, m.m) {
        (Some(comp), None, _) => CcdmConfig::new(comp.clone()),
        (None, Some(h), Some(bits)) => {
            let c = Constellation::gray_pam(bits, &Constellation::default_mapper(bits))?;
            let d = ShapedDistribution::maxwell_boltzmann_for_entropy(&c, h)?;
            CcdmConfig::composition_for(&d.amplitude_pmf(), m.block_len)
        }
        _ => Err(Error::Config("give --composition, or --entropy with --m".into())),
    }
}

fn ccdm_encode(m: &Matcher, input: &Path, out: &Path) -> Result<()> {
    let ccdm = matcher(m)?;
    let mut text = String::new();
    open(input)?.read_to_string(&mut text)?;
    let bits = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(Error::Data(format!("unexpected character {other:?} in bit stream"))),
        })
        .collect::<Result<Vec<u8>>>()?;
    let k = ccdm.input_bits();
    if k == 0 || bits.len() % k != 0 {
        return Err(Error::Data(format!(
            "{} bits is not a multiple of the matcher's {k} input bits",
            bits.len()
        )));
    }
    let mut w = create(out)?;
    for chunk in bits.chunks(k) {
        let block = ccdm.encode(chunk)?;
        let line: Vec<String> = block.0.iter().map(u8::to_string).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    eprintln!(
        "{} blocks of {} amplitudes, {k} bits each",
        bits.len() / k,
        ccdm.block_len()
    );
    Ok(())
}

fn ccdm_decode(m: &Matcher, input: &Path, out: &Path) -> Result<()> {
    let ccdm = matcher(m)?;
    let mut w = create(out)?;
    for (n, line) in open(input)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let block = line
            .split_whitespace()
            .map(|t| {
                t.parse::<u8>()
                    .map_err(|e| Error::Data(format!("line {}: bad amplitude {t:?}: {e}", n + 1)))
            })
            .collect::<Result<Vec<u8>>>()?;
        let bits = ccdm
            .decode(&AmplitudeBlock(block))
            .map_err(|e| Error::Data(format!("line {}: {e}", n + 1)))?;
        let s: String = bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}

fn ldpc_check(table: &Path) -> Result<()> {
    let code = LdpcCode::load(table)?;
    let info: Vec<u8> = (0..code.k() as u64)
        .map(|i| (pasbench::channel::derive_seed(0, &[i]) & 1) as u8)
        .collect();
    let cw = code.encode(&info)?;
    if !code.is_codeword(&cw) {
        return Err(Error::Data("encoder output violates the parity checks".into()));
    }
    println!("n = {}", code.n());
    println!("k = {}", code.k());
    println!("rate = {}", harness::config::rate_label(code.n(), code.k()));
    println!("edges = {}", code.edges());
    println!("sha256 = {}", code.table_hash());
    println!("encoder: ok");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { config, out, quiet } => simulate(&config, &out, quiet),
        Command::Analyze(a) => analyze(&a),
        Command::Plot { input, x, out } => plot_cmd(&input, &x, &out),
        Command::Ccdm { op } => match op {
            CcdmOp::Encode { matcher, input, out } => ccdm_encode(&matcher, &input, &out),
            CcdmOp::Decode { matcher, input, out } => ccdm_decode(&matcher, &input, &out),
        },
        Command::Ldpc { op } => match op {
            LdpcOp::Check { table } => ldpc_check(&table),
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
