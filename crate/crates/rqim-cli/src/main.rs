//! `rqim` — reversible watermarking of floating-point weight tensors.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O or malformed file, 3 capacity or
//! parameter error, 4 positive detection under `--strict-exit`.

mod side_file;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rqim_core::error::{Error, Result};
use rqim_core::hs;
use rqim_core::io::{
    csv_float, encode_message, decode_message, pack_message_file, read_raw, read_tensor,
    unpack_message_file, write_csv, write_tensor, Precision, WatermarkMessage, WeightTensor,
};
use rqim_core::keying::{
    parse_alpha, parse_info, parse_key, serialize_alpha, serialize_info, serialize_key, SplitMix64,
};
use rqim_core::qim::{self, QimParams};
use rqim_core::schemes;
use rqim_core::stats;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "rqim",
    version,
    about = "Reversible watermarking for floating-point model weights"
)]
struct Cli {
    /// Worker threads (default: all cores); outputs are identical either way
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a message into a weight tensor
    Mark(MarkArgs),
    /// Extract the embedded message (does not need alpha)
    Extract(ExtractArgs),
    /// Recover the original weights (needs alpha)
    Restore(RestoreArgs),
    /// Integrity check: restore and compare against the owner's original
    Verify(VerifyArgs),
    /// Ownership check: extract and compare against the owner's message
    Infringe(InfringeArgs),
    /// Distribution statistics and Q-Q data for a tensor
    Analyze(AnalyzeArgs),
    /// Capacity/distortion comparison against the histogram baseline
    Compare(CompareArgs),
    /// Monte-Carlo study of the embedding distortion
    Distortion(DistortionArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Rqim,
    Hs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn precision(self) -> Precision {
        match self {
            Dtype::F32 => Precision::Binary32,
            Dtype::F64 => Precision::Binary64,
        }
    }
}

#[derive(Args)]
struct ModelInput {
    /// Weight tensor file
    #[arg(long)]
    model: PathBuf,
    /// Treat --model as a headerless little-endian float dump
    #[arg(long)]
    raw: bool,
    /// Element type when --raw is given
    #[arg(long, value_enum, default_value_t = Dtype::F64)]
    dtype: Dtype,
    /// Element count when --raw is given (default: whole file)
    #[arg(long)]
    count: Option<usize>,
}

impl ModelInput {
    fn read(&self) -> Result<WeightTensor> {
        let bytes = fs::read(&self.model)?;
        if self.raw {
            read_raw(&bytes, self.dtype.precision(), self.count)
        } else {
            read_tensor(&bytes)
        }
    }
}

#[derive(Args)]
struct MarkArgs {
    #[command(flatten)]
    input: ModelInput,
    /// Message text (UTF-8)
    #[arg(long, conflicts_with = "message_file")]
    message: Option<String>,
    /// Packed message file (pad byte + MSB-first bits)
    #[arg(long)]
    message_file: Option<PathBuf>,
    /// Quantization step
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Scaling factor (retained-error fraction is 1 - alpha)
    #[arg(long, default_value_t = 0.8675)]
    alpha: f64,
    /// Symbol alphabet size (power of two)
    #[arg(long, default_value_t = 2)]
    m_card: u32,
    /// Secret dither
    #[arg(long, default_value_t = 0.0)]
    k: f64,
    /// Location-PRNG seed
    #[arg(long, default_value_t = 0)]
    clue: u64,
    #[arg(long, value_enum, default_value_t = Method::Rqim)]
    method: Method,
    /// Significant digits kept by the histogram baseline
    #[arg(long, default_value_t = 8)]
    q: usize,
    /// Watermarked tensor output
    #[arg(long)]
    out: PathBuf,
    /// Secret-key file output (rqim)
    #[arg(long)]
    key_out: Option<PathBuf>,
    /// Alpha file output (rqim; kept separate from the key)
    #[arg(long)]
    alpha_out: Option<PathBuf>,
    /// Watermark-info file output (rqim)
    #[arg(long)]
    info_out: Option<PathBuf>,
    /// Side-information file output (hs)
    #[arg(long)]
    side_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    input: ModelInput,
    #[arg(long, value_enum, default_value_t = Method::Rqim)]
    method: Method,
    /// Secret-key file (rqim)
    #[arg(long)]
    key: Option<PathBuf>,
    /// Watermark-info file (rqim)
    #[arg(long)]
    info: Option<PathBuf>,
    /// Side-information file (hs)
    #[arg(long)]
    side: Option<PathBuf>,
    /// Decoded text output
    #[arg(long)]
    out: PathBuf,
    /// Raw extracted bits as a packed message file
    #[arg(long)]
    bits_out: Option<PathBuf>,
}

#[derive(Args)]
struct RestoreArgs {
    #[command(flatten)]
    input: ModelInput,
    #[arg(long, value_enum, default_value_t = Method::Rqim)]
    method: Method,
    #[arg(long)]
    key: Option<PathBuf>,
    #[arg(long)]
    info: Option<PathBuf>,
    /// Alpha file (rqim; restoration is impossible without it)
    #[arg(long)]
    alpha_file: Option<PathBuf>,
    #[arg(long)]
    side: Option<PathBuf>,
    /// Recovered tensor output
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: ModelInput,
    /// The owner's original tensor
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    info: PathBuf,
    #[arg(long)]
    alpha_file: PathBuf,
    /// Known per-element channel-noise bound; enables the noisy-channel check
    #[arg(long)]
    noise_bound: Option<f64>,
    /// Exit 4 when tampering is detected
    #[arg(long)]
    strict_exit: bool,
}

#[derive(Args)]
struct InfringeArgs {
    #[command(flatten)]
    input: ModelInput,
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    info: PathBuf,
    /// The owner's original message (packed message file)
    #[arg(long)]
    message_file: PathBuf,
    /// Detection threshold on the bit error rate
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Exit 4 when the watermark is detected
    #[arg(long)]
    strict_exit: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum QqReference {
    Normal,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum QqView {
    Raw,
    Preprocessed,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: ModelInput,
    /// Reference distribution for the Q-Q points
    #[arg(long, value_enum, default_value_t = QqReference::Normal)]
    qq: QqReference,
    /// Which sample the Q-Q points describe
    #[arg(long, value_enum, default_value_t = QqView::Preprocessed)]
    qq_view: QqView,
    /// Significant digits for the preprocessed view
    #[arg(long, default_value_t = 8)]
    q: usize,
    /// Digit-pair position of the preprocessed view
    #[arg(long, default_value_t = 3)]
    pair_index: usize,
    /// Summary CSV (metric,value)
    #[arg(long)]
    out_csv: PathBuf,
    /// Q-Q CSV (theoretical,empirical)
    #[arg(long)]
    qq_csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: ModelInput,
    /// Percentages of the tensor to use as hosts
    #[arg(long, default_value = "20,40,60,80,100")]
    fractions: String,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.8675)]
    alpha: f64,
    #[arg(long, default_value_t = 8)]
    q: usize,
    #[arg(long)]
    out_csv: PathBuf,
}

#[derive(Args)]
struct DistortionArgs {
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.8675)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    m_card: u32,
    #[arg(long, default_value_t = 0.0)]
    k: f64,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_ok = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if usage_ok { 0 } else { 1 };
        }
    };
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Format(_) | Error::Parse(_) | Error::Corruption(_) => 2,
                _ => 3,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Mark(args) => cmd_mark(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Restore(args) => cmd_restore(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Infringe(args) => cmd_infringe(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Distortion(args) => cmd_distortion(args),
    }
}

fn usage(message: &str) -> Result<i32> {
    eprintln!("usage error: {message}");
    Ok(1)
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> std::result::Result<&'a T, UsageError> {
    value.as_ref().ok_or_else(|| UsageError(format!("--{flag} is required here")))
}

struct UsageError(String);

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}

// ------------------------------------------------------------------- mark

fn cmd_mark(args: MarkArgs) -> Result<i32> {
    let message = match (&args.message, &args.message_file) {
        (Some(text), None) => encode_message(text, args.m_card)?,
        (None, Some(path)) => unpack_message_file(&fs::read(path)?, args.m_card)?,
        _ => return usage("exactly one of --message / --message-file is required"),
    };
    let cover = args.input.read()?;
    match args.method {
        Method::Rqim => {
            let (key_out, alpha_out, info_out) = match (
                require(&args.key_out, "key-out"),
                require(&args.alpha_out, "alpha-out"),
                require(&args.info_out, "info-out"),
            ) {
                (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                (Err(UsageError(m)), _, _) | (_, Err(UsageError(m)), _) | (_, _, Err(UsageError(m))) => {
                    return usage(&m)
                }
            };
            let params = QimParams::new(args.delta, args.m_card, args.alpha, args.k)?;
            let (wtm, info, key) = schemes::mark(&cover, &message, &params, args.clue)?;
            write_file(&args.out, &write_tensor(&wtm))?;
            write_file(key_out, serialize_key(&key).as_bytes())?;
            write_file(alpha_out, serialize_alpha(args.alpha).as_bytes())?;
            write_file(info_out, serialize_info(&info).as_bytes())?;
            println!("L = {}", info.length);
            println!("|M| = {}", info.m_card);
            print_empirical_swr(&cover.data, &wtm.data)?;
        }
        Method::Hs => {
            let Some(side_out) = &args.side_out else {
                return usage("--side-out is required with --method hs");
            };
            if args.m_card != 2 {
                return usage("the histogram baseline embeds bits; use --m-card 2");
            }
            let (marked, side) = hs::hs_mark(&cover.data, &message.bits, args.q)?;
            let wtm = WeightTensor { data: marked, precision: cover.precision }.canonicalized();
            write_file(&args.out, &write_tensor(&wtm))?;
            write_file(side_out, &side_file::encode_side(&side))?;
            println!("L = {}", side.n_bits);
            println!("|M| = 2");
            print_empirical_swr(&cover.data, &wtm.data)?;
        }
    }
    Ok(0)
}

fn print_empirical_swr(cover: &[f64], marked: &[f64]) -> Result<()> {
    let sigma2_w = stats::mean_square_diff(marked, cover)?;
    if sigma2_w > 0.0 {
        let sigma2_s = stats::population_variance(cover);
        println!("SWR = {:.4} dB", stats::swr(sigma2_s, sigma2_w)?);
    } else {
        println!("SWR = inf dB (no modification)");
    }
    Ok(())
}

// ---------------------------------------------------------- extract/restore

fn extracted_message(args: &ExtractArgs, tensor: &WeightTensor) -> Result<std::result::Result<WatermarkMessage, String>> {
    match args.method {
        Method::Rqim => {
            let (key, info) = match (require(&args.key, "key"), require(&args.info, "info")) {
                (Ok(k), Ok(i)) => (k, i),
                (Err(UsageError(m)), _) | (_, Err(UsageError(m))) => return Ok(Err(m)),
            };
            let key = parse_key(&fs::read_to_string(key)?)?;
            let info = parse_info(&fs::read_to_string(info)?)?;
            Ok(Ok(schemes::extract(tensor, &info, &key)?))
        }
        Method::Hs => {
            let side = match require(&args.side, "side") {
                Ok(s) => s,
                Err(UsageError(m)) => return Ok(Err(m)),
            };
            let side = side_file::decode_side(&fs::read(side)?)?;
            let bits = hs::hs_extract_tensor(&tensor.data, &side)?;
            Ok(Ok(WatermarkMessage::from_bits(bits, 2)?))
        }
    }
}

fn cmd_extract(args: ExtractArgs) -> Result<i32> {
    let tensor = args.input.read()?;
    let message = match extracted_message(&args, &tensor)? {
        Ok(m) => m,
        Err(m) => return usage(&m),
    };
    let (text, suspicious) = decode_message(&message)?;
    write_file(&args.out, text.as_bytes())?;
    if let Some(bits_out) = &args.bits_out {
        write_file(bits_out, &pack_message_file(&message))?;
    }
    println!("L = {}", message.symbol_len());
    if suspicious {
        eprintln!("warning: nonzero padding bits; the payload may be corrupted");
    }
    Ok(0)
}

fn cmd_restore(args: RestoreArgs) -> Result<i32> {
    let tensor = args.input.read()?;
    let restored = match args.method {
        Method::Rqim => {
            let (key, info, alpha_file) = match (
                require(&args.key, "key"),
                require(&args.info, "info"),
                require(&args.alpha_file, "alpha-file"),
            ) {
                (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                (Err(UsageError(m)), _, _) | (_, Err(UsageError(m)), _) | (_, _, Err(UsageError(m))) => {
                    return usage(&m)
                }
            };
            let key = parse_key(&fs::read_to_string(key)?)?;
            let info = parse_info(&fs::read_to_string(info)?)?;
            let alpha = parse_alpha(&fs::read_to_string(alpha_file)?)?;
            schemes::restore(&tensor, &info, &key, alpha)?
        }
        Method::Hs => {
            let side = match require(&args.side, "side") {
                Ok(s) => s,
                Err(UsageError(m)) => return usage(&m),
            };
            let side = side_file::decode_side(&fs::read(side)?)?;
            let data = hs::hs_restore_tensor(&tensor.data, &side)?;
            WeightTensor { data, precision: tensor.precision }.canonicalized()
        }
    };
    write_file(&args.out, &write_tensor(&restored))?;
    println!("restored {} weights", restored.len());
    Ok(0)
}

// ------------------------------------------------------------- verify

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let received = args.input.read()?;
    let original = read_tensor(&fs::read(&args.original)?)?;
    let key = parse_key(&fs::read_to_string(&args.key)?)?;
    let info = parse_info(&fs::read_to_string(&args.info)?)?;
    let alpha = parse_alpha(&fs::read_to_string(&args.alpha_file)?)?;
    let report = match args.noise_bound {
        None => schemes::verify_integrity_noiseless(&received, &info, &key, alpha, &original)?,
        Some(bound) => {
            schemes::verify_integrity_noisy(&received, &info, &key, alpha, &original, bound)?
        }
    };
    println!("b = {}", report.ratio);
    println!("mismatches = {}", report.mismatch_count);
    println!("tampered = {}", report.tampered);
    Ok(if report.tampered && args.strict_exit { 4 } else { 0 })
}

// ----------------------------------------------------------- infringe

fn cmd_infringe(args: InfringeArgs) -> Result<i32> {
    let suspect = args.input.read()?;
    let key = parse_key(&fs::read_to_string(&args.key)?)?;
    let info = parse_info(&fs::read_to_string(&args.info)?)?;
    let original = unpack_message_file(&fs::read(&args.message_file)?, info.m_card)?;
    let (ber, detected) =
        schemes::infringement_check(&suspect, &info, &key, &original, args.threshold)?;
    println!("ber = {ber}");
    println!("detected = {detected}");
    Ok(if detected && args.strict_exit { 4 } else { 0 })
}

// ------------------------------------------------------------ analyze

/// Digit-pair host view of arbitrary-scale weights: rescaled by a power of
/// ten into (-1, 1), then decomposed; significant digits are scale-invariant
/// so the pair values are unaffected. The pair position is fixed by the
/// caller or chosen by the min-entropy rule.
fn digit_host(data: &[f64], q: usize, pair_index: Option<usize>) -> Result<Vec<f64>> {
    let max = data.iter().fold(0.0f64, |acc, &w| acc.max(w.abs()));
    if !(max > 0.0) {
        return Err(Error::Domain("cannot preprocess an all-zero tensor".into()));
    }
    let mut exp = max.log10().floor() as i32 + 1;
    loop {
        let scale = 10f64.powi(-exp);
        let scaled: Vec<f64> = data.iter().map(|&w| w * scale).collect();
        let result = match pair_index {
            Some(c) => hs::preprocess_with_index(&scaled, q, 0, c),
            None => hs::preprocess(&scaled, q, 0),
        };
        match result {
            Ok(pre) => return Ok(pre.host.iter().map(|&h| h as f64).collect()),
            // a maximal element can still round up to 1.0 at q digits
            Err(Error::Domain(_)) if exp < 512 && scale > f64::MIN_POSITIVE => exp += 1,
            Err(e) => return Err(e),
        }
    }
}

fn summary_rows(prefix: &str, s: &stats::DistributionSummary) -> Vec<Vec<String>> {
    vec![
        vec![format!("{prefix}_skewness"), csv_float(s.skewness)],
        vec![format!("{prefix}_kurtosis"), csv_float(s.kurtosis)],
        vec![format!("{prefix}_ks_statistic"), csv_float(s.ks_statistic)],
        vec![format!("{prefix}_ks_p"), csv_float(s.ks_p)],
        vec![format!("{prefix}_jb_statistic"), csv_float(s.jb_statistic)],
        vec![format!("{prefix}_jb_p"), csv_float(s.jb_p)],
    ]
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    let tensor = args.input.read()?;
    let raw = stats::summarize(&tensor.data)?;
    let host = digit_host(&tensor.data, args.q, Some(args.pair_index))?;
    let pre = stats::summarize(&host)?;

    let mut rows = vec![vec!["metric".to_string(), "value".to_string()]];
    rows.push(vec!["n".into(), raw.n.to_string()]);
    rows.extend(summary_rows("raw", &raw));
    rows.extend(summary_rows("preprocessed", &pre));
    write_file(&args.out_csv, &write_csv(&rows)?)?;

    if let Some(qq_csv) = &args.qq_csv {
        let sample = match args.qq_view {
            QqView::Raw => &tensor.data,
            QqView::Preprocessed => &host,
        };
        let points = match args.qq {
            QqReference::Normal => {
                let (mu, sd) = stats::fit_normal(sample)?;
                stats::qq_points(sample, stats::normal_quantile_fn(mu, sd)?)?
            }
            QqReference::Uniform => {
                let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                stats::qq_points(sample, stats::uniform_quantile_fn(lo, hi)?)?
            }
        };
        let mut rows = vec![vec!["theoretical".to_string(), "empirical".to_string()]];
        rows.extend(points.iter().map(|&(t, e)| vec![csv_float(t), csv_float(e)]));
        write_file(qq_csv, &write_csv(&rows)?)?;
    }

    println!("n = {}", raw.n);
    println!("raw: skewness = {:.4}, kurtosis = {:.4}, ks_p = {:.3e}, jb_p = {:.3e}",
        raw.skewness, raw.kurtosis, raw.ks_p, raw.jb_p);
    println!("preprocessed: skewness = {:.4}, kurtosis = {:.4}, ks_p = {:.3e}, jb_p = {:.3e}",
        pre.skewness, pre.kurtosis, pre.ks_p, pre.jb_p);
    Ok(0)
}

// ------------------------------------------------------------ compare

fn cmd_compare(args: CompareArgs) -> Result<i32> {
    let tensor = args.input.read()?;
    let fractions: Vec<f64> = args
        .fractions
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("invalid fraction {f:?}")))
        })
        .collect::<Result<_>>()?;
    if fractions.iter().any(|&f| !(0.0 < f && f <= 100.0)) {
        return Err(Error::Domain("fractions must lie in (0, 100]".into()));
    }

    let mut rows = vec![
        ["fraction", "n", "c_rqim", "c_hs", "swr_rqim", "swr_hs"]
            .map(String::from)
            .to_vec(),
    ];
    for &fraction in &fractions {
        let n = ((fraction / 100.0) * tensor.len() as f64).floor() as usize;
        if n == 0 {
            return Err(Error::Domain(format!("fraction {fraction}% selects no elements")));
        }
        let prefix = &tensor.data[..n];
        // both methods run on the digit-pair host (min-entropy pair, as the
        // embed pipeline would pick) so the comparison is equal-payload on a
        // common signal; SWR is scale-invariant anyway
        let host = digit_host(prefix, args.q, None)?;
        let host_i: Vec<i16> = host.iter().map(|&h| h as i16).collect();
        let c_hs = hs::hs_capacity(&host_i);
        let c_rqim = n;

        let payload = c_hs.min(n);
        let mut rng = SplitMix64::new(0xC0FFEE ^ fraction.to_bits());
        let bits: Vec<u8> = (0..payload).map(|_| (rng.next_u64() & 1) as u8).collect();

        let hs_params = hs::choose_peak_valley(&host_i)?;
        let marked = hs::hs_embed(&host_i, &bits, &hs_params)?;
        let marked_f: Vec<f64> = marked.iter().map(|&h| h as f64).collect();
        let swr_hs = host_swr(&host, &marked_f)?;

        let params = QimParams::new(args.delta, 2, args.alpha, 0.0)?;
        let symbols: Vec<u32> = bits.iter().map(|&b| b as u32).collect();
        let (rqim_marked, _) = qim::embed_sequence(&host, &symbols, &params)?;
        let swr_rqim = host_swr(&host, &rqim_marked)?;

        rows.push(vec![
            csv_float(fraction),
            n.to_string(),
            c_rqim.to_string(),
            c_hs.to_string(),
            swr_rqim,
            swr_hs,
        ]);
    }
    write_file(&args.out_csv, &write_csv(&rows)?)?;
    println!("wrote {} host configurations to {}", fractions.len(), args.out_csv.display());
    Ok(0)
}

fn host_swr(host: &[f64], marked: &[f64]) -> Result<String> {
    let sigma2_w = stats::mean_square_diff(marked, host)?;
    if sigma2_w > 0.0 {
        Ok(csv_float(stats::swr(stats::population_variance(host), sigma2_w)?))
    } else {
        Ok("inf".to_string())
    }
}

// ---------------------------------------------------------- distortion

fn cmd_distortion(args: DistortionArgs) -> Result<i32> {
    if args.samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let params = QimParams::new(args.delta, args.m_card, args.alpha, args.k)?;
    let mut rng = SplitMix64::new(0x5EED);
    let (mut acc, mut max_err) = (0.0f64, 0.0f64);
    for _ in 0..args.samples {
        let s = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * args.delta;
        let symbol = (rng.next_u64() % args.m_card as u64) as u32;
        let err = (qim::rqim_embed(s, symbol, &params)?.watermarked - s).abs();
        acc += err * err;
        max_err = max_err.max(err);
    }
    let measured = acc / args.samples as f64;
    let estimates = qim::theoretical_mse(&params);
    // the alpha-linear closed form and the alpha-squared derivation disagree;
    // the measurement below decides which one is right at this alpha
    let closer = if (measured - estimates.paper_value).abs()
        < (measured - estimates.derived_value).abs()
    {
        "alpha_linear"
    } else {
        "alpha_squared"
    };
    let bound = args.alpha * args.delta / 2.0;

    let rows = vec![
        vec!["metric".to_string(), "value".to_string()],
        vec!["delta".into(), csv_float(args.delta)],
        vec!["alpha".into(), csv_float(args.alpha)],
        vec!["samples".into(), args.samples.to_string()],
        vec!["measured_mse".into(), csv_float(measured)],
        vec!["closed_form_alpha_linear".into(), csv_float(estimates.paper_value)],
        vec!["closed_form_alpha_squared".into(), csv_float(estimates.derived_value)],
        vec!["closer_closed_form".into(), closer.to_string()],
        vec!["measured_max_abs_error".into(), csv_float(max_err)],
        vec!["max_abs_error_bound".into(), csv_float(bound)],
    ];
    if let Some(out_csv) = &args.out_csv {
        write_file(out_csv, &write_csv(&rows)?)?;
    }
    for row in &rows[1..] {
        println!("{} = {}", row[0], row[1]);
    }
    Ok(0)
}
