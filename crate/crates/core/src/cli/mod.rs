//! Command-line front end.
//!
//! Settings resolve as: command-line flag, then the `--config` TOML file, then
//! built-in defaults. Exit codes: 0 success, 2 usage error, 3 numeric
//! failure, 4 I/O error.

pub mod dataset;
pub mod wav;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::ctf::{ctf_convolve, ctf_from_rir, DEFAULT_CROSSBANDS};
use crate::error::{Error, Result};
use crate::loss::{finite_difference_check, LossWeights};
use crate::metrics::{align_to_reference, sisdr, spectral_log_error};
use crate::reverb::{
    align_normalize_rir, default_rir_len, reverberate, simulate_shoebox_rir, synth_polack_rir,
    PolackParams, RoomSpec,
};
use crate::signal::{
    istft, stft, StftConfig, Waveform, DEFAULT_HOP, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW_LEN,
};
use crate::solver::{dereverb, dereverb_oracle, SolverConfig};
use dataset::{gen_dataset, DatasetOptions};
use wav::{read_wav, write_wav, WavFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Gradient-check threshold on the maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(
    name = "reverb-match",
    version,
    about = "Reverberation-matching dereverberation toolkit"
)]
pub struct Cli {
    /// Sample rate in Hz for generated signals.
    #[arg(long, global = true)]
    sr: Option<u32>,

    /// TOML file with default values for flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a Polack RIR.
    SynthRir(SynthRirArgs),
    /// Simulate a shoebox room with the image-source method.
    SimulateRoom(SimulateRoomArgs),
    /// Convolve a dry signal with an RIR.
    Reverberate(ReverberateArgs),
    /// Estimate the dry signal from a wet recording.
    Dereverb(DereverbArgs),
    /// Score an estimate against a reference.
    Eval(EvalArgs),
    /// Generate a simulated dataset with a JSON-lines manifest.
    GenDataset(GenDatasetArgs),
    /// Finite-difference check of the loss gradient.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct SynthRirArgs {
    #[arg(long)]
    rt60: f64,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, requires = "area", conflicts_with = "mixing_time_ms")]
    volume: Option<f64>,
    #[arg(long, requires = "volume")]
    area: Option<f64>,
    /// Delay from the direct path to the late tail, in milliseconds.
    #[arg(long)]
    mixing_time_ms: Option<f64>,
    /// RIR length in samples.
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateRoomArgs {
    /// Room dimensions as `LxWxH` in meters.
    #[arg(long)]
    dims: String,
    /// Source position `x,y,z`.
    #[arg(long)]
    src: String,
    /// Microphone position `x,y,z`.
    #[arg(long)]
    mic: String,
    #[arg(long)]
    rt60: f64,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    /// Keep the propagation delay and absolute scale instead of aligning.
    #[arg(long)]
    raw: bool,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Domain {
    Time,
    Ctf,
}

#[derive(Debug, Args)]
struct ReverberateArgs {
    #[arg(long)]
    dry: PathBuf,
    #[arg(long)]
    rir: PathBuf,
    #[arg(long, value_enum, default_value = "time")]
    domain: Domain,
    #[arg(long)]
    crossbands: Option<usize>,
    /// Also write the CTF tensor in the `CTF1` binary format.
    #[arg(long)]
    ctf_dump: Option<PathBuf>,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct DereverbArgs {
    #[arg(long)]
    wet: PathBuf,
    #[arg(
        long,
        required_unless_present = "oracle_rir",
        conflicts_with = "oracle_rir"
    )]
    rt60: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, requires = "area")]
    volume: Option<f64>,
    #[arg(long, requires = "volume")]
    area: Option<f64>,
    #[arg(long)]
    mixing_time_ms: Option<f64>,
    #[arg(long)]
    oracle_rir: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    crossbands: Option<usize>,
    #[arg(long)]
    resample_rir: bool,
    #[arg(short = 'o', long)]
    output: PathBuf,
    /// CSV loss trace (`iter,total,data,log`).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricKind {
    Sisdr,
    Slog,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    est: PathBuf,
    /// Compensate a global delay by cross-correlation before scoring.
    #[arg(long)]
    align: bool,
    #[arg(long, value_enum, default_value = "sisdr")]
    metric: MetricKind,
}

#[derive(Debug, Args)]
struct GenDatasetArgs {
    #[arg(long)]
    rooms: usize,
    #[arg(long)]
    rirs: usize,
    #[arg(long)]
    dry_dir: Option<PathBuf>,
    #[arg(short = 'o', long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 32)]
    fmax: usize,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long)]
    seed: Option<u64>,
}

/// Values a `--config` file may provide.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub sr: Option<u32>,
    pub sigma: Option<f64>,
    pub iters: Option<usize>,
    pub step: Option<f64>,
    pub seed: Option<u64>,
    pub crossbands: Option<usize>,
    pub max_order: Option<usize>,
    pub mixing_time_ms: Option<f64>,
    pub window: Option<usize>,
    pub hop: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

struct Ctx {
    file: FileConfig,
    sr: Option<u32>,
}

impl Ctx {
    fn sample_rate(&self) -> u32 {
        self.sr.or(self.file.sr).unwrap_or(DEFAULT_SAMPLE_RATE)
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.file.seed).unwrap_or(0)
    }

    fn stft_config(&self, sample_rate: u32) -> Result<Arc<StftConfig>> {
        let window = self.file.window.unwrap_or(DEFAULT_WINDOW_LEN);
        let hop = self.file.hop.unwrap_or(DEFAULT_HOP);
        Ok(Arc::new(StftConfig::new(window, hop, sample_rate)?))
    }

    fn crossbands(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.crossbands).unwrap_or(DEFAULT_CROSSBANDS)
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Diverged { .. } => EXIT_NUMERIC,
        Error::Io(_) | Error::Wav(_) | Error::Format(_) => EXIT_IO,
        Error::Config(_) | Error::InvalidInput(_) | Error::Shape(_) => EXIT_USAGE,
    }
}

/// Parses `args` (program name first) and runs the command, writing reports
/// to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx { file, sr: cli.sr };
    match cli.command {
        Command::SynthRir(a) => synth_rir_cmd(&ctx, a),
        Command::SimulateRoom(a) => simulate_room_cmd(&ctx, a),
        Command::Reverberate(a) => reverberate_cmd(&ctx, a),
        Command::Dereverb(a) => dereverb_cmd(&ctx, a, out),
        Command::Eval(a) => eval_cmd(&ctx, a, out),
        Command::GenDataset(a) => gen_dataset_cmd(&ctx, a, out),
        Command::Gradcheck(a) => gradcheck_cmd(&ctx, a, out),
    }
}

fn synth_rir_cmd(ctx: &Ctx, a: SynthRirArgs) -> Result<i32> {
    let fs = ctx.sample_rate();
    let mut p = PolackParams::from_rt60(a.rt60, fs, ctx.seed(a.seed));
    if let Some(s) = a.sigma.or(ctx.file.sigma) {
        p = p.with_sigma(s);
    }
    if let (Some(v), Some(ar)) = (a.volume, a.area) {
        p = p.with_room(v, ar);
    } else if let Some(ms) = a.mixing_time_ms.or(ctx.file.mixing_time_ms) {
        p = p.with_mixing_time(ms / 1000.0);
    }
    if let Some(len) = a.len {
        p = p.with_rir_len(len);
    }
    let h = synth_polack_rir(&p)?;
    write_wav(&a.output, &h.to_waveform(), WavFormat::Float32)?;
    Ok(EXIT_OK)
}

fn parse_triple(s: &str, sep: char) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(sep).map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::InvalidInput(format!(
            "expected three values separated by '{sep}', got '{s}'"
        )));
    }
    let mut v = [0.0; 3];
    for (dst, p) in v.iter_mut().zip(parts) {
        *dst = p
            .parse()
            .map_err(|_| Error::InvalidInput(format!("'{p}' is not a number")))?;
    }
    Ok(v)
}

fn simulate_room_cmd(ctx: &Ctx, a: SimulateRoomArgs) -> Result<i32> {
    let fs = ctx.sample_rate();
    let dims = parse_triple(&a.dims.to_ascii_lowercase(), 'x')?;
    let mut room = RoomSpec::new(
        dims,
        parse_triple(&a.src, ',')?,
        parse_triple(&a.mic, ',')?,
        a.rt60,
        fs,
    );
    room.max_order = a.max_order.or(ctx.file.max_order);
    room.validate()?;
    let len = a
        .len
        .unwrap_or_else(|| default_rir_len(a.rt60, fs) + room.direct_path_index());
    let mut h = simulate_shoebox_rir(&room, len)?;
    if !a.raw {
        h = align_normalize_rir(&h)?;
    }
    write_wav(&a.output, &h.to_waveform(), WavFormat::Float32)?;
    Ok(EXIT_OK)
}

fn load_rir(path: &Path) -> Result<crate::reverb::Rir> {
    let w = read_wav(path)?;
    crate::reverb::Rir::new(w.samples, w.sample_rate)
}

fn reverberate_cmd(ctx: &Ctx, a: ReverberateArgs) -> Result<i32> {
    let dry = read_wav(&a.dry)?;
    let h = load_rir(&a.rir)?;
    if dry.sample_rate != h.sample_rate {
        return Err(Error::InvalidInput(format!(
            "dry is {} Hz but RIR is {} Hz",
            dry.sample_rate, h.sample_rate
        )));
    }
    let out_len = dry.len() + h.len() - 1;
    let needs_ctf = matches!(a.domain, Domain::Ctf) || a.ctf_dump.is_some();
    let tensor = if needs_ctf {
        let cfg = ctx.stft_config(dry.sample_rate)?;
        let tensor = ctf_from_rir(&h, &cfg, ctx.crossbands(a.crossbands))?;
        if let Some(path) = &a.ctf_dump {
            let f = std::io::BufWriter::new(std::fs::File::create(path)?);
            tensor.write_to(f)?;
        }
        Some((cfg, tensor))
    } else {
        None
    };
    let wet = match (a.domain, tensor) {
        (Domain::Ctf, Some((cfg, tensor))) => {
            let s = stft(&dry, &cfg)?;
            istft(&ctf_convolve(&s, &tensor)?, out_len)?
        }
        _ => reverberate(&dry, &h)?,
    };
    write_wav(&a.output, &wet, WavFormat::Float32)?;
    Ok(EXIT_OK)
}

fn dereverb_cmd(ctx: &Ctx, a: DereverbArgs, out: &mut dyn Write) -> Result<i32> {
    let y = read_wav(&a.wet)?;
    let cfg = ctx.stft_config(y.sample_rate)?;
    let sc = SolverConfig {
        max_iters: a
            .iters
            .or(ctx.file.iters)
            .unwrap_or(SolverConfig::default().max_iters),
        step_size: a
            .step
            .or(ctx.file.step)
            .unwrap_or(SolverConfig::default().step_size),
        crossbands: ctx.crossbands(a.crossbands),
        resample_rir: a.resample_rir,
        ..SolverConfig::default()
    };
    let result = if let Some(path) = &a.oracle_rir {
        dereverb_oracle(&y, &load_rir(path)?, &cfg, &sc)?
    } else {
        let rt60 = a.rt60.expect("clap requires --rt60 without --oracle-rir");
        let mut p = PolackParams::from_rt60(rt60, y.sample_rate, ctx.seed(a.seed));
        if let Some(s) = a.sigma.or(ctx.file.sigma) {
            p = p.with_sigma(s);
        }
        if let (Some(v), Some(ar)) = (a.volume, a.area) {
            p = p.with_room(v, ar);
        }
        if let Some(ms) = a.mixing_time_ms.or(ctx.file.mixing_time_ms) {
            p = p.with_mixing_time(ms / 1000.0);
        }
        dereverb(&y, &p, &cfg, &sc)?
    };
    write_wav(&a.output, &result.dry_estimate, WavFormat::Float32)?;
    if let Some(path) = &a.trace {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "iter,total,data,log")?;
        for (i, r) in result.loss_trace.iter().enumerate() {
            writeln!(f, "{i},{},{},{}", r.total, r.data_term, r.log_term)?;
        }
    }
    writeln!(out, "iters={}", result.iters_run)?;
    writeln!(out, "initial_loss={}", result.loss_trace[0].total)?;
    writeln!(out, "final_loss={}", result.final_loss.total)?;
    Ok(EXIT_OK)
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let reference = read_wav(&a.reference)?;
    let est = read_wav(&a.est)?;
    if reference.sample_rate != est.sample_rate {
        return Err(Error::InvalidInput(
            "reference and estimate sample rates differ".into(),
        ));
    }
    let est: Waveform = if a.align {
        align_to_reference(&reference, &est, reference.sample_rate as usize / 10).0
    } else {
        est.resized(reference.len())
    };
    let score = match a.metric {
        MetricKind::Sisdr => sisdr(&reference, &est)?,
        MetricKind::Slog => {
            spectral_log_error(&reference, &est, &ctx.stft_config(reference.sample_rate)?)?
        }
    };
    writeln!(out, "{}={}", score.name, score.value)?;
    Ok(EXIT_OK)
}

fn gen_dataset_cmd(ctx: &Ctx, a: GenDatasetArgs, out: &mut dyn Write) -> Result<i32> {
    let manifest = gen_dataset(&DatasetOptions {
        n_rooms: a.rooms,
        n_rirs: a.rirs,
        out_dir: a.output,
        dry_dir: a.dry_dir,
        seed: ctx.seed(a.seed),
        sample_rate: ctx.sample_rate(),
    })?;
    writeln!(out, "manifest={}", manifest.display())?;
    Ok(EXIT_OK)
}

fn gradcheck_cmd(ctx: &Ctx, a: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let weights = [
        LossWeights {
            lambda: 0.0,
            gamma: 1.0,
        },
        LossWeights {
            lambda: 0.5,
            gamma: 0.5,
        },
        LossWeights {
            lambda: 1.0,
            gamma: 1.0,
        },
    ];
    let check =
        finite_difference_check(a.fmax, a.frames, 3, 2, &weights, 20, 1e-6, ctx.seed(a.seed))?;
    writeln!(out, "max_rel_error={:e}", check.max_rel_error)?;
    Ok(if check.max_rel_error <= GRADCHECK_TOLERANCE {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    })
}
