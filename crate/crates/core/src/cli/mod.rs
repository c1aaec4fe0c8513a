//! Command-line front end.
//!
//! Exit codes: 0 success, 1 oracle-check mismatch, 2 configuration or usage
//! error, 3 load error, 4 I/O error.

mod commands;
mod config;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::path::PathBuf;

use crate::episode::Pattern;
use crate::error::Error;
use crate::fixtures::HintReader;
use crate::net::Activation;
use crate::render::{Normalization, OverlayConfig, RegionSpec};
use crate::saliency::{
    Head, SaliencyConfig, DEFAULT_BLUR_SIGMA, DEFAULT_JACOBIAN_EPSILON, DEFAULT_MASK_VARIANCE,
    DEFAULT_MEMORY_FACTOR, DEFAULT_STRIDE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ORACLE_MISMATCH: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_LOAD: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Param(_) => EXIT_CONFIG,
        Error::Load { .. } | Error::Shape(_) => EXIT_LOAD,
        Error::Io { .. } => EXIT_IO,
    }
}

#[derive(Parser, Debug)]
#[command(name = "atari-saliency", version, about = "Perturbation saliency for recurrent actor-critic agents")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Text file of `flag-name = value` lines used as defaults; flags given on
    /// the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Perturbation saliency maps, overlays and per-frame max/total scores.
    Saliency(SaliencyArgs),
    /// Memory saliency: output change from shrinking the LSTM cell state.
    Memory(MemoryArgs),
    /// Finite-difference gradient-magnitude maps (baseline).
    Jacobian(JacobianArgs),
    /// Convert a directory of raw frames into an 80x80 episode.
    Preprocess(PreprocessArgs),
    /// Write a synthetic episode.
    SynthEpisode(SynthEpisodeArgs),
    /// Write random or hand-constructed network weights.
    SynthWeights(SynthWeightsArgs),
    /// Region-mass time series of saliency maps.
    Stats(StatsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Saliency(_) => "saliency",
            Command::Memory(_) => "memory",
            Command::Jacobian(_) => "jacobian",
            Command::Preprocess(_) => "preprocess",
            Command::SynthEpisode(_) => "synth-episode",
            Command::SynthWeights(_) => "synth-weights",
            Command::Stats(_) => "stats",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadChoice {
    Actor,
    Critic,
    Both,
}

impl HeadChoice {
    pub fn heads(self) -> Vec<Head> {
        match self {
            HeadChoice::Actor => vec![Head::Actor],
            HeadChoice::Critic => vec![Head::Critic],
            HeadChoice::Both => vec![Head::Actor, Head::Critic],
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct InputArgs {
    /// Weights directory (or its manifest.json).
    #[arg(long, value_name = "PATH")]
    pub weights: PathBuf,
    /// Episode directory.
    #[arg(long, value_name = "DIR")]
    pub episode: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct RangeArgs {
    /// First timestep to explain.
    #[arg(long, default_value_t = 0)]
    pub t_start: usize,
    /// End of the timestep range (exclusive) [default: episode length].
    #[arg(long)]
    pub t_end: Option<usize>,
    /// Worker threads for independent forward passes.
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct PerturbArgs {
    /// Grid spacing k; scores are computed where i, j = 0 mod k.
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    pub stride: usize,
    /// Standard deviation of the blur applied inside the mask.
    #[arg(long, default_value_t = DEFAULT_BLUR_SIGMA)]
    pub blur_sigma: f32,
    /// Variance of the Gaussian perturbation mask.
    #[arg(long, default_value_t = DEFAULT_MASK_VARIANCE)]
    pub mask_var: f32,
}

impl PerturbArgs {
    pub fn config(&self) -> SaliencyConfig {
        SaliencyConfig {
            stride: self.stride,
            blur_sigma: self.blur_sigma,
            mask_variance: self.mask_var,
            head: Head::Actor,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct OverlayArgs {
    /// Intensity of the normalized maps added to the blue/red channels.
    #[arg(long, default_value_t = 1.0)]
    pub gain: f32,
    /// `episode-max` or `fixed:<s>`.
    #[arg(long, default_value_t = Normalization::EpisodeMax)]
    pub norm: Normalization,
    /// Integer upscaling of written overlays.
    #[arg(long, default_value_t = 1)]
    pub upscale: usize,
}

impl OverlayArgs {
    pub fn config(&self) -> OverlayConfig {
        OverlayConfig {
            normalization: self.norm,
            gain: self.gain,
            upscale: self.upscale,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SaliencyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = HeadChoice::Both)]
    pub head: HeadChoice,
    #[command(flatten)]
    pub perturb: PerturbArgs,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Re-evaluate every grid point from a fresh replay and require bitwise
    /// agreement.
    #[arg(long)]
    pub oracle_check: bool,
    #[command(flatten)]
    pub overlay: OverlayArgs,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct MemoryArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Factor applied to the cell state entering each step.
    #[arg(long, default_value_t = DEFAULT_MEMORY_FACTOR)]
    pub factor: f32,
    /// Also shrink the hidden state.
    #[arg(long)]
    pub perturb_hidden: bool,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct JacobianArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = HeadChoice::Both)]
    pub head: HeadChoice,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Central-difference step.
    #[arg(long, default_value_t = DEFAULT_JACOBIAN_EPSILON)]
    pub epsilon: f32,
    #[command(flatten)]
    pub overlay: OverlayArgs,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct PreprocessArgs {
    /// Directory of raw PNG frames, taken in file-name order.
    #[arg(long, value_name = "DIR")]
    pub input: PathBuf,
    /// Episode directory to write.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Rows dropped from the top after downsampling.
    #[arg(long, default_value_t = 0)]
    pub crop_top: usize,
    /// Columns dropped from the left after downsampling.
    #[arg(long, default_value_t = 0)]
    pub crop_left: usize,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SynthEpisodeArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Episode length T.
    #[arg(long, default_value_t = 16)]
    pub timesteps: usize,
    /// `bouncing-dot` or `drifting-bar`.
    #[arg(long, default_value_t = Pattern::BouncingDot)]
    pub pattern: Pattern,
    /// Inject one-hot action hints into this many top rows (1-5).
    #[arg(long)]
    pub hint_rows: Option<usize>,
    /// Number of actions encoded by hints.
    #[arg(long, default_value_t = 4)]
    pub n_actions: usize,
    /// Episode directory to write.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    /// Seeded uniform weights in [-scale, scale].
    Random,
    /// All weights zero.
    Zero,
    /// Value output linear in 25 disjoint 3x3 pixel patches.
    LinearReader,
    /// Logits read the top-row hint blocks (4 actions).
    HintReader,
    /// One LSTM unit integrating a central patch over time.
    Integrator,
    /// Random conv/head with the LSTM disconnected.
    Memoryless,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SynthWeightsArgs {
    #[arg(long, value_enum, default_value_t = Fixture::Random)]
    pub fixture: Fixture,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub n_actions: usize,
    /// Conv activation for random weights.
    #[arg(long, default_value_t = Activation::Elu)]
    pub activation: Activation,
    /// Half-width of the uniform weight distribution.
    #[arg(long, default_value_t = 0.1)]
    pub scale: f32,
    /// Detector gain of the hint-reader fixture.
    #[arg(long, default_value_t = HintReader::DEFAULT_GAIN)]
    pub hint_gain: f32,
    /// Weights directory to write.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct StatsArgs {
    /// Directory of exported maps (`maps/` of a saliency run).
    #[arg(long, value_name = "DIR", conflicts_with_all = ["weights", "episode"])]
    pub maps: Option<PathBuf>,
    /// Weights for computing maps on the fly.
    #[arg(long, value_name = "PATH", requires = "episode")]
    pub weights: Option<PathBuf>,
    /// Episode for computing maps on the fly.
    #[arg(long, value_name = "DIR", requires = "weights")]
    pub episode: Option<PathBuf>,
    /// `r0:r1,c0:c1` (half-open), `full` or `hint-band:<rows>`.
    #[arg(long, default_value = "full")]
    pub region: RegionSpec,
    #[arg(long, value_enum, default_value_t = HeadChoice::Both)]
    pub head: HeadChoice,
    #[command(flatten)]
    pub perturb: PerturbArgs,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), applies any config file and
/// runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::expand(&Cli::command(), args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
