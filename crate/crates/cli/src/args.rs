use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mra_core::experiments::RateAxis;
use mra_core::GroupKind;
use serde::{Deserialize, Serialize};

/// Multi-reference alignment: simulate, estimate and bound.
#[derive(Parser, Clone, Debug, Serialize, Deserialize)]
#[command(name = "mra", version, about)]
pub struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Quadrature nodes on the circle.
    #[arg(long = "quad", global = true, default_value_t = 256)]
    pub quad: usize,

    #[arg(long, global = true, default_value = "continuous")]
    pub group: GroupKind,

    /// Output directory; a manifest.json is written next to the outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (default: MRA_THREADS, else all cores). Results do not
    /// depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    /// Draw a batch of noisy shifted copies of a signal.
    Simulate(SimulateArgs),
    /// Estimate the signal from a batch.
    Estimate(EstimateArgs),
    /// Estimate the Fourier support from the power spectrum of a batch.
    Support(SupportArgs),
    /// Moment tensor of one signal, or moment differences of two.
    Moments(MomentsArgs),
    /// KL divergence with the moment-series sandwich.
    Kl(KlArgs),
    /// Signals whose low-order moments coincide.
    Matchpair(MatchpairArgs),
    /// Risk curve of an estimator against n or sigma.
    Rate(RateArgs),
    /// Lower-bound pair and its divergence budget.
    Lowerbound(LowerboundArgs),
    /// Re-run a command from its manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Signal JSON.
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub n: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Support estimation on one half, constrained MLE on the other.
    Mle,
    /// Grand mean.
    S0,
    /// Grand mean plus first harmonic.
    S1,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EmArgs {
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Squared-extrapolation acceleration of EM.
    #[arg(long)]
    pub accelerate: bool,
    /// Run restarts on this many leading rows before refining on all rows.
    #[arg(long)]
    pub pilot: Option<usize>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Batch CSV.
    #[arg(long)]
    pub batch: PathBuf,
    #[arg(long, value_enum, default_value = "mle")]
    pub method: Method,
    #[arg(long, default_value_t = 0.25)]
    pub c0: f64,
    /// Fix the Fourier support (comma-separated) instead of estimating it.
    #[arg(long, value_delimiter = ',')]
    pub support: Option<Vec<usize>>,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SupportArgs {
    #[arg(long)]
    pub batch: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub c0: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct MomentsArgs {
    /// Signal JSON.
    #[arg(long)]
    pub signal: PathBuf,
    /// Second signal JSON; switches the output to a table of |Delta_m|.
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// Tensor order, or the largest order in the difference table.
    #[arg(long)]
    pub m: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct KlArgs {
    #[arg(long)]
    pub theta: PathBuf,
    #[arg(long)]
    pub phi: PathBuf,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 200_000)]
    pub n_mc: usize,
    #[arg(long, default_value_t = 8)]
    pub m_max: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Evaluate the bounds outside their regime (marked as not guaranteed).
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct MatchpairArgs {
    #[arg(long, default_value_t = 2)]
    pub s: usize,
    #[arg(long)]
    pub delta: f64,
    /// Signal length (default 2s + 1; 5 for the discrete group).
    #[arg(long = "len")]
    pub len: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub modulus: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Constrained MLE with the true support.
    Oracle,
    Mle,
    S0,
    S1,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct RateArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    pub estimator: EstimatorKind,
    /// Truth as signal JSON; a random signal with support {1..s} otherwise.
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub s: usize,
    #[arg(long = "len")]
    pub len: Option<usize>,
    #[arg(long, default_value = "n")]
    pub axis: RateAxis,
    /// Comma-separated grid of n or sigma values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    /// Noise level along an n axis.
    #[arg(long, default_value_t = 1.5)]
    pub sigma: f64,
    /// Base sample size along a sigma axis.
    #[arg(long, default_value_t = 500)]
    pub n0: usize,
    /// n = round(n0 * sigma^e) along a sigma axis.
    #[arg(long)]
    pub coupling_exponent: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.25)]
    pub c0: f64,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct LowerboundArgs {
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub c1: f64,
    #[arg(long = "len")]
    pub len: Option<usize>,
    #[arg(long, default_value_t = 200_000)]
    pub n_mc: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// manifest.json of an earlier run.
    pub manifest: PathBuf,
}
