//! Command-line and config-file options. Every option is optional here so
//! that flags, environment variables and config files can be layered; the
//! defaults are applied by the subcommands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "wsbm",
    version,
    about = "Community detection in fully connected weighted networks with Bayesian weighted stochastic block models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a planted-partition weighted network.
    Simulate(WithConfig<SimulateOpts>),
    /// Turn an abundance table into a weight matrix.
    Preprocess(WithConfig<PreprocessOpts>),
    /// Run MCMC chains on a weight matrix and summarize them.
    Fit(WithConfig<FitOpts>),
    /// Summarize previously written chain traces.
    Summarize(WithConfig<SummarizeOpts>),
    /// Compare two label files with ARI and NMI.
    Evaluate(WithConfig<EvaluateOpts>),
    /// Replicated simulation study over several model settings.
    Benchmark(WithConfig<BenchmarkOpts>),
}

#[derive(Debug, Args)]
pub struct WithConfig<T: Args> {
    /// TOML file with defaults for any of the options below (keys are the
    /// long flag names).
    #[arg(long, env = "WSBM_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub opts: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Wsbm,
    Wsibm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaArg {
    /// eta = (1, .., 1).
    Flat,
    /// eta_l = 100 K.
    ScaledTrue,
    /// eta_l = 100 K_ran with K_ran uniform on 1..=kmax.
    ScaledRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    Ppm,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrArg {
    Kendall,
    Spearman,
    Pearson,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateOpts {
    /// Named design: case1..case3 (K = 3, n = 50/70/100) or case4..case6
    /// (K = 7, n = 100/150/200).
    #[arg(long, env = "WSBM_PRESET")]
    pub preset: Option<String>,
    #[arg(long, env = "WSBM_N")]
    pub n: Option<usize>,
    /// Number of planted communities.
    #[arg(long, env = "WSBM_K")]
    pub k: Option<usize>,
    /// Community proportions (comma separated, default equal).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub proportions: Option<Vec<f64>>,
    /// Within-community means (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu_diag: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_offdiag: Option<f64>,
    /// Rate of the exponential distribution of block variances.
    #[arg(long)]
    pub sigma2_rate: Option<f64>,
    /// Randomly assign the within means to communities (true|false).
    #[arg(long)]
    pub permute_means: Option<bool>,
    #[arg(long, env = "WSBM_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "WSBM_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PreprocessOpts {
    /// Abundance CSV: header `sample,<taxon ids..>`, one row per sample.
    #[arg(long, env = "WSBM_INPUT")]
    pub input: Option<PathBuf>,
    /// Keep taxa present in at least this many samples [default: 7].
    #[arg(long, env = "WSBM_MIN_NONZERO")]
    pub min_nonzero: Option<usize>,
    /// Correlation estimator [default: kendall].
    #[arg(long, env = "WSBM_CORR")]
    pub corr: Option<CorrArg>,
    /// Correlations are clamped to [-clamp, clamp] before the Fisher
    /// transform [default: 0.999].
    #[arg(long, env = "WSBM_CLAMP")]
    pub clamp: Option<f64>,
    #[arg(long, env = "WSBM_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitOpts {
    /// Weight-matrix CSV.
    #[arg(long, env = "WSBM_INPUT")]
    pub input: Option<PathBuf>,
    /// [default: wsibm]
    #[arg(long, env = "WSBM_MODEL")]
    pub model: Option<ModelArg>,
    /// Number of communities (wsbm).
    #[arg(long, env = "WSBM_K")]
    pub k: Option<usize>,
    /// Truncation level (wsibm) or upper bound of K_ran (scaled-random)
    /// [default: 20].
    #[arg(long, env = "WSBM_KMAX")]
    pub kmax: Option<usize>,
    /// Concentration (wsibm) [default: 1].
    #[arg(long, env = "WSBM_ALPHA")]
    pub alpha: Option<f64>,
    /// Dirichlet hyperparameters (wsbm) [default: flat].
    #[arg(long, env = "WSBM_ETA_SCHEME")]
    pub eta_scheme: Option<EtaArg>,
    /// [default: 10000]
    #[arg(long, env = "WSBM_ITERATIONS")]
    pub iterations: Option<usize>,
    /// [default: 5000]
    #[arg(long, env = "WSBM_BURN_IN")]
    pub burn_in: Option<usize>,
    /// [default: 1]
    #[arg(long, env = "WSBM_CHAINS")]
    pub chains: Option<usize>,
    /// [default: 0]
    #[arg(long, env = "WSBM_SEED")]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true, env = "WSBM_MU0")]
    pub mu0: Option<f64>,
    #[arg(long, env = "WSBM_N0")]
    pub n0: Option<f64>,
    #[arg(long, env = "WSBM_NU0")]
    pub nu0: Option<f64>,
    #[arg(long, env = "WSBM_SS0")]
    pub ss0: Option<f64>,
    /// Point estimate [default: ppm].
    #[arg(long, env = "WSBM_ESTIMATOR")]
    pub estimator: Option<EstimatorArg>,
    /// Do not write per-chain traces.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_traces: Option<bool>,
    /// `node,group` CSV; adds group-level nodal strengths.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long, env = "WSBM_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SummarizeOpts {
    /// Weight-matrix CSV the traces were fitted to.
    #[arg(long, env = "WSBM_INPUT")]
    pub input: Option<PathBuf>,
    /// Chain trace files (JSON lines).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub traces: Option<Vec<PathBuf>>,
    #[arg(long, env = "WSBM_ESTIMATOR")]
    pub estimator: Option<EstimatorArg>,
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long, env = "WSBM_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvaluateOpts {
    /// Reference `node,label` CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Estimated `node,label` CSV.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    #[arg(long, env = "WSBM_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchmarkOpts {
    /// Preset names [default: case1..case6].
    #[arg(long, value_delimiter = ',')]
    pub cases: Option<Vec<String>>,
    /// wsibm, wsbm-flat, wsbm-scaled-true, wsbm-scaled-random,
    /// wsbm-scaled-random-krandom [default: all].
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// [default: 20]
    #[arg(long)]
    pub replicates: Option<usize>,
    /// [default: 4000]
    #[arg(long, env = "WSBM_ITERATIONS")]
    pub iterations: Option<usize>,
    /// [default: 2000]
    #[arg(long, env = "WSBM_BURN_IN")]
    pub burn_in: Option<usize>,
    /// [default: 1]
    #[arg(long, env = "WSBM_ALPHA")]
    pub alpha: Option<f64>,
    /// [default: 20]
    #[arg(long, env = "WSBM_KMAX")]
    pub kmax: Option<usize>,
    #[arg(long, allow_hyphen_values = true, env = "WSBM_MU0")]
    pub mu0: Option<f64>,
    #[arg(long, env = "WSBM_N0")]
    pub n0: Option<f64>,
    #[arg(long, env = "WSBM_NU0")]
    pub nu0: Option<f64>,
    #[arg(long, env = "WSBM_SS0")]
    pub ss0: Option<f64>,
    #[arg(long, env = "WSBM_SEED")]
    pub seed: Option<u64>,
    /// Record wall-clock time per fit (makes the report non-reproducible).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub timing: Option<bool>,
    #[arg(long, env = "WSBM_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}
