use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand::Rng;
use serde::Serialize;

use wsbm_core::evalsim::{
    ari, nmi, run_benchmark, simulate_network, BenchmarkCase, BenchmarkSummary, EtaChoice, MethodConfig,
    RandomKModel, SimulationSpec, ThetaJson,
};
use wsbm_core::fit::{chain_seed, point_estimate, run_chains, Estimator, FitSettings, ModelSpec};
use wsbm_core::inference::{summarize_blocks, CommunitySummary, DrawIndex};
use wsbm_core::io::{fmt_f64, read_labels_csv, write_labels_csv};
use wsbm_core::model::{CommunityAssignment, NigPrior};
use wsbm_core::preprocess::{build_weight_matrix, CorrelationMethod, PreprocessConfig, RelativeAbundanceMatrix};
use wsbm_core::sampling::{chain_rng, derive_seed};
use wsbm_core::weights::grouped_strength;
use wsbm_core::wsibm::{DEFAULT_ALPHA, DEFAULT_K_MAX};
use wsbm_core::{ChainTrace, WeightMatrix};

use crate::args::*;
use crate::error::{CliError, CliResult};

pub const DEFAULT_FIT_ITERATIONS: usize = 10_000;
pub const DEFAULT_FIT_BURN_IN: usize = 5_000;
pub const DEFAULT_BENCH_ITERATIONS: usize = 4_000;
pub const DEFAULT_BENCH_BURN_IN: usize = 2_000;
pub const DEFAULT_REPLICATES: usize = 20;
pub const BENCH_METHODS: [&str; 5] = [
    "wsibm",
    "wsbm-flat",
    "wsbm-scaled-true",
    "wsbm-scaled-random",
    "wsbm-scaled-random-krandom",
];

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

fn out_dir(dir: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::io(path, e.into()))?;
    out.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    out.flush().map_err(|e| CliError::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Runs `write` against a buffered file and maps failures to the path.
fn write_with<F>(path: &Path, write: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> wsbm_core::Result<()>,
{
    let mut out = create(path)?;
    write(&mut out).map_err(|e| CliError::input(path, e))?;
    out.flush().map_err(|e| CliError::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn read_weights(path: &Path) -> CliResult<WeightMatrix> {
    WeightMatrix::read_csv(open(path)?).map_err(|e| CliError::input(path, e))
}

fn prior(mu0: Option<f64>, n0: Option<f64>, nu0: Option<f64>, ss0: Option<f64>) -> CliResult<NigPrior> {
    let d = NigPrior::default();
    let p = NigPrior {
        mu0: mu0.unwrap_or(d.mu0),
        n0: n0.unwrap_or(d.n0),
        nu0: nu0.unwrap_or(d.nu0),
        ss0: ss0.unwrap_or(d.ss0),
    };
    p.validate()?;
    Ok(p)
}

pub fn simulate(o: SimulateOpts) -> CliResult<()> {
    let seed = o.seed.unwrap_or(0);
    let mut spec = match &o.preset {
        Some(name) => SimulationSpec::preset(name, seed)?,
        None => {
            let k = o.k.unwrap_or(1);
            SimulationSpec {
                n: required(o.n, "n")?,
                k_true: k,
                proportions: vec![1.0 / k as f64; k],
                mu_diag: required(o.mu_diag.clone(), "mu-diag")?,
                mu_offdiag: 0.0,
                sigma2_rate: 0.1,
                permute_means: true,
                seed,
            }
        }
    };
    if let Some(n) = o.n {
        spec.n = n;
    }
    if let Some(k) = o.k {
        if k != spec.k_true && o.proportions.is_none() {
            spec.proportions = vec![1.0 / k as f64; k];
        }
        spec.k_true = k;
    }
    if let Some(p) = o.proportions {
        spec.proportions = p;
    }
    if let Some(m) = o.mu_diag {
        spec.mu_diag = m;
    }
    if let Some(m) = o.mu_offdiag {
        spec.mu_offdiag = m;
    }
    if let Some(r) = o.sigma2_rate {
        spec.sigma2_rate = r;
    }
    if let Some(p) = o.permute_means {
        spec.permute_means = p;
    }
    let net = simulate_network(&spec)?;
    let dir = out_dir(o.out_dir)?;
    write_with(&dir.join("weights.csv"), |w| net.w.write_csv(w))?;
    write_with(&dir.join("z_true.csv"), |w| {
        write_labels_csv(w, net.w.taxon_ids(), &net.z_true)
    })?;
    #[derive(Serialize)]
    struct TruthJson<'a> {
        spec: &'a SimulationSpec,
        community_sizes: Vec<usize>,
        theta: ThetaJson,
    }
    write_json(
        &dir.join("theta_true.json"),
        &TruthJson {
            spec: &spec,
            community_sizes: spec.community_sizes(),
            theta: ThetaJson::from(&net.theta_true),
        },
    )
}

pub fn preprocess(o: PreprocessOpts) -> CliResult<()> {
    let input = required(o.input, "input")?;
    let abundance = RelativeAbundanceMatrix::read_csv(open(&input)?).map_err(|e| CliError::input(&input, e))?;
    let d = PreprocessConfig::default();
    let config = PreprocessConfig {
        min_nonzero: o.min_nonzero.unwrap_or(d.min_nonzero),
        method: match o.corr {
            None => d.method,
            Some(CorrArg::Kendall) => CorrelationMethod::Kendall,
            Some(CorrArg::Spearman) => CorrelationMethod::Spearman,
            Some(CorrArg::Pearson) => CorrelationMethod::Pearson,
        },
        clamp: o.clamp.unwrap_or(d.clamp),
    };
    let (w, provenance) = build_weight_matrix(&abundance, &config)?;
    let dir = out_dir(o.out_dir)?;
    write_with(&dir.join("weights.csv"), |out| w.write_csv(out))?;
    write_json(&dir.join("provenance.json"), &provenance)
}

/// Fully resolved settings of a fit, recorded in `summary.json`.
#[derive(Debug, Serialize)]
struct FitRecord {
    settings: FitSettings,
    eta_scheme: Option<EtaArg>,
    chains: usize,
    seed: u64,
    chain_seeds: Vec<u64>,
}

fn fit_settings(o: &FitOpts) -> CliResult<(FitSettings, Option<EtaArg>)> {
    let seed = o.seed.unwrap_or(0);
    let kmax = o.kmax.unwrap_or(DEFAULT_K_MAX);
    let (model, eta_scheme) = match o.model.unwrap_or(ModelArg::Wsibm) {
        ModelArg::Wsibm => {
            if o.k.is_some() || o.eta_scheme.is_some() {
                return Err(CliError::Usage("--k and --eta-scheme apply to --model wsbm only".into()));
            }
            (
                ModelSpec::Wsibm {
                    alpha: o.alpha.unwrap_or(DEFAULT_ALPHA),
                    k_max: kmax,
                },
                None,
            )
        }
        ModelArg::Wsbm => {
            if o.alpha.is_some() {
                return Err(CliError::Usage("--alpha applies to --model wsibm only".into()));
            }
            let k = required(o.k, "k")?;
            if k == 0 {
                return Err(CliError::Usage("--k must be positive".into()));
            }
            let scheme = o.eta_scheme.unwrap_or(EtaArg::Flat);
            let eta = match scheme {
                EtaArg::Flat => vec![1.0; k],
                EtaArg::ScaledTrue => vec![100.0 * k as f64; k],
                EtaArg::ScaledRandom => {
                    if kmax == 0 {
                        return Err(CliError::Usage("--kmax must be positive".into()));
                    }
                    let k_ran = chain_rng(derive_seed(seed, u64::MAX)).random_range(1..=kmax);
                    vec![100.0 * k_ran as f64; k]
                }
            };
            (ModelSpec::Wsbm { k, eta }, Some(scheme))
        }
    };
    Ok((
        FitSettings {
            model,
            iterations: o.iterations.unwrap_or(DEFAULT_FIT_ITERATIONS),
            burn_in: o.burn_in.unwrap_or(DEFAULT_FIT_BURN_IN),
            prior: prior(o.mu0, o.n0, o.nu0, o.ss0)?,
        },
        eta_scheme,
    ))
}

pub fn fit(o: FitOpts) -> CliResult<()> {
    let input = required(o.input.clone(), "input")?;
    let (settings, eta_scheme) = fit_settings(&o)?;
    let chains = o.chains.unwrap_or(1);
    let seed = o.seed.unwrap_or(0);
    let w = read_weights(&input)?;
    let traces = run_chains(&w, &settings, chains, seed)?;

    let dir = out_dir(o.out_dir)?;
    if !o.no_traces.unwrap_or(false) {
        let chain_dir = dir.join("chains");
        std::fs::create_dir_all(&chain_dir).map_err(|e| CliError::io(&chain_dir, e))?;
        for (i, t) in traces.iter().enumerate() {
            write_with(&chain_dir.join(format!("chain_{:03}.jsonl", i + 1)), |out| t.write_jsonl(out))?;
        }
    }
    let record = FitRecord {
        settings,
        eta_scheme,
        chains,
        seed,
        chain_seeds: (0..chains).map(|i| chain_seed(seed, i)).collect(),
    };
    let estimator = match o.estimator.unwrap_or(EstimatorArg::Ppm) {
        EstimatorArg::Ppm => Estimator::Ppm,
        EstimatorArg::Map => Estimator::Map,
    };
    write_summary(&dir, &w, &traces, estimator, o.groups.as_deref(), Some(&record))
}

pub fn summarize(o: SummarizeOpts) -> CliResult<()> {
    let input = required(o.input, "input")?;
    let paths = required(o.traces, "traces")?;
    if paths.is_empty() {
        return Err(CliError::Usage("--traces needs at least one file".into()));
    }
    let w = read_weights(&input)?;
    let traces = paths
        .iter()
        .map(|p| ChainTrace::read_jsonl(open(p)?).map_err(|e| CliError::input(p, e)))
        .collect::<CliResult<Vec<_>>>()?;
    let estimator = match o.estimator.unwrap_or(EstimatorArg::Ppm) {
        EstimatorArg::Ppm => Estimator::Ppm,
        EstimatorArg::Map => Estimator::Map,
    };
    let dir = out_dir(o.out_dir)?;
    write_summary::<()>(&dir, &w, &traces, estimator, o.groups.as_deref(), None)
}

#[derive(Serialize)]
struct SummaryJson<'a, R: Serialize> {
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<&'a R>,
    estimator: Estimator,
    /// Chain and draw (both 0-based) of the point estimate.
    estimate_source: DrawIndex,
    estimate_score: f64,
    draws_used: u64,
    #[serde(flatten)]
    summary: &'a CommunitySummary,
}

fn read_groups(path: &Path, node_ids: &[String]) -> CliResult<Vec<String>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut map = std::collections::HashMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::input(path, e.into()))?;
        if rec.len() != 2 {
            return Err(CliError::input(
                path,
                wsbm_core::Error::InvalidInput("expected `node,group` rows".into()),
            ));
        }
        map.insert(rec[0].to_string(), rec[1].to_string());
    }
    node_ids
        .iter()
        .map(|id| {
            map.get(id).cloned().ok_or_else(|| {
                CliError::input(path, wsbm_core::Error::InvalidInput(format!("no group for node `{id}`")))
            })
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `ppm.csv`, `labels.csv`, `blocks.csv`, `nodes.csv`, `loglik.csv`,
/// `summary.json` and optionally `group_strength.csv`.
fn write_summary<R: Serialize>(
    dir: &Path,
    w: &WeightMatrix,
    traces: &[ChainTrace],
    estimator: Estimator,
    groups: Option<&Path>,
    run: Option<&R>,
) -> CliResult<()> {
    let (estimate, ppm) = point_estimate(traces, estimator, w)?;
    let summary = summarize_blocks(traces, &estimate.z, &ppm, w)?;
    let ids = w.taxon_ids();

    write_with(&dir.join("ppm.csv"), |out| ppm.write_csv(out, ids))?;
    let canonical = CommunityAssignment::new(
        summary.labels.iter().map(|&l| l - 1).collect(),
        summary.k_hat.max(1),
    )?;
    write_with(&dir.join("labels.csv"), |out| write_labels_csv(out, ids, &canonical))?;

    write_with(&dir.join("blocks.csv"), |out| {
        let mut c = csv::Writer::from_writer(out);
        c.write_record([
            "l", "q", "n_edges", "observed_mean", "draws", "mean", "lower", "upper", "corr_mean", "corr_lower",
            "corr_upper",
        ])?;
        for b in &summary.blocks {
            c.write_record([
                b.l.to_string(),
                b.q.to_string(),
                b.n_edges.to_string(),
                opt(b.observed_mean),
                b.draws.to_string(),
                opt(b.mean),
                opt(b.lower),
                opt(b.upper),
                opt(b.corr_mean),
                opt(b.corr_lower),
                opt(b.corr_upper),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;

    write_with(&dir.join("nodes.csv"), |out| {
        let mut c = csv::Writer::from_writer(out);
        c.write_record(["node", "label", "confidence", "strength"])?;
        for j in 0..w.n() {
            c.write_record([
                ids[j].clone(),
                summary.labels[j].to_string(),
                fmt_f64(summary.per_node_confidence[j]),
                fmt_f64(summary.nodal_strength[j]),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;

    write_with(&dir.join("loglik.csv"), |out| {
        let mut c = csv::Writer::from_writer(out);
        c.write_record(["chain", "iteration", "loglik", "k"])?;
        for (i, t) in traces.iter().enumerate() {
            for d in 0..t.len() {
                c.write_record([
                    (i + 1).to_string(),
                    (t.burn_in + d + 1).to_string(),
                    fmt_f64(t.loglik_draws[d]),
                    t.k_draws[d].to_string(),
                ])?;
            }
        }
        c.flush()?;
        Ok(())
    })?;

    if let Some(path) = groups {
        let names = read_groups(path, ids)?;
        let totals = grouped_strength(&summary.nodal_strength, &names)?;
        write_with(&dir.join("group_strength.csv"), |out| {
            let mut c = csv::Writer::from_writer(out);
            c.write_record(["group", "strength"])?;
            for (g, s) in &totals {
                c.write_record([g.clone(), fmt_f64(*s)])?;
            }
            c.flush()?;
            Ok(())
        })?;
    }

    write_json(
        &dir.join("summary.json"),
        &SummaryJson {
            run,
            estimator,
            estimate_source: estimate.index,
            estimate_score: estimate.score,
            draws_used: ppm.draws_used(),
            summary: &summary,
        },
    )
}

fn read_labels(path: &Path) -> CliResult<(Vec<String>, CommunityAssignment)> {
    read_labels_csv(open(path)?).map_err(|e| CliError::input(path, e))
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub n: usize,
    pub ari: f64,
    pub nmi: f64,
    pub k_truth: usize,
    pub k_estimate: usize,
}

pub fn evaluate(o: EvaluateOpts) -> CliResult<()> {
    let truth_path = required(o.truth, "truth")?;
    let est_path = required(o.estimate, "estimate")?;
    let (truth_ids, truth) = read_labels(&truth_path)?;
    let (est_ids, est) = read_labels(&est_path)?;
    if truth.n() != est.n() {
        return Err(CliError::input(
            &est_path,
            wsbm_core::Error::InvalidInput(format!("{} labels, truth has {}", est.n(), truth.n())),
        ));
    }
    // align by node id when both files list the same nodes in different order
    let est = if est_ids == truth_ids {
        est
    } else {
        let pos: std::collections::HashMap<&str, usize> =
            est_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let labels = truth_ids
            .iter()
            .map(|id| {
                pos.get(id.as_str()).map(|&i| est.label(i)).ok_or_else(|| {
                    CliError::input(
                        &est_path,
                        wsbm_core::Error::InvalidInput(format!("node `{id}` missing from estimate")),
                    )
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        CommunityAssignment::new(labels, est.k_max())?
    };
    let metrics = Metrics {
        n: truth.n(),
        ari: ari(&truth, &est)?,
        nmi: nmi(&truth, &est)?,
        k_truth: truth.num_occupied(),
        k_estimate: est.num_occupied(),
    };
    println!("ari\t{}", metrics.ari);
    println!("nmi\t{}", metrics.nmi);
    let dir = out_dir(o.out_dir)?;
    write_json(&dir.join("metrics.json"), &metrics)
}

fn bench_method(name: &str, o: &BenchmarkOpts, it: usize, burn: usize, prior: NigPrior) -> CliResult<MethodConfig> {
    let mut m = match name {
        "wsibm" => MethodConfig::wsibm(
            o.alpha.unwrap_or(DEFAULT_ALPHA),
            o.kmax.unwrap_or(DEFAULT_K_MAX),
            it,
            burn,
        ),
        "wsbm-flat" => MethodConfig::wsbm(EtaChoice::Flat, it, burn),
        "wsbm-scaled-true" => MethodConfig::wsbm(EtaChoice::ScaledTrue, it, burn),
        "wsbm-scaled-random" => MethodConfig::wsbm(EtaChoice::ScaledRandom(RandomKModel::TrueK), it, burn),
        "wsbm-scaled-random-krandom" => {
            MethodConfig::wsbm(EtaChoice::ScaledRandom(RandomKModel::RandomK), it, burn)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown benchmark method `{other}` (expected one of {})",
                BENCH_METHODS.join(", ")
            )))
        }
    };
    m.prior = prior;
    Ok(m)
}

pub fn benchmark(o: BenchmarkOpts) -> CliResult<()> {
    let seed = o.seed.unwrap_or(0);
    let iterations = o.iterations.unwrap_or(DEFAULT_BENCH_ITERATIONS);
    let burn_in = o.burn_in.unwrap_or(DEFAULT_BENCH_BURN_IN);
    let replicates = o.replicates.unwrap_or(DEFAULT_REPLICATES);
    let prior = prior(o.mu0, o.n0, o.nu0, o.ss0)?;
    let case_names = o
        .cases
        .clone()
        .unwrap_or_else(|| (1..=6).map(|i| format!("case{i}")).collect());
    let cases = case_names
        .iter()
        .map(|name| {
            Ok(BenchmarkCase {
                name: name.clone(),
                spec: SimulationSpec::preset(name, 0)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let method_names = o
        .methods
        .clone()
        .unwrap_or_else(|| BENCH_METHODS.iter().map(|s| s.to_string()).collect());
    let methods = method_names
        .iter()
        .map(|m| bench_method(m, &o, iterations, burn_in, prior))
        .collect::<CliResult<Vec<_>>>()?;
    let report = run_benchmark(&cases, &methods, replicates, seed, o.timing.unwrap_or(false))?;

    let dir = out_dir(o.out_dir.clone())?;
    write_with(&dir.join("report.csv"), |out| report.write_csv(out))?;
    #[derive(Serialize)]
    struct BenchJson<'a> {
        seed: u64,
        replicates: usize,
        iterations: usize,
        burn_in: usize,
        methods: &'a [MethodConfig],
        summaries: &'a [BenchmarkSummary],
    }
    write_json(
        &dir.join("summary.json"),
        &BenchJson {
            seed,
            replicates,
            iterations,
            burn_in,
            methods: &methods,
            summaries: &report.summaries,
        },
    )?;
    for s in &report.summaries {
        println!(
            "{}\t{}\tmedian_ari={}\tk_true_recovery={:.0}%\tfailures={}",
            s.case,
            s.method,
            s.median_ari.map_or("NA".into(), |v| format!("{v:.4}")),
            s.k_true_recovery_percent,
            s.failures
        );
    }
    Ok(())
}
