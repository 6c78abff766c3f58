//! Replicated fits of simulated networks under several model settings.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ari, nmi};
use super::simulate::{simulate_network, SimulationSpec};
use crate::error::{Error, Result};
use crate::fit::{point_estimate, run_chain, Estimator, FitSettings, ModelSpec};
use crate::io::fmt_f64;
use crate::model::NigPrior;
use crate::sampling::{chain_rng, derive_seed};

/// Dirichlet hyperparameter choice for a finite-model benchmark fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaChoice {
    /// `eta = (1, .., 1)`.
    Flat,
    /// `eta_l = 100 K_true`.
    ScaledTrue,
    /// `eta_l = 100 K_ran`, `K_ran` uniform on `1..=k_max`.
    ScaledRandom(RandomKModel),
}

/// Number of communities fitted when `eta` uses a random `K_ran`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomKModel {
    /// Fit `K_true` communities; only `eta` uses `K_ran`.
    TrueK,
    /// Fit `K_ran` communities as well.
    RandomK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "model")]
pub enum BenchMethod {
    Wsibm { alpha: f64, k_max: usize },
    Wsbm { eta: EtaChoice, k_max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub name: String,
    pub method: BenchMethod,
    pub iterations: usize,
    pub burn_in: usize,
    pub prior: NigPrior,
    pub estimator: Estimator,
}

impl MethodConfig {
    /// Infinite model with the point estimate taken from the PPM.
    pub fn wsibm(alpha: f64, k_max: usize, iterations: usize, burn_in: usize) -> Self {
        MethodConfig {
            name: "wsibm".into(),
            method: BenchMethod::Wsibm { alpha, k_max },
            iterations,
            burn_in,
            prior: NigPrior::default(),
            estimator: Estimator::Ppm,
        }
    }

    /// Finite model with the MAP point estimate.
    pub fn wsbm(eta: EtaChoice, iterations: usize, burn_in: usize) -> Self {
        let name = match eta {
            EtaChoice::Flat => "wsbm-flat",
            EtaChoice::ScaledTrue => "wsbm-scaled-true",
            EtaChoice::ScaledRandom(RandomKModel::TrueK) => "wsbm-scaled-random",
            EtaChoice::ScaledRandom(RandomKModel::RandomK) => "wsbm-scaled-random-krandom",
        };
        MethodConfig {
            name: name.into(),
            method: BenchMethod::Wsbm { eta, k_max: 20 },
            iterations,
            burn_in,
            prior: NigPrior::default(),
            estimator: Estimator::Map,
        }
    }

    fn settings(&self, k_true: usize, fit_seed: u64) -> FitSettings {
        let model = match self.method {
            BenchMethod::Wsibm { alpha, k_max } => ModelSpec::Wsibm { alpha, k_max },
            BenchMethod::Wsbm { eta, k_max } => {
                let (k, k_ref) = match eta {
                    EtaChoice::Flat => (k_true, None),
                    EtaChoice::ScaledTrue => (k_true, Some(k_true)),
                    EtaChoice::ScaledRandom(model_k) => {
                        let k_ran = chain_rng(derive_seed(fit_seed, u64::MAX)).random_range(1..=k_max);
                        match model_k {
                            RandomKModel::TrueK => (k_true, Some(k_ran)),
                            RandomKModel::RandomK => (k_ran, Some(k_ran)),
                        }
                    }
                };
                let eta = match k_ref {
                    None => vec![1.0; k],
                    Some(r) => vec![100.0 * r as f64; k],
                };
                ModelSpec::Wsbm { k, eta }
            }
        };
        FitSettings {
            model,
            iterations: self.iterations,
            burn_in: self.burn_in,
            prior: self.prior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub name: String,
    pub spec: SimulationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub case: String,
    pub method: String,
    pub replicate: usize,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    /// Modal number of occupied communities for the infinite model, number
    /// of communities in the point estimate for the finite model.
    pub k_hat: Option<usize>,
    pub runtime_ms: Option<u128>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub case: String,
    pub method: String,
    pub replicates: usize,
    pub failures: usize,
    pub median_ari: Option<f64>,
    pub median_nmi: Option<f64>,
    pub mean_ari: Option<f64>,
    /// Percentage of successful replicates estimating each K.
    pub k_hat_percent: BTreeMap<usize, f64>,
    pub k_true: usize,
    pub k_true_recovery_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub rows: Vec<BenchmarkRow>,
    pub summaries: Vec<BenchmarkSummary>,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    Some(if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    })
}

struct Outcome {
    ari: f64,
    nmi: f64,
    k_hat: usize,
}

fn fit_one(case: &BenchmarkCase, method: &MethodConfig, sim_seed: u64, fit_seed: u64) -> Result<Outcome> {
    let mut spec = case.spec.clone();
    spec.seed = sim_seed;
    let net = simulate_network(&spec)?;
    let settings = method.settings(spec.k_true, fit_seed);
    let trace = run_chain(&net.w, &settings, fit_seed)?;
    let (estimate, _) = point_estimate(std::slice::from_ref(&trace), method.estimator, &net.w)?;
    let k_hat = match method.method {
        BenchMethod::Wsibm { .. } => trace.modal_k().unwrap_or(0),
        BenchMethod::Wsbm { .. } => estimate.z.num_occupied(),
    };
    Ok(Outcome {
        ari: ari(&net.z_true, &estimate.z)?,
        nmi: nmi(&net.z_true, &estimate.z)?,
        k_hat,
    })
}

/// Fits every method to `replicates` simulated networks of every case.
///
/// Replicate `r` of case `c` is simulated with seed
/// `derive_seed(seed, c << 32 | r)`, shared by all methods; method `m` fits
/// it with `derive_seed(simulation_seed, m + 1)`. A failed fit is recorded
/// in its row and the sweep continues. Wall-clock times are only recorded
/// when `record_timing` is set, so reports are otherwise reproducible byte
/// for byte.
pub fn run_benchmark(
    cases: &[BenchmarkCase],
    methods: &[MethodConfig],
    replicates: usize,
    seed: u64,
    record_timing: bool,
) -> Result<BenchmarkReport> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be at least 1".into()));
    }
    if cases.is_empty() || methods.is_empty() {
        return Err(Error::InvalidParameter("need at least one case and one method".into()));
    }
    for case in cases {
        case.spec.validate()?;
    }
    let tasks: Vec<(usize, usize, usize)> = (0..cases.len())
        .flat_map(|c| (0..methods.len()).flat_map(move |m| (0..replicates).map(move |r| (c, m, r))))
        .collect();
    let rows: Vec<BenchmarkRow> = tasks
        .par_iter()
        .map(|&(c, m, r)| {
            let sim_seed = derive_seed(seed, ((c as u64) << 32) | r as u64);
            let fit_seed = derive_seed(sim_seed, m as u64 + 1);
            let start = Instant::now();
            let outcome = fit_one(&cases[c], &methods[m], sim_seed, fit_seed);
            let runtime_ms = record_timing.then(|| start.elapsed().as_millis());
            let (ari, nmi, k_hat, error) = match outcome {
                Ok(o) => (Some(o.ari), Some(o.nmi), Some(o.k_hat), None),
                Err(e) => (None, None, None, Some(e.to_string())),
            };
            BenchmarkRow {
                case: cases[c].name.clone(),
                method: methods[m].name.clone(),
                replicate: r + 1,
                ari,
                nmi,
                k_hat,
                runtime_ms,
                error,
            }
        })
        .collect();

    let mut summaries = Vec::new();
    for case in cases {
        for method in methods {
            let group: Vec<&BenchmarkRow> = rows
                .iter()
                .filter(|r| r.case == case.name && r.method == method.name)
                .collect();
            let ok: Vec<&&BenchmarkRow> = group.iter().filter(|r| r.error.is_none()).collect();
            let aris: Vec<f64> = ok.iter().filter_map(|r| r.ari).collect();
            let nmis: Vec<f64> = ok.iter().filter_map(|r| r.nmi).collect();
            let mut k_hat_percent = BTreeMap::new();
            for r in &ok {
                if let Some(k) = r.k_hat {
                    *k_hat_percent.entry(k).or_insert(0.0) += 100.0 / ok.len() as f64;
                }
            }
            summaries.push(BenchmarkSummary {
                case: case.name.clone(),
                method: method.name.clone(),
                replicates: group.len(),
                failures: group.len() - ok.len(),
                mean_ari: (!aris.is_empty()).then(|| aris.iter().sum::<f64>() / aris.len() as f64),
                median_ari: median(aris),
                median_nmi: median(nmis),
                k_true_recovery_percent: k_hat_percent.get(&case.spec.k_true).copied().unwrap_or(0.0),
                k_hat_percent,
                k_true: case.spec.k_true,
            });
        }
    }
    Ok(BenchmarkReport { seed, rows, summaries })
}

impl BenchmarkReport {
    /// One row per fit: `case,method,replicate,ari,nmi,k_hat,runtime_ms,error`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["case", "method", "replicate", "ari", "nmi", "k_hat", "runtime_ms", "error"])?;
        for r in &self.rows {
            w.write_record([
                r.case.clone(),
                r.method.clone(),
                r.replicate.to_string(),
                r.ari.map(fmt_f64).unwrap_or_default(),
                r.nmi.map(fmt_f64).unwrap_or_default(),
                r.k_hat.map(|k| k.to_string()).unwrap_or_default(),
                r.runtime_ms.map(|t| t.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, case: &str, method: &str) -> Option<&BenchmarkSummary> {
        self.summaries.iter().find(|s| s.case == case && s.method == method)
    }
}
