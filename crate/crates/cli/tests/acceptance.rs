//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use ndarray::{array, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

use wsbm_core::evalsim::{
    ari, nmi, run_benchmark, simulate_network, BenchmarkCase, EtaChoice, MethodConfig, SimulationSpec,
};
use wsbm_core::fit::{run_chains, FitSettings, ModelSpec};
use wsbm_core::inference::{consensus_ppm, estimate_z_ppm, trace_ppm};
use wsbm_core::model::{CommunityAssignment, NigPrior, PosteriorNig};
use wsbm_core::preprocess::{
    build_weight_matrix, fisher, inverse_fisher, mclr_transform, CorrelationMethod, PreprocessConfig,
    RelativeAbundanceMatrix,
};
use wsbm_core::sampling::chain_rng;
use wsbm_core::wsbm::ChainConfig;
use wsbm_core::wsibm::{run_wsibm, sample_sticks};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn case(name: &str, spec: SimulationSpec) -> Vec<BenchmarkCase> {
    vec![BenchmarkCase { name: name.into(), spec }]
}

fn recovery_k3() -> Outcome {
    let cases = case("k3-n100", SimulationSpec::three_communities(100, 0));
    let methods = [MethodConfig::wsibm(1.0, 20, 4000, 2000)];
    let report = run_benchmark(&cases, &methods, 20, 101, false).expect("benchmark runs");
    let s = &report.summaries[0];
    let med = s.median_ari.unwrap_or(f64::NAN);
    outcome(
        s.failures == 0 && med >= 0.9 && s.k_true_recovery_percent >= 60.0,
        format!(
            "median ARI {med:.4} (>= 0.9), K_hat = 3 in {:.0}% of 20 replicates (>= 60%)",
            s.k_true_recovery_percent
        ),
    )
}

fn recovery_k7() -> Outcome {
    let cases = case("k7-n200", SimulationSpec::seven_communities(200, 0));
    let methods = [MethodConfig::wsibm(1.0, 20, 4000, 2000)];
    let report = run_benchmark(&cases, &methods, 10, 102, false).expect("benchmark runs");
    let s = &report.summaries[0];
    let med = s.median_ari.unwrap_or(f64::NAN);
    outcome(
        s.failures == 0 && med >= 0.85,
        format!(
            "median ARI {med:.4} over 10 replicates (>= 0.85), K_hat = 7 in {:.0}%",
            s.k_true_recovery_percent
        ),
    )
}

fn prior_ordering() -> Outcome {
    let cases = case("k3-n50", SimulationSpec::three_communities(50, 0));
    let methods = [
        MethodConfig::wsbm(EtaChoice::ScaledTrue, 4000, 2000),
        MethodConfig::wsbm(EtaChoice::Flat, 4000, 2000),
    ];
    let report = run_benchmark(&cases, &methods, 20, 103, false).expect("benchmark runs");
    let scaled = report.summary("k3-n50", "wsbm-scaled-true").unwrap().median_ari.unwrap_or(f64::NAN);
    let flat = report.summary("k3-n50", "wsbm-flat").unwrap().median_ari.unwrap_or(f64::NAN);
    outcome(
        scaled >= flat,
        format!("median ARI eta = 100 K_true: {scaled:.4}, eta = 1: {flat:.4}"),
    )
}

/// Unnormalized log prior x likelihood written from the generative model.
fn log_unnormalized(mu: f64, s2: f64, data: &[f64], p: &NigPrior) -> f64 {
    let mut lp = -(p.nu0 / 2.0 + 1.0) * s2.ln() - p.ss0 / (2.0 * s2);
    lp += -0.5 * (s2 / p.n0).ln() - p.n0 * (mu - p.mu0).powi(2) / (2.0 * s2);
    for &x in data {
        lp += -0.5 * s2.ln() - (x - mu).powi(2) / (2.0 * s2);
    }
    lp
}

fn conjugacy() -> Outcome {
    let start = Instant::now();
    let mut rng = chain_rng(104);
    let mut worst = 0.0f64;
    let mut probes = 0;
    let m = 1601;
    let simpson: Vec<f64> = (0..m)
        .map(|i| if i == 0 || i == m - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
        .collect();
    for block in 0..2 {
        let prior = NigPrior::default();
        let len = if block == 0 { 5 } else { 2 };
        let data: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let ssd = data.iter().map(|x| (x - mean).powi(2)).sum();
        let post = PosteriorNig::from_summary(data.len() as u64, mean, ssd, &prior);

        let s2_mode = post.ss_p / (post.nu_p + 3.0);
        let sd = (s2_mode / post.n_p).sqrt();
        let points: Vec<(f64, f64)> = (0..5)
            .map(|_| {
                (
                    post.mu_p + rng.random_range(-1.5..1.5) * sd,
                    s2_mode * rng.random_range(0.5..2.0),
                )
            })
            .collect();
        let lo = data.iter().copied().fold(prior.mu0, f64::min) - 6.0;
        let hi = data.iter().copied().fold(prior.mu0, f64::max) + 6.0;
        let (a, b) = (-14.0f64, 6.0f64);
        let (hm, hs) = ((hi - lo) / (m - 1) as f64, (b - a) / (m - 1) as f64);
        let shift = log_unnormalized(points[0].0, points[0].1, &data, &prior);
        let mut z = 0.0;
        for (i, wi) in simpson.iter().enumerate() {
            let s2 = (a + i as f64 * hs).exp();
            let inner: f64 = simpson
                .iter()
                .enumerate()
                .map(|(r, wr)| wr * (log_unnormalized(lo + r as f64 * hm, s2, &data, &prior) - shift).exp())
                .sum();
            z += wi * inner * s2;
        }
        z *= hm * hs / 9.0;
        for &(mu, s2) in &points {
            let grid = (log_unnormalized(mu, s2, &data, &prior) - shift).exp() / z;
            let closed = post.log_density(mu, s2).exp();
            worst = worst.max((closed - grid).abs() / grid);
            probes += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && probes == 10 && secs < 1.0,
        format!("max relative density error {worst:.2e} at {probes} probes (< 1e-4), {secs:.2} s (< 1 s)"),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = chain_rng(105);
    let mut ari_mismatch = 0;
    let mut nmi_err = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let (k1, k2) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let x: Vec<usize> = (0..n).map(|_| rng.random_range(0..k1)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k2)).collect();
        let (zx, zy) = (
            CommunityAssignment::new(x.clone(), k1).unwrap(),
            CommunityAssignment::new(y.clone(), k2).unwrap(),
        );
        let (mut a, mut b, mut c, mut d) = (0i128, 0i128, 0i128, 0i128);
        for i in 0..n {
            for j in (i + 1)..n {
                match (x[i] == x[j], y[i] == y[j]) {
                    (true, true) => a += 1,
                    (true, false) => b += 1,
                    (false, true) => c += 1,
                    (false, false) => d += 1,
                }
            }
        }
        let den = (a + b) * (b + d) + (a + c) * (c + d);
        let oracle = if den == 0 { 1.0 } else { (2 * (a * d - b * c)) as f64 / den as f64 };
        if ari(&zx, &zy).unwrap().to_bits() != oracle.to_bits() {
            ari_mismatch += 1;
        }

        let nf = n as f64;
        let entropy = |counts: &BTreeMap<(usize, usize), usize>| -> f64 {
            counts.values().map(|&c| -(c as f64 / nf) * (c as f64 / nf).ln()).sum()
        };
        let count = |keys: Vec<(usize, usize)>| {
            let mut m = BTreeMap::new();
            for k in keys {
                *m.entry(k).or_insert(0usize) += 1;
            }
            m
        };
        let hx = entropy(&count(x.iter().map(|&l| (l, 0)).collect()));
        let hy = entropy(&count(y.iter().map(|&l| (l, 0)).collect()));
        let hxy = entropy(&count(x.iter().zip(&y).map(|(&l, &q)| (l, q)).collect()));
        let oracle_nmi = match (hx == 0.0, hy == 0.0) {
            (true, true) => 1.0,
            (true, false) | (false, true) => 0.0,
            _ => (hx + hy - hxy) / (hx * hy).sqrt(),
        };
        nmi_err = nmi_err.max((nmi(&zx, &zy).unwrap() - oracle_nmi).abs());
    }
    outcome(
        ari_mismatch == 0 && nmi_err < 1e-12,
        format!("ARI mismatches {ari_mismatch}/200 (exact), max NMI error {nmi_err:.1e} (< 1e-12)"),
    )
}

fn stick_prior() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (alpha, seed) in [(1.0, 106), (0.5, 107)] {
        let empty = CommunityAssignment::new(vec![], 20).unwrap();
        let mut rng = chain_rng(seed);
        let reps = 100_000;
        let mut max_sum_err = 0.0f64;
        let mut sum = [0.0f64; 5];
        let mut sq = [0.0f64; 5];
        for _ in 0..reps {
            let s = sample_sticks(&empty, alpha, &mut rng);
            max_sum_err = max_sum_err.max((s.rho.iter().sum::<f64>() - 1.0).abs());
            for k in 0..5 {
                sum[k] += s.rho[k];
                sq[k] += s.rho[k] * s.rho[k];
            }
        }
        let mut worst_z = 0.0f64;
        for k in 0..5 {
            let mean = sum[k] / reps as f64;
            let se = ((sq[k] / reps as f64 - mean * mean) / reps as f64).sqrt();
            let expected = alpha.powi(k as i32) / (1.0 + alpha).powi(k as i32 + 1);
            worst_z = worst_z.max((mean - expected).abs() / se);
        }
        pass &= max_sum_err <= 1e-12 && worst_z <= 3.0;
        details.push(format!("alpha {alpha}: max |sum rho - 1| {max_sum_err:.1e}, max |z| {worst_z:.2}"));
    }
    outcome(pass, format!("{} (10^5 draws each; <= 1e-12, <= 3 SE)", details.join("; ")))
}

fn label_switching() -> Outcome {
    let net = simulate_network(&SimulationSpec::three_communities(60, 108)).unwrap();
    let cfg = ChainConfig { iterations: 1000, burn_in: 500, seed: 108 };
    let trace = run_wsibm(&net.w, &cfg, &NigPrior::default(), 1.0, 20).unwrap();
    let mut switched = trace.clone();
    let mut rng = chain_rng(109);
    let mut perm: Vec<usize> = (0..trace.k_max).collect();
    for d in 0..switched.len() {
        perm.shuffle(&mut rng);
        switched.relabel_draw(d, &perm);
    }
    let (p1, p2) = (trace_ppm(&trace), trace_ppm(&switched));
    let (e1, e2) = (estimate_z_ppm(&trace, &p1).unwrap(), estimate_z_ppm(&switched, &p2).unwrap());
    let ari_same = ari(&net.z_true, &e1.z).unwrap().to_bits() == ari(&net.z_true, &e2.z).unwrap().to_bits();
    let nmi_same = nmi(&net.z_true, &e1.z).unwrap().to_bits() == nmi(&net.z_true, &e2.z).unwrap().to_bits();
    let ppm_same = p1 == p2;
    let est_same = e1.index == e2.index && e1.score.to_bits() == e2.score.to_bits() && e1.z.same_partition(&e2.z);
    outcome(
        ppm_same && est_same && ari_same && nmi_same,
        format!(
            "{} draws permuted: PPM identical {ppm_same}, z-PPM identical {est_same}, ARI identical {ari_same}, NMI identical {nmi_same}",
            trace.len()
        ),
    )
}

fn consensus() -> Outcome {
    let net = simulate_network(&SimulationSpec::three_communities(100, 110)).unwrap();
    let settings = FitSettings {
        model: ModelSpec::Wsibm { alpha: 1.0, k_max: 20 },
        iterations: 4000,
        burn_in: 2000,
        prior: NigPrior::default(),
    };
    let traces = run_chains(&net.w, &settings, 20, 110).unwrap();
    let pooled = consensus_ppm(&traces).unwrap();
    let aris: Vec<f64> = traces
        .iter()
        .map(|t| {
            let single = estimate_z_ppm(t, &trace_ppm(t)).unwrap();
            ari(&single.z, &pooled.estimate.z).unwrap()
        })
        .collect();
    let mean = aris.iter().sum::<f64>() / aris.len() as f64;
    let truth = ari(&net.z_true, &pooled.estimate.z).unwrap();
    outcome(
        mean >= 0.85,
        format!(
            "mean ARI single chain vs 20-chain consensus {mean:.4} (>= 0.85), min {:.4}, consensus vs truth {truth:.4}",
            aris.iter().copied().fold(f64::INFINITY, f64::min)
        ),
    )
}

fn preprocessing() -> Outcome {
    // zero preservation on 100 x 100 = 10^4 entries
    let mut rng = chain_rng(111);
    let mut counts = Array2::<f64>::zeros((100, 100));
    for i in 0..100 {
        for j in 0..100 {
            if j == i || rng.random_bool(0.35) {
                counts[[i, j]] = rng.random_range(1.0..1000.0);
            }
        }
    }
    let ids = |p: &str| (0..100).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let a = RelativeAbundanceMatrix::from_counts(counts.clone(), ids("s"), ids("t")).unwrap();
    let t = mclr_transform(&a).unwrap();
    let zeros = counts.iter().filter(|&&c| c == 0.0).count();
    let kept = counts
        .iter()
        .zip(t.values.iter())
        .filter(|(&c, &v)| c == 0.0 && v == 0.0)
        .count();
    let nonzero_ok = counts.iter().zip(t.values.iter()).all(|(&c, &v)| c == 0.0 || v > 0.0);

    let mut round_trip = 0.0f64;
    for i in 0..=19_980 {
        let r = -0.999 + i as f64 * 1e-4;
        round_trip = round_trip.max((inverse_fisher(fisher(r)) - r).abs());
    }

    let y = array![
        [0.2, 0.3, 0.5],
        [0.0, 0.6, 0.4],
        [0.1, 0.1, 0.8],
        [0.5, 0.0, 0.5],
        [0.3, 0.45, 0.25]
    ];
    let toy = RelativeAbundanceMatrix::new(
        y,
        (1..=5).map(|i| format!("s{i}")).collect(),
        (1..=3).map(|i| format!("t{i}")).collect(),
    )
    .unwrap();
    let cfg = PreprocessConfig { min_nonzero: 1, method: CorrelationMethod::Kendall, clamp: 0.999 };
    let (w, _) = build_weight_matrix(&toy, &cfg).unwrap();
    // Kendall tau-b (-0.2, -0.2, -0.6) -> atanh
    let hand = [(0, 1, 0.2f64.atanh() * -1.0), (0, 2, -(0.2f64.atanh())), (1, 2, -(0.6f64.atanh()))];
    let toy_err = hand
        .iter()
        .map(|&(j, k, v)| (w.get(j, k) - v).abs())
        .fold(0.0, f64::max);

    outcome(
        kept == zeros && nonzero_ok && round_trip <= 1e-12 && toy_err < 1e-14,
        format!(
            "zeros preserved {kept}/{zeros}, Fisher round-trip max error {round_trip:.1e} (<= 1e-12), toy max error {toy_err:.1e}"
        ),
    )
}

fn snapshot(dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            snapshot(&path, out);
        } else {
            out.insert(path.to_string_lossy().into_owned(), fs::read(&path).unwrap());
        }
    }
}

fn cli_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let toy = root.path().join("toy.csv");
    fs::write(
        &toy,
        "sample,t1,t2,t3\ns1,0.2,0.3,0.5\ns2,0,0.6,0.4\ns3,0.1,0.1,0.8\ns4,0.5,0,0.5\ns5,0.3,0.45,0.25\n",
    )
    .unwrap();
    let run = |tag: &str| -> (BTreeMap<String, Vec<u8>>, Vec<Vec<u8>>, bool) {
        let base = root.path().join(tag);
        let s = |p: &str| base.join(p).to_string_lossy().into_owned();
        let toy = toy.to_string_lossy().into_owned();
        let invocations: Vec<Vec<String>> = vec![
            vec!["simulate".into(), "--preset".into(), "case3".into(), "--seed".into(), "5".into(), "--out-dir".into(), s("sim")],
            vec!["preprocess".into(), "--input".into(), toy, "--min-nonzero".into(), "1".into(), "--out-dir".into(), s("pre")],
            vec![
                "fit".into(), "--input".into(), s("sim/weights.csv"), "--iterations".into(), "400".into(),
                "--burn-in".into(), "200".into(), "--chains".into(), "4".into(), "--seed".into(), "3".into(),
                "--out-dir".into(), s("fit"),
            ],
            vec![
                "fit".into(), "--input".into(), s("sim/weights.csv"), "--model".into(), "wsbm".into(), "--k".into(),
                "3".into(), "--eta-scheme".into(), "scaled-random".into(), "--estimator".into(), "map".into(),
                "--iterations".into(), "300".into(), "--burn-in".into(), "100".into(), "--chains".into(), "2".into(),
                "--out-dir".into(), s("fit-wsbm"),
            ],
            vec![
                "summarize".into(), "--input".into(), s("sim/weights.csv"), "--traces".into(),
                s("fit/chains/chain_001.jsonl"), s("fit/chains/chain_002.jsonl"), "--out-dir".into(), s("sum"),
            ],
            vec![
                "evaluate".into(), "--truth".into(), s("sim/z_true.csv"), "--estimate".into(), s("fit/labels.csv"),
                "--out-dir".into(), s("eval"),
            ],
            vec![
                "benchmark".into(), "--cases".into(), "case1,case4".into(), "--replicates".into(), "2".into(),
                "--iterations".into(), "100".into(), "--burn-in".into(), "50".into(), "--out-dir".into(), s("bench"),
            ],
        ];
        let mut stdout = Vec::new();
        let mut ok = true;
        for args in invocations {
            let out = Command::new(env!("CARGO_BIN_EXE_wsbm")).args(&args).output().unwrap();
            ok &= out.status.success();
            stdout.push(out.stdout);
        }
        let mut files = BTreeMap::new();
        snapshot(&base, &mut files);
        let files = files
            .into_iter()
            .map(|(k, v)| (k.replacen(&base.to_string_lossy().into_owned(), "", 1), v))
            .collect();
        (files, stdout, ok)
    };
    let (fa, sa, oka) = run("a");
    let (fb, sb, okb) = run("b");
    let differing = fa.iter().filter(|(k, v)| fb.get(*k) != Some(v)).count() + fb.keys().filter(|k| !fa.contains_key(*k)).count();
    outcome(
        oka && okb && differing == 0 && sa == sb,
        format!(
            "7 invocations x 2 runs: {} files compared, {differing} differ, stdout identical {}",
            fa.len(),
            sa == sb
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("simulation replication, K = 3", recovery_k3),
        ("simulation replication, K = 7", recovery_k7),
        ("prior-setting ordering", prior_ordering),
        ("conjugacy oracle", conjugacy),
        ("metric oracles", metric_oracles),
        ("stick-breaking invariants", stick_prior),
        ("label-switching robustness", label_switching),
        ("multi-chain consensus", consensus),
        ("preprocessing exactness", preprocessing),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {status}: {name}: {} [{:.1} s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
