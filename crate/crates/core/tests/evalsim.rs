use proptest::prelude::*;

use wsbm_core::evalsim::*;
use wsbm_core::fit::{point_estimate, run_chains, Estimator, FitSettings, ModelSpec};
use wsbm_core::model::{BlockStats, CommunityAssignment, NigPrior};

fn ca(labels: &[usize]) -> CommunityAssignment {
    let k = labels.iter().max().map_or(1, |m| m + 1);
    CommunityAssignment::new(labels.to_vec(), k).unwrap()
}

/// ARI from pair counts obtained by visiting every pair:
/// `2(ad - bc) / ((a+b)(b+d) + (a+c)(c+d))`.
fn ari_oracle(x: &[usize], y: &[usize]) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0i128, 0i128, 0i128, 0i128);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => a += 1,
                (true, false) => b += 1,
                (false, true) => c += 1,
                (false, false) => d += 1,
            }
        }
    }
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0 {
        return 1.0;
    }
    (2 * (a * d - b * c)) as f64 / den as f64
}

/// `(H(x) + H(y) - H(x, y)) / sqrt(H(x) H(y))` from label frequencies.
fn nmi_oracle(x: &[usize], y: &[usize]) -> f64 {
    use std::collections::HashMap;
    let n = x.len() as f64;
    let h = |keys: Vec<(usize, usize)>| -> f64 {
        let mut m: HashMap<(usize, usize), usize> = HashMap::new();
        for k in keys {
            *m.entry(k).or_default() += 1;
        }
        m.values().map(|&c| -(c as f64 / n) * (c as f64 / n).ln()).sum()
    };
    let hx = h(x.iter().map(|&a| (a, 0)).collect());
    let hy = h(y.iter().map(|&b| (b, 0)).collect());
    let hxy = h(x.iter().zip(y).map(|(&a, &b)| (a, b)).collect());
    if hx == 0.0 && hy == 0.0 {
        return 1.0;
    }
    if hx == 0.0 || hy == 0.0 {
        return 0.0;
    }
    (hx + hy - hxy) / (hx * hy).sqrt()
}

fn arb_pair() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..=10, 1usize..=5, 1usize..=5).prop_flat_map(|(n, k1, k2)| {
        (prop::collection::vec(0..k1, n), prop::collection::vec(0..k2, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn ari_equals_pair_enumeration((x, y) in arb_pair()) {
        let got = ari(&ca(&x), &ca(&y)).unwrap();
        prop_assert_eq!(got.to_bits(), ari_oracle(&x, &y).to_bits());
        prop_assert!(got <= 1.0);
    }

    #[test]
    fn nmi_matches_entropy_identity((x, y) in arb_pair()) {
        let got = nmi(&ca(&x), &ca(&y)).unwrap();
        prop_assert!((got - nmi_oracle(&x, &y)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn metrics_are_symmetric_and_label_blind((x, y) in arb_pair(), shift in 1usize..4) {
        let (zx, zy) = (ca(&x), ca(&y));
        prop_assert_eq!(ari(&zx, &zy).unwrap(), ari(&zy, &zx).unwrap());
        prop_assert!((nmi(&zx, &zy).unwrap() - nmi(&zy, &zx).unwrap()).abs() < 1e-12);
        // rename labels of y by a cyclic shift over a larger label set
        let k = y.iter().max().unwrap() + 1 + shift;
        let renamed: Vec<usize> = y.iter().map(|&l| (l + shift) % k).collect();
        let zr = ca(&renamed);
        prop_assert_eq!(ari(&zx, &zy).unwrap().to_bits(), ari(&zx, &zr).unwrap().to_bits());
        prop_assert!((nmi(&zx, &zy).unwrap() - nmi(&zx, &zr).unwrap()).abs() < 1e-12);
        prop_assert_eq!(ari(&zx, &zx).unwrap(), 1.0);
    }
}

#[test]
fn simulated_block_means_match_parameters() {
    let spec = SimulationSpec::three_communities(200, 17);
    let net = simulate_network(&spec).unwrap();
    assert_eq!(net.z_true.counts(), &[40, 100, 60]);
    let stats = BlockStats::compute(&net.w, &net.z_true);
    let mut diag: Vec<f64> = (0..3).map(|l| net.theta_true.mu(l, l)).collect();
    diag.sort_by(f64::total_cmp);
    assert_eq!(diag, vec![-3.0, 0.0, 3.0]);
    for l in 0..3 {
        for q in l..3 {
            let n = stats.n_edges(l, q) as f64;
            let se = (net.theta_true.sigma2(l, q) / n).sqrt();
            let gap = (stats.mean(l, q) - net.theta_true.mu(l, q)).abs();
            assert!(gap < 3.0 * se, "block ({l}, {q}): gap {gap}, se {se}");
        }
    }
}

#[test]
fn simulation_is_seeded() {
    let a = simulate_network(&SimulationSpec::seven_communities(100, 4)).unwrap();
    let b = simulate_network(&SimulationSpec::seven_communities(100, 4)).unwrap();
    let c = simulate_network(&SimulationSpec::seven_communities(100, 5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.w, c.w);
    assert_eq!(a.z_true.counts().iter().sum::<usize>(), 100);
}

#[test]
fn well_separated_blocks_are_recovered_exactly() {
    let spec = SimulationSpec {
        mu_diag: vec![-20.0, 0.0, 20.0],
        sigma2_rate: 1000.0,
        ..SimulationSpec::three_communities(50, 6)
    };
    let net = simulate_network(&spec).unwrap();
    let settings = FitSettings {
        model: ModelSpec::Wsibm { alpha: 1.0, k_max: 20 },
        iterations: 600,
        burn_in: 300,
        prior: NigPrior::default(),
    };
    let traces = run_chains(&net.w, &settings, 1, 6).unwrap();
    let (est, _) = point_estimate(&traces, Estimator::Ppm, &net.w).unwrap();
    assert_eq!(ari(&net.z_true, &est.z).unwrap(), 1.0);
    assert_eq!(nmi(&net.z_true, &est.z).unwrap(), 1.0);
    assert_eq!(traces[0].modal_k(), Some(3));
}

#[test]
fn presets_cover_six_cases() {
    let sizes: Vec<(usize, usize)> = (1..=6)
        .map(|i| {
            let s = SimulationSpec::preset(&format!("case{i}"), 0).unwrap();
            (s.n, s.k_true)
        })
        .collect();
    assert_eq!(sizes, vec![(50, 3), (70, 3), (100, 3), (100, 7), (150, 7), (200, 7)]);
    assert!(SimulationSpec::preset("case7", 0).is_err());
}

#[test]
fn benchmark_is_reproducible() {
    let cases = vec![BenchmarkCase {
        name: "small".into(),
        spec: SimulationSpec::three_communities(24, 0),
    }];
    let methods = vec![
        MethodConfig::wsibm(1.0, 8, 80, 40),
        MethodConfig::wsbm(EtaChoice::Flat, 80, 40),
        MethodConfig::wsbm(EtaChoice::ScaledRandom(RandomKModel::RandomK), 80, 40),
    ];
    let a = run_benchmark(&cases, &methods, 2, 31, false).unwrap();
    let b = run_benchmark(&cases, &methods, 2, 31, false).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 6);
    assert!(a.rows.iter().all(|r| r.error.is_none() && r.runtime_ms.is_none()));
    let (mut ca_, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca_).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca_, cb);
    let text = String::from_utf8(ca_).unwrap();
    assert!(text.starts_with("case,method,replicate,ari,nmi,k_hat,runtime_ms,error\n"));
    let s = a.summary("small", "wsbm-flat").unwrap();
    assert_eq!(s.replicates, 2);
    assert_eq!(s.k_true, 3);
}

#[test]
fn single_replicate_report() {
    let cases = vec![BenchmarkCase { name: "one".into(), spec: SimulationSpec::three_communities(15, 0) }];
    let methods = vec![MethodConfig::wsbm(EtaChoice::ScaledTrue, 40, 20)];
    let r = run_benchmark(&cases, &methods, 1, 0, true).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.rows[0].runtime_ms.is_some());
    let s = &r.summaries[0];
    assert_eq!(s.median_ari, r.rows[0].ari);
    assert_eq!(s.mean_ari, r.rows[0].ari);
    assert!(run_benchmark(&cases, &methods, 0, 0, false).is_err());
}

#[test]
fn reference_values() {
    assert_eq!(ari(&ca(&[0, 0, 1, 1]), &ca(&[0, 1, 0, 1])).unwrap(), -0.5);
    let v = nmi(&ca(&[0, 0, 1, 1]), &ca(&[0, 0, 0, 1])).unwrap();
    assert!((v - 0.345_592_029_944_211_3).abs() < 1e-12);
}
