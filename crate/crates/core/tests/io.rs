use std::io::Cursor;

use proptest::prelude::*;

use wsbm_core::evalsim::{simulate_network, SimulationSpec};
use wsbm_core::io::{fmt_f64, read_labels_csv, write_labels_csv};
use wsbm_core::model::{CommunityAssignment, NigPrior};
use wsbm_core::wsbm::{run_wsbm, ChainConfig, EtaScheme};
use wsbm_core::wsibm::run_wsibm;
use wsbm_core::{ChainTrace, WeightMatrix};

proptest! {
    #[test]
    fn csv_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn labels_round_trip(labels in prop::collection::vec(0usize..6, 1..30)) {
        let k = labels.iter().max().unwrap() + 1;
        let z = CommunityAssignment::new(labels.clone(), k).unwrap();
        let ids: Vec<String> = (0..labels.len()).map(|i| format!("n{i}")).collect();
        let mut buf = Vec::new();
        write_labels_csv(&mut buf, &ids, &z).unwrap();
        let (ids2, z2) = read_labels_csv(Cursor::new(buf)).unwrap();
        prop_assert_eq!(ids2, ids);
        prop_assert_eq!(z2.labels(), z.labels());
    }
}

#[test]
fn traces_round_trip_through_jsonl() {
    let net = simulate_network(&SimulationSpec::three_communities(20, 2)).unwrap();
    let cfg = ChainConfig { iterations: 50, burn_in: 25, seed: 9 };
    let prior = NigPrior::default();
    let traces = [
        run_wsibm(&net.w, &cfg, &prior, 1.0, 6).unwrap(),
        run_wsbm(&net.w, &cfg, 3, &prior, &EtaScheme::Flat.eta(3)).unwrap(),
    ];
    for t in traces {
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let back = ChainTrace::read_jsonl(Cursor::new(&buf)).unwrap();
        assert_eq!(back, t);
        let first = buf.split(|&b| b == b'\n').next().unwrap();
        assert!(String::from_utf8_lossy(first).contains("\"format_version\":1"));
    }
}

#[test]
fn truncated_trace_is_rejected() {
    let net = simulate_network(&SimulationSpec::three_communities(10, 2)).unwrap();
    let cfg = ChainConfig { iterations: 10, burn_in: 5, seed: 9 };
    let t = run_wsibm(&net.w, &cfg, &NigPrior::default(), 1.0, 4).unwrap();
    let mut buf = Vec::new();
    t.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let cut: Vec<&str> = text.lines().take(3).collect();
    assert!(ChainTrace::read_jsonl(Cursor::new(cut.join("\n"))).is_err());
    assert!(ChainTrace::read_jsonl(Cursor::new("")).is_err());
}

#[test]
fn weight_matrix_csv_round_trip() {
    let net = simulate_network(&SimulationSpec::three_communities(12, 3)).unwrap();
    let mut buf = Vec::new();
    net.w.write_csv(&mut buf).unwrap();
    let back = WeightMatrix::read_csv(Cursor::new(buf)).unwrap();
    assert_eq!(back, net.w);
}

#[test]
fn malformed_weights_are_rejected() {
    let asym = "a,b\n0,1\n2,0\n";
    assert!(WeightMatrix::read_csv(Cursor::new(asym)).is_err());
    let diag = "a,b\n1,1\n1,0\n";
    assert!(WeightMatrix::read_csv(Cursor::new(diag)).is_err());
    let text = "a,b\n0,x\nx,0\n";
    assert!(WeightMatrix::read_csv(Cursor::new(text)).is_err());
    assert!(read_labels_csv(Cursor::new("node,label\na,0\n")).is_err());
}
