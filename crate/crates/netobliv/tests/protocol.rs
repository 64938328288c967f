use netobliv::algorithms::{columnsort::Columnsort, fft::Fft, matmul::MatMul, stencil::Stencil};
use netobliv::fixtures::{BalancedMatching, SingleSender};
use netobliv::machine::{run, validate_cluster_constraint, AlgorithmSpec};
use netobliv::metrics::{q, DbspParams, Q};
use netobliv::problem::{Gen, NodeFn, Semiring};
use netobliv::protocol::*;
use rand::Rng;

fn flat(p: usize) -> DbspParams {
    DbspParams::flat(p, q(1)).unwrap()
}

fn same_output<A: AlgorithmSpec>(spec: &A, input: &A::Input, p: usize) -> Lemma6Report
where
    A::Output: PartialEq + std::fmt::Debug,
{
    let (out, trace) = run(spec, input).unwrap();
    for strategy in [PrefixStrategy::Flat, PrefixStrategy::Geometric] {
        let e = execute_novel(spec, input, p, &flat(p), strategy).unwrap();
        assert_eq!(e.output, out);
        assert_eq!(e.base_trace.records.len(), trace.records.len());
        assert!(validate_cluster_constraint(&e.protocol.as_trace().unwrap()).is_empty());
    }
    let e = execute_novel(spec, input, p, &flat(p), PrefixStrategy::Flat).unwrap();
    let r = check_lemma6(&e.protocol, &e.base_trace, &Lemma6Bounds::default()).unwrap();
    println!("{} p={p}: {r:?}", spec.problem_id());
    r
}

#[test]
fn outputs_match_standard_execution() {
    let mut g = Gen::new(5);
    for p in [2, 4, 16, 64] {
        assert!(same_output(&MatMul::default(), &g.matrix_instance(64, Semiring::Integer), p).ok);
        assert!(same_output(&Fft::default(), &g.fft_modular(256), p).ok);
        assert!(same_output(&Columnsort::default(), &g.keys(512), p).ok);
        assert!(same_output(&Stencil::one_d(), &g.stencil(1, 64, NodeFn::Mix), p).ok);
        assert!(same_output(&SingleSender, &vec![1; 256], p).ok);
        assert!(same_output(&BalancedMatching, &(0..256).collect(), p).ok);
    }
}

#[test]
fn single_sender_geometric_beats_standard() {
    let p = 16;
    let params = DbspParams::geometric(p, q(2), q(0)).unwrap();
    for n in [16usize, 64, 256, 1024] {
        let input: Vec<i64> = (0..n as i64).collect();
        let e = execute_novel(&SingleSender, &input, p, &params, PrefixStrategy::Geometric).unwrap();
        let std_d = standard_comm_time(&e.base_trace, &params).unwrap();
        assert_eq!(std_d, q(n as i64) * params.g[0].clone());
        let flat_d = execute_novel(&SingleSender, &input, p, &params, PrefixStrategy::Flat).unwrap().d;
        println!("n={n} standard={std_d} novel={} novel_flat={flat_d}", e.d);
        if n >= 64 {
            assert!(e.d < std_d);
        }
    }
}

#[test]
fn balanced_matching_overhead_only() {
    let p = 16;
    let params = flat(p);
    let input: Vec<i64> = (0..256).collect();
    let e = execute_novel(&BalancedMatching, &input, p, &params, PrefixStrategy::Flat).unwrap();
    assert!(e.d >= standard_comm_time(&e.base_trace, &params).unwrap());
}

#[test]
fn two_processors_descend_only() {
    let e = execute_novel(&SingleSender, &vec![3; 8], 2, &flat(2), PrefixStrategy::Flat).unwrap();
    assert_eq!(e.output[4], 24);
    assert!(e.protocol.records.iter().all(|r| r.phase != Phase::Ascend));
}

#[test]
fn prefix_matches_scan() {
    let mut g = Gen::new(9);
    let vals: Vec<u64> = (0..16).map(|_| g.rng().gen_range(0..1000)).collect();
    let (out, steps) =
        prefix_within_cluster(ClusterId::new(0, 0, 16).unwrap(), 16, &vals, 0, |a, b| a + b, PrefixStrategy::Flat).unwrap();
    let mut acc = 0;
    let scan: Vec<u64> = vals.iter().map(|v| { acc += v; acc }).collect();
    assert_eq!(out, scan);
    assert_eq!(steps.len(), 8);
    for s in &steps {
        let mut sent = [0; 16];
        for &(a, _) in &s.pairs {
            sent[a as usize] += 1;
        }
        assert!(sent.iter().all(|&c| c <= 1));
    }
}

#[test]
fn jsonl_round_trip() {
    let e = execute_novel(&SingleSender, &vec![1; 64], 8, &flat(8), PrefixStrategy::Geometric).unwrap();
    let mut buf = Vec::new();
    e.protocol.write_jsonl(&mut buf).unwrap();
    let first = String::from_utf8(buf.clone()).unwrap();
    assert!(first.lines().next().unwrap().contains("\"origin_seq\":0"));
    let back = ProtocolTrace::read_jsonl("single_sender", 8, 64, PrefixStrategy::Geometric, &buf[..]).unwrap();
    assert_eq!(back.records, e.protocol.records);
}

#[test]
fn fullness_report_single_sender() {
    let p = 16;
    let sig: Vec<Q> = [0, 1, 8].iter().map(|&s| q(s)).collect();
    let r = fullness_optimality_report(&SingleSender, &vec![1; 256], p, &flat(p), PrefixStrategy::Flat, &sig).unwrap();
    println!("single sender: gamma={} c={}", r.gamma, r.c);
    assert!(r.c.is_finite());
    let r = fullness_optimality_report(&BalancedMatching, &(0..256).collect(), p, &flat(p), PrefixStrategy::Flat, &sig).unwrap();
    println!("matching: gamma={} c={}", r.gamma, r.c);
    let r = fullness_optimality_report(&SingleSender, &vec![1; 16], 2, &flat(2), PrefixStrategy::Flat, &sig).unwrap();
    assert!(r.c.is_finite());
}
