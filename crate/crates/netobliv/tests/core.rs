use std::collections::HashMap;

use netobliv::algorithms::{broadcast::BroadcastOblivious, fft::Fft, matmul::MatMul};
use netobliv::fixtures::{BalancedMatching, DataDependentToy, SingleSender, TrivialExchange};
use netobliv::folding::{all_profiles, degree_profile, fold, profile, superstep_degree, DegreeProfile};
use netobliv::machine::*;
use netobliv::metrics::*;
use netobliv::problem::{BroadcastInstance, Gen, Semiring};
use proptest::prelude::*;

fn trace(v: usize, steps: &[(u32, &[(usize, usize)])]) -> Trace {
    let records = steps
        .iter()
        .enumerate()
        .map(|(seq, (label, pairs))| SuperstepRecord::new(seq, *label, pairs.iter().map(|&(s, d)| Pair::new(s, d, false)).collect()))
        .collect();
    Trace::new(v, v, records).unwrap()
}

fn single_sender(n: usize) -> Trace {
    run(&SingleSender, &vec![1; n]).unwrap().1
}

#[test]
fn trivial_exchange_trace() {
    let (out, t) = run(&TrivialExchange, &[5, 0]).unwrap();
    assert_eq!(out, [5, 5]);
    assert_eq!(t.records.len(), 1);
    assert_eq!(t.records[0].label, 0);
    assert_eq!(t.records[0].pairs().len(), 1);
}

#[test]
fn oblivious_broadcast_labels() {
    let (out, t) = run(&BroadcastOblivious, &BroadcastInstance { values: vec![9, 0, 0, 0] }).unwrap();
    assert_eq!(out, vec![9; 4]);
    assert_eq!(t.labels(), vec![0, 1]);
}

#[test]
fn matmul_64_labels() {
    let mut g = Gen::new(1);
    let (_, t) = run(&MatMul::default(), &g.matrix_instance(64, Semiring::Integer)).unwrap();
    assert_eq!(t.label_set().into_iter().collect::<Vec<_>>(), vec![0, 3]);
}

#[test]
fn cluster_violation_detected() {
    let t = trace(8, &[(1, &[(0, 4)])]);
    let v = validate_cluster_constraint(&t);
    assert_eq!(v.len(), 1);
    assert_eq!((v[0].src, v[0].dst, v[0].label), (0, 4, 1));
    let t = trace(8, &[(0, &[(0, 4), (7, 1), (3, 3)])]);
    assert!(validate_cluster_constraint(&t).is_empty());
}

#[test]
fn machine_rejects_cluster_violation_at_sync() {
    let mut m: Machine<(), i64> = Machine::new(4, 4, vec![(); 4], RunConfig::default()).unwrap();
    m.step(|ctx, _| {
        if ctx.index() == 0 {
            ctx.send(2, 1);
        }
    })
    .unwrap();
    assert!(matches!(m.sync(1), Err(MachineError::ClusterViolation { .. })));
}

#[test]
fn bad_machine_sizes() {
    assert!(matches!(Machine::<(), i64>::new(6, 6, vec![(); 6], RunConfig::default()), Err(MachineError::NotPowerOfTwo(6))));
    assert!(VpIndex::new(8, 8).is_err());
}

#[test]
fn static_checks() {
    let mut g = Gen::new(2);
    let mats: Vec<_> = (0..5).map(|_| g.matrix_instance(64, Semiring::Integer)).collect();
    assert!(check_static(&MatMul::default(), &mats).unwrap());
    assert!(!check_static(&DataDependentToy, &[vec![2, 0], vec![3, 0]]).unwrap());
}

#[test]
fn fold_identity_and_bisection() {
    let t = single_sender(16);
    let f = fold(&t, 16).unwrap();
    assert_eq!(f.records[0].degree, 16);
    assert!(!f.records[0].local);
    let f = fold(&t, 2).unwrap();
    assert_eq!(f.records[0].sent[0], 16);
    assert_eq!(f.records[0].received[1], 16);
    let prof = profile(&t, 1).unwrap();
    assert!(prof.f.iter().all(|&x| x == 0));
    assert!(fold(&t, 32).is_err());
    assert!(fold(&t, 3).is_err());
}

#[test]
fn star_and_matching_degrees() {
    let star: Vec<(usize, usize)> = (1..8).map(|j| (j, 0)).collect();
    let t = trace(8, &[(0, &star)]);
    assert_eq!(superstep_degree(&fold(&t, 8).unwrap(), 0).unwrap(), 7);
    let m: Vec<(usize, usize)> = (0..8).map(|j| (j, j ^ 4)).collect();
    let t = trace(8, &[(0, &m)]);
    assert_eq!(superstep_degree(&fold(&t, 8).unwrap(), 0).unwrap(), 1);
}

#[test]
fn profile_direct_summation() {
    let t = trace(4, &[(0, &[(0, 2), (0, 3)]), (0, &[(1, 2), (1, 3)]), (1, &[(0, 1), (0, 1), (0, 1), (0, 1), (0, 1)])]);
    let p = degree_profile(&fold(&t, 4).unwrap());
    assert_eq!(p, DegreeProfile { p: 4, s: vec![2, 1], f: vec![4, 5] });
    let empty = Trace::new(4, 4, vec![]).unwrap();
    assert_eq!(degree_profile(&fold(&empty, 4).unwrap()), DegreeProfile::zeros(4));
}

#[test]
fn fft16_profile_labels() {
    let mut g = Gen::new(3);
    let (_, t) = run(&Fft::default(), &g.fft_modular(16)).unwrap();
    let p = profile(&t, 16).unwrap();
    let used: Vec<usize> = (0..4).filter(|&i| p.s[i] > 0).collect();
    assert_eq!(used, vec![0, 2, 3]);
}

/// Recount F from the raw pairs without the folding code.
fn brute_force_f(t: &Trace, p: usize) -> Vec<u64> {
    let block = t.v / p;
    let lp = p.trailing_zeros() as usize;
    let mut f = vec![0u64; lp];
    for r in &t.records {
        if (r.label as usize) >= lp {
            continue;
        }
        let mut out: HashMap<usize, u64> = HashMap::new();
        let mut inn: HashMap<usize, u64> = HashMap::new();
        for q in r.pairs() {
            let (a, b) = (q.src as usize / block, q.dst as usize / block);
            if a != b {
                *out.entry(a).or_default() += 1;
                *inn.entry(b).or_default() += 1;
            }
        }
        let d = out.values().chain(inn.values()).copied().max().unwrap_or(0);
        f[r.label as usize] += d;
    }
    f
}

#[test]
fn matmul_folded_counts_match_recount() {
    let mut g = Gen::new(4);
    let (_, t) = run(&MatMul::default(), &g.matrix_instance(64, Semiring::Integer)).unwrap();
    for p in [2, 4, 8, 16, 32, 64] {
        assert_eq!(profile(&t, p).unwrap().f, brute_force_f(&t, p), "p = {p}");
    }
    let prof = profile(&t, 8).unwrap();
    let h = comm_complexity(&prof, &EvalParams::new(8, q(0)).unwrap()).unwrap();
    assert_eq!(h, q(prof.f.iter().sum::<u64>() as i64));
    let f = fold(&t, 8).unwrap();
    let level0: Vec<u64> = f.records.iter().filter(|r| r.label == 0).map(|r| r.degree).collect();
    // Level-0 degrees at n = 64, p = 8 (replication, combine), measured.
    assert_eq!(level0, vec![36, 20]);
}

#[test]
fn observed_degrees_agree_with_folding() {
    let mut g = Gen::new(5);
    let inst = g.matrix_instance(64, Semiring::Integer);
    let e = run_with(&MatMul::default(), &inst, RunConfig { observe: Some(8), router: None }).unwrap();
    let f = fold(&e.trace, 8).unwrap();
    let degrees: Vec<u64> = f.records.iter().map(|r| r.degree).collect();
    assert_eq!(e.observed.unwrap().degrees, degrees);
}

#[test]
fn jsonl_round_trip() {
    let mut g = Gen::new(6);
    let (_, t) = run(&MatMul::default(), &g.matrix_instance(64, Semiring::MinPlus)).unwrap();
    let mut buf = Vec::new();
    write_jsonl(&t, &mut buf).unwrap();
    let back = read_jsonl(t.v, t.n, &buf[..]).unwrap();
    assert_eq!(back.records.len(), t.records.len());
    assert!(same_structure(&[t, back]));
}

#[test]
fn corrupted_jsonl_rejected() {
    let bad = b"{\"seq\":0,\"label\":9,\"pairs\":[[0,1,false]]}\n";
    assert!(read_jsonl(4, 4, &bad[..]).is_err());
    assert!(read_jsonl(4, 4, &b"not json\n"[..]).is_err());
}

#[test]
fn h_and_d_examples() {
    let pr = DegreeProfile { p: 4, s: vec![2, 1], f: vec![4, 5] };
    assert_eq!(comm_complexity(&pr, &EvalParams::new(4, q(3)).unwrap()).unwrap(), q(18));
    assert_eq!(comm_complexity(&pr, &EvalParams::new(4, q(0)).unwrap()).unwrap(), q(9));
    let pr = DegreeProfile { p: 4, s: vec![1, 1], f: vec![2, 3] };
    let d = DbspParams::new(4, vec![q(2), q(1)], vec![q(4), q(1)]).unwrap();
    assert_eq!(comm_time(&pr, &d).unwrap(), q(12));
}

#[test]
fn single_sender_costs() {
    let n = 64;
    let t = single_sender(n);
    for p in [2, 4, 16, 64] {
        let d = DbspParams::new(p, vec![q(1); levels(p)], vec![q(0); levels(p)]).unwrap();
        assert_eq!(comm_time(&profile(&t, p).unwrap(), &d).unwrap(), q(n as i64));
        assert_eq!(estimate_wiseness(&t, p).unwrap(), ratio(2, p as i64));
        // γ = min_j n 2^j / p, reached at j = 1.
        assert_eq!(estimate_fullness(&t, p).unwrap(), ratio(2 * n as i64, p as i64));
        assert!(check_lemma1(&t, p).unwrap());
    }
}

#[test]
fn matching_is_wise_and_full() {
    let (_, t) = run(&BalancedMatching, &(0..64).collect()).unwrap();
    for p in [2, 8, 64] {
        assert_eq!(estimate_wiseness(&t, p).unwrap(), q(1));
        // Folded on 2^j processors each superstep has degree 64/2^j.
        assert_eq!(estimate_fullness(&t, p).unwrap(), ratio(64, p as i64));
    }
}

#[test]
fn silent_trace_has_no_fullness() {
    let t = trace(4, &[(0, &[])]);
    assert!(estimate_fullness(&t, 4).is_err());
}

#[test]
fn folding_inequality_on_shipped_traces() {
    let mut g = Gen::new(7);
    let (_, mm) = run(&MatMul::default(), &g.matrix_instance(64, Semiring::Integer)).unwrap();
    let (_, fft) = run(&Fft::default(), &g.fft_modular(256)).unwrap();
    for t in [mm, fft, single_sender(64)] {
        for p in [2, 4, 8, 16, 32, 64] {
            assert!(check_lemma1(&t, p).unwrap());
        }
    }
}

#[test]
fn matmul_wiseness_with_dummies() {
    let mut g = Gen::new(8);
    let (_, t) = run(&MatMul::default(), &g.matrix_instance(64, Semiring::Integer)).unwrap();
    let profiles = all_profiles(&t);
    let alphas: Vec<Q> = [2, 4, 8, 16, 32, 64].iter().map(|&p| wiseness_from_profiles(&profiles, p).unwrap()).collect();
    assert_eq!(alphas, vec![q(1), ratio(1, 2), ratio(3, 7), ratio(3, 8), ratio(3, 8), ratio(3, 8)]);
}

#[test]
fn dominance_examples() {
    let x = [q(1), q(3)];
    assert_eq!(check_dominance(&x, &x, &[q(2), q(1)]).unwrap(), Dominance::Holds);
    assert_eq!(check_dominance(&x, &[q(2), q(2)], &[q(2), q(1)]).unwrap(), Dominance::Holds);
}

#[test]
fn optimality_precondition_examples() {
    let ok = DbspParams::new(4, vec![q(1), q(1)], vec![q(0), q(0)]).unwrap();
    assert!(check_theorem1_preconditions(&ok, &SigmaRange::unbounded(2)).unwrap().ok);
    let bad = DbspParams::new(4, vec![q(1), q(2)], vec![q(0), q(0)]).unwrap();
    assert!(!check_theorem1_preconditions(&bad, &SigmaRange::unbounded(2)).unwrap().ok);
    let (n, p) = (4096usize, 64usize);
    let g: Vec<Q> = (0..6).map(|i| q(1 << (5 - i))).collect();
    let l: Vec<Q> = g.iter().map(|x| x * q((n / p) as i64)).collect();
    let params = DbspParams::new(p, g, l).unwrap();
    assert!(check_theorem1_preconditions(&params, &SigmaRange::matmul_corollary(n, n)).unwrap().ok);
}

#[test]
fn optimality_ratio_examples() {
    let t = single_sender(16);
    let e = EvalParams::new(4, q(0)).unwrap();
    let a = report(&t, &e, None).unwrap();
    assert_eq!(optimality_ratio(&a, &a).unwrap(), q(1));
    let (_, t2) = run(&SingleSender, &vec![1; 32]).unwrap();
    let b = report(&t2, &e, None).unwrap();
    assert_eq!(optimality_ratio(&b, &a).unwrap(), ratio(1, 2));
}

fn dominating() -> impl Strategy<Value = (Vec<i64>, Vec<i64>, Vec<i64>)> {
    (1usize..12).prop_flat_map(|len| {
        (
            prop::collection::vec(0i64..50, len),
            prop::collection::vec(0i64..50, len),
            prop::collection::vec(0i64..20, len),
        )
            .prop_map(|(y, raw, mut f)| {
                let (mut px, mut py) = (0, 0);
                let x = y
                    .iter()
                    .zip(&raw)
                    .map(|(&yi, &r)| {
                        py += yi;
                        let xi = r.min(py - px);
                        px += xi;
                        xi
                    })
                    .collect();
                f.sort_unstable_by(|a, b| b.cmp(a));
                (x, y, f)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn dominance_on_random_instances((x, y, f) in dominating()) {
        let qs = |v: &[i64]| v.iter().map(|&a| q(a)).collect::<Vec<_>>();
        prop_assert_eq!(check_dominance(&qs(&x), &qs(&y), &qs(&f)).unwrap(), Dominance::Holds);
    }
}
