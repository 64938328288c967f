use netobliv::algorithms::matmul_space::{superstep_count, MatMulSpace};
use netobliv::machine::{check_static, run, validate_cluster_constraint};
use netobliv::metrics::check_lemma1;
use netobliv::oracles::oracle_matmul;
use netobliv::problem::{Gen, Semiring};

#[test]
fn matches_oracle() {
    let mut g = Gen::new(11);
    for s in [Semiring::Integer, Semiring::MinPlus] {
        for n in [4, 16, 64, 256, 1024] {
            let inst = g.matrix_instance(n, s);
            let (out, trace) = run(&MatMulSpace::default(), &inst).unwrap();
            assert_eq!(out.c, oracle_matmul(&inst.a, &inst.b, s).unwrap(), "n = {n}");
            assert_eq!(trace.records.len(), superstep_count(n));
            assert!(validate_cluster_constraint(&trace).is_empty());
            assert!(out.stats.peak_entries <= 5);
        }
    }
}

#[test]
fn labels_are_even_and_static() {
    let mut g = Gen::new(12);
    let inputs: Vec<_> = (0..5).map(|_| g.matrix_instance(64, Semiring::Integer)).collect();
    assert!(check_static(&MatMulSpace::default(), &inputs).unwrap());
    let (_, trace) = run(&MatMulSpace::default(), &inputs[0]).unwrap();
    assert_eq!(trace.label_set().into_iter().collect::<Vec<_>>(), vec![0, 2, 4]);
    for p in [2, 4, 8, 16, 32, 64] {
        assert!(check_lemma1(&trace, p).unwrap());
    }
}
