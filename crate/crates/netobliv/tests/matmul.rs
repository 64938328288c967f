use netobliv::algorithms::matmul::MatMul;
use netobliv::machine::{check_static, run, validate_cluster_constraint};
use netobliv::metrics::{check_lemma1, estimate_wiseness};
use netobliv::oracles::oracle_matmul;
use netobliv::problem::{Gen, Matrix, MatrixInstance, Semiring};

#[test]
fn identity_times_identity() {
    let s = Semiring::Integer;
    let inst = MatrixInstance { a: Matrix::identity(2, s), b: Matrix::identity(2, s), semiring: s };
    let (out, trace) = run(&MatMul::default(), &inst).unwrap();
    assert_eq!(out.c, Matrix::identity(2, s));
    assert!(validate_cluster_constraint(&trace).is_empty());
}

#[test]
fn matches_oracle_in_both_semirings() {
    let mut g = Gen::new(3);
    for s in [Semiring::Integer, Semiring::MinPlus] {
        for n in [4, 16, 64, 256, 1024] {
            let inst = g.matrix_instance(n, s);
            let (out, trace) = run(&MatMul::default(), &inst).unwrap();
            assert_eq!(out.c, oracle_matmul(&inst.a, &inst.b, s).unwrap(), "n = {n} {s:?}");
            assert!(validate_cluster_constraint(&trace).is_empty());
        }
    }
}

#[test]
fn sixty_four_has_labels_zero_and_three() {
    let mut g = Gen::new(4);
    let (_, trace) = run(&MatMul::default(), &g.matrix_instance(64, Semiring::Integer)).unwrap();
    assert_eq!(trace.label_set().into_iter().collect::<Vec<_>>(), vec![0, 3]);
}

#[test]
fn static_wise_and_folding_inequality() {
    let mut g = Gen::new(5);
    let inputs: Vec<_> = (0..5).map(|_| g.matrix_instance(64, Semiring::Integer)).collect();
    assert!(check_static(&MatMul::default(), &inputs).unwrap());
    let (_, with) = run(&MatMul::default(), &inputs[0]).unwrap();
    let (_, without) = run(&MatMul { dummies: false }, &inputs[0]).unwrap();
    for p in [2, 4, 8, 16, 32, 64] {
        assert!(check_lemma1(&with, p).unwrap());
        let a = estimate_wiseness(&with, p).unwrap();
        let b = estimate_wiseness(&without, p).unwrap();
        println!("p={p} alpha with={a} without={b}");
        assert!(a >= netobliv::metrics::ratio(1, 4));
    }
}
