use netobliv::algorithms::stencil::Stencil;
use netobliv::machine::{check_static, run, validate_cluster_constraint};
use netobliv::metrics::check_lemma1;
use netobliv::oracles::oracle_stencil;
use netobliv::problem::{Gen, NodeFn};

#[test]
fn one_d_matches_oracle() {
    let mut g = Gen::new(31);
    for n in [2, 4, 8, 16, 32, 64, 128] {
        for f in [NodeFn::Sum, NodeFn::Mix] {
            let inst = g.stencil(1, n, f);
            let (out, trace) = run(&Stencil::one_d(), &inst).unwrap();
            assert_eq!(out, oracle_stencil(&inst).unwrap(), "n = {n}");
            assert!(validate_cluster_constraint(&trace).is_empty());
            println!("n={n} supersteps={}", trace.records.len());
        }
    }
}

#[test]
fn two_d_matches_oracle() {
    let mut g = Gen::new(32);
    for n in [2, 4, 8, 16] {
        let inst = g.stencil(2, n, NodeFn::Mix);
        let (out, trace) = run(&Stencil::two_d(), &inst).unwrap();
        assert_eq!(out, oracle_stencil(&inst).unwrap(), "n = {n}");
        assert!(validate_cluster_constraint(&trace).is_empty());
    }
}

#[test]
fn static_and_folding_inequality() {
    let mut g = Gen::new(33);
    let inputs: Vec<_> = (0..5).map(|_| g.stencil(1, 64, NodeFn::Sum)).collect();
    assert!(check_static(&Stencil::one_d(), &inputs).unwrap());
    let (_, trace) = run(&Stencil::one_d(), &inputs[0]).unwrap();
    for p in [2, 4, 8, 16, 32, 64] {
        assert!(check_lemma1(&trace, p).unwrap());
    }
}
