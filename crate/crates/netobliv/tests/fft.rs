use netobliv::algorithms::fft::Fft;
use netobliv::machine::{check_static, run, validate_cluster_constraint};
use netobliv::metrics::check_lemma1;
use netobliv::oracles::{max_rel_error, oracle_dft};
use netobliv::problem::{FftOutput, Gen};

#[test]
fn complex_matches_naive_dft() {
    let mut g = Gen::new(7);
    for n in [2, 4, 8, 16, 64, 256] {
        for _ in 0..3 {
            let inst = g.fft_complex(n);
            let (out, trace) = run(&Fft::default(), &inst).unwrap();
            let (FftOutput::Complex(a), FftOutput::Complex(b)) = (out, oracle_dft(&inst)) else { panic!() };
            assert!(max_rel_error(&a, &b) < 1e-9, "n = {n}");
            assert!(validate_cluster_constraint(&trace).is_empty());
        }
    }
}

#[test]
fn modular_is_bit_exact() {
    let mut g = Gen::new(8);
    for n in [4, 32, 128, 1024] {
        let inst = g.fft_modular(n);
        let (out, _) = run(&Fft::default(), &inst).unwrap();
        assert_eq!(out, oracle_dft(&inst), "n = {n}");
    }
}

#[test]
fn static_and_folding_inequality() {
    let mut g = Gen::new(9);
    let inputs: Vec<_> = (0..5).map(|_| g.fft_complex(64)).collect();
    assert!(check_static(&Fft::default(), &inputs).unwrap());
    let (_, trace) = run(&Fft::default(), &inputs[0]).unwrap();
    for p in [1, 2, 4, 8, 16, 32, 64] {
        assert!(check_lemma1(&trace, p).unwrap());
    }
}

#[test]
fn strict_rejects_non_tower_sizes() {
    let mut g = Gen::new(1);
    let strict = Fft { dummies: true, strict: true };
    assert!(run(&strict, &g.fft_modular(16)).is_ok());
    assert!(run(&strict, &g.fft_modular(32)).is_err());
    assert!(run(&Fft::default(), &g.fft_modular(12)).is_err());
}

#[test]
fn label_set_for_sixteen() {
    let mut g = Gen::new(2);
    let (_, trace) = run(&Fft::default(), &g.fft_modular(16)).unwrap();
    assert_eq!(trace.label_set().into_iter().collect::<Vec<_>>(), vec![0, 2, 3]);
}
