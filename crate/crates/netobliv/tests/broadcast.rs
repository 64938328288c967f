use netobliv::algorithms::bounds;
use netobliv::algorithms::broadcast::*;
use netobliv::folding::profile;
use netobliv::machine::{run, validate_cluster_constraint};
use netobliv::metrics::{comm_complexity, q, to_f64, EvalParams, Q};
use netobliv::problem::BroadcastInstance;

fn input(p: usize) -> BroadcastInstance {
    let mut values = vec![0; p];
    values[0] = 42;
    BroadcastInstance { values }
}

fn h_aware(p: usize, sigma: i64) -> (Q, usize) {
    let (out, t) = run(&BroadcastAware::new(&q(sigma)), &input(p)).unwrap();
    assert_eq!(out, vec![42; p]);
    assert!(validate_cluster_constraint(&t).is_empty());
    let h = comm_complexity(&profile(&t, p).unwrap(), &EvalParams::new(p, q(sigma)).unwrap()).unwrap();
    (h, t.records.len())
}

#[test]
fn small_machines() {
    assert_eq!(h_aware(4, 0), (q(2), 2));
    for s in [0, 1, 5, 100] {
        assert_eq!(h_aware(2, s), (q(1 + s), 1));
    }
}

#[test]
fn p256_sigma16() {
    let (h, steps) = h_aware(256, 16);
    assert_eq!(steps, 2);
    assert!(to_f64(&h) <= 4.0 * bounds::broadcast(256, 16.0));
}

#[test]
fn aware_matches_lower_bound_shape() {
    for p in [16, 256, 1024] {
        for s in [0, 4, 64, 1024] {
            let r = to_f64(&h_aware(p, s).0) / bounds::broadcast(p, s as f64);
            println!("p={p} sigma={s} ratio={r:.3}");
            assert!((0.25..=4.0).contains(&r));
        }
    }
}

#[test]
fn oblivious_gap_grows() {
    let p = 1024;
    let (out, t) = run(&BroadcastOblivious, &input(p)).unwrap();
    assert_eq!(out, vec![42; p]);
    let report = gap_ratio(&t, p, &pow2_grid(2, p as u64)).unwrap();
    assert!(report.rows.windows(2).all(|w| w[0].gap <= w[1].gap));
    println!("{:?}", report.rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
    assert!(report.gap > 2.0);
    assert!(gap_ratio(&t, p, &[]).is_err());
}
