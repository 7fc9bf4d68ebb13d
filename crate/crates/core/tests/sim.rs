mod common;

use cocwave::sim::{coc_jump, replica_rng};
use common::{coupling_violations, fcfs_cancel, random_instance};

#[test]
fn oracle_hand_cases() {
    assert_eq!(fcfs_cancel(&[0.0, 0.0], &[3.0, 5.0], 1), vec![3.0, 3.0]);
    assert_eq!(fcfs_cancel(&[0.0, 10.0], &[1.0, 1.0], 1), vec![1.0, 10.0]);
    assert_eq!(
        fcfs_cancel(&[0.0, 1.0, 4.0], &[5.0, 1.0, 1.0], 2),
        vec![5.0, 2.0, 5.0]
    );
}

#[test]
fn jump_matches_fcfs_servers() {
    let mut rng = replica_rng(2024, 0);
    for _ in 0..10_000 {
        let (w, xi, k) = random_instance(&mut rng);
        let got = coc_jump(&w, &xi, k, f64::INFINITY).unwrap();
        assert_eq!(got, fcfs_cancel(&w, &xi, k), "w={w:?} xi={xi:?} k={k}");
    }
}

#[test]
fn shared_events_keep_order() {
    let mut rng = replica_rng(77, 0);
    assert_eq!(coupling_violations(1000, 100, &mut rng), 0);
}
