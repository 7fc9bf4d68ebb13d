//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use cocwave::sim::{EventStream, SimState};
use cocwave::{validate_config, Frame, JobClass, ScalarDist, SystemConfig};
use rand::Rng;

pub fn exp_pair(frame: Frame, v: f64) -> SystemConfig {
    SystemConfig::new(
        vec![JobClass::iid(2, 1, 1.0, ScalarDist::exp(1.0))],
        frame,
        v,
    )
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Queued,
    Serving,
    Done,
}

/// `d` unit-rate FCFS servers with backlogs `w` each receive one component
/// of a job that leaves at its `k`-th completion, withdrawing whatever is
/// still queued or in service. Returns the backlogs right after the job is
/// placed, found by stepping through start and finish events in time order.
pub fn fcfs_cancel(w: &[f64], xi: &[f64], k: usize) -> Vec<f64> {
    let d = w.len();
    // (time, is_finish, server); starts sort before finishes at equal times
    let mut events: Vec<(f64, bool, usize)> = (0..d)
        .flat_map(|i| [(w[i], false, i), (w[i] + xi[i], true, i)])
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut phase = vec![Phase::Queued; d];
    let mut done_at = vec![f64::NAN; d];
    let mut completions = 0;
    let mut leave = f64::INFINITY;
    for (t, finish, i) in events {
        if finish {
            phase[i] = Phase::Done;
            done_at[i] = t;
            completions += 1;
            if completions == k {
                leave = t;
                break;
            }
        } else {
            phase[i] = Phase::Serving;
        }
    }
    (0..d)
        .map(|i| match phase[i] {
            Phase::Done => done_at[i],
            // interrupted: the server worked on it until the job left
            Phase::Serving => leave,
            // withdrawn before it started
            Phase::Queued => w[i],
        })
        .collect()
}

fn size_laws() -> Vec<ScalarDist> {
    vec![
        ScalarDist::exp(1.0),
        ScalarDist::det(1.0),
        ScalarDist::uniform(2.0),
        ScalarDist::mixture([(0.3, ScalarDist::det(0.0)), (0.7, ScalarDist::exp(0.5))]),
        ScalarDist::mixture([(0.5, ScalarDist::det(1.0)), (0.5, ScalarDist::det(3.0))]),
    ]
}

/// Random instance `(w, xi, k)` with `d <= 5`: idle servers, integer
/// backlogs and atoms in the size laws make ties common.
pub fn random_instance<R: Rng>(rng: &mut R) -> (Vec<f64>, Vec<f64>, usize) {
    let laws = size_laws();
    let d = rng.random_range(1..=5);
    let k = rng.random_range(1..=d);
    let w = (0..d)
        .map(|_| match rng.random_range(0..3) {
            0 => 0.0,
            1 => rng.random_range(0..4) as f64,
            _ => 4.0 * rng.random::<f64>(),
        })
        .collect();
    let law = &laws[rng.random_range(0..laws.len())];
    let xi = (0..d).map(|_| law.sample(rng)).collect();
    (w, xi, k)
}

fn coupling_configs() -> Vec<SystemConfig> {
    let classes = vec![
        JobClass::iid(3, 1, 0.6, ScalarDist::exp(1.0)),
        JobClass::iid(2, 2, 0.4, ScalarDist::uniform(2.0)),
    ];
    vec![
        SystemConfig::new(classes.clone(), Frame::FREE, 0.0),
        SystemConfig::new(classes.clone(), Frame::left(0.0), 1.5),
        SystemConfig::new(classes.clone(), Frame::right(0.0), 0.5),
        SystemConfig::new(classes, Frame::both(0.0, 2.0), 1.0),
    ]
}

/// Runs `pairs` coupled trajectories of `events` shared arrivals from
/// componentwise ordered starts; returns the number of (pair, event) steps
/// where some particle of the lower system overtook its partner.
pub fn coupling_violations<R: Rng>(pairs: usize, events: usize, rng: &mut R) -> usize {
    let cfgs = coupling_configs();
    let n = 8;
    let mut bad = 0;
    for p in 0..pairs {
        let cfg = validate_config(&cfgs[p % cfgs.len()]).unwrap();
        let (lo, hi) = (cfg.frame.lower().max(-5.0), cfg.frame.upper().min(5.0));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|w| (w + rng.random::<f64>() * 2.0).min(hi))
            .collect();
        let mut a = SimState::new(&cfg, x).unwrap();
        let mut b = SimState::new(&cfg, y).unwrap();
        let mut stream = EventStream::new(&cfg, n).unwrap();
        for _ in 0..events {
            let ev = stream.draw(rng);
            a.apply(&ev).unwrap();
            b.apply(&ev).unwrap();
            if (0..n).any(|i| a.position(i) > b.position(i)) {
                bad += 1;
            }
        }
    }
    bad
}
