//! Mean exact-path count on a small tree: brute-force expectation over all
//! walk sequences versus engine Monte Carlo.

use dla_core::analytics::expected_exact_paths;
use dla_core::engine::{ExecutionMode, Trial};
use dla_core::{split_seed, trial_rng, ModelSpec};

const K: u32 = 4;
const LEAVES: u64 = 16;

/// Heap index of `(level, x)` in the binary tree of height `K`.
fn slot(level: u32, x: u64) -> u32 {
    (1u32 << level) - 1 + x as u32
}

/// Drops a particle whose walk ends at `leaf`; returns the new occupancy.
fn drop_particle(occupied: u32, leaf: u64) -> u32 {
    let mut level = 0;
    while level < K {
        let next = leaf >> (K - level - 1);
        if occupied & (1 << slot(level + 1, next)) != 0 {
            break;
        }
        level += 1;
    }
    occupied | 1 << slot(level, leaf >> (K - level))
}

fn exact_paths_at_depth_one(occupied: u32) -> u64 {
    let is = |level: u32, x: u64| occupied & (1 << slot(level, x)) != 0;
    (0..8u64)
        .filter(|&w| {
            is(K - 1, w)
                && u32::from(is(K, 2 * w)) + u32::from(is(K, 2 * w + 1)) == 1
                && (0..K - 1).all(|level| !is(level, w >> (K - 1 - level)))
        })
        .count() as u64
}

/// `(sum of exact-path counts, number of sequences)` over all leaf sequences.
fn enumerate(occupied: u32, steps_left: u32) -> (u64, u64) {
    if steps_left == 0 || occupied & 1 != 0 {
        let weight = LEAVES.pow(steps_left);
        return (exact_paths_at_depth_one(occupied) * weight, weight);
    }
    (0..LEAVES).fold((0, 0), |(s, n), leaf| {
        let (a, b) = enumerate(drop_particle(occupied, leaf), steps_left - 1);
        (s + a, n + b)
    })
}

#[test]
fn mean_exact_paths_matches_enumeration() {
    let spec = ModelSpec::tree(K, 2).unwrap();
    let t = 5;
    let (sum, n) = enumerate(0, t);
    assert_eq!(n, LEAVES.pow(t));
    let exact = sum as f64 / n as f64;
    // The binomial arrival formula is close to, but not the same as, the truth.
    let formula = expected_exact_paths(&spec, 1, u64::from(t)).unwrap();
    assert!(
        (exact - formula).abs() < 0.05 * formula,
        "{exact} vs {formula}"
    );

    let trials = 20_000;
    let xs: Vec<f64> = (0..trials)
        .map(|i| {
            let mut rng = trial_rng(split_seed(14, i));
            let mut trial = Trial::new(spec, ExecutionMode::Vertex).unwrap();
            while trial.state().t() < u64::from(t) && !trial.is_finished() {
                trial.step(&mut rng).unwrap();
            }
            trial.count_exact_paths(1).unwrap().0 as f64
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / trials as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    assert!((mean - exact).abs() < 4.0 * se, "{mean} ± {se} vs {exact}");
}
