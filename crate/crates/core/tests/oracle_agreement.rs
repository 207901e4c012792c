//! Monte Carlo runs of the engine against the exact finish-time pmfs.

use std::collections::BTreeMap;

use dla_core::engine::{run_trial, ExecutionMode, TrialConfig};
use dla_core::oracle::{exact_tf_pmf, exact_tf_pmf_counts, exact_tf_pmf_k1, DEFAULT_STATE_CAP};
use dla_core::{split_seed, ModelSpec};

fn empirical(spec: &ModelSpec, mode: ExecutionMode, trials: u64, base: u64) -> Vec<(u64, u64)> {
    let cfg = TrialConfig {
        mode,
        ..TrialConfig::for_spec(spec)
    };
    let mut hist = BTreeMap::new();
    for i in 0..trials {
        let r = run_trial(spec, split_seed(base, i), &cfg).unwrap();
        *hist
            .entry(r.t_f().expect("small instances always finish"))
            .or_insert(0u64) += 1;
    }
    hist.into_iter().collect()
}

#[test]
fn k1_oracles_coincide() {
    for m in 2..=100 {
        let a = exact_tf_pmf_k1(m).unwrap();
        let b = exact_tf_pmf_counts(&ModelSpec::equal(1, m).unwrap(), DEFAULT_STATE_CAP).unwrap();
        assert_eq!(a.support, b.support);
        for (p, q) in a.prob.iter().zip(&b.prob) {
            assert!((p - q).abs() < 1e-12, "m={m}");
        }
    }
}

#[test]
fn tree_dynamics_match_equal_layers_at_height_one() {
    let tree = exact_tf_pmf(&ModelSpec::tree(1, 4).unwrap()).unwrap();
    let k1 = exact_tf_pmf_k1(4).unwrap();
    assert_eq!(tree.support, k1.support);
    for (p, q) in tree.prob.iter().zip(&k1.prob) {
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn engine_matches_oracles() {
    let cases = [
        (ModelSpec::equal(1, 30).unwrap(), ExecutionMode::Vertex),
        (ModelSpec::equal(2, 5).unwrap(), ExecutionMode::Vertex),
        (ModelSpec::equal(2, 5).unwrap(), ExecutionMode::Count),
        (ModelSpec::growing(2, 2).unwrap(), ExecutionMode::Count),
        (ModelSpec::tree(2, 2).unwrap(), ExecutionMode::Vertex),
        (ModelSpec::tree(3, 2).unwrap(), ExecutionMode::Vertex),
    ];
    let trials = 40_000;
    for (n, (spec, mode)) in cases.iter().enumerate() {
        let pmf = exact_tf_pmf(spec).unwrap();
        let counts = empirical(spec, *mode, trials, n as u64);
        let tv = pmf.tv_distance_to_counts(&counts, trials);
        assert!(tv < 0.015, "{spec} {mode:?}: tv {tv}");
        let mean = counts.iter().map(|&(t, c)| (t * c) as f64).sum::<f64>() / trials as f64;
        let se = (pmf.variance() / trials as f64).sqrt();
        assert!(
            (mean - pmf.mean).abs() < 4.0 * se,
            "{spec} {mode:?}: {mean} vs {}",
            pmf.mean
        );
    }
}
