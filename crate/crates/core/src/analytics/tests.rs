use super::*;
use proptest::prelude::*;

fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn eq(k: u32, m: u64) -> ModelSpec {
    ModelSpec::equal(k, m).unwrap()
}

/// `t^{j+1} / ((j+1)! N_k ... N_{k-j+1})` with exact integer numerator and
/// denominator, for small arguments.
fn mu_exact(spec: &ModelSpec, j: u32, t: u64) -> f64 {
    let k = spec.k();
    let num = u128::from(t).pow(j + 1);
    let mut den: u128 = (1..=u128::from(j) + 1).product();
    for level in (k + 1 - j)..=k {
        den *= u128::from(spec.layer_size(level).unwrap());
    }
    num as f64 / den as f64
}

fn binom(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    (0..r).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

#[test]
fn mu_examples() {
    let any = ModelSpec::growing(4, 3).unwrap();
    assert!(rel_err(mu(&any, 0, 37.0).unwrap(), 37.0) < 1e-14);
    assert!(rel_err(mu(&eq(3, 100), 1, 50.0).unwrap(), 12.5) < 1e-13);
    let gr = ModelSpec::growing(3, 10).unwrap();
    assert!(rel_err(mu(&gr, 1, 100.0).unwrap(), 5.0) < 1e-13);
    assert_eq!(mu(&gr, 0, 0.0).unwrap(), 0.0);
    assert_eq!(
        mu(&gr, 4, 1.0),
        Err(AnalyticsError::DepthOutOfRange { j: 4, k: 3 })
    );
}

#[test]
fn mu_matches_exact_rationals() {
    let specs = [
        eq(4, 7),
        eq(2, 1000),
        ModelSpec::growing(4, 3).unwrap(),
        ModelSpec::tree(5, 2).unwrap(),
    ];
    for spec in &specs {
        for j in 0..=spec.k() {
            for t in [1u64, 2, 5, 17, 99] {
                let exact = mu_exact(spec, j, t);
                assert!(rel_err(mu(spec, j, t as f64).unwrap(), exact) < 1e-12);
            }
        }
    }
}

#[test]
fn equal_finish_times() {
    assert!(rel_err(finish_time_equal(1, 200).unwrap(), 20.0) < 1e-12);
    let tf = finish_time_equal(2, 100_000).unwrap();
    assert!((tf - 3914.8676).abs() < 1e-3, "{tf}");
    // (6 * 10^10)^{1/3}
    assert!(rel_err(tf, libm::cbrt(6.0e10)) < 1e-12);
}

#[test]
fn equal_finish_time_tends_to_n_power_over_e() {
    let mut prev = f64::INFINITY;
    for k in [2u32, 5, 10, 50, 100, 400] {
        let m = 1000u64;
        let n = f64::from(k) * m as f64;
        let ratio = finish_time_equal(k, m).unwrap() * core::f64::consts::E
            / libm::pow(n, f64::from(k) / f64::from(k + 1));
        assert!(ratio > 1.0 && ratio < prev, "k={k}: {ratio}");
        prev = ratio;
    }
    assert!(prev < 1.03, "{prev}");
}

#[test]
fn growing_finish_times() {
    let tf = finish_time_growing(17, 10).unwrap();
    assert!(rel_err(tf, libm::sqrt(17.0) * libm::pow(10.0, 12.5)) < 1e-12);
    assert!((tf / 1.304e13 - 1.0).abs() < 1e-3);
    assert!(
        rel_err(
            finish_time_growing(1, 2).unwrap(),
            core::f64::consts::SQRT_2
        ) < 1e-14
    );
    // k = 31: d-exponent 31 + 1.5 - 8 = 24.5
    let ln = ln_finish_time_growing(31, 10).unwrap();
    let exponent = (ln - 0.5 * libm::log(31.0)) / libm::log(10.0);
    assert!((exponent - 24.5).abs() < 1e-12);
}

#[test]
fn tree_finish_times() {
    assert!(rel_err(finish_time_tree(8, 2).unwrap(), libm::sqrt(8.0) * 16.0) < 1e-14);
    assert!(rel_err(finish_time_tree(2, 2).unwrap(), core::f64::consts::SQRT_2) < 1e-14);
    let tf = finish_time_tree(12, 2).unwrap();
    assert!((tf - 475.6).abs() < 0.5, "{tf}");
    assert!(finish_time_tree(0, 2).is_err());
}

#[test]
fn j_star_values() {
    assert_eq!(j_star(17), (5.0, 5));
    assert_eq!(j_star(1), (1.0, 1));
    let (real, int) = j_star(3);
    assert!((real - (libm::sqrt(8.0) - 1.0)).abs() < 1e-15);
    assert_eq!(int, 2);
    // k = 2a^2 - 1 gives an integral j*.
    for a in 1..6u32 {
        let k = 2 * a * a - 1;
        assert_eq!(j_star(k), (f64::from(2 * a - 1), 2 * a - 1));
    }
}

#[test]
fn j_star_integer_bracket() {
    for k in 1..2000u32 {
        let (_, j) = j_star(k);
        let (j, target) = (u64::from(j), 2 * u64::from(k) + 2);
        assert!(target >= j * (j + 1));
        assert!(target < (j + 1) * (j + 2));
    }
}

#[test]
fn t1_examples() {
    let gr = ModelSpec::growing(3, 10).unwrap();
    assert!(rel_err(t1(&eq(3, 100), 0).unwrap(), 1.0) < 1e-15);
    assert!(rel_err(t1(&gr, 0).unwrap(), 1.0) < 1e-15);
    let v = t1(&gr, 1).unwrap();
    assert!(rel_err(v, core::f64::consts::SQRT_2 * libm::pow(10.0, 1.5)) < 1e-13);
    assert!((v - 44.72).abs() < 0.01);
    assert!(rel_err(t1(&eq(2, 100), 1).unwrap(), libm::sqrt(200.0)) < 1e-13);
    for spec in [eq(3, 50), gr, ModelSpec::tree(6, 3).unwrap()] {
        for j in 0..=spec.k() {
            let t = t1(&spec, j).unwrap();
            assert!(rel_err(mu(&spec, j, t).unwrap(), 1.0) < 1e-12);
        }
    }
}

#[test]
fn t1_increases_up_to_j_star_for_growing_layers() {
    for (k, d) in [(5u32, 10u64), (17, 10), (8, 20), (31, 4), (12, 2)] {
        let spec = ModelSpec::growing(k, d).unwrap();
        let (_, j_int) = j_star(k);
        for j in 1..=j_int {
            assert!(
                t1(&spec, j).unwrap() > t1(&spec, j - 1).unwrap(),
                "k={k} d={d} j={j}"
            );
        }
    }
}

#[test]
fn t_conc_examples() {
    let spec = eq(2, 100);
    assert!(rel_err(t_conc(&spec, 1, 2.0).unwrap(), 80.0) < 1e-13);
    let one = t_conc(&spec, 1, 1.0).unwrap();
    assert!(rel_err(one, 2.0 * t1(&spec, 1).unwrap()) < 1e-13);
    for j in 0..=2 {
        for omega in [1.0, 2.5, 9.0] {
            let t = t_conc(&spec, j, omega).unwrap();
            let target = 4.0 * omega * omega * omega;
            assert!(rel_err(mu(&spec, j, t).unwrap(), target) < 1e-9);
        }
    }
    assert!(t_conc(&spec, 1, 0.0).is_err());
}

#[test]
fn beta_examples() {
    assert!(rel_err(beta(1, 200.0, 10.0).unwrap(), 1.0) < 1e-13);
    let b = beta(2, 2.0e5, 1.0).unwrap();
    assert!((b - 25.54).abs() < 0.01, "{b}");
    for (k, n, omega) in [(3u32, 3.0e5, 4.0), (5, 1.0e6, 2.0)] {
        let b = beta(k, n, omega).unwrap();
        let tf = finish_time_equal(k, (n / f64::from(k)) as u64).unwrap();
        assert!(rel_err(b * omega * tf, n / f64::from(k)) < 1e-12);
    }
}

#[test]
fn rounding_penalty_values() {
    assert_eq!(rounding_penalty(17, 10).unwrap(), 1.0);
    let exponent = (8.0 - 2.0 - 8.0 / 3.0 - libm::pow(libm::sqrt(8.0) - 1.0, 2.0)) / 2.0;
    let expected = libm::pow(10.0, exponent);
    assert!(rel_err(rounding_penalty(3, 10).unwrap(), expected) < 1e-12);
    assert!(expected < 1.0);
    for k in 1..200 {
        for d in [1u64, 2, 10, 1000] {
            let p = rounding_penalty(k, d).unwrap();
            assert!(p > 0.0 && p <= 1.0);
        }
    }
}

#[test]
fn arrival_and_path_probabilities() {
    assert!(rel_err(arrival_prob(3, 1, 4.0).unwrap(), 27.0 / 64.0) < 1e-14);
    assert_eq!(arrival_prob(0, 0, 8.0).unwrap(), 1.0);
    assert_eq!(arrival_prob(4, 4, 1.0).unwrap(), 1.0);
    assert!(arrival_prob(2, 3, 4.0).is_err());
    let total: f64 = (0..=20).map(|l| arrival_prob(20, l, 7.0).unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-13);
    assert!(rel_err(path_prob(2, 2).unwrap(), 1.0 / 32.0) < 1e-15);
    assert_eq!(path_prob(0, 5).unwrap(), 1.0);
}

#[test]
fn expectation_recurrence_matches_binomials() {
    // With Lhat_k(t) = t, M_{j-1} E Lhat_{k-j}(t) = C(t, j+1).
    let spec = eq(4, 1000);
    let rec = solve_expectation_recurrences(&spec, 300, 3.0).unwrap();
    for t in 0..=300u64 {
        for j in 0..=4u32 {
            let exact = binom(t, u64::from(j) + 1) as f64 / libm::pow(1000.0, f64::from(j));
            let got = rec.hat[t as usize][(4 - j) as usize];
            assert!(
                (got - exact).abs() <= 1e-12 * exact.max(1e-300),
                "t={t} j={j}: {got} vs {exact}"
            );
        }
    }
    // Closed form for the level just above k.
    for t in [1u64, 10, 50, 300] {
        let got = rec.hat[t as usize][3];
        assert!(rel_err(got, (t * (t - 1)) as f64 / 2000.0) < 1e-13 || t == 1);
    }
}

#[test]
fn recurrence_brackets_and_ordering() {
    let spec = eq(3, 1000);
    let rec = solve_expectation_recurrences(&spec, 1000, 2.0).unwrap();
    for t in 0..=1000u64 {
        for j in 0..=3u32 {
            let (lo, hi) = hat_bounds(&spec, j, t).unwrap();
            let v = rec.hat[t as usize][(3 - j) as usize];
            assert!(lo <= v && v <= hi, "t={t} j={j}: {lo} <= {v} <= {hi}");
            if t < u64::from(j) {
                assert_eq!(v, 0.0);
            }
        }
        for (lt, lh) in rec.tilde[t as usize].iter().zip(&rec.hat[t as usize]) {
            assert!(lt <= lh);
            assert!(*lt >= 0.0);
        }
    }
    // At t = t1(k-2) the level k-2 expectation sits inside the factorial bracket.
    let t = libm::floor(t1(&spec, 2).unwrap()) as u64;
    let v = rec.hat[t as usize][1];
    let lower = libm::pow((t - 2) as f64, 3.0) / (6.0 * 1.0e6);
    let upper = libm::pow(t as f64, 3.0) / (6.0 * 1.0e6);
    assert!(lower <= v && v <= upper);
}

#[test]
fn expected_exact_paths_values() {
    let spec = ModelSpec::tree(4, 2).unwrap();
    // 8 roots * (1/2) * C(5,2) / 64 * (7/8)^3
    let exact = 8.0 * 0.5 * 10.0 / 64.0 * libm::pow(7.0 / 8.0, 3.0);
    assert!(rel_err(expected_exact_paths(&spec, 1, 5).unwrap(), exact) < 1e-12);
    assert_eq!(expected_exact_paths(&spec, 1, 1).unwrap(), 0.0);
    // j = 0: expected number of leaves hit exactly once.
    let once = 16.0 * 3.0 / 16.0 * libm::pow(15.0 / 16.0, 2.0);
    assert!(rel_err(expected_exact_paths(&spec, 0, 3).unwrap(), once) < 1e-12);
    assert!(expected_exact_paths(&eq(2, 10), 1, 5).is_err());
    // Large d at fixed t approaches mu.
    let wide = ModelSpec::tree(4, 1000).unwrap();
    let ratio = expected_exact_paths(&wide, 1, 5000).unwrap() / mu(&wide, 1, 5000.0).unwrap();
    assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
}

#[test]
fn prediction_set_contents() {
    let p = PredictionSet::new(&eq(2, 100_000), 1.0).unwrap();
    assert!((p.finish_time - 3914.87).abs() < 0.01);
    assert!((p.beta.unwrap() - 25.54).abs() < 0.01);
    assert_eq!(p.rounding_penalty, None);
    assert_eq!(p.t1.len(), 3);
    let g = PredictionSet::with_default_omega(&ModelSpec::growing(17, 10).unwrap()).unwrap();
    assert_eq!(g.j_star_int, 5);
    assert_eq!(g.rounding_penalty, Some(1.0));
    assert!(rel_err(g.omega, 17.0 * libm::log(10.0)) < 1e-12);
    // Large models stay finite.
    let big = PredictionSet::with_default_omega(&ModelSpec::growing(50, 10).unwrap()).unwrap();
    assert!(big.finish_time.is_finite());
    assert!(big.t1.values().all(|v| v.is_finite()));
}

proptest! {
    #[test]
    fn mu_ratio_identity(
        k in 1u32..12,
        width in 2u64..500,
        tree in any::<bool>(),
        j_frac in 0.0f64..1.0,
        t in 1.0f64..1.0e6,
    ) {
        let spec = if tree {
            ModelSpec::tree(k, width.min(30)).unwrap()
        } else {
            ModelSpec::equal(k, width).unwrap()
        };
        let j = 1 + ((j_frac * f64::from(k)) as u32).min(k - 1);
        let lhs = ln_mu(&spec, j - 1, t).unwrap() - ln_mu(&spec, j, t).unwrap();
        let size = spec.ln_layer_size(k - j + 1).unwrap();
        let rhs = libm::log(f64::from(j + 1)) + size - libm::log(t);
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn equal_finish_time_zeroes_source_level(k in 1u32..40, m in 2u64..10_000_000) {
        let spec = ModelSpec::equal(k, m).unwrap();
        let tf = finish_time_equal(k, m).unwrap();
        prop_assert!(rel_err(mu(&spec, k, tf).unwrap(), 1.0) < 1e-12);
    }

    #[test]
    fn recurrence_brackets_on_random_grid(
        k in 1u32..6,
        m in 50u64..2000,
        t in 0u64..50,
        j_frac in 0.0f64..1.0,
    ) {
        let spec = ModelSpec::equal(k, m).unwrap();
        let rec = solve_expectation_recurrences(&spec, 50, 2.0).unwrap();
        let j = ((j_frac * f64::from(k + 1)) as u32).min(k);
        let (lo, hi) = hat_bounds(&spec, j, t).unwrap();
        let v = rec.hat[t as usize][(k - j) as usize];
        prop_assert!(within(lo, v, hi), "{} <= {} <= {}", lo, v, hi);
    }
}

fn within(lo: f64, v: f64, hi: f64) -> bool {
    let slack = 1e-12 * v.abs().max(1e-300);
    lo - slack <= v && v <= hi + slack
}
