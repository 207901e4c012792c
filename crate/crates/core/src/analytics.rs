//! Closed-form predictions and expectation recurrences.
//!
//! Products of layer sizes and factorials are evaluated as sums of logs
//! (`ln Γ` via `libm::lgamma`), so nothing overflows even for `d^k` far
//! beyond `u64`. Each quantity has an `ln_*` form and a plain `f64` form.
//!
//! Depths are counted upwards from level `k`: depth `j` is level `k - j`.
//! The central quantity is the predicted occupancy of level `k - j` after
//! `t` steps,
//!
//! ```text
//! mu_{k-j}(t) = t^{j+1} / ((j+1)! * N_k * N_{k-1} * ... * N_{k-j+1})
//! ```

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, lgamma, log, log1p, sqrt};

use crate::model::{ModelError, ModelSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("depth {j} is outside 0..={k}")]
    DepthOutOfRange { j: u32, k: u32 },
    #[error("omega must be positive and finite (got {0})")]
    InvalidOmega(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

fn ln_factorial(n: u32) -> f64 {
    lgamma(f64::from(n) + 1.0)
}

fn check_depth(spec: &ModelSpec, j: u32) -> Result<(), AnalyticsError> {
    spec.validate()?;
    if j > spec.k() {
        Err(AnalyticsError::DepthOutOfRange { j, k: spec.k() })
    } else {
        Ok(())
    }
}

fn check_omega(omega: f64) -> Result<(), AnalyticsError> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidOmega(omega))
    }
}

/// `ln(N_k * N_{k-1} * ... * N_{k-j+1})`; zero for `j = 0`.
pub fn ln_layer_product(spec: &ModelSpec, j: u32) -> Result<f64, AnalyticsError> {
    check_depth(spec, j)?;
    let k = spec.k();
    let mut total = 0.0;
    for level in (k + 1 - j)..=k {
        total += spec.ln_layer_size(level)?;
    }
    Ok(total)
}

/// `ln mu_{k-j}(t)`; `-inf` at `t = 0`.
pub fn ln_mu(spec: &ModelSpec, j: u32, t: f64) -> Result<f64, AnalyticsError> {
    if t.is_nan() || t < 0.0 {
        return Err(AnalyticsError::InvalidArgument("t must be non-negative"));
    }
    let denom = ln_factorial(j + 1) + ln_layer_product(spec, j)?;
    Ok(f64::from(j + 1) * log(t) - denom)
}

/// Predicted occupancy `mu_{k-j}(t)` of level `k - j`. Exact (`t`) at `j = 0`.
pub fn mu(spec: &ModelSpec, j: u32, t: f64) -> Result<f64, AnalyticsError> {
    let ln = ln_mu(spec, j, t)?;
    Ok(if j == 0 { t } else { exp(ln) })
}

fn ln_finish_time_equal_real(k: u32, m: f64) -> f64 {
    (ln_factorial(k + 1) + f64::from(k) * log(m)) / f64::from(k + 1)
}

/// `ln T_f` for equal layers: `T_f = [(k+1)! m^k]^{1/(k+1)}`.
pub fn ln_finish_time_equal(k: u32, m: u64) -> Result<f64, AnalyticsError> {
    ModelSpec::equal(k, m)?;
    Ok(ln_finish_time_equal_real(k, m as f64))
}

pub fn finish_time_equal(k: u32, m: u64) -> Result<f64, AnalyticsError> {
    ln_finish_time_equal(k, m).map(exp)
}

/// `ln T_f` for growing layers: `T_f = sqrt(k) d^{k + 3/2 - sqrt(2k+2)}`.
pub fn ln_finish_time_growing(k: u32, d: u64) -> Result<f64, AnalyticsError> {
    ModelSpec::growing(k, d)?;
    let k = f64::from(k);
    Ok(0.5 * log(k) + (k + 1.5 - sqrt(2.0 * k + 2.0)) * log(d as f64))
}

pub fn finish_time_growing(k: u32, d: u64) -> Result<f64, AnalyticsError> {
    ln_finish_time_growing(k, d).map(exp)
}

/// `ln T_f` for Cayley trees of constant branching factor:
/// `T_f = sqrt(k) d^{k - sqrt(2k)}`.
pub fn ln_finish_time_tree(k: u32, d: u64) -> Result<f64, AnalyticsError> {
    ModelSpec::tree(k, d)?;
    let k = f64::from(k);
    Ok(0.5 * log(k) + (k - sqrt(2.0 * k)) * log(d as f64))
}

pub fn finish_time_tree(k: u32, d: u64) -> Result<f64, AnalyticsError> {
    ln_finish_time_tree(k, d).map(exp)
}

/// The predicted finish time for any model (NaN for invalid specs).
pub fn finish_time(spec: &ModelSpec) -> f64 {
    let ln = match *spec {
        ModelSpec::EqualLayers { k, m } => ln_finish_time_equal(k, m),
        ModelSpec::GrowingLayers { k, d } => ln_finish_time_growing(k, d),
        ModelSpec::CayleyTree { k, d } => ln_finish_time_tree(k, d),
    };
    ln.map_or(f64::NAN, exp)
}

/// `(sqrt(2k+2) - 1, max{ i : 2k+2 >= i(i+1) })`.
pub fn j_star(k: u32) -> (f64, u32) {
    let target = 2 * u64::from(k) + 2;
    let real = sqrt(target as f64) - 1.0;
    let mut j: u64 = 0;
    while (j + 1) * (j + 2) <= target {
        j += 1;
    }
    (real, j as u32)
}

/// `ln t1(k-j)`, where `t1` solves `mu_{k-j}(t1) = 1`.
pub fn ln_t1(spec: &ModelSpec, j: u32) -> Result<f64, AnalyticsError> {
    Ok((ln_factorial(j + 1) + ln_layer_product(spec, j)?) / f64::from(j + 1))
}

/// `t1(k-j) = [(j+1)! N_k ... N_{k-j+1}]^{1/(j+1)}`, unrounded.
pub fn t1(spec: &ModelSpec, j: u32) -> Result<f64, AnalyticsError> {
    ln_t1(spec, j).map(exp)
}

/// `t_{k-j}(omega) = (4 omega^3)^{1/(j+1)} t1(k-j)`, the step at which
/// `mu_{k-j}` reaches `4 omega^3`.
pub fn t_conc(spec: &ModelSpec, j: u32, omega: f64) -> Result<f64, AnalyticsError> {
    check_omega(omega)?;
    let ln = ln_t1(spec, j)? + (log(4.0) + 3.0 * log(omega)) / f64::from(j + 1);
    Ok(exp(ln))
}

/// `beta = N_k / (omega T_f)` for equal layers with `n` vertices spread
/// over `k` levels (`N_k = n / k`).
pub fn beta(k: u32, n: f64, omega: f64) -> Result<f64, AnalyticsError> {
    check_omega(omega)?;
    if k == 0 {
        return Err(ModelError::ZeroLevels(0).into());
    }
    let layer = n / f64::from(k);
    if layer.is_nan() || layer < 2.0 {
        return Err(AnalyticsError::InvalidArgument("n / k must be at least 2"));
    }
    Ok(exp(log(layer)
        - log(omega)
        - ln_finish_time_equal_real(k, layer)))
}

/// `T_M / T_f`: the loss from evaluating the growing-layers finish time at
/// the integer depth `j = max{ i : 2k+2 >= i(i+1) }` instead of the real
/// maximizer `j* = sqrt(2k+2) - 1`. Always in `(0, 1]`.
pub fn rounding_penalty(k: u32, d: u64) -> Result<f64, AnalyticsError> {
    if k == 0 || d == 0 {
        return Err(AnalyticsError::InvalidArgument(
            "k and d must be at least 1",
        ));
    }
    let (real, j) = j_star(k);
    let two_k2 = 2.0 * f64::from(k) + 2.0;
    let j = f64::from(j);
    let exponent = 0.5 * (two_k2 - j - two_k2 / (j + 1.0) - real * real);
    Ok(exp(exponent.min(0.0) * log(d as f64)))
}

/// Probability that exactly `ell` of `t` particles reach a given vertex,
/// each independently with probability `1 / reach_denominator`.
pub fn arrival_prob(t: u64, ell: u64, reach_denominator: f64) -> Result<f64, AnalyticsError> {
    if ell > t {
        return Err(AnalyticsError::InvalidArgument("ell must not exceed t"));
    }
    if reach_denominator.is_nan() || reach_denominator < 1.0 {
        return Err(AnalyticsError::InvalidArgument(
            "reach denominator must be at least 1",
        ));
    }
    let p = 1.0 / reach_denominator;
    let misses = (t - ell) as f64;
    let ln_miss = if misses == 0.0 {
        0.0
    } else {
        misses * log1p(-p)
    };
    let ln_choose = lgamma(t as f64 + 1.0) - lgamma(ell as f64 + 1.0) - lgamma(misses + 1.0);
    Ok(exp(ln_choose + ell as f64 * log(p) + ln_miss))
}

/// Probability that `j + 1` particles arriving at a subtree root halt as a
/// single path from the root to level `k`: `d^{-j} / (d d^2 ... d^j)`.
pub fn path_prob(j: u32, d: u64) -> Result<f64, AnalyticsError> {
    if d < 2 {
        return Err(ModelError::FactorTooSmall(d).into());
    }
    let j = f64::from(j);
    Ok(exp(-(j + j * (j + 1.0) / 2.0) * log(d as f64)))
}

/// Expected number of exact paths hanging from level `k - j` of a tree at
/// step `t`, before the large-`d` simplification to `mu_{k-j}(t)`:
/// `d^{k-j} * d^j * path_prob(j, d) * arrival_prob(t, j + 1, d^{k-j})`.
pub fn expected_exact_paths(spec: &ModelSpec, j: u32, t: u64) -> Result<f64, AnalyticsError> {
    let (k, d) = match *spec {
        ModelSpec::CayleyTree { k, d } => (k, d),
        _ => return Err(AnalyticsError::InvalidArgument("exact paths need a tree")),
    };
    check_depth(spec, j)?;
    if t < u64::from(j) + 1 {
        return Ok(0.0);
    }
    let ln_d = log(d as f64);
    let ln_roots = f64::from(k - j) * ln_d;
    let arrivals = arrival_prob(t, u64::from(j) + 1, exp(ln_roots))?;
    Ok(exp(ln_roots + f64::from(j) * ln_d) * path_prob(j, d)? * arrivals)
}

/// Two-sided bound on `N_k ... N_{k-j+1} * E Lhat_{k-j}(t)`, divided back
/// out: `1{t >= j} (t-j)^{j+1} / ((j+1)! M)` and `t^{j+1} / ((j+1)! M)`.
pub fn hat_bounds(spec: &ModelSpec, j: u32, t: u64) -> Result<(f64, f64), AnalyticsError> {
    let upper = mu(spec, j, t as f64)?;
    let lower = if t >= u64::from(j) {
        mu(spec, j, (t - u64::from(j)) as f64)?
    } else {
        0.0
    };
    Ok((lower, upper))
}

/// Numerical solutions of the expectation recurrences, indexed `[t][level]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrences {
    /// Upper-blocked expectations `E Lhat`.
    pub hat: Vec<Vec<f64>>,
    /// Damped lower-bound expectations `E Ltilde`.
    pub tilde: Vec<Vec<f64>>,
}

/// Iterates both expectation recurrences from the all-zero state.
///
/// `E Lhat_i(t+1) = E Lhat_i(t) + E Lhat_{i+1}(t) / N_{i+1}` with
/// `E Lhat_k(t) = min(t, N_k)`. The lower process uses the same update
/// multiplied by `prod_{j=0..=i} (1 - L*_j(t) / N_j)`, floored at zero,
/// where `L*_j = omega * mu_j` bounds the occupancy of level `j`.
pub fn solve_expectation_recurrences(
    spec: &ModelSpec,
    t_max: u64,
    omega: f64,
) -> Result<Recurrences, AnalyticsError> {
    spec.validate()?;
    check_omega(omega)?;
    if t_max == 0 {
        return Err(AnalyticsError::InvalidArgument("t_max must be at least 1"));
    }
    let k = spec.k() as usize;
    let sizes: Vec<f64> = (0..=k as u32 + 1)
        .map(|i| match spec.layer_size(i) {
            Ok(n) => Ok(n as f64),
            Err(_) => spec.ln_layer_size(i).map(exp),
        })
        .collect::<Result<_, _>>()?;
    let ln_denoms: Vec<f64> = (0..=k as u32)
        .map(|j| Ok::<_, AnalyticsError>(ln_factorial(j + 1) + ln_layer_product(spec, j)?))
        .collect::<Result<_, _>>()?;

    let mut hat = vec![vec![0.0; k + 1]];
    let mut tilde = vec![vec![0.0; k + 1]];
    let mut damping = vec![0.0; k + 1];
    for t in 0..t_max {
        let prev_hat = &hat[t as usize];
        let prev_tilde = &tilde[t as usize];

        // damping[i] = prod_{j<=i} (1 - omega mu_j(t) / N_j), floored at 0.
        let mut running = 1.0;
        for level in 0..=k {
            let depth = k - level;
            let l_star = if t == 0 {
                0.0
            } else {
                omega * exp((depth as f64 + 1.0) * log(t as f64) - ln_denoms[depth])
            };
            running *= (1.0 - l_star / sizes[level]).max(0.0);
            damping[level] = running;
        }

        let mut next_hat = vec![0.0; k + 1];
        let mut next_tilde = vec![0.0; k + 1];
        for i in 0..k {
            next_hat[i] = prev_hat[i] + prev_hat[i + 1] / sizes[i + 1];
            next_tilde[i] = prev_tilde[i] + prev_tilde[i + 1] / sizes[i + 1] * damping[i];
        }
        next_hat[k] = ((t + 1) as f64).min(sizes[k]);
        next_tilde[k] = prev_tilde[k] + damping[k];
        hat.push(next_hat);
        tilde.push(next_tilde);
    }
    Ok(Recurrences { hat, tilde })
}

/// Every closed-form prediction for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub spec: ModelSpec,
    pub finish_time: f64,
    pub j_star_real: f64,
    pub j_star_int: u32,
    /// `t1(k - j)` keyed by depth `j`.
    pub t1: BTreeMap<u32, f64>,
    /// Equal layers only.
    pub beta: Option<f64>,
    /// `t_{k-j}(omega)` keyed by depth `j`.
    pub t_conc: BTreeMap<u32, f64>,
    /// Growing layers and trees only.
    pub rounding_penalty: Option<f64>,
    pub omega: f64,
}

/// `n` as used for the default `omega`: all non-source vertices for equal
/// layers (`k m`), the last layer `d^k` otherwise.
pub fn ln_model_size(spec: &ModelSpec) -> Result<f64, AnalyticsError> {
    spec.validate()?;
    Ok(match *spec {
        ModelSpec::EqualLayers { k, m } => log(f64::from(k) * m as f64),
        _ => spec.ln_layer_size(spec.k())?,
    })
}

/// `omega = ln n`.
pub fn default_omega(spec: &ModelSpec) -> Result<f64, AnalyticsError> {
    ln_model_size(spec)
}

impl PredictionSet {
    pub fn new(spec: &ModelSpec, omega: f64) -> Result<Self, AnalyticsError> {
        spec.validate()?;
        check_omega(omega)?;
        let k = spec.k();
        let (j_star_real, j_star_int) = j_star(k);
        let mut t1_map = BTreeMap::new();
        let mut conc = BTreeMap::new();
        for j in 0..=k {
            t1_map.insert(j, t1(spec, j)?);
            conc.insert(j, t_conc(spec, j, omega)?);
        }
        let (beta_value, penalty) = match *spec {
            ModelSpec::EqualLayers { k, m } => {
                (Some(beta(k, f64::from(k) * m as f64, omega)?), None)
            }
            ModelSpec::GrowingLayers { k, d } | ModelSpec::CayleyTree { k, d } => {
                (None, Some(rounding_penalty(k, d)?))
            }
        };
        Ok(PredictionSet {
            spec: *spec,
            finish_time: finish_time(spec),
            j_star_real,
            j_star_int,
            t1: t1_map,
            beta: beta_value,
            t_conc: conc,
            rounding_penalty: penalty,
            omega,
        })
    }

    pub fn with_default_omega(spec: &ModelSpec) -> Result<Self, AnalyticsError> {
        Self::new(spec, default_omega(spec)?)
    }

    /// Predicted occupancy of `level` after `t` steps.
    pub fn mu_level(&self, level: u32, t: f64) -> Result<f64, AnalyticsError> {
        let k = self.spec.k();
        if level > k {
            return Err(AnalyticsError::DepthOutOfRange { j: level, k });
        }
        mu(&self.spec, k - level, t)
    }
}

#[cfg(test)]
mod tests;
