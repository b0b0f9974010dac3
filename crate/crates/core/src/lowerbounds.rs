//! Two-sample swap games behind the noise lower bounds.
//!
//! In each game one sample comes from `P₁` and one from `P₂`, presented in
//! random order, and a test must say which is which. The best achievable
//! accuracy is `½ + ½·d_TV(R₁, R₂)` where `R₁ = P₁⊗P₂` and `R₂ = P₂⊗P₁`.
//!
//! * variance game: `P₁ = N(0, σ²I_k)`, `P₂ = N(0, (σ² + 1/k)I_k)`; the
//!   likelihood ratio is monotone in the squared norm, so the optimal test
//!   assigns the larger squared norm to `P₂`. Indistinguishable once
//!   `σ ≫ k^{-1/4}`.
//! * mean-shift game: `P₁ = N(e₁, σ²I_k)`, `P₂ = N((1+ε)e₁, σ²I_k)`; only the
//!   first coordinate carries information, so the optimal test assigns the
//!   larger first coordinate to `P₂`. Indistinguishable once `σ ≫ ε`.

use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{rng_from_seed, sub_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistinguishabilityResult {
    pub k: usize,
    pub sigma: f64,
    /// Mean shift for the mean-shift game, `None` for the variance game.
    pub epsilon: Option<f64>,
    pub trials: u64,
    pub correct: u64,
    pub accuracy: f64,
    /// Binomial standard error `√(p(1−p)/trials)`.
    pub stderr: f64,
}

impl DistinguishabilityResult {
    fn from_counts(k: usize, sigma: f64, epsilon: Option<f64>, trials: u64, correct: u64) -> Self {
        let accuracy = correct as f64 / trials as f64;
        Self {
            k,
            sigma,
            epsilon,
            trials,
            correct,
            accuracy,
            stderr: (accuracy * (1.0 - accuracy) / trials as f64).sqrt(),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::param(name, format!("must be positive, got {v}")));
    }
    Ok(())
}

fn nonnegative(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::param(name, format!("must be nonnegative, got {v}")));
    }
    Ok(())
}

/// `D_KL(N(μ₁, v₁I_k) ‖ N(μ₂, v₂I_k))` with `k = μ₁.len()`.
pub fn kl_isotropic_gaussians(mu1: &[f64], var1: f64, mu2: &[f64], var2: f64) -> Result<f64> {
    positive("var1", var1)?;
    positive("var2", var2)?;
    if mu1.len() != mu2.len() || mu1.is_empty() {
        return Err(Error::param("mu", "mean vectors must be nonempty and of equal length"));
    }
    let shift_sq: f64 = mu1.iter().zip(mu2).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(kl_isotropic(mu1.len(), shift_sq, var1, var2))
}

/// Isotropic KL from the squared mean shift.
fn kl_isotropic(k: usize, shift_sq: f64, var1: f64, var2: f64) -> f64 {
    let k = k as f64;
    0.5 * (k * (var2 / var1).ln() - k + k * var1 / var2 + shift_sq / var2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapKl {
    /// `D_KL(R₁‖R₂) = D_KL(P₁‖P₂) + D_KL(P₂‖P₁)` for the variance game.
    pub exact: f64,
    /// `1/(2kσ⁴)`.
    pub bound: f64,
}

pub fn swap_kl(k: usize, sigma: f64) -> Result<SwapKl> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    positive("sigma", sigma)?;
    let v1 = sigma * sigma;
    let v2 = v1 + 1.0 / k as f64;
    // the log terms cancel in the symmetric sum, leaving k(v₂−v₁)²/(2v₁v₂);
    // summing the two one-sided divergences directly loses digits for large σ
    let exact = 1.0 / (2.0 * k as f64 * v1 * v2);
    let bound = 1.0 / (2.0 * k as f64 * v1 * v1);
    debug_assert!(exact <= bound * (1.0 + 1e-12));
    Ok(SwapKl { exact, bound })
}

/// `D_KL(R₁‖R₂)` for the mean-shift game, `ε²/σ²`.
pub fn mean_shift_swap_kl(epsilon: f64, sigma: f64) -> Result<f64> {
    nonnegative("eps", epsilon)?;
    positive("sigma", sigma)?;
    Ok(2.0 * kl_isotropic(1, epsilon * epsilon, sigma * sigma, sigma * sigma))
}

/// `min(1, ε/(2σ))`, the total-variation bound between unit-variance
/// one-dimensional Gaussians whose means differ by `ε/σ`.
pub fn tv_mean_shift_bound(epsilon: f64, sigma: f64) -> Result<f64> {
    nonnegative("eps", epsilon)?;
    positive("sigma", sigma)?;
    Ok((epsilon / (2.0 * sigma)).min(1.0))
}

fn check_trials(k: usize, trials: u64) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    Ok(())
}

/// Counts trials whose closure returns true. Trial `t` gets the generator
/// seeded with `sub_seed(seed, t)`.
fn count_successes<F>(trials: u64, seed: u64, trial: F) -> u64
where
    F: Fn(&mut crate::rng::Rng) -> bool + Sync + Send,
{
    par::map_range(trials as usize, |t| trial(&mut rng_from_seed(sub_seed(seed, t as u64))))
        .into_iter()
        .filter(|&ok| ok)
        .count() as u64
}

/// Plays the variance game `trials` times with the squared-norm test.
pub fn swap_test_experiment_k(k: usize, sigma: f64, trials: u64, seed: u64) -> Result<DistinguishabilityResult> {
    check_trials(k, trials)?;
    nonnegative("sigma", sigma)?;
    let sd_small = sigma;
    let sd_large = (sigma * sigma + 1.0 / k as f64).sqrt();
    let correct = count_successes(trials, seed, |rng| {
        let mut sq_norm = |sd: f64| -> f64 {
            (0..k)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    (sd * z) * (sd * z)
                })
                .sum()
        };
        let x = sq_norm(sd_small);
        let y = sq_norm(sd_large);
        let y_first: bool = rng.random();
        let (first, second) = if y_first { (y, x) } else { (x, y) };
        let guess_y_first = first >= second;
        guess_y_first == y_first
    });
    Ok(DistinguishabilityResult::from_counts(k, sigma, None, trials, correct))
}

/// Plays the mean-shift game `trials` times with the first-coordinate test.
pub fn swap_test_experiment_eps(
    k: usize,
    sigma: f64,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<DistinguishabilityResult> {
    check_trials(k, trials)?;
    positive("sigma", sigma)?;
    nonnegative("eps", epsilon)?;
    let correct = count_successes(trials, seed, |rng| {
        // the remaining k − 1 coordinates are drawn but carry no signal
        let mut sample = |mean: f64| -> f64 {
            let first = mean + sigma * rng.sample::<f64, _>(StandardNormal);
            for _ in 1..k {
                let _: f64 = rng.sample(StandardNormal);
            }
            first
        };
        let x = sample(1.0);
        let y = sample(1.0 + epsilon);
        let y_first: bool = rng.random();
        let (first, second) = if y_first { (y, x) } else { (x, y) };
        let guess_y_first = first >= second;
        guess_y_first == y_first
    });
    Ok(DistinguishabilityResult::from_counts(k, sigma, Some(epsilon), trials, correct))
}

pub const CSV_HEADER: &str = "k,sigma,epsilon,trials,accuracy,stderr,kl_exact,kl_bound,tv_bound";

/// One CSV row. Columns that do not apply to the game are left empty.
pub fn csv_row(r: &DistinguishabilityResult) -> Result<String> {
    let mut row = format!("{},{},", r.k, r.sigma);
    match r.epsilon {
        None => {
            let (exact, bound) = if r.sigma > 0.0 {
                let kl = swap_kl(r.k, r.sigma)?;
                (kl.exact.to_string(), kl.bound.to_string())
            } else {
                (String::new(), String::new())
            };
            write!(row, ",{},{},{},{},{},", r.trials, r.accuracy, r.stderr, exact, bound).unwrap();
        }
        Some(eps) => {
            let kl = mean_shift_swap_kl(eps, r.sigma)?;
            let tv = tv_mean_shift_bound(eps, r.sigma)?;
            write!(row, "{eps},{},{},{},{kl},,{tv}", r.trials, r.accuracy, r.stderr).unwrap();
        }
    }
    Ok(row)
}
