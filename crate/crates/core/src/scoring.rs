//! Proper scoring rules for ensemble forecasts.
//!
//! Three algebraically related CRPS estimators are provided:
//!
//! * [`crps_naive`]: the O(K²) energy form
//!   `mean|ŷ−y| − (1/2K²) ΣΣ|ŷ_i−ŷ_j|`;
//! * [`crps_sorted`]: the same quantity through the generalized-quantile
//!   identity on sorted samples, O(K log K);
//! * [`crps_pwm`]: the probability-weighted-moment form, which replaces the
//!   biased spread term with its unbiased `1/(K(K−1))` counterpart and is the
//!   training loss (see [`crps_loss_and_grad`]).

use std::f64::consts::PI;

use statrs::function::erf::erf;

use crate::error::{invalid, Result};

/// The `K` predicted samples for one input.
///
/// Order carries no meaning; every estimator here is permutation invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    samples: Vec<f64>,
}

impl EnsemblePrediction {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        validate_samples(&samples)?;
        Ok(EnsemblePrediction { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

impl TryFrom<Vec<f64>> for EnsemblePrediction {
    type Error = crate::Error;

    fn try_from(samples: Vec<f64>) -> Result<Self> {
        EnsemblePrediction::new(samples)
    }
}

/// `∂C/∂ŷ_k` of the PWM loss, in the caller's sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpsGradient {
    pub partials: Vec<f64>,
}

impl CrpsGradient {
    pub fn len(&self) -> usize {
        self.partials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partials.is_empty()
    }
}

fn validate_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(invalid("ensemble must contain at least one sample"));
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("ensemble sample {i} is not finite")));
    }
    Ok(())
}

fn check_obs(y: f64) -> Result<()> {
    if y.is_finite() {
        Ok(())
    } else {
        Err(invalid("observation is not finite"))
    }
}

fn sorted_copy(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn mean_abs_dev(samples: &[f64], y: f64) -> f64 {
    samples.iter().map(|v| (v - y).abs()).sum::<f64>() / samples.len() as f64
}

/// Energy-form CRPS with the biased `1/(2K²)` spread term. O(K²).
pub fn crps_naive(pred: &EnsemblePrediction, y: f64) -> Result<f64> {
    check_obs(y)?;
    let s = pred.samples();
    let k = s.len() as f64;
    let mut spread = 0.0;
    for &a in s {
        for &b in s {
            spread += (a - b).abs();
        }
    }
    Ok(mean_abs_dev(s, y) - spread / (2.0 * k * k))
}

/// The [`crps_naive`] value computed on sorted samples:
/// `(2/K²) Σ_k (ŷ_(k) − y)(K·1{y < ŷ_(k)} − k + 1/2)`.
pub fn crps_sorted(pred: &EnsemblePrediction, y: f64) -> Result<f64> {
    check_obs(y)?;
    Ok(crps_sorted_slice(&sorted_copy(pred.samples()), y))
}

pub(crate) fn crps_sorted_slice(sorted: &[f64], y: f64) -> f64 {
    let k = sorted.len() as f64;
    let total: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let above = if y < v { k } else { 0.0 };
            (v - y) * (above - (i + 1) as f64 + 0.5)
        })
        .sum();
    2.0 * total / (k * k)
}

/// Probability-weighted-moment CRPS:
/// `mean|ŷ−y| + mean(ŷ) − (2/(K(K−1))) Σ_k ŷ_(k)(k−1)`.
///
/// Equal to the unbiased energy form; can be slightly negative for small `K`.
pub fn crps_pwm(pred: &EnsemblePrediction, y: f64) -> Result<f64> {
    check_obs(y)?;
    require_pair(pred.len())?;
    Ok(pwm_sorted(&sorted_copy(pred.samples()), y))
}

fn require_pair(k: usize) -> Result<()> {
    if k < 2 {
        Err(invalid(format!(
            "the PWM estimator needs K >= 2 samples, got {k}"
        )))
    } else {
        Ok(())
    }
}

fn pwm_sorted(sorted: &[f64], y: f64) -> f64 {
    let k = sorted.len() as f64;
    let rank_scale = 2.0 / (k * (k - 1.0));
    let mut abs = 0.0;
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        abs += (v - y).abs();
        sum += v;
        weighted += v * i as f64;
    }
    abs / k + sum / k - rank_scale * weighted
}

/// PWM loss and its gradient with respect to every sample.
///
/// `∂C/∂ŷ_k = sign(ŷ_k − y)/K + 1/K − 2(rank_k − 1)/(K(K−1))`, where `rank_k`
/// is the 1-based position in a stable ascending sort (ties keep input order)
/// and `sign(0) = 0`.
pub fn crps_loss_and_grad(pred: &EnsemblePrediction, y: f64) -> Result<(f64, CrpsGradient)> {
    check_obs(y)?;
    require_pair(pred.len())?;
    let mut partials = vec![0.0; pred.len()];
    let mut order = Vec::new();
    let loss = loss_and_grad_into(pred.samples(), y, &mut partials, &mut order);
    Ok((loss, CrpsGradient { partials }))
}

/// Allocation-free core of [`crps_loss_and_grad`] used by the training loop.
/// `order` is scratch space. Requires `samples.len() >= 2` and finite values.
pub(crate) fn loss_and_grad_into(
    samples: &[f64],
    y: f64,
    grad: &mut [f64],
    order: &mut Vec<usize>,
) -> f64 {
    let n = samples.len();
    let k = n as f64;
    order.clear();
    order.extend(0..n);
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));

    let rank_scale = 2.0 / (k * (k - 1.0));
    let mut abs = 0.0;
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (r, &idx) in order.iter().enumerate() {
        let v = samples[idx];
        let d = v - y;
        abs += d.abs();
        sum += v;
        weighted += v * r as f64;
        let sign = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        // integer numerator keeps the flat partials exactly zero
        grad[idx] = ((sign + 1.0) * (k - 1.0) - 2.0 * r as f64) / (k * (k - 1.0));
    }
    abs / k + sum / k - rank_scale * weighted
}

/// Quantile score with the identity measure: `α·q̂ + (y − q̂)·1{y ≤ q̂}`.
///
/// This is the positively oriented form: its expectation under the true
/// distribution is largest at the true `α`-quantile. It equals
/// `α·y − pinball_loss(q̂, α, y)`.
pub fn quantile_score(q_hat: f64, alpha: f64, y: f64) -> Result<f64> {
    check_level(alpha)?;
    let hit = if y <= q_hat { 1.0 } else { 0.0 };
    Ok(alpha * q_hat + (y - q_hat) * hit)
}

/// Standard pinball loss `(1{y ≤ q̂} − α)(q̂ − y)`, minimised in expectation
/// at the true `α`-quantile.
pub fn pinball_loss(q_hat: f64, alpha: f64, y: f64) -> Result<f64> {
    check_level(alpha)?;
    let hit = if y <= q_hat { 1.0 } else { 0.0 };
    Ok((hit - alpha) * (q_hat - y))
}

pub(crate) fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("level must lie in (0, 1), got {alpha}")))
    }
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Closed-form CRPS of `N(μ, σ²)` at `y`.
pub fn crps_gaussian_closed(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let z = (y - mu) / sigma;
    Ok(sigma * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z) - 1.0 / PI.sqrt()))
}
