//! Dataset-level calibration and accuracy metrics.

use std::fmt;

use crate::distribution::EmpiricalDistribution;
use crate::error::{invalid, Result};
use crate::scoring::{crps_pwm, EnsemblePrediction};

pub const DEFAULT_LOW_PCT: f64 = 0.025;
pub const DEFAULT_HIGH_PCT: f64 = 0.975;
pub const DEFAULT_M_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub m_bins: usize,
    pub low_pct: f64,
    pub high_pct: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            m_bins: DEFAULT_M_BINS,
            low_pct: DEFAULT_LOW_PCT,
            high_pct: DEFAULT_HIGH_PCT,
        }
    }
}

/// Metrics over an evaluation set. `qice` is a fraction, not a percentage.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub picp: f64,
    pub qice: f64,
    pub crps_mean: f64,
    pub mse: f64,
    pub mae: f64,
    pub nll: Option<f64>,
    pub n_rows: usize,
}

impl MetricsReport {
    /// `(name, value)` pairs in output order; QICE is reported in percent.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("n_rows", self.n_rows.to_string()),
            ("crps", format!("{:.6}", self.crps_mean)),
            ("qice_pct", format!("{:.4}", self.qice * 100.0)),
            ("picp", format!("{:.4}", self.picp)),
            ("mse", format!("{:.6}", self.mse)),
            ("mae", format!("{:.6}", self.mae)),
        ];
        if let Some(nll) = self.nll {
            out.push(("nll", format!("{nll:.6}")));
        }
        out
    }

    /// Single line of space-separated `key=value` pairs.
    pub fn to_kv_line(&self) -> String {
        self.fields()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// `metric,value` rows with a header, one metric per row.
    pub fn to_records(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in self.fields() {
            out.push_str(k);
            out.push(',');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_kv_line())
    }
}

fn check_lengths(n_preds: usize, n_ys: usize) -> Result<()> {
    if n_preds != n_ys {
        return Err(invalid(format!(
            "{n_preds} predictions but {n_ys} observations"
        )));
    }
    if n_preds == 0 {
        return Err(invalid("metrics need at least one row"));
    }
    Ok(())
}

/// Fraction of rows whose observation lies within `[q_low, q_high]` of its ensemble.
pub fn picp(preds: &[EnsemblePrediction], ys: &[f64], low_pct: f64, high_pct: f64) -> Result<f64> {
    check_lengths(preds.len(), ys.len())?;
    if !(low_pct > 0.0 && low_pct < high_pct && high_pct < 1.0) {
        return Err(invalid(format!(
            "percentiles must satisfy 0 < low < high < 1, got {low_pct} and {high_pct}"
        )));
    }
    let mut hits = 0usize;
    for (pred, &y) in preds.iter().zip(ys) {
        if pred.len() < 2 {
            return Err(invalid("PICP needs K >= 2 samples per row"));
        }
        let d = EmpiricalDistribution::from_samples(pred);
        let lo = d.quantile_unchecked(low_pct);
        let hi = d.quantile_unchecked(high_pct);
        if y >= lo && y <= hi {
            hits += 1;
        }
    }
    Ok(hits as f64 / preds.len() as f64)
}

/// Index in `0..m` of the equal-probability quantile interval holding `y`.
///
/// Interval `m` is `[q_{m/M}, q_{(m+1)/M})`; values below the first boundary
/// go to the first interval, values at or above the last to the final one.
pub fn qice_bin(dist: &EmpiricalDistribution, y: f64, m_bins: usize) -> usize {
    (1..m_bins)
        .filter(|&j| dist.quantile_unchecked(j as f64 / m_bins as f64) <= y)
        .count()
}

/// Per-bin observation fractions `r_m` used by [`qice`].
pub fn qice_allocation(preds: &[EnsemblePrediction], ys: &[f64], m_bins: usize) -> Result<Vec<f64>> {
    check_lengths(preds.len(), ys.len())?;
    if m_bins < 2 {
        return Err(invalid("QICE needs at least two bins"));
    }
    let mut counts = vec![0usize; m_bins];
    for (pred, &y) in preds.iter().zip(ys) {
        if pred.len() < m_bins {
            return Err(invalid(format!(
                "QICE with {m_bins} bins needs K >= {m_bins} samples, got {}",
                pred.len()
            )));
        }
        let d = EmpiricalDistribution::from_samples(pred);
        counts[qice_bin(&d, y, m_bins)] += 1;
    }
    let n = preds.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Mean absolute deviation of the bin fractions from `1/M`.
pub fn qice(preds: &[EnsemblePrediction], ys: &[f64], m_bins: usize) -> Result<f64> {
    let alloc = qice_allocation(preds, ys, m_bins)?;
    let target = 1.0 / m_bins as f64;
    Ok(alloc.iter().map(|r| (r - target).abs()).sum::<f64>() / m_bins as f64)
}

/// MSE and MAE of ensemble means against observations.
pub fn point_metrics(preds: &[EnsemblePrediction], ys: &[f64]) -> Result<(f64, f64)> {
    check_lengths(preds.len(), ys.len())?;
    let (mut se, mut ae) = (0.0, 0.0);
    for (pred, &y) in preds.iter().zip(ys) {
        let e = pred.mean() - y;
        se += e * e;
        ae += e.abs();
    }
    let n = preds.len() as f64;
    Ok((se / n, ae / n))
}

pub fn crps_mean(preds: &[EnsemblePrediction], ys: &[f64]) -> Result<f64> {
    check_lengths(preds.len(), ys.len())?;
    let mut total = 0.0;
    for (pred, &y) in preds.iter().zip(ys) {
        total += crps_pwm(pred, y)?;
    }
    Ok(total / preds.len() as f64)
}

/// Mean Gaussian negative log-likelihood `½ log(2πσ²) + (y−μ)²/(2σ²)`.
pub fn gaussian_nll(mus: &[f64], sigmas: &[f64], ys: &[f64]) -> Result<f64> {
    if mus.len() != sigmas.len() {
        return Err(invalid("means and sigmas differ in length"));
    }
    check_lengths(mus.len(), ys.len())?;
    let mut total = 0.0;
    for ((&mu, &sigma), &y) in mus.iter().zip(sigmas).zip(ys) {
        if !(sigma > 0.0) {
            return Err(invalid(format!("sigma must be positive, got {sigma}")));
        }
        let z = (y - mu) / sigma;
        total += 0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() + 0.5 * z * z;
    }
    Ok(total / mus.len() as f64)
}

/// All ensemble metrics on one evaluation set.
pub fn evaluate(preds: &[EnsemblePrediction], ys: &[f64], cfg: &MetricsConfig) -> Result<MetricsReport> {
    let (mse, mae) = point_metrics(preds, ys)?;
    Ok(MetricsReport {
        picp: picp(preds, ys, cfg.low_pct, cfg.high_pct)?,
        qice: qice(preds, ys, cfg.m_bins)?,
        crps_mean: crps_mean(preds, ys)?,
        mse,
        mae,
        nll: None,
        n_rows: preds.len(),
    })
}

/// One [`MetricsReport`] per batch, averaged without weighting by batch size.
pub fn batched_metrics(
    batches: &[(Vec<EnsemblePrediction>, Vec<f64>)],
    cfg: &MetricsConfig,
) -> Result<MetricsReport> {
    if batches.is_empty() {
        return Err(invalid("batched metrics need at least one batch"));
    }
    let reports = batches
        .iter()
        .map(|(p, y)| evaluate(p, y, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(average_reports(&reports))
}

/// Unweighted mean of reports; `n_rows` is the total. `nll` survives only if
/// every report carries it.
pub fn average_reports(reports: &[MetricsReport]) -> MetricsReport {
    let b = reports.len() as f64;
    // shifted by the first value so replicated batches average back exactly
    let shifted_mean = |v: &[f64]| v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / b;
    let mean = |f: fn(&MetricsReport) -> f64| shifted_mean(&reports.iter().map(f).collect::<Vec<_>>());
    let nll = reports
        .iter()
        .map(|r| r.nll)
        .collect::<Option<Vec<f64>>>()
        .map(|v| shifted_mean(&v));
    MetricsReport {
        picp: mean(|r| r.picp),
        qice: mean(|r| r.qice),
        crps_mean: mean(|r| r.crps_mean),
        mse: mean(|r| r.mse),
        mae: mean(|r| r.mae),
        nll,
        n_rows: reports.iter().map(|r| r.n_rows).sum(),
    }
}
