//! Empirical predictive distribution reconstructed from an ensemble.
//!
//! Quantiles use linear interpolation between plotting positions
//! `p_k = (k − 0.5)/K`, clamped to the sample range. The CDF is the
//! right-continuous step ECDF.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::scoring::{check_level, std_normal_cdf, EnsemblePrediction};

/// Plotting positions this close to an integer are treated as exact.
const POSITION_SNAP: f64 = 1e-9;

/// Range covered by the finite KL bins; two open tails are added on either side.
pub const KL_RANGE: (f64, f64) = (-5.0, 5.0);
pub const DEFAULT_KL_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl IntervalEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistSummary {
    pub mean: f64,
    pub stddev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `+inf` when some sample mass falls where the reference has none.
    pub kl_to_std_normal: f64,
}

impl EmpiricalDistribution {
    pub fn from_samples(pred: &EnsemblePrediction) -> Self {
        let mut sorted = pred.samples().to_vec();
        sorted.sort_by(f64::total_cmp);
        EmpiricalDistribution { sorted }
    }

    pub fn from_vec(samples: Vec<f64>) -> Result<Self> {
        let pred = EnsemblePrediction::new(samples)?;
        let mut sorted = pred.into_samples();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { sorted })
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// Fraction of samples `≤ t`.
    pub fn cdf(&self, t: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v <= t);
        below as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        check_level(alpha)?;
        Ok(self.quantile_unchecked(alpha))
    }

    pub(crate) fn quantile_unchecked(&self, alpha: f64) -> f64 {
        let n = self.sorted.len();
        let mut pos = alpha * n as f64 + 0.5;
        let nearest = pos.round();
        if (pos - nearest).abs() < POSITION_SNAP {
            pos = nearest;
        }
        if pos <= 1.0 {
            return self.sorted[0];
        }
        if pos >= n as f64 {
            return self.sorted[n - 1];
        }
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let a = self.sorted[lo - 1];
        if frac == 0.0 {
            return a;
        }
        a + frac * (self.sorted[lo] - a)
    }

    /// Central interval between the `(1−level)/2` and `1 − (1−level)/2` quantiles.
    pub fn confidence_interval(&self, level: f64) -> Result<IntervalEstimate> {
        check_level(level)?;
        let tail = (1.0 - level) / 2.0;
        Ok(IntervalEstimate {
            lower: self.quantile_unchecked(tail),
            upper: self.quantile_unchecked(1.0 - tail),
            level,
        })
    }

    /// Equal-width bins over `[min, max]`; the last bin is closed on both ends.
    /// A zero-width range yields a single bin holding every sample.
    pub fn histogram(&self, bins: usize) -> Result<Vec<HistogramBin>> {
        if bins < 1 {
            return Err(invalid("histogram needs at least one bin"));
        }
        let (lo, hi) = (self.min(), self.max());
        if hi <= lo {
            return Ok(vec![HistogramBin {
                left: lo,
                right: hi,
                count: self.sorted.len(),
            }]);
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in &self.sorted {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                left: lo + width * i as f64,
                right: if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 },
                count,
            })
            .collect())
    }

    /// Moments plus a binned KL divergence to `N(0, 1)`.
    ///
    /// Skewness and excess kurtosis use population central moments; stddev
    /// uses the `K − 1` denominator. The KL uses `kl_bins` equal bins on
    /// [`KL_RANGE`] plus two tails. A point mass reports `+inf`.
    pub fn summary(&self, kl_bins: usize) -> Result<DistSummary> {
        let n = self.sorted.len();
        if n < 4 {
            return Err(invalid(format!("summary needs K >= 4 samples, got {n}")));
        }
        if kl_bins < 1 {
            return Err(invalid("KL needs at least one bin"));
        }
        let k = n as f64;
        let mean = self.sorted.iter().sum::<f64>() / k;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &v in &self.sorted {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let stddev = (m2 / (k - 1.0)).sqrt();
        let (m2, m3, m4) = (m2 / k, m3 / k, m4 / k);
        let (skewness, excess_kurtosis) = if m2 > 0.0 {
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        let kl_to_std_normal = if m2 > 0.0 {
            self.binned_kl(kl_bins)
        } else {
            f64::INFINITY
        };
        Ok(DistSummary {
            mean,
            stddev,
            skewness,
            excess_kurtosis,
            kl_to_std_normal,
        })
    }

    fn binned_kl(&self, bins: usize) -> f64 {
        let (lo, hi) = KL_RANGE;
        let width = (hi - lo) / bins as f64;
        // edges[0] = -inf, edges[bins + 2] = +inf
        let mut edges = Vec::with_capacity(bins + 3);
        edges.push(f64::NEG_INFINITY);
        edges.extend((0..=bins).map(|i| lo + width * i as f64));
        edges.push(f64::INFINITY);

        let cells = edges.len() - 1;
        let mut counts = vec![0usize; cells];
        for &v in &self.sorted {
            // cell c covers [edges[c], edges[c+1])
            let c = edges.partition_point(|&e| e <= v) - 1;
            counts[c.min(cells - 1)] += 1;
        }
        let k = self.sorted.len() as f64;
        let mut kl = 0.0;
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let p = count as f64 / k;
            let q = std_normal_cdf(edges[c + 1]) - std_normal_cdf(edges[c]);
            if q <= 0.0 {
                return f64::INFINITY;
            }
            kl += p * (p / q).ln();
        }
        kl.max(0.0)
    }

    /// `(t, cdf(t))` at every distinct sample value.
    pub fn cdf_knots(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut knots: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            let p = (i + 1) as f64 / n;
            match knots.last_mut() {
                Some(last) if last.0 == v => last.1 = p,
                _ => knots.push((v, p)),
            }
        }
        knots
    }
}

impl From<&EnsemblePrediction> for EmpiricalDistribution {
    fn from(pred: &EnsemblePrediction) -> Self {
        EmpiricalDistribution::from_samples(pred)
    }
}

/// Comma-separated `left,right,count` rows with a header line.
pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{}", b.left, b.right, b.count);
    }
    out
}

/// Comma-separated `level,lower,upper` rows with a header line.
pub fn intervals_csv(intervals: &[IntervalEstimate]) -> String {
    let mut out = String::from("level,lower,upper\n");
    for ci in intervals {
        let _ = writeln!(out, "{},{},{}", ci.level, ci.lower, ci.upper);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DistRng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn construction_sorts() {
        assert_eq!(dist(&[3.0, 1.0, 2.0]).sorted_samples(), &[1.0, 2.0, 3.0]);
        let d = dist(&[1.0, 2.0, 3.0]);
        assert_eq!(EmpiricalDistribution::from_vec(d.sorted_samples().to_vec()).unwrap(), d);
        assert!(EmpiricalDistribution::from_vec(vec![]).is_err());
    }

    #[test]
    fn cdf_examples() {
        let d = dist(&[5.0]);
        assert_eq!(d.cdf(5.0), 1.0);
        assert_eq!(d.cdf(4.99), 0.0);
        assert!((dist(&[0.0, 0.0, 1.0]).cdf(0.0) - 2.0 / 3.0).abs() < 1e-15);
        let d = dist(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d.cdf(0.0), 0.0);
        assert_eq!(d.cdf(4.0), 1.0);
        assert_eq!(d.cdf(2.5), 0.5);
    }

    #[test]
    fn quantile_examples() {
        for a in [0.01, 0.5, 0.99] {
            assert_eq!(dist(&[5.0]).quantile(a).unwrap(), 5.0);
        }
        assert_eq!(dist(&[0.0, 1.0]).quantile(0.5).unwrap(), 0.5);
        let grid: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((dist(&grid).quantile(0.25).unwrap() - 25.5).abs() < 1e-12);
        assert!(dist(&grid).quantile(0.0).is_err());
        assert!(dist(&grid).quantile(1.0).is_err());
    }

    /// Brute force: scan the plotting positions for the bracketing pair.
    fn quantile_bruteforce(sorted: &[f64], alpha: f64) -> f64 {
        let n = sorted.len();
        let p = |k: usize| (k as f64 - 0.5) / n as f64;
        if alpha <= p(1) {
            return sorted[0];
        }
        if alpha >= p(n) {
            return sorted[n - 1];
        }
        for k in 1..n {
            if p(k) <= alpha && alpha <= p(k + 1) {
                let t = (alpha - p(k)) / (p(k + 1) - p(k));
                return sorted[k - 1] + t * (sorted[k] - sorted[k - 1]);
            }
        }
        unreachable!()
    }

    #[test]
    fn quantile_matches_bruteforce() {
        let mut rng = DistRng::new(21);
        for _ in 0..200 {
            let n = 1 + rng.below(40) as usize;
            let v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let d = dist(&v);
            for _ in 0..10 {
                let a = rng.uniform().clamp(1e-6, 1.0 - 1e-6);
                let q = d.quantile(a).unwrap();
                assert!((q - quantile_bruteforce(d.sorted_samples(), a)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn plotting_position_round_trip() {
        let mut rng = DistRng::new(4);
        for n in [1usize, 2, 3, 7, 10, 33, 101, 1000] {
            let v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let d = dist(&v);
            let rebuilt: Vec<f64> = (1..=n)
                .map(|k| d.quantile((k as f64 - 0.5) / n as f64).unwrap())
                .collect();
            assert_eq!(rebuilt, d.sorted_samples());
            assert_eq!(dist(&rebuilt), d);
        }
    }

    #[test]
    fn interval_examples() {
        // tails 0.25 and 0.75 are exactly the two plotting positions
        let ci = dist(&[0.0, 1.0]).confidence_interval(0.5).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.0, 1.0));
        let ci = dist(&[0.0, 1.0]).confidence_interval(0.25).unwrap();
        assert!((ci.lower - 0.25).abs() < 1e-12 && (ci.upper - 0.75).abs() < 1e-12);

        let mut rng = DistRng::new(1234);
        let normal: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let d = dist(&normal);
        let ci = d.confidence_interval(0.95).unwrap();
        assert!((ci.lower + 1.96).abs() < 0.08, "{ci:?}");
        assert!((ci.upper - 1.96).abs() < 0.08, "{ci:?}");

        let sym = dist(&[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let tiny = sym.confidence_interval(1e-9).unwrap();
        assert!(tiny.width() < 1e-6 && tiny.lower.abs() < 1e-6);

        assert!(d.confidence_interval(0.0).is_err());
        assert!(d.confidence_interval(1.0).is_err());
    }

    #[test]
    fn histogram_examples() {
        let h = dist(&[0.0, 1.0, 2.0, 3.0]).histogram(2).unwrap();
        assert_eq!(
            h,
            vec![
                HistogramBin { left: 0.0, right: 1.5, count: 2 },
                HistogramBin { left: 1.5, right: 3.0, count: 2 },
            ]
        );
        let h = dist(&[2.0, 2.0, 2.0]).histogram(5).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].count, 3);
        assert!(dist(&[1.0]).histogram(0).is_err());
    }

    #[test]
    fn summary_of_normal_draws() {
        let mut rng = DistRng::new(77);
        let v: Vec<f64> = (0..100_000).map(|_| rng.normal()).collect();
        let s = dist(&v).summary(DEFAULT_KL_BINS).unwrap();
        assert!(s.skewness.abs() <= 0.03, "{s:?}");
        assert!(s.excess_kurtosis.abs() <= 0.06, "{s:?}");
        assert!(s.kl_to_std_normal <= 0.01, "{s:?}");
        assert!((s.stddev - 1.0).abs() < 0.01);
    }

    #[test]
    fn summary_of_normal_quasi_sample() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let k = 1000;
        let v: Vec<f64> = (1..=k)
            .map(|i| normal.inverse_cdf((i as f64 - 0.5) / k as f64))
            .collect();
        let s = dist(&v).summary(DEFAULT_KL_BINS).unwrap();
        assert!(s.kl_to_std_normal <= 0.005, "{s:?}");
        assert!(s.kl_to_std_normal >= 0.0);
    }

    #[test]
    fn summary_of_point_mass() {
        let s = dist(&[1.0; 8]).summary(DEFAULT_KL_BINS).unwrap();
        assert_eq!(s.stddev, 0.0);
        assert!(s.kl_to_std_normal.is_infinite());
        assert!(dist(&[1.0, 2.0, 3.0]).summary(10).is_err());
    }

    #[test]
    fn knots_end_at_one() {
        let k = dist(&[0.0, 0.0, 1.0, 2.0]).cdf_knots();
        assert_eq!(k, vec![(0.0, 0.5), (1.0, 0.75), (2.0, 1.0)]);
    }
}
