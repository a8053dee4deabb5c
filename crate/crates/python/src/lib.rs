//! Python bindings for the `distpred` core crate.

use std::collections::HashMap;

use distpred::data::{generate_toy as gen_toy, standardize, Dataset, Standardization, ToyKind, ToyTask};
use distpred::distribution::{EmpiricalDistribution, DEFAULT_KL_BINS};
use distpred::metrics::{self, DEFAULT_HIGH_PCT, DEFAULT_LOW_PCT, DEFAULT_M_BINS};
use distpred::rng::DistRng;
use distpred::scoring;
use distpred::train::{self, Checkpoint, Predictor};
use distpred::{Activation, EnsemblePrediction, HeadKind, MetricsConfig, ModelConfig, ModelParams, TrainConfig};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn err(e: distpred::Error) -> PyErr {
    match e {
        distpred::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn ens(samples: Vec<f64>) -> PyResult<EnsemblePrediction> {
    EnsemblePrediction::new(samples).map_err(err)
}

fn ensembles(preds: Vec<Vec<f64>>) -> PyResult<Vec<EnsemblePrediction>> {
    preds.into_iter().map(ens).collect()
}

#[pyfunction]
fn crps_naive(samples: Vec<f64>, y: f64) -> PyResult<f64> {
    scoring::crps_naive(&ens(samples)?, y).map_err(err)
}

#[pyfunction]
fn crps_sorted(samples: Vec<f64>, y: f64) -> PyResult<f64> {
    scoring::crps_sorted(&ens(samples)?, y).map_err(err)
}

/// Unbiased estimator used as the training loss.
#[pyfunction]
fn crps_pwm(samples: Vec<f64>, y: f64) -> PyResult<f64> {
    scoring::crps_pwm(&ens(samples)?, y).map_err(err)
}

/// `(loss, partials)` with one partial per sample, in input order.
#[pyfunction]
fn crps_loss_and_grad(samples: Vec<f64>, y: f64) -> PyResult<(f64, Vec<f64>)> {
    let (loss, g) = scoring::crps_loss_and_grad(&ens(samples)?, y).map_err(err)?;
    Ok((loss, g.partials))
}

#[pyfunction]
fn crps_gaussian_closed(mu: f64, sigma: f64, y: f64) -> PyResult<f64> {
    scoring::crps_gaussian_closed(mu, sigma, y).map_err(err)
}

#[pyfunction]
fn quantile_score(q_hat: f64, alpha: f64, y: f64) -> PyResult<f64> {
    scoring::quantile_score(q_hat, alpha, y).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (preds, ys, low_pct = DEFAULT_LOW_PCT, high_pct = DEFAULT_HIGH_PCT))]
fn picp(preds: Vec<Vec<f64>>, ys: Vec<f64>, low_pct: f64, high_pct: f64) -> PyResult<f64> {
    metrics::picp(&ensembles(preds)?, &ys, low_pct, high_pct).map_err(err)
}

/// QICE as a fraction.
#[pyfunction]
#[pyo3(signature = (preds, ys, m_bins = DEFAULT_M_BINS))]
fn qice(preds: Vec<Vec<f64>>, ys: Vec<f64>, m_bins: usize) -> PyResult<f64> {
    metrics::qice(&ensembles(preds)?, &ys, m_bins).map_err(err)
}

#[pyfunction]
fn gaussian_nll(mus: Vec<f64>, sigmas: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    metrics::gaussian_nll(&mus, &sigmas, &ys).map_err(err)
}

/// All metrics at once; `qice` is a fraction.
#[pyfunction]
#[pyo3(signature = (preds, ys, m_bins = DEFAULT_M_BINS, low_pct = DEFAULT_LOW_PCT, high_pct = DEFAULT_HIGH_PCT))]
fn evaluate(preds: Vec<Vec<f64>>, ys: Vec<f64>, m_bins: usize, low_pct: f64, high_pct: f64) -> PyResult<HashMap<&'static str, f64>> {
    let cfg = MetricsConfig { m_bins, low_pct, high_pct };
    let r = metrics::evaluate(&ensembles(preds)?, &ys, &cfg).map_err(err)?;
    Ok(HashMap::from([
        ("picp", r.picp),
        ("qice", r.qice),
        ("crps", r.crps_mean),
        ("mse", r.mse),
        ("mae", r.mae),
        ("n_rows", r.n_rows as f64),
    ]))
}

/// `(x, y)` for one of the synthetic toy tasks, with `x` as a list of rows.
#[pyfunction]
#[pyo3(signature = (task, n = 1000, seed = 0))]
fn generate_toy(task: &str, n: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let kind: ToyKind = task.parse().map_err(err)?;
    let ds = gen_toy(&ToyTask { kind, n_samples: n, seed }).map_err(err)?;
    Ok((ds.rows().map(<[f64]>::to_vec).collect(), ds.y().to_vec()))
}

#[pyfunction]
fn toy_tasks() -> Vec<&'static str> {
    ToyKind::ALL.iter().map(|k| k.name()).collect()
}

/// Sorted samples with CDF, quantile, interval and histogram queries.
#[pyclass(name = "EmpiricalDistribution", frozen)]
struct PyDistribution(EmpiricalDistribution);

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(samples: Vec<f64>) -> PyResult<Self> {
        EmpiricalDistribution::from_vec(samples).map(PyDistribution).map_err(err)
    }

    fn samples(&self) -> Vec<f64> {
        self.0.sorted_samples().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn cdf(&self, t: f64) -> f64 {
        self.0.cdf(t)
    }

    fn quantile(&self, alpha: f64) -> PyResult<f64> {
        self.0.quantile(alpha).map_err(err)
    }

    /// Central interval `(lower, upper)` at `level`.
    fn confidence_interval(&self, level: f64) -> PyResult<(f64, f64)> {
        let ci = self.0.confidence_interval(level).map_err(err)?;
        Ok((ci.lower, ci.upper))
    }

    /// `(left, right, count)` per bin.
    fn histogram(&self, bins: usize) -> PyResult<Vec<(f64, f64, usize)>> {
        let h = self.0.histogram(bins).map_err(err)?;
        Ok(h.into_iter().map(|b| (b.left, b.right, b.count)).collect())
    }

    #[pyo3(signature = (kl_bins = DEFAULT_KL_BINS))]
    fn summary(&self, kl_bins: usize) -> PyResult<HashMap<&'static str, f64>> {
        let s = self.0.summary(kl_bins).map_err(err)?;
        Ok(HashMap::from([
            ("mean", s.mean),
            ("stddev", s.stddev),
            ("skewness", s.skewness),
            ("excess_kurtosis", s.excess_kurtosis),
            ("kl_to_std_normal", s.kl_to_std_normal),
        ]))
    }
}

/// A network plus the standardisation it was trained under. Predictions
/// are in original target units.
#[pyclass(name = "Model")]
struct PyModel {
    ck: Checkpoint,
    forwards: usize,
}

impl PyModel {
    fn inputs(&self, x: &[Vec<f64>]) -> PyResult<Vec<Vec<f64>>> {
        let dim = self.ck.params.config.input_dim;
        if let Some(bad) = x.iter().find(|r| r.len() != dim) {
            return Err(PyValueError::new_err(format!("model expects {dim} features, got {}", bad.len())));
        }
        Ok(match &self.ck.standardization {
            Some(s) => x.iter().map(|r| s.transform_x(r)).collect(),
            None => x.to_vec(),
        })
    }

    fn stats(&self) -> Option<&Standardization> {
        self.ck.standardization.as_ref()
    }

    fn original(&self, pred: EnsemblePrediction) -> Vec<f64> {
        let samples = pred.into_samples();
        match self.stats() {
            Some(s) => samples.into_iter().map(|v| s.inverse_y(v)).collect(),
            None => samples,
        }
    }
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (input_dim, hidden = vec![64, 64], k = 100, activation = "relu", dropout = 0.0, seed = 0, gaussian = false))]
    fn new(
        input_dim: usize,
        hidden: Vec<usize>,
        k: usize,
        activation: &str,
        dropout: f64,
        seed: u64,
        gaussian: bool,
    ) -> PyResult<Self> {
        let activation: Activation = activation.parse().map_err(err)?;
        let cfg = ModelConfig {
            activation,
            dropout_p: dropout,
            seed,
            head: if gaussian { HeadKind::Gaussian } else { HeadKind::Ensemble },
            ..ModelConfig::new(input_dim, hidden, k)
        };
        let params = ModelParams::init(&cfg).map_err(err)?;
        Ok(PyModel {
            ck: Checkpoint {
                params,
                optimizer: None,
                standardization: None,
            },
            forwards: 0,
        })
    }

    /// Trains from a fresh initialisation on standardised copies of `x`
    /// and `y`. Returns `(train, valid)` loss per epoch.
    #[pyo3(signature = (x, y, lr = 1e-3, epochs = 50, patience = 10, batch_size = 64, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        lr: f64,
        epochs: usize,
        patience: usize,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<Vec<(f64, f64)>> {
        let raw = Dataset::new(x, y).map_err(err)?;
        let all: Vec<usize> = (0..raw.n_rows()).collect();
        let ds = standardize(&raw, &all).map_err(err)?;
        let tc = TrainConfig {
            lr,
            max_epochs: epochs,
            patience,
            batch_size,
            seed,
            ..Default::default()
        };
        let cfg = self.ck.params.config.clone();
        let out = py.detach(|| train::train(&ds, &cfg, &tc)).map_err(err)?;
        self.ck = Checkpoint {
            params: out.params,
            optimizer: Some(out.optimizer),
            standardization: ds.standardization().cloned(),
        };
        Ok(out.history.epochs.iter().map(|e| (e.train, e.valid)).collect())
    }

    /// `K` samples per row, one forward pass each.
    fn predict(&mut self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let xs = self.inputs(&x)?;
        let predictor = Predictor::new(&self.ck.params);
        let preds = xs.iter().map(|r| predictor.predict(r)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        self.forwards += predictor.forward_count();
        Ok(preds.into_iter().map(|p| self.original(p)).collect())
    }

    /// `K·t` pooled samples per row from `t` dropout-active passes.
    #[pyo3(signature = (x, t, seed = 0))]
    fn predict_mcd(&mut self, x: Vec<Vec<f64>>, t: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let xs = self.inputs(&x)?;
        let predictor = Predictor::new(&self.ck.params);
        let preds = xs
            .iter()
            .enumerate()
            .map(|(i, r)| predictor.predict_mcd(r, t, DistRng::stream(seed, i as u64).next_u64()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        self.forwards += predictor.forward_count();
        Ok(preds.into_iter().map(|p| self.original(p)).collect())
    }

    /// `(μ, σ)` per row in original units; Gaussian-head models only.
    fn predict_gaussian(&mut self, x: Vec<Vec<f64>>) -> PyResult<Vec<(f64, f64)>> {
        let xs = self.inputs(&x)?;
        let mut out = Vec::with_capacity(xs.len());
        for r in &xs {
            let (mu, sigma) = train::predict_gaussian(&self.ck.params, r).map_err(err)?;
            self.forwards += 1;
            out.push(match self.stats() {
                Some(s) => (s.inverse_y(mu), sigma * s.y_scale()),
                None => (mu, sigma),
            });
        }
        Ok(out)
    }

    /// Network forward passes run by this object's predict calls.
    #[getter]
    fn forward_count(&self) -> usize {
        self.forwards
    }

    #[getter]
    fn k(&self) -> usize {
        self.ck.params.config.k_out
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.ck.params.config.input_dim
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.ck.params.param_count()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.ck.save(path).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel {
            ck: Checkpoint::load(path).map_err(err)?,
            forwards: 0,
        })
    }
}

#[pymodule]
#[pyo3(name = "distpred")]
fn distpred_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(crps_naive, m)?)?;
    m.add_function(wrap_pyfunction!(crps_sorted, m)?)?;
    m.add_function(wrap_pyfunction!(crps_pwm, m)?)?;
    m.add_function(wrap_pyfunction!(crps_loss_and_grad, m)?)?;
    m.add_function(wrap_pyfunction!(crps_gaussian_closed, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_score, m)?)?;
    m.add_function(wrap_pyfunction!(picp, m)?)?;
    m.add_function(wrap_pyfunction!(qice, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_nll, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_toy, m)?)?;
    m.add_function(wrap_pyfunction!(toy_tasks, m)?)?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
