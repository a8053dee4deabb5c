//! Minibatch ADAM training on the PWM CRPS loss, single-pass and MC-dropout
//! prediction, and the Gaussian-likelihood baseline head.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{random_split, Dataset, Standardization};
use crate::error::{invalid, Error, Result};
use crate::model::{decode_container, encode_container, ByteReader, HeadKind, ModelConfig, ModelParams, ParamGradients, Pass};
use crate::rng::DistRng;
use crate::scoring::{loss_and_grad_into, EnsemblePrediction};

/// Fraction of the training rows held out for early stopping.
pub const VALID_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// Global-norm gradient clipping threshold.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 64,
            max_epochs: 50,
            patience: 10,
            seed: 0,
            clip_norm: Some(10.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(invalid("eps must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(invalid("batch size and epoch count must be positive"));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(invalid("clip norm must be positive"));
        }
        Ok(())
    }
}

/// First/second moment accumulators for ADAM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ParamGradients,
    pub v: ParamGradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m: ParamGradients::zeros_like(params),
            v: ParamGradients::zeros_like(params),
            step: 0,
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.step.to_le_bytes().to_vec();
        for acc in [&self.m, &self.v] {
            for v in acc.layers.iter().flat_map(|l| l.values()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    fn from_bytes(bytes: &[u8], params: &ModelParams) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let mut state = AdamState::new(params);
        state.step = r.u64()?;
        for acc in [&mut state.m, &mut state.v] {
            for v in acc.layers.iter_mut().flat_map(|l| l.values_mut()) {
                *v = r.f64()?;
            }
        }
        Ok(state)
    }
}

/// One bias-corrected ADAM update.
pub fn adam_step(params: &mut ModelParams, grads: &ParamGradients, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if !grads.matches(params) || !state.m.matches(params) || !state.v.matches(params) {
        return Err(invalid("gradient or optimizer state shape does not match parameters"));
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - cfg.beta1.powf(t);
    let c2 = 1.0 - cfg.beta2.powf(t);
    for (((p, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.layers.iter_mut())
        .zip(state.v.layers.iter_mut())
    {
        for (((pv, &gv), mv), vv) in p.values_mut().zip(g.values()).zip(m.values_mut()).zip(v.values_mut()) {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub train: f64,
    pub valid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Losses of the untrained model.
    pub initial: EpochLoss,
    /// One entry per completed epoch, starting at epoch 1.
    pub epochs: Vec<EpochLoss>,
    /// Index into `epochs` of the lowest validation loss.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_valid(&self) -> f64 {
        self.epochs[self.best_epoch].valid
    }

    /// `epoch,train_loss,valid_loss` rows; epoch 0 is the untrained model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,valid_loss\n");
        let _ = writeln!(out, "0,{},{}", self.initial.train, self.initial.valid);
        for (i, e) in self.epochs.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, e.train, e.valid);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    pub history: TrainHistory,
    /// Optimizer state at the end of the run.
    pub optimizer: AdamState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    Crps,
    GaussianNll,
}

impl Objective {
    fn for_head(head: HeadKind) -> Self {
        match head {
            HeadKind::Ensemble => Objective::Crps,
            HeadKind::Gaussian => Objective::GaussianNll,
        }
    }

    /// Loss for one row; writes `∂loss/∂output` into `grad`.
    fn loss_and_grad(self, out: &[f64], y: f64, grad: &mut [f64], scratch: &mut Vec<usize>) -> f64 {
        match self {
            Objective::Crps => loss_and_grad_into(out, y, grad, scratch),
            Objective::GaussianNll => {
                let (mu, log_sigma) = (out[0], out[1]);
                let r = y - mu;
                let inv_var = (-2.0 * log_sigma).exp();
                grad[0] = -r * inv_var;
                grad[1] = 1.0 - r * r * inv_var;
                0.5 * (2.0 * std::f64::consts::PI).ln() + log_sigma + 0.5 * r * r * inv_var
            }
        }
    }

    fn loss(self, out: &[f64], y: f64, scratch: &mut Vec<usize>, grad: &mut Vec<f64>) -> f64 {
        grad.resize(out.len(), 0.0);
        self.loss_and_grad(out, y, grad, scratch)
    }
}

/// Mean deterministic loss over a dataset.
fn mean_loss(params: &ModelParams, data: &Dataset, objective: Objective) -> Result<f64> {
    let mut scratch = Vec::new();
    let mut grad = Vec::new();
    let mut total = 0.0;
    for (x, &y) in data.rows().zip(data.y()) {
        let out = params.forward_raw(x, Pass::Deterministic)?;
        total += objective.loss(&out, y, &mut scratch, &mut grad);
    }
    Ok(total / data.n_rows() as f64)
}

/// Splits off a seeded validation set and trains on the rest.
pub fn train(dataset: &Dataset, model_config: &ModelConfig, train_config: &TrainConfig) -> Result<TrainOutcome> {
    let (train_set, valid_set) = validation_split(dataset, train_config.seed)?;
    train_with_validation(&train_set, &valid_set, model_config, train_config)
}

/// Gaussian-NLL baseline: same network, two-output `(μ, log σ)` head.
pub fn train_gaussian_baseline(dataset: &Dataset, model_config: &ModelConfig, train_config: &TrainConfig) -> Result<TrainOutcome> {
    let cfg = ModelConfig {
        head: HeadKind::Gaussian,
        ..model_config.clone()
    };
    train(dataset, &cfg, train_config)
}

/// Holds out [`VALID_FRACTION`] of the rows, using the sub-stream `u64::MAX` of `seed`.
pub fn validation_split(dataset: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = dataset.n_rows();
    if n < 2 {
        return Err(invalid(format!("need at least 2 rows to hold out validation data, got {n}")));
    }
    let (train_idx, valid_idx) = random_split(n, VALID_FRACTION, &mut DistRng::stream(seed, u64::MAX));
    Ok((dataset.subset(&train_idx)?, dataset.subset(&valid_idx)?))
}

pub fn train_with_validation(
    train_set: &Dataset,
    valid_set: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_config.validate()?;
    if train_set.n_features() != model_config.input_dim || valid_set.n_features() != model_config.input_dim {
        return Err(invalid(format!(
            "model expects {} features, data has {}",
            model_config.input_dim,
            train_set.n_features()
        )));
    }
    let mut params = ModelParams::init(model_config)?;
    let objective = Objective::for_head(model_config.head);
    let mut state = AdamState::new(&params);
    let mut grads = ParamGradients::zeros_like(&params);
    let out_dim = params.output_dim();
    let mut out_grad = vec![0.0; out_dim];
    let mut scratch = Vec::new();

    let initial = EpochLoss {
        train: mean_loss(&params, train_set, objective)?,
        valid: mean_loss(&params, valid_set, objective)?,
    };
    if !initial.train.is_finite() || !initial.valid.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }

    let mut epochs: Vec<EpochLoss> = Vec::new();
    let mut best: Option<(usize, f64, ModelParams)> = None;
    let mut order: Vec<usize> = (0..train_set.n_rows()).collect();

    for epoch in 1..=train_config.max_epochs {
        let mut rng = DistRng::stream(train_config.seed, epoch as u64);
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(train_config.batch_size) {
            grads.clear();
            let inv_b = 1.0 / batch.len() as f64;
            for &i in batch {
                let (out, trace) = params.forward(train_set.row(i), Pass::Dropout(&mut rng))?;
                let loss = objective.loss_and_grad(&out, train_set.y()[i], &mut out_grad, &mut scratch);
                epoch_loss += loss;
                out_grad.iter_mut().for_each(|g| *g *= inv_b);
                params.backward_into(&trace, &out_grad, &mut grads)?;
            }
            if !grads.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            if let Some(limit) = train_config.clip_norm {
                let norm = grads.global_norm();
                if norm > limit {
                    grads.scale(limit / norm);
                }
            }
            adam_step(&mut params, &grads, &mut state, train_config)?;
        }
        let train_loss = epoch_loss / train_set.n_rows() as f64;
        if !train_loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let valid_loss = mean_loss(&params, valid_set, objective)?;
        if !valid_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epochs.push(EpochLoss {
            train: train_loss,
            valid: valid_loss,
        });
        let idx = epochs.len() - 1;
        match &best {
            Some((_, b, _)) if valid_loss >= *b => {}
            _ => best = Some((idx, valid_loss, params.clone())),
        }
        let best_idx = best.as_ref().map_or(0, |b| b.0);
        if train_config.patience > 0 && idx - best_idx >= train_config.patience {
            break;
        }
    }

    let (best_epoch, _, best_params) = best.expect("at least one epoch runs");
    Ok(TrainOutcome {
        params: best_params,
        history: TrainHistory {
            initial,
            epochs,
            best_epoch,
        },
        optimizer: state,
    })
}

/// `k` samples of `N(μ, σ²)` at the plotting positions `(i − 0.5)/k`.
pub fn gaussian_ensemble(mu: f64, sigma: f64, k: usize) -> Result<EnsemblePrediction> {
    if k < 1 {
        return Err(invalid("need at least one sample"));
    }
    let normal = Normal::new(mu, sigma).map_err(|e| invalid(format!("bad Gaussian ({mu}, {sigma}): {e}")))?;
    EnsemblePrediction::new((1..=k).map(|i| normal.inverse_cdf((i as f64 - 0.5) / k as f64)).collect())
}

/// `(μ, σ)` from a Gaussian-head model.
pub fn predict_gaussian(params: &ModelParams, x: &[f64]) -> Result<(f64, f64)> {
    if params.config.head != HeadKind::Gaussian {
        return Err(invalid("model does not have a Gaussian head"));
    }
    let out = params.forward_raw(x, Pass::Deterministic)?;
    Ok((out[0], out[1].exp()))
}

/// Inference wrapper that counts network forward passes.
pub struct Predictor<'a> {
    params: &'a ModelParams,
    forwards: AtomicUsize,
}

impl<'a> Predictor<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        Predictor {
            params,
            forwards: AtomicUsize::new(0),
        }
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    /// Network forward passes run so far.
    pub fn forward_count(&self) -> usize {
        self.forwards.load(Ordering::Relaxed)
    }

    fn run(&self, x: &[f64], pass: Pass<'_>) -> Result<Vec<f64>> {
        self.forwards.fetch_add(1, Ordering::Relaxed);
        self.params.forward_raw(x, pass)
    }

    fn to_ensemble(&self, out: Vec<f64>) -> Result<EnsemblePrediction> {
        match self.params.config.head {
            HeadKind::Ensemble => EnsemblePrediction::new(out),
            HeadKind::Gaussian => gaussian_ensemble(out[0], out[1].exp(), self.params.config.k_out),
        }
    }

    /// All `K` samples from one deterministic forward pass.
    pub fn predict(&self, x: &[f64]) -> Result<EnsemblePrediction> {
        let out = self.run(x, Pass::Deterministic)?;
        self.to_ensemble(out)
    }

    pub fn predict_rows<'r>(&self, rows: impl IntoIterator<Item = &'r [f64]>) -> Result<Vec<EnsemblePrediction>> {
        rows.into_iter().map(|x| self.predict(x)).collect()
    }

    /// `t` dropout-active passes pooled into one ensemble of `K·t` samples.
    /// With `dropout_p = 0` only `t = 1` is allowed, and equals [`Predictor::predict`].
    pub fn predict_mcd(&self, x: &[f64], t: usize, seed: u64) -> Result<EnsemblePrediction> {
        if t < 1 {
            return Err(invalid("MC dropout needs at least one pass"));
        }
        let p = self.params.config.dropout_p;
        if p == 0.0 {
            if t > 1 {
                return Err(invalid("MC dropout with several passes needs dropout_p > 0"));
            }
            return self.predict(x);
        }
        if self.params.config.head != HeadKind::Ensemble {
            return Err(invalid("MC dropout pooling needs an ensemble head"));
        }
        let mut rng = DistRng::new(seed);
        let mut pooled = Vec::with_capacity(t * self.params.config.k_out);
        for _ in 0..t {
            pooled.extend(self.run(x, Pass::Dropout(&mut rng))?);
        }
        EnsemblePrediction::new(pooled)
    }
}

pub fn predict(params: &ModelParams, x: &[f64]) -> Result<EnsemblePrediction> {
    Predictor::new(params).predict(x)
}

pub fn predict_mcd(params: &ModelParams, x: &[f64], t: usize, seed: u64) -> Result<EnsemblePrediction> {
    Predictor::new(params).predict_mcd(x, t, seed)
}

const ADAM_TAG: [u8; 4] = *b"ADAM";
const STDZ_TAG: [u8; 4] = *b"STDZ";

/// Model container plus optional optimizer and standardisation sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub optimizer: Option<AdamState>,
    pub standardization: Option<Standardization>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut sections = Vec::new();
        if let Some(opt) = &self.optimizer {
            sections.push((ADAM_TAG, opt.to_bytes()));
        }
        if let Some(s) = &self.standardization {
            sections.push((STDZ_TAG, s.to_bytes()));
        }
        encode_container(&self.params, &sections)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (params, sections) = decode_container(bytes)?;
        let mut ck = Checkpoint {
            params,
            optimizer: None,
            standardization: None,
        };
        for (tag, payload) in sections {
            match tag {
                ADAM_TAG => ck.optimizer = Some(AdamState::from_bytes(&payload, &ck.params)?),
                STDZ_TAG => ck.standardization = Some(Standardization::from_bytes(&payload)?),
                _ => {}
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_toy, standardize, ToyKind, ToyTask};

    fn tiny_params() -> ModelParams {
        ModelParams::init(&ModelConfig::new(2, vec![3], 4)).unwrap()
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut p = tiny_params();
        let before = p.clone();
        let mut st = AdamState::new(&p);
        let g = ParamGradients::zeros_like(&p);
        adam_step(&mut p, &g, &mut st, &TrainConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = tiny_params();
        let before = p.clone();
        let mut st = AdamState::new(&p);
        let mut g = ParamGradients::zeros_like(&p);
        g.layers[0].weights[0] = 0.37;
        g.layers[1].bias[2] = -5.0;
        let cfg = TrainConfig::default();
        adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        let d0 = p.layers[0].weights[0] - before.layers[0].weights[0];
        let d1 = p.layers[1].bias[2] - before.layers[1].bias[2];
        assert!((d0 + cfg.lr).abs() < 1e-9, "{d0}");
        assert!((d1 - cfg.lr).abs() < 1e-9, "{d1}");
        // untouched entries stay put
        assert_eq!(p.layers[0].weights[1], before.layers[0].weights[1]);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut p = tiny_params();
        let other = ModelParams::init(&ModelConfig::new(2, vec![5], 4)).unwrap();
        let mut st = AdamState::new(&p);
        let g = ParamGradients::zeros_like(&other);
        assert!(adam_step(&mut p, &g, &mut st, &TrainConfig::default()).is_err());
    }

    #[test]
    fn train_config_validation() {
        let bad = [
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { beta1: 1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { clip_norm: Some(-1.0), ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    fn toy(kind: ToyKind, n: usize, seed: u64) -> Dataset {
        let ds = generate_toy(&ToyTask { kind, n_samples: n, seed }).unwrap();
        let all: Vec<usize> = (0..n).collect();
        standardize(&ds, &all).unwrap()
    }

    #[test]
    fn patience_zero_runs_every_epoch() {
        let ds = toy(ToyKind::Linear, 200, 1);
        let cfg = TrainConfig { max_epochs: 4, patience: 0, ..Default::default() };
        let out = train(&ds, &ModelConfig::new(1, vec![8], 10), &cfg).unwrap();
        assert_eq!(out.history.epochs.len(), 4);
        assert!(out.history.best_epoch < 4);
    }

    #[test]
    fn history_is_deterministic_and_best_is_min() {
        let ds = toy(ToyKind::Sinusoidal, 300, 2);
        let mc = ModelConfig { dropout_p: 0.1, ..ModelConfig::new(1, vec![16], 12) };
        let cfg = TrainConfig { max_epochs: 6, lr: 3e-3, ..Default::default() };
        let a = train(&ds, &mc, &cfg).unwrap();
        let b = train(&ds, &mc, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        let min = a.history.epochs.iter().map(|e| e.valid).fold(f64::INFINITY, f64::min);
        assert_eq!(a.history.best_valid(), min);
        let (_, valid) = validation_split(&ds, cfg.seed).unwrap();
        let recomputed = mean_loss(&a.params, &valid, Objective::Crps).unwrap();
        assert_eq!(recomputed, min);
    }

    #[test]
    fn empty_and_mismatched_data_are_rejected() {
        let one = Dataset::new(vec![vec![1.0]], vec![1.0]).unwrap();
        assert!(train(&one, &ModelConfig::new(1, vec![], 4), &TrainConfig::default()).is_err());
        let ds = toy(ToyKind::Linear, 50, 0);
        assert!(train(&ds, &ModelConfig::new(3, vec![], 4), &TrainConfig::default()).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let ds = toy(ToyKind::Linear, 100, 0);
        let cfg = TrainConfig { lr: 1e300, clip_norm: None, max_epochs: 3, ..Default::default() };
        let err = train(&ds, &ModelConfig::new(1, vec![4], 4), &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn predictor_counts_one_forward_per_row() {
        let p = ModelParams::init(&ModelConfig::new(2, vec![5], 7)).unwrap();
        let pred = Predictor::new(&p);
        let rows: Vec<Vec<f64>> = (0..13).map(|i| vec![i as f64, 1.0]).collect();
        let out = pred.predict_rows(rows.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(out.len(), 13);
        assert_eq!(pred.forward_count(), 13);
        assert_eq!(out[4], predict(&p, &rows[4]).unwrap());
        assert_eq!(predict(&p, &rows[0]).unwrap(), predict(&p, &rows[0]).unwrap());
    }

    #[test]
    fn mcd_pools_and_reduces() {
        let plain = ModelParams::init(&ModelConfig::new(2, vec![5], 7)).unwrap();
        let x = [0.2, -0.4];
        assert_eq!(predict_mcd(&plain, &x, 1, 3).unwrap(), predict(&plain, &x).unwrap());
        assert!(predict_mcd(&plain, &x, 2, 3).is_err());

        let drop = ModelParams::init(&ModelConfig { dropout_p: 0.2, ..ModelConfig::new(2, vec![5], 7) }).unwrap();
        let pred = Predictor::new(&drop);
        let e = pred.predict_mcd(&x, 2, 9).unwrap();
        assert_eq!(e.len(), 14);
        assert_eq!(pred.forward_count(), 2);
        assert_eq!(e, predict_mcd(&drop, &x, 2, 9).unwrap());
        assert!(predict_mcd(&drop, &x, 0, 9).is_err());
    }

    #[test]
    fn gaussian_ensemble_quantiles() {
        let e = gaussian_ensemble(3.0, 2.0, 4).unwrap();
        let s = e.samples();
        assert!((s[0] + s[3] - 6.0).abs() < 1e-9);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(gaussian_ensemble(0.0, -1.0, 4).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let ds = toy(ToyKind::Linear, 100, 0);
        let out = train(&ds, &ModelConfig::new(1, vec![4], 5), &TrainConfig { max_epochs: 2, ..Default::default() }).unwrap();
        let ck = Checkpoint {
            params: out.params,
            optimizer: Some(out.optimizer),
            standardization: ds.standardization().cloned(),
        };
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        let bare = Checkpoint { optimizer: None, standardization: None, ..ck.clone() };
        assert_eq!(Checkpoint::from_bytes(&bare.to_bytes()).unwrap(), bare);
    }
}
