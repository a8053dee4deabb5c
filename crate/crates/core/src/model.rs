//! Feedforward network with an ensemble head.
//!
//! The output layer emits `K` values per input, read as `K` draws from the
//! predictive distribution. Hidden layers use ReLU or tanh and optional
//! inverted dropout; the output layer is linear.
//!
//! # Binary container
//!
//! All integers and floats little-endian:
//!
//! ```text
//! "DPRD"  u16 version
//! u32 input_dim  u32 n_hidden  u32 hidden[n_hidden]  u32 k_out
//! u8 activation (0 relu, 1 tanh)  u8 head (0 ensemble, 1 gaussian)
//! f64 dropout_p  u64 seed
//! per layer: f64 weights[out * in] (row-major, one row per output unit), f64 bias[out]
//! zero or more sections: [u8; 4] tag, u64 byte length, payload
//! ```

use crate::error::{invalid, Error, Result};
use crate::rng::DistRng;
use crate::scoring::{CrpsGradient, EnsemblePrediction};

pub const MAGIC: &[u8; 4] = b"DPRD";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            _ => Err(Error::Format(format!("unknown activation code {c}"))),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(invalid(format!("unknown activation '{other}' (expected relu or tanh)"))),
        }
    }
}

/// What the output layer represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// `k_out` ensemble samples.
    Ensemble,
    /// Two outputs, `(μ, log σ)`, for the Gaussian-likelihood baseline.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    /// Ensemble width. For a Gaussian head this is the number of quantile
    /// samples drawn from the fitted Gaussian at prediction time.
    pub k_out: usize,
    pub activation: Activation,
    pub dropout_p: f64,
    pub seed: u64,
    pub head: HeadKind,
}

impl ModelConfig {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, k_out: usize) -> Self {
        ModelConfig {
            input_dim,
            hidden_dims,
            k_out,
            activation: Activation::Relu,
            dropout_p: 0.0,
            seed: 0,
            head: HeadKind::Ensemble,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.head {
            HeadKind::Ensemble => self.k_out,
            HeadKind::Gaussian => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(invalid("input_dim must be positive"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(invalid("hidden layer widths must be positive"));
        }
        if self.k_out < 2 {
            return Err(invalid(format!(
                "ensemble width K must be >= 2 for the PWM CRPS loss, got {}",
                self.k_out
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(invalid(format!("dropout must lie in [0, 1), got {}", self.dropout_p)));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((h, fan_in));
            fan_in = h;
        }
        dims.push((self.output_dim(), fan_in));
        dims
    }
}

/// Fully connected layer: `out = W · in + b`, `W` row-major `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Dense {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.in_dim).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b
        }));
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.out_dim == other.out_dim && self.in_dim == other.in_dim
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layers: Vec<Dense>,
}

/// Gradients with the same layout as [`ModelParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub layers: Vec<Dense>,
}

impl ParamGradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ParamGradients {
            layers: params.layers.iter().map(|l| Dense::zeros(l.out_dim, l.in_dim)).collect(),
        }
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.values_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.values_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.values())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().flat_map(|l| l.values()).all(|v| v.is_finite())
    }

    pub(crate) fn matches(&self, params: &ModelParams) -> bool {
        self.layers.len() == params.layers.len()
            && self.layers.iter().zip(&params.layers).all(|(g, p)| g.same_shape(p))
    }
}

/// Everything backprop needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Input fed to each layer (after dropout for hidden inputs).
    pub layer_inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// Inverted-dropout mask per hidden layer: entries are 0 or `1/(1−p)`.
    pub masks: Vec<Option<Vec<f64>>>,
}

/// Deterministic evaluation or a stochastic pass with fresh dropout masks.
///
/// Training and MC-dropout inference both use [`Pass::Dropout`]; plain
/// prediction uses [`Pass::Deterministic`].
pub enum Pass<'a> {
    Deterministic,
    Dropout(&'a mut DistRng),
}

impl ModelParams {
    /// Uniform `U(−1/√fan_in, 1/√fan_in)` weights and zero biases, seeded from
    /// `config.seed`.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = DistRng::new(config.seed);
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(out_dim, in_dim)| {
                let bound = 1.0 / (in_dim as f64).sqrt();
                let mut layer = Dense::zeros(out_dim, in_dim);
                for w in &mut layer.weights {
                    *w = rng.uniform_in(-bound, bound);
                }
                layer
            })
            .collect();
        Ok(ModelParams {
            config: config.clone(),
            layers,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().flat_map(|l| l.values()).all(|v| v.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(invalid(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.config.input_dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("feature vector contains non-finite values"));
        }
        Ok(())
    }

    /// Raw network outputs without a trace.
    pub fn forward_raw(&self, x: &[f64], pass: Pass<'_>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut rng = match pass {
            Pass::Deterministic => None,
            Pass::Dropout(r) => Some(r),
        };
        let p = self.config.dropout_p;
        let act = self.config.activation;
        let last = self.layers.len() - 1;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if l < last {
                for v in next.iter_mut() {
                    *v = act.apply(*v);
                }
                if let Some(r) = rng.as_deref_mut().filter(|_| p > 0.0) {
                    let keep = 1.0 / (1.0 - p);
                    for v in next.iter_mut() {
                        *v *= if r.uniform() < p { 0.0 } else { keep };
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass recording what [`ModelParams::backward`] needs.
    pub fn forward(&self, x: &[f64], pass: Pass<'_>) -> Result<(Vec<f64>, ForwardTrace)> {
        self.check_input(x)?;
        let mut rng = match pass {
            Pass::Deterministic => None,
            Pass::Dropout(r) => Some(r),
        };
        let p = self.config.dropout_p;
        let act = self.config.activation;
        let n_layers = self.layers.len();
        let mut trace = ForwardTrace {
            layer_inputs: Vec::with_capacity(n_layers),
            pre_activations: Vec::with_capacity(n_layers - 1),
            masks: Vec::with_capacity(n_layers - 1),
        };
        let mut cur = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.forward_into(&cur, &mut z);
            trace.layer_inputs.push(cur);
            if l + 1 == n_layers {
                return Ok((z, trace));
            }
            let mut a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            let mask = match rng.as_deref_mut() {
                Some(r) if p > 0.0 => {
                    let keep = 1.0 / (1.0 - p);
                    let m: Vec<f64> = (0..a.len())
                        .map(|_| if r.uniform() < p { 0.0 } else { keep })
                        .collect();
                    a.iter_mut().zip(&m).for_each(|(v, s)| *v *= s);
                    Some(m)
                }
                _ => None,
            };
            trace.pre_activations.push(z);
            trace.masks.push(mask);
            cur = a;
        }
        unreachable!("a network always has an output layer")
    }

    /// Ensemble prediction for one row. Errors on a Gaussian head, whose raw
    /// outputs are `(μ, log σ)` rather than samples.
    pub fn forward_ensemble(&self, x: &[f64], pass: Pass<'_>) -> Result<(EnsemblePrediction, ForwardTrace)> {
        if self.config.head != HeadKind::Ensemble {
            return Err(invalid("model has a Gaussian head, not an ensemble head"));
        }
        let (out, trace) = self.forward(x, pass)?;
        Ok((EnsemblePrediction::new(out)?, trace))
    }

    /// Reverse-mode gradients of a scalar loss given `∂loss/∂output`.
    pub fn backward(&self, trace: &ForwardTrace, loss_grad: &CrpsGradient) -> Result<ParamGradients> {
        let mut grads = ParamGradients::zeros_like(self);
        self.backward_into(trace, &loss_grad.partials, &mut grads)?;
        Ok(grads)
    }

    /// Accumulates (adds) gradients into `grads`.
    pub fn backward_into(&self, trace: &ForwardTrace, output_grad: &[f64], grads: &mut ParamGradients) -> Result<()> {
        let n_layers = self.layers.len();
        if output_grad.len() != self.output_dim()
            || trace.layer_inputs.len() != n_layers
            || trace.pre_activations.len() + 1 != n_layers
            || !grads.matches(self)
        {
            return Err(invalid("trace, gradient and parameter shapes disagree"));
        }
        let act = self.config.activation;
        let mut delta = output_grad.to_vec();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let input = &trace.layer_inputs[l];
            if input.len() != layer.in_dim {
                return Err(invalid("trace does not match layer widths"));
            }
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                row.iter_mut().zip(input).for_each(|(w, x)| *w += d * x);
            }
            if l == 0 {
                break;
            }
            let mut back = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                back.iter_mut().zip(row).for_each(|(b, w)| *b += d * w);
            }
            let z = &trace.pre_activations[l - 1];
            for (i, b) in back.iter_mut().enumerate() {
                *b *= act.derivative(z[i]);
            }
            if let Some(mask) = &trace.masks[l - 1] {
                back.iter_mut().zip(mask).for_each(|(b, m)| *b *= m);
            }
            delta = back;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_container(self, &[])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        decode_container(bytes).map(|(p, _)| p)
    }
}

/// Serialises parameters followed by tagged sections.
pub fn encode_container(params: &ModelParams, sections: &[([u8; 4], Vec<u8>)]) -> Vec<u8> {
    let c = &params.config;
    let mut out = Vec::with_capacity(64 + params.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(c.input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(c.hidden_dims.len() as u32).to_le_bytes());
    for &h in &c.hidden_dims {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&(c.k_out as u32).to_le_bytes());
    out.push(c.activation.code());
    out.push(match c.head {
        HeadKind::Ensemble => 0,
        HeadKind::Gaussian => 1,
    });
    out.extend_from_slice(&c.dropout_p.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    for layer in &params.layers {
        for v in layer.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for (tag, payload) in sections {
        out.extend_from_slice(tag);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(payload);
    }
    out
}

pub type Section = ([u8; 4], Vec<u8>);

pub fn decode_container(bytes: &[u8]) -> Result<(ModelParams, Vec<Section>)> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Format("missing DPRD magic bytes".into()));
    }
    let version = u16::from_le_bytes(r.array()?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let input_dim = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    let hidden_dims = (0..n_hidden).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let k_out = r.u32()? as usize;
    let activation = Activation::from_code(r.u8()?)?;
    let head = match r.u8()? {
        0 => HeadKind::Ensemble,
        1 => HeadKind::Gaussian,
        c => return Err(Error::Format(format!("unknown head code {c}"))),
    };
    let dropout_p = r.f64()?;
    let seed = r.u64()?;
    let config = ModelConfig {
        input_dim,
        hidden_dims,
        k_out,
        activation,
        dropout_p,
        seed,
        head,
    };
    config.validate().map_err(|e| Error::Format(e.to_string()))?;
    let mut layers = Vec::new();
    for (out_dim, in_dim) in config.layer_dims() {
        let mut layer = Dense::zeros(out_dim, in_dim);
        for v in layer.values_mut() {
            *v = r.f64()?;
        }
        layers.push(layer);
    }
    let mut sections = Vec::new();
    while !r.is_empty() {
        let tag: [u8; 4] = r.array()?;
        let len = r.u64()? as usize;
        sections.push((tag, r.take(len)?.to_vec()));
    }
    Ok((ModelParams { config, layers }, sections))
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}
