//! Fully connected F0 synthesizer.
//!
//! Input rows are normalized `[x-vector ∥ bottleneck]` frames. Hidden layers
//! use ReLU; the two-unit output layer is linear: unit 0 is the normalized
//! log-F0 estimate, unit 1 the voicing logit `g`. A frame is unvoiced iff
//! `g < 0`.

mod checkpoint;

use std::ops::Deref;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::Uniform;

use crate::error::{Error, Result};
use crate::featureio::NormStats;
use crate::rng::seeded_rng;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};

pub const OUTPUT_UNITS: usize = 2;
pub const DEFAULT_HIDDEN: [usize; 4] = [512, 256, 128, 64];
/// Hidden widths used for desk-scale (synthetic) runs.
pub const DESK_HIDDEN: [usize; 4] = [64, 32, 16, 8];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_sizes: DEFAULT_HIDDEN.to_vec(),
            dropout: 0.0,
        }
    }

    pub fn desk(input_dim: usize) -> Self {
        Self {
            hidden_sizes: DESK_HIDDEN.to_vec(),
            ..Self::new(input_dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be positive".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "hidden sizes must be a non-empty list of positive integers, got {:?}",
                self.hidden_sizes
            )));
        }
        if !(0.0..=0.5).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout {} outside [0, 0.5]",
                self.dropout
            )));
        }
        Ok(())
    }

    /// `(out, in)` shape of every layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_sizes);
        dims.push(OUTPUT_UNITS);
        dims.windows(2).map(|w| (w[1], w[0])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layers: Vec<DenseLayer>,
    pub norm: NormStats,
}

/// Per-layer gradients, shaped like [`ModelParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.out_dim(), l.in_dim()))
                .collect(),
        }
    }

    /// Flat views of every weight and bias tensor, in a fixed order.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl ModelParams {
    /// All-zero parameters with identity normalization.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            layers: config
                .layer_shapes()
                .into_iter()
                .map(|(o, i)| DenseLayer::zeros(o, i))
                .collect(),
            norm: NormStats::identity(config.input_dim),
            config: config.clone(),
        })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat mutable views in the same order as [`Gradients::tensors`].
    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weights.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }
}

/// Uniform fan-based initialization: each weight of a layer is drawn from
/// `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`. Biases start at zero and
/// normalization is the identity until set.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(config)?;
    let mut rng = seeded_rng(seed);
    for layer in &mut params.layers {
        let s = init_scale(layer.in_dim(), layer.out_dim());
        let dist = Uniform::new_inclusive(-s, s).expect("finite bounds");
        layer.weights.iter_mut().for_each(|w| *w = rng.sample(dist));
    }
    Ok(params)
}

pub fn init_scale(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (after ReLU and dropout for hidden layers).
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activations of hidden layers.
    pre_activations: Vec<Array2<f64>>,
    /// Inverted-dropout multipliers per hidden layer (`0` or `1/(1-δ)`).
    dropout_masks: Vec<Option<Array2<f64>>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.layer_inputs[0].nrows()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub f0hat_norm: Array1<f64>,
    pub logits: Array1<f64>,
    pub cache: ForwardCache,
}

pub fn forward(
    params: &ModelParams,
    batch: ArrayView2<f64>,
    train_mode: bool,
    dropout_seed: u64,
) -> Result<ForwardOutput> {
    if batch.ncols() != params.config.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "batch has {} columns, model expects {}",
            batch.ncols(),
            params.config.input_dim
        )));
    }
    if batch.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward input batch".into()));
    }
    let dropout = params.config.dropout;
    let use_dropout = train_mode && dropout > 0.0;
    let mut rng = seeded_rng(dropout_seed);
    let keep_scale = 1.0 / (1.0 - dropout);

    let n_layers = params.layers.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut pre_activations = Vec::with_capacity(n_layers - 1);
    let mut dropout_masks = Vec::with_capacity(n_layers - 1);
    let mut h = batch.to_owned();

    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = h.dot(&layer.weights.t());
        z += &layer.bias;
        layer_inputs.push(h);
        if l + 1 == n_layers {
            h = z;
            break;
        }
        let mut a = z.mapv(|v| v.max(0.0));
        pre_activations.push(z);
        if use_dropout {
            let mask = Array2::from_shape_fn(a.raw_dim(), |_| {
                if rng.random::<f64>() < dropout {
                    0.0
                } else {
                    keep_scale
                }
            });
            a *= &mask;
            dropout_masks.push(Some(mask));
        } else {
            dropout_masks.push(None);
        }
        h = a;
    }

    Ok(ForwardOutput {
        f0hat_norm: h.column(0).to_owned(),
        logits: h.column(1).to_owned(),
        cache: ForwardCache {
            layer_inputs,
            pre_activations,
            dropout_masks,
        },
    })
}

/// Exact gradients of a scalar loss given its partials with respect to both
/// output units. The upstream vectors already carry any batch averaging.
pub fn backward(params: &ModelParams, cache: &ForwardCache, dl_df0hat: &[f64], dl_dg: &[f64]) -> Result<Gradients> {
    let n_layers = params.layers.len();
    if cache.layer_inputs.len() != n_layers || cache.pre_activations.len() + 1 != n_layers {
        return Err(Error::CacheMismatch(format!(
            "cache has {} layers, params have {}",
            cache.layer_inputs.len(),
            n_layers
        )));
    }
    for (layer, input) in params.layers.iter().zip(&cache.layer_inputs) {
        if input.ncols() != layer.in_dim() {
            return Err(Error::CacheMismatch(format!(
                "cached layer input width {} vs layer fan-in {}",
                input.ncols(),
                layer.in_dim()
            )));
        }
    }
    let b = cache.batch_size();
    if dl_df0hat.len() != b || dl_dg.len() != b {
        return Err(Error::LengthMismatch(b, dl_df0hat.len().min(dl_dg.len())));
    }

    let mut delta = Array2::<f64>::zeros((b, OUTPUT_UNITS));
    for i in 0..b {
        delta[[i, 0]] = dl_df0hat[i];
        delta[[i, 1]] = dl_dg[i];
    }

    let mut grads = Vec::with_capacity(n_layers);
    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        // written into a fresh row-major buffer so gradients keep the
        // parameters' layout regardless of how the product is dispatched
        let mut weights = Array2::<f64>::zeros((layer.out_dim(), layer.in_dim()));
        general_mat_mul(1.0, &delta.t(), &cache.layer_inputs[l], 0.0, &mut weights);
        let bias = delta.sum_axis(Axis(0));
        grads.push(DenseLayer { weights, bias });
        if l == 0 {
            break;
        }
        let mut d_prev = delta.dot(&layer.weights);
        if let Some(mask) = &cache.dropout_masks[l - 1] {
            d_prev *= mask;
        }
        ndarray::Zip::from(&mut d_prev)
            .and(&cache.pre_activations[l - 1])
            .for_each(|d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
        delta = d_prev;
    }
    grads.reverse();
    Ok(Gradients { layers: grads })
}

/// An F0 contour in Hz; 0 marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct F0Trajectory(Vec<f64>);

impl F0Trajectory {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn voiced_mask(&self) -> Vec<bool> {
        self.0.iter().map(|&v| v > 0.0).collect()
    }
}

impl Deref for F0Trajectory {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for F0Trajectory {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub fn sigmoid(g: f64) -> f64 {
    let e = (-g.abs()).exp();
    let p = 1.0 / (1.0 + e);
    if g >= 0.0 {
        p
    } else {
        1.0 - p
    }
}

/// Runs inference on raw (unnormalized) frame inputs and applies the
/// voicing mask. Returns the contour in Hz and the voicing probabilities.
pub fn predict_f0(params: &ModelParams, features: ArrayView2<f64>) -> Result<(F0Trajectory, Vec<f64>)> {
    if features.ncols() != params.norm.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "features have {} columns, normalization expects {}",
            features.ncols(),
            params.norm.input_dim()
        )));
    }
    let mut x = features.to_owned();
    params.norm.normalize_inputs(&mut x);
    let out = forward(params, x.view(), false, 0)?;
    Ok(mask_outputs(
        &params.norm,
        out.f0hat_norm.as_slice().unwrap(),
        out.logits.as_slice().unwrap(),
    ))
}

/// Converts raw network outputs into a masked contour in Hz. Voiced iff `g >= 0`.
pub fn mask_outputs(norm: &NormStats, f0hat_norm: &[f64], logits: &[f64]) -> (F0Trajectory, Vec<f64>) {
    let f0 = f0hat_norm
        .iter()
        .zip(logits)
        .map(|(&z, &g)| if g < 0.0 { 0.0 } else { norm.denormalize_logf0(z).exp() })
        .collect();
    let pv = logits.iter().map(|&g| sigmoid(g)).collect();
    (F0Trajectory(f0), pv)
}
