//! The forecaster: a channel-time transformer with a Gaussian mixture head.
//!
//! Input is a multivariate series of `C = T + N` channels — `T` one-hot
//! target channels and `N` spectral covariate channels — cut into patches of
//! `P` steps.  Target channels carry values only over the `L` context steps;
//! their unknown horizon patches are replaced by a learnable sink embedding.
//! Encoder blocks alternate attention over time patches (within a channel)
//! and over channels (within a time patch); channels carry no index
//! embedding, only a covariate/target role embedding, so covariate order is
//! immaterial.  The head maps each target-channel horizon token to `P` per-
//! step Gaussian mixtures (weights, means, scales), from which both the loss
//! (mixture NLL) and point forecasts (mixture means) derive.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use train::{train, Episode, TrainOptions, TrainTrace};

use crate::tape::{Tape, VarId};
use crate::tensor::{Tensor, TensorError};
use crate::MAX_VARIATES;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt;

/// Epsilon inside every layer normalization.
pub const LN_EPS: f64 = 1e-5;

/// Lower bound on mixture scales.
pub const SCALE_FLOOR: f64 = 1e-4;

/// Standard deviation of the weight initialization.
const INIT_STD: f64 = 0.02;

// ─── Errors ──────────────────────────────────────────────────────────────────

/// Failure modes of model construction, forward passes, and training.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    InvalidConfig(String),
    InvalidArgument(String),
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    NonFinite {
        what: String,
    },
    Tensor(TensorError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidConfig(msg) => write!(f, "invalid model config: {msg}"),
            ModelError::InvalidArgument(msg) => write!(f, "{msg}"),
            ModelError::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected shape {expected:?}, got {found:?}"),
            ModelError::NonFinite { what } => write!(f, "{what} is not finite"),
            ModelError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<TensorError> for ModelError {
    fn from(e: TensorError) -> ModelError {
        ModelError::Tensor(e)
    }
}

// ─── Configuration ───────────────────────────────────────────────────────────

/// Hyperparameters fixing the model's geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Covariate channels `N`.
    pub n_covariate_channels: usize,
    /// One-hot target channels `T`.
    pub n_target_channels: usize,
    /// Context steps `L` (multiple of `patch_size`).
    pub context_steps: usize,
    /// Forecast horizon steps `H` (multiple of `patch_size`).
    pub horizon_steps: usize,
    /// Steps per patch `P`.
    pub patch_size: usize,
    /// Embedding width.
    pub d_model: usize,
    /// Attention heads (divides `d_model`).
    pub n_heads: usize,
    /// Encoder blocks.
    pub n_blocks: usize,
    /// Mixture components per forecast step `K`.
    pub n_mixture: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            n_covariate_channels: 60,
            n_target_channels: crate::synth::N_CLASSES,
            context_steps: 62 * 64,
            horizon_steps: 64,
            patch_size: 8,
            d_model: 64,
            n_heads: 4,
            n_blocks: 3,
            n_mixture: 3,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Checks divisibility and budget constraints.
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("n_covariate_channels", self.n_covariate_channels),
            ("n_target_channels", self.n_target_channels),
            ("context_steps", self.context_steps),
            ("horizon_steps", self.horizon_steps),
            ("patch_size", self.patch_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_blocks", self.n_blocks),
            ("n_mixture", self.n_mixture),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.n_covariate_channels + self.n_target_channels > MAX_VARIATES {
            return Err(ModelError::InvalidConfig(format!(
                "{} covariate + {} target channels exceed the {MAX_VARIATES}-variate limit",
                self.n_covariate_channels, self.n_target_channels
            )));
        }
        if self.context_steps % self.patch_size != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "context_steps {} is not a multiple of patch_size {}",
                self.context_steps, self.patch_size
            )));
        }
        if self.horizon_steps % self.patch_size != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "horizon_steps {} is not a multiple of patch_size {}",
                self.horizon_steps, self.patch_size
            )));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    /// Total channels `C = T + N`.
    pub fn n_channels(&self) -> usize {
        self.n_covariate_channels + self.n_target_channels
    }

    /// Tokens per channel over context plus horizon.
    pub fn n_tokens(&self) -> usize {
        (self.context_steps + self.horizon_steps) / self.patch_size
    }

    /// Tokens per channel covering the context alone.
    pub fn n_context_tokens(&self) -> usize {
        self.context_steps / self.patch_size
    }

    /// Feed-forward width (4× the embedding width).
    pub fn d_ff(&self) -> usize {
        4 * self.d_model
    }

    /// Width of one head token: `P` steps × (weights, means, scales) × `K`.
    pub fn head_width(&self) -> usize {
        self.patch_size * 3 * self.n_mixture
    }
}

// ─── Parameters ──────────────────────────────────────────────────────────────

#[derive(Debug)]
pub(crate) struct AttnParams {
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
}

#[derive(Debug)]
pub(crate) struct BlockParams {
    pub ln_t_gain: Tensor,
    pub ln_t_bias: Tensor,
    pub attn_t: AttnParams,
    pub ln_c_gain: Tensor,
    pub ln_c_bias: Tensor,
    pub attn_c: AttnParams,
    pub ln_f_gain: Tensor,
    pub ln_f_bias: Tensor,
    pub ff_w1: Tensor,
    pub ff_b1: Tensor,
    pub ff_w2: Tensor,
    pub ff_b2: Tensor,
}

/// All learnable tensors, addressable by stable dotted names.
#[derive(Debug)]
pub struct Parameters {
    pub(crate) patch_w: Tensor,
    pub(crate) patch_b: Tensor,
    pub(crate) sink: Tensor,
    pub(crate) role_target: Tensor,
    pub(crate) role_covariate: Tensor,
    pub(crate) pos: Tensor,
    pub(crate) blocks: Vec<BlockParams>,
    pub(crate) final_gain: Tensor,
    pub(crate) final_bias: Tensor,
    pub(crate) head_w: Tensor,
    pub(crate) head_b: Tensor,
}

fn randn(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let dist = Normal::new(0.0, INIT_STD).expect("valid normal");
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape, data).expect("internal init shape").with_grad()
}

fn zeros_p(shape: Vec<usize>) -> Tensor {
    Tensor::zeros(shape).with_grad()
}

fn ones_p(shape: Vec<usize>) -> Tensor {
    Tensor::full(shape, 1.0).with_grad()
}

impl Parameters {
    /// Seeded initialization: weights ~ N(0, 0.02²), biases 0, norm gains 1.
    fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Parameters {
        let d = config.d_model;
        let attn = |rng: &mut ChaCha8Rng| AttnParams {
            wq: randn(vec![d, d], rng),
            bq: zeros_p(vec![d]),
            wk: randn(vec![d, d], rng),
            bk: zeros_p(vec![d]),
            wv: randn(vec![d, d], rng),
            bv: zeros_p(vec![d]),
            wo: randn(vec![d, d], rng),
            bo: zeros_p(vec![d]),
        };
        let blocks = (0..config.n_blocks)
            .map(|_| BlockParams {
                ln_t_gain: ones_p(vec![d]),
                ln_t_bias: zeros_p(vec![d]),
                attn_t: attn(rng),
                ln_c_gain: ones_p(vec![d]),
                ln_c_bias: zeros_p(vec![d]),
                attn_c: attn(rng),
                ln_f_gain: ones_p(vec![d]),
                ln_f_bias: zeros_p(vec![d]),
                ff_w1: randn(vec![d, config.d_ff()], rng),
                ff_b1: zeros_p(vec![config.d_ff()]),
                ff_w2: randn(vec![config.d_ff(), d], rng),
                ff_b2: zeros_p(vec![d]),
            })
            .collect();
        Parameters {
            patch_w: randn(vec![config.patch_size, d], rng),
            patch_b: zeros_p(vec![d]),
            sink: randn(vec![d], rng),
            role_target: randn(vec![d], rng),
            role_covariate: randn(vec![d], rng),
            pos: randn(vec![config.n_tokens(), d], rng),
            blocks,
            final_gain: ones_p(vec![d]),
            final_bias: zeros_p(vec![d]),
            head_w: randn(vec![d, config.head_width()], rng),
            head_b: zeros_p(vec![config.head_width()]),
        }
    }

    /// Immutable view of every tensor with its stable name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        fn push_attn<'a>(
            out: &mut Vec<(String, &'a Tensor)>,
            i: usize,
            tag: &str,
            a: &'a AttnParams,
        ) {
            out.push((format!("block{i}.{tag}.wq"), &a.wq));
            out.push((format!("block{i}.{tag}.bq"), &a.bq));
            out.push((format!("block{i}.{tag}.wk"), &a.wk));
            out.push((format!("block{i}.{tag}.bk"), &a.bk));
            out.push((format!("block{i}.{tag}.wv"), &a.wv));
            out.push((format!("block{i}.{tag}.bv"), &a.bv));
            out.push((format!("block{i}.{tag}.wo"), &a.wo));
            out.push((format!("block{i}.{tag}.bo"), &a.bo));
        }
        let mut out: Vec<(String, &Tensor)> = vec![
            ("patch.w".into(), &self.patch_w),
            ("patch.b".into(), &self.patch_b),
            ("sink".into(), &self.sink),
            ("role.target".into(), &self.role_target),
            ("role.covariate".into(), &self.role_covariate),
            ("pos".into(), &self.pos),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.ln_t.gain"), &b.ln_t_gain));
            out.push((format!("block{i}.ln_t.bias"), &b.ln_t_bias));
            push_attn(&mut out, i, "attn_t", &b.attn_t);
            out.push((format!("block{i}.ln_c.gain"), &b.ln_c_gain));
            out.push((format!("block{i}.ln_c.bias"), &b.ln_c_bias));
            push_attn(&mut out, i, "attn_c", &b.attn_c);
            out.push((format!("block{i}.ln_f.gain"), &b.ln_f_gain));
            out.push((format!("block{i}.ln_f.bias"), &b.ln_f_bias));
            out.push((format!("block{i}.ff.w1"), &b.ff_w1));
            out.push((format!("block{i}.ff.b1"), &b.ff_b1));
            out.push((format!("block{i}.ff.w2"), &b.ff_w2));
            out.push((format!("block{i}.ff.b2"), &b.ff_b2));
        }
        out.push(("final.gain".into(), &self.final_gain));
        out.push(("final.bias".into(), &self.final_bias));
        out.push(("head.w".into(), &self.head_w));
        out.push(("head.b".into(), &self.head_b));
        out
    }

    /// Mutable tensors in exactly the order of [`Parameters::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![
            &mut self.patch_w,
            &mut self.patch_b,
            &mut self.sink,
            &mut self.role_target,
            &mut self.role_covariate,
            &mut self.pos,
        ];
        for b in self.blocks.iter_mut() {
            out.push(&mut b.ln_t_gain);
            out.push(&mut b.ln_t_bias);
            out.push(&mut b.attn_t.wq);
            out.push(&mut b.attn_t.bq);
            out.push(&mut b.attn_t.wk);
            out.push(&mut b.attn_t.bk);
            out.push(&mut b.attn_t.wv);
            out.push(&mut b.attn_t.bv);
            out.push(&mut b.attn_t.wo);
            out.push(&mut b.attn_t.bo);
            out.push(&mut b.ln_c_gain);
            out.push(&mut b.ln_c_bias);
            out.push(&mut b.attn_c.wq);
            out.push(&mut b.attn_c.bq);
            out.push(&mut b.attn_c.wk);
            out.push(&mut b.attn_c.bk);
            out.push(&mut b.attn_c.wv);
            out.push(&mut b.attn_c.bv);
            out.push(&mut b.attn_c.wo);
            out.push(&mut b.attn_c.bo);
            out.push(&mut b.ln_f_gain);
            out.push(&mut b.ln_f_bias);
            out.push(&mut b.ff_w1);
            out.push(&mut b.ff_b1);
            out.push(&mut b.ff_w2);
            out.push(&mut b.ff_b2);
        }
        out.push(&mut self.final_gain);
        out.push(&mut self.final_bias);
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    /// Replaces every tensor by the equally named entry of `map`, requiring
    /// an exact name and shape match.
    pub(crate) fn load_from(
        &mut self,
        mut map: std::collections::HashMap<String, Tensor>,
    ) -> Result<(), ModelError> {
        for t in self.tensors_mut() {
            t.requires_grad = true;
        }
        let names: Vec<String> = self.named().iter().map(|(n, _)| n.clone()).collect();
        for (name, slot) in names.iter().zip(self.tensors_mut()) {
            let incoming = map.remove(name).ok_or_else(|| {
                ModelError::InvalidArgument(format!("checkpoint is missing tensor '{name}'"))
            })?;
            if incoming.shape() != slot.shape() {
                return Err(ModelError::ShapeMismatch {
                    what: "checkpoint tensor",
                    expected: slot.shape().to_vec(),
                    found: incoming.shape().to_vec(),
                });
            }
            slot.data_mut().copy_from_slice(incoming.data());
        }
        if let Some(extra) = map.keys().next() {
            return Err(ModelError::InvalidArgument(format!(
                "checkpoint holds unknown tensor '{extra}'"
            )));
        }
        Ok(())
    }
}

// ─── Forecast distribution ───────────────────────────────────────────────────

/// Per-step Gaussian mixtures over a `T × H` forecast grid, stored row-major
/// as `[T, H, K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDistribution {
    n_targets: usize,
    horizon: usize,
    n_mixture: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl ForecastDistribution {
    /// Builds a distribution, checking the mixture invariants: weights on
    /// each `(t, h)` cell form a simplex, scales are at least
    /// [`SCALE_FLOOR`], and everything is finite.
    pub fn new(
        n_targets: usize,
        horizon: usize,
        n_mixture: usize,
        weights: Vec<f64>,
        means: Vec<f64>,
        scales: Vec<f64>,
    ) -> Result<ForecastDistribution, ModelError> {
        let numel = n_targets * horizon * n_mixture;
        for (what, v) in [("weights", &weights), ("means", &means), ("scales", &scales)] {
            if v.len() != numel {
                return Err(ModelError::InvalidArgument(format!(
                    "{what} must hold {numel} values, got {}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::NonFinite {
                    what: format!("mixture {what}"),
                });
            }
        }
        for row in weights.chunks_exact(n_mixture) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(ModelError::InvalidArgument(format!(
                    "mixture weights must form a simplex, got {row:?}"
                )));
            }
        }
        if scales.iter().any(|&s| s < SCALE_FLOOR) {
            return Err(ModelError::InvalidArgument(format!(
                "mixture scales must be at least {SCALE_FLOOR}"
            )));
        }
        Ok(ForecastDistribution {
            n_targets,
            horizon,
            n_mixture,
            weights,
            means,
            scales,
        })
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_mixture(&self) -> usize {
        self.n_mixture
    }

    fn idx(&self, t: usize, h: usize, k: usize) -> usize {
        (t * self.horizon + h) * self.n_mixture + k
    }

    pub fn weight(&self, t: usize, h: usize, k: usize) -> f64 {
        self.weights[self.idx(t, h, k)]
    }

    pub fn mean(&self, t: usize, h: usize, k: usize) -> f64 {
        self.means[self.idx(t, h, k)]
    }

    pub fn scale(&self, t: usize, h: usize, k: usize) -> f64 {
        self.scales[self.idx(t, h, k)]
    }

    /// Expected value per forecast cell: `Σ_k w_k · μ_k`, shaped `[T, H]`.
    pub fn point_forecast(&self) -> Tensor {
        let mut out = Vec::with_capacity(self.n_targets * self.horizon);
        for cell in 0..self.n_targets * self.horizon {
            let base = cell * self.n_mixture;
            let mut acc = 0.0;
            for k in 0..self.n_mixture {
                acc += self.weights[base + k] * self.means[base + k];
            }
            out.push(acc);
        }
        Tensor::new(vec![self.n_targets, self.horizon], out)
            .expect("point forecast dimensions are consistent")
    }
}

/// Mean negative log-likelihood of `targets` (shape `[T, H]`) under the
/// forecast distribution, computed in log space with max subtraction.
pub fn gmm_nll(dist: &ForecastDistribution, targets: &Tensor) -> Result<f64, ModelError> {
    let expected = [dist.n_targets, dist.horizon];
    if targets.shape() != expected {
        return Err(ModelError::ShapeMismatch {
            what: "gmm_nll targets",
            expected: expected.to_vec(),
            found: targets.shape().to_vec(),
        });
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let k = dist.n_mixture;
    let mut total = 0.0;
    for (cell, &x) in targets.data().iter().enumerate() {
        if !x.is_finite() {
            return Err(ModelError::NonFinite {
                what: "gmm_nll targets".to_string(),
            });
        }
        let base = cell * k;
        let mut comps = Vec::with_capacity(k);
        for i in 0..k {
            let w = dist.weights[base + i];
            let mu = dist.means[base + i];
            let s = dist.scales[base + i];
            let z = (x - mu) / s;
            // log(w · N(x; μ, σ)); a zero weight contributes -inf, which the
            // max-subtracted logsumexp absorbs.
            let lw = if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
            comps.push(lw - s.ln() - 0.5 * ln_2pi - 0.5 * z * z);
        }
        let m = comps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = if m.is_finite() {
            m + comps.iter().map(|&c| (c - m).exp()).sum::<f64>().ln()
        } else {
            m
        };
        total -= lse;
    }
    Ok(total / (dist.n_targets * dist.horizon) as f64)
}

// ─── Forecaster ──────────────────────────────────────────────────────────────

/// Attention maps recorded during a traced forward pass, in application
/// order (temporal then channel attention, per block).
#[derive(Default)]
pub struct ForwardTrace {
    /// One `[batch, heads, S, S]` tensor per attention application.
    pub attentions: Vec<Tensor>,
}

pub(crate) struct AttnIds {
    wq: VarId,
    bq: VarId,
    wk: VarId,
    bk: VarId,
    wv: VarId,
    bv: VarId,
    wo: VarId,
    bo: VarId,
}

pub(crate) struct BlockIds {
    ln_t_gain: VarId,
    ln_t_bias: VarId,
    attn_t: AttnIds,
    ln_c_gain: VarId,
    ln_c_bias: VarId,
    attn_c: AttnIds,
    ln_f_gain: VarId,
    ln_f_bias: VarId,
    ff_w1: VarId,
    ff_b1: VarId,
    ff_w2: VarId,
    ff_b2: VarId,
}

pub(crate) struct ParamIds {
    patch_w: VarId,
    patch_b: VarId,
    sink: VarId,
    role_target: VarId,
    role_covariate: VarId,
    pos: VarId,
    blocks: Vec<BlockIds>,
    final_gain: VarId,
    final_bias: VarId,
    head_w: VarId,
    head_b: VarId,
}

impl ParamIds {
    /// Leaf ids in exactly the order of [`Parameters::named`].
    pub(crate) fn flat(&self) -> Vec<VarId> {
        let mut out = vec![
            self.patch_w,
            self.patch_b,
            self.sink,
            self.role_target,
            self.role_covariate,
            self.pos,
        ];
        for b in &self.blocks {
            out.extend([b.ln_t_gain, b.ln_t_bias]);
            out.extend([
                b.attn_t.wq,
                b.attn_t.bq,
                b.attn_t.wk,
                b.attn_t.bk,
                b.attn_t.wv,
                b.attn_t.bv,
                b.attn_t.wo,
                b.attn_t.bo,
            ]);
            out.extend([b.ln_c_gain, b.ln_c_bias]);
            out.extend([
                b.attn_c.wq,
                b.attn_c.bq,
                b.attn_c.wk,
                b.attn_c.bk,
                b.attn_c.wv,
                b.attn_c.bv,
                b.attn_c.wo,
                b.attn_c.bo,
            ]);
            out.extend([b.ln_f_gain, b.ln_f_bias]);
            out.extend([b.ff_w1, b.ff_b1, b.ff_w2, b.ff_b2]);
        }
        out.extend([
            self.final_gain,
            self.final_bias,
            self.head_w,
            self.head_b,
        ]);
        out
    }
}

/// Tape ids of the head outputs, all shaped `[T, H, K]`.
pub(crate) struct HeadIds {
    pub weights: VarId,
    pub log_weights: VarId,
    pub means: VarId,
    pub scales: VarId,
}

/// The forecaster model: configuration plus learnable parameters.
#[derive(Debug)]
pub struct Forecaster {
    config: ModelConfig,
    params: Parameters,
}

impl Forecaster {
    /// Validates the configuration and initializes parameters from its seed.
    pub fn new(config: ModelConfig) -> Result<Forecaster, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = Parameters::init(&config, &mut rng);
        Ok(Forecaster { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    /// Total learnable scalar count.
    pub fn n_parameters(&self) -> usize {
        self.params.named().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Records every parameter as a gradient-bearing leaf.
    pub(crate) fn leaf_params(&self, tape: &mut Tape) -> ParamIds {
        let p = &self.params;
        let attn = |tape: &mut Tape, a: &AttnParams| AttnIds {
            wq: tape.leaf(&a.wq),
            bq: tape.leaf(&a.bq),
            wk: tape.leaf(&a.wk),
            bk: tape.leaf(&a.bk),
            wv: tape.leaf(&a.wv),
            bv: tape.leaf(&a.bv),
            wo: tape.leaf(&a.wo),
            bo: tape.leaf(&a.bo),
        };
        ParamIds {
            patch_w: tape.leaf(&p.patch_w),
            patch_b: tape.leaf(&p.patch_b),
            sink: tape.leaf(&p.sink),
            role_target: tape.leaf(&p.role_target),
            role_covariate: tape.leaf(&p.role_covariate),
            pos: tape.leaf(&p.pos),
            blocks: p
                .blocks
                .iter()
                .map(|b| BlockIds {
                    ln_t_gain: tape.leaf(&b.ln_t_gain),
                    ln_t_bias: tape.leaf(&b.ln_t_bias),
                    attn_t: attn(tape, &b.attn_t),
                    ln_c_gain: tape.leaf(&b.ln_c_gain),
                    ln_c_bias: tape.leaf(&b.ln_c_bias),
                    attn_c: attn(tape, &b.attn_c),
                    ln_f_gain: tape.leaf(&b.ln_f_gain),
                    ln_f_bias: tape.leaf(&b.ln_f_bias),
                    ff_w1: tape.leaf(&b.ff_w1),
                    ff_b1: tape.leaf(&b.ff_b1),
                    ff_w2: tape.leaf(&b.ff_w2),
                    ff_b2: tape.leaf(&b.ff_b2),
                })
                .collect(),
            final_gain: tape.leaf(&p.final_gain),
            final_bias: tape.leaf(&p.final_bias),
            head_w: tape.leaf(&p.head_w),
            head_b: tape.leaf(&p.head_b),
        }
    }

    fn check_inputs(
        &self,
        targets_context: &Tensor,
        covariates: &Tensor,
    ) -> Result<(), ModelError> {
        let c = &self.config;
        let expect_t = [c.n_target_channels, c.context_steps];
        if targets_context.shape() != expect_t {
            return Err(ModelError::ShapeMismatch {
                what: "targets_context",
                expected: expect_t.to_vec(),
                found: targets_context.shape().to_vec(),
            });
        }
        let expect_c = [c.n_covariate_channels, c.context_steps + c.horizon_steps];
        if covariates.shape() != expect_c {
            return Err(ModelError::ShapeMismatch {
                what: "covariates",
                expected: expect_c.to_vec(),
                found: covariates.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Multi-head self-attention over axis 1 of a `[B, S, d]` input.
    fn mha(
        &self,
        tape: &mut Tape,
        x: VarId,
        w: &AttnIds,
        trace: Option<&mut ForwardTrace>,
    ) -> Result<VarId, TensorError> {
        let shape = tape.value(x).shape().to_vec();
        let (bsz, s, d) = (shape[0], shape[1], shape[2]);
        let heads = self.config.n_heads;
        let hd = d / heads;
        let q = tape.matmul(x, w.wq)?;
        let q = tape.add(q, w.bq)?;
        let k = tape.matmul(x, w.wk)?;
        let k = tape.add(k, w.bk)?;
        let v = tape.matmul(x, w.wv)?;
        let v = tape.add(v, w.bv)?;
        let qh = tape.reshape(q, vec![bsz, s, heads, hd])?;
        let qh = tape.transpose(qh, &[0, 2, 1, 3])?;
        let kh = tape.reshape(k, vec![bsz, s, heads, hd])?;
        let kt = tape.transpose(kh, &[0, 2, 3, 1])?;
        let vh = tape.reshape(v, vec![bsz, s, heads, hd])?;
        let vh = tape.transpose(vh, &[0, 2, 1, 3])?;
        let scores = tape.matmul(qh, kt)?;
        let scores = tape.mul_scalar(scores, 1.0 / (hd as f64).sqrt())?;
        let attn = tape.softmax_last_axis(scores)?;
        if let Some(tr) = trace {
            tr.attentions.push(tape.value(attn).clone());
        }
        let ctx = tape.matmul(attn, vh)?;
        let ctx = tape.transpose(ctx, &[0, 2, 1, 3])?;
        let ctx = tape.reshape(ctx, vec![bsz, s, d])?;
        let out = tape.matmul(ctx, w.wo)?;
        tape.add(out, w.bo)
    }

    /// Builds the full forward graph, returning the mixture head ids.
    pub(crate) fn build_head(
        &self,
        tape: &mut Tape,
        ids: &ParamIds,
        targets_context: &Tensor,
        covariates: &Tensor,
        mut trace: Option<&mut ForwardTrace>,
    ) -> Result<HeadIds, ModelError> {
        self.check_inputs(targets_context, covariates)?;
        let c = &self.config;
        let (t_ch, n_ch, d) = (c.n_target_channels, c.n_covariate_channels, c.d_model);
        let (tok, ctx_tok) = (c.n_tokens(), c.n_context_tokens());
        let hor_tok = tok - ctx_tok;
        let p = c.patch_size;

        // Patch-embed the known target context; unknown horizon patches
        // become copies of the sink embedding.
        let tgt = tape.leaf(targets_context);
        let tgt = tape.reshape(tgt, vec![t_ch, ctx_tok, p])?;
        let tgt = tape.matmul(tgt, ids.patch_w)?;
        let tgt = tape.add(tgt, ids.patch_b)?;
        let sink = tape.reshape(ids.sink, vec![1, 1, d])?;
        let sink_zeros = tape.zeros(vec![t_ch, hor_tok, d]);
        let sink_block = tape.add(sink_zeros, sink)?;
        let tgt_tokens = tape.concat(&[tgt, sink_block], 1)?;
        let role_t = tape.reshape(ids.role_target, vec![1, 1, d])?;
        let tgt_tokens = tape.add(tgt_tokens, role_t)?;

        // Patch-embed covariates over the full context + horizon span.
        let cov = tape.leaf(covariates);
        let cov = tape.reshape(cov, vec![n_ch, tok, p])?;
        let cov = tape.matmul(cov, ids.patch_w)?;
        let cov = tape.add(cov, ids.patch_b)?;
        let role_c = tape.reshape(ids.role_covariate, vec![1, 1, d])?;
        let cov_tokens = tape.add(cov, role_c)?;

        // [C, tok, d] with temporal positions shared across channels; the
        // role embeddings above are the only channel distinction.
        let x = tape.concat(&[tgt_tokens, cov_tokens], 0)?;
        let pos = tape.reshape(ids.pos, vec![1, tok, d])?;
        let mut x = tape.add(x, pos)?;

        for b in &ids.blocks {
            // Attention across time patches, within each channel.
            let h = tape.layernorm(x, b.ln_t_gain, b.ln_t_bias, LN_EPS)?;
            let a = self.mha(tape, h, &b.attn_t, trace.as_deref_mut())?;
            x = tape.add(x, a)?;
            // Attention across channels, within each time patch.
            let xt = tape.transpose(x, &[1, 0, 2])?;
            let h = tape.layernorm(xt, b.ln_c_gain, b.ln_c_bias, LN_EPS)?;
            let a = self.mha(tape, h, &b.attn_c, trace.as_deref_mut())?;
            let xt = tape.add(xt, a)?;
            x = tape.transpose(xt, &[1, 0, 2])?;
            // Position-wise feed-forward.
            let h = tape.layernorm(x, b.ln_f_gain, b.ln_f_bias, LN_EPS)?;
            let f = tape.matmul(h, b.ff_w1)?;
            let f = tape.add(f, b.ff_b1)?;
            let f = tape.gelu(f)?;
            let f = tape.matmul(f, b.ff_w2)?;
            let f = tape.add(f, b.ff_b2)?;
            x = tape.add(x, f)?;
        }
        let x = tape.layernorm(x, ids.final_gain, ids.final_bias, LN_EPS)?;

        // Head: target channels' horizon tokens → P per-step mixtures each.
        let tgt_x = tape.slice(x, 0, 0, t_ch)?;
        let hor_x = tape.slice(tgt_x, 1, ctx_tok, hor_tok)?;
        let raw = tape.matmul(hor_x, ids.head_w)?;
        let raw = tape.add(raw, ids.head_b)?;
        let k = c.n_mixture;
        let raw = tape.reshape(raw, vec![t_ch, c.horizon_steps, 3 * k])?;
        let logits = tape.slice(raw, 2, 0, k)?;
        let means = tape.slice(raw, 2, k, k)?;
        let raw_scale = tape.slice(raw, 2, 2 * k, k)?;
        let weights = tape.softmax_last_axis(logits)?;
        let lse = tape.logsumexp_last_axis(logits)?;
        let lse = tape.reshape(lse, vec![t_ch, c.horizon_steps, 1])?;
        let log_weights = tape.sub(logits, lse)?;
        let exp_scale = tape.exp(raw_scale)?;
        let scales = tape.clamp_min(exp_scale, SCALE_FLOOR)?;
        Ok(HeadIds {
            weights,
            log_weights,
            means,
            scales,
        })
    }

    /// Mean mixture NLL of `[T, H]` horizon targets, built on the tape.
    pub(crate) fn nll_on_tape(
        &self,
        tape: &mut Tape,
        head: &HeadIds,
        targets_horizon: VarId,
    ) -> Result<VarId, ModelError> {
        let c = &self.config;
        let expect = [c.n_target_channels, c.horizon_steps];
        if tape.value(targets_horizon).shape() != expect {
            return Err(ModelError::ShapeMismatch {
                what: "targets_horizon",
                expected: expect.to_vec(),
                found: tape.value(targets_horizon).shape().to_vec(),
            });
        }
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let tb = tape.reshape(targets_horizon, vec![c.n_target_channels, c.horizon_steps, 1])?;
        let diff = tape.sub(tb, head.means)?;
        let z = tape.div(diff, head.scales)?;
        let z2 = tape.mul(z, z)?;
        let half_z2 = tape.mul_scalar(z2, 0.5)?;
        let log_scales = tape.log(head.scales)?;
        let a = tape.sub(head.log_weights, log_scales)?;
        let b = tape.sub(a, half_z2)?;
        let comp = tape.add_scalar(b, -0.5 * ln_2pi)?;
        let lse = tape.logsumexp_last_axis(comp)?;
        let mean = tape.mean_all(lse)?;
        Ok(tape.mul_scalar(mean, -1.0)?)
    }

    fn dist_from_head(&self, tape: &Tape, head: &HeadIds) -> Result<ForecastDistribution, ModelError> {
        let c = &self.config;
        ForecastDistribution::new(
            c.n_target_channels,
            c.horizon_steps,
            c.n_mixture,
            tape.value(head.weights).data().to_vec(),
            tape.value(head.means).data().to_vec(),
            tape.value(head.scales).data().to_vec(),
        )
    }

    /// Forward pass: context targets `[T, L]` and covariates `[N, L+H]` to a
    /// forecast distribution over the horizon.  Deterministic for fixed
    /// parameters and inputs.
    pub fn forward(
        &self,
        targets_context: &Tensor,
        covariates: &Tensor,
    ) -> Result<ForecastDistribution, ModelError> {
        let mut tape = Tape::new();
        let ids = self.leaf_params(&mut tape);
        let head = self.build_head(&mut tape, &ids, targets_context, covariates, None)?;
        self.dist_from_head(&tape, &head)
    }

    /// Forward pass that also returns the attention maps.
    pub fn forward_traced(
        &self,
        targets_context: &Tensor,
        covariates: &Tensor,
    ) -> Result<(ForecastDistribution, ForwardTrace), ModelError> {
        let mut tape = Tape::new();
        let ids = self.leaf_params(&mut tape);
        let mut trace = ForwardTrace::default();
        let head = self.build_head(&mut tape, &ids, targets_context, covariates, Some(&mut trace))?;
        Ok((self.dist_from_head(&tape, &head)?, trace))
    }

    /// NLL of a complete episode through the differentiable path (the exact
    /// quantity training minimizes), without updating anything.
    pub fn episode_nll(
        &self,
        targets_context: &Tensor,
        covariates: &Tensor,
        targets_horizon: &Tensor,
    ) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let ids = self.leaf_params(&mut tape);
        let head = self.build_head(&mut tape, &ids, targets_context, covariates, None)?;
        let tgt = tape.leaf(targets_horizon);
        let loss = self.nll_on_tape(&mut tape, &head, tgt)?;
        Ok(tape.value(loss).at(0))
    }

    /// Episode NLL together with its gradient for every parameter, ordered
    /// as [`Parameters::named`].
    pub fn episode_grads(
        &self,
        targets_context: &Tensor,
        covariates: &Tensor,
        targets_horizon: &Tensor,
    ) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
        let mut tape = Tape::new();
        let ids = self.leaf_params(&mut tape);
        let head = self.build_head(&mut tape, &ids, targets_context, covariates, None)?;
        let tgt = tape.leaf(targets_horizon);
        let loss = self.nll_on_tape(&mut tape, &head, tgt)?;
        let loss_val = tape.value(loss).at(0);
        tape.backward(loss)?;
        let grads = ids
            .flat()
            .iter()
            .map(|id| {
                tape.grad(*id)
                    .expect("every parameter leaf receives a gradient")
                    .to_vec()
            })
            .collect();
        Ok((loss_val, grads))
    }
}

// ─── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Small geometry used throughout the unit tests.
    pub(crate) fn tiny_config() -> ModelConfig {
        ModelConfig {
            n_covariate_channels: 3,
            n_target_channels: 2,
            context_steps: 8,
            horizon_steps: 4,
            patch_size: 2,
            d_model: 16,
            n_heads: 2,
            n_blocks: 1,
            n_mixture: 2,
            seed: 7,
        }
    }

    pub(crate) fn random_inputs(config: &ModelConfig, seed: u64) -> (Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tc: Vec<f64> = (0..config.n_target_channels * config.context_steps)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let cov: Vec<f64> = (0..config.n_covariate_channels
            * (config.context_steps + config.horizon_steps))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        (
            Tensor::new(
                vec![config.n_target_channels, config.context_steps],
                tc,
            )
            .unwrap(),
            Tensor::new(
                vec![
                    config.n_covariate_channels,
                    config.context_steps + config.horizon_steps,
                ],
                cov,
            )
            .unwrap(),
        )
    }

    #[test]
    fn config_validation_catches_bad_geometry() {
        assert!(ModelConfig::default().validate().is_ok());
        let mut c = tiny_config();
        c.n_covariate_channels = MAX_VARIATES - c.n_target_channels + 1;
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.context_steps = 7; // not a multiple of patch_size 2
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.horizon_steps = 3;
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.n_heads = 3; // does not divide d_model 16
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.n_mixture = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_config_matches_prompt_geometry() {
        let c = ModelConfig::default();
        assert_eq!(c.context_steps, 3968);
        assert_eq!(c.n_channels(), 64);
        assert_eq!(c.n_tokens(), 504);
        assert_eq!(c.n_context_tokens(), 496);
    }

    #[test]
    fn forward_produces_valid_mixture() {
        let model = Forecaster::new(tiny_config()).unwrap();
        let (tc, cov) = random_inputs(model.config(), 1);
        let dist = model.forward(&tc, &cov).unwrap();
        assert_eq!(dist.n_targets(), 2);
        assert_eq!(dist.horizon(), 4);
        assert_eq!(dist.n_mixture(), 2);
        for t in 0..2 {
            for h in 0..4 {
                let wsum: f64 = (0..2).map(|k| dist.weight(t, h, k)).sum();
                assert!((wsum - 1.0).abs() < 1e-12);
                for k in 0..2 {
                    assert!(dist.scale(t, h, k) >= SCALE_FLOOR);
                    assert!(dist.mean(t, h, k).is_finite());
                }
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let model = Forecaster::new(tiny_config()).unwrap();
        let (tc, cov) = random_inputs(model.config(), 2);
        let a = model.forward(&tc, &cov).unwrap();
        let b = model.forward(&tc, &cov).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Forecaster::new(tiny_config()).unwrap();
        let b = Forecaster::new(tiny_config()).unwrap();
        for ((na, ta), (nb, tb)) in a.params().named().iter().zip(b.params().named().iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.data(), tb.data());
        }
        let mut other = tiny_config();
        other.seed = 8;
        let c = Forecaster::new(other).unwrap();
        assert_ne!(
            a.params().named()[0].1.data(),
            c.params().named()[0].1.data()
        );
    }

    #[test]
    fn forward_rejects_wrong_shapes() {
        let model = Forecaster::new(tiny_config()).unwrap();
        let (tc, cov) = random_inputs(model.config(), 3);
        let bad_tc = Tensor::zeros(vec![2, 10]);
        assert!(matches!(
            model.forward(&bad_tc, &cov).unwrap_err(),
            ModelError::ShapeMismatch { what: "targets_context", .. }
        ));
        let bad_cov = Tensor::zeros(vec![4, 12]);
        assert!(matches!(
            model.forward(&tc, &bad_cov).unwrap_err(),
            ModelError::ShapeMismatch { what: "covariates", .. }
        ));
    }

    #[test]
    fn covariate_channel_permutation_leaves_distribution_unchanged() {
        let model = Forecaster::new(tiny_config()).unwrap();
        let (tc, cov) = random_inputs(model.config(), 4);
        let base = model.forward(&tc, &cov).unwrap();
        let steps = model.config().context_steps + model.config().horizon_steps;
        // Rotate the three covariate channels: 0,1,2 → 2,0,1.
        let mut rotated = Vec::with_capacity(cov.numel());
        for c in [2usize, 0, 1] {
            rotated.extend_from_slice(&cov.data()[c * steps..(c + 1) * steps]);
        }
        let cov_rot = Tensor::new(vec![3, steps], rotated).unwrap();
        let perm = model.forward(&tc, &cov_rot).unwrap();
        for t in 0..2 {
            for h in 0..4 {
                for k in 0..2 {
                    assert!((base.weight(t, h, k) - perm.weight(t, h, k)).abs() < 1e-9);
                    assert!((base.mean(t, h, k) - perm.mean(t, h, k)).abs() < 1e-9);
                    assert!((base.scale(t, h, k) - perm.scale(t, h, k)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn traced_attention_rows_sum_to_one() {
        let model = Forecaster::new(tiny_config()).unwrap();
        let (tc, cov) = random_inputs(model.config(), 5);
        let (_, trace) = model.forward_traced(&tc, &cov).unwrap();
        // One temporal and one channel attention for the single block.
        assert_eq!(trace.attentions.len(), 2);
        for attn in &trace.attentions {
            let s = *attn.shape().last().unwrap();
            for row in attn.data().chunks_exact(s) {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn param_order_is_consistent_between_named_and_leafed() {
        let model = Forecaster::new(tiny_config()).unwrap();
        let mut tape = Tape::new();
        let ids = model.leaf_params(&mut tape);
        let flat = ids.flat();
        let named = model.params().named();
        assert_eq!(flat.len(), named.len());
        for (id, (name, t)) in flat.iter().zip(&named) {
            assert_eq!(
                tape.value(*id).shape(),
                t.shape(),
                "order drift at '{name}'"
            );
            assert_eq!(tape.value(*id).data(), t.data(), "data drift at '{name}'");
        }
    }

    #[test]
    fn gmm_nll_of_standard_normal_cell_is_half_log_2pi() {
        // K=1, w=1, μ=0, σ=1, x=0: NLL = ½·ln(2π) exactly, per cell.
        let dist = ForecastDistribution::new(
            1,
            2,
            1,
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let targets = Tensor::zeros(vec![1, 2]);
        let nll = gmm_nll(&dist, &targets).unwrap();
        let want = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((nll - want).abs() < 1e-14);
    }

    #[test]
    fn gmm_nll_with_identical_components_collapses() {
        // Two equal components behave exactly like one.
        let one = ForecastDistribution::new(1, 1, 1, vec![1.0], vec![0.3], vec![0.7]).unwrap();
        let two = ForecastDistribution::new(
            1,
            1,
            2,
            vec![0.5, 0.5],
            vec![0.3, 0.3],
            vec![0.7, 0.7],
        )
        .unwrap();
        let x = Tensor::new(vec![1, 1], vec![-0.4]).unwrap();
        let a = gmm_nll(&one, &x).unwrap();
        let b = gmm_nll(&two, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gmm_nll_matches_naive_density_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let (t, h, k) = (2, 3, 3);
            let mut weights = Vec::new();
            let mut means = Vec::new();
            let mut scales = Vec::new();
            for _ in 0..t * h {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                weights.extend(raw.iter().map(|w| w / sum));
                means.extend((0..k).map(|_| rng.random_range(-2.0..2.0)));
                scales.extend((0..k).map(|_| rng.random_range(0.2..2.0)));
            }
            let dist = ForecastDistribution::new(t, h, k, weights, means, scales).unwrap();
            let data: Vec<f64> = (0..t * h).map(|_| rng.random_range(-2.0..2.0)).collect();
            let targets = Tensor::new(vec![t, h], data.clone()).unwrap();
            // Naive density: sum the component pdfs, then take the log.
            let mut total = 0.0;
            for (cell, &x) in data.iter().enumerate() {
                let mut density = 0.0;
                for i in 0..k {
                    let (w, mu, s) = (
                        dist.weight(cell / h, cell % h, i),
                        dist.mean(cell / h, cell % h, i),
                        dist.scale(cell / h, cell % h, i),
                    );
                    let z = (x - mu) / s;
                    density += w * (-0.5 * z * z).exp()
                        / (s * (2.0 * std::f64::consts::PI).sqrt());
                }
                total -= density.ln();
            }
            let naive = total / (t * h) as f64;
            let fast = gmm_nll(&dist, &targets).unwrap();
            assert!((fast - naive).abs() < 1e-10, "{fast} vs {naive}");
        }
    }

    #[test]
    fn episode_nll_equals_gmm_nll_of_forward() {
        let model = Forecaster::new(tiny_config()).unwrap();
        let (tc, cov) = random_inputs(model.config(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let targets = Tensor::new(
            vec![2, 4],
            (0..8).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let via_tape = model.episode_nll(&tc, &cov, &targets).unwrap();
        let dist = model.forward(&tc, &cov).unwrap();
        let direct = gmm_nll(&dist, &targets).unwrap();
        assert!((via_tape - direct).abs() < 1e-12);
    }

    #[test]
    fn point_forecast_known_cases() {
        // K=1: the forecast is the mean itself.
        let d = ForecastDistribution::new(1, 1, 1, vec![1.0], vec![0.8], vec![1.0]).unwrap();
        assert_eq!(d.point_forecast().data(), &[0.8]);
        // Equal weights average the means.
        let d = ForecastDistribution::new(
            1,
            1,
            2,
            vec![0.5, 0.5],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert_eq!(d.point_forecast().data(), &[0.5]);
    }

    #[test]
    fn point_forecast_matches_monte_carlo_mean() {
        let d = ForecastDistribution::new(
            1,
            1,
            2,
            vec![0.3, 0.7],
            vec![-0.5, 1.0],
            vec![0.3, 0.4],
        )
        .unwrap();
        let want = d.point_forecast().at(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 1_000_000usize;
        let mut acc = 0.0;
        for _ in 0..n {
            let u: f64 = rng.random_range(0.0..1.0);
            let (mu, s) = if u < 0.3 { (-0.5, 0.3) } else { (1.0, 0.4) };
            let draw: f64 = Normal::new(mu, s).unwrap().sample(&mut rng);
            acc += draw;
        }
        let mc = acc / n as f64;
        assert!((mc - want).abs() < 5e-3, "monte carlo {mc} vs {want}");
    }

    #[test]
    fn distribution_constructor_rejects_invalid_mixtures() {
        // Weights off the simplex.
        assert!(ForecastDistribution::new(1, 1, 2, vec![0.6, 0.6], vec![0.0; 2], vec![1.0; 2])
            .is_err());
        // Scale below the floor.
        assert!(
            ForecastDistribution::new(1, 1, 1, vec![1.0], vec![0.0], vec![1e-6]).is_err()
        );
        // Non-finite mean.
        assert!(
            ForecastDistribution::new(1, 1, 1, vec![1.0], vec![f64::NAN], vec![1.0]).is_err()
        );
    }
}
