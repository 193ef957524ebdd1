//! Gradient training of the forecaster on streamed episodes.
//!
//! Each step builds a fresh tape over one episode, runs the mixture-NLL loss
//! backward, clips the global gradient norm, and applies an Adam update with
//! a linearly decaying step size.  The episode source is a closure so
//! callers can stream freshly sampled prompts without materializing a
//! dataset of them.

use super::{Forecaster, ModelError};
use crate::tape::Tape;
use crate::tensor::Tensor;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// How far the linearly decaying step size falls by the final step.
const DECAY_FLOOR: f64 = 0.1;

// ─── Inputs ──────────────────────────────────────────────────────────────────

/// One training example: context targets `[T, L]`, covariates `[N, L+H]`,
/// and the horizon targets `[T, H]` the model must explain.
pub struct Episode {
    pub targets_context: Tensor,
    pub covariates: Tensor,
    pub targets_horizon: Tensor,
}

/// Knobs of the training loop.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Number of update steps (one episode each).
    pub steps: usize,
    /// Initial Adam step size; decays linearly to a tenth of itself.
    pub step_size: f64,
    /// Global gradient-norm ceiling applied before each update.
    pub clip_norm: f64,
}

impl Default for TrainOptions {
    fn default() -> TrainOptions {
        TrainOptions {
            steps: 200,
            step_size: 3e-3,
            clip_norm: 1.0,
        }
    }
}

impl TrainOptions {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(ModelError::InvalidArgument(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(ModelError::InvalidArgument(format!(
                "clip_norm must be positive, got {}",
                self.clip_norm
            )));
        }
        Ok(())
    }
}

/// Per-step record of a completed training run.
#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    /// Loss of each step's episode, evaluated before its update.
    pub losses: Vec<f64>,
}

// ─── Gradient clipping ───────────────────────────────────────────────────────

/// Scales all gradients down so their joint Euclidean norm is at most
/// `max_norm`; returns the norm before clipping.
pub(crate) fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let sq: f64 = grads
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    norm
}

// ─── Training loop ───────────────────────────────────────────────────────────

/// Trains `model` in place for `opts.steps` steps, pulling episode `i` from
/// `next_episode(i)`.  Aborts with a [`ModelError::NonFinite`] naming the
/// step if the loss ever leaves the finite range.
pub fn train<F>(
    model: &mut Forecaster,
    opts: &TrainOptions,
    mut next_episode: F,
) -> Result<TrainTrace, ModelError>
where
    F: FnMut(usize) -> Result<Episode, ModelError>,
{
    opts.validate()?;
    let n_tensors = model.params().named().len();
    let mut m: Vec<Vec<f64>> = Vec::with_capacity(n_tensors);
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(n_tensors);
    for (_, t) in model.params().named() {
        m.push(vec![0.0; t.numel()]);
        v.push(vec![0.0; t.numel()]);
    }
    let mut trace = TrainTrace::default();

    for step in 0..opts.steps {
        let ep = next_episode(step)?;
        let mut tape = Tape::new();
        let ids = model.leaf_params(&mut tape);
        let head = model.build_head(&mut tape, &ids, &ep.targets_context, &ep.covariates, None)?;
        let tgt = tape.leaf(&ep.targets_horizon);
        let loss = model.nll_on_tape(&mut tape, &head, tgt)?;
        let loss_val = tape.value(loss).at(0);
        if !loss_val.is_finite() {
            return Err(ModelError::NonFinite {
                what: format!("training loss at step {step}"),
            });
        }
        tape.backward(loss)?;

        let flat = ids.flat();
        let mut grads: Vec<Vec<f64>> = flat
            .iter()
            .map(|id| {
                tape.grad(*id)
                    .expect("every parameter leaf receives a gradient")
                    .to_vec()
            })
            .collect();
        clip_global_norm(&mut grads, opts.clip_norm);

        // Adam with bias correction and a linear step-size decay from
        // step_size down to DECAY_FLOOR · step_size across the run.
        let progress = step as f64 / opts.steps as f64;
        let lr = opts.step_size * (1.0 - (1.0 - DECAY_FLOOR) * progress);
        let t = (step + 1) as f64;
        let bc1 = 1.0 - ADAM_BETA1.powf(t);
        let bc2 = 1.0 - ADAM_BETA2.powf(t);
        for (i, slot) in model.params_mut().tensors_mut().into_iter().enumerate() {
            let g = &grads[i];
            let (ms, vs) = (&mut m[i], &mut v[i]);
            let data = slot.data_mut();
            for j in 0..g.len() {
                ms[j] = ADAM_BETA1 * ms[j] + (1.0 - ADAM_BETA1) * g[j];
                vs[j] = ADAM_BETA2 * vs[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                let m_hat = ms[j] / bc1;
                let v_hat = vs[j] / bc2;
                data[j] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        trace.losses.push(loss_val);
    }
    Ok(trace)
}

// ─── Tests ───────────────────────────────────────────────────────────────────
