//! Few-shot prompt construction and in-context classification.
//!
//! A prompt concatenates `S` labeled examples along the time axis: each
//! example contributes its spectral covariate matrix plus a one-hot block in
//! the target channels (one channel per fault class, held at 1 for the
//! example's class over its whole span).  The unlabeled query's covariates
//! fill the forecast horizon, so the model's continuation of the target
//! channels over the horizon is its class belief.  The call is classified
//! winner-takes-all from the point forecast at the final horizon step.

use crate::dsp::CovariateMatrix;
use crate::model::{Episode, Forecaster, ForecastDistribution, ModelConfig, ModelError};
use crate::synth::{splitmix64, FaultClass, N_CLASSES};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use std::fmt;

/// Smallest draw a [`ContextSampler`] accepts: one example per class plus the
/// held-out query.
pub const MIN_DRAW: usize = N_CLASSES + 1;

// ─── Errors ──────────────────────────────────────────────────────────────────

/// Failure modes of prompt assembly and context sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum PromptError {
    /// The context holds no samples.
    EmptyContext,
    /// Context samples × steps does not cover the model's context span.
    LengthMismatch {
        n_samples: usize,
        steps_each: usize,
        expected: usize,
    },
    /// A sample's channel count differs from the model's covariate channels.
    ChannelMismatch {
        sample: usize,
        found: usize,
        expected: usize,
    },
    /// Context samples disagree on their step count.
    RaggedSteps {
        sample: usize,
        found: usize,
        expected: usize,
    },
    /// The query's step count differs from the model's horizon.
    HorizonMismatch { found: usize, expected: usize },
    /// The model's target channels cannot hold one channel per class.
    TargetChannels { found: usize },
    /// A context draw requests fewer samples than every class plus a query.
    DrawTooSmall { requested: usize },
    /// A class has too few pool samples for the requested context.
    InsufficientPool {
        class: FaultClass,
        needed: usize,
        available: usize,
    },
    Model(ModelError),
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptError::EmptyContext => write!(f, "context holds no samples"),
            PromptError::LengthMismatch {
                n_samples,
                steps_each,
                expected,
            } => write!(
                f,
                "context covers {n_samples} samples x {steps_each} steps = {} steps, \
                 model expects {expected}",
                n_samples * steps_each
            ),
            PromptError::ChannelMismatch {
                sample,
                found,
                expected,
            } => write!(
                f,
                "context sample {sample} has {found} channels, model expects {expected}"
            ),
            PromptError::RaggedSteps {
                sample,
                found,
                expected,
            } => write!(
                f,
                "context sample {sample} spans {found} steps, others span {expected}"
            ),
            PromptError::HorizonMismatch { found, expected } => write!(
                f,
                "query spans {found} steps, model horizon is {expected}"
            ),
            PromptError::TargetChannels { found } => write!(
                f,
                "model has {found} target channels, one-hot labels need {N_CLASSES}"
            ),
            PromptError::DrawTooSmall { requested } => write!(
                f,
                "a context draw needs at least {MIN_DRAW} samples \
                 (one per class plus a query), requested {requested}"
            ),
            PromptError::InsufficientPool {
                class,
                needed,
                available,
            } => write!(
                f,
                "class {class} has only {available} pool samples, context needs {needed}"
            ),
            PromptError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PromptError {}

impl From<ModelError> for PromptError {
    fn from(e: ModelError) -> PromptError {
        PromptError::Model(e)
    }
}

/// Lets prompt-building failures flow out of a training episode source.
impl From<PromptError> for ModelError {
    fn from(e: PromptError) -> ModelError {
        match e {
            PromptError::Model(m) => m,
            other => ModelError::InvalidArgument(other.to_string()),
        }
    }
}

// ─── Prompt assembly ─────────────────────────────────────────────────────────

/// One labeled example available for prompting.
#[derive(Debug, Clone)]
pub struct PromptSample {
    pub covariates: CovariateMatrix,
    pub class: FaultClass,
}

/// Model inputs assembled from a context and a query.
#[derive(Debug, Clone)]
pub struct Prompt {
    /// One-hot class channels over the context, `[N_CLASSES, L]`.
    pub targets_context: Tensor,
    /// Context covariates with the query's appended, `[N, L+H]`.
    pub covariates: Tensor,
}

/// One-hot target block for a class: `[N_CLASSES, steps]` with the class row
/// at 1 and every other row at 0.
pub fn one_hot_block(class: FaultClass, steps: usize) -> Tensor {
    let mut data = vec![0.0; N_CLASSES * steps];
    for s in 0..steps {
        data[class.index() * steps + s] = 1.0;
    }
    Tensor::new(vec![N_CLASSES, steps], data).expect("one-hot dimensions are consistent")
}

/// Assembles model inputs from `context` examples and the `query`'s
/// covariates, validating every dimension against `config`.
pub fn build_prompt(
    context: &[PromptSample],
    query: &CovariateMatrix,
    config: &ModelConfig,
) -> Result<Prompt, PromptError> {
    if context.is_empty() {
        return Err(PromptError::EmptyContext);
    }
    if config.n_target_channels != N_CLASSES {
        return Err(PromptError::TargetChannels {
            found: config.n_target_channels,
        });
    }
    let n = config.n_covariate_channels;
    let steps_each = context[0].covariates.n_steps();
    for (i, sample) in context.iter().enumerate() {
        if sample.covariates.n_channels() != n {
            return Err(PromptError::ChannelMismatch {
                sample: i,
                found: sample.covariates.n_channels(),
                expected: n,
            });
        }
        if sample.covariates.n_steps() != steps_each {
            return Err(PromptError::RaggedSteps {
                sample: i,
                found: sample.covariates.n_steps(),
                expected: steps_each,
            });
        }
    }
    let l = config.context_steps;
    if context.len() * steps_each != l {
        return Err(PromptError::LengthMismatch {
            n_samples: context.len(),
            steps_each,
            expected: l,
        });
    }
    if query.n_channels() != n {
        return Err(PromptError::ChannelMismatch {
            sample: context.len(),
            found: query.n_channels(),
            expected: n,
        });
    }
    let h = config.horizon_steps;
    if query.n_steps() != h {
        return Err(PromptError::HorizonMismatch {
            found: query.n_steps(),
            expected: h,
        });
    }

    // Target channels: one-hot blocks laid out sample after sample.
    let mut targets = vec![0.0; N_CLASSES * l];
    for (i, sample) in context.iter().enumerate() {
        let row = sample.class.index();
        let start = i * steps_each;
        for s in 0..steps_each {
            targets[row * l + start + s] = 1.0;
        }
    }

    // Covariate channels: per channel, every context sample then the query.
    let mut cov = Vec::with_capacity(n * (l + h));
    for ch in 0..n {
        for sample in context {
            cov.extend_from_slice(sample.covariates.row(ch));
        }
        cov.extend_from_slice(query.row(ch));
    }

    Ok(Prompt {
        targets_context: Tensor::new(vec![N_CLASSES, l], targets)
            .expect("target dimensions are consistent"),
        covariates: Tensor::new(vec![n, l + h], cov)
            .expect("covariate dimensions are consistent"),
    })
}

/// Builds a training episode: the prompt for a labeled query plus the
/// one-hot horizon block the model should forecast.
pub fn build_episode(
    context: &[PromptSample],
    query: &PromptSample,
    config: &ModelConfig,
) -> Result<Episode, PromptError> {
    let prompt = build_prompt(context, &query.covariates, config)?;
    Ok(Episode {
        targets_context: prompt.targets_context,
        covariates: prompt.covariates,
        targets_horizon: one_hot_block(query.class, config.horizon_steps),
    })
}

/// Adds zero-mean Gaussian noise to an episode's horizon block, for training
/// only.  Exact 0/1 horizon targets let the mixture likelihood grow without
/// bound as scales shrink onto the two indicator values — a descent direction
/// that never consults the context — and gradient descent rides that slope
/// into a context-blind forecast.  Noise of width `sigma` caps the attainable
/// density at `1/(√(2π)·sigma)`, so conditioning on the context becomes the
/// only remaining way down.  Inference-time prompts keep exact one-hots.
///
/// The noise stream is derived from `seed` and `round`, so episodes are
/// reproducible independently of call order.  A `sigma` of zero is a no-op.
pub fn jitter_targets(horizon: &mut Tensor, sigma: f64, seed: u64, round: u64) {
    if sigma == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(round)));
    let noise = rand_distr::Normal::new(0.0, sigma).expect("sigma is finite and positive");
    for v in horizon.data_mut() {
        *v += noise.sample(&mut rng);
    }
}

// ─── Classification ──────────────────────────────────────────────────────────

/// Index of the strictly greatest score; ties keep the lowest index.
pub fn argmax_strict(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Max-subtracted softmax of a score vector.
pub(crate) fn stable_softmax(scores: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_CLASSES];
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - m).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    out
}

/// Winner-takes-all verdict for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub predicted: FaultClass,
    /// Point forecast of every class channel across the horizon,
    /// `[N_CLASSES, H]`.
    pub intensities: Tensor,
    /// Intensity of each class channel at the final horizon step.
    pub final_intensities: [f64; N_CLASSES],
    /// Softmax of the final intensities, as a belief summary.
    pub probabilities: [f64; N_CLASSES],
    /// The full mixture forecast the intensities were read from.
    pub distribution: ForecastDistribution,
}

/// Classifies a query against a labeled context: forecasts the target
/// channels over the horizon and takes the strongest class channel at the
/// final step, breaking ties toward the lowest class index.
pub fn classify(
    model: &Forecaster,
    context: &[PromptSample],
    query: &CovariateMatrix,
) -> Result<Classification, PromptError> {
    let prompt = build_prompt(context, query, model.config())?;
    let dist = model.forward(&prompt.targets_context, &prompt.covariates)?;
    let intensities = dist.point_forecast();
    let h = model.config().horizon_steps;
    let mut final_intensities = [0.0; N_CLASSES];
    for (c, slot) in final_intensities.iter_mut().enumerate() {
        *slot = intensities.at(c * h + (h - 1));
    }
    let predicted = FaultClass::from_index(argmax_strict(&final_intensities))
        .expect("argmax over N_CLASSES intensities is a valid class index");
    Ok(Classification {
        predicted,
        intensities,
        final_intensities,
        probabilities: stable_softmax(&final_intensities),
        distribution: dist,
    })
}

// ─── Context sampling ────────────────────────────────────────────────────────

/// A drawn evaluation round: a balanced labeled context plus one query whose
/// label is held out as the ground truth.
#[derive(Debug, Clone)]
pub struct SampledContext {
    pub context: Vec<PromptSample>,
    pub query: PromptSample,
}

impl SampledContext {
    /// Class of the final context example (useful for spotting a model that
    /// merely copies the nearest label).
    pub fn last_context_class(&self) -> FaultClass {
        self.context
            .last()
            .expect("sampled contexts are never empty")
            .class
    }
}

/// Draws class-balanced contexts and queries from a labeled pool, without
/// replacement within a draw.  Draw `i` depends only on (`seed`, `i`), so
/// evaluation rounds are reproducible and independent of iteration order.
pub struct ContextSampler<'a> {
    pool: &'a [PromptSample],
    by_class: [Vec<usize>; N_CLASSES],
    seed: u64,
}

impl<'a> ContextSampler<'a> {
    pub fn new(pool: &'a [PromptSample], seed: u64) -> ContextSampler<'a> {
        let mut by_class: [Vec<usize>; N_CLASSES] = Default::default();
        for (i, sample) in pool.iter().enumerate() {
            by_class[sample.class.index()].push(i);
        }
        ContextSampler {
            pool,
            by_class,
            seed,
        }
    }

    /// Seed driving round `index`, exposed so run logs can record it.
    pub fn round_seed(&self, index: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(index))
    }

    /// Chooses `count` distinct entries of `indices` by partial
    /// Fisher-Yates on a scratch copy.
    fn choose(rng: &mut ChaCha8Rng, indices: &[usize], count: usize) -> Vec<usize> {
        let mut scratch = indices.to_vec();
        for i in 0..count {
            let j = rng.random_range(i..scratch.len());
            scratch.swap(i, j);
        }
        scratch.truncate(count);
        scratch
    }

    /// Draws round `index`: `samples_per_context` examples whose class counts
    /// differ by at most one, chosen uniformly without replacement within
    /// each class and then shuffled.  The final example of the shuffle is
    /// held out as the query — so its label is near-uniform over rounds —
    /// and the rest form the labeled context.
    pub fn draw(
        &self,
        index: u64,
        samples_per_context: usize,
    ) -> Result<SampledContext, PromptError> {
        if samples_per_context < MIN_DRAW {
            return Err(PromptError::DrawTooSmall {
                requested: samples_per_context,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.round_seed(index));

        // Quotas differ by at most one; the classes carrying the remainder
        // are redrawn each round so none is systematically favored.
        let base = samples_per_context / N_CLASSES;
        let rem = samples_per_context % N_CLASSES;
        let classes: Vec<usize> = (0..N_CLASSES).collect();
        let mut quota = [base; N_CLASSES];
        for c in Self::choose(&mut rng, &classes, rem) {
            quota[c] += 1;
        }

        let mut picked: Vec<usize> = Vec::with_capacity(samples_per_context);
        for c in 0..N_CLASSES {
            let available = self.by_class[c].len();
            if quota[c] > available {
                return Err(PromptError::InsufficientPool {
                    class: FaultClass::from_index(c).expect("class index in range"),
                    needed: quota[c],
                    available,
                });
            }
            picked.extend(Self::choose(&mut rng, &self.by_class[c], quota[c]));
        }

        // Shuffle so classes are interleaved rather than blocked, then hold
        // the final position out as the query.
        for i in (1..picked.len()).rev() {
            let j = rng.random_range(0..=i);
            picked.swap(i, j);
        }
        let query_index = picked.pop().expect("a draw holds at least five samples");
        Ok(SampledContext {
            context: picked.iter().map(|&i| self.pool[i].clone()).collect(),
            query: self.pool[query_index].clone(),
        })
    }
}

// ─── Tests ───────────────────────────────────────────────────────────────────
