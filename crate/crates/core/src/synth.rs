//! Synthetic bearing-vibration recordings with controllable fault signatures.
//!
//! Every class shares a common base — shaft-frequency harmonics plus Gaussian
//! noise — and adds its own signature on top:
//!
//! * `Normal` — the base alone.
//! * `OuterRing` — an impulse train at the outer-race passing frequency,
//!   each impulse ringing a decaying burst at the resonance frequency.
//! * `InnerRing` — the same construction at the inner-race passing frequency,
//!   amplitude-modulated at the shaft frequency (close spectral cousin of
//!   `OuterRing` by design).
//! * `SandBearing` — the base plus strongly elevated broadband noise and a
//!   weak patter of randomly-timed grinding impacts that ring a higher
//!   structural mode (close spectral cousin of `Normal` by design: no comb
//!   lines, just a raised floor and a faint smooth hump).
//!
//! Generation is deterministic: the same `(class, spec)` always produces the
//! same samples, and dataset items derive per-item seeds from the dataset
//! seed, so regenerating a dataset is bit-identical.

use crate::dsp::RawRecording;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt;

/// Number of fault classes (and one-hot target channels).
pub const N_CLASSES: usize = 4;

/// Time constant of the resonance bursts, in seconds.
const BURST_TAU_S: f64 = 0.002;

/// Depth of the shaft-frequency amplitude modulation on inner-race bursts.
const INNER_AM_DEPTH: f64 = 0.4;

/// Relative amplitudes of the shaft harmonics (fundamental, 2nd, 3rd).
const HARMONIC_AMPS: [f64; 3] = [1.0, 0.5, 0.25];

/// Extra broadband noise of `SandBearing`, as a multiple of the noise floor.
const SAND_NOISE_FACTOR: f64 = 4.0;

/// Structural mode rung by grinding impacts, as a multiple of `resonance_hz`.
const SAND_MODE_RATIO: f64 = 1.625;

/// Mean rate of the grinding impacts, in impacts per second.
const SAND_IMPACT_RATE_HZ: f64 = 400.0;

/// Amplitude of one grinding impact relative to a fault burst.
const SAND_IMPACT_AMP: f64 = 0.3;

// ─── Fault classes ───────────────────────────────────────────────────────────

/// Bearing condition labels; codes 1–4 are used in manifests and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultClass {
    Normal,
    OuterRing,
    SandBearing,
    InnerRing,
}

impl FaultClass {
    /// All classes in code order.
    pub const ALL: [FaultClass; N_CLASSES] = [
        FaultClass::Normal,
        FaultClass::OuterRing,
        FaultClass::SandBearing,
        FaultClass::InnerRing,
    ];

    /// Stable numeric code (1-based).
    pub fn code(self) -> u8 {
        match self {
            FaultClass::Normal => 1,
            FaultClass::OuterRing => 2,
            FaultClass::SandBearing => 3,
            FaultClass::InnerRing => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<FaultClass> {
        match code {
            1 => Some(FaultClass::Normal),
            2 => Some(FaultClass::OuterRing),
            3 => Some(FaultClass::SandBearing),
            4 => Some(FaultClass::InnerRing),
            _ => None,
        }
    }

    /// Zero-based position, used to index one-hot channels.
    pub fn index(self) -> usize {
        (self.code() - 1) as usize
    }

    pub fn from_index(index: usize) -> Option<FaultClass> {
        if index < N_CLASSES {
            Some(FaultClass::ALL[index])
        } else {
            None
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultClass::Normal => "Normal",
            FaultClass::OuterRing => "OuterRing",
            FaultClass::SandBearing => "SandBearing",
            FaultClass::InnerRing => "InnerRing",
        }
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

// ─── Signal specification ────────────────────────────────────────────────────

/// Physical parameters of a synthetic recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    /// Shaft rotation frequency in Hz.
    pub shaft_hz: f64,
    /// Ball-passing frequency, outer race, in Hz.
    pub bpfo_hz: f64,
    /// Ball-passing frequency, inner race, in Hz.
    pub bpfi_hz: f64,
    /// Structural resonance excited by each impulse, in Hz.
    pub resonance_hz: f64,
    /// Standard deviation of the base Gaussian noise.
    pub noise_floor: f64,
    /// Recording length in seconds.
    pub duration_s: f64,
    /// Sampling rate in Hz.
    pub sample_rate_hz: f64,
    /// Seed for the recording's noise draws.
    pub seed: u64,
    /// Overall scale on the deterministic components (harmonics and bursts).
    pub amplitude_scale: f64,
}

impl Default for SignalSpec {
    fn default() -> SignalSpec {
        SignalSpec {
            shaft_hz: 25.0,
            bpfo_hz: 89.0,
            bpfi_hz: 134.0,
            resonance_hz: 3200.0,
            noise_floor: 0.05,
            duration_s: 1.0,
            sample_rate_hz: 48_000.0,
            seed: 0,
            amplitude_scale: 1.0,
        }
    }
}

impl SignalSpec {
    /// Checks the physical plausibility constraints.
    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = [
            ("shaft_hz", self.shaft_hz),
            ("bpfo_hz", self.bpfo_hz),
            ("bpfi_hz", self.bpfi_hz),
            ("resonance_hz", self.resonance_hz),
            ("duration_s", self.duration_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("amplitude_scale", self.amplitude_scale),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(SynthError::InvalidSpec(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.noise_floor.is_finite() || self.noise_floor < 0.0 {
            return Err(SynthError::InvalidSpec(format!(
                "noise_floor must be non-negative, got {}",
                self.noise_floor
            )));
        }
        if self.bpfo_hz == self.bpfi_hz {
            return Err(SynthError::InvalidSpec(format!(
                "bpfo_hz and bpfi_hz must differ, both are {}",
                self.bpfo_hz
            )));
        }
        if self.resonance_hz >= self.sample_rate_hz / 2.0 {
            return Err(SynthError::InvalidSpec(format!(
                "resonance_hz {} must stay below the Nyquist frequency {}",
                self.resonance_hz,
                self.sample_rate_hz / 2.0
            )));
        }
        if self.resonance_hz * SAND_MODE_RATIO >= self.sample_rate_hz / 2.0 {
            return Err(SynthError::InvalidSpec(format!(
                "the grinding mode at {} ({SAND_MODE_RATIO} x resonance_hz) \
                 must stay below the Nyquist frequency {}",
                self.resonance_hz * SAND_MODE_RATIO,
                self.sample_rate_hz / 2.0
            )));
        }
        if (self.duration_s * self.sample_rate_hz).round() < 1.0 {
            return Err(SynthError::InvalidSpec(
                "duration and sample rate imply an empty recording".to_string(),
            ));
        }
        Ok(())
    }
}

/// Failure modes of the generator.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    InvalidSpec(String),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::InvalidSpec(msg) => write!(f, "invalid signal spec: {msg}"),
        }
    }
}

impl std::error::Error for SynthError {}

// ─── Generation ──────────────────────────────────────────────────────────────

/// SplitMix64 scramble, used to derive decorrelated per-item seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adds an exponentially decaying resonance burst at each impulse time of a
/// periodic train, optionally amplitude-modulated at `am_hz`.
fn add_impulse_train(
    samples: &mut [f64],
    fs: f64,
    rate_hz: f64,
    resonance_hz: f64,
    amp: f64,
    am_hz: Option<f64>,
) {
    let n = samples.len();
    let burst_len = ((8.0 * BURST_TAU_S * fs).ceil() as usize).max(1);
    let omega = 2.0 * std::f64::consts::PI * resonance_hz / fs;
    let decay = 1.0 / (BURST_TAU_S * fs);
    let mut k = 0usize;
    loop {
        let t_k = k as f64 / rate_hz;
        let start = (t_k * fs).round() as usize;
        if start >= n {
            break;
        }
        let a_k = match am_hz {
            Some(f) => amp * (1.0 + INNER_AM_DEPTH * (2.0 * std::f64::consts::PI * f * t_k).sin()),
            None => amp,
        };
        for d in 0..burst_len.min(n - start) {
            let dt = d as f64;
            samples[start + d] += a_k * (-dt * decay).exp() * (omega * dt).sin();
        }
        k += 1;
    }
}

/// Adds exponentially decaying bursts at Poisson-distributed random times,
/// modelling loose-particle impacts: same ringing shape as a fault burst but
/// with no periodicity, so the spectrum gains a smooth hump instead of a comb.
fn add_random_impacts(
    samples: &mut [f64],
    fs: f64,
    rate_hz: f64,
    mode_hz: f64,
    amp: f64,
    rng: &mut ChaCha8Rng,
) {
    let n = samples.len();
    let burst_len = ((8.0 * BURST_TAU_S * fs).ceil() as usize).max(1);
    let omega = 2.0 * std::f64::consts::PI * mode_hz / fs;
    let decay = 1.0 / (BURST_TAU_S * fs);
    let mut t = 0.0f64;
    loop {
        // Exponential inter-arrival gap of a Poisson process.
        let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        t += -u.ln() / rate_hz;
        let start = (t * fs).round() as usize;
        if start >= n {
            break;
        }
        let a = amp * rng.random_range(0.5..1.5);
        for d in 0..burst_len.min(n - start) {
            let dt = d as f64;
            samples[start + d] += a * (-dt * decay).exp() * (omega * dt).sin();
        }
    }
}

/// Generates one recording of the given class.
///
/// Deterministic: the same `(class, spec)` yields bit-identical samples.  The
/// base (harmonics plus noise-floor noise) depends only on the spec, so
/// recordings of different classes from one spec share their base and differ
/// only in the fault signature.
pub fn generate_recording(
    class: FaultClass,
    spec: &SignalSpec,
) -> Result<RawRecording, SynthError> {
    spec.validate()?;
    let fs = spec.sample_rate_hz;
    let n = (spec.duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal is valid");

    let mut samples = vec![0.0f64; n];
    for (t, s) in samples.iter_mut().enumerate() {
        let time = t as f64 / fs;
        let mut v = 0.0;
        for (h, &a) in HARMONIC_AMPS.iter().enumerate() {
            let f = spec.shaft_hz * (h + 1) as f64;
            v += a * (2.0 * std::f64::consts::PI * f * time).sin();
        }
        *s = v * spec.amplitude_scale;
    }
    if spec.noise_floor > 0.0 {
        for s in samples.iter_mut() {
            *s += spec.noise_floor * noise.sample(&mut rng);
        }
    }

    match class {
        FaultClass::Normal => {}
        FaultClass::OuterRing => add_impulse_train(
            &mut samples,
            fs,
            spec.bpfo_hz,
            spec.resonance_hz,
            spec.amplitude_scale,
            None,
        ),
        FaultClass::InnerRing => add_impulse_train(
            &mut samples,
            fs,
            spec.bpfi_hz,
            spec.resonance_hz,
            spec.amplitude_scale,
            Some(spec.shaft_hz),
        ),
        FaultClass::SandBearing => {
            let extra = SAND_NOISE_FACTOR * spec.noise_floor;
            if extra > 0.0 {
                for s in samples.iter_mut() {
                    *s += extra * noise.sample(&mut rng);
                }
            }
            add_random_impacts(
                &mut samples,
                fs,
                SAND_IMPACT_RATE_HZ,
                spec.resonance_hz * SAND_MODE_RATIO,
                SAND_IMPACT_AMP * spec.amplitude_scale,
                &mut rng,
            );
        }
    }

    Ok(RawRecording {
        samples,
        sample_rate_hz: fs,
        label: Some(class),
    })
}

/// Per-item spec derived from a dataset template: a fresh seed plus ±5%
/// jitter on the shaft frequency and the component amplitudes.
pub(crate) fn jittered_spec(
    template: &SignalSpec,
    class: FaultClass,
    index: usize,
    dataset_seed: u64,
) -> SignalSpec {
    let item_key = ((class.code() as u64) << 32) | index as u64;
    let item_seed = splitmix64(dataset_seed ^ splitmix64(item_key));
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
    let shaft_jit: f64 = 1.0 + rng.random_range(-0.05..0.05);
    let amp_jit: f64 = 1.0 + rng.random_range(-0.05..0.05);
    let mut spec = template.clone();
    spec.shaft_hz *= shaft_jit;
    spec.amplitude_scale *= amp_jit;
    spec.seed = splitmix64(item_seed);
    spec
}

/// Generates `per_class` recordings of every class in class-code order.
///
/// Item `i` of class `c` gets a seed derived from `(dataset seed, c, i)`, so
/// any subset regenerates identically regardless of the rest.
pub fn generate_dataset(
    per_class: usize,
    template: &SignalSpec,
    seed: u64,
) -> Result<Vec<(RawRecording, FaultClass)>, SynthError> {
    template.validate()?;
    let mut out = Vec::with_capacity(per_class * N_CLASSES);
    for &class in &FaultClass::ALL {
        for i in 0..per_class {
            let spec = jittered_spec(template, class, i, seed);
            out.push((generate_recording(class, &spec)?, class));
        }
    }
    Ok(out)
}

// ─── Tests ───────────────────────────────────────────────────────────────────
