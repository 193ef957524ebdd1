//! The six subcommands, each a pure function of the run configuration (and,
//! for `classify`/`plot`, one positional input path).
//!
//! Every stage derives its randomness from the single run seed through a
//! stage-tagged scramble, so stages are decorrelated from each other yet any
//! command rerun with the same configuration writes byte-identical
//! artifacts.  Stores are built in a `.partial` sibling directory and
//! renamed into place, so a failed run never leaves a half-written store.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::config::RunConfig;
use crate::{plot, CliError};
use tsicl_core::dataset::{
    read_covariate_pool, read_manifest, read_recording, read_recording_file, write_covariates,
    write_recordings,
};
use tsicl_core::dsp::{preprocess_recording, PreprocessOptions, RawRecording};
use tsicl_core::metrics::{compute_metrics, render_table, to_csv, ConfusionMatrix};
use tsicl_core::model::{
    load_checkpoint, save_checkpoint, train, Forecaster, ModelConfig, TrainOptions,
};
use tsicl_core::prompt::{
    build_episode, classify, jitter_targets, ContextSampler, PromptSample, MIN_DRAW,
};
use tsicl_core::synth::{generate_dataset, splitmix64, N_CLASSES};
use tsicl_core::synth::SignalSpec;

// Stage tags feeding `stage_seed`, so each pipeline stage draws from its own
// decorrelated stream of the run seed.
const STAGE_SYNTH: u64 = 1;
const STAGE_MODEL: u64 = 2;
const STAGE_TRAIN: u64 = 3;
const STAGE_EVAL: u64 = 4;
const STAGE_CLASSIFY: u64 = 5;
const STAGE_JITTER: u64 = 6;

fn stage_seed(seed: u64, stage: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stage))
}

// ─── Shared plumbing ─────────────────────────────────────────────────────────

fn no_positionals(command: &str, positionals: &[String]) -> Result<(), CliError> {
    if positionals.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{command} takes no positional arguments, got '{}'",
            positionals[0]
        )))
    }
}

fn one_positional<'a>(
    command: &str,
    what: &str,
    positionals: &'a [String],
) -> Result<&'a str, CliError> {
    match positionals {
        [one] => Ok(one),
        [] => Err(CliError::Usage(format!("{command} needs {what}"))),
        more => Err(CliError::Usage(format!(
            "{command} takes exactly one positional argument, got {}",
            more.len()
        ))),
    }
}

fn io_data(path: &Path, err: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {err}", path.display()))
}

/// Writes a text artifact, creating its parent directory if needed.
fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_data(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| io_data(path, e))
}

/// Builds a directory's contents in a `.partial` sibling, then swaps it into
/// place; a failed `build` leaves the final path untouched.
fn build_dir_atomically(
    dir: &Path,
    build: impl FnOnce(&Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| {
            CliError::Usage(format!("'{}' is not a usable directory name", dir.display()))
        })?;
    let tmp = dir.with_file_name(format!("{name}.partial"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| io_data(&tmp, e))?;
    }
    build(&tmp).inspect_err(|_| {
        let _ = fs::remove_dir_all(&tmp);
    })?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| io_data(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| io_data(dir, e))
}

/// Checks that every pool sample matches the expected covariate geometry.
fn check_pool(
    pool: &[PromptSample],
    n_channels: usize,
    n_steps: usize,
    dir: &Path,
) -> Result<(), CliError> {
    if pool.is_empty() {
        return Err(CliError::Data(format!(
            "{}: covariate store holds no samples",
            dir.display()
        )));
    }
    for (i, sample) in pool.iter().enumerate() {
        let m = &sample.covariates;
        if m.n_channels() != n_channels || m.n_steps() != n_steps {
            return Err(CliError::Data(format!(
                "{}: covariate sample {i} is {}x{}, run expects {}x{}",
                dir.display(),
                m.n_channels(),
                m.n_steps(),
                n_channels,
                n_steps
            )));
        }
    }
    Ok(())
}

/// Checks that `samples_per_context` spans the checkpoint's context exactly.
fn check_context_arithmetic(spc: usize, mc: &ModelConfig) -> Result<(), CliError> {
    if spc < MIN_DRAW {
        return Err(CliError::Usage(format!(
            "samples_per_context must be at least {MIN_DRAW}, got {spc}"
        )));
    }
    let s = spc - 1;
    if s * mc.horizon_steps != mc.context_steps {
        return Err(CliError::Usage(format!(
            "samples_per_context {spc} gives a context of {s} x {} = {} steps, \
             checkpoint expects {}",
            mc.horizon_steps,
            s * mc.horizon_steps,
            mc.context_steps
        )));
    }
    Ok(())
}

/// The model geometry a run configuration implies.
fn model_config(config: &RunConfig) -> ModelConfig {
    ModelConfig {
        n_covariate_channels: config.n_channels,
        n_target_channels: N_CLASSES,
        context_steps: config.samples_per_context.saturating_sub(1) * config.sub_bands,
        horizon_steps: config.sub_bands,
        patch_size: config.patch_size,
        d_model: config.d_model,
        n_heads: config.n_heads,
        n_blocks: config.n_blocks,
        n_mixture: config.n_mixture,
        seed: 0,
    }
}

// ─── synth ───────────────────────────────────────────────────────────────────

/// Generates `4 · per_class` labeled recordings into the data directory.
pub fn cmd_synth(config: &RunConfig, positionals: &[String]) -> Result<(), CliError> {
    no_positionals("synth", positionals)?;
    if config.per_class == 0 {
        return Err(CliError::Usage(
            "per_class must be positive; nothing was written".to_string(),
        ));
    }
    let template = SignalSpec {
        sample_rate_hz: config.sample_rate_hz,
        duration_s: config.duration_s,
        ..SignalSpec::default()
    };
    let dataset = generate_dataset(
        config.per_class,
        &template,
        stage_seed(config.seed, STAGE_SYNTH),
    )?;
    let mut counters = [0usize; N_CLASSES];
    let items: Vec<(String, RawRecording)> = dataset
        .into_iter()
        .map(|(rec, class)| {
            let id = format!("class{}-{:03}", class.code(), counters[class.index()]);
            counters[class.index()] += 1;
            (id, rec)
        })
        .collect();
    build_dir_atomically(&config.data_dir, |tmp| {
        write_recordings(tmp, &items).map_err(CliError::from)
    })?;
    println!(
        "wrote {} recordings to {}",
        items.len(),
        config.data_dir.display()
    );
    Ok(())
}

// ─── preprocess ──────────────────────────────────────────────────────────────

/// Turns every manifest recording into an `n_channels x sub_bands` covariate
/// matrix in the covariate store.
pub fn cmd_preprocess(config: &RunConfig, positionals: &[String]) -> Result<(), CliError> {
    no_positionals("preprocess", positionals)?;
    let entries = read_manifest(&config.data_dir)?;
    if entries.is_empty() {
        return Err(CliError::Data(format!(
            "{}: manifest lists no recordings",
            config.data_dir.display()
        )));
    }
    let opts = PreprocessOptions {
        n_channels: config.n_channels,
        n_steps: config.sub_bands,
        window: config.window,
        normalize: config.normalize,
    };
    let mut items = Vec::with_capacity(entries.len());
    for entry in &entries {
        let rec = read_recording(&config.data_dir, entry)?;
        let covariates = preprocess_recording(&rec, &opts)
            .map_err(|e| CliError::Data(format!("recording '{}': {e}", entry.id)))?;
        items.push((
            entry.id.clone(),
            PromptSample {
                covariates,
                class: entry.class,
            },
        ));
    }
    let cov_dir = config.covariates_dir();
    build_dir_atomically(&cov_dir, |tmp| {
        write_covariates(tmp, &items).map_err(CliError::from)
    })?;
    println!(
        "wrote {} covariate matrices ({}x{}) to {}",
        items.len(),
        config.n_channels,
        config.sub_bands,
        cov_dir.display()
    );
    Ok(())
}

// ─── train ───────────────────────────────────────────────────────────────────

/// Fits the forecaster on sampled episodes; writes the checkpoint and a
/// per-step loss trace.
pub fn cmd_train(config: &RunConfig, positionals: &[String]) -> Result<(), CliError> {
    no_positionals("train", positionals)?;
    if !(config.target_jitter.is_finite() && config.target_jitter >= 0.0) {
        return Err(CliError::Usage(format!(
            "target_jitter must be finite and nonnegative, got {}",
            config.target_jitter
        )));
    }
    let cov_dir = config.covariates_dir();
    let pool = read_covariate_pool(&cov_dir)?;
    check_pool(&pool, config.n_channels, config.sub_bands, &cov_dir)?;

    let mut mc = model_config(config);
    mc.seed = stage_seed(config.seed, STAGE_MODEL);
    let mut model = Forecaster::new(mc.clone())?;
    println!("model: {} parameters", model.n_parameters());

    let sampler = ContextSampler::new(&pool, stage_seed(config.seed, STAGE_TRAIN));
    let opts = TrainOptions {
        steps: config.train_steps,
        step_size: config.step_size,
        clip_norm: config.clip_norm,
    };
    let spc = config.samples_per_context;
    let jitter_seed = stage_seed(config.seed, STAGE_JITTER);
    let started = Instant::now();
    let trace = train(&mut model, &opts, |step| {
        let drawn = sampler.draw(step as u64, spc)?;
        let mut episode = build_episode(&drawn.context, &drawn.query, &mc)?;
        jitter_targets(
            &mut episode.targets_horizon,
            config.target_jitter,
            jitter_seed,
            step as u64,
        );
        Ok(episode)
    })?;
    let elapsed = started.elapsed().as_secs_f64();

    if let Some(parent) = config.checkpoint.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_data(parent, e))?;
        }
    }
    save_checkpoint(&model, &config.checkpoint)?;

    let mut csv = String::from("step,loss\n");
    for (i, loss) in trace.losses.iter().enumerate() {
        writeln!(csv, "{},{loss:.6}", i + 1).expect("string write");
    }
    let loss_path = config.out.join("loss.csv");
    write_text(&loss_path, &csv)?;

    let final_loss = trace.losses.last().expect("training ran at least one step");
    println!(
        "trained {} steps in {elapsed:.1} s; final loss {final_loss:.4}",
        trace.losses.len()
    );
    println!("checkpoint: {}", config.checkpoint.display());
    println!("loss trace: {}", loss_path.display());
    Ok(())
}

// ─── eval ────────────────────────────────────────────────────────────────────

/// Classifies `n_contexts` drawn contexts and writes the metrics report plus
/// a per-context prediction log.
pub fn cmd_eval(config: &RunConfig, positionals: &[String]) -> Result<(), CliError> {
    no_positionals("eval", positionals)?;
    if config.n_contexts == 0 {
        return Err(CliError::Usage("n_contexts must be positive".to_string()));
    }
    let model = load_checkpoint(&config.checkpoint)?;
    let mc = model.config().clone();
    check_context_arithmetic(config.samples_per_context, &mc)?;
    let cov_dir = config.covariates_dir();
    let pool = read_covariate_pool(&cov_dir)?;
    check_pool(&pool, mc.n_covariate_channels, mc.horizon_steps, &cov_dir)?;

    let sampler = ContextSampler::new(&pool, stage_seed(config.seed, STAGE_EVAL));
    let mut cm = ConfusionMatrix::new();
    let mut log = String::from(
        "context\tseed\ttrue\tpredicted\tlast_context_class\t\
         intensity1\tintensity2\tintensity3\tintensity4\n",
    );
    for i in 0..config.n_contexts {
        let drawn = sampler.draw(i as u64, config.samples_per_context)?;
        let verdict = classify(&model, &drawn.context, &drawn.query.covariates)?;
        cm.accumulate(drawn.query.class, verdict.predicted);
        let fi = verdict.final_intensities;
        writeln!(
            log,
            "{i}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            sampler.round_seed(i as u64),
            drawn.query.class.code(),
            verdict.predicted.code(),
            drawn.last_context_class().code(),
            fi[0],
            fi[1],
            fi[2],
            fi[3]
        )
        .expect("string write");
    }

    let report = compute_metrics(&cm)?;
    let table = render_table(&cm, &report);
    write_text(&config.out.join("report.txt"), &table)?;
    write_text(&config.out.join("report.csv"), &to_csv(&cm, &report))?;
    write_text(&config.out.join("predictions.tsv"), &log)?;
    print!("{table}");
    println!(
        "evaluated {} contexts of {} samples; artifacts in {}",
        config.n_contexts,
        config.samples_per_context,
        config.out.display()
    );
    Ok(())
}

// ─── classify ────────────────────────────────────────────────────────────────

/// Classifies one recording (`.f32` at the configured rate, or `.csv`)
/// against a context drawn from the covariate store.
pub fn cmd_classify(config: &RunConfig, positionals: &[String]) -> Result<(), CliError> {
    let input = one_positional("classify", "a recording file", positionals)?;
    let model = load_checkpoint(&config.checkpoint)?;
    let mc = model.config().clone();
    check_context_arithmetic(config.samples_per_context, &mc)?;
    let cov_dir = config.covariates_dir();
    let pool = read_covariate_pool(&cov_dir)?;
    check_pool(&pool, mc.n_covariate_channels, mc.horizon_steps, &cov_dir)?;

    let rec = read_recording_file(Path::new(input), config.sample_rate_hz, None)?;
    let opts = PreprocessOptions {
        n_channels: mc.n_covariate_channels,
        n_steps: mc.horizon_steps,
        window: config.window,
        normalize: config.normalize,
    };
    let query = preprocess_recording(&rec, &opts)?;

    let sampler = ContextSampler::new(&pool, stage_seed(config.seed, STAGE_CLASSIFY));
    let drawn = sampler.draw(0, config.samples_per_context)?;
    let verdict = classify(&model, &drawn.context, &query)?;

    println!(
        "predicted: {} ({})",
        verdict.predicted.code(),
        verdict.predicted.name()
    );
    let fi = verdict.final_intensities;
    println!(
        "final intensities: class1={:.6} class2={:.6} class3={:.6} class4={:.6}",
        fi[0], fi[1], fi[2], fi[3]
    );
    let p = verdict.probabilities;
    println!(
        "probabilities: class1={:.6} class2={:.6} class3={:.6} class4={:.6}",
        p[0], p[1], p[2], p[3]
    );

    let h = mc.horizon_steps;
    let mut csv = String::from("step,class1,class2,class3,class4\n");
    for s in 0..h {
        writeln!(
            csv,
            "{},{:.6},{:.6},{:.6},{:.6}",
            s + 1,
            verdict.intensities.at(s),
            verdict.intensities.at(h + s),
            verdict.intensities.at(2 * h + s),
            verdict.intensities.at(3 * h + s)
        )
        .expect("string write");
    }
    let out_path = config.out.join("intensities.csv");
    write_text(&out_path, &csv)?;
    println!("intensity curves: {}", out_path.display());
    Ok(())
}

// ─── plot ────────────────────────────────────────────────────────────────────

/// Renders an intensity or loss CSV as `<out>/<input stem>.svg`.
pub fn cmd_plot(config: &RunConfig, positionals: &[String]) -> Result<(), CliError> {
    let input = one_positional("plot", "a CSV file", positionals)?;
    let input = Path::new(input);
    let text = fs::read_to_string(input).map_err(|e| io_data(input, e))?;
    let svg = plot::render(&text)
        .map_err(|e| CliError::Data(format!("{} {e}", input.display())))?;
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("plot");
    let out_path = config.out.join(format!("{stem}.svg"));
    write_text(&out_path, &svg)?;
    println!("wrote {}", out_path.display());
    Ok(())
}

// ─── Tests ───────────────────────────────────────────────────────────────────
