//! Flat `key=value` run configuration with flag overrides.
//!
//! Precedence is fixed: built-in defaults, then any `--config` file (applied
//! first regardless of flag order), then the remaining flags.  Unknown keys
//! and flags are rejected rather than ignored, so a typo cannot silently
//! fall back to a default.  Config files hold one `key = value` per line;
//! blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;
use tsicl_core::dsp::Window;

/// Flags other than `--config`, paired with the config key each overrides.
pub const FLAG_KEYS: [(&str, &str); 8] = [
    ("--seed", "seed"),
    ("--data-dir", "data_dir"),
    ("--checkpoint", "checkpoint"),
    ("--n-contexts", "n_contexts"),
    ("--samples-per-context", "samples_per_context"),
    ("--n-channels", "n_channels"),
    ("--sub-bands", "sub_bands"),
    ("--out", "out"),
];

/// Every tunable of a run, resolved from defaults, file, and flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    /// Recording store directory (written by `synth`, read by `preprocess`).
    pub data_dir: PathBuf,
    /// Covariate store directory; defaults to `<data_dir>/covariates`.
    covariates_dir: Option<PathBuf>,
    /// Model checkpoint file (written by `train`, read by `eval`/`classify`).
    pub checkpoint: PathBuf,
    /// Output directory for run artifacts (reports, traces, plots).
    pub out: PathBuf,
    /// Contexts to draw during `eval`.
    pub n_contexts: usize,
    /// Samples per drawn context, the held-out query included.
    pub samples_per_context: usize,
    /// Covariate channels each recording is banded into.
    pub n_channels: usize,
    /// Spectral sub-bands (time steps) per sample.
    pub sub_bands: usize,
    /// Recordings per class for `synth`.
    pub per_class: usize,
    /// Sampling rate for synthesis and for headerless `.f32` inputs.
    pub sample_rate_hz: f64,
    /// Recording length for synthesis, in seconds.
    pub duration_s: f64,
    /// Spectral window applied before the FFT.
    pub window: Window,
    /// Whether covariate channels are z-scored.
    pub normalize: bool,
    /// Model: steps per token patch.
    pub patch_size: usize,
    /// Model: embedding width.
    pub d_model: usize,
    /// Model: attention heads per block.
    pub n_heads: usize,
    /// Model: transformer block pairs.
    pub n_blocks: usize,
    /// Model: Gaussian mixture components per forecast cell.
    pub n_mixture: usize,
    /// Training steps (one episode each).
    pub train_steps: usize,
    /// Base learning-rate for training.
    pub step_size: f64,
    /// Global gradient-norm clip for training.
    pub clip_norm: f64,
    /// Width of the Gaussian noise added to training-episode horizon targets
    /// (0 disables).  Bounds the mixture likelihood so training cannot win by
    /// shrinking scales onto the 0/1 indicator values instead of conditioning
    /// on the context; inference always uses exact one-hots.
    pub target_jitter: f64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            seed: 0,
            data_dir: PathBuf::from("data"),
            covariates_dir: None,
            checkpoint: PathBuf::from("model.ckpt"),
            out: PathBuf::from("out"),
            n_contexts: 1000,
            samples_per_context: 63,
            n_channels: 60,
            sub_bands: 64,
            per_class: 70,
            sample_rate_hz: 48_000.0,
            duration_s: 1.0,
            window: Window::Rectangular,
            normalize: true,
            patch_size: 8,
            d_model: 64,
            n_heads: 4,
            n_blocks: 3,
            n_mixture: 3,
            train_steps: 200,
            step_size: 0.003,
            clip_norm: 1.0,
            target_jitter: 0.05,
        }
    }
}

impl RunConfig {
    /// The effective covariate store directory.
    pub fn covariates_dir(&self) -> PathBuf {
        self.covariates_dir
            .clone()
            .unwrap_or_else(|| self.data_dir.join("covariates"))
    }

    /// Applies one key; `source` names where the value came from so parse
    /// errors point at a config line or a flag.
    fn set(&mut self, key: &str, value: &str, source: &str) -> Result<(), CliError> {
        match key {
            "seed" => self.seed = parse(key, value, source)?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "covariates_dir" => self.covariates_dir = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            "n_contexts" => self.n_contexts = parse(key, value, source)?,
            "samples_per_context" => self.samples_per_context = parse(key, value, source)?,
            "n_channels" => self.n_channels = parse(key, value, source)?,
            "sub_bands" => self.sub_bands = parse(key, value, source)?,
            "per_class" => self.per_class = parse(key, value, source)?,
            "sample_rate_hz" => self.sample_rate_hz = parse(key, value, source)?,
            "duration_s" => self.duration_s = parse(key, value, source)?,
            "window" => {
                self.window = match value {
                    "hann" => Window::Hann,
                    "rectangular" => Window::Rectangular,
                    other => {
                        return Err(CliError::Usage(format!(
                            "{source}: window must be 'hann' or 'rectangular', got '{other}'"
                        )))
                    }
                }
            }
            "normalize" => {
                self.normalize = match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(CliError::Usage(format!(
                            "{source}: normalize must be 'true' or 'false', got '{other}'"
                        )))
                    }
                }
            }
            "patch_size" => self.patch_size = parse(key, value, source)?,
            "d_model" => self.d_model = parse(key, value, source)?,
            "n_heads" => self.n_heads = parse(key, value, source)?,
            "n_blocks" => self.n_blocks = parse(key, value, source)?,
            "n_mixture" => self.n_mixture = parse(key, value, source)?,
            "train_steps" => self.train_steps = parse(key, value, source)?,
            "step_size" => self.step_size = parse(key, value, source)?,
            "clip_norm" => self.clip_norm = parse(key, value, source)?,
            "target_jitter" => self.target_jitter = parse(key, value, source)?,
            other => {
                return Err(CliError::Usage(format!(
                    "{source}: unknown key '{other}'"
                )))
            }
        }
        Ok(())
    }

    /// Loads a `key = value` file over the current values.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let source = format!("config file {} line {}", path.display(), i + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{source}: expected key=value, got '{line}'"))
            })?;
            self.set(key.trim(), value.trim(), &source)?;
        }
        Ok(())
    }

    /// The effective configuration as run-log text, in a fixed key order.
    pub fn echo(&self) -> String {
        let mut out = String::from("effective config:\n");
        let mut kv = |key: &str, value: String| {
            writeln!(out, "  {key} = {value}").expect("string write");
        };
        kv("seed", self.seed.to_string());
        kv("data_dir", self.data_dir.display().to_string());
        kv("covariates_dir", self.covariates_dir().display().to_string());
        kv("checkpoint", self.checkpoint.display().to_string());
        kv("out", self.out.display().to_string());
        kv("n_contexts", self.n_contexts.to_string());
        kv("samples_per_context", self.samples_per_context.to_string());
        kv("n_channels", self.n_channels.to_string());
        kv("sub_bands", self.sub_bands.to_string());
        kv("per_class", self.per_class.to_string());
        kv("sample_rate_hz", self.sample_rate_hz.to_string());
        kv("duration_s", self.duration_s.to_string());
        kv(
            "window",
            match self.window {
                Window::Hann => "hann".to_string(),
                Window::Rectangular => "rectangular".to_string(),
            },
        );
        kv("normalize", self.normalize.to_string());
        kv("patch_size", self.patch_size.to_string());
        kv("d_model", self.d_model.to_string());
        kv("n_heads", self.n_heads.to_string());
        kv("n_blocks", self.n_blocks.to_string());
        kv("n_mixture", self.n_mixture.to_string());
        kv("train_steps", self.train_steps.to_string());
        kv("step_size", self.step_size.to_string());
        kv("clip_norm", self.clip_norm.to_string());
        kv("target_jitter", self.target_jitter.to_string());
        out
    }
}

fn parse<T: FromStr>(key: &str, value: &str, source: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| {
        CliError::Usage(format!("{source}: bad value '{value}' for {key}"))
    })
}

// ─── Argument parsing ────────────────────────────────────────────────────────

/// A parsed command line: the subcommand, its positional arguments, and the
/// resolved configuration.
#[derive(Debug)]
pub struct Invocation {
    pub command: String,
    pub positionals: Vec<String>,
    pub config: RunConfig,
}

/// Parses `args` (without the program name).  Flags take `--flag value` or
/// `--flag=value` form; anything else is a positional argument.
pub fn parse_args(args: &[String]) -> Result<Invocation, CliError> {
    let (command, rest) = args
        .split_first()
        .ok_or_else(|| CliError::Usage(crate::usage()))?;

    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut positionals = Vec::new();
    let mut it = rest.iter();
    while let Some(arg) = it.next() {
        if let Some(flag) = arg.strip_prefix("--") {
            let (name, value) = match flag.split_once('=') {
                Some((n, v)) => (n.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| {
                        CliError::Usage(format!("flag --{flag} needs a value"))
                    })?;
                    (flag.to_string(), v.clone())
                }
            };
            pairs.push((format!("--{name}"), value));
        } else {
            positionals.push(arg.clone());
        }
    }

    let mut config = RunConfig::default();
    // Config files first, so every other flag wins regardless of position.
    for (flag, value) in &pairs {
        if flag == "--config" {
            config.load_file(Path::new(value))?;
        }
    }
    for (flag, value) in &pairs {
        if flag == "--config" {
            continue;
        }
        let key = FLAG_KEYS
            .iter()
            .find(|(f, _)| f == flag)
            .map(|(_, k)| *k)
            .ok_or_else(|| CliError::Usage(format!("unknown flag '{flag}'")))?;
        config.set(key, value, &format!("flag {flag}"))?;
    }
    Ok(Invocation {
        command: command.clone(),
        positionals,
        config,
    })
}

// ─── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn tmp_file(name: &str, content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("cli-config-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn defaults_cover_every_echoed_key() {
        let config = RunConfig::default();
        let echo = config.echo();
        for key in [
            "seed", "data_dir", "covariates_dir", "checkpoint", "out", "n_contexts",
            "samples_per_context", "n_channels", "sub_bands", "per_class", "sample_rate_hz",
            "duration_s", "window", "normalize", "patch_size", "d_model", "n_heads",
            "n_blocks", "n_mixture", "train_steps", "step_size", "clip_norm", "target_jitter",
        ] {
            assert!(echo.contains(&format!("  {key} = ")), "echo misses {key}");
        }
        assert!(echo.contains("  samples_per_context = 63\n"));
        assert!(echo.contains("  n_channels = 60\n"));
        assert!(echo.contains("  sub_bands = 64\n"));
        assert!(echo.contains("  n_contexts = 1000\n"));
        assert!(echo.contains("  per_class = 70\n"));
    }

    #[test]
    fn covariates_dir_follows_data_dir_unless_set() {
        let mut config = RunConfig::default();
        config.set("data_dir", "elsewhere", "test").unwrap();
        assert_eq!(config.covariates_dir(), PathBuf::from("elsewhere/covariates"));
        config.set("covariates_dir", "fixed", "test").unwrap();
        assert_eq!(config.covariates_dir(), PathBuf::from("fixed"));
    }

    #[test]
    fn file_then_flags_with_flags_winning() {
        let path = tmp_file(
            "layered.conf",
            "# comment\n\nseed = 7\nn_contexts = 50\nwindow = rectangular\n",
        );
        let inv = parse_args(&args(&[
            "eval",
            "--seed",
            "9",
            "--config",
            path.to_str().unwrap(),
        ]))
        .unwrap();
        // The file applies first even though --config came after --seed.
        assert_eq!(inv.config.seed, 9);
        assert_eq!(inv.config.n_contexts, 50);
        assert!(matches!(inv.config.window, Window::Rectangular));
        assert_eq!(inv.command, "eval");
        assert!(inv.positionals.is_empty());
    }

    #[test]
    fn equals_form_and_positionals_parse() {
        let inv = parse_args(&args(&["classify", "rec.f32", "--seed=12"])).unwrap();
        assert_eq!(inv.config.seed, 12);
        assert_eq!(inv.positionals, vec!["rec.f32".to_string()]);
    }

    #[test]
    fn unknown_keys_and_flags_are_rejected() {
        let path = tmp_file("unknown.conf", "seed = 1\nspeed = 9\n");
        let err = parse_args(&args(&["train", "--config", path.to_str().unwrap()]))
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 2"), "got: {err}");
        assert!(err.to_string().contains("unknown key 'speed'"));

        let err = parse_args(&args(&["train", "--sped", "1"])).unwrap_err();
        assert!(err.to_string().contains("unknown flag '--sped'"));
    }

    #[test]
    fn bad_values_name_their_source() {
        let err = parse_args(&args(&["train", "--seed", "teal"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("flag --seed"));
        assert!(err.to_string().contains("'teal'"));

        let path = tmp_file("badval.conf", "normalize = maybe\n");
        let err = parse_args(&args(&["train", "--config", path.to_str().unwrap()]))
            .unwrap_err();
        assert!(err.to_string().contains("line 1"));
        assert!(err.to_string().contains("'maybe'"));
    }

    #[test]
    fn dangling_flag_and_missing_file_are_usage_errors() {
        let err = parse_args(&args(&["train", "--seed"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--seed needs a value"));

        let err = parse_args(&args(&["train", "--config", "/no/such/file.conf"]))
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn malformed_config_line_is_located() {
        let path = tmp_file("noeq.conf", "seed = 1\njust words\n");
        let err = parse_args(&args(&["train", "--config", path.to_str().unwrap()]))
            .unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(err.to_string().contains("expected key=value"));
    }

    #[test]
    fn no_arguments_prints_usage_as_an_error() {
        let err = parse_args(&[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("usage: tsicl"));
    }
}
