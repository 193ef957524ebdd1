//! On-disk layout for recordings and covariate matrices.
//!
//! A recording store is a directory with a `manifest.tsv` index and one
//! payload file per recording (`.f32`: raw little-endian f32 samples, or
//! `.csv`: one sample per line).  A covariate store mirrors that with a
//! `covariates.tsv` index and `.cov` payloads (u32 channel and step counts,
//! then row-major little-endian f32 values; `.csv` holds one comma-separated
//! channel per line).  Read errors name the file and the manifest line that
//! referenced it.

use crate::dsp::{CovariateMatrix, RawRecording};
use crate::prompt::PromptSample;
use crate::synth::FaultClass;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Index file of a recording store.
pub const MANIFEST_NAME: &str = "manifest.tsv";

/// Index file of a covariate store.
pub const COVARIATE_INDEX_NAME: &str = "covariates.tsv";

// ─── Errors ──────────────────────────────────────────────────────────────────

/// Failure modes of dataset reading and writing.
#[derive(Debug)]
pub enum DatasetError {
    Io {
        path: PathBuf,
        err: io::Error,
    },
    /// A structurally bad index line.
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// A payload file that cannot back its index entry.
    Payload {
        path: PathBuf,
        manifest_line: usize,
        message: String,
    },
    /// A standalone recording file, read with no manifest context.
    Recording { path: PathBuf, message: String },
    InvalidArgument(String),
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::Io { path, err } => write!(f, "{}: {err}", path.display()),
            DatasetError::Manifest {
                path,
                line,
                message,
            } => write!(f, "{} line {line}: {message}", path.display()),
            DatasetError::Payload {
                path,
                manifest_line,
                message,
            } => write!(
                f,
                "{} (manifest line {manifest_line}): {message}",
                path.display()
            ),
            DatasetError::Recording { path, message } => {
                write!(f, "{}: {message}", path.display())
            }
            DatasetError::InvalidArgument(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for DatasetError {}

fn io_err(path: &Path, err: io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        err,
    }
}

/// Ids become file names, so only allow a conservative character set.
fn check_id(id: &str) -> Result<(), DatasetError> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(DatasetError::InvalidArgument(format!(
            "id '{id}' may only hold ASCII letters, digits, '-', '_' and '.'"
        )))
    }
}

/// Relative payload paths from an index must stay inside the store.
fn check_relpath(path: &str, manifest: &Path, line: usize) -> Result<(), DatasetError> {
    let p = Path::new(path);
    let escapes = p.is_absolute()
        || p.components()
            .any(|c| matches!(c, std::path::Component::ParentDir));
    if escapes {
        return Err(DatasetError::Manifest {
            path: manifest.to_path_buf(),
            line,
            message: format!("payload path '{path}' leaves the store directory"),
        });
    }
    Ok(())
}

// ─── Recording store ─────────────────────────────────────────────────────────

/// One line of a recording manifest.
#[derive(Debug, Clone)]
pub struct RecordingEntry {
    pub id: String,
    pub class: FaultClass,
    /// Payload path relative to the store directory.
    pub relpath: String,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    /// 1-based line in the manifest, for error reporting.
    pub manifest_line: usize,
}

/// Writes labeled recordings into `dir` as `.f32` payloads plus a manifest.
/// Every recording must carry a label.
pub fn write_recordings(
    dir: &Path,
    items: &[(String, RawRecording)],
) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifest = String::from("id\tclass\tpath\tsample_rate_hz\tn_samples\n");
    for (id, rec) in items {
        check_id(id)?;
        let class = rec.label.ok_or_else(|| {
            DatasetError::InvalidArgument(format!("recording '{id}' has no class label"))
        })?;
        let relpath = format!("{id}.f32");
        let mut bytes = Vec::with_capacity(rec.samples.len() * 4);
        for &x in &rec.samples {
            bytes.extend_from_slice(&(x as f32).to_le_bytes());
        }
        let payload = dir.join(&relpath);
        fs::write(&payload, &bytes).map_err(|e| io_err(&payload, e))?;
        manifest.push_str(&format!(
            "{id}\t{}\t{relpath}\t{}\t{}\n",
            class.code(),
            rec.sample_rate_hz,
            rec.samples.len()
        ));
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest).map_err(|e| io_err(&path, e))
}

fn split_line<'a>(
    line: &'a str,
    n_fields: usize,
    path: &Path,
    line_no: usize,
) -> Result<Vec<&'a str>, DatasetError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != n_fields {
        return Err(DatasetError::Manifest {
            path: path.to_path_buf(),
            line: line_no,
            message: format!(
                "expected {n_fields} tab-separated fields, got {}",
                fields.len()
            ),
        });
    }
    Ok(fields)
}

fn parse_class(field: &str, path: &Path, line: usize) -> Result<FaultClass, DatasetError> {
    let bad = || DatasetError::Manifest {
        path: path.to_path_buf(),
        line,
        message: format!("unknown class code '{field}'"),
    };
    let code: u8 = field.parse().map_err(|_| bad())?;
    FaultClass::from_code(code).ok_or_else(bad)
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    what: &str,
    path: &Path,
    line: usize,
) -> Result<T, DatasetError> {
    field.parse().map_err(|_| DatasetError::Manifest {
        path: path.to_path_buf(),
        line,
        message: format!("bad {what} '{field}'"),
    })
}

/// Reads the manifest of a recording store.
pub fn read_manifest(dir: &Path) -> Result<Vec<RecordingEntry>, DatasetError> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if i == 0 || line.is_empty() {
            continue; // header
        }
        let f = split_line(line, 5, &path, line_no)?;
        check_relpath(f[2], &path, line_no)?;
        out.push(RecordingEntry {
            id: f[0].to_string(),
            class: parse_class(f[1], &path, line_no)?,
            relpath: f[2].to_string(),
            sample_rate_hz: parse_field(f[3], "sample rate", &path, line_no)?,
            n_samples: parse_field(f[4], "sample count", &path, line_no)?,
            manifest_line: line_no,
        });
    }
    Ok(out)
}

/// Parses a recording payload's samples; errors are bare messages so each
/// caller can wrap them with its own file context.
fn read_samples(path: &Path) -> Result<Vec<f64>, String> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "f32" => {
            let bytes = fs::read(path).map_err(|e| e.to_string())?;
            if bytes.len() % 4 != 0 {
                return Err(format!(
                    "{} bytes is not a whole number of f32 samples",
                    bytes.len()
                ));
            }
            Ok(bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect())
        }
        "csv" => {
            let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
            let mut samples = Vec::new();
            for (j, row) in text.lines().enumerate() {
                let row = row.trim();
                if row.is_empty() {
                    continue;
                }
                let x: f64 = row
                    .parse()
                    .map_err(|_| format!("line {}: bad sample '{row}'", j + 1))?;
                samples.push(x);
            }
            Ok(samples)
        }
        other => Err(format!(
            "unsupported payload extension '{other}' (expected f32 or csv)"
        )),
    }
}

/// Loads one recording named by a manifest entry.
pub fn read_recording(dir: &Path, entry: &RecordingEntry) -> Result<RawRecording, DatasetError> {
    let path = dir.join(&entry.relpath);
    let payload_err = |message: String| DatasetError::Payload {
        path: path.clone(),
        manifest_line: entry.manifest_line,
        message,
    };
    let samples = read_samples(&path).map_err(payload_err)?;
    if samples.len() != entry.n_samples {
        return Err(payload_err(format!(
            "holds {} samples, manifest says {}",
            samples.len(),
            entry.n_samples
        )));
    }
    Ok(RawRecording {
        samples,
        sample_rate_hz: entry.sample_rate_hz,
        label: Some(entry.class),
    })
}

/// Loads a standalone recording file with no manifest context: `.f32` holds
/// raw little-endian f32 samples at the given rate, `.csv` one sample per
/// line.
pub fn read_recording_file(
    path: &Path,
    sample_rate_hz: f64,
    label: Option<FaultClass>,
) -> Result<RawRecording, DatasetError> {
    let file_err = |message: String| DatasetError::Recording {
        path: path.to_path_buf(),
        message,
    };
    let samples = read_samples(path).map_err(file_err)?;
    if samples.is_empty() {
        return Err(file_err("holds no samples".to_string()));
    }
    Ok(RawRecording {
        samples,
        sample_rate_hz,
        label,
    })
}

// ─── Covariate store ─────────────────────────────────────────────────────────

/// One line of a covariate index.
#[derive(Debug, Clone)]
pub struct CovariateEntry {
    pub id: String,
    pub class: FaultClass,
    pub relpath: String,
    pub n_channels: usize,
    pub n_steps: usize,
    pub manifest_line: usize,
}

/// Writes labeled covariate matrices into `dir` as `.cov` payloads plus an
/// index.
pub fn write_covariates(
    dir: &Path,
    items: &[(String, PromptSample)],
) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut index = String::from("id\tclass\tpath\tn_channels\tn_steps\n");
    for (id, sample) in items {
        check_id(id)?;
        let m = &sample.covariates;
        let relpath = format!("{id}.cov");
        let mut bytes = Vec::with_capacity(8 + m.values().len() * 4);
        bytes.extend_from_slice(&(m.n_channels() as u32).to_le_bytes());
        bytes.extend_from_slice(&(m.n_steps() as u32).to_le_bytes());
        for &x in m.values() {
            bytes.extend_from_slice(&(x as f32).to_le_bytes());
        }
        let payload = dir.join(&relpath);
        fs::write(&payload, &bytes).map_err(|e| io_err(&payload, e))?;
        index.push_str(&format!(
            "{id}\t{}\t{relpath}\t{}\t{}\n",
            sample.class.code(),
            m.n_channels(),
            m.n_steps()
        ));
    }
    let path = dir.join(COVARIATE_INDEX_NAME);
    fs::write(&path, index).map_err(|e| io_err(&path, e))
}

/// Reads the index of a covariate store.
pub fn read_covariate_index(dir: &Path) -> Result<Vec<CovariateEntry>, DatasetError> {
    let path = dir.join(COVARIATE_INDEX_NAME);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if i == 0 || line.is_empty() {
            continue;
        }
        let f = split_line(line, 5, &path, line_no)?;
        check_relpath(f[2], &path, line_no)?;
        out.push(CovariateEntry {
            id: f[0].to_string(),
            class: parse_class(f[1], &path, line_no)?,
            relpath: f[2].to_string(),
            n_channels: parse_field(f[3], "channel count", &path, line_no)?,
            n_steps: parse_field(f[4], "step count", &path, line_no)?,
            manifest_line: line_no,
        });
    }
    Ok(out)
}

/// Loads one covariate matrix named by an index entry.
pub fn read_covariate(dir: &Path, entry: &CovariateEntry) -> Result<PromptSample, DatasetError> {
    let path = dir.join(&entry.relpath);
    let payload_err = |message: String| DatasetError::Payload {
        path: path.clone(),
        manifest_line: entry.manifest_line,
        message,
    };
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let (n_channels, n_steps, values) = match ext {
        "cov" => {
            let bytes = fs::read(&path).map_err(|e| payload_err(e.to_string()))?;
            if bytes.len() < 8 {
                return Err(payload_err(format!("{} bytes is too short for a header", bytes.len())));
            }
            let n_channels =
                u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
            let n_steps = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
            let want = 8 + n_channels * n_steps * 4;
            if bytes.len() != want {
                return Err(payload_err(format!(
                    "header says {n_channels}x{n_steps}, so {want} bytes expected, got {}",
                    bytes.len()
                )));
            }
            let values: Vec<f64> = bytes[8..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            (n_channels, n_steps, values)
        }
        "csv" => {
            let text = fs::read_to_string(&path).map_err(|e| payload_err(e.to_string()))?;
            let mut values = Vec::new();
            let mut n_channels = 0usize;
            let mut n_steps = 0usize;
            for (j, row) in text.lines().enumerate() {
                let row = row.trim();
                if row.is_empty() {
                    continue;
                }
                let mut this_row = 0usize;
                for field in row.split(',') {
                    let x: f64 = field.trim().parse().map_err(|_| {
                        payload_err(format!("line {}: bad value '{field}'", j + 1))
                    })?;
                    values.push(x);
                    this_row += 1;
                }
                if n_channels == 0 {
                    n_steps = this_row;
                } else if this_row != n_steps {
                    return Err(payload_err(format!(
                        "line {}: {} values, earlier rows had {}",
                        j + 1,
                        this_row,
                        n_steps
                    )));
                }
                n_channels += 1;
            }
            (n_channels, n_steps, values)
        }
        other => {
            return Err(payload_err(format!(
                "unsupported payload extension '{other}' (expected cov or csv)"
            )))
        }
    };
    if n_channels != entry.n_channels || n_steps != entry.n_steps {
        return Err(payload_err(format!(
            "holds {n_channels}x{n_steps} values, index says {}x{}",
            entry.n_channels, entry.n_steps
        )));
    }
    let covariates = CovariateMatrix::new(n_channels, n_steps, values)
        .map_err(|e| payload_err(e.to_string()))?;
    Ok(PromptSample {
        covariates,
        class: entry.class,
    })
}

/// Loads a whole covariate store into a prompt pool, in index order.
pub fn read_covariate_pool(dir: &Path) -> Result<Vec<PromptSample>, DatasetError> {
    let entries = read_covariate_index(dir)?;
    entries
        .iter()
        .map(|entry| read_covariate(dir, entry))
        .collect()
}

// ─── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir()
            .join(format!("dataset-test-{}", std::process::id()))
            .join(name);
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    /// Values that survive the f64 → f32 → f64 round trip exactly.
    fn f32_exact(i: usize) -> f64 {
        (i as f64) / 16.0 - 3.0
    }

    fn recording(class: FaultClass, n: usize) -> RawRecording {
        RawRecording {
            samples: (0..n).map(f32_exact).collect(),
            sample_rate_hz: 48000.0,
            label: Some(class),
        }
    }

    #[test]
    fn recording_store_round_trips() {
        let dir = tmp_dir("rec-roundtrip");
        let items = vec![
            ("normal-0".to_string(), recording(FaultClass::Normal, 32)),
            ("outer-0".to_string(), recording(FaultClass::OuterRing, 48)),
        ];
        write_recordings(&dir, &items).unwrap();
        let entries = read_manifest(&dir).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].id, "normal-0");
        assert_eq!(entries[1].class, FaultClass::OuterRing);
        for (entry, (_, original)) in entries.iter().zip(&items) {
            let back = read_recording(&dir, entry).unwrap();
            assert_eq!(back.samples, original.samples);
            assert_eq!(back.sample_rate_hz, original.sample_rate_hz);
            assert_eq!(back.label, original.label);
        }
    }

    #[test]
    fn csv_recordings_are_readable() {
        let dir = tmp_dir("rec-csv");
        fs::write(dir.join("x.csv"), "0.5\n-1.25\n2.0\n").unwrap();
        fs::write(
            dir.join(MANIFEST_NAME),
            "id\tclass\tpath\tsample_rate_hz\tn_samples\nx\t1\tx.csv\t100\t3\n",
        )
        .unwrap();
        let entries = read_manifest(&dir).unwrap();
        let rec = read_recording(&dir, &entries[0]).unwrap();
        assert_eq!(rec.samples, vec![0.5, -1.25, 2.0]);
        assert_eq!(rec.label, Some(FaultClass::Normal));
    }

    #[test]
    fn missing_payload_names_the_manifest_line() {
        let dir = tmp_dir("rec-missing");
        let items = vec![
            ("a".to_string(), recording(FaultClass::Normal, 8)),
            ("b".to_string(), recording(FaultClass::InnerRing, 8)),
        ];
        write_recordings(&dir, &items).unwrap();
        fs::remove_file(dir.join("b.f32")).unwrap();
        let entries = read_manifest(&dir).unwrap();
        let err = read_recording(&dir, &entries[1]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("manifest line 3"), "{msg}");
        assert!(msg.contains("b.f32"), "{msg}");
    }

    #[test]
    fn malformed_manifest_lines_are_located() {
        let dir = tmp_dir("rec-badline");
        fs::write(
            dir.join(MANIFEST_NAME),
            "id\tclass\tpath\tsample_rate_hz\tn_samples\na\t1\ta.f32\t100\t8\nb\t1\tb.f32\t100\n",
        )
        .unwrap();
        let err = read_manifest(&dir).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("expected 5"), "{msg}");
    }

    #[test]
    fn unknown_class_code_is_rejected() {
        let dir = tmp_dir("rec-badclass");
        fs::write(
            dir.join(MANIFEST_NAME),
            "id\tclass\tpath\tsample_rate_hz\tn_samples\na\t9\ta.f32\t100\t8\n",
        )
        .unwrap();
        let err = read_manifest(&dir).unwrap_err();
        assert!(err.to_string().contains("unknown class code '9'"));
    }

    #[test]
    fn escaping_payload_paths_are_rejected() {
        let dir = tmp_dir("rec-escape");
        fs::write(
            dir.join(MANIFEST_NAME),
            "id\tclass\tpath\tsample_rate_hz\tn_samples\na\t1\t../a.f32\t100\t8\n",
        )
        .unwrap();
        let err = read_manifest(&dir).unwrap_err();
        assert!(err.to_string().contains("leaves the store"));
    }

    #[test]
    fn sample_count_mismatch_is_reported() {
        let dir = tmp_dir("rec-count");
        write_recordings(
            &dir,
            &[("a".to_string(), recording(FaultClass::Normal, 8))],
        )
        .unwrap();
        // Claim 9 samples in the manifest.
        let manifest = fs::read_to_string(dir.join(MANIFEST_NAME))
            .unwrap()
            .replace("\t8\n", "\t9\n");
        fs::write(dir.join(MANIFEST_NAME), manifest).unwrap();
        let entries = read_manifest(&dir).unwrap();
        let err = read_recording(&dir, &entries[0]).unwrap_err();
        assert!(err.to_string().contains("holds 8 samples, manifest says 9"));
    }

    fn covariate_sample(class: FaultClass, base: usize) -> PromptSample {
        let values: Vec<f64> = (0..3 * 4).map(|i| f32_exact(base + i)).collect();
        PromptSample {
            covariates: CovariateMatrix::new(3, 4, values).unwrap(),
            class,
        }
    }

    #[test]
    fn covariate_store_round_trips() {
        let dir = tmp_dir("cov-roundtrip");
        let items = vec![
            ("n-0".to_string(), covariate_sample(FaultClass::Normal, 0)),
            ("s-0".to_string(), covariate_sample(FaultClass::SandBearing, 5)),
        ];
        write_covariates(&dir, &items).unwrap();
        let pool = read_covariate_pool(&dir).unwrap();
        assert_eq!(pool.len(), 2);
        for (back, (_, original)) in pool.iter().zip(&items) {
            assert_eq!(back.class, original.class);
            assert_eq!(back.covariates.values(), original.covariates.values());
            assert_eq!(back.covariates.n_channels(), 3);
            assert_eq!(back.covariates.n_steps(), 4);
        }
    }

    #[test]
    fn csv_covariates_are_readable() {
        let dir = tmp_dir("cov-csv");
        fs::write(dir.join("m.csv"), "1.0,2.0,3.0\n4.0,5.0,6.0\n").unwrap();
        fs::write(
            dir.join(COVARIATE_INDEX_NAME),
            "id\tclass\tpath\tn_channels\tn_steps\nm\t3\tm.csv\t2\t3\n",
        )
        .unwrap();
        let pool = read_covariate_pool(&dir).unwrap();
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].class, FaultClass::SandBearing);
        assert_eq!(
            pool[0].covariates.values(),
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
    }

    #[test]
    fn truncated_covariate_payload_is_located() {
        let dir = tmp_dir("cov-truncated");
        let items = vec![("a".to_string(), covariate_sample(FaultClass::Normal, 0))];
        write_covariates(&dir, &items).unwrap();
        let bytes = fs::read(dir.join("a.cov")).unwrap();
        fs::write(dir.join("a.cov"), &bytes[..bytes.len() - 5]).unwrap();
        let err = read_covariate_pool(&dir).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a.cov"), "{msg}");
        assert!(msg.contains("manifest line 2"), "{msg}");
    }

    #[test]
    fn ragged_csv_covariates_are_rejected() {
        let dir = tmp_dir("cov-ragged");
        fs::write(dir.join("m.csv"), "1.0,2.0,3.0\n4.0,5.0\n").unwrap();
        fs::write(
            dir.join(COVARIATE_INDEX_NAME),
            "id\tclass\tpath\tn_channels\tn_steps\nm\t1\tm.csv\t2\t3\n",
        )
        .unwrap();
        let err = read_covariate_pool(&dir).unwrap_err();
        assert!(err.to_string().contains("earlier rows had 3"));
    }

    #[test]
    fn bad_ids_are_rejected_before_touching_disk() {
        let dir = tmp_dir("bad-id");
        let err = write_recordings(
            &dir,
            &[("../escape".to_string(), recording(FaultClass::Normal, 4))],
        )
        .unwrap_err();
        assert!(err.to_string().contains("../escape"));
        let err = write_recordings(
            &dir,
            &[("".to_string(), recording(FaultClass::Normal, 4))],
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::InvalidArgument(_)));
    }

    #[test]
    fn unlabeled_recordings_cannot_be_written() {
        let dir = tmp_dir("unlabeled");
        let mut rec = recording(FaultClass::Normal, 4);
        rec.label = None;
        let err = write_recordings(&dir, &[("a".to_string(), rec)]).unwrap_err();
        assert!(err.to_string().contains("no class label"));
    }

    #[test]
    fn standalone_recording_file_round_trips() {
        let dir = tmp_dir("standalone");
        let path = dir.join("loose.f32");
        let samples: Vec<f64> = (0..6).map(f32_exact).collect();
        let bytes: Vec<u8> = samples
            .iter()
            .flat_map(|&x| (x as f32).to_le_bytes())
            .collect();
        fs::write(&path, bytes).unwrap();
        let rec = read_recording_file(&path, 8000.0, None).unwrap();
        assert_eq!(rec.samples, samples);
        assert_eq!(rec.sample_rate_hz, 8000.0);
        assert_eq!(rec.label, None);

        let empty = dir.join("empty.csv");
        fs::write(&empty, "").unwrap();
        let err = read_recording_file(&empty, 8000.0, None).unwrap_err();
        assert!(err.to_string().contains("holds no samples"));

        let bad = dir.join("bad.csv");
        fs::write(&bad, "1.0\nnope\n").unwrap();
        let err = read_recording_file(&bad, 8000.0, None).unwrap_err();
        assert!(err.to_string().contains("line 2"), "got: {err}");
    }
}
