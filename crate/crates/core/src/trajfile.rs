//! On-disk trajectory format, version 1.
//!
//! Layout:
//!
//! ```text
//! LPTRAJ1\n                      magic + format version
//! digest = <64 hex chars>\n      SHA-256 of the canonical model text
//! param_count = P\n
//! snapshot_count = S\n
//! solution_index = k\n
//! snapshot_epochs = e0,e1,...\n
//! train_objective = j0,j1,...\n  one entry per epoch, 0 included
//! valid_objective = ...\n        omitted when there is no validation split
//! train.* = ...\n                the training configuration
//! data.* = ...\n                 the data configuration
//! [model]\n
//! <canonical model text>
//! [payload]\n
//! S * P little-endian f64        snapshots in epoch order
//! u64 little-endian              payload byte length (S * P * 8), a footer
//!                                that catches silent truncation
//! ```
//!
//! Floats in the header are written with Rust's shortest round-trip
//! formatting, so save followed by load reproduces the record bit for bit.

use std::path::Path;

use crate::data::DataConfig;
use crate::error::{Error, Result};
use crate::model::NetworkSpec;
use crate::params::ParamVector;
use crate::train::{Snapshot, TrainConfig, TrajectoryRecord};

const MAGIC: &str = "LPTRAJ";
const VERSION: &str = "1";

pub fn save_trajectory(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push_str(VERSION);
    header.push('\n');
    header.push_str(&format!("digest = {}\n", record.spec_digest()));
    header.push_str(&format!("param_count = {}\n", record.initial().len()));
    header.push_str(&format!("snapshot_count = {}\n", record.snapshots().len()));
    header.push_str(&format!("solution_index = {}\n", record.solution_index()));
    let epochs: Vec<String> = record
        .snapshots()
        .iter()
        .map(|s| s.epoch.to_string())
        .collect();
    header.push_str(&format!("snapshot_epochs = {}\n", epochs.join(",")));
    header.push_str(&format!(
        "train_objective = {}\n",
        join_floats(record.train_objective())
    ));
    if let Some(valid) = record.valid_objective() {
        header.push_str(&format!("valid_objective = {}\n", join_floats(valid)));
    }
    let c = record.config();
    header.push_str(&format!("train.learning_rate = {}\n", c.learning_rate));
    header.push_str(&format!("train.momentum = {}\n", c.momentum));
    header.push_str(&format!("train.batch_size = {}\n", c.batch_size));
    header.push_str(&format!("train.max_epochs = {}\n", c.max_epochs));
    header.push_str(&format!("train.patience = {}\n", c.patience));
    header.push_str(&format!("train.snapshot_every = {}\n", c.snapshot_every));
    header.push_str(&format!("train.seed = {}\n", c.seed));
    for line in record.data().to_lines().lines() {
        header.push_str(&format!("data.{line}\n"));
    }
    header.push_str("[model]\n");
    header.push_str(&record.spec().canonical_text());
    header.push_str("[payload]\n");

    let payload_len = record.snapshots().len() * record.initial().len() * 8;
    let mut bytes = Vec::with_capacity(header.len() + payload_len + 8);
    bytes.extend_from_slice(header.as_bytes());
    for snapshot in record.snapshots() {
        for &v in snapshot.params.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes.extend_from_slice(&(payload_len as u64).to_le_bytes());
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_trajectory(path: &Path) -> Result<TrajectoryRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = |message: String| Error::FileFormat {
        path: path.to_path_buf(),
        message,
    };
    let truncated = |message: String| Error::Truncated {
        path: path.to_path_buf(),
        message,
    };

    let first_newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| truncated("no newline after the magic".into()))?;
    let magic_line = std::str::from_utf8(&bytes[..first_newline])
        .map_err(|_| format("magic line is not text".into()))?;
    if !magic_line.starts_with(MAGIC) {
        return Err(format(format!(
            "not a trajectory file (starts with '{magic_line}')"
        )));
    }
    let version = &magic_line[MAGIC.len()..];
    if version != VERSION {
        return Err(Error::FileVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
            expected: VERSION.to_string(),
        });
    }

    let marker = b"\n[payload]\n";
    let marker_pos = find(&bytes, marker)
        .ok_or_else(|| truncated("payload marker never appears".into()))?;
    let header = std::str::from_utf8(&bytes[first_newline + 1..marker_pos])
        .map_err(|_| format("header is not valid utf-8".into()))?;
    let payload = &bytes[marker_pos + marker.len()..];

    // Header splits into key = value lines and the model block.
    let (kv_text, model_text) = match header.split_once("[model]\n") {
        Some(pair) => pair,
        None => return Err(format("missing [model] section".into())),
    };
    let mut digest = None;
    let mut param_count = None;
    let mut snapshot_count = None;
    let mut solution_index = None;
    let mut snapshot_epochs = None;
    let mut train_objective = None;
    let mut valid_objective = None;
    let mut train_lines = Vec::new();
    let mut data_lines = Vec::new();
    for line in kv_text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("train.") {
            train_lines.push(rest.to_string());
            continue;
        }
        if let Some(rest) = line.strip_prefix("data.") {
            data_lines.push(rest.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format(format!("expected 'key = value', got '{line}'")))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "digest" => digest = Some(v.to_string()),
            "param_count" => param_count = Some(parse_usize_field(path, k, v)?),
            "snapshot_count" => snapshot_count = Some(parse_usize_field(path, k, v)?),
            "solution_index" => solution_index = Some(parse_usize_field(path, k, v)?),
            "snapshot_epochs" => snapshot_epochs = Some(parse_usize_list(path, k, v)?),
            "train_objective" => train_objective = Some(parse_float_list(path, k, v)?),
            "valid_objective" => valid_objective = Some(parse_float_list(path, k, v)?),
            other => return Err(format(format!("unknown header field '{other}'"))),
        }
    }
    let missing = |what: &str| format(format!("header is missing '{what}'"));
    let digest = digest.ok_or_else(|| missing("digest"))?;
    let param_count = param_count.ok_or_else(|| missing("param_count"))?;
    let snapshot_count = snapshot_count.ok_or_else(|| missing("snapshot_count"))?;
    let solution_index = solution_index.ok_or_else(|| missing("solution_index"))?;
    let snapshot_epochs = snapshot_epochs.ok_or_else(|| missing("snapshot_epochs"))?;
    let train_objective = train_objective.ok_or_else(|| missing("train_objective"))?;

    let spec = NetworkSpec::from_text(model_text)?;
    if spec.digest() != digest {
        return Err(Error::DigestMismatch(digest, spec.digest()));
    }
    if spec.param_count() != param_count {
        return Err(format(format!(
            "param_count {} does not match the model ({})",
            param_count,
            spec.param_count()
        )));
    }
    if snapshot_epochs.len() != snapshot_count {
        return Err(format(format!(
            "{} snapshot epochs for snapshot_count {}",
            snapshot_epochs.len(),
            snapshot_count
        )));
    }
    let config = parse_train_config(path, &train_lines)?;
    let data = DataConfig::from_lines(&data_lines.join("\n"))?;

    let expected_payload = snapshot_count * param_count * 8;
    if payload.len() < expected_payload + 8 {
        return Err(truncated(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            expected_payload + 8
        )));
    }
    if payload.len() > expected_payload + 8 {
        return Err(format(format!(
            "{} trailing bytes after the footer",
            payload.len() - expected_payload - 8
        )));
    }
    let footer = u64::from_le_bytes(payload[expected_payload..].try_into().unwrap());
    if footer != expected_payload as u64 {
        return Err(truncated(format!(
            "footer says {footer} payload bytes, header implies {expected_payload}"
        )));
    }

    let manifest = spec.manifest();
    let mut snapshots = Vec::with_capacity(snapshot_count);
    for (s, &epoch) in snapshot_epochs.iter().enumerate() {
        let base = s * param_count * 8;
        let values: Vec<f64> = (0..param_count)
            .map(|i| {
                let at = base + i * 8;
                f64::from_le_bytes(payload[at..at + 8].try_into().unwrap())
            })
            .collect();
        snapshots.push(Snapshot {
            epoch,
            params: ParamVector::from_values(manifest.clone(), values)?,
        });
    }

    TrajectoryRecord::new(
        spec,
        data,
        config,
        snapshots,
        solution_index,
        train_objective,
        valid_objective,
    )
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|w| w == needle)
}

fn parse_usize_field(path: &Path, key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::FileFormat {
        path: path.to_path_buf(),
        message: format!("{key}: expected an integer, got '{v}'"),
    })
}

fn parse_usize_list(path: &Path, key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|part| parse_usize_field(path, key, part.trim()))
        .collect()
}

fn parse_float_list(path: &Path, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| Error::FileFormat {
                path: path.to_path_buf(),
                message: format!("{key}: expected a number, got '{part}'"),
            })
        })
        .collect()
}

fn parse_train_config(path: &Path, lines: &[String]) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    let mut seen = std::collections::BTreeSet::new();
    for line in lines {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::FileFormat {
            path: path.to_path_buf(),
            message: format!("expected 'key = value', got 'train.{line}'"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        seen.insert(k.to_string());
        let bad_num = || Error::FileFormat {
            path: path.to_path_buf(),
            message: format!("train.{k}: cannot parse '{v}'"),
        };
        match k {
            "learning_rate" => config.learning_rate = v.parse().map_err(|_| bad_num())?,
            "momentum" => config.momentum = v.parse().map_err(|_| bad_num())?,
            "batch_size" => config.batch_size = v.parse().map_err(|_| bad_num())?,
            "max_epochs" => config.max_epochs = v.parse().map_err(|_| bad_num())?,
            "patience" => config.patience = v.parse().map_err(|_| bad_num())?,
            "snapshot_every" => config.snapshot_every = v.parse().map_err(|_| bad_num())?,
            "seed" => config.seed = v.parse().map_err(|_| bad_num())?,
            other => {
                return Err(Error::FileFormat {
                    path: path.to_path_buf(),
                    message: format!("unknown train field '{other}'"),
                })
            }
        }
    }
    for required in [
        "learning_rate",
        "momentum",
        "batch_size",
        "max_epochs",
        "patience",
        "snapshot_every",
        "seed",
    ] {
        if !seen.contains(required) {
            return Err(Error::FileFormat {
                path: path.to_path_buf(),
                message: format!("header is missing 'train.{required}'"),
            });
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_two_gaussians, split, SourceConfig};
    use crate::model::{LayerKind, LossKind};
    use crate::train::{init_params, sgd_train};

    fn small_record() -> TrajectoryRecord {
        let ds = gen_two_gaussians(40, 3, 2.5, 4).unwrap();
        let splits = split(&ds, (0.75, 0.25, 0.0), 9).unwrap();
        let data = DataConfig {
            source: SourceConfig::TwoGaussians { count: 40, dim: 3, separation: 2.5, seed: 4 },
            fractions: (0.75, 0.25, 0.0),
            split_seed: 9,
        };
        let spec = NetworkSpec::new(
            vec![
                LayerKind::Affine { inputs: 3, outputs: 5, bias: true },
                LayerKind::Relu,
                LayerKind::Affine { inputs: 5, outputs: 2, bias: true },
            ],
            LossKind::SoftmaxCrossEntropy,
            3,
            2,
        )
        .unwrap();
        let initial = init_params(&spec, 0.05, 2).unwrap();
        let config = TrainConfig {
            learning_rate: 0.3,
            momentum: 0.9,
            batch_size: 10,
            max_epochs: 7,
            ..TrainConfig::default()
        };
        sgd_train(&spec, &initial, &splits, &data, &config).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let record = small_record();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.lptraj");
        save_trajectory(&record, &path).unwrap();
        let back = load_trajectory(&path).unwrap();

        assert_eq!(back.spec(), record.spec());
        assert_eq!(back.spec_digest(), record.spec_digest());
        assert_eq!(back.data(), record.data());
        assert_eq!(back.config(), record.config());
        assert_eq!(back.solution_index(), record.solution_index());
        assert_eq!(back.train_objective(), record.train_objective());
        assert_eq!(back.valid_objective(), record.valid_objective());
        assert_eq!(back.snapshots().len(), record.snapshots().len());
        for (a, b) in back.snapshots().iter().zip(record.snapshots()) {
            assert_eq!(a.epoch, b.epoch);
            assert_eq!(a.params.values(), b.params.values());
        }

        // Saving the loaded record reproduces the same bytes.
        let path2 = dir.path().join("again.lptraj");
        save_trajectory(&back, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.lptraj");
        std::fs::write(&path, b"HELLO1\nnothing here\n").unwrap();
        assert!(matches!(
            load_trajectory(&path),
            Err(Error::FileFormat { .. })
        ));
    }

    #[test]
    fn future_version_is_reported_as_version_error() {
        let record = small_record();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.lptraj");
        save_trajectory(&record, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[6] = b'9';
        std::fs::write(&path, &bytes).unwrap();
        match load_trajectory(&path) {
            Err(Error::FileVersion { found, expected, .. }) => {
                assert_eq!(found, "9");
                assert_eq!(expected, "1");
            }
            other => panic!("expected a version error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_detected_by_the_footer() {
        let record = small_record();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.lptraj");
        save_trajectory(&record, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [bytes.len() - 1, bytes.len() - 9, bytes.len() / 2] {
            let path_cut = dir.path().join(format!("cut{cut}.lptraj"));
            std::fs::write(&path_cut, &bytes[..cut]).unwrap();
            assert!(
                matches!(load_trajectory(&path_cut), Err(Error::Truncated { .. })),
                "cut at {cut} was not reported as truncation"
            );
        }
    }

    #[test]
    fn tampered_model_text_fails_the_digest_check() {
        let record = small_record();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.lptraj");
        save_trajectory(&record, &path).unwrap();
        let text = std::fs::read(&path).unwrap();
        // Swap the loss in the model block without touching the digest line;
        // the padded replacement keeps the header byte length unchanged.
        let pos = find(&text, b"softmax-cross-entropy").unwrap();
        let mut tampered = text;
        tampered.splice(
            pos..pos + b"softmax-cross-entropy".len(),
            (*b"mean-squared-error   ").iter().copied(),
        );
        std::fs::write(&path, &tampered).unwrap();
        match load_trajectory(&path) {
            Err(Error::DigestMismatch(_, _)) => {}
            other => panic!("expected digest mismatch, got {other:?}"),
        }
    }
}
