//! Experiment config files: line-oriented `key = value` pairs grouped under
//! `[section]` headers.
//!
//! ```text
//! [model]
//! layers = affine(10,64) relu affine(64,64) relu affine(64,2)
//! loss = softmax-cross-entropy
//! input = 10
//! output = 2
//!
//! [data]
//! source = two-gaussians
//! count = 1000
//! dim = 10
//! separation = 6
//! seed = 4
//! fractions = 0.8,0.2,0
//! split_seed = 1
//!
//! [train]
//! learning_rate = 0.1
//! momentum = 0.9
//! batch_size = 32
//! max_epochs = 40
//! init_scale = 0.05
//! seed = 7
//!
//! [output]
//! dir = runs/demo
//! ```
//!
//! `[model]` and `[data]` are required. Every `[train]` key is optional;
//! unknown keys anywhere are errors that name the key. Lines starting with
//! `#` are comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use landscape_core::data::DataConfig;
use landscape_core::train::TrainConfig;
use landscape_core::{Error, NetworkSpec, Result};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec: NetworkSpec,
    pub data: DataConfig,
    pub train: TrainConfig,
    /// Half-width of the uniform weight initialisation.
    pub init_scale: f64,
    pub out_dir: Option<PathBuf>,
}

/// Splits the file into named sections, preserving body text. Duplicate
/// sections and content before the first header are errors.
fn split_sections(text: &str) -> Result<BTreeMap<String, String>> {
    let mut sections = BTreeMap::new();
    let mut current: Option<(String, String)> = None;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("malformed section header '{line}'")))?
                .trim()
                .to_string();
            if let Some((prev, body)) = current.take() {
                sections.insert(prev, body);
            }
            if sections.contains_key(&name) {
                return Err(Error::Config(format!("duplicate section '[{name}]'")));
            }
            current = Some((name, String::new()));
            continue;
        }
        match &mut current {
            Some((_, body)) => {
                body.push_str(line);
                body.push('\n');
            }
            None => {
                return Err(Error::Config(format!(
                    "'{line}' appears before any [section] header"
                )))
            }
        }
    }
    if let Some((name, body)) = current {
        sections.insert(name, body);
    }
    Ok(sections)
}

fn parse_kv(section: &str, body: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for line in body.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("[{section}] expected 'key = value', got '{line}'")))?;
        if kv
            .insert(k.trim().to_string(), v.trim().to_string())
            .is_some()
        {
            return Err(Error::Config(format!(
                "[{section}] repeats key '{}'",
                k.trim()
            )));
        }
    }
    Ok(kv)
}

fn parse_train(body: &str) -> Result<(TrainConfig, f64)> {
    let kv = parse_kv("train", body)?;
    let mut config = TrainConfig::default();
    let mut init_scale: f64 = 0.05;
    for (key, value) in &kv {
        let bad_num = || Error::Config(format!("[train] {key}: expected a number, got '{value}'"));
        match key.as_str() {
            "learning_rate" => config.learning_rate = value.parse().map_err(|_| bad_num())?,
            "momentum" => config.momentum = value.parse().map_err(|_| bad_num())?,
            "batch_size" => config.batch_size = value.parse().map_err(|_| bad_num())?,
            "max_epochs" => config.max_epochs = value.parse().map_err(|_| bad_num())?,
            "patience" => config.patience = value.parse().map_err(|_| bad_num())?,
            "snapshot_every" => config.snapshot_every = value.parse().map_err(|_| bad_num())?,
            "seed" => config.seed = value.parse().map_err(|_| bad_num())?,
            "init_scale" => init_scale = value.parse().map_err(|_| bad_num())?,
            other => {
                return Err(Error::Config(format!(
                    "[train] unknown key '{other}' (expected learning_rate, momentum, \
                     batch_size, max_epochs, patience, snapshot_every, seed, or init_scale)"
                )))
            }
        }
    }
    config.validate()?;
    if !(init_scale > 0.0) || !init_scale.is_finite() {
        return Err(Error::Config(format!(
            "[train] init_scale must be positive, got {init_scale}"
        )));
    }
    Ok((config, init_scale))
}

fn parse_output(body: &str) -> Result<PathBuf> {
    let kv = parse_kv("output", body)?;
    for key in kv.keys() {
        if key != "dir" {
            return Err(Error::Config(format!(
                "[output] unknown key '{key}' (expected dir)"
            )));
        }
    }
    kv.get("dir")
        .map(PathBuf::from)
        .ok_or_else(|| Error::Config("[output] is missing 'dir'".into()))
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<ExperimentConfig> {
        let mut sections = split_sections(text)?;
        let model = sections
            .remove("model")
            .ok_or_else(|| Error::Config("config is missing the [model] section".into()))?;
        let data = sections
            .remove("data")
            .ok_or_else(|| Error::Config("config is missing the [data] section".into()))?;
        let train = sections.remove("train").unwrap_or_default();
        let output = sections.remove("output");
        if let Some(stray) = sections.keys().next() {
            return Err(Error::Config(format!("unknown section '[{stray}]'")));
        }
        let spec = NetworkSpec::from_text(&model)?;
        let data = DataConfig::from_lines(&data)?;
        let (train, init_scale) = parse_train(&train)?;
        let out_dir = output.map(|body| parse_output(&body)).transpose()?;
        Ok(ExperimentConfig {
            spec,
            data,
            train,
            init_scale,
            out_dir,
        })
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use landscape_core::data::SourceConfig;

    const GOOD: &str = "\
# demo experiment
[model]
layers = affine(10,64) relu affine(64,2)
loss = softmax-cross-entropy
input = 10
output = 2

[data]
source = two-gaussians
count = 200
dim = 10
separation = 6
seed = 4
fractions = 0.8,0.2,0
split_seed = 1

[train]
learning_rate = 0.2
momentum = 0.9
max_epochs = 5
init_scale = 0.1
seed = 7

[output]
dir = runs/demo
";

    #[test]
    fn full_config_parses() {
        let config = ExperimentConfig::from_text(GOOD).unwrap();
        assert_eq!(config.spec.param_count(), 10 * 64 + 64 + 64 * 2 + 2);
        assert!(matches!(
            config.data.source,
            SourceConfig::TwoGaussians { count: 200, .. }
        ));
        assert_eq!(config.train.learning_rate, 0.2);
        assert_eq!(config.train.momentum, 0.9);
        assert_eq!(config.train.max_epochs, 5);
        // Untouched fields keep their defaults.
        assert_eq!(config.train.batch_size, 32);
        assert_eq!(config.init_scale, 0.1);
        assert_eq!(config.out_dir.as_deref(), Some(Path::new("runs/demo")));
    }

    #[test]
    fn train_and_output_sections_are_optional() {
        let trimmed: String = GOOD
            .split("[train]")
            .next()
            .unwrap()
            .to_string();
        let config = ExperimentConfig::from_text(&trimmed).unwrap();
        assert_eq!(config.train.learning_rate, 0.1);
        assert_eq!(config.init_scale, 0.05);
        assert!(config.out_dir.is_none());
    }

    #[test]
    fn errors_name_the_offending_key() {
        let bad = GOOD.replace("momentum", "momentun");
        let err = ExperimentConfig::from_text(&bad).unwrap_err().to_string();
        assert!(err.contains("momentun"), "{err}");

        let bad = GOOD.replace("[output]", "[outputs]");
        let err = ExperimentConfig::from_text(&bad).unwrap_err().to_string();
        assert!(err.contains("outputs"), "{err}");

        let bad = GOOD.replace("learning_rate = 0.2", "learning_rate = fast");
        let err = ExperimentConfig::from_text(&bad).unwrap_err().to_string();
        assert!(err.contains("learning_rate") && err.contains("fast"), "{err}");
    }

    #[test]
    fn structural_mistakes_are_rejected() {
        assert!(ExperimentConfig::from_text("x = 1\n").is_err());
        let doubled = format!("{GOOD}\n[train]\nseed = 1\n");
        let err = ExperimentConfig::from_text(&doubled).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        let missing_data = GOOD.replace("[data]", "[dataset]");
        assert!(ExperimentConfig::from_text(&missing_data).is_err());
        let repeated = GOOD.replace("momentum = 0.9", "momentum = 0.9\nmomentum = 0.5");
        let err = ExperimentConfig::from_text(&repeated).unwrap_err().to_string();
        assert!(err.contains("repeats"), "{err}");
    }

    #[test]
    fn invalid_train_values_fail_validation() {
        let bad = GOOD.replace("momentum = 0.9", "momentum = 1.5");
        assert!(ExperimentConfig::from_text(&bad).is_err());
        let bad = GOOD.replace("init_scale = 0.1", "init_scale = 0");
        assert!(ExperimentConfig::from_text(&bad).is_err());
    }
}
