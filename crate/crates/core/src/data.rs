//! Dataset containers, synthetic generators, and deterministic splitting.
//!
//! A `DataConfig` captures everything needed to rebuild the exact same
//! splits later (generator arguments, fractions, seeds); trajectory files
//! embed one so probe commands can re-create the data a network was trained
//! on without shipping the data itself.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::linalg::{permutation, seeded_stream, standard_normal};
use crate::model::{Batch, BatchView, Matrix, Targets};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Valid,
    Test,
}

/// Examples plus targets plus which split they belong to. Never empty.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Targets,
    pub tag: SplitTag,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Targets, tag: SplitTag) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::EmptyDataset("dataset has no examples".into()));
        }
        if inputs.rows() != targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} targets",
                inputs.rows(),
                targets.len()
            )));
        }
        Ok(Dataset {
            inputs,
            targets,
            tag,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn view(&self) -> BatchView<'_> {
        BatchView {
            inputs: &self.inputs,
            targets: &self.targets,
        }
    }

    /// Copies the given rows out into a batch, in the given order.
    pub fn gather(&self, rows: &[usize]) -> Result<Batch> {
        Batch::new(self.inputs.gather(rows), self.targets.gather(rows))
    }
}

/// Train split plus optional validation and test splits.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Option<Dataset>,
    pub test: Option<Dataset>,
}

impl Splits {
    pub fn from_whole(dataset: Dataset) -> Splits {
        Splits {
            train: Dataset {
                tag: SplitTag::Train,
                ..dataset
            },
            valid: None,
            test: None,
        }
    }
}

/// Two spherical Gaussian classes in `dim` dimensions, centred at
/// `-(separation/2)` and `+(separation/2)` along the all-ones direction.
/// The first `n / 2` examples are class 0, the rest class 1.
pub fn gen_two_gaussians(n: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least one example per class, got n = {n}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if !(separation >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "separation must be non-negative, got {separation}"
        )));
    }
    let mut rng = seeded_stream(seed, 0);
    let half = separation / 2.0;
    let n0 = n / 2;
    let mut inputs = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for e in 0..n {
        let (center, label) = if e < n0 { (-half, 0) } else { (half, 1) };
        let row = inputs.row_mut(e);
        for v in row.iter_mut() {
            *v = center + standard_normal(&mut rng);
        }
        labels.push(label);
    }
    Dataset::new(inputs, Targets::Labels { labels, classes: 2 }, SplitTag::Train)
}

/// The one-example regression problem x = 1, y = 1. Under squared error a
/// two-weight linear chain on this data has objective (1 - w1 w2)^2.
pub fn gen_scalar_regression() -> Dataset {
    Dataset::new(
        Matrix::from_vec(1, 1, vec![1.0]).expect("static shape"),
        Targets::Values(Matrix::from_vec(1, 1, vec![1.0]).expect("static shape")),
        SplitTag::Train,
    )
    .expect("one example is never empty")
}

/// Splits a dataset into train/valid/test by the given fractions.
///
/// Fractions must be non-negative and sum to 1 within 1e-9. Sizes come from
/// largest-remainder rounding, so they always sum to the dataset size; the
/// assignment permutation is drawn from the seed, and examples keep the
/// permuted order inside each split. Fractions that round to zero produce
/// `None` splits; a zero-sized train split is an error.
pub fn split(dataset: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<Splits> {
    let fs = [fractions.0, fractions.1, fractions.2];
    for f in fs {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "split fraction {f} is outside [0, 1]"
            )));
        }
    }
    let total: f64 = fs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions sum to {total}, expected 1"
        )));
    }
    let n = dataset.len();
    let mut sizes = [0usize; 3];
    let mut remainders = [(0.0f64, 0usize); 3];
    let mut assigned = 0usize;
    for i in 0..3 {
        let exact = fs[i] * n as f64;
        sizes[i] = exact.floor() as usize;
        remainders[i] = (exact - exact.floor(), i);
        assigned += sizes[i];
    }
    // Hand out the leftover examples to the largest remainders; ties go to
    // the earlier split so the outcome never depends on sort stability.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..(n - assigned) {
        sizes[remainders[k].1] += 1;
    }
    if sizes[0] == 0 {
        return Err(Error::EmptyDataset(
            "train fraction rounds to zero examples".into(),
        ));
    }

    let mut rng = seeded_stream(seed, 0);
    let perm = permutation(&mut rng, n);
    let mut start = 0usize;
    let mut parts: Vec<Option<Dataset>> = Vec::with_capacity(3);
    for (i, &size) in sizes.iter().enumerate() {
        if size == 0 {
            parts.push(None);
            start += size;
            continue;
        }
        let rows = &perm[start..start + size];
        start += size;
        let tag = [SplitTag::Train, SplitTag::Valid, SplitTag::Test][i];
        parts.push(Some(Dataset::new(
            dataset.inputs.gather(rows),
            dataset.targets.gather(rows),
            tag,
        )?));
    }
    let test = parts.pop().unwrap();
    let valid = parts.pop().unwrap();
    let train = parts.pop().unwrap().expect("train size checked above");
    Ok(Splits { train, valid, test })
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceConfig {
    TwoGaussians {
        count: usize,
        dim: usize,
        separation: f64,
        seed: u64,
    },
    ScalarRegression,
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

/// A dataset source plus how to split it. Serialises to plain key = value
/// lines and back, bit-exactly for the float fields.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: SourceConfig,
    pub fractions: (f64, f64, f64),
    pub split_seed: u64,
}

impl DataConfig {
    pub fn build(&self) -> Result<Splits> {
        let whole = match &self.source {
            SourceConfig::TwoGaussians {
                count,
                dim,
                separation,
                seed,
            } => gen_two_gaussians(*count, *dim, *separation, *seed)?,
            SourceConfig::ScalarRegression => gen_scalar_regression(),
            SourceConfig::Idx { images, labels } => crate::idx::load_idx(images, labels)?,
        };
        if self.fractions == (1.0, 0.0, 0.0) {
            return Ok(Splits::from_whole(whole));
        }
        split(&whole, self.fractions, self.split_seed)
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        match &self.source {
            SourceConfig::TwoGaussians {
                count,
                dim,
                separation,
                seed,
            } => {
                out.push_str("source = two-gaussians\n");
                out.push_str(&format!("count = {count}\n"));
                out.push_str(&format!("dim = {dim}\n"));
                out.push_str(&format!("separation = {separation}\n"));
                out.push_str(&format!("seed = {seed}\n"));
            }
            SourceConfig::ScalarRegression => out.push_str("source = scalar-regression\n"),
            SourceConfig::Idx { images, labels } => {
                out.push_str("source = idx\n");
                out.push_str(&format!("images = {}\n", images.display()));
                out.push_str(&format!("labels = {}\n", labels.display()));
            }
        }
        out.push_str(&format!(
            "fractions = {},{},{}\n",
            self.fractions.0, self.fractions.1, self.fractions.2
        ));
        out.push_str(&format!("split_seed = {}\n", self.split_seed));
        out
    }

    pub fn from_lines(text: &str) -> Result<DataConfig> {
        let mut kv = std::collections::BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected 'key = value', got '{line}'")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| {
            kv.get(key)
                .cloned()
                .ok_or_else(|| Error::Config(format!("data config is missing '{key}'")))
        };
        let parse_f64 = |key: &str, v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: expected a number, got '{v}'")))
        };
        let parse_u64 = |key: &str, v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got '{v}'")))
        };
        let source = match get("source")?.as_str() {
            "two-gaussians" => SourceConfig::TwoGaussians {
                count: parse_u64("count", &get("count")?)? as usize,
                dim: parse_u64("dim", &get("dim")?)? as usize,
                separation: parse_f64("separation", &get("separation")?)?,
                seed: parse_u64("seed", &get("seed")?)?,
            },
            "scalar-regression" => SourceConfig::ScalarRegression,
            "idx" => SourceConfig::Idx {
                images: PathBuf::from(get("images")?),
                labels: PathBuf::from(get("labels")?),
            },
            other => return Err(Error::Config(format!("unknown data source '{other}'"))),
        };
        let fr = get("fractions")?;
        let parts: Vec<&str> = fr.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "fractions: expected three comma-separated numbers, got '{fr}'"
            )));
        }
        let fractions = (
            parse_f64("fractions", parts[0])?,
            parse_f64("fractions", parts[1])?,
            parse_f64("fractions", parts[2])?,
        );
        Ok(DataConfig {
            source,
            fractions,
            split_seed: parse_u64("split_seed", &get("split_seed")?)?,
        })
    }
}
