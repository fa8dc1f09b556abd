//! Network structure, batches, and the parameter layout they induce.
//!
//! A network is a flat list of layers applied in order, then a scalar loss.
//! Affine layers own all parameters; activations are parameter-free. The
//! canonical text form (see [`NetworkSpec::canonical_text`]) is what gets
//! digested, stored in trajectory files, and parsed back from config files.

mod eval;
mod rescale;

pub use eval::{
    error_rate, forward, grad, grad_with_loss, hvp, kink_margin, loss_total, BatchView,
    Evaluation, LossTotals,
};
pub use rescale::rescale_relu;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::{Manifest, Segment};

/// Row-major dense matrix. Weight matrices are (outputs x inputs); data
/// matrices are (examples x features).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix {}x{} needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the given rows, in the given order.
    pub fn gather(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.cols);
        for (k, &r) in rows.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(r));
        }
        out
    }
}

/// Supervision attached to a batch: class labels or dense target vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Labels { labels: Vec<u32>, classes: usize },
    Values(Matrix),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels { labels, .. } => labels.len(),
            Targets::Values(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gather(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Labels { labels, classes } => Targets::Labels {
                labels: rows.iter().map(|&r| labels[r]).collect(),
                classes: *classes,
            },
            Targets::Values(m) => Targets::Values(m.gather(rows)),
        }
    }
}

/// Inputs plus matching targets; at least one example.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Targets,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Targets) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::EmptyDataset("batch has no examples".into()));
        }
        if inputs.rows() != targets.len() {
            return Err(Error::InvalidArgument(format!(
                "batch has {} inputs but {} targets",
                inputs.rows(),
                targets.len()
            )));
        }
        Ok(Batch { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn view(&self) -> BatchView<'_> {
        BatchView {
            inputs: &self.inputs,
            targets: &self.targets,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Affine {
        inputs: usize,
        outputs: usize,
        bias: bool,
    },
    Sigmoid,
    Relu,
    /// Max over `pieces` consecutive pre-activations per output unit. Ties
    /// resolve to the lowest piece index.
    Maxout {
        pieces: usize,
    },
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    SoftmaxCrossEntropy,
    MeanSquaredError,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::SoftmaxCrossEntropy => "softmax-cross-entropy",
            LossKind::MeanSquaredError => "mean-squared-error",
        }
    }

    pub fn parse(s: &str) -> Result<LossKind> {
        match s {
            "softmax-cross-entropy" => Ok(LossKind::SoftmaxCrossEntropy),
            "mean-squared-error" => Ok(LossKind::MeanSquaredError),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

/// Immutable description of a network: layer list, loss, and i/o widths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    layers: Vec<LayerKind>,
    loss: LossKind,
    input_dim: usize,
    output_dim: usize,
}

impl NetworkSpec {
    /// Validates that widths chain through every layer and that maxout
    /// grouping divides its input evenly.
    pub fn new(
        layers: Vec<LayerKind>,
        loss: LossKind,
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Structure("network has no layers".into()));
        }
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Structure("zero input or output width".into()));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            match *layer {
                LayerKind::Affine {
                    inputs, outputs, ..
                } => {
                    if inputs == 0 || outputs == 0 {
                        return Err(Error::Structure(format!("layer {i}: zero-width affine")));
                    }
                    if inputs != width {
                        return Err(Error::Structure(format!(
                            "layer {i}: affine expects {inputs} inputs but gets {width}"
                        )));
                    }
                    width = outputs;
                }
                LayerKind::Maxout { pieces } => {
                    if pieces < 2 {
                        return Err(Error::Structure(format!(
                            "layer {i}: maxout needs at least 2 pieces, got {pieces}"
                        )));
                    }
                    if width % pieces != 0 {
                        return Err(Error::Structure(format!(
                            "layer {i}: maxout over {pieces} pieces does not divide width {width}"
                        )));
                    }
                    width /= pieces;
                }
                LayerKind::Sigmoid | LayerKind::Relu | LayerKind::Identity => {}
            }
        }
        if width != output_dim {
            return Err(Error::Structure(format!(
                "layers end at width {width} but output width is {output_dim}"
            )));
        }
        Ok(NetworkSpec {
            layers,
            loss,
            input_dim,
            output_dim,
        })
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match *l {
                LayerKind::Affine {
                    inputs,
                    outputs,
                    bias,
                } => inputs * outputs + if bias { outputs } else { 0 },
                _ => 0,
            })
            .sum()
    }

    /// Parameter layout: for each affine layer, a weight segment named
    /// `layer<i>.weight` (outputs x inputs, row-major) and, when present, a
    /// bias segment `layer<i>.bias`.
    pub fn manifest(&self) -> Manifest {
        let mut segments = Vec::new();
        let mut offset = 0usize;
        for (i, layer) in self.layers.iter().enumerate() {
            if let LayerKind::Affine {
                inputs,
                outputs,
                bias,
            } = *layer
            {
                segments.push(Segment {
                    name: format!("layer{i}.weight"),
                    offset,
                    rows: outputs,
                    cols: inputs,
                });
                offset += outputs * inputs;
                if bias {
                    segments.push(Segment {
                        name: format!("layer{i}.bias"),
                        offset,
                        rows: outputs,
                        cols: 1,
                    });
                    offset += outputs;
                }
            }
        }
        Manifest::new(segments).expect("validated spec always yields a contiguous manifest")
    }

    /// Canonical one-per-line text form; the digest is taken over this.
    pub fn canonical_text(&self) -> String {
        let layers: Vec<String> = self.layers.iter().map(layer_token).collect();
        format!(
            "layers = {}\nloss = {}\ninput = {}\noutput = {}\n",
            layers.join(" "),
            self.loss.as_str(),
            self.input_dim,
            self.output_dim
        )
    }

    /// Hex SHA-256 of the canonical text.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_text().as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses the canonical text form back into a spec.
    pub fn from_text(text: &str) -> Result<NetworkSpec> {
        let mut layers = None;
        let mut loss = None;
        let mut input = None;
        let mut output = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "layers" => layers = Some(parse_layer_list(value)?),
                "loss" => loss = Some(LossKind::parse(value)?),
                "input" => input = Some(parse_usize(key, value)?),
                "output" => output = Some(parse_usize(key, value)?),
                other => return Err(Error::Config(format!("unknown model key '{other}'"))),
            }
        }
        let missing = |what: &str| Error::Config(format!("model text is missing '{what}'"));
        NetworkSpec::new(
            layers.ok_or_else(|| missing("layers"))?,
            loss.ok_or_else(|| missing("loss"))?,
            input.ok_or_else(|| missing("input"))?,
            output.ok_or_else(|| missing("output"))?,
        )
    }
}

fn layer_token(layer: &LayerKind) -> String {
    match *layer {
        LayerKind::Affine {
            inputs,
            outputs,
            bias,
        } => {
            if bias {
                format!("affine({inputs},{outputs})")
            } else {
                format!("affine({inputs},{outputs},nobias)")
            }
        }
        LayerKind::Sigmoid => "sigmoid".into(),
        LayerKind::Relu => "relu".into(),
        LayerKind::Maxout { pieces } => format!("maxout({pieces})"),
        LayerKind::Identity => "identity".into(),
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got '{value}'")))
}

/// Parses a whitespace-separated layer list such as
/// `affine(10,64) relu affine(64,2)`.
pub fn parse_layer_list(text: &str) -> Result<Vec<LayerKind>> {
    let mut layers = Vec::new();
    for token in text.split_whitespace() {
        layers.push(parse_layer_token(token)?);
    }
    if layers.is_empty() {
        return Err(Error::Config("layer list is empty".into()));
    }
    Ok(layers)
}

fn parse_layer_token(token: &str) -> Result<LayerKind> {
    let bad = || Error::Config(format!("unrecognised layer '{token}'"));
    if let Some(args) = token.strip_prefix("affine(").and_then(|t| t.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let (inputs, outputs, bias) = match parts.as_slice() {
            [i, o] => (i, o, true),
            [i, o, "nobias"] => (i, o, false),
            _ => return Err(bad()),
        };
        return Ok(LayerKind::Affine {
            inputs: inputs.parse().map_err(|_| bad())?,
            outputs: outputs.parse().map_err(|_| bad())?,
            bias,
        });
    }
    if let Some(k) = token.strip_prefix("maxout(").and_then(|t| t.strip_suffix(')')) {
        return Ok(LayerKind::Maxout {
            pieces: k.trim().parse().map_err(|_| bad())?,
        });
    }
    match token {
        "sigmoid" => Ok(LayerKind::Sigmoid),
        "relu" => Ok(LayerKind::Relu),
        "identity" => Ok(LayerKind::Identity),
        _ => Err(bad()),
    }
}

/// Chain of bias-free affine layers with the given widths, under squared
/// error. `dims = [a, b, c]` produces two matrices (a x b, then b x c); the
/// product of the chain is a single linear map, but the objective over the
/// factors is not convex.
pub fn build_deep_linear_chain(dims: &[usize]) -> Result<NetworkSpec> {
    if dims.len() < 2 {
        return Err(Error::InvalidArgument(
            "linear chain needs at least two widths".into(),
        ));
    }
    let layers = dims
        .windows(2)
        .map(|w| LayerKind::Affine {
            inputs: w[0],
            outputs: w[1],
            bias: false,
        })
        .collect();
    NetworkSpec::new(
        layers,
        LossKind::MeanSquaredError,
        dims[0],
        *dims.last().unwrap(),
    )
}

/// Two bias-free scalar weights in series under squared error. With the
/// single training pair (x, y) = (1, 1) the objective is (1 - w1 w2)^2: a
/// saddle at the origin and a hyperbola of global minima at w2 = 1/w1.
pub fn scalar_factored_spec() -> NetworkSpec {
    build_deep_linear_chain(&[1, 1, 1]).expect("static dims are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_must_chain() {
        let err = NetworkSpec::new(
            vec![
                LayerKind::Affine {
                    inputs: 3,
                    outputs: 4,
                    bias: true,
                },
                LayerKind::Affine {
                    inputs: 5,
                    outputs: 2,
                    bias: true,
                },
            ],
            LossKind::MeanSquaredError,
            3,
            2,
        );
        assert!(matches!(err, Err(Error::Structure(_))));
    }

    #[test]
    fn maxout_needs_two_pieces_and_even_grouping() {
        let one_piece = NetworkSpec::new(
            vec![
                LayerKind::Affine {
                    inputs: 2,
                    outputs: 6,
                    bias: true,
                },
                LayerKind::Maxout { pieces: 1 },
            ],
            LossKind::MeanSquaredError,
            2,
            6,
        );
        assert!(one_piece.is_err());

        let uneven = NetworkSpec::new(
            vec![
                LayerKind::Affine {
                    inputs: 2,
                    outputs: 7,
                    bias: true,
                },
                LayerKind::Maxout { pieces: 2 },
            ],
            LossKind::MeanSquaredError,
            2,
            3,
        );
        assert!(uneven.is_err());

        let ok = NetworkSpec::new(
            vec![
                LayerKind::Affine {
                    inputs: 2,
                    outputs: 6,
                    bias: true,
                },
                LayerKind::Maxout { pieces: 3 },
            ],
            LossKind::MeanSquaredError,
            2,
            2,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn manifest_layout_matches_layer_order() {
        let spec = NetworkSpec::new(
            vec![
                LayerKind::Affine {
                    inputs: 3,
                    outputs: 4,
                    bias: true,
                },
                LayerKind::Relu,
                LayerKind::Affine {
                    inputs: 4,
                    outputs: 2,
                    bias: false,
                },
            ],
            LossKind::SoftmaxCrossEntropy,
            3,
            2,
        )
        .unwrap();
        assert_eq!(spec.param_count(), 3 * 4 + 4 + 4 * 2);
        let m = spec.manifest();
        assert_eq!(m.len(), spec.param_count());
        let names: Vec<&str> = m.segments().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["layer0.weight", "layer0.bias", "layer2.weight"]);
        let w2 = m.segment("layer2.weight").unwrap();
        assert_eq!((w2.rows, w2.cols, w2.offset), (2, 4, 16));
    }

    #[test]
    fn canonical_text_round_trips() {
        let spec = NetworkSpec::new(
            vec![
                LayerKind::Affine {
                    inputs: 10,
                    outputs: 64,
                    bias: true,
                },
                LayerKind::Relu,
                LayerKind::Affine {
                    inputs: 64,
                    outputs: 8,
                    bias: false,
                },
                LayerKind::Maxout { pieces: 4 },
            ],
            LossKind::SoftmaxCrossEntropy,
            10,
            2,
        )
        .unwrap();
        let text = spec.canonical_text();
        let back = NetworkSpec::from_text(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.digest(), spec.digest());
    }

    #[test]
    fn digest_changes_with_any_field() {
        let base = scalar_factored_spec();
        let wider = build_deep_linear_chain(&[1, 2, 1]).unwrap();
        assert_ne!(base.digest(), wider.digest());
        let other_loss = NetworkSpec::new(
            base.layers().to_vec(),
            LossKind::SoftmaxCrossEntropy,
            1,
            1,
        )
        .unwrap();
        assert_ne!(base.digest(), other_loss.digest());
        assert_eq!(base.digest().len(), 64);
    }

    #[test]
    fn deep_chain_has_one_matrix_per_adjacent_pair() {
        let dims = [4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 2];
        let spec = build_deep_linear_chain(&dims).unwrap();
        assert_eq!(spec.layers().len(), 10);
        assert!(spec
            .layers()
            .iter()
            .all(|l| matches!(l, LayerKind::Affine { bias: false, .. })));
        assert_eq!(spec.loss(), LossKind::MeanSquaredError);
        assert_eq!(spec.param_count(), 9 * 16 + 8);
        assert!(build_deep_linear_chain(&[3]).is_err());
    }

    #[test]
    fn batch_rejects_count_mismatch_and_empty() {
        let x = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let bad = Batch::new(
            x.clone(),
            Targets::Labels {
                labels: vec![0],
                classes: 2,
            },
        );
        assert!(bad.is_err());
        let empty = Batch::new(
            Matrix::zeros(0, 1),
            Targets::Labels {
                labels: vec![],
                classes: 2,
            },
        );
        assert!(matches!(empty, Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn gather_reorders_rows() {
        let x = Matrix::from_vec(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let g = x.gather(&[2, 0]);
        assert_eq!(g.row(0), &[4.0, 5.0]);
        assert_eq!(g.row(1), &[0.0, 1.0]);
    }
}
