//! Forward evaluation, batch losses, gradients, and Hessian-vector products.
//!
//! Examples are always processed in ascending index order and every reduction
//! is a plain left-to-right fold, so results are bit-stable across runs. Per
//! -example losses:
//!
//! * squared error: sum over output units of (output - target)^2, no halving,
//!   no averaging over units; label targets are treated as one-hot vectors;
//! * softmax cross-entropy: logsumexp(z) - z[label], computed stably by
//!   subtracting the max logit. Outputs of the network are the raw logits.
//!
//! The batch gradient is the gradient of the *summed* batch loss. Hessian
//! -vector products are central differences of that gradient along the
//! requested direction.

use crate::error::{Error, Result};
use crate::model::{LayerKind, LossKind, Matrix, NetworkSpec, Targets};
use crate::params::ParamVector;

/// Borrowed inputs + targets. Both `Batch` and `data::Dataset` produce one.
#[derive(Clone, Copy)]
pub struct BatchView<'a> {
    pub inputs: &'a Matrix,
    pub targets: &'a Targets,
}

pub struct Evaluation {
    /// Final-layer activations, one row per example (logits for
    /// softmax-cross-entropy networks).
    pub outputs: Matrix,
    /// Per-example loss, same order as the inputs.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTotals {
    pub sum: f64,
    pub mean: f64,
}

struct AffineSlot {
    w: usize,
    b: Option<usize>,
    inputs: usize,
    outputs: usize,
}

struct Plan {
    slots: Vec<Option<AffineSlot>>,
    /// widths[0] is the input width; widths[l + 1] the output width of layer l.
    widths: Vec<usize>,
}

fn plan(spec: &NetworkSpec) -> Plan {
    let mut slots = Vec::with_capacity(spec.layers().len());
    let mut widths = Vec::with_capacity(spec.layers().len() + 1);
    widths.push(spec.input_dim());
    let mut offset = 0usize;
    let mut width = spec.input_dim();
    for layer in spec.layers() {
        match *layer {
            LayerKind::Affine {
                inputs,
                outputs,
                bias,
            } => {
                let w = offset;
                offset += inputs * outputs;
                let b = bias.then(|| {
                    let b = offset;
                    offset += outputs;
                    b
                });
                slots.push(Some(AffineSlot {
                    w,
                    b,
                    inputs,
                    outputs,
                }));
                width = outputs;
            }
            LayerKind::Maxout { pieces } => {
                slots.push(None);
                width /= pieces;
            }
            _ => slots.push(None),
        }
        widths.push(width);
    }
    Plan { slots, widths }
}

struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    /// Winning piece per unit, filled for maxout layers during the forward
    /// pass and reused by the backward pass.
    winners: Vec<Vec<usize>>,
}

impl Scratch {
    fn new(spec: &NetworkSpec, plan: &Plan) -> Self {
        let acts: Vec<Vec<f64>> = plan.widths.iter().map(|&w| vec![0.0; w]).collect();
        let deltas = acts.clone();
        let winners = spec
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| match layer {
                LayerKind::Maxout { .. } => vec![0usize; plan.widths[l + 1]],
                _ => Vec::new(),
            })
            .collect();
        Scratch {
            acts,
            deltas,
            winners,
        }
    }
}

fn check(spec: &NetworkSpec, params: &ParamVector, view: BatchView<'_>) -> Result<()> {
    if !params.manifest().same_layout(&spec.manifest()) {
        return Err(Error::ManifestMismatch(
            "parameters were built for a different network".into(),
        ));
    }
    if view.inputs.rows() == 0 {
        return Err(Error::EmptyDataset("no examples to evaluate".into()));
    }
    if view.inputs.cols() != spec.input_dim() {
        return Err(Error::Structure(format!(
            "inputs have width {} but the network expects {}",
            view.inputs.cols(),
            spec.input_dim()
        )));
    }
    if view.inputs.rows() != view.targets.len() {
        return Err(Error::Structure(format!(
            "{} inputs but {} targets",
            view.inputs.rows(),
            view.targets.len()
        )));
    }
    match view.targets {
        Targets::Labels { labels, .. } => {
            if let Some(&bad) = labels.iter().find(|&&l| l as usize >= spec.output_dim()) {
                return Err(Error::Structure(format!(
                    "label {bad} out of range for {} outputs",
                    spec.output_dim()
                )));
            }
        }
        Targets::Values(m) => {
            if spec.loss() == LossKind::SoftmaxCrossEntropy {
                return Err(Error::Structure(
                    "softmax-cross-entropy requires label targets".into(),
                ));
            }
            if m.cols() != spec.output_dim() {
                return Err(Error::Structure(format!(
                    "target width {} does not match {} outputs",
                    m.cols(),
                    spec.output_dim()
                )));
            }
        }
    }
    Ok(())
}

fn forward_example(spec: &NetworkSpec, plan: &Plan, values: &[f64], x: &[f64], s: &mut Scratch) {
    s.acts[0].copy_from_slice(x);
    for (l, layer) in spec.layers().iter().enumerate() {
        let (head, tail) = s.acts.split_at_mut(l + 1);
        let input = &head[l];
        let out = &mut tail[0];
        match *layer {
            LayerKind::Affine { .. } => {
                let slot = plan.slots[l].as_ref().unwrap();
                for o in 0..slot.outputs {
                    let mut acc = slot.b.map_or(0.0, |b| values[b + o]);
                    let row = &values[slot.w + o * slot.inputs..slot.w + (o + 1) * slot.inputs];
                    for i in 0..slot.inputs {
                        acc += row[i] * input[i];
                    }
                    out[o] = acc;
                }
            }
            LayerKind::Sigmoid => {
                for i in 0..input.len() {
                    let z = input[i];
                    out[i] = if z >= 0.0 {
                        1.0 / (1.0 + (-z).exp())
                    } else {
                        let e = z.exp();
                        e / (1.0 + e)
                    };
                }
            }
            LayerKind::Relu => {
                for i in 0..input.len() {
                    out[i] = input[i].max(0.0);
                }
            }
            LayerKind::Maxout { pieces } => {
                let winners = &mut s.winners[l];
                for u in 0..out.len() {
                    let base = u * pieces;
                    let mut best = input[base];
                    let mut win = 0usize;
                    for p in 1..pieces {
                        // Strict comparison keeps the lowest piece on ties.
                        if input[base + p] > best {
                            best = input[base + p];
                            win = p;
                        }
                    }
                    out[u] = best;
                    winners[u] = win;
                }
            }
            LayerKind::Identity => out.copy_from_slice(input),
        }
    }
}

fn target_value(targets: &Targets, example: usize, unit: usize) -> f64 {
    match targets {
        Targets::Labels { labels, .. } => {
            if labels[example] as usize == unit {
                1.0
            } else {
                0.0
            }
        }
        Targets::Values(m) => m.row(example)[unit],
    }
}

fn loss_example(spec: &NetworkSpec, targets: &Targets, example: usize, out: &[f64]) -> f64 {
    match spec.loss() {
        LossKind::MeanSquaredError => {
            let mut acc = 0.0;
            for (j, &o) in out.iter().enumerate() {
                let d = o - target_value(targets, example, j);
                acc += d * d;
            }
            acc
        }
        LossKind::SoftmaxCrossEntropy => {
            let label = match targets {
                Targets::Labels { labels, .. } => labels[example] as usize,
                Targets::Values(_) => unreachable!("checked in check()"),
            };
            let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for &o in out {
                z += (o - m).exp();
            }
            m + z.ln() - out[label]
        }
    }
}

fn output_grad(spec: &NetworkSpec, targets: &Targets, example: usize, out: &[f64], d: &mut [f64]) {
    match spec.loss() {
        LossKind::MeanSquaredError => {
            for j in 0..out.len() {
                d[j] = 2.0 * (out[j] - target_value(targets, example, j));
            }
        }
        LossKind::SoftmaxCrossEntropy => {
            let label = match targets {
                Targets::Labels { labels, .. } => labels[example] as usize,
                Targets::Values(_) => unreachable!("checked in check()"),
            };
            let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for &o in out {
                z += (o - m).exp();
            }
            for j in 0..out.len() {
                d[j] = (out[j] - m).exp() / z - if j == label { 1.0 } else { 0.0 };
            }
        }
    }
}

fn backward_example(
    spec: &NetworkSpec,
    plan: &Plan,
    values: &[f64],
    s: &mut Scratch,
    grad: &mut [f64],
) {
    for l in (0..spec.layers().len()).rev() {
        let (head, tail) = s.deltas.split_at_mut(l + 1);
        let din = &mut head[l];
        let dout = &tail[0];
        match spec.layers()[l] {
            LayerKind::Affine { .. } => {
                let slot = plan.slots[l].as_ref().unwrap();
                let x = &s.acts[l];
                din.iter_mut().for_each(|v| *v = 0.0);
                for o in 0..slot.outputs {
                    let d = dout[o];
                    let row_base = slot.w + o * slot.inputs;
                    for i in 0..slot.inputs {
                        grad[row_base + i] += d * x[i];
                        din[i] += values[row_base + i] * d;
                    }
                    if let Some(b) = slot.b {
                        grad[b + o] += d;
                    }
                }
            }
            LayerKind::Sigmoid => {
                let y = &s.acts[l + 1];
                for i in 0..din.len() {
                    din[i] = dout[i] * y[i] * (1.0 - y[i]);
                }
            }
            LayerKind::Relu => {
                let y = &s.acts[l + 1];
                for i in 0..din.len() {
                    din[i] = if y[i] > 0.0 { dout[i] } else { 0.0 };
                }
            }
            LayerKind::Maxout { pieces } => {
                din.iter_mut().for_each(|v| *v = 0.0);
                let winners = &s.winners[l];
                for u in 0..dout.len() {
                    din[u * pieces + winners[u]] = dout[u];
                }
            }
            LayerKind::Identity => din.copy_from_slice(dout),
        }
    }
}

/// Runs the network over every example; returns outputs and per-example
/// losses in input order.
pub fn forward(spec: &NetworkSpec, params: &ParamVector, view: BatchView<'_>) -> Result<Evaluation> {
    check(spec, params, view)?;
    let plan = plan(spec);
    let mut scratch = Scratch::new(spec, &plan);
    let n = view.inputs.rows();
    let mut outputs = Matrix::zeros(n, spec.output_dim());
    let mut losses = Vec::with_capacity(n);
    for e in 0..n {
        forward_example(spec, &plan, params.values(), view.inputs.row(e), &mut scratch);
        let out = scratch.acts.last().unwrap();
        outputs.row_mut(e).copy_from_slice(out);
        losses.push(loss_example(spec, view.targets, e, out));
    }
    Ok(Evaluation { outputs, losses })
}

/// Total objective over the batch: sum and mean of per-example losses,
/// accumulated in ascending example order. Empty batches are an error.
pub fn loss_total(spec: &NetworkSpec, params: &ParamVector, view: BatchView<'_>) -> Result<LossTotals> {
    check(spec, params, view)?;
    let plan = plan(spec);
    let mut scratch = Scratch::new(spec, &plan);
    let n = view.inputs.rows();
    let mut sum = 0.0;
    for e in 0..n {
        forward_example(spec, &plan, params.values(), view.inputs.row(e), &mut scratch);
        sum += loss_example(spec, view.targets, e, scratch.acts.last().unwrap());
    }
    Ok(LossTotals {
        sum,
        mean: sum / n as f64,
    })
}

/// Gradient of the summed batch loss, plus that summed loss.
pub fn grad_with_loss(
    spec: &NetworkSpec,
    params: &ParamVector,
    view: BatchView<'_>,
) -> Result<(ParamVector, f64)> {
    check(spec, params, view)?;
    let plan = plan(spec);
    let mut scratch = Scratch::new(spec, &plan);
    let mut grad = ParamVector::zeros(params.manifest().clone());
    let mut sum = 0.0;
    for e in 0..view.inputs.rows() {
        forward_example(spec, &plan, params.values(), view.inputs.row(e), &mut scratch);
        let out = scratch.acts.last().unwrap();
        sum += loss_example(spec, view.targets, e, out);
        output_grad(
            spec,
            view.targets,
            e,
            out,
            scratch.deltas.last_mut().unwrap(),
        );
        backward_example(spec, &plan, params.values(), &mut scratch, grad.values_mut());
    }
    Ok((grad, sum))
}

/// Gradient of the summed batch loss.
pub fn grad(spec: &NetworkSpec, params: &ParamVector, view: BatchView<'_>) -> Result<ParamVector> {
    grad_with_loss(spec, params, view).map(|(g, _)| g)
}

/// Fraction of examples whose highest output does not match the label.
/// Ties pick the lowest output index. Only defined for label targets.
pub fn error_rate(spec: &NetworkSpec, params: &ParamVector, view: BatchView<'_>) -> Result<f64> {
    let labels = match view.targets {
        Targets::Labels { labels, .. } => labels.clone(),
        Targets::Values(_) => {
            return Err(Error::InvalidArgument(
                "error rate needs label targets".into(),
            ))
        }
    };
    let eval = forward(spec, params, view)?;
    let mut wrong = 0usize;
    for e in 0..labels.len() {
        let row = eval.outputs.row(e);
        let mut best = 0usize;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best != labels[e] as usize {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / labels.len() as f64)
}

/// Hessian-vector product of the summed batch loss by central differencing
/// the gradient: `(g(p + h d) - g(p - h d)) / 2h` with
/// `h = 1e-4 * max(1, |p|) / max(1e-12, |d|)`. A zero direction returns an
/// exact zero vector.
pub fn hvp(
    spec: &NetworkSpec,
    params: &ParamVector,
    direction: &ParamVector,
    view: BatchView<'_>,
) -> Result<ParamVector> {
    params
        .manifest()
        .check_same(direction.manifest(), "hvp direction")?;
    let d_norm = direction.norm();
    if d_norm == 0.0 {
        check(spec, params, view)?;
        return Ok(ParamVector::zeros(params.manifest().clone()));
    }
    let h = 1e-4 * params.norm().max(1.0) / d_norm.max(1e-12);
    let plus = grad(spec, &params.axpy(h, direction)?, view)?;
    let minus = grad(spec, &params.axpy(-h, direction)?, view)?;
    let inv = 1.0 / (2.0 * h);
    let values = plus
        .values()
        .iter()
        .zip(minus.values())
        .map(|(p, m)| (p - m) * inv)
        .collect();
    ParamVector::from_values(params.manifest().clone(), values)
}

/// Smallest distance to a piecewise-linear kink over the batch: |z| for every
/// relu pre-activation and the winner's margin over each losing piece for
/// every maxout unit. Infinity when the network has no kinks.
pub fn kink_margin(spec: &NetworkSpec, params: &ParamVector, view: BatchView<'_>) -> Result<f64> {
    check(spec, params, view)?;
    let plan = plan(spec);
    let mut scratch = Scratch::new(spec, &plan);
    let mut margin = f64::INFINITY;
    for e in 0..view.inputs.rows() {
        forward_example(spec, &plan, params.values(), view.inputs.row(e), &mut scratch);
        for (l, layer) in spec.layers().iter().enumerate() {
            match *layer {
                LayerKind::Relu => {
                    for &z in &scratch.acts[l] {
                        margin = margin.min(z.abs());
                    }
                }
                LayerKind::Maxout { pieces } => {
                    let input = &scratch.acts[l];
                    for (u, &win) in scratch.winners[l].iter().enumerate() {
                        let best = input[u * pieces + win];
                        for p in 0..pieces {
                            if p != win {
                                margin = margin.min(best - input[u * pieces + p]);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_deep_linear_chain, scalar_factored_spec, Batch};
    use crate::linalg::{normal_vec, seeded_stream};
    use proptest::prelude::*;

    fn pv(spec: &NetworkSpec, values: Vec<f64>) -> ParamVector {
        ParamVector::from_values(spec.manifest(), values).unwrap()
    }

    fn unit_batch() -> Batch {
        Batch::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            Targets::Values(Matrix::from_vec(1, 1, vec![1.0]).unwrap()),
        )
        .unwrap()
    }

    fn random_params(spec: &NetworkSpec, seed: u64) -> ParamVector {
        let mut rng = seeded_stream(seed, 0);
        let values = normal_vec(&mut rng, spec.param_count())
            .iter()
            .map(|v| 0.4 * v)
            .collect();
        pv(spec, values)
    }

    fn random_batch(spec: &NetworkSpec, n: usize, seed: u64) -> Batch {
        let mut rng = seeded_stream(seed, 1);
        let inputs =
            Matrix::from_vec(n, spec.input_dim(), normal_vec(&mut rng, n * spec.input_dim()))
                .unwrap();
        let targets = match spec.loss() {
            LossKind::SoftmaxCrossEntropy => Targets::Labels {
                labels: (0..n).map(|i| (i % spec.output_dim()) as u32).collect(),
                classes: spec.output_dim(),
            },
            LossKind::MeanSquaredError => Targets::Values(
                Matrix::from_vec(n, spec.output_dim(), normal_vec(&mut rng, n * spec.output_dim()))
                    .unwrap(),
            ),
        };
        Batch::new(inputs, targets).unwrap()
    }

    /// Central-difference gradient of the summed loss, one coordinate at a
    /// time.
    fn fd_grad(spec: &NetworkSpec, params: &ParamVector, view: BatchView<'_>, h: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let mut up = params.clone();
            up.values_mut()[i] += h;
            let mut dn = params.clone();
            dn.values_mut()[i] -= h;
            let fp = loss_total(spec, &up, view).unwrap().sum;
            let fm = loss_total(spec, &dn, view).unwrap().sum;
            out.push((fp - fm) / (2.0 * h));
        }
        out
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let na = crate::linalg::norm(a);
        let nb = crate::linalg::norm(b);
        diff / na.max(nb).max(1e-12)
    }

    #[test]
    fn scalar_network_forward_and_loss() {
        let spec = scalar_factored_spec();
        let params = pv(&spec, vec![0.5, 0.5]);
        let batch = unit_batch();
        let eval = forward(&spec, &params, batch.view()).unwrap();
        assert_eq!(eval.outputs.row(0), &[0.25]);
        assert_eq!(eval.losses, vec![0.5625]);
        let totals = loss_total(&spec, &params, batch.view()).unwrap();
        assert_eq!(totals.sum, 0.5625);
        assert_eq!(totals.mean, 0.5625);
    }

    #[test]
    fn scalar_network_gradient_is_exact() {
        let spec = scalar_factored_spec();
        let params = pv(&spec, vec![0.5, 0.5]);
        let batch = unit_batch();
        let g = grad(&spec, &params, batch.view()).unwrap();
        // d/dw of (w1 w2 - 1)^2 = 2 (w1 w2 - 1) * w_other; all dyadic here.
        assert_eq!(g.values(), &[-0.75, -0.75]);
    }

    #[test]
    fn gradient_matches_finite_differences_per_activation() {
        let specs = vec![
            NetworkSpec::new(
                vec![
                    LayerKind::Affine { inputs: 3, outputs: 8, bias: true },
                    LayerKind::Sigmoid,
                    LayerKind::Affine { inputs: 8, outputs: 4, bias: true },
                ],
                LossKind::SoftmaxCrossEntropy,
                3,
                4,
            )
            .unwrap(),
            NetworkSpec::new(
                vec![
                    LayerKind::Affine { inputs: 4, outputs: 10, bias: true },
                    LayerKind::Relu,
                    LayerKind::Affine { inputs: 10, outputs: 3, bias: true },
                ],
                LossKind::MeanSquaredError,
                4,
                3,
            )
            .unwrap(),
            NetworkSpec::new(
                vec![
                    LayerKind::Affine { inputs: 3, outputs: 12, bias: true },
                    LayerKind::Maxout { pieces: 3 },
                    LayerKind::Affine { inputs: 4, outputs: 2, bias: false },
                ],
                LossKind::SoftmaxCrossEntropy,
                3,
                2,
            )
            .unwrap(),
            NetworkSpec::new(
                vec![
                    LayerKind::Affine { inputs: 2, outputs: 5, bias: true },
                    LayerKind::Identity,
                    LayerKind::Affine { inputs: 5, outputs: 2, bias: true },
                ],
                LossKind::MeanSquaredError,
                2,
                2,
            )
            .unwrap(),
        ];
        for (k, spec) in specs.iter().enumerate() {
            let params = random_params(spec, 100 + k as u64);
            let batch = random_batch(spec, 5, 200 + k as u64);
            // Kink-adjacent cases make finite differences meaningless; these
            // fixed seeds sit comfortably away from every kink.
            let margin = kink_margin(spec, &params, batch.view()).unwrap();
            assert!(margin > 1e-3, "seed landed near a kink: margin {margin}");
            let g = grad(spec, &params, batch.view()).unwrap();
            let fd = fd_grad(spec, &params, batch.view(), 1e-6);
            let err = rel_err(g.values(), &fd);
            assert!(err < 1e-6, "net {k}: rel err {err}");
        }
    }

    #[test]
    fn loss_total_rejects_empty_batches() {
        let spec = scalar_factored_spec();
        let params = pv(&spec, vec![0.5, 0.5]);
        let inputs = Matrix::zeros(0, 1);
        let targets = Targets::Values(Matrix::zeros(0, 1));
        let view = BatchView {
            inputs: &inputs,
            targets: &targets,
        };
        assert!(matches!(
            loss_total(&spec, &params, view),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn softmax_loss_matches_direct_logsumexp() {
        let spec = NetworkSpec::new(
            vec![LayerKind::Affine { inputs: 2, outputs: 3, bias: true }],
            LossKind::SoftmaxCrossEntropy,
            2,
            3,
        )
        .unwrap();
        // Identity-ish weights so the logits are easy to state.
        let params = pv(&spec, vec![1.0, 0.0, 0.0, 1.0, 0.5, -0.5, 0.0, 0.25, 1.5]);
        let batch = Batch::new(
            Matrix::from_vec(1, 2, vec![0.2, -0.4]).unwrap(),
            Targets::Labels { labels: vec![2], classes: 3 },
        )
        .unwrap();
        let eval = forward(&spec, &params, batch.view()).unwrap();
        let z = eval.outputs.row(0).to_vec();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        assert!((eval.losses[0] - (lse - z[2])).abs() < 1e-15);
    }

    #[test]
    fn uniform_logits_cost_ln_of_class_count() {
        let spec = NetworkSpec::new(
            vec![LayerKind::Affine { inputs: 1, outputs: 4, bias: false }],
            LossKind::SoftmaxCrossEntropy,
            1,
            4,
        )
        .unwrap();
        let params = pv(&spec, vec![0.0; 4]);
        let batch = Batch::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            Targets::Labels { labels: vec![1], classes: 4 },
        )
        .unwrap();
        let totals = loss_total(&spec, &params, batch.view()).unwrap();
        assert!((totals.sum - 4.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_value_targets() {
        let spec = NetworkSpec::new(
            vec![LayerKind::Affine { inputs: 1, outputs: 2, bias: false }],
            LossKind::SoftmaxCrossEntropy,
            1,
            2,
        )
        .unwrap();
        let params = pv(&spec, vec![0.0, 0.0]);
        let batch = Batch::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            Targets::Values(Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap()),
        )
        .unwrap();
        assert!(matches!(
            loss_total(&spec, &params, batch.view()),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let spec = NetworkSpec::new(
            vec![LayerKind::Affine { inputs: 1, outputs: 2, bias: false }],
            LossKind::SoftmaxCrossEntropy,
            1,
            2,
        )
        .unwrap();
        let params = pv(&spec, vec![0.0, 0.0]);
        let batch = Batch::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            Targets::Labels { labels: vec![2], classes: 3 },
        )
        .unwrap();
        assert!(loss_total(&spec, &params, batch.view()).is_err());
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let spec = scalar_factored_spec();
        let params = pv(&spec, vec![0.5, 0.5]);
        let batch = Batch::new(
            Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
            Targets::Values(Matrix::from_vec(1, 1, vec![1.0]).unwrap()),
        )
        .unwrap();
        assert!(matches!(
            forward(&spec, &params, batch.view()),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn foreign_params_are_rejected() {
        let spec = scalar_factored_spec();
        let other = build_deep_linear_chain(&[1, 2, 1]).unwrap();
        let params = ParamVector::zeros(other.manifest());
        let batch = unit_batch();
        assert!(matches!(
            forward(&spec, &params, batch.view()),
            Err(Error::ManifestMismatch(_))
        ));
    }

    #[test]
    fn maxout_tie_routes_to_lowest_piece() {
        let spec = NetworkSpec::new(
            vec![
                LayerKind::Affine { inputs: 1, outputs: 2, bias: false },
                LayerKind::Maxout { pieces: 2 },
            ],
            LossKind::MeanSquaredError,
            1,
            1,
        )
        .unwrap();
        // Both pieces compute 1.0 * x: an exact tie at every input.
        let params = pv(&spec, vec![1.0, 1.0]);
        let batch = Batch::new(
            Matrix::from_vec(1, 1, vec![2.0]).unwrap(),
            Targets::Values(Matrix::from_vec(1, 1, vec![0.0]).unwrap()),
        )
        .unwrap();
        let eval = forward(&spec, &params, batch.view()).unwrap();
        assert_eq!(eval.outputs.row(0), &[2.0]);
        let g = grad(&spec, &params, batch.view()).unwrap();
        assert_ne!(g.values()[0], 0.0);
        assert_eq!(g.values()[1], 0.0);
        assert_eq!(kink_margin(&spec, &params, batch.view()).unwrap(), 0.0);
    }

    #[test]
    fn error_rate_counts_argmax_mismatches() {
        let spec = NetworkSpec::new(
            vec![LayerKind::Affine { inputs: 2, outputs: 2, bias: false }],
            LossKind::SoftmaxCrossEntropy,
            2,
            2,
        )
        .unwrap();
        let params = pv(&spec, vec![1.0, 0.0, 0.0, 1.0]);
        let batch = Batch::new(
            Matrix::from_vec(4, 2, vec![3.0, 1.0, 1.0, 3.0, 2.0, 0.0, 0.0, 2.0]).unwrap(),
            Targets::Labels { labels: vec![0, 1, 1, 1], classes: 2 },
        )
        .unwrap();
        assert_eq!(error_rate(&spec, &params, batch.view()).unwrap(), 0.25);
    }

    #[test]
    fn hvp_zero_direction_is_exactly_zero() {
        let spec = scalar_factored_spec();
        let params = pv(&spec, vec![1.0, 1.0]);
        let dir = ParamVector::zeros(spec.manifest());
        let batch = unit_batch();
        let out = hvp(&spec, &params, &dir, batch.view()).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0]);
    }

    #[test]
    fn hvp_matches_analytic_hessian_of_factored_model() {
        // J(w) = (w1 w2 - 1)^2 has Hessian
        //   [ 2 w2^2        4 w1 w2 - 2 ]
        //   [ 4 w1 w2 - 2   2 w1^2      ]
        // so at (1, 1) a step along (1, 0) maps to (2, 2).
        let spec = scalar_factored_spec();
        let params = pv(&spec, vec![1.0, 1.0]);
        let batch = unit_batch();
        let dir = pv(&spec, vec![1.0, 0.0]);
        let hd = hvp(&spec, &params, &dir, batch.view()).unwrap();

        // Cross-check the analytic row with second differences of the loss.
        let h = 1e-4;
        let mut fd = [0.0; 2];
        for j in 0..2 {
            let mut pp = params.clone();
            pp.values_mut()[0] += h;
            pp.values_mut()[j] += h;
            let mut pm = params.clone();
            pm.values_mut()[0] += h;
            pm.values_mut()[j] -= h;
            let mut mp = params.clone();
            mp.values_mut()[0] -= h;
            mp.values_mut()[j] += h;
            let mut mm = params.clone();
            mm.values_mut()[0] -= h;
            mm.values_mut()[j] -= h;
            let f = |p: &ParamVector| loss_total(&spec, p, batch.view()).unwrap().sum;
            fd[j] = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
        }
        assert!((fd[0] - 2.0).abs() < 1e-5, "fd H[0][0] = {}", fd[0]);
        assert!((fd[1] - 2.0).abs() < 1e-5, "fd H[0][1] = {}", fd[1]);

        assert!((hd.values()[0] - 2.0).abs() < 1e-6);
        assert!((hd.values()[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn hvp_of_quadratic_bowl_is_twice_the_direction() {
        // affine(1, m) without bias on the pair (1, 0) gives J = sum w^2,
        // whose Hessian is 2 I.
        let m = 6;
        let spec = NetworkSpec::new(
            vec![LayerKind::Affine { inputs: 1, outputs: m, bias: false }],
            LossKind::MeanSquaredError,
            1,
            m,
        )
        .unwrap();
        let params = random_params(&spec, 7);
        let batch = Batch::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            Targets::Values(Matrix::zeros(1, m)),
        )
        .unwrap();
        let mut rng = seeded_stream(8, 0);
        let dir = pv(&spec, normal_vec(&mut rng, m));
        let hd = hvp(&spec, &params, &dir, batch.view()).unwrap();
        let expected = dir.scale(2.0);
        assert!(rel_err(hd.values(), expected.values()) < 1e-6);
    }

    #[test]
    fn hvp_is_symmetric_as_a_bilinear_form() {
        let spec = NetworkSpec::new(
            vec![
                LayerKind::Affine { inputs: 3, outputs: 6, bias: true },
                LayerKind::Sigmoid,
                LayerKind::Affine { inputs: 6, outputs: 2, bias: true },
            ],
            LossKind::MeanSquaredError,
            3,
            2,
        )
        .unwrap();
        for seed in 0..5u64 {
            let params = random_params(&spec, 300 + seed);
            let batch = random_batch(&spec, 4, 400 + seed);
            let mut rng = seeded_stream(500 + seed, 0);
            let d = pv(&spec, normal_vec(&mut rng, spec.param_count()));
            let e = pv(&spec, normal_vec(&mut rng, spec.param_count()));
            let hd = hvp(&spec, &params, &d, batch.view()).unwrap();
            let he = hvp(&spec, &params, &e, batch.view()).unwrap();
            let lhs = e.dot(&hd).unwrap();
            let rhs = d.dot(&he).unwrap();
            let scale = lhs.abs().max(rhs.abs()).max(1e-12);
            assert!(
                ((lhs - rhs) / scale).abs() < 1e-4,
                "seed {seed}: {lhs} vs {rhs}"
            );
        }
    }

    proptest! {
        /// With dyadic inputs every per-example loss and every partial sum is
        /// exact, so the summed objective must be exactly additive across
        /// dataset partitions and exactly double on a duplicated dataset.
        #[test]
        fn summed_loss_is_additive_on_exact_values(
            xs in proptest::collection::vec(-64i32..=64, 2..40),
            split in 1usize..39,
        ) {
            let split = split.min(xs.len() - 1);
            let spec = NetworkSpec::new(
                vec![LayerKind::Affine { inputs: 1, outputs: 1, bias: false }],
                LossKind::MeanSquaredError,
                1,
                1,
            ).unwrap();
            let params = pv(&spec, vec![1.0]);
            let values: Vec<f64> = xs.iter().map(|&x| x as f64 / 16.0).collect();
            let batch = |vals: &[f64]| {
                Batch::new(
                    Matrix::from_vec(vals.len(), 1, vals.to_vec()).unwrap(),
                    Targets::Values(Matrix::zeros(vals.len(), 1)),
                ).unwrap()
            };
            let whole = batch(&values);
            let left = batch(&values[..split]);
            let right = batch(&values[split..]);
            let total = loss_total(&spec, &params, whole.view()).unwrap().sum;
            let a = loss_total(&spec, &params, left.view()).unwrap().sum;
            let b = loss_total(&spec, &params, right.view()).unwrap().sum;
            prop_assert_eq!(total, a + b);

            let mut doubled = values.clone();
            doubled.extend_from_slice(&values);
            let twice = loss_total(&spec, &params, batch(&doubled).view()).unwrap().sum;
            prop_assert_eq!(twice, 2.0 * total);
        }
    }
}
