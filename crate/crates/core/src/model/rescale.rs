//! Function-preserving rescaling of a single relu unit.

use crate::error::{Error, Result};
use crate::model::{LayerKind, NetworkSpec};
use crate::params::ParamVector;

/// Scales the incoming weights and bias of one relu unit by `gamma > 0` and
/// divides its outgoing weights by `gamma`. Because relu commutes with
/// positive scaling this leaves the network function unchanged while moving
/// the parameter vector; `layer` must index an affine layer that feeds a relu
/// whose output feeds another affine layer.
pub fn rescale_relu(
    spec: &NetworkSpec,
    params: &ParamVector,
    layer: usize,
    unit: usize,
    gamma: f64,
) -> Result<ParamVector> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rescale factor must be positive and finite, got {gamma}"
        )));
    }
    if !params.manifest().same_layout(&spec.manifest()) {
        return Err(Error::ManifestMismatch(
            "parameters were built for a different network".into(),
        ));
    }
    let layers = spec.layers();
    let (outputs, has_bias) = match layers.get(layer) {
        Some(&LayerKind::Affine { outputs, bias, .. }) => (outputs, bias),
        _ => {
            return Err(Error::Structure(format!(
                "layer {layer} is not affine"
            )))
        }
    };
    if !matches!(layers.get(layer + 1), Some(LayerKind::Relu)) {
        return Err(Error::Structure(format!(
            "layer {} is not a relu",
            layer + 1
        )));
    }
    let next = match layers.get(layer + 2) {
        Some(&LayerKind::Affine {
            inputs, outputs, ..
        }) => (inputs, outputs),
        _ => {
            return Err(Error::Structure(format!(
                "layer {} is not affine",
                layer + 2
            )))
        }
    };
    if unit >= outputs {
        return Err(Error::InvalidArgument(format!(
            "unit {unit} out of range for {outputs} outputs"
        )));
    }

    let mut out = params.clone();
    let w_in = format!("layer{layer}.weight");
    let seg = out
        .segment_mut(&w_in)
        .expect("manifest checked against spec");
    let cols = seg.len() / outputs;
    for v in &mut seg[unit * cols..(unit + 1) * cols] {
        *v *= gamma;
    }
    if has_bias {
        let b = format!("layer{layer}.bias");
        out.segment_mut(&b).expect("bias segment exists")[unit] *= gamma;
    }
    let w_out = format!("layer{}.weight", layer + 2);
    let seg = out
        .segment_mut(&w_out)
        .expect("manifest checked against spec");
    let (next_in, next_out) = next;
    for o in 0..next_out {
        seg[o * next_in + unit] /= gamma;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{normal_vec, seeded_stream};
    use crate::model::{forward, Batch, LossKind, Matrix, Targets};
    use crate::params::ParamVector;

    fn relu_net() -> NetworkSpec {
        NetworkSpec::new(
            vec![
                LayerKind::Affine { inputs: 3, outputs: 6, bias: true },
                LayerKind::Relu,
                LayerKind::Affine { inputs: 6, outputs: 2, bias: true },
            ],
            LossKind::MeanSquaredError,
            3,
            2,
        )
        .unwrap()
    }

    fn random_params(spec: &NetworkSpec, seed: u64) -> ParamVector {
        let mut rng = seeded_stream(seed, 0);
        ParamVector::from_values(spec.manifest(), normal_vec(&mut rng, spec.param_count()))
            .unwrap()
    }

    #[test]
    fn rescaled_network_computes_the_same_function() {
        let spec = relu_net();
        let params = random_params(&spec, 1);
        let mut rng = seeded_stream(2, 0);
        let inputs = Matrix::from_vec(50, 3, normal_vec(&mut rng, 150)).unwrap();
        let batch = Batch::new(inputs, Targets::Values(Matrix::zeros(50, 2))).unwrap();
        let before = forward(&spec, &params, batch.view()).unwrap();
        for &gamma in &[0.5, 2.0, 10.0] {
            for unit in 0..6 {
                let scaled = rescale_relu(&spec, &params, 0, unit, gamma).unwrap();
                assert!(scaled.sub(&params).unwrap().norm() > 0.0);
                let after = forward(&spec, &scaled, batch.view()).unwrap();
                for e in 0..50 {
                    for j in 0..2 {
                        let d = (before.outputs.row(e)[j] - after.outputs.row(e)[j]).abs();
                        assert!(d < 1e-10, "gamma {gamma} unit {unit}: drift {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn nonpositive_factor_is_rejected() {
        let spec = relu_net();
        let params = random_params(&spec, 3);
        assert!(rescale_relu(&spec, &params, 0, 0, 0.0).is_err());
        assert!(rescale_relu(&spec, &params, 0, 0, -2.0).is_err());
        assert!(rescale_relu(&spec, &params, 0, 0, f64::NAN).is_err());
        assert!(rescale_relu(&spec, &params, 0, 0, f64::INFINITY).is_err());
    }

    #[test]
    fn pattern_must_be_affine_relu_affine() {
        let spec = relu_net();
        let params = random_params(&spec, 4);
        // layer 1 is the relu itself, layer 2 has nothing after it.
        assert!(rescale_relu(&spec, &params, 1, 0, 2.0).is_err());
        assert!(rescale_relu(&spec, &params, 2, 0, 2.0).is_err());
        assert!(rescale_relu(&spec, &params, 0, 6, 2.0).is_err());

        let sigmoid_net = NetworkSpec::new(
            vec![
                LayerKind::Affine { inputs: 2, outputs: 4, bias: true },
                LayerKind::Sigmoid,
                LayerKind::Affine { inputs: 4, outputs: 1, bias: true },
            ],
            LossKind::MeanSquaredError,
            2,
            1,
        )
        .unwrap();
        let p = random_params(&sigmoid_net, 5);
        assert!(rescale_relu(&sigmoid_net, &p, 0, 0, 2.0).is_err());
    }

    #[test]
    fn unit_scaling_touches_exactly_one_unit() {
        let spec = relu_net();
        let params = random_params(&spec, 6);
        let scaled = rescale_relu(&spec, &params, 0, 2, 2.0).unwrap();
        let diff = scaled.sub(&params).unwrap();
        // Row 2 of layer0.weight, bias 2, and column 2 of layer2.weight move;
        // everything else stays put.
        let w0 = spec.manifest().segment("layer0.weight").unwrap().clone();
        let b0 = spec.manifest().segment("layer0.bias").unwrap().clone();
        let w2 = spec.manifest().segment("layer2.weight").unwrap().clone();
        for (i, &d) in diff.values().iter().enumerate() {
            let in_w0_row = i >= w0.offset + 2 * 3 && i < w0.offset + 3 * 3;
            let is_b0 = i == b0.offset + 2;
            let in_w2_col = i >= w2.offset && i < w2.offset + 12 && (i - w2.offset) % 6 == 2;
            if in_w0_row || is_b0 || in_w2_col {
                assert!(params.values()[i] == 0.0 || d != 0.0);
            } else {
                assert_eq!(d, 0.0, "unexpected change at flat index {i}");
            }
        }
    }
}
