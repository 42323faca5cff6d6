//! Central finite differences, used as the independent oracle for every
//! backward pass.

use crate::error::Result;
use crate::network::{Network, SpecBuilder};
use crate::ops::{
    conv3d_backward, conv3d_forward, linear_backward, linear_forward, maxpool3d_backward, maxpool3d_forward, relu,
    relu_backward, softmax_xent, ConvKernelSpec, PoolSpec,
};
use crate::tensor::{InitScheme, Tensor};

/// Default perturbation size.
pub const EPSILON: f64 = 1e-3;

/// Values smaller than this are compared absolutely rather than relatively.
const REL_FLOOR: f64 = 1e-6;

/// Numerical gradient of scalar `f` at `x`, `(f(x + e) - f(x - e)) / 2e` per element.
pub fn central_difference(f: impl Fn(&Tensor) -> f64, x: &Tensor, eps: f64) -> Tensor {
    let indices: Vec<usize> = (0..x.len()).collect();
    let values = central_difference_at(&f, x, eps, &indices);
    let mut out = x.map(|_| 0.0);
    for (i, v) in indices.into_iter().zip(values) {
        out.data_mut()[i] = v;
    }
    out
}

/// Numerical partial derivatives at the listed flat indices only.
pub fn central_difference_at(
    f: impl Fn(&Tensor) -> f64,
    x: &Tensor,
    eps: f64,
    indices: &[usize],
) -> Vec<f64> {
    let mut probe = x.clone();
    indices
        .iter()
        .map(|&i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + eps;
            let plus = f(&probe);
            probe.data_mut()[i] = orig - eps;
            let minus = f(&probe);
            probe.data_mut()[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Largest element-wise [`relative_error`] between two equally shaped tensors.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.dims(), numeric.dims(), "gradient shapes differ");
    max_relative_error_slices(analytic.data(), numeric.data())
}

pub fn max_relative_error_slices(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Outcome of checking one parameter tensor of a network.
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation crossed a ReLU or max-pool boundary.
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct NetworkCheck {
    pub tensors: Vec<TensorCheck>,
}

impl NetworkCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.tensors.iter().map(|t| t.skipped).sum()
    }
}

/// Compares back-propagated parameter gradients of the mean cross-entropy
/// with central differences.
///
/// At most `max_coords` evenly spaced coordinates are probed per tensor.
/// Coordinates where `x + eps` or `x - eps` changes a ReLU sign or a pooling
/// argmax are skipped, since the loss is not differentiable across them.
pub fn check_network(
    net: &Network,
    batch: &Tensor,
    labels: &[usize],
    eps: f64,
    max_coords: usize,
) -> Result<NetworkCheck> {
    let (_, grads) = net.loss_and_gradients(batch, labels)?;
    let base = net.forward(batch, true)?.decision_pattern(net.spec());
    let mut probe = net.clone();
    let mut tensors = Vec::new();
    for (li, layer) in net.spec().layers.iter().enumerate() {
        let Some(g) = &grads.layers[li] else { continue };
        for (which, analytic) in [("weight", &g.weight), ("bias", &g.bias)] {
            let len = analytic.len();
            let step = len.div_ceil(max_coords.max(1)).max(1);
            let mut check = TensorCheck {
                name: format!("{}.{which}", layer.name),
                max_rel_error: 0.0,
                checked: 0,
                skipped: 0,
            };
            for idx in (0..len).step_by(step) {
                let mut eval = |delta: f64| -> Result<(f64, bool)> {
                    let p = probe.params_mut()[li].as_mut().expect("parametric layer");
                    let t = if which == "weight" { &mut p.weight } else { &mut p.bias };
                    let orig = t.data()[idx];
                    t.data_mut()[idx] = orig + delta;
                    let trace = probe.forward(batch, true);
                    let p = probe.params_mut()[li].as_mut().expect("parametric layer");
                    let t = if which == "weight" { &mut p.weight } else { &mut p.bias };
                    t.data_mut()[idx] = orig;
                    let trace = trace?;
                    let loss = softmax_xent(trace.logits(), labels)?.loss;
                    Ok((loss, trace.decision_pattern(net.spec()) == base))
                };
                let (plus, same_plus) = eval(eps)?;
                let (minus, same_minus) = eval(-eps)?;
                if !(same_plus && same_minus) {
                    check.skipped += 1;
                    continue;
                }
                let numeric = (plus - minus) / (2.0 * eps);
                check.max_rel_error = check.max_rel_error.max(relative_error(analytic.data()[idx], numeric));
                check.checked += 1;
            }
            tensors.push(check);
        }
    }
    Ok(NetworkCheck { tensors })
}

/// Result of one entry of [`run_suite`].
#[derive(Clone, Debug)]
pub struct OpCheck {
    pub op: &'static str,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

fn weighted_sum(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn rand_tensor(dims: &[usize], seed: u64) -> Result<Tensor> {
    Tensor::random_init(dims, InitScheme::Uniform(1.0), seed)
}

fn full_check(op: &'static str, pairs: &[(&Tensor, Tensor)]) -> OpCheck {
    let max_rel_error = pairs.iter().map(|(a, n)| max_relative_error(a, n)).fold(0.0, f64::max);
    OpCheck { op, max_rel_error, checked: pairs.iter().map(|(a, _)| a.len()).sum(), skipped: 0 }
}

/// Finite-difference checks of every backward pass against a scalar loss
/// `sum(r * y)` with random `r`, plus an end-to-end network check.
pub fn run_suite(seed: u64) -> Result<Vec<OpCheck>> {
    let mut out = Vec::new();

    let spec = ConvKernelSpec::new(3, 2, 3, 3)?;
    let x = rand_tensor(&[1, 2, 4, 5, 5], seed)?;
    let w = rand_tensor(&spec.weight_dims(), seed + 1)?;
    let b = rand_tensor(&[3], seed + 2)?;
    let r = rand_tensor(&[1, 3, 4, 5, 5], seed + 3)?;
    let g = conv3d_backward(&x, &w, &r, &spec)?;
    let loss = |x: &Tensor, w: &Tensor, b: &Tensor| weighted_sum(&conv3d_forward(x, w, b, &spec).expect("shapes"), &r);
    out.push(full_check(
        "conv3d",
        &[
            (&g.input, central_difference(|t| loss(t, &w, &b), &x, EPSILON)),
            (&g.weights, central_difference(|t| loss(&x, t, &b), &w, EPSILON)),
            (&g.bias, central_difference(|t| loss(&x, &w, t), &b, EPSILON)),
        ],
    ));

    let pool = PoolSpec::new(2, 2, 2)?;
    let x = rand_tensor(&[1, 2, 4, 5, 5], seed + 4)?;
    let (y, sw) = maxpool3d_forward(&x, &pool)?;
    let r = rand_tensor(y.dims(), seed + 5)?;
    let analytic = maxpool3d_backward(&sw, &r, x.dims())?;
    let mut check = OpCheck { op: "maxpool3d", max_rel_error: 0.0, checked: 0, skipped: 0 };
    let mut probe = x.clone();
    for i in 0..x.len() {
        let mut eval = |delta: f64| {
            probe.data_mut()[i] = x.data()[i] + delta;
            let (y, s) = maxpool3d_forward(&probe, &pool).expect("shapes");
            probe.data_mut()[i] = x.data()[i];
            (weighted_sum(&y, &r), s == sw)
        };
        let ((plus, sp), (minus, sm)) = (eval(EPSILON), eval(-EPSILON));
        if !(sp && sm) {
            check.skipped += 1;
            continue;
        }
        check.max_rel_error = check.max_rel_error.max(relative_error(analytic.data()[i], (plus - minus) / (2.0 * EPSILON)));
        check.checked += 1;
    }
    out.push(check);

    // Inputs kept away from the kink at 0.
    let x = rand_tensor(&[2, 3, 2, 3, 3], seed + 6)?.map(|v| if v.abs() < 0.01 { 0.5 } else { v });
    let r = rand_tensor(x.dims(), seed + 7)?;
    let analytic = relu_backward(&x, &r)?;
    out.push(full_check("relu", &[(&analytic, central_difference(|t| weighted_sum(&relu(t), &r), &x, EPSILON))]));

    let x = rand_tensor(&[3, 7], seed + 8)?;
    let w = rand_tensor(&[5, 7], seed + 9)?;
    let b = rand_tensor(&[5], seed + 10)?;
    let r = rand_tensor(&[3, 5], seed + 11)?;
    let g = linear_backward(&x, &w, &r)?;
    let loss = |x: &Tensor, w: &Tensor, b: &Tensor| weighted_sum(&linear_forward(x, w, b).expect("shapes"), &r);
    out.push(full_check(
        "linear",
        &[
            (&g.input, central_difference(|t| loss(t, &w, &b), &x, EPSILON)),
            (&g.weights, central_difference(|t| loss(&x, t, &b), &w, EPSILON)),
            (&g.bias, central_difference(|t| loss(&x, &w, t), &b, EPSILON)),
        ],
    ));

    let logits = rand_tensor(&[4, 6], seed + 12)?.scale(3.0);
    let labels = [0, 5, 2, 2];
    let analytic = softmax_xent(&logits, &labels)?.grad_logits;
    let numeric = central_difference(|t| softmax_xent(t, &labels).expect("shapes").loss, &logits, EPSILON);
    out.push(full_check("softmax_xent", &[(&analytic, numeric)]));

    let mut spec = SpecBuilder::new([3, 4, 8, 8])
        .conv_relu("conv1", 4, 3, 3)?
        .conv_relu("conv2", 4, 3, 3)?
        .pool("pool1", 2, 2, 2)?
        .classifier("fc", 3)?;
    // Large weights keep pre-activations far from the ReLU and pooling boundaries.
    for (name, bound) in [("conv1", 1.0), ("conv2", 0.2), ("fc", 0.02)] {
        let i = spec.layer_index(name)?;
        spec.layers[i].init = InitScheme::Uniform(bound);
    }
    let net = Network::build(spec, seed + 13)?;
    let x = rand_tensor(&[1, 3, 4, 8, 8], seed + 14)?;
    let report = check_network(&net, &x, &[2], EPSILON, usize::MAX)?;
    out.push(OpCheck {
        op: "network",
        max_rel_error: report.max_rel_error(),
        checked: report.checked(),
        skipped: report.skipped(),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = central_difference(|t| t.data().iter().map(|v| v * v).sum(), &x, EPSILON);
        let expect = x.scale(2.0);
        assert!(max_relative_error(&expect, &g) < 1e-9);
    }

    #[test]
    fn suite_passes() {
        let checks = run_suite(0).unwrap();
        assert_eq!(checks.len(), 6);
        for c in &checks {
            assert!(c.max_rel_error < 1e-4, "{c:?}");
            assert!(c.checked * 5 >= (c.checked + c.skipped) * 4, "{c:?}");
        }
    }
}
