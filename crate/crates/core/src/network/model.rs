use crate::error::{Error, Result};
use crate::ops::{
    conv3d_backward, conv3d_forward, conv3d_param_grads, linear_backward, linear_forward, maxpool3d_backward,
    maxpool3d_forward, relu, relu_backward, softmax, softmax_xent, PoolSwitches, SoftmaxXent,
};
use crate::tensor::{InitScheme, Tensor};

use super::spec::{LayerKind, NetworkSpec};

/// Weight and bias of one parametric layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// A network specification with instantiated parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<Vec<usize>>,
    /// One entry per layer; `None` for parameter-free layers.
    params: Vec<Option<LayerParams>>,
}

/// Gradients in the same layout as [`Network`] parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerParams>>,
}

impl Gradients {
    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flatten().flat_map(|p| [&p.weight, &p.bias])
    }

    /// `self += other`, in place.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a, b) {
                for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                    *x += y;
                }
                for (x, y) in a.bias.data_mut().iter_mut().zip(b.bias.data()) {
                    *x += y;
                }
            }
        }
    }
}

/// Every intermediate output of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    input: Tensor,
    outputs: Vec<Tensor>,
    switches: Vec<Option<PoolSwitches>>,
}

impl ForwardTrace {
    pub fn input(&self) -> &Tensor {
        &self.input
    }

    pub fn output(&self, layer: usize) -> &Tensor {
        &self.outputs[layer]
    }

    /// Output of the layer preceding the softmax head.
    pub fn logits(&self) -> &Tensor {
        &self.outputs[self.outputs.len() - 2]
    }

    pub fn probs(&self) -> &Tensor {
        &self.outputs[self.outputs.len() - 1]
    }

    pub fn switches(&self, layer: usize) -> Option<&PoolSwitches> {
        self.switches[layer].as_ref()
    }

    /// Every piecewise decision taken by the pass: the sign mask at each ReLU
    /// input and the argmax of every pooling window. Two inputs with equal
    /// patterns lie on the same smooth piece of the network.
    pub fn decision_pattern(&self, spec: &NetworkSpec) -> Vec<usize> {
        let mut pattern = Vec::new();
        for (i, layer) in spec.layers.iter().enumerate() {
            let x = if i == 0 { &self.input } else { &self.outputs[i - 1] };
            match layer.kind {
                LayerKind::Relu => pattern.extend(x.data().iter().map(|&v| (v > 0.0) as usize)),
                LayerKind::MaxPool3d(_) => {
                    if let Some(sw) = &self.switches[i] {
                        pattern.extend_from_slice(sw.indices());
                    }
                }
                _ => {}
            }
        }
        pattern
    }
}

/// Mixes a base seed with a parameter index.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Network {
    /// Instantiates parameters deterministically from `seed`.
    pub fn build(spec: NetworkSpec, seed: u64) -> Result<Network> {
        let shapes = spec.infer_shapes()?;
        let params = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                layer
                    .param_dims()
                    .map(|(wd, bd)| -> Result<LayerParams> {
                        Ok(LayerParams {
                            weight: Tensor::random_init(&wd, layer.init, derive_seed(seed, i as u64))?,
                            bias: Tensor::random_init(&bd, InitScheme::Constant(0.0), 0)?,
                        })
                    })
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Network { spec, shapes, params })
    }

    /// Wraps existing parameters, checking every shape against the spec.
    pub fn from_params(spec: NetworkSpec, params: Vec<Option<LayerParams>>) -> Result<Network> {
        let shapes = spec.infer_shapes()?;
        if params.len() != spec.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter slots for {} layers",
                params.len(),
                spec.layers.len()
            )));
        }
        for (layer, p) in spec.layers.iter().zip(&params) {
            match (layer.param_dims(), p) {
                (None, None) => {}
                (Some((wd, bd)), Some(p)) if p.weight.dims() == wd && p.bias.dims() == bd => {}
                _ => {
                    return Err(Error::Layer {
                        layer: layer.name.clone(),
                        reason: "parameter shapes do not match the spec".into(),
                    })
                }
            }
        }
        Ok(Network { spec, shapes, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Output extents of layer `i` without the batch axis.
    pub fn layer_shape(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn params(&self) -> &[Option<LayerParams>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<LayerParams>] {
        &mut self.params
    }

    /// `(name, tensor)` in spec order, weights before biases.
    pub fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (layer, p) in self.spec.layers.iter().zip(&self.params) {
            if let Some(p) = p {
                out.push((format!("{}.weight", layer.name), &p.weight));
                out.push((format!("{}.bias", layer.name), &p.bias));
            }
        }
        out
    }

    pub fn param_elements(&self) -> usize {
        self.params.iter().flatten().map(|p| p.weight.len() + p.bias.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .params
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| LayerParams {
                        weight: p.weight.map(|_| 0.0),
                        bias: p.bias.map(|_| 0.0),
                    })
                })
                .collect(),
        }
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        let dims = batch.dims();
        if dims.len() != 5 || dims[1..] != self.spec.input {
            return Err(Error::ShapeMismatch(format!(
                "batch {} does not match network input (n,{},{},{},{})",
                batch.shape(),
                self.spec.input[0],
                self.spec.input[1],
                self.spec.input[2],
                self.spec.input[3]
            )));
        }
        Ok(())
    }

    /// Runs every layer, keeping all outputs. Pool switches are kept only when
    /// `record_switches` is set; [`Network::backward`] and deconvolution need them.
    pub fn forward(&self, batch: &Tensor, record_switches: bool) -> Result<ForwardTrace> {
        self.forward_through(batch, self.spec.layers.len() - 1, record_switches)
    }

    /// Forward pass stopping after layer `last`. The trace's `logits`/`probs`
    /// are meaningful only for a full pass.
    pub(crate) fn forward_through(&self, batch: &Tensor, last: usize, record_switches: bool) -> Result<ForwardTrace> {
        self.check_batch(batch)?;
        let n = batch.dims()[0];
        let mut outputs: Vec<Tensor> = Vec::with_capacity(last + 1);
        let mut switches = Vec::with_capacity(last + 1);
        for (i, layer) in self.spec.layers.iter().enumerate().take(last + 1) {
            let x = if i == 0 { batch } else { &outputs[i - 1] };
            let mut sw = None;
            let y = match &layer.kind {
                LayerKind::Conv3d(c) => {
                    let p = self.params[i].as_ref().expect("conv params");
                    conv3d_forward(x, &p.weight, &p.bias, c)?
                }
                LayerKind::MaxPool3d(p) => {
                    let (y, s) = maxpool3d_forward(x, p)?;
                    if record_switches {
                        sw = Some(s);
                    }
                    y
                }
                LayerKind::Relu => relu(x),
                LayerKind::Flatten => x.reshape(&[n, self.shapes[i][0]])?,
                LayerKind::Linear { .. } => {
                    let p = self.params[i].as_ref().expect("linear params");
                    linear_forward(x, &p.weight, &p.bias)?
                }
                LayerKind::SoftmaxXent => softmax(x)?,
            };
            outputs.push(y);
            switches.push(sw);
        }
        Ok(ForwardTrace { input: batch.clone(), outputs, switches })
    }

    /// Class distribution for each batch item without keeping intermediates.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward(batch, false)?.probs().clone())
    }

    /// Back-propagates `grad_logits` (gradient at the classifier output).
    pub fn backward(&self, trace: &ForwardTrace, grad_logits: &Tensor) -> Result<Gradients> {
        let last = self.spec.layers.len() - 1;
        if trace.outputs.len() != self.spec.layers.len() {
            return Err(Error::MissingCache("trace does not belong to this network".into()));
        }
        if grad_logits.dims() != trace.logits().dims() {
            return Err(Error::ShapeMismatch(format!(
                "grad_logits {} vs logits {}",
                grad_logits.shape(),
                trace.logits().shape()
            )));
        }
        let mut grads = Gradients { layers: vec![None; self.params.len()] };
        let mut g = grad_logits.clone();
        for i in (0..last).rev() {
            let layer = &self.spec.layers[i];
            let x = if i == 0 { &trace.input } else { &trace.outputs[i - 1] };
            g = match &layer.kind {
                LayerKind::Conv3d(c) if i == 0 => {
                    // The input itself needs no gradient.
                    let p = self.params[i].as_ref().expect("conv params");
                    let (weight, bias) = conv3d_param_grads(x, &p.weight, &g, c)?;
                    grads.layers[i] = Some(LayerParams { weight, bias });
                    break;
                }
                LayerKind::Conv3d(c) => {
                    let p = self.params[i].as_ref().expect("conv params");
                    let cg = conv3d_backward(x, &p.weight, &g, c)?;
                    grads.layers[i] = Some(LayerParams { weight: cg.weights, bias: cg.bias });
                    cg.input
                }
                LayerKind::MaxPool3d(_) => {
                    let sw = trace.switches[i].as_ref().ok_or_else(|| {
                        Error::MissingCache(format!("no switches recorded for `{}`", layer.name))
                    })?;
                    maxpool3d_backward(sw, &g, x.dims())?
                }
                LayerKind::Relu => relu_backward(x, &g)?,
                LayerKind::Flatten => g.into_reshape(x.dims())?,
                LayerKind::Linear { .. } => {
                    let p = self.params[i].as_ref().expect("linear params");
                    let lg = linear_backward(x, &p.weight, &g)?;
                    grads.layers[i] = Some(LayerParams { weight: lg.weights, bias: lg.bias });
                    lg.input
                }
                LayerKind::SoftmaxXent => unreachable!("softmax head is always last"),
            };
        }
        Ok(grads)
    }

    /// Mean cross-entropy of a labelled batch and its parameter gradients.
    pub fn loss_and_gradients(&self, batch: &Tensor, labels: &[usize]) -> Result<(SoftmaxXent, Gradients)> {
        let trace = self.forward(batch, true)?;
        let xent = softmax_xent(trace.logits(), labels)?;
        let grads = self.backward(&trace, &xent.grad_logits)?;
        Ok((xent, grads))
    }
}
