//! Projection of single feature-map activations back to pixel space through
//! max-unpooling, rectification and transposed convolution.

mod image;

pub use image::{frame_to_bytes, read_image, write_image_sequence, Image};

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::network::{LayerKind, Network};
use crate::ops::{conv3d_transpose, maxpool3d_backward};
use crate::tensor::Tensor;

/// How rectification acts on the reverse signal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReluMode {
    /// Keep the positive part of the reverse signal itself.
    #[default]
    Deconvnet,
    /// Keep the reverse signal where the forward ReLU input was positive.
    /// The chain is then linear, hence additive over kept activations.
    ForwardMask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// The channel's strongest activation (lowest flat position on ties).
    Top1,
    Position { t: usize, y: usize, x: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeconvRequest {
    pub layer: String,
    pub channel: usize,
    pub selection: Selection,
    pub relu: ReluMode,
}

impl DeconvRequest {
    pub fn top1(layer: &str, channel: usize) -> Self {
        DeconvRequest { layer: layer.into(), channel, selection: Selection::Top1, relu: ReluMode::default() }
    }
}

/// One ranked activation from [`top_activations`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activation {
    pub clip: usize,
    pub position: (usize, usize, usize),
    pub value: f64,
}

/// Accepts `(c, l, h, w)` or `(1, c, l, h, w)` and returns the batch view.
fn as_batch(net: &Network, clip: &Tensor) -> Result<Tensor> {
    match clip.dims().len() {
        4 => clip.reshape(&[&[1], clip.dims()].concat()),
        5 if clip.dims()[0] == 1 => Ok(clip.clone()),
        _ => Err(Error::ShapeMismatch(format!(
            "deconvolution takes one clip of shape {:?}, got {}",
            net.spec().input,
            clip.shape()
        ))),
    }
}

/// Index of the feature output for `layer`, which must lie in the convolutional part.
fn target_layer(net: &Network, layer: &str) -> Result<usize> {
    let spec = net.spec();
    let f = spec.feature_layer(layer)?;
    let spatial = spec.layers[..=f]
        .iter()
        .all(|l| matches!(l.kind, LayerKind::Conv3d(_) | LayerKind::MaxPool3d(_) | LayerKind::Relu));
    if !spatial {
        return Err(Error::Layer { layer: layer.into(), reason: "not a convolutional feature map".into() });
    }
    Ok(f)
}

/// Projects `signal`, shaped like the feature output of `layer` for one clip,
/// back to the clip's input space.
pub fn deconv_project(net: &Network, clip: &Tensor, layer: &str, signal: &Tensor, relu: ReluMode) -> Result<Tensor> {
    let batch = as_batch(net, clip)?;
    let f = target_layer(net, layer)?;
    let expected = [&[1], net.layer_shape(f)].concat();
    let signal = match signal.dims().len() {
        4 => signal.reshape(&expected)?,
        _ => signal.clone(),
    };
    if signal.dims() != expected.as_slice() {
        return Err(Error::ShapeMismatch(format!("signal {} for layer output {:?}", signal.shape(), expected)));
    }
    let trace = net.forward_through(&batch, f, true)?;
    let out = reverse(net, &trace, f, signal, relu)?;
    out.into_reshape(clip.dims())
}

fn reverse(net: &Network, trace: &crate::network::ForwardTrace, f: usize, mut g: Tensor, relu: ReluMode) -> Result<Tensor> {
    for i in (0..=f).rev() {
        let x = if i == 0 { trace.input() } else { trace.output(i - 1) };
        g = match &net.spec().layers[i].kind {
            LayerKind::Relu => match relu {
                ReluMode::Deconvnet => g.map(|v| v.max(0.0)),
                ReluMode::ForwardMask => {
                    let mut g = g;
                    for (v, &xi) in g.data_mut().iter_mut().zip(x.data()) {
                        if xi <= 0.0 {
                            *v = 0.0;
                        }
                    }
                    g
                }
            },
            LayerKind::MaxPool3d(_) => {
                let sw = trace.switches(i).ok_or_else(|| Error::MissingCache("pool switches".into()))?;
                maxpool3d_backward(sw, &g, x.dims())?
            }
            LayerKind::Conv3d(c) => {
                let p = net.params()[i].as_ref().expect("conv params");
                conv3d_transpose(&g, &p.weight, c)?
            }
            _ => unreachable!("target_layer admits only convolutional stacks"),
        };
    }
    Ok(g)
}

/// Keeps only the selected activation of `request.channel` and projects it down.
/// The output has the clip's shape.
pub fn deconv_feature_map(net: &Network, clip: &Tensor, request: &DeconvRequest) -> Result<Tensor> {
    let batch = as_batch(net, clip)?;
    let f = target_layer(net, &request.layer)?;
    let shape = net.layer_shape(f).to_vec();
    let [c, l, h, w] = [shape[0], shape[1], shape[2], shape[3]];
    if request.channel >= c {
        return Err(Error::Layer {
            layer: request.layer.clone(),
            reason: format!("channel {} out of range for {c} channels", request.channel),
        });
    }
    let trace = net.forward_through(&batch, f, true)?;
    let plane = l * h * w;
    let acts = &trace.output(f).data()[request.channel * plane..(request.channel + 1) * plane];
    let flat = match request.selection {
        Selection::Top1 => argmax_first(acts),
        Selection::Position { t, y, x } => {
            if t >= l || y >= h || x >= w {
                return Err(Error::Layer {
                    layer: request.layer.clone(),
                    reason: format!("position ({t},{y},{x}) outside extents ({l},{h},{w})"),
                });
            }
            (t * h + y) * w + x
        }
    };
    let mut signal = Tensor::zeros(&[1, c, l, h, w])?;
    signal.data_mut()[request.channel * plane + flat] = acts[flat];
    let out = reverse(net, &trace, f, signal, request.relu)?;
    out.into_reshape(clip.dims())
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The `count` strongest activations of one channel over a clip set, by
/// descending value, ties by (clip index, flat position).
pub fn top_activations(net: &Network, clips: &[Tensor], layer: &str, channel: usize, count: usize) -> Result<Vec<Activation>> {
    let f = target_layer(net, layer)?;
    let shape = net.layer_shape(f).to_vec();
    let (c, l, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    if channel >= c {
        return Err(Error::Layer { layer: layer.into(), reason: format!("channel {channel} out of range for {c} channels") });
    }
    let plane = l * h * w;
    let mut all = Vec::with_capacity(clips.len() * plane);
    for (ci, clip) in clips.iter().enumerate() {
        let trace = net.forward_through(&as_batch(net, clip)?, f, false)?;
        let acts = &trace.output(f).data()[channel * plane..(channel + 1) * plane];
        all.extend(acts.iter().enumerate().map(|(p, &v)| (ci, p, v)));
    }
    all.sort_by(|a, b| match b.2.total_cmp(&a.2) {
        Ordering::Equal => (a.0, a.1).cmp(&(b.0, b.1)),
        o => o,
    });
    Ok(all
        .into_iter()
        .take(count)
        .map(|(clip, p, value)| Activation { clip, position: (p / (h * w), (p / w) % h, p % w), value })
        .collect())
}
