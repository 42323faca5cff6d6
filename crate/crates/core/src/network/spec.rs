//! Declarative layer lists, shape inference and architecture presets.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ops::{ConvKernelSpec, PoolSpec};
use crate::tensor::InitScheme;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Conv3d(ConvKernelSpec),
    MaxPool3d(PoolSpec),
    Relu,
    Flatten,
    Linear { in_features: usize, out_features: usize },
    /// Classifier head; its forward output is the class distribution.
    SoftmaxXent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// Weight initialization for parametric layers. Biases start at zero.
    pub init: InitScheme,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec { name: name.into(), kind, init: InitScheme::UniformFanIn }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self.kind, LayerKind::Conv3d(_) | LayerKind::Linear { .. })
    }

    /// `(weight dims, bias dims)` for parametric layers.
    pub fn param_dims(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match &self.kind {
            LayerKind::Conv3d(c) => Some((c.weight_dims().to_vec(), vec![c.out_channels])),
            LayerKind::Linear { in_features, out_features } => {
                Some((vec![*out_features, *in_features], vec![*out_features]))
            }
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_dims()
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .unwrap_or(0)
    }
}

/// Input geometry `(c, l, h, w)`, an ordered layer list and the class count.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub input: [usize; 4],
    pub layers: Vec<LayerSpec>,
    pub class_count: usize,
}

/// Per-layer and total parameter counts, biases included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub per_layer: Vec<(String, usize)>,
    pub total: usize,
}

impl NetworkSpec {
    /// Output extents (without the batch axis) of every layer, in order.
    pub fn infer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input.contains(&0) {
            return Err(Error::InvalidShape(format!("input {:?} has a zero extent", self.input)));
        }
        let mut seen = HashSet::new();
        let mut shape = self.input.to_vec();
        let mut shapes = Vec::with_capacity(self.layers.len());
        let fail = |layer: &LayerSpec, reason: String| Error::Layer { layer: layer.name.clone(), reason };
        for (i, layer) in self.layers.iter().enumerate() {
            if !seen.insert(layer.name.as_str()) {
                return Err(fail(layer, "duplicate layer name".into()));
            }
            shape = match &layer.kind {
                LayerKind::Conv3d(c) => {
                    if shape.len() != 4 {
                        return Err(fail(layer, format!("expects a (c,l,h,w) input, got {shape:?}")));
                    }
                    if shape[0] != c.in_channels {
                        return Err(fail(
                            layer,
                            format!("expects {} input channels, got {}", c.in_channels, shape[0]),
                        ));
                    }
                    vec![c.out_channels, shape[1], shape[2], shape[3]]
                }
                LayerKind::MaxPool3d(p) => {
                    if shape.len() != 4 {
                        return Err(fail(layer, format!("expects a (c,l,h,w) input, got {shape:?}")));
                    }
                    let [l, h, w] = p.output_extents(shape[1], shape[2], shape[3]);
                    vec![shape[0], l, h, w]
                }
                LayerKind::Relu => shape,
                LayerKind::Flatten => vec![shape.iter().product()],
                LayerKind::Linear { in_features, out_features } => {
                    if shape != [*in_features] {
                        return Err(fail(
                            layer,
                            format!("expects {in_features} input features, got {shape:?}"),
                        ));
                    }
                    vec![*out_features]
                }
                LayerKind::SoftmaxXent => {
                    if i + 1 != self.layers.len() {
                        return Err(fail(layer, "softmax head must be the last layer".into()));
                    }
                    if shape != [self.class_count] {
                        return Err(fail(
                            layer,
                            format!("expects {} logits, got {shape:?}", self.class_count),
                        ));
                    }
                    shape
                }
            };
            shapes.push(shape.clone());
        }
        match self.layers.last() {
            Some(LayerSpec { kind: LayerKind::SoftmaxXent, .. }) => Ok(shapes),
            _ => Err(Error::InvalidConfig("network must end with a softmax classifier head".into())),
        }
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers.iter().position(|l| l.name == name).ok_or_else(|| Error::UnknownLayer {
            name: name.to_string(),
            valid: self.layers.iter().map(|l| l.name.clone()).collect(),
        })
    }

    pub fn layer_names(&self) -> Vec<&str> {
        self.layers.iter().map(|l| l.name.as_str()).collect()
    }

    /// Closed-form parameter count: `co*ci*d*k*k + co` per convolution,
    /// `out*in + out` per fully connected layer.
    pub fn count_params(&self) -> Result<ParamCount> {
        self.infer_shapes()?;
        let per_layer: Vec<(String, usize)> = self
            .layers
            .iter()
            .filter(|l| l.is_parametric())
            .map(|l| (l.name.clone(), l.param_count()))
            .collect();
        let total = per_layer.iter().map(|(_, c)| c).sum();
        Ok(ParamCount { per_layer, total })
    }

    /// Name of the layer whose output is the post-activation feature for `name`:
    /// the following ReLU if there is one, else the layer itself.
    pub fn feature_layer(&self, name: &str) -> Result<usize> {
        let i = self.layer_index(name)?;
        match self.layers.get(i + 1) {
            Some(LayerSpec { kind: LayerKind::Relu, .. }) => Ok(i + 1),
            _ => Ok(i),
        }
    }

    /// Switches every parametric layer to `U(-b, b)` weights with `b = sqrt(6 / fan_in)`.
    pub fn with_he_init(mut self) -> Self {
        for layer in &mut self.layers {
            let fan_in = match &layer.kind {
                LayerKind::Conv3d(c) => c.patch_len(),
                LayerKind::Linear { in_features, .. } => *in_features,
                _ => continue,
            };
            layer.init = InitScheme::Uniform((6.0 / fan_in as f64).sqrt());
        }
        self
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = (&str, &ConvKernelSpec)> {
        self.layers.iter().filter_map(|l| match &l.kind {
            LayerKind::Conv3d(c) => Some((l.name.as_str(), c)),
            _ => None,
        })
    }
}

/// Incremental construction that tracks the running shape.
pub struct SpecBuilder {
    input: [usize; 4],
    channels: usize,
    features: Option<usize>,
    layers: Vec<LayerSpec>,
    shape: [usize; 3],
}

impl SpecBuilder {
    pub fn new(input: [usize; 4]) -> Self {
        SpecBuilder {
            input,
            channels: input[0],
            features: None,
            layers: Vec::new(),
            shape: [input[1], input[2], input[3]],
        }
    }

    /// Convolution followed by its ReLU (named `relu` + the suffix after `conv`).
    pub fn conv_relu(mut self, name: &str, filters: usize, depth: usize, size: usize) -> Result<Self> {
        let spec = ConvKernelSpec::new(filters, self.channels, depth, size)?;
        self.layers.push(LayerSpec::new(name, LayerKind::Conv3d(spec)));
        self.layers.push(LayerSpec::new(relu_name(name), LayerKind::Relu));
        self.channels = filters;
        Ok(self)
    }

    pub fn pool(mut self, name: &str, dt: usize, dh: usize, dw: usize) -> Result<Self> {
        let p = PoolSpec::new(dt, dh, dw)?;
        self.shape = p.output_extents(self.shape[0], self.shape[1], self.shape[2]);
        self.layers.push(LayerSpec::new(name, LayerKind::MaxPool3d(p)));
        Ok(self)
    }

    fn in_features(&mut self) -> usize {
        match self.features {
            Some(f) => f,
            None => {
                let f = self.channels * self.shape.iter().product::<usize>();
                self.layers.push(LayerSpec::new("flatten", LayerKind::Flatten));
                self.features = Some(f);
                f
            }
        }
    }

    pub fn fc_relu(mut self, name: &str, width: usize) -> Self {
        let in_features = self.in_features();
        self.layers.push(LayerSpec::new(name, LayerKind::Linear { in_features, out_features: width }));
        self.layers.push(LayerSpec::new(relu_name(name), LayerKind::Relu));
        self.features = Some(width);
        self
    }

    pub fn classifier(mut self, name: &str, classes: usize) -> Result<NetworkSpec> {
        let in_features = self.in_features();
        self.layers.push(LayerSpec::new(name, LayerKind::Linear { in_features, out_features: classes }));
        self.layers.push(LayerSpec::new("prob", LayerKind::SoftmaxXent));
        let spec = NetworkSpec { input: self.input, layers: self.layers, class_count: classes };
        spec.infer_shapes()?;
        Ok(spec)
    }
}

fn relu_name(layer: &str) -> String {
    let suffix = layer.strip_prefix("conv").or_else(|| layer.strip_prefix("fc")).unwrap_or(layer);
    format!("relu{suffix}")
}

/// Five-convolution family: each conv followed by a pool (`1x2x2` first,
/// `2x2x2` after), two fully connected layers and a classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyConfig {
    pub input: [usize; 4],
    pub filters: [usize; 5],
    pub depths: [usize; 5],
    pub spatial_size: usize,
    pub fc_width: usize,
}

impl FamilyConfig {
    pub fn full_scale(depths: [usize; 5], crop: usize) -> Self {
        FamilyConfig {
            input: [3, 16, crop, crop],
            filters: [64, 128, 256, 256, 256],
            depths,
            spatial_size: 3,
            fc_width: 2048,
        }
    }

    /// Narrow variant for small synthetic clips: filters 8-16-16-16-16, fc 64.
    pub fn desk(depths: [usize; 5], channels: usize, crop: usize) -> Self {
        FamilyConfig {
            input: [channels, 16, crop, crop],
            filters: [8, 16, 16, 16, 16],
            depths,
            spatial_size: 3,
            fc_width: 64,
        }
    }

    pub fn build(&self, classes: usize) -> Result<NetworkSpec> {
        let mut b = SpecBuilder::new(self.input);
        for i in 0..5 {
            let n = i + 1;
            b = b.conv_relu(&format!("conv{n}"), self.filters[i], self.depths[i], self.spatial_size)?;
            b = if i == 0 {
                b.pool("pool1", 1, 2, 2)?
            } else {
                b.pool(&format!("pool{n}"), 2, 2, 2)?
            };
        }
        b.fc_relu("fc6", self.fc_width).fc_relu("fc7", self.fc_width).classifier("fc8", classes)
    }
}

/// Eight-convolution C3D layout with arbitrary input and widths.
pub fn c3d_layout(input: [usize; 4], filters: [usize; 8], fc_width: usize, classes: usize) -> Result<NetworkSpec> {
    let names = ["conv1a", "conv2a", "conv3a", "conv3b", "conv4a", "conv4b", "conv5a", "conv5b"];
    // Pool after these conv indices.
    let pools = [(0, "pool1"), (1, "pool2"), (3, "pool3"), (5, "pool4"), (7, "pool5")];
    let mut b = SpecBuilder::new(input);
    for (i, name) in names.iter().enumerate() {
        b = b.conv_relu(name, filters[i], 3, 3)?;
        if let Some((_, pool)) = pools.iter().find(|(j, _)| *j == i) {
            b = if i == 0 { b.pool(pool, 1, 2, 2)? } else { b.pool(pool, 2, 2, 2)? };
        }
    }
    b.fc_relu("fc6", fc_width).fc_relu("fc7", fc_width).classifier("fc8", classes)
}

/// Named architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Homogeneous temporal depth 1, 3, 5 or 7.
    Depth(usize),
    Increase,
    Decrease,
    Net64,
    Net128,
    Net256,
    C3d,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::Depth(1),
        Preset::Depth(3),
        Preset::Depth(5),
        Preset::Depth(7),
        Preset::Increase,
        Preset::Decrease,
        Preset::Net64,
        Preset::Net128,
        Preset::Net256,
        Preset::C3d,
    ];

    pub fn spec(&self, class_count: usize) -> Result<NetworkSpec> {
        match *self {
            Preset::Depth(d) => FamilyConfig::full_scale([d; 5], 112).build(class_count),
            Preset::Increase => FamilyConfig::full_scale([3, 3, 5, 5, 7], 112).build(class_count),
            Preset::Decrease => FamilyConfig::full_scale([7, 5, 5, 3, 3], 112).build(class_count),
            Preset::Net64 => FamilyConfig::full_scale([3; 5], 64).build(class_count),
            Preset::Net128 => FamilyConfig::full_scale([3; 5], 112).build(class_count),
            // 224 crops of 256x256 frames.
            Preset::Net256 => FamilyConfig::full_scale([3; 5], 224).build(class_count),
            Preset::C3d => c3d_layout([3, 16, 112, 112], [64, 128, 256, 256, 512, 512, 512, 512], 4096, class_count),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Depth(d) => write!(f, "depth-{d}"),
            Preset::Increase => write!(f, "increase"),
            Preset::Decrease => write!(f, "decrease"),
            Preset::Net64 => write!(f, "net-64"),
            Preset::Net128 => write!(f, "net-128"),
            Preset::Net256 => write!(f, "net-256"),
            Preset::C3d => write!(f, "c3d"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "depth-1" => Preset::Depth(1),
            "depth-3" => Preset::Depth(3),
            "depth-5" => Preset::Depth(5),
            "depth-7" => Preset::Depth(7),
            "increase" => Preset::Increase,
            "decrease" => Preset::Decrease,
            "net-64" => Preset::Net64,
            "net-128" => Preset::Net128,
            "net-256" => Preset::Net256,
            "c3d" => Preset::C3d,
            other => return Err(Error::UnknownPreset(other.to_string())),
        })
    }
}

/// Builds a preset by name.
pub fn preset_spec(name: &str, class_count: usize) -> Result<NetworkSpec> {
    name.parse::<Preset>()?.spec(class_count)
}
