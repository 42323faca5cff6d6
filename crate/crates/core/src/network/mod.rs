//! Architectures: specification, presets, instantiation, forward/backward
//! over the layer chain, parameter counting and weight files.

mod model;
mod spec;
mod weights;

pub use model::{ForwardTrace, Gradients, LayerParams, Network};
pub use spec::{
    c3d_layout, preset_spec, FamilyConfig, LayerKind, LayerSpec, NetworkSpec, ParamCount, Preset,
    SpecBuilder,
};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WEIGHT_MAGIC, WEIGHT_VERSION};

pub(crate) use weights::Reader;
