//! Spatiotemporal (3D) convolutional networks for video.
//!
//! The crate covers the numeric kernels ([`ops`]), declarative architectures
//! and their presets ([`network`]), SGD training ([`trainer`]), synthetic
//! video data ([`videodata`]), clip-averaged video descriptors
//! ([`descriptor`]), downstream evaluation probes ([`probes`]) and
//! deconvolution-based visualization ([`deconv`]).

pub mod deconv;
pub mod descriptor;
pub mod error;
pub mod gradcheck;
pub mod network;
pub mod ops;
pub mod probes;
pub mod tensor;
pub mod trainer;
pub mod videodata;

pub use error::{Error, Result};
pub use tensor::{InitScheme, Shape, Tensor};
