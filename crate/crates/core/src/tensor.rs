//! Dense row-major tensors of `f64`.
//!
//! Five-dimensional tensors use the `(n, c, l, h, w)` layout: batch,
//! channels, temporal length, height and width. The last axis is contiguous.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Extents of a tensor, 1 to 5 axes, every extent at least 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 5 {
            return Err(Error::InvalidShape(format!(
                "expected 1 to 5 axes, got {}",
                dims.len()
            )));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("axis {pos} has extent 0 in {dims:?}")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape(format!("element count of {dims:?} overflows")))?;
        Ok(Shape(dims.to_vec()))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn ndim(&self) -> usize {
        self.0.len()
    }

    /// Number of elements. Never overflows, checked at construction.
    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Product of every extent except the first.
    pub fn fan_in(&self) -> usize {
        if self.0.len() == 1 {
            1
        } else {
            self.0[1..].iter().product()
        }
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Parameter initialization scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// `U(-b, b)` with `b = sqrt(1 / fan_in)`.
    UniformFanIn,
    /// `U(-bound, bound)`.
    Uniform(f64),
    Constant(f64),
}

impl InitScheme {
    /// Bound of the uniform distribution for a given fan-in.
    pub fn uniform_bound(fan_in: usize) -> f64 {
        (1.0 / fan_in as f64).sqrt()
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: &[usize], fill: f64) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![fill; shape.numel()];
        Ok(Tensor { shape, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::new(dims, 0.0)
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if data.len() != shape.numel() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for shape {shape}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Tensor { shape, data }
    }

    /// Deterministic initialization from `(shape, scheme, seed)`.
    pub fn random_init(dims: &[usize], scheme: InitScheme, seed: u64) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = match scheme {
            InitScheme::Constant(c) => vec![c; shape.numel()],
            InitScheme::UniformFanIn | InitScheme::Uniform(_) => {
                let bound = match scheme {
                    InitScheme::Uniform(b) => b,
                    _ => InitScheme::uniform_bound(shape.fan_in()),
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..shape.numel())
                    .map(|_| rng.random_range(-bound..bound))
                    .collect()
            }
        };
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Tensor> {
        self.clone().into_reshape(dims)
    }

    pub fn into_reshape(self, dims: &[usize]) -> Result<Tensor> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        Ok(Tensor { shape, data: self.data })
    }

    /// Five-dimensional extents, or a shape error naming `what`.
    pub fn dims5(&self, what: &str) -> Result<[usize; 5]> {
        match *self.dims() {
            [n, c, l, h, w] => Ok([n, c, l, h, w]),
            _ => Err(Error::ShapeMismatch(format!(
                "{what}: expected 5 axes (n,c,l,h,w), got {}",
                self.shape
            ))),
        }
    }

    pub fn dims2(&self, what: &str) -> Result<[usize; 2]> {
        match *self.dims() {
            [a, b] => Ok([a, b]),
            _ => Err(Error::ShapeMismatch(format!(
                "{what}: expected 2 axes, got {}",
                self.shape
            ))),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        self.map(|x| alpha * x)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Slice of one batch item along the leading axis.
    pub fn item(&self, index: usize) -> &[f64] {
        let stride = self.shape.fan_in();
        &self.data[index * stride..(index + 1) * stride]
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}
