//! Stride-1, same-padded 3D convolution (cross-correlation).
//!
//! The forward pass lowers each output frame to a patch matrix and multiplies
//! it by the flattened filter bank. The input gradient is the forward pass
//! applied with spatially and temporally flipped, channel-transposed filters,
//! which for odd kernels at stride 1 is exactly the transpose of the forward map.

use rayon::prelude::*;

use super::gemm::{gemm, Mat};
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Geometry of a `d x k x k` filter bank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvKernelSpec {
    pub out_channels: usize,
    pub in_channels: usize,
    pub temporal_depth: usize,
    pub spatial_size: usize,
}

impl ConvKernelSpec {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        temporal_depth: usize,
        spatial_size: usize,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::InvalidConfig("convolution channel counts must be positive".into()));
        }
        if temporal_depth % 2 == 0 || spatial_size % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "kernel {temporal_depth}x{spatial_size}x{spatial_size} must have odd extents"
            )));
        }
        Ok(ConvKernelSpec { out_channels, in_channels, temporal_depth, spatial_size })
    }

    /// Zero padding `(temporal, spatial)` that keeps extents unchanged.
    pub fn padding(&self) -> (usize, usize) {
        ((self.temporal_depth - 1) / 2, (self.spatial_size - 1) / 2)
    }

    pub fn weight_dims(&self) -> [usize; 5] {
        let k = self.spatial_size;
        [self.out_channels, self.in_channels, self.temporal_depth, k, k]
    }

    /// Length of one flattened receptive field, `in_channels * d * k * k`.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.temporal_depth * self.spatial_size * self.spatial_size
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * self.patch_len() + self.out_channels
    }

    #[cfg(test)]
    fn transposed(&self) -> Self {
        ConvKernelSpec {
            out_channels: self.in_channels,
            in_channels: self.out_channels,
            ..*self
        }
    }
}

/// Gradients of a convolution with respect to its three inputs.
#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check_shapes(input: &Tensor, weights: &Tensor, spec: &ConvKernelSpec) -> Result<[usize; 5]> {
    let dims = input.dims5("conv3d input")?;
    if dims[1] != spec.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "conv3d expects {} input channels, got {}",
            spec.in_channels, dims[1]
        )));
    }
    if weights.dims() != spec.weight_dims() {
        return Err(Error::ShapeMismatch(format!(
            "conv3d weights {} do not match kernel {:?}",
            weights.shape(),
            spec.weight_dims()
        )));
    }
    Ok(dims)
}

/// Upper bound on im2col buffer elements (256 KiB of `f64`), sized to stay in cache.
const COLS_BUDGET: usize = 1 << 15;

/// Frames per im2col chunk so that `patch * frames * hw` stays within budget.
fn frames_per_chunk(patch: usize, hw: usize, l: usize) -> usize {
    (COLS_BUDGET / (patch * hw).max(1)).clamp(1, l)
}

/// Gathers the receptive fields of frames `t0..t0 + frames` into `cols`,
/// a `patch_len x (frames * h * w)` row-major matrix.
fn im2col(x: &[f64], dims: [usize; 4], spec: &ConvKernelSpec, t0: usize, frames: usize, cols: &mut [f64]) {
    let hw = dims[2] * dims[3];
    for f in 0..frames {
        im2col_frame(x, dims, spec, t0 + f, cols, frames * hw, f * hw);
    }
}

/// Receptive fields of output frame `t`: row `r` lands at `cols[r * stride + offset..][..h*w]`.
fn im2col_frame(x: &[f64], dims: [usize; 4], spec: &ConvKernelSpec, t: usize, cols: &mut [f64], stride: usize, offset: usize) {
    let [ci, l, h, w] = dims;
    let hw = h * w;
    let (pt, ps) = spec.padding();
    let (d, k) = (spec.temporal_depth, spec.spatial_size);
    let mut row = 0;
    for c in 0..ci {
        for dt in 0..d {
            let ti = (t + dt) as isize - pt as isize;
            for dy in 0..k {
                for dx in 0..k {
                    let dst = &mut cols[row * stride + offset..][..hw];
                    row += 1;
                    if ti < 0 || ti >= l as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let frame = &x[(c * l + ti as usize) * hw..][..hw];
                    let off = dx as isize - ps as isize;
                    let x_lo = (-off).clamp(0, w as isize) as usize;
                    let x_hi = (w as isize - off).clamp(0, w as isize) as usize;
                    for y in 0..h {
                        let drow = &mut dst[y * w..(y + 1) * w];
                        let yi = (y + dy) as isize - ps as isize;
                        if yi < 0 || yi >= h as isize || x_lo >= x_hi {
                            drow.fill(0.0);
                            continue;
                        }
                        let src = yi as usize * w;
                        drow[..x_lo].fill(0.0);
                        drow[x_hi..].fill(0.0);
                        let s0 = (src as isize + x_lo as isize + off) as usize;
                        drow[x_lo..x_hi].copy_from_slice(&frame[s0..s0 + (x_hi - x_lo)]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds `cols` back onto the frames they were gathered from.
fn col2im(cols: &[f64], dims: [usize; 4], spec: &ConvKernelSpec, t0: usize, frames: usize, x: &mut [f64]) {
    let [ci, l, h, w] = dims;
    let hw = h * w;
    let stride = frames * hw;
    let (pt, ps) = spec.padding();
    let (d, k) = (spec.temporal_depth, spec.spatial_size);
    for f in 0..frames {
        let t = t0 + f;
        let mut row = 0;
        for c in 0..ci {
            for dt in 0..d {
                let ti = (t + dt) as isize - pt as isize;
                for dy in 0..k {
                    for dx in 0..k {
                        let src = &cols[row * stride + f * hw..][..hw];
                        row += 1;
                        if ti < 0 || ti >= l as isize {
                            continue;
                        }
                        let frame = &mut x[(c * l + ti as usize) * hw..][..hw];
                        let off = dx as isize - ps as isize;
                        let x_lo = (-off).clamp(0, w as isize) as usize;
                        let x_hi = (w as isize - off).clamp(0, w as isize) as usize;
                        if x_lo >= x_hi {
                            continue;
                        }
                        for y in 0..h {
                            let yi = (y + dy) as isize - ps as isize;
                            if yi < 0 || yi >= h as isize {
                                continue;
                            }
                            let d0 = (yi as usize * w) as isize + x_lo as isize + off;
                            let dst = &mut frame[d0 as usize..][..x_hi - x_lo];
                            for (a, b) in dst.iter_mut().zip(&src[y * w + x_lo..y * w + x_hi]) {
                                *a += b;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `out[n, co] = sum_ci input[n, ci] * weights[co, ci] + bias[co]`, zero padded.
pub fn conv3d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    spec: &ConvKernelSpec,
) -> Result<Tensor> {
    let [n, ci, l, h, w] = check_shapes(input, weights, spec)?;
    if bias.len() != spec.out_channels {
        return Err(Error::ShapeMismatch(format!(
            "conv3d bias has {} entries for {} filters",
            bias.len(),
            spec.out_channels
        )));
    }
    let co = spec.out_channels;
    let hw = h * w;
    let patch = spec.patch_len();
    let item_in = ci * l * hw;
    let item_out = co * l * hw;
    let chunk = frames_per_chunk(patch, hw, l);
    let mut out = vec![0.0; n * item_out];

    out.par_chunks_mut(item_out).enumerate().for_each(|(b, dst)| {
        let x = &input.data()[b * item_in..(b + 1) * item_in];
        for (o, plane) in dst.chunks_mut(l * hw).enumerate() {
            plane.fill(bias.data()[o]);
        }
        let mut cols = vec![0.0; patch * chunk * hw];
        for t0 in (0..l).step_by(chunk) {
            let frames = chunk.min(l - t0);
            let cols = &mut cols[..patch * frames * hw];
            im2col(x, [ci, l, h, w], spec, t0, frames, cols);
            // Output rows are channels with stride l*hw; this chunk starts at frame t0.
            gemm(
                co,
                patch,
                frames * hw,
                1.0,
                Mat::rows(weights.data(), patch),
                Mat::rows(cols, frames * hw),
                1.0,
                &mut dst[t0 * hw..],
                l * hw,
            );
        }
    });
    Ok(Tensor::from_parts(Shape::new(&[n, co, l, h, w])?, out))
}

/// Filters flipped along all three kernel axes with in/out channels swapped.
#[cfg(test)]
fn flip_transpose(weights: &Tensor, spec: &ConvKernelSpec) -> Tensor {
    let [co, ci, d, k, _] = spec.weight_dims();
    let src = weights.data();
    let mut dst = vec![0.0; src.len()];
    for o in 0..co {
        for i in 0..ci {
            for dt in 0..d {
                for dy in 0..k {
                    for dx in 0..k {
                        let s = (((o * ci + i) * d + dt) * k + dy) * k + dx;
                        let t = (((i * co + o) * d + (d - 1 - dt)) * k + (k - 1 - dy)) * k
                            + (k - 1 - dx);
                        dst[t] = src[s];
                    }
                }
            }
        }
    }
    Tensor::from_parts(Shape::new(&[ci, co, d, k, k]).expect("valid"), dst)
}

/// Transpose of the forward map: routes an output-space signal back to input space.
///
/// Equals the input gradient of [`conv3d_forward`] for upstream gradient `signal`.
pub fn conv3d_transpose(signal: &Tensor, weights: &Tensor, spec: &ConvKernelSpec) -> Result<Tensor> {
    let dims = signal.dims5("conv3d transpose signal")?;
    if dims[1] != spec.out_channels {
        return Err(Error::ShapeMismatch(format!(
            "transpose expects {} channels, got {}",
            spec.out_channels, dims[1]
        )));
    }
    if weights.dims() != spec.weight_dims() {
        return Err(Error::ShapeMismatch(format!(
            "conv3d weights {} do not match kernel {:?}",
            weights.shape(),
            spec.weight_dims()
        )));
    }
    let [n, co, l, h, w] = dims;
    let ci = spec.in_channels;
    let hw = h * w;
    let patch = spec.patch_len();
    let item_in = ci * l * hw;
    let item_out = co * l * hw;
    let chunk = frames_per_chunk(patch, hw, l);
    let mut out = vec![0.0; n * item_in];
    out.par_chunks_mut(item_in).enumerate().for_each(|(b, dst)| {
        let g = &signal.data()[b * item_out..(b + 1) * item_out];
        let mut cols = vec![0.0; patch * chunk * hw];
        for t0 in (0..l).step_by(chunk) {
            let frames = chunk.min(l - t0);
            let cols = &mut cols[..patch * frames * hw];
            let g_t = Mat { data: &g[t0 * hw..], rs: l * hw, cs: 1 };
            gemm(patch, co, frames * hw, 1.0, Mat::transposed(weights.data(), patch), g_t, 0.0, cols, frames * hw);
            col2im(cols, [ci, l, h, w], spec, t0, frames, dst);
        }
    });
    Ok(Tensor::from_parts(Shape::new(&[n, ci, l, h, w])?, out))
}

/// Weight and bias gradients only, for layers whose input needs no gradient.
pub fn conv3d_param_grads(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
    spec: &ConvKernelSpec,
) -> Result<(Tensor, Tensor)> {
    let [n, ci, l, h, w] = check_shapes(input, weights, spec)?;
    let co = spec.out_channels;
    if grad_out.dims() != [n, co, l, h, w] {
        return Err(Error::ShapeMismatch(format!(
            "conv3d grad_out {} does not match output ({n},{co},{l},{h},{w})",
            grad_out.shape()
        )));
    }
    let hw = h * w;
    let patch = spec.patch_len();
    let item_in = ci * l * hw;
    let item_out = co * l * hw;

    let mut grad_bias = vec![0.0; co];
    for b in 0..n {
        for (o, gb) in grad_bias.iter_mut().enumerate() {
            *gb += grad_out.data()[b * item_out + o * l * hw..][..l * hw].iter().sum::<f64>();
        }
    }

    // Per-item partial sums, reduced in item order.
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|b| {
            let x = &input.data()[b * item_in..(b + 1) * item_in];
            let g = &grad_out.data()[b * item_out..(b + 1) * item_out];
            let mut gw = vec![0.0; co * patch];
            let chunk = frames_per_chunk(patch, hw, l);
            let mut cols = vec![0.0; patch * chunk * hw];
            for t0 in (0..l).step_by(chunk) {
                let frames = chunk.min(l - t0);
                let cols = &mut cols[..patch * frames * hw];
                im2col(x, [ci, l, h, w], spec, t0, frames, cols);
                let g_t = Mat { data: &g[t0 * hw..], rs: l * hw, cs: 1 };
                gemm(co, frames * hw, patch, 1.0, g_t, Mat::transposed(cols, frames * hw), 1.0, &mut gw, patch);
            }
            gw
        })
        .collect();
    let mut grad_weights = vec![0.0; co * patch];
    for p in &partials {
        for (acc, v) in grad_weights.iter_mut().zip(p) {
            *acc += v;
        }
    }

    Ok((
        Tensor::from_parts(Shape::new(&spec.weight_dims())?, grad_weights),
        Tensor::from_parts(Shape::new(&[co])?, grad_bias),
    ))
}

pub fn conv3d_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
    spec: &ConvKernelSpec,
) -> Result<ConvGrads> {
    let (gw, gb) = conv3d_param_grads(input, weights, grad_out, spec)?;
    Ok(ConvGrads { input: conv3d_transpose(grad_out, weights, spec)?, weights: gw, bias: gb })
}
