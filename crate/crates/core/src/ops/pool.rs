//! Non-overlapping 3D max pooling in ceiling mode.

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Pooling window `(dt, dh, dw)`; the stride always equals the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolSpec {
    pub kernel: [usize; 3],
}

impl PoolSpec {
    pub fn new(dt: usize, dh: usize, dw: usize) -> Result<Self> {
        if dt == 0 || dh == 0 || dw == 0 {
            return Err(Error::InvalidConfig(format!(
                "pool kernel {dt}x{dh}x{dw} must be positive"
            )));
        }
        Ok(PoolSpec { kernel: [dt, dh, dw] })
    }

    /// `ceil(in / kernel)` per axis; the trailing partial window is kept.
    pub fn output_extents(&self, l: usize, h: usize, w: usize) -> [usize; 3] {
        let [kt, kh, kw] = self.kernel;
        [l.div_ceil(kt), h.div_ceil(kh), w.div_ceil(kw)]
    }
}

/// Flat input index of the maximum for every output element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolSwitches {
    input_dims: [usize; 5],
    output_dims: [usize; 5],
    indices: Vec<usize>,
}

impl PoolSwitches {
    pub fn input_dims(&self) -> [usize; 5] {
        self.input_dims
    }

    pub fn output_dims(&self) -> [usize; 5] {
        self.output_dims
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Max over each window; ties resolve to the lowest flat input index.
pub fn maxpool3d_forward(input: &Tensor, spec: &PoolSpec) -> Result<(Tensor, PoolSwitches)> {
    let [n, c, l, h, w] = input.dims5("maxpool3d input")?;
    let [ol, oh, ow] = spec.output_extents(l, h, w);
    let [kt, kh, kw] = spec.kernel;
    let x = input.data();
    let total = n * c * ol * oh * ow;
    let mut out = Vec::with_capacity(total);
    let mut idx = Vec::with_capacity(total);
    for plane in 0..n * c {
        let base = plane * l * h * w;
        for t in 0..ol {
            let t_end = ((t + 1) * kt).min(l);
            for y in 0..oh {
                let y_end = ((y + 1) * kh).min(h);
                for xo in 0..ow {
                    let x_end = ((xo + 1) * kw).min(w);
                    let mut best = base + ((t * kt) * h + y * kh) * w + xo * kw;
                    let mut best_v = x[best];
                    // Row-major scan visits flat indices in increasing order.
                    for ti in t * kt..t_end {
                        for yi in y * kh..y_end {
                            let row = base + (ti * h + yi) * w;
                            for xi in xo * kw..x_end {
                                let v = x[row + xi];
                                if v > best_v {
                                    best_v = v;
                                    best = row + xi;
                                }
                            }
                        }
                    }
                    out.push(best_v);
                    idx.push(best);
                }
            }
        }
    }
    let output_dims = [n, c, ol, oh, ow];
    Ok((
        Tensor::from_parts(Shape::new(&output_dims)?, out),
        PoolSwitches { input_dims: [n, c, l, h, w], output_dims, indices: idx },
    ))
}

/// Routes each upstream gradient to the recorded argmax; also serves as max-unpooling.
pub fn maxpool3d_backward(
    switches: &PoolSwitches,
    grad_out: &Tensor,
    input_shape: &[usize],
) -> Result<Tensor> {
    if grad_out.dims() != switches.output_dims {
        return Err(Error::ShapeMismatch(format!(
            "maxpool3d grad_out {} does not match pooled shape {:?}",
            grad_out.shape(),
            switches.output_dims
        )));
    }
    if input_shape != switches.input_dims {
        return Err(Error::ShapeMismatch(format!(
            "maxpool3d input shape {input_shape:?} does not match switches {:?}",
            switches.input_dims
        )));
    }
    let mut grad = Tensor::zeros(input_shape)?;
    let g = grad.data_mut();
    for (&i, &v) in switches.indices.iter().zip(grad_out.data()) {
        g[i] += v;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, max_relative_error};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Distinct values spaced 0.01 apart in shuffled order, so no window has a tie
    /// within finite-difference reach.
    fn distinct(dims: &[usize], seed: u64) -> Tensor {
        let n: usize = dims.iter().product();
        let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 - 1.0).collect();
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Tensor::from_vec(dims, v).unwrap()
    }

    #[test]
    fn pool1_shape() {
        let spec = PoolSpec::new(1, 2, 2).unwrap();
        assert_eq!(spec.output_extents(16, 112, 112), [16, 56, 56]);
        let x = Tensor::zeros(&[1, 2, 4, 6, 6]).unwrap();
        let (y, _) = maxpool3d_forward(&x, &spec).unwrap();
        assert_eq!(y.dims(), &[1, 2, 4, 3, 3]);
    }

    #[test]
    fn ceiling_mode_keeps_partial_window() {
        let spec = PoolSpec::new(2, 2, 2).unwrap();
        assert_eq!(spec.output_extents(1, 7, 7), [1, 4, 4]);
        let x = distinct(&[1, 1, 3, 7, 5], 1);
        let (y, sw) = maxpool3d_forward(&x, &spec).unwrap();
        assert_eq!(y.dims(), &[1, 1, 2, 4, 3]);
        // The last window along every axis is the single trailing element at (2, 6, 4).
        let last_window_max = x.data()[(2 * 7 + 6) * 5 + 4];
        assert_eq!(*y.data().last().unwrap(), last_window_max);
        assert_eq!(*sw.indices().last().unwrap(), (2 * 7 + 6) * 5 + 4);
    }

    #[test]
    fn constant_input_switches_to_first_index() {
        let spec = PoolSpec::new(2, 2, 2).unwrap();
        let x = Tensor::new(&[1, 1, 2, 4, 4], 3.0).unwrap();
        let (y, sw) = maxpool3d_forward(&x, &spec).unwrap();
        assert!(y.data().iter().all(|&v| v == 3.0));
        assert_eq!(sw.indices(), &[0, 2, 8, 10]);
    }

    #[test]
    fn ones_route_to_argmax() {
        let spec = PoolSpec::new(1, 2, 2).unwrap();
        let x = Tensor::from_vec(&[1, 1, 1, 2, 2], vec![0.1, 0.7, 0.3, 0.2]).unwrap();
        let (_, sw) = maxpool3d_forward(&x, &spec).unwrap();
        let g = maxpool3d_backward(&sw, &Tensor::new(&[1, 1, 1, 1, 1], 1.0).unwrap(), x.dims())
            .unwrap();
        assert_eq!(g.data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn mismatched_grad_is_rejected() {
        let spec = PoolSpec::new(2, 2, 2).unwrap();
        let x = Tensor::zeros(&[1, 1, 2, 2, 2]).unwrap();
        let (_, sw) = maxpool3d_forward(&x, &spec).unwrap();
        let bad = Tensor::zeros(&[1, 1, 1, 1, 2]).unwrap();
        assert!(maxpool3d_backward(&sw, &bad, x.dims()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = PoolSpec::new(2, 2, 2).unwrap();
        let x = distinct(&[2, 2, 3, 5, 4], 2);
        let (y, sw) = maxpool3d_forward(&x, &spec).unwrap();
        let r = Tensor::random_init(y.dims(), crate::tensor::InitScheme::UniformFanIn, 3).unwrap();
        let loss = |t: &Tensor| -> f64 {
            let (y, _) = maxpool3d_forward(t, &spec).unwrap();
            y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
        };
        let analytic = maxpool3d_backward(&sw, &r, x.dims()).unwrap();
        let numeric = central_difference(loss, &x, 1e-3);
        assert!(max_relative_error(&analytic, &numeric) < 1e-4);
    }

    proptest! {
        #[test]
        fn routing_conserves_gradient_mass(
            l in 1usize..5, h in 1usize..7, w in 1usize..7, seed in 0u64..500,
        ) {
            let spec = PoolSpec::new(2, 2, 2).unwrap();
            let x = Tensor::random_init(&[1, 2, l, h, w], crate::tensor::InitScheme::UniformFanIn, seed).unwrap();
            let (y, sw) = maxpool3d_forward(&x, &spec).unwrap();
            let g = Tensor::random_init(y.dims(), crate::tensor::InitScheme::UniformFanIn, seed + 1).unwrap();
            let back = maxpool3d_backward(&sw, &g, x.dims()).unwrap();
            prop_assert!((back.sum() - g.sum()).abs() < 1e-12);
            for (o, &i) in sw.indices().iter().enumerate() {
                prop_assert_eq!(x.data()[i], y.data()[o]);
            }
        }
    }
}
