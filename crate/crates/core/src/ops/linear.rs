//! Fully connected layer, `y = x W^T + b` per row.

use super::gemm::{gemm, Mat};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

fn check(input: &Tensor, weights: &Tensor, bias: Option<&Tensor>) -> Result<(usize, usize, usize)> {
    let [n, din] = input.dims2("linear input")?;
    let [dout, wdin] = weights.dims2("linear weights")?;
    if wdin != din {
        return Err(Error::ShapeMismatch(format!(
            "linear weights expect {wdin} inputs, got {din}"
        )));
    }
    if let Some(b) = bias {
        if b.len() != dout {
            return Err(Error::ShapeMismatch(format!(
                "linear bias has {} entries for {dout} outputs",
                b.len()
            )));
        }
    }
    Ok((n, din, dout))
}

pub fn linear_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, din, dout) = check(input, weights, Some(bias))?;
    let mut out = Vec::with_capacity(n * dout);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    gemm(
        n,
        din,
        dout,
        1.0,
        Mat::rows(input.data(), din),
        Mat::transposed(weights.data(), din),
        1.0,
        &mut out,
        dout,
    );
    Tensor::from_vec(&[n, dout], out)
}

pub fn linear_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<LinearGrads> {
    let (n, din, dout) = check(input, weights, None)?;
    if grad_out.dims() != [n, dout] {
        return Err(Error::ShapeMismatch(format!(
            "linear grad_out {} does not match ({n},{dout})",
            grad_out.shape()
        )));
    }
    let g = grad_out.data();
    let mut gx = vec![0.0; n * din];
    gemm(n, dout, din, 1.0, Mat::rows(g, dout), Mat::rows(weights.data(), din), 0.0, &mut gx, din);
    let mut gw = vec![0.0; dout * din];
    gemm(dout, n, din, 1.0, Mat::transposed(g, dout), Mat::rows(input.data(), din), 0.0, &mut gw, din);
    let mut gb = vec![0.0; dout];
    for row in g.chunks(dout) {
        for (acc, v) in gb.iter_mut().zip(row) {
            *acc += v;
        }
    }
    Ok(LinearGrads {
        input: Tensor::from_vec(&[n, din], gx)?,
        weights: Tensor::from_vec(&[dout, din], gw)?,
        bias: Tensor::from_vec(&[dout], gb)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, max_relative_error};
    use crate::tensor::InitScheme;

    #[test]
    fn identity_weights() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]).unwrap();
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let y = linear_forward(&x, &w, &Tensor::zeros(&[3]).unwrap()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn fc6_width() {
        let x = Tensor::zeros(&[1, 8192]).unwrap();
        let w = Tensor::zeros(&[4096, 8192]).unwrap();
        let y = linear_forward(&x, &w, &Tensor::zeros(&[4096]).unwrap()).unwrap();
        assert_eq!(y.dims(), &[1, 4096]);
    }

    #[test]
    fn dimension_mismatch() {
        let x = Tensor::zeros(&[1, 4]).unwrap();
        let w = Tensor::zeros(&[2, 3]).unwrap();
        assert!(linear_forward(&x, &w, &Tensor::zeros(&[2]).unwrap()).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = Tensor::random_init(&[3, 5], InitScheme::UniformFanIn, 1).unwrap();
        let w = Tensor::random_init(&[4, 5], InitScheme::UniformFanIn, 2).unwrap();
        let b = Tensor::random_init(&[4], InitScheme::UniformFanIn, 3).unwrap();
        let r = Tensor::random_init(&[3, 4], InitScheme::UniformFanIn, 4).unwrap();
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| -> f64 {
            let y = linear_forward(x, w, b).unwrap();
            y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
        };
        let g = linear_backward(&x, &w, &r).unwrap();
        assert!(max_relative_error(&g.input, &central_difference(|t| loss(t, &w, &b), &x, 1e-3)) < 1e-4);
        assert!(max_relative_error(&g.weights, &central_difference(|t| loss(&x, t, &b), &w, 1e-3)) < 1e-4);
        assert!(max_relative_error(&g.bias, &central_difference(|t| loss(&x, &w, t), &b, 1e-3)) < 1e-4);
    }
}
