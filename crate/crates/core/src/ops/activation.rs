use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|x| x.max(0.0))
}

/// Passes `grad_out` where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.dims() != grad_out.dims() {
        return Err(Error::ShapeMismatch(format!(
            "relu grad {} vs input {}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(input.dims(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, max_relative_error};

    #[test]
    fn clamps_negatives() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&x, &Tensor::new(&[3], 5.0).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_zero() {
        let x = Tensor::from_vec(&[6], vec![-1.3, -0.2, 0.05, 0.4, 2.0, -0.01]).unwrap();
        let r = Tensor::from_vec(&[6], vec![0.3, -1.0, 2.0, 0.7, -0.4, 1.1]).unwrap();
        let loss = |t: &Tensor| relu(t).data().iter().zip(r.data()).map(|(a, b)| a * b).sum();
        let numeric = central_difference(loss, &x, 1e-3);
        let analytic = relu_backward(&x, &r).unwrap();
        assert!(max_relative_error(&analytic, &numeric) < 1e-4);
    }
}
