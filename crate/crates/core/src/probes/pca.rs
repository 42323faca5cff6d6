//! Principal component analysis by exact symmetric eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

use super::svm::{check_matrix, mean_of};

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `dim`, by decreasing eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }
}

/// Top-`k` eigenvectors of the sample covariance. Each component's
/// largest-magnitude entry is made positive (first such entry on ties).
pub fn pca_fit(features: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let dim = check_matrix(features)?;
    let n = features.len();
    if k == 0 || k > dim || k + 1 > n {
        return Err(Error::InvalidConfig(format!(
            "pca k = {k} must be in 1..=min(samples - 1, dim) = {}",
            dim.min(n.saturating_sub(1))
        )));
    }
    let mean = mean_of(features, dim);
    let centered = DMatrix::from_fn(n, dim, |i, j| features[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        eigenvalues.push(eig.eigenvalues[j]);
    }
    Ok(PcaModel { mean, components, eigenvalues })
}

pub fn pca_project(model: &PcaModel, feature: &[f64]) -> Result<Vec<f64>> {
    if feature.len() != model.mean.len() {
        return Err(Error::ShapeMismatch(format!("feature of {} values, model expects {}", feature.len(), model.mean.len())));
    }
    Ok(model
        .components
        .iter()
        .map(|c| c.iter().zip(feature).zip(&model.mean).map(|((w, x), m)| w * (x - m)).sum())
        .collect())
}

/// Maps a projection back to feature space.
pub fn pca_reconstruct(model: &PcaModel, projected: &[f64]) -> Vec<f64> {
    let mut out = model.mean.clone();
    for (c, &z) in model.components.iter().zip(projected) {
        for (o, w) in out.iter_mut().zip(c) {
            *o += z * w;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn correlated_gaussian_axis() {
        // Covariance [[1, .9], [.9, 1]] has eigenvector [1, 1]/sqrt(2) for eigenvalue 1.9.
        // Sampling error of the angle is about 2.4e-4 at this size.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = Normal::new(0.0, 1.0).unwrap();
        let rho: f64 = 0.9;
        let xs: Vec<Vec<f64>> = (0..1_000_000)
            .map(|_| {
                let (a, b) = (g.sample(&mut rng), g.sample(&mut rng));
                vec![a, rho * a + (1.0 - rho * rho).sqrt() * b]
            })
            .collect();
        let m = pca_fit(&xs, 1).unwrap();
        let expected = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        let angle = dot(&m.components[0], &expected).clamp(-1.0, 1.0).acos();
        assert!(angle < 1e-3, "angle {angle}");
        assert!(m.components[0][0] > 0.0);
    }

    #[test]
    fn components_are_orthonormal_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..40).map(|_| (0..8).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect()).collect();
        let m = pca_fit(&xs, 8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&m.components[i], &m.components[j]) - expect).abs() < 1e-8);
            }
        }
        assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        // Projected data has diagonal covariance.
        let zs: Vec<Vec<f64>> = xs.iter().map(|x| pca_project(&m, x).unwrap()).collect();
        for a in 0..8 {
            for b in 0..a {
                let c: f64 = zs.iter().map(|z| z[a] * z[b]).sum::<f64>() / 39.0;
                assert!(c.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn subspace_data_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis: Vec<Vec<f64>> = (0..2).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                (0..6).map(|j| 1.0 + a * basis[0][j] + b * basis[1][j]).collect()
            })
            .collect();
        let m = pca_fit(&xs, 2).unwrap();
        for x in &xs {
            let r = pca_reconstruct(&m, &pca_project(&m, x).unwrap());
            assert!(r.iter().zip(x).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn k_bounds() {
        let xs = vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(pca_fit(&xs, 3).is_err());
        assert!(pca_fit(&xs, 0).is_err());
        assert_eq!(pca_fit(&xs, 2).unwrap().k(), 2);
    }
}
