//! Downstream probes on extracted features: linear SVM, PCA, pair similarity
//! with ROC/AUC, and cross-validation.

mod metrics;
mod pca;
mod similarity;
mod svm;

pub use metrics::{
    cross_validate, group_folds, make_folds, roc_auc, roc_csv, roc_curve, CvReport, FoldResult, Prediction, Protocol,
};
pub use pca::{pca_fit, pca_project, pca_reconstruct, PcaModel};
pub use similarity::{
    pair_distances, pair_feature, similarity_descriptors, similarity_features, znorm_apply, znorm_fit, ZNormalizer,
    DISTANCE_NAMES, PAIR_FEATURE_LEN, SIMILARITY_LAYERS,
};
pub use svm::{svm_accuracy, svm_predict, svm_train, SvmModel, DEFAULT_EPOCHS, DEFAULT_LAMBDA};

use crate::error::Result;

/// Linear SVM probe for [`cross_validate`], optionally z-normalizing with
/// statistics of the training fold only. The score is the class-1 margin
/// over class 0 (binary tasks) or the winning class score.
pub fn svm_probe(
    lambda: f64,
    epochs: usize,
    seed: u64,
    znorm: bool,
) -> impl Fn(&[Vec<f64>], &[usize], &[Vec<f64>]) -> Result<Vec<Prediction>> {
    move |train_x, train_y, test_x| {
        let (train_x, test_x) = if znorm {
            let z = znorm_fit(train_x)?;
            let tx = train_x.iter().map(|r| znorm_apply(&z, r)).collect::<Result<Vec<_>>>()?;
            let te = test_x.iter().map(|r| znorm_apply(&z, r)).collect::<Result<Vec<_>>>()?;
            (tx, te)
        } else {
            (train_x.to_vec(), test_x.to_vec())
        };
        let model = svm_train(&train_x, train_y, lambda, epochs, seed)?;
        test_x
            .iter()
            .map(|x| {
                let (label, scores) = svm_predict(&model, x)?;
                let score = if scores.len() == 2 { scores[1] - scores[0] } else { scores[label] };
                Ok(Prediction { label, score })
            })
            .collect()
    }
}

/// Number of PCA components kept by [`pca_svm_probe`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcaDims {
    Fixed(usize),
    /// `min(train samples - 1, dim)`.
    Full,
}

/// PCA fitted on the training fold, then [`svm_probe`] on the projections.
pub fn pca_svm_probe(
    dims: PcaDims,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> impl Fn(&[Vec<f64>], &[usize], &[Vec<f64>]) -> Result<Vec<Prediction>> {
    let svm = svm_probe(lambda, epochs, seed, false);
    move |train_x, train_y, test_x| {
        let k = match dims {
            PcaDims::Fixed(k) => k,
            PcaDims::Full => train_x.len().saturating_sub(1).min(train_x.first().map_or(0, Vec::len)),
        };
        let pca = pca_fit(train_x, k)?;
        let project = |rows: &[Vec<f64>]| rows.iter().map(|r| pca_project(&pca, r)).collect::<Result<Vec<_>>>();
        svm(&project(train_x)?, train_y, &project(test_x)?)
    }
}
