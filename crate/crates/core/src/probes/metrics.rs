//! ROC/AUC and cross-validation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn check_binary(scores: &[f64], positive: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != positive.len() {
        return Err(Error::ShapeMismatch(format!("{} scores for {} labels", scores.len(), positive.len())));
    }
    let p = positive.iter().filter(|&&b| b).count();
    let n = positive.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::InsufficientData("roc needs both positive and negative samples".into()));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidConfig(format!("score {s} is not comparable")));
    }
    Ok((p, n))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from mid-ranks.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let (p, n) = check_binary(scores, positive)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum keeps mid-ranks integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share the mid-rank (i + j + 2) / 2.
        let twice_mid = (i + j + 2) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| positive[k]).count() as u128;
        rank_sum2 += twice_mid * pos_in_group;
        i = j + 1;
    }
    let (p, n) = (p as u128, n as u128);
    // U statistic doubled: wins*2 + ties.
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// ROC points `(fpr, tpr)` from the strictest threshold down, starting at (0, 0).
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (p, n) = check_binary(scores, positive)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(points)
}

pub fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("fpr,tpr\n");
    for (f, t) in points {
        let _ = writeln!(s, "{f},{t}");
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    KFold { k: usize, seed: u64 },
    LeaveOneOut,
}

/// Test-index sets of each fold; together they partition `0..n`.
pub fn make_folds(n: usize, protocol: Protocol) -> Result<Vec<Vec<usize>>> {
    match protocol {
        Protocol::LeaveOneOut => {
            if n < 2 {
                return Err(Error::InsufficientData("leave-one-out needs at least 2 samples".into()));
            }
            Ok((0..n).map(|i| vec![i]).collect())
        }
        Protocol::KFold { k, seed } => {
            if k < 2 || k > n {
                return Err(Error::InvalidConfig(format!("{k} folds for {n} samples")));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut folds = vec![Vec::new(); k];
            for (pos, i) in idx.into_iter().enumerate() {
                folds[pos % k].push(i);
            }
            folds.iter_mut().for_each(|f| f.sort_unstable());
            Ok(folds)
        }
    }
}

/// Folds that never split a group: each group's samples share one fold.
pub fn group_folds(groups: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut ids: Vec<usize> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if k < 2 || k > ids.len() {
        return Err(Error::InvalidConfig(format!("{k} folds for {} groups", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, &g) in groups.iter().enumerate() {
        let pos = ids.iter().position(|&x| x == g).expect("group listed");
        folds[pos % k].push(i);
    }
    Ok(folds)
}

/// A prediction for one test sample; `score` ranks the positive class of a binary task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub accuracy: f64,
    /// Binary tasks with both classes in the test fold only.
    pub auc: Option<f64>,
    pub test_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub mean_auc: Option<f64>,
    /// Test-fold prediction of every sample, `None` for samples in no fold.
    pub predictions: Vec<Option<Prediction>>,
}

impl CvReport {
    /// One row per fold, then a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,test_size,accuracy,auc\n");
        let fmt = |a: Option<f64>| a.map(|v| v.to_string()).unwrap_or_default();
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{}", f.test_size, f.accuracy, fmt(f.auc));
        }
        let total: usize = self.folds.iter().map(|f| f.test_size).sum();
        let _ = writeln!(s, "mean,{total},{},{}", self.mean_accuracy, fmt(self.mean_auc));
        s
    }
}

/// Runs `probe(train_x, train_y, test_x)` on every fold.
pub fn cross_validate<F>(features: &[Vec<f64>], labels: &[usize], folds: &[Vec<usize>], probe: F) -> Result<CvReport>
where
    F: Fn(&[Vec<f64>], &[usize], &[Vec<f64>]) -> Result<Vec<Prediction>>,
{
    if features.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} samples", labels.len(), features.len())));
    }
    if folds.is_empty() {
        return Err(Error::InvalidConfig("no folds".into()));
    }
    let binary = labels.iter().all(|&l| l < 2);
    let mut in_test = vec![false; features.len()];
    let mut results = Vec::with_capacity(folds.len());
    let mut predictions = vec![None; features.len()];
    for fold in folds {
        if fold.is_empty() {
            return Err(Error::InvalidConfig("empty fold".into()));
        }
        in_test.iter_mut().for_each(|b| *b = false);
        for &i in fold {
            in_test[i] = true;
        }
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for i in (0..features.len()).filter(|&i| !in_test[i]) {
            tx.push(features[i].clone());
            ty.push(labels[i]);
        }
        let test_x: Vec<Vec<f64>> = fold.iter().map(|&i| features[i].clone()).collect();
        let preds = probe(&tx, &ty, &test_x)?;
        if preds.len() != fold.len() {
            return Err(Error::ShapeMismatch(format!("{} predictions for {} test samples", preds.len(), fold.len())));
        }
        for (p, &i) in preds.iter().zip(fold) {
            predictions[i] = Some(*p);
        }
        let correct = preds.iter().zip(fold).filter(|(p, &i)| p.label == labels[i]).count();
        let auc = if binary {
            let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
            let pos: Vec<bool> = fold.iter().map(|&i| labels[i] == 1).collect();
            roc_auc(&scores, &pos).ok()
        } else {
            None
        };
        results.push(FoldResult { accuracy: correct as f64 / fold.len() as f64, auc, test_size: fold.len() });
    }
    let mean_accuracy = results.iter().map(|f| f.accuracy).sum::<f64>() / results.len() as f64;
    let aucs: Vec<f64> = results.iter().filter_map(|f| f.auc).collect();
    let mean_auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    Ok(CvReport { folds: results, mean_accuracy, mean_auc, predictions })
}
