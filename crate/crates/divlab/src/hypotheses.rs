//! Hypothesis-level measurements: predictions, agreement, accuracy (average
//! and worst-group), spurious ratio, decision-boundary angles, and the
//! agreement-score estimator.

use std::f64::consts::PI;

use crate::dataset::{Dataset, AUX_GROUP};
use crate::error::{Error, Result};
use crate::losses::BatchProbs;
use crate::matrix::Matrix;
use crate::model::{Model, ModelKind, ModelSpec};
use crate::seeds::derive_seed;
use crate::trainers::{train_erm_with_labels, TrainSchedule};

/// A labeling function: either a trained model or a fixed label vector.
///
/// Fixed hypotheses apply positionally, so they are only meaningful on the
/// dataset (or row ordering) they were built for; they exist so synthetic
/// constructions and code-theory checks share one interface with trained
/// models.
#[derive(Debug, Clone, PartialEq)]
pub enum Hypothesis {
    Model(Model),
    Fixed { labels: Vec<usize>, num_classes: usize },
}

impl Hypothesis {
    pub fn fixed(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidConfig("num_classes must be >= 2".into()));
        }
        if labels.iter().any(|&y| y >= num_classes) {
            return Err(Error::InvalidParameter("fixed label out of class range".into()));
        }
        Ok(Self::Fixed { labels, num_classes })
    }

    pub fn as_model(&self) -> Option<&Model> {
        match self {
            Self::Model(m) => Some(m),
            Self::Fixed { .. } => None,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Self::Model(m) => m.spec.num_classes,
            Self::Fixed { num_classes, .. } => *num_classes,
        }
    }

    /// Per-sample class probabilities; fixed hypotheses yield one-hot rows.
    pub fn probs(&self, x: &Matrix) -> Result<BatchProbs> {
        match self {
            Self::Model(m) => m.forward(x),
            Self::Fixed { labels, num_classes } => {
                if labels.len() != x.rows() {
                    return Err(Error::DimensionMismatch(format!(
                        "fixed hypothesis has {} labels, batch has {} rows",
                        labels.len(),
                        x.rows()
                    )));
                }
                BatchProbs::one_hot(labels, *num_classes)
            }
        }
    }
}

/// Argmax labels; exact ties break to the lowest class index.
pub fn predict_labels(h: &Hypothesis, data: &Dataset) -> Result<Vec<usize>> {
    match h {
        Hypothesis::Fixed { labels, .. } => {
            if labels.len() != data.len() {
                return Err(Error::DimensionMismatch(format!(
                    "fixed hypothesis has {} labels, dataset has {} rows",
                    labels.len(),
                    data.len()
                )));
            }
            Ok(labels.clone())
        }
        Hypothesis::Model(m) => {
            let probs = m.forward(&data.x)?;
            Ok(argmax_rows(probs.matrix()))
        }
    }
}

pub(crate) fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn fraction_equal(a: &[usize], b: &[usize]) -> f64 {
    let matches = a.iter().zip(b).filter(|(x, y)| x == y).count();
    matches as f64 / a.len() as f64
}

/// Fraction of points where the two hypotheses predict the same label.
pub fn agreement(h1: &Hypothesis, h2: &Hypothesis, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let a = predict_labels(h1, data)?;
    let b = predict_labels(h2, data)?;
    Ok(fraction_equal(&a, &b))
}

/// Empirical spurious ratio: the fraction of points where `h` agrees with the
/// ground-truth labeling. 1 means complete spurious correlation, 0.5 balanced,
/// 0 inversely correlated.
pub fn spurious_ratio(h: &Hypothesis, data: &Dataset) -> Result<f64> {
    accuracy(h, data)
}

/// Average accuracy of `h` against the ground-truth labels.
pub fn accuracy(h: &Hypothesis, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = data.labels()?;
    let pred = predict_labels(h, data)?;
    Ok(fraction_equal(&pred, labels))
}

/// Minimum per-group accuracy over the partition in the `group` aux column
/// (conventionally true label crossed with spurious label).
pub fn worst_group_accuracy(h: &Hypothesis, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = data.labels()?;
    let groups = data.aux(AUX_GROUP)?;
    let pred = predict_labels(h, data)?;

    let n_groups = groups.iter().max().map_or(0, |&g| g + 1);
    let mut correct = vec![0usize; n_groups];
    let mut total = vec![0usize; n_groups];
    for ((&p, &y), &g) in pred.iter().zip(labels).zip(groups) {
        total[g] += 1;
        if p == y {
            correct[g] += 1;
        }
    }
    correct
        .iter()
        .zip(&total)
        .filter(|(_, &t)| t > 0)
        .map(|(&c, &t)| c as f64 / t as f64)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or(Error::EmptyDataset)
}

/// A linear binary hypothesis whose decision boundary makes angle `beta`
/// (radians) with the first axis: predicts 1 where
/// `sin(beta) x1 - cos(beta) x2 > 0`, so `beta = pi/2` is `1{x1 > 0}` and
/// `beta = 0` is `1{x2 < 0}`. `gain` scales the logit margin (larger means
/// harder predictions).
pub fn linear_from_angle(beta: f64, gain: f64) -> Result<Model> {
    let spec = ModelSpec::linear(2, 2)?;
    let mut m = Model::zeros(&spec)?;
    let (nx, ny) = (beta.sin(), -beta.cos());
    m.layers[0].weights.set(0, 0, -0.5 * gain * nx);
    m.layers[0].weights.set(1, 0, -0.5 * gain * ny);
    m.layers[0].weights.set(0, 1, 0.5 * gain * nx);
    m.layers[0].weights.set(1, 1, 0.5 * gain * ny);
    Ok(m)
}

/// Orientation of a 2D linear binary model's decision boundary, in
/// `[0, 2 pi)`, matching the convention of [`linear_from_angle`]. The bias is
/// ignored; only the boundary orientation is measured.
pub fn boundary_angle(h: &Hypothesis) -> Result<f64> {
    let m = h
        .as_model()
        .ok_or_else(|| Error::InvalidConfig("boundary angle needs a trained model".into()))?;
    if m.spec.kind != ModelKind::Linear || m.spec.input_dim != 2 || m.spec.num_classes != 2 {
        return Err(Error::InvalidConfig(
            "boundary angle is defined for 2D binary linear models".into(),
        ));
    }
    let w = &m.layers[0].weights;
    let dx = w.get(0, 1) - w.get(0, 0);
    let dy = w.get(1, 1) - w.get(1, 0);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::InvalidParameter("degenerate linear model (zero weights)".into()));
    }
    // Class-1 normal is (sin beta, -cos beta).
    let beta = dx.atan2(-dy);
    Ok(if beta < 0.0 { beta + 2.0 * PI } else { beta })
}

/// Absolute angular distance on the circle, in `[0, pi]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Outcome of the agreement-score estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementScoreEstimate {
    pub mean: f64,
    /// Population standard deviation over pairs (0 when `n_pairs` is 1).
    pub std: f64,
    pub n_pairs: usize,
}

/// Estimates the agreement score of a labeling under a learning algorithm:
/// for each pair, two models are trained from independently derived seeds on
/// `(d_train.x, task_labels)` and their prediction agreement is measured on
/// `d_ood`. The training set is whatever the caller passes (typically the
/// union of the labeled split and relabeled unlabeled data).
pub fn estimate_agreement_score(
    spec: &ModelSpec,
    sched: &TrainSchedule,
    task_labels: &[usize],
    d_train: &Dataset,
    d_ood: &Dataset,
    n_pairs: usize,
    seed: u64,
) -> Result<AgreementScoreEstimate> {
    if n_pairs == 0 {
        return Err(Error::InvalidConfig("n_pairs must be >= 1".into()));
    }
    if d_ood.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut scores = Vec::with_capacity(n_pairs);
    for pair in 0..n_pairs {
        let run = |member: u64| -> Result<Hypothesis> {
            let mut s = sched.clone();
            s.seed = derive_seed(seed, pair as u64, member);
            train_erm_with_labels(spec, &d_train.x, task_labels, &s)
        };
        let h1 = run(0)?;
        let h2 = run(1)?;
        scores.push(agreement(&h1, &h2, d_ood)?);
    }
    let mean = scores.iter().sum::<f64>() / n_pairs as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n_pairs as f64;
    Ok(AgreementScoreEstimate { mean, std: var.sqrt(), n_pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset(points: &[[f64; 2]], labels: &[usize]) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        Dataset::labeled(Matrix::from_rows(&rows).unwrap(), labels.to_vec()).unwrap()
    }

    #[test]
    fn predict_labels_sign_and_ties() {
        // Class-1 logit = x1: positive side is class 1.
        let h = Hypothesis::Model(linear_from_angle(PI / 2.0, 2.0).unwrap());
        let d = toy_dataset(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]], &[1, 0, 0]);
        assert_eq!(predict_labels(&h, &d).unwrap(), vec![1, 0, 0]);
    }

    #[test]
    fn agreement_identities() {
        let d = toy_dataset(&[[0.0, 0.0]; 4], &[0, 0, 1, 1]);
        let h = Hypothesis::fixed(vec![0, 0, 1, 1], 2).unwrap();
        let hc = Hypothesis::fixed(vec![1, 1, 0, 0], 2).unwrap();
        let g = Hypothesis::fixed(vec![0, 1, 1, 0], 2).unwrap();
        assert_eq!(agreement(&h, &h, &d).unwrap(), 1.0);
        assert_eq!(agreement(&h, &hc, &d).unwrap(), 0.0);
        assert_eq!(agreement(&h, &g, &d).unwrap(), 0.5);
        assert_eq!(agreement(&g, &h, &d).unwrap(), 0.5);
    }

    #[test]
    fn spurious_ratio_extremes() {
        let d = toy_dataset(&[[0.0, 0.0]; 4], &[0, 1, 0, 1]);
        let same = Hypothesis::fixed(vec![0, 1, 0, 1], 2).unwrap();
        let flip = Hypothesis::fixed(vec![1, 0, 1, 0], 2).unwrap();
        assert_eq!(spurious_ratio(&same, &d).unwrap(), 1.0);
        assert_eq!(spurious_ratio(&flip, &d).unwrap(), 0.0);
    }

    #[test]
    fn worst_group_from_hand_built_groups() {
        // 8 points, 4 groups of 2 with per-group accuracies 1, 1, 0.5, 0.
        let mut d = toy_dataset(&[[0.0, 0.0]; 8], &[0, 0, 1, 1, 0, 0, 1, 1]);
        d.add_aux(AUX_GROUP, vec![0, 0, 1, 1, 2, 2, 3, 3]).unwrap();
        let h = Hypothesis::fixed(vec![0, 0, 1, 1, 0, 1, 0, 0], 2).unwrap();
        assert_eq!(accuracy(&h, &d).unwrap(), 0.625);
        assert_eq!(worst_group_accuracy(&h, &d).unwrap(), 0.0);
        assert!(worst_group_accuracy(&h, &d).unwrap() <= accuracy(&h, &d).unwrap());
    }

    #[test]
    fn perfect_hypothesis_has_perfect_worst_group() {
        let mut d = toy_dataset(&[[0.0, 0.0]; 4], &[0, 1, 0, 1]);
        d.add_aux(AUX_GROUP, vec![0, 1, 2, 3]).unwrap();
        let h = Hypothesis::fixed(vec![0, 1, 0, 1], 2).unwrap();
        assert_eq!(accuracy(&h, &d).unwrap(), 1.0);
        assert_eq!(worst_group_accuracy(&h, &d).unwrap(), 1.0);
    }

    #[test]
    fn boundary_angle_anchors() {
        let at = |beta: f64| {
            boundary_angle(&Hypothesis::Model(linear_from_angle(beta, 4.0).unwrap())).unwrap()
        };
        assert!((at(PI / 2.0) - PI / 2.0).abs() < 1e-12, "1{{x1>0}} maps to pi/2");
        assert!(at(0.0).abs() < 1e-12, "1{{x2<0}} maps to 0");
        assert!((at(PI) - PI).abs() < 1e-12, "1{{x2>0}} maps to pi");
    }

    #[test]
    fn boundary_angle_round_trips_on_grid() {
        for i in 0..64 {
            let beta = i as f64 / 64.0 * 2.0 * PI;
            let h = Hypothesis::Model(linear_from_angle(beta, 3.0).unwrap());
            assert!(angle_distance(boundary_angle(&h).unwrap(), beta) < 1e-6);
        }
    }

    #[test]
    fn boundary_angle_rejects_wrong_models() {
        let mlp = ModelSpec::mlp(2, vec![4], 2).unwrap();
        let h = Hypothesis::Model(Model::init(&mlp, 0).unwrap());
        assert!(boundary_angle(&h).is_err());
        let fixed = Hypothesis::fixed(vec![0, 1], 2).unwrap();
        assert!(boundary_angle(&fixed).is_err());
    }
}
