//! Scalar objectives: cross-entropy, the D-BAT disagreement loss, the DivDis
//! mutual-information loss with its prior-KL regularizer, and the combined
//! multi-hypothesis objective with pairwise averaging.
//!
//! Every loss comes with an exact analytic gradient w.r.t. the probability
//! batch it consumes; the model backward pass turns that into parameter
//! gradients. Probability-like quantities are clamped at [`PROB_FLOOR`]
//! before any logarithm, and the gradients use the same clamp so they stay
//! the exact derivatives of the values as computed.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hypotheses::Hypothesis;
use crate::matrix::Matrix;

/// Floor applied to probability-like quantities before taking a log.
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
fn ln_clamped(x: f64) -> f64 {
    x.max(PROB_FLOOR).ln()
}

/// A batch of per-sample class-probability rows.
///
/// Construction validates the simplex invariant: entries in `[0, 1]` and
/// rows summing to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchProbs(Matrix);

impl BatchProbs {
    pub fn new(m: Matrix) -> Result<Self> {
        for r in 0..m.rows() {
            let mut sum = 0.0;
            for &v in m.row(r) {
                if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "probability {v} outside [0, 1] in row {r}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "probability row {r} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self(m))
    }

    /// One-hot rows from hard labels.
    pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidConfig("num_classes must be >= 2".into()));
        }
        let mut m = Matrix::zeros(labels.len(), num_classes);
        for (r, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::InvalidParameter(format!(
                    "label {y} out of range for {num_classes} classes"
                )));
            }
            m.set(r, y, 1.0);
        }
        Ok(Self(m))
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.0.cols()
    }

    /// Per-class batch mean (the empirical marginal).
    pub fn marginal(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        self.0.column_sums().into_iter().map(|s| s / n).collect()
    }

    pub fn gather_rows(&self, indices: &[usize]) -> Self {
        Self(self.0.gather_rows(indices))
    }
}

/// Which pairwise diversification loss drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Cross-term disagreement loss; binary classification only.
    Dbat,
    /// Mutual information plus prior KL.
    Divdis,
}

/// How the sequential trainer aggregates diversification terms against the
/// already-frozen hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrevAggregate {
    #[default]
    Mean,
    Sum,
}

/// Hyperparameters of the combined objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversificationConfig {
    pub k: usize,
    pub alpha: f64,
    /// Weight of the prior-KL term; DivDis only.
    pub lambda: f64,
    pub loss_kind: LossKind,
    /// Target class distribution for the DivDis prior term.
    pub prior: Vec<f64>,
    #[serde(default)]
    pub prev_aggregate: PrevAggregate,
}

impl DiversificationConfig {
    pub fn dbat(k: usize, alpha: f64) -> Self {
        Self {
            k,
            alpha,
            lambda: 0.0,
            loss_kind: LossKind::Dbat,
            prior: vec![0.5, 0.5],
            prev_aggregate: PrevAggregate::Mean,
        }
    }

    pub fn divdis(k: usize, alpha: f64, lambda: f64, prior: Vec<f64>) -> Self {
        Self {
            k,
            alpha,
            lambda,
            loss_kind: LossKind::Divdis,
            prior,
            prev_aggregate: PrevAggregate::Mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig("k must be >= 2".into()));
        }
        if self.alpha < 0.0 || self.lambda < 0.0 {
            return Err(Error::InvalidConfig("alpha and lambda must be >= 0".into()));
        }
        check_simplex(&self.prior)?;
        if self.loss_kind == LossKind::Dbat && self.prior.len() != 2 {
            return Err(Error::InvalidConfig(
                "the D-BAT loss is defined for binary classification only".into(),
            ));
        }
        Ok(())
    }
}

pub fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter("prior entries must be finite and >= 0".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("prior sums to {sum}, not 1")));
    }
    Ok(())
}

fn check_same_batch(p1: &BatchProbs, p2: &BatchProbs) -> Result<()> {
    if p1.len() != p2.len() {
        return Err(Error::DimensionMismatch(format!(
            "batch sizes differ: {} vs {}",
            p1.len(),
            p2.len()
        )));
    }
    if p1.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Mean negative log-likelihood of `labels` under `probs`.
pub fn cross_entropy(probs: &BatchProbs, labels: &[usize]) -> Result<f64> {
    Ok(cross_entropy_with_grad(probs, labels)?.0)
}

/// Cross-entropy value and its gradient w.r.t. the probability batch.
pub fn cross_entropy_with_grad(probs: &BatchProbs, labels: &[usize]) -> Result<(f64, Matrix)> {
    let m = probs.matrix();
    if labels.len() != m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} probability rows",
            labels.len(),
            m.rows()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = m.rows() as f64;
    let mut value = 0.0;
    let mut grad = Matrix::zeros(m.rows(), m.cols());
    for (r, &y) in labels.iter().enumerate() {
        if y >= m.cols() {
            return Err(Error::InvalidParameter(format!("label {y} out of range")));
        }
        let p = m.get(r, y);
        value -= ln_clamped(p);
        if p > PROB_FLOOR {
            grad.set(r, y, -1.0 / (n * p));
        }
    }
    Ok((value / n, grad))
}

/// D-BAT disagreement loss: mean over the batch of
/// `-log(p1(0) p2(1) + p1(1) p2(0))`, clamped before the log.
pub fn dbat_loss(p1: &BatchProbs, p2: &BatchProbs) -> Result<f64> {
    Ok(dbat_loss_with_grad(p1, p2)?.0)
}

pub fn dbat_loss_with_grad(p1: &BatchProbs, p2: &BatchProbs) -> Result<(f64, Matrix, Matrix)> {
    check_same_batch(p1, p2)?;
    if p1.num_classes() != 2 || p2.num_classes() != 2 {
        return Err(Error::InvalidConfig(
            "the D-BAT loss is defined for binary classification only".into(),
        ));
    }
    let (a, b) = (p1.matrix(), p2.matrix());
    let n = a.rows() as f64;
    let mut value = 0.0;
    let mut g1 = Matrix::zeros(a.rows(), 2);
    let mut g2 = Matrix::zeros(a.rows(), 2);
    for r in 0..a.rows() {
        let cross = a.get(r, 0) * b.get(r, 1) + a.get(r, 1) * b.get(r, 0);
        value -= ln_clamped(cross);
        if cross > PROB_FLOOR {
            let s = -1.0 / (n * cross);
            g1.set(r, 0, s * b.get(r, 1));
            g1.set(r, 1, s * b.get(r, 0));
            g2.set(r, 0, s * a.get(r, 1));
            g2.set(r, 1, s * a.get(r, 0));
        }
    }
    Ok((value / n, g1, g2))
}

/// Empirical mutual information between two prediction batches.
///
/// The joint is the batch mean of per-sample outer products of the soft
/// probability rows; marginals are the corresponding batch means. Zero iff
/// the joint factorizes.
pub fn divdis_mi(p1: &BatchProbs, p2: &BatchProbs) -> Result<f64> {
    Ok(divdis_mi_with_grad(p1, p2)?.0)
}

pub fn divdis_mi_with_grad(p1: &BatchProbs, p2: &BatchProbs) -> Result<(f64, Matrix, Matrix)> {
    check_same_batch(p1, p2)?;
    let (a, b) = (p1.matrix(), p2.matrix());
    let (q1, q2) = (a.cols(), b.cols());
    let n = a.rows() as f64;

    let joint = {
        let mut j = a.matmul_at_b(b);
        j.scale_in_place(1.0 / n);
        j
    };
    let m1 = p1.marginal();
    let m2 = p2.marginal();

    let mut value = 0.0;
    // d value / d joint[a][b], with the same clamps as the value.
    let mut djoint = Matrix::zeros(q1, q2);
    for i in 0..q1 {
        for j in 0..q2 {
            let jv = joint.get(i, j);
            let log_term = ln_clamped(jv) - ln_clamped(m1[i]) - ln_clamped(m2[j]);
            value += jv * log_term;
            let mut d = log_term;
            if jv > PROB_FLOOR {
                d += 1.0;
            }
            if m1[i] > PROB_FLOOR {
                d -= 1.0;
            }
            if m2[j] > PROB_FLOOR {
                d -= 1.0;
            }
            djoint.set(i, j, d);
        }
    }

    // joint[a][b] = mean_i p1[i][a] p2[i][b], so chain through both sides.
    let mut g1 = b.matmul_a_bt(&djoint);
    // b (n x q2) * djoint^T (q2 x q1) -> (n x q1); careful with orientation:
    // g1[i][a] = sum_b djoint[a][b] p2[i][b] / n.
    g1.scale_in_place(1.0 / n);
    let mut g2 = a.matmul(&djoint);
    g2.scale_in_place(1.0 / n);
    Ok((value, g1, g2))
}

/// KL divergence from the batch-mean marginal of `p` to `prior`.
pub fn divdis_prior_kl(p: &BatchProbs, prior: &[f64]) -> Result<f64> {
    Ok(divdis_prior_kl_with_grad(p, prior)?.0)
}

pub fn divdis_prior_kl_with_grad(p: &BatchProbs, prior: &[f64]) -> Result<(f64, Matrix)> {
    if p.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_simplex(prior)?;
    if prior.len() != p.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "prior has {} classes, batch has {}",
            prior.len(),
            p.num_classes()
        )));
    }
    let m = p.marginal();
    let n = p.len() as f64;
    let mut value = 0.0;
    let mut grad = Matrix::zeros(p.len(), p.num_classes());
    for (a, (&ma, &pa)) in m.iter().zip(prior).enumerate() {
        let log_term = ln_clamped(ma) - ln_clamped(pa);
        value += ma * log_term;
        let mut d = log_term;
        if ma > PROB_FLOOR {
            d += 1.0;
        }
        d /= n;
        for r in 0..p.len() {
            grad.set(r, a, d);
        }
    }
    Ok((value, grad))
}

/// The configured pairwise diversification loss `A(h_i, h_j)`.
///
/// For DivDis this is the symmetric form with both prior-KL terms:
/// `MI(p1, p2) + lambda (KL(m1 || prior) + KL(m2 || prior))`.
pub fn pairwise_diversification(
    kind: LossKind,
    p1: &BatchProbs,
    p2: &BatchProbs,
    lambda: f64,
    prior: &[f64],
) -> Result<f64> {
    Ok(pairwise_diversification_with_grad(kind, p1, p2, lambda, prior)?.0)
}

pub fn pairwise_diversification_with_grad(
    kind: LossKind,
    p1: &BatchProbs,
    p2: &BatchProbs,
    lambda: f64,
    prior: &[f64],
) -> Result<(f64, Matrix, Matrix)> {
    match kind {
        LossKind::Dbat => dbat_loss_with_grad(p1, p2),
        LossKind::Divdis => {
            let (mi, mut g1, mut g2) = divdis_mi_with_grad(p1, p2)?;
            let (kl1, gk1) = divdis_prior_kl_with_grad(p1, prior)?;
            let (kl2, gk2) = divdis_prior_kl_with_grad(p2, prior)?;
            g1.add_scaled_in_place(&gk1, lambda);
            g2.add_scaled_in_place(&gk2, lambda);
            Ok((mi + lambda * (kl1 + kl2), g1, g2))
        }
    }
}

/// Sequential-step diversification term against one frozen hypothesis: the
/// frozen side contributes no gradient, and for DivDis only the trainable
/// hypothesis's prior-KL term is kept (the frozen one is a constant).
pub fn sequential_diversification_with_grad(
    kind: LossKind,
    frozen: &BatchProbs,
    trainable: &BatchProbs,
    lambda: f64,
    prior: &[f64],
) -> Result<(f64, Matrix)> {
    match kind {
        LossKind::Dbat => {
            let (v, _, g2) = dbat_loss_with_grad(frozen, trainable)?;
            Ok((v, g2))
        }
        LossKind::Divdis => {
            let (mi, _, mut g2) = divdis_mi_with_grad(frozen, trainable)?;
            let (kl, gk) = divdis_prior_kl_with_grad(trainable, prior)?;
            g2.add_scaled_in_place(&gk, lambda);
            Ok((mi + lambda * kl, g2))
        }
    }
}

/// The combined objective over `K` hypotheses:
/// sum of per-hypothesis cross-entropies on `d_t` plus
/// `alpha / (K (K - 1))` times the sum of the pairwise diversification loss
/// over all ordered pairs evaluated on `d_u`.
pub fn combined_objective(
    hyps: &[Hypothesis],
    d_t: &Dataset,
    d_u: &Dataset,
    cfg: &DiversificationConfig,
) -> Result<f64> {
    cfg.validate()?;
    let k = hyps.len();
    if k != cfg.k {
        return Err(Error::InvalidConfig(format!(
            "config expects k={}, got {k} hypotheses",
            cfg.k
        )));
    }
    let labels = d_t.y_true.as_ref().ok_or(Error::MissingLabels)?;

    let mut erm_sum = 0.0;
    for h in hyps {
        erm_sum += cross_entropy(&h.probs(&d_t.x)?, labels)?;
    }

    let probs_u: Vec<BatchProbs> = hyps.iter().map(|h| h.probs(&d_u.x)).collect::<Result<_>>()?;
    let mut div_sum = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                div_sum += pairwise_diversification(
                    cfg.loss_kind,
                    &probs_u[i],
                    &probs_u[j],
                    cfg.lambda,
                    &cfg.prior,
                )?;
            }
        }
    }
    Ok(erm_sum + cfg.alpha / (k * (k - 1)) as f64 * div_sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(rows: &[[f64; 2]]) -> BatchProbs {
        BatchProbs::new(Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap())
            .unwrap()
    }

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn cross_entropy_reference_values() {
        let one_hot = probs(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(cross_entropy(&one_hot, &[0, 1]).unwrap().abs() <= 1e-11);

        let uniform = probs(&[[0.5, 0.5]]);
        assert!((cross_entropy(&uniform, &[0]).unwrap() - LN2).abs() < 1e-12);

        let tilted = probs(&[[0.8, 0.2]]);
        assert!((cross_entropy(&tilted, &[0]).unwrap() - 0.223_143_551_314_209_76).abs() < 1e-12);
    }

    #[test]
    fn dbat_reference_values() {
        let a = probs(&[[1.0, 0.0], [1.0, 0.0]]);
        let b = probs(&[[0.0, 1.0], [0.0, 1.0]]);
        assert!(dbat_loss(&a, &b).unwrap().abs() <= 1e-11, "perfect disagreement");

        let u = probs(&[[0.5, 0.5]]);
        assert!((dbat_loss(&u, &u).unwrap() - LN2).abs() < 1e-12);

        // Degenerate full agreement: the clamp keeps the value finite.
        let c = probs(&[[1.0, 0.0]]);
        let v = dbat_loss(&c, &c).unwrap();
        assert!((v - (-(1e-12f64).ln())).abs() < 1e-6);
        assert!((v - 27.631).abs() < 1e-2);
    }

    #[test]
    fn dbat_requires_binary() {
        let m = Matrix::from_rows(&[vec![0.4, 0.3, 0.3]]).unwrap();
        let p = BatchProbs::new(m).unwrap();
        assert!(dbat_loss(&p, &p).is_err());
    }

    #[test]
    fn mi_reference_values() {
        // All four hard-label combinations equally often: independent.
        let a = probs(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]);
        let b = probs(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(divdis_mi(&a, &b).unwrap().abs() < 1e-9);

        // Identical deterministic balanced predictions: maximally dependent.
        let c = probs(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!((divdis_mi(&c, &c).unwrap() - LN2).abs() < 1e-9);

        // Uniform soft predictions: joint equals product of marginals.
        let u = probs(&[[0.5, 0.5], [0.5, 0.5]]);
        assert!(divdis_mi(&u, &u).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mi_zero_when_one_side_matches_own_marginal() {
        // Rows of p2 all equal its marginal -> product structure -> MI = 0.
        let a = probs(&[[0.9, 0.1], [0.2, 0.8], [0.4, 0.6]]);
        let b = probs(&[[0.3, 0.7], [0.3, 0.7], [0.3, 0.7]]);
        assert!(divdis_mi(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn prior_kl_reference_values() {
        let u = probs(&[[0.5, 0.5]]);
        assert!(divdis_prior_kl(&u, &[0.5, 0.5]).unwrap().abs() < 1e-12);

        let c = probs(&[[1.0, 0.0]]);
        assert!((divdis_prior_kl(&c, &[0.5, 0.5]).unwrap() - LN2).abs() < 1e-6);

        let t = probs(&[[0.75, 0.25]]);
        let expected = 0.75 * (1.5f64).ln() + 0.25 * (0.5f64).ln();
        assert!((divdis_prior_kl(&t, &[0.5, 0.5]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.130_812).abs() < 1e-6);
    }

    #[test]
    fn prior_kl_rejects_bad_prior() {
        let u = probs(&[[0.5, 0.5]]);
        assert!(divdis_prior_kl(&u, &[0.7, 0.7]).is_err());
    }

    #[test]
    fn losses_are_symmetric_and_nonnegative() {
        let a = probs(&[[0.9, 0.1], [0.3, 0.7], [0.5, 0.5]]);
        let b = probs(&[[0.2, 0.8], [0.6, 0.4], [0.1, 0.9]]);
        let d1 = dbat_loss(&a, &b).unwrap();
        let d2 = dbat_loss(&b, &a).unwrap();
        assert!((d1 - d2).abs() < 1e-12 && d1 >= 0.0);
        let m1 = divdis_mi(&a, &b).unwrap();
        let m2 = divdis_mi(&b, &a).unwrap();
        assert!((m1 - m2).abs() < 1e-12 && m1 >= -1e-12);
    }
}
