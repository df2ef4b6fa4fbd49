//! Training strategies: plain ERM, sequential diversification (D-BAT and
//! DivDis-Seq), simultaneous diversification (DivDis, optionally with a
//! shared trunk), and the disambiguation step that picks one hypothesis with
//! a small labeled oracle set.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hypotheses::{accuracy, worst_group_accuracy, Hypothesis};
use crate::losses::{
    cross_entropy_with_grad, pairwise_diversification_with_grad,
    sequential_diversification_with_grad, BatchProbs, DiversificationConfig, LossKind,
    PrevAggregate,
};
use crate::matrix::Matrix;
use crate::model::{Gradients, Layer, Model, ModelKind, ModelSpec};
use crate::seeds::derive_seed;

/// Default training-accuracy floor below which a hypothesis is flagged as
/// not fitting the training data.
pub const DEFAULT_FIT_FLOOR: f64 = 0.95;

const STREAM_INIT: u64 = 0x11;
const STREAM_SHUFFLE: u64 = 0x22;
const STREAM_HYP: u64 = 0x33;
const STREAM_TRUNK: u64 = 0x44;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    FullBatch,
    Minibatch(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_mode: BatchMode,
    pub seed: u64,
}

impl TrainSchedule {
    pub fn full_batch(epochs: usize, learning_rate: f64, seed: u64) -> Self {
        Self { epochs, learning_rate, batch_mode: BatchMode::FullBatch, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be > 0".into()));
        }
        if let BatchMode::Minibatch(0) = self.batch_mode {
            return Err(Error::InvalidConfig("minibatch size must be > 0".into()));
        }
        Ok(())
    }

    /// Per-epoch batch index plan: `None` means one full batch.
    fn batches(&self, n: usize, epoch: usize) -> Option<Vec<Vec<usize>>> {
        match self.batch_mode {
            BatchMode::FullBatch => None,
            BatchMode::Minibatch(size) => {
                let mut order: Vec<usize> = (0..n).collect();
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(self.seed, STREAM_SHUFFLE, epoch as u64));
                order.shuffle(&mut rng);
                Some(order.chunks(size.min(n).max(1)).map(<[usize]>::to_vec).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Sequential,
    Simultaneous,
}

/// The K hypotheses found by a diversification run, with per-hypothesis
/// training accuracy. Hypotheses below the fit floor are flagged, not
/// rejected: some configurations intentionally sacrifice training fit.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub hyps: Vec<Hypothesis>,
    pub provenance: Provenance,
    pub config: DiversificationConfig,
    pub train_accuracies: Vec<Option<f64>>,
}

impl HypothesisSet {
    pub fn fit_flags(&self, floor: f64) -> Vec<bool> {
        self.train_accuracies
            .iter()
            .map(|a| a.map_or(true, |v| v >= floor))
            .collect()
    }

    pub fn all_fit(&self, floor: f64) -> bool {
        self.fit_flags(floor).iter().all(|&b| b)
    }
}

/// Trains a softmax classifier by gradient descent on cross-entropy.
pub fn train_erm(spec: &ModelSpec, d_t: &Dataset, sched: &TrainSchedule) -> Result<Hypothesis> {
    train_erm_with_labels(spec, &d_t.x, d_t.labels()?, sched)
}

/// ERM on an explicit `(features, labels)` pair; used wherever data is
/// relabeled on the fly (agreement-score estimation, oracle baselines).
pub fn train_erm_with_labels(
    spec: &ModelSpec,
    x: &Matrix,
    labels: &[usize],
    sched: &TrainSchedule,
) -> Result<Hypothesis> {
    sched.validate()?;
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch("label/feature row mismatch".into()));
    }
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut model = Model::init(spec, derive_seed(sched.seed, STREAM_INIT, 0))?;
    for epoch in 0..sched.epochs {
        match sched.batches(x.rows(), epoch) {
            None => erm_step(&mut model, x, labels, sched.learning_rate)?,
            Some(batches) => {
                for batch in batches {
                    let xb = x.gather_rows(&batch);
                    let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                    erm_step(&mut model, &xb, &yb, sched.learning_rate)?;
                }
            }
        }
    }
    Ok(Hypothesis::Model(model))
}

fn erm_step(model: &mut Model, x: &Matrix, labels: &[usize], lr: f64) -> Result<()> {
    let cache = model.forward_cached(x)?;
    let (loss, g) = cross_entropy_with_grad(&cache.probs, labels)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("erm loss".into()));
    }
    let grads = model.backward(&cache, &g);
    model.gd_step(&grads, lr)
}

/// Sequential diversification: `h_1` is ERM (or the supplied override), and
/// each later hypothesis minimizes its own cross-entropy on `d_t` plus
/// `alpha` times the aggregated pairwise loss against the frozen earlier
/// hypotheses on `d_u`. Earlier hypotheses are never modified.
pub fn train_sequential(
    spec: &ModelSpec,
    d_t: &Dataset,
    d_u: &Dataset,
    cfg: &DiversificationConfig,
    sched: &TrainSchedule,
    h1_override: Option<Hypothesis>,
) -> Result<HypothesisSet> {
    cfg.validate()?;
    sched.validate()?;
    let labels = d_t.labels()?;
    if d_u.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let h1 = match h1_override {
        Some(h) => h,
        None => train_erm(spec, d_t, sched)?,
    };
    let mut hyps = vec![h1];
    let mut frozen_u: Vec<BatchProbs> = vec![hyps[0].probs(&d_u.x)?];

    for k_idx in 1..cfg.k {
        let init_seed = derive_seed(sched.seed, STREAM_HYP, k_idx as u64);
        let model = train_next_hypothesis(spec, &d_t.x, labels, &d_u.x, &frozen_u, cfg, sched, init_seed)?;
        let h = Hypothesis::Model(model);
        frozen_u.push(h.probs(&d_u.x)?);
        hyps.push(h);
    }

    let train_accuracies = hyps.iter().map(|h| accuracy(h, d_t).ok()).collect();
    Ok(HypothesisSet {
        hyps,
        provenance: Provenance::Sequential,
        config: cfg.clone(),
        train_accuracies,
    })
}

/// One sequential step: fit `d_t` while diversifying against the frozen set.
#[allow(clippy::too_many_arguments)]
fn train_next_hypothesis(
    spec: &ModelSpec,
    x_t: &Matrix,
    labels: &[usize],
    x_u: &Matrix,
    frozen_u: &[BatchProbs],
    cfg: &DiversificationConfig,
    sched: &TrainSchedule,
    init_seed: u64,
) -> Result<Model> {
    let mut model = Model::init(spec, init_seed)?;
    let prev_weight = match cfg.prev_aggregate {
        PrevAggregate::Mean => 1.0 / frozen_u.len() as f64,
        PrevAggregate::Sum => 1.0,
    };

    for epoch in 0..sched.epochs {
        let t_batches = sched.batches(x_t.rows(), epoch);
        let u_batches = sched.batches(x_u.rows(), epoch);
        match (t_batches, u_batches) {
            (None, None) => {
                sequential_step(&mut model, x_t, labels, x_u, frozen_u, cfg, prev_weight, sched.learning_rate)?;
            }
            (Some(tb), Some(ub)) => {
                // Cycle the unlabeled batches alongside the labeled ones.
                for (i, batch_t) in tb.iter().enumerate() {
                    let batch_u = &ub[i % ub.len()];
                    let xt = x_t.gather_rows(batch_t);
                    let yt: Vec<usize> = batch_t.iter().map(|&i| labels[i]).collect();
                    let xu = x_u.gather_rows(batch_u);
                    let fu: Vec<BatchProbs> =
                        frozen_u.iter().map(|p| p.gather_rows(batch_u)).collect();
                    sequential_step(&mut model, &xt, &yt, &xu, &fu, cfg, prev_weight, sched.learning_rate)?;
                }
            }
            _ => unreachable!("batch plans share the schedule"),
        }
    }
    Ok(model)
}

#[allow(clippy::too_many_arguments)]
fn sequential_step(
    model: &mut Model,
    x_t: &Matrix,
    labels: &[usize],
    x_u: &Matrix,
    frozen_u: &[BatchProbs],
    cfg: &DiversificationConfig,
    prev_weight: f64,
    lr: f64,
) -> Result<()> {
    let cache_t = model.forward_cached(x_t)?;
    let (ce, g_t) = cross_entropy_with_grad(&cache_t.probs, labels)?;
    let mut grads = model.backward(&cache_t, &g_t);

    let cache_u = model.forward_cached(x_u)?;
    let mut g_u = Matrix::zeros(x_u.rows(), model.spec.num_classes);
    let mut div = 0.0;
    for frozen in frozen_u {
        let (a, ga) = sequential_diversification_with_grad(
            cfg.loss_kind,
            frozen,
            &cache_u.probs,
            cfg.lambda,
            &cfg.prior,
        )?;
        div += a;
        g_u.add_scaled_in_place(&ga, 1.0);
    }
    g_u.scale_in_place(cfg.alpha * prev_weight);
    let total = ce + cfg.alpha * prev_weight * div;
    if !total.is_finite() {
        return Err(Error::NonFinite("sequential objective".into()));
    }
    let grads_u = model.backward(&cache_u, &g_u);
    grads.add_scaled(&grads_u, 1.0);
    model.gd_step(&grads, lr)
}

/// Shared feature extractor for simultaneous training: a stack of
/// affine+ReLU layers with no classifier head of its own.
#[derive(Debug, Clone)]
struct Trunk {
    layers: Vec<Layer>,
}

impl Trunk {
    /// Activations `[input, h_1, ..., h_T]`, all post-ReLU except the input.
    fn forward(&self, x: &Matrix) -> Vec<Matrix> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let mut z = layer.affine(acts.last().unwrap());
            for v in z.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            acts.push(z);
        }
        acts
    }

    fn backward(&self, acts: &[Matrix], d_out: &Matrix) -> Vec<(Matrix, Vec<f64>)> {
        let mut grads = vec![None; self.layers.len()];
        let mut dz = d_out.clone();
        for i in (0..self.layers.len()).rev() {
            // d_out arrives post-ReLU; mask by the stored activation first.
            let act = &acts[i + 1];
            for r in 0..dz.rows() {
                let a = act.row(r);
                for (v, &h) in dz.row_mut(r).iter_mut().zip(a) {
                    if h <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            grads[i] = Some(self.layers[i].grads(&acts[i], &dz));
            dz = self.layers[i].input_grad(&dz);
        }
        grads.into_iter().map(Option::unwrap).collect()
    }

    fn gd_step(&mut self, grads: &[(Matrix, Vec<f64>)], lr: f64) -> Result<()> {
        for (layer, (dw, db)) in self.layers.iter_mut().zip(grads) {
            layer.weights.add_scaled_in_place(dw, -lr);
            for (b, g) in layer.bias.iter_mut().zip(db) {
                *b -= lr * g;
            }
            if !layer.weights.is_finite() {
                return Err(Error::NonFinite("trunk gradient step".into()));
            }
        }
        Ok(())
    }
}

/// Simultaneous diversification: `K` heads trained jointly on the combined
/// objective. With `trunk_depth = 0` the heads are independent models of
/// `spec`; with `trunk_depth > 0` (which must equal the number of hidden
/// layers of an MLP spec) the hidden layers form one shared trunk and each
/// head is a linear classifier on the trunk output. The returned hypotheses
/// are standalone models (trunk copied into each).
pub fn train_simultaneous(
    spec: &ModelSpec,
    trunk_depth: usize,
    d_t: &Dataset,
    d_u: &Dataset,
    cfg: &DiversificationConfig,
    sched: &TrainSchedule,
) -> Result<HypothesisSet> {
    cfg.validate()?;
    sched.validate()?;
    if cfg.loss_kind != LossKind::Divdis {
        return Err(Error::InvalidConfig(
            "simultaneous training is defined for the DivDis loss".into(),
        ));
    }
    let labels = d_t.labels()?;
    if d_u.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let (mut trunk, head_spec) = match trunk_depth {
        0 => (None, spec.clone()),
        d => {
            if spec.kind != ModelKind::Mlp || spec.hidden_widths.len() != d {
                return Err(Error::InvalidConfig(format!(
                    "trunk_depth {d} requires an MLP spec with exactly {d} hidden layers"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sched.seed, STREAM_TRUNK, 0));
            let trunk_spec = ModelSpec::mlp(spec.input_dim, spec.hidden_widths.clone(), 2)?;
            // Borrow the model initializer for the trunk layers, dropping its classifier.
            let mut proto = Model::init(&trunk_spec, rng.next_u64())?;
            proto.layers.pop();
            let head_spec = ModelSpec::linear(*spec.hidden_widths.last().unwrap(), spec.num_classes)?;
            (Some(Trunk { layers: proto.layers }), head_spec)
        }
    };

    let mut heads: Vec<Model> = (0..cfg.k)
        .map(|i| Model::init(&head_spec, derive_seed(sched.seed, STREAM_HYP, i as u64)))
        .collect::<Result<_>>()?;

    for epoch in 0..sched.epochs {
        match sched.batches(d_t.len(), epoch) {
            None => {
                simultaneous_step(&mut trunk, &mut heads, &d_t.x, labels, &d_u.x, cfg, sched.learning_rate)?;
            }
            Some(tb) => {
                let ub = sched.batches(d_u.len(), epoch).unwrap();
                for (i, batch_t) in tb.iter().enumerate() {
                    let batch_u = &ub[i % ub.len()];
                    let xt = d_t.x.gather_rows(batch_t);
                    let yt: Vec<usize> = batch_t.iter().map(|&i| labels[i]).collect();
                    let xu = d_u.x.gather_rows(batch_u);
                    simultaneous_step(&mut trunk, &mut heads, &xt, &yt, &xu, cfg, sched.learning_rate)?;
                }
            }
        }
    }

    // Snapshot standalone hypotheses: trunk layers (if any) plus the head.
    let hyps: Vec<Hypothesis> = heads
        .iter()
        .map(|head| {
            let model = match &trunk {
                None => head.clone(),
                Some(t) => {
                    let mut layers = t.layers.clone();
                    layers.extend(head.layers.iter().cloned());
                    Model { spec: spec.clone(), layers }
                }
            };
            Hypothesis::Model(model)
        })
        .collect();
    let train_accuracies = hyps.iter().map(|h| accuracy(h, d_t).ok()).collect();
    Ok(HypothesisSet {
        hyps,
        provenance: Provenance::Simultaneous,
        config: cfg.clone(),
        train_accuracies,
    })
}

fn simultaneous_step(
    trunk: &mut Option<Trunk>,
    heads: &mut [Model],
    x_t: &Matrix,
    labels: &[usize],
    x_u: &Matrix,
    cfg: &DiversificationConfig,
    lr: f64,
) -> Result<()> {
    let k = heads.len();
    let (acts_t, acts_u) = match trunk {
        Some(t) => (Some(t.forward(x_t)), Some(t.forward(x_u))),
        None => (None, None),
    };
    let feat_t = acts_t.as_ref().map_or(x_t, |a| a.last().unwrap());
    let feat_u = acts_u.as_ref().map_or(x_u, |a| a.last().unwrap());

    let caches_t: Vec<_> = heads.iter().map(|h| h.forward_cached(feat_t)).collect::<Result<_>>()?;
    let caches_u: Vec<_> = heads.iter().map(|h| h.forward_cached(feat_u)).collect::<Result<_>>()?;

    let mut total = 0.0;
    let mut g_t: Vec<Matrix> = Vec::with_capacity(k);
    for (cache, _) in caches_t.iter().zip(heads.iter()) {
        let (ce, g) = cross_entropy_with_grad(&cache.probs, labels)?;
        total += ce;
        g_t.push(g);
    }

    let pair_scale = cfg.alpha / (k * (k - 1)) as f64;
    let mut g_u: Vec<Matrix> = (0..k)
        .map(|_| Matrix::zeros(x_u.rows(), heads[0].spec.num_classes))
        .collect();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let (a, gi, gj) = pairwise_diversification_with_grad(
                cfg.loss_kind,
                &caches_u[i].probs,
                &caches_u[j].probs,
                cfg.lambda,
                &cfg.prior,
            )?;
            total += pair_scale * a;
            g_u[i].add_scaled_in_place(&gi, pair_scale);
            g_u[j].add_scaled_in_place(&gj, pair_scale);
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("simultaneous objective".into()));
    }

    let mut d_feat_t = Matrix::zeros(feat_t.rows(), feat_t.cols());
    let mut d_feat_u = Matrix::zeros(feat_u.rows(), feat_u.cols());
    let mut head_grads: Vec<Gradients> = Vec::with_capacity(k);
    for i in 0..k {
        let mut grads = heads[i].backward(&caches_t[i], &g_t[i]);
        d_feat_t.add_scaled_in_place(&grads.input, 1.0);
        let grads_u = heads[i].backward(&caches_u[i], &g_u[i]);
        d_feat_u.add_scaled_in_place(&grads_u.input, 1.0);
        grads.add_scaled(&grads_u, 1.0);
        head_grads.push(grads);
    }

    if let Some(t) = trunk.as_mut() {
        let mut tg = t.backward(acts_t.as_ref().unwrap(), &d_feat_t);
        let tg_u = t.backward(acts_u.as_ref().unwrap(), &d_feat_u);
        for ((w, b), (wu, bu)) in tg.iter_mut().zip(&tg_u) {
            w.add_scaled_in_place(wu, 1.0);
            for (x, y) in b.iter_mut().zip(bu) {
                *x += y;
            }
        }
        t.gd_step(&tg, lr)?;
    }
    for (head, grads) in heads.iter_mut().zip(&head_grads) {
        head.gd_step(grads, lr)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleCriterion {
    Accuracy,
    WorstGroup,
}

/// Picks the hypothesis with the best score on the labeled oracle set; ties
/// break to the lowest index. Returns the index and every hypothesis's score.
pub fn disambiguate(
    hs: &HypothesisSet,
    labeled_ood: &Dataset,
    criterion: OracleCriterion,
) -> Result<(usize, Vec<f64>)> {
    if labeled_ood.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores: Vec<f64> = hs
        .hyps
        .iter()
        .map(|h| match criterion {
            OracleCriterion::Accuracy => accuracy(h, labeled_ood),
            OracleCriterion::WorstGroup => worst_group_accuracy(h, labeled_ood),
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::predict_labels;

    fn two_point_set() -> Dataset {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        Dataset::labeled(x, vec![1, 0]).unwrap()
    }

    #[test]
    fn erm_fits_separable_points() {
        let spec = ModelSpec::linear(2, 2).unwrap();
        let sched = TrainSchedule::full_batch(200, 1.0, 0);
        let h = train_erm(&spec, &two_point_set(), &sched).unwrap();
        assert_eq!(accuracy(&h, &two_point_set()).unwrap(), 1.0);
    }

    #[test]
    fn erm_is_bit_deterministic() {
        let spec = ModelSpec::mlp(2, vec![6], 2).unwrap();
        let sched = TrainSchedule { batch_mode: BatchMode::Minibatch(1), ..TrainSchedule::full_batch(30, 0.3, 9) };
        let d = two_point_set();
        let a = train_erm(&spec, &d, &sched).unwrap();
        let b = train_erm(&spec, &d, &sched).unwrap();
        let (Hypothesis::Model(ma), Hypothesis::Model(mb)) = (&a, &b) else { unreachable!() };
        let bits = |m: &Model| m.flatten_parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(ma), bits(mb));
    }

    #[test]
    fn sequential_never_touches_frozen_hypotheses() {
        let d_t = two_point_set();
        let x_u = Matrix::from_rows(&[vec![0.5, 0.5], vec![-0.5, -0.5], vec![0.3, -0.8], vec![-0.2, 0.9]]).unwrap();
        let d_u = Dataset::unlabeled(x_u);
        let spec = ModelSpec::linear(2, 2).unwrap();
        let sched = TrainSchedule::full_batch(50, 0.5, 1);
        let cfg = DiversificationConfig::dbat(3, 2.0);

        let h1 = train_erm(&spec, &d_t, &sched).unwrap();
        let h1_bits: Vec<u64> = h1.as_model().unwrap().flatten_parameters().iter().map(|v| v.to_bits()).collect();
        let set = train_sequential(&spec, &d_t, &d_u, &cfg, &sched, Some(h1.clone())).unwrap();
        assert_eq!(set.hyps.len(), 3);
        let after: Vec<u64> = set.hyps[0].as_model().unwrap().flatten_parameters().iter().map(|v| v.to_bits()).collect();
        assert_eq!(h1_bits, after);
    }

    #[test]
    fn simultaneous_with_zero_alpha_is_independent_erm() {
        let d_t = two_point_set();
        let d_u = Dataset::unlabeled(Matrix::from_rows(&[vec![0.1, 0.2], vec![-0.4, 0.3]]).unwrap());
        let spec = ModelSpec::linear(2, 2).unwrap();
        let sched = TrainSchedule::full_batch(200, 1.0, 3);
        let cfg = DiversificationConfig::divdis(2, 0.0, 10.0, vec![0.5, 0.5]);
        let set = train_simultaneous(&spec, 0, &d_t, &d_u, &cfg, &sched).unwrap();
        for acc in &set.train_accuracies {
            assert_eq!(acc.unwrap(), 1.0);
        }
    }

    #[test]
    fn shared_trunk_heads_fit_training_data() {
        let x = Matrix::from_rows(&[
            vec![1.0, 0.2],
            vec![0.8, -0.3],
            vec![-1.0, 0.1],
            vec![-0.7, -0.2],
        ])
        .unwrap();
        let d_t = Dataset::labeled(x, vec![1, 1, 0, 0]).unwrap();
        let d_u = Dataset::unlabeled(Matrix::from_rows(&[vec![0.3, 0.9], vec![-0.3, -0.9]]).unwrap());
        let spec = ModelSpec::mlp(2, vec![8], 2).unwrap();
        let sched = TrainSchedule::full_batch(300, 0.4, 5);
        let cfg = DiversificationConfig::divdis(2, 1.0, 10.0, vec![0.5, 0.5]);
        let set = train_simultaneous(&spec, 1, &d_t, &d_u, &cfg, &sched).unwrap();
        assert!(set.all_fit(0.95), "train accuracies: {:?}", set.train_accuracies);
        // Snapshots are standalone MLPs.
        let m = set.hyps[0].as_model().unwrap();
        assert_eq!(m.layers.len(), 2);
        assert_eq!(predict_labels(&set.hyps[0], &d_t).unwrap().len(), 4);
    }

    #[test]
    fn disambiguate_prefers_best_and_breaks_ties_low() {
        let mut d = two_point_set();
        d.add_aux(crate::dataset::AUX_GROUP, vec![0, 1]).unwrap();
        let perfect = Hypothesis::fixed(vec![1, 0], 2).unwrap();
        let inverted = Hypothesis::fixed(vec![0, 1], 2).unwrap();
        let set = HypothesisSet {
            hyps: vec![inverted.clone(), perfect, inverted],
            provenance: Provenance::Sequential,
            config: DiversificationConfig::dbat(3, 1.0),
            train_accuracies: vec![None; 3],
        };
        let (idx, scores) = disambiguate(&set, &d, OracleCriterion::Accuracy).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(scores, vec![0.0, 1.0, 0.0]);

        let tie = HypothesisSet {
            hyps: vec![set.hyps[0].clone(), set.hyps[0].clone()],
            provenance: Provenance::Sequential,
            config: DiversificationConfig::dbat(2, 1.0),
            train_accuracies: vec![None; 2],
        };
        let (idx, _) = disambiguate(&tie, &d, OracleCriterion::Accuracy).unwrap();
        assert_eq!(idx, 0, "ties break to the lowest index");
    }
}
