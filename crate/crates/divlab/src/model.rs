//! Model definitions and manual forward/backward passes.
//!
//! Two model families are supported: a linear softmax classifier and a ReLU
//! MLP. Parameters are `f64` and initialization is seed-deterministic
//! (uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` from a ChaCha8 stream), so
//! identical `(spec, seed)` pairs produce bit-identical models.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::BatchProbs;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Mlp,
}

/// Architecture description. The activation is fixed to ReLU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn linear(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::new(ModelKind::Linear, input_dim, vec![], num_classes)
    }

    pub fn mlp(input_dim: usize, hidden_widths: Vec<usize>, num_classes: usize) -> Result<Self> {
        Self::new(ModelKind::Mlp, input_dim, hidden_widths, num_classes)
    }

    pub fn new(
        kind: ModelKind,
        input_dim: usize,
        hidden_widths: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let spec = Self { kind, input_dim, hidden_widths, num_classes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("num_classes must be >= 2".into()));
        }
        match self.kind {
            ModelKind::Linear if !self.hidden_widths.is_empty() => Err(Error::InvalidConfig(
                "linear models take no hidden widths".into(),
            )),
            ModelKind::Mlp if self.hidden_widths.is_empty() => Err(Error::InvalidConfig(
                "mlp models need at least one hidden width".into(),
            )),
            _ if self.hidden_widths.contains(&0) => {
                Err(Error::InvalidConfig("hidden widths must be > 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// Per-layer (in, out) shapes, final layer included.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden_widths);
        dims.push(self.num_classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One affine layer: `z = x W + b`, weights stored (in x out) row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { weights: Matrix::zeros(in_dim, out_dim), bias: vec![0.0; out_dim] }
    }

    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let weights = Matrix::from_fn(in_dim, out_dim, |_, _| dist.sample(rng));
        let bias = (0..out_dim).map(|_| dist.sample(rng)).collect();
        Self { weights, bias }
    }

    pub fn affine(&self, x: &Matrix) -> Matrix {
        let mut z = x.matmul(&self.weights);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        z
    }

    /// (dW, db) for upstream gradient `dz` at `input`.
    pub fn grads(&self, input: &Matrix, dz: &Matrix) -> (Matrix, Vec<f64>) {
        (input.matmul_at_b(dz), dz.column_sums())
    }

    /// Gradient w.r.t. the layer input: `dz W^T`.
    pub fn input_grad(&self, dz: &Matrix) -> Matrix {
        dz.matmul_a_bt(&self.weights)
    }
}

/// Parameter gradients in layer order, plus the gradient w.r.t. the input batch.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Matrix, Vec<f64>)>,
    pub input: Matrix,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| {
                (
                    Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    vec![0.0; l.bias.len()],
                )
            })
            .collect();
        Self { layers, input: Matrix::zeros(0, 0) }
    }

    pub fn add_scaled(&mut self, other: &Gradients, s: f64) {
        assert_eq!(self.layers.len(), other.layers.len());
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.add_scaled_in_place(ow, s);
            for (x, y) in b.iter_mut().zip(ob) {
                *x += s * y;
            }
        }
    }

    /// Flattens all parameter gradients into one vector (weights then bias per layer).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }
}

/// Cached activations from a forward pass.
///
/// `activations[i]` is the input to layer `i` (so `activations[0]` is the
/// batch itself); `probs` holds the softmax output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Matrix>,
    pub probs: BatchProbs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub layers: Vec<Layer>,
}

impl Model {
    /// Seed-deterministic initialization: every weight and bias is drawn
    /// uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Layer::init(i, o, &mut rng))
            .collect();
        Ok(Self { spec: spec.clone(), layers })
    }

    /// A model with all parameters zero (uniform output).
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Layer::zeros(i, o))
            .collect();
        Ok(Self { spec: spec.clone(), layers })
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "input has {} columns, model expects {}",
                x.cols(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    /// Forward pass returning softmax probabilities.
    pub fn forward(&self, x: &Matrix) -> Result<BatchProbs> {
        Ok(self.forward_cached(x)?.probs)
    }

    /// Forward pass keeping per-layer activations for a later backward pass.
    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        self.check_input(x)?;
        let n_layers = self.layers.len();
        let mut activations = Vec::with_capacity(n_layers);
        activations.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(activations.last().unwrap());
            if i + 1 < n_layers {
                for v in z.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                activations.push(z);
            } else {
                let probs = softmax_rows(&z)?;
                return Ok(ForwardCache { activations, probs });
            }
        }
        unreachable!("models always have at least one layer")
    }

    /// Backward pass: exact gradients of `loss(probs)` given `dloss_dprobs`.
    pub fn backward(&self, cache: &ForwardCache, dloss_dprobs: &Matrix) -> Gradients {
        let probs = cache.probs.matrix();
        assert_eq!(dloss_dprobs.rows(), probs.rows());
        assert_eq!(dloss_dprobs.cols(), probs.cols());

        // Softmax Jacobian: dL/dz_j = p_j (g_j - sum_k g_k p_k).
        let mut dz = Matrix::zeros(probs.rows(), probs.cols());
        for r in 0..probs.rows() {
            let p = probs.row(r);
            let g = dloss_dprobs.row(r);
            let dot: f64 = p.iter().zip(g).map(|(pv, gv)| pv * gv).sum();
            for (o, (pv, gv)) in dz.row_mut(r).iter_mut().zip(p.iter().zip(g)) {
                *o = pv * (gv - dot);
            }
        }

        let mut layer_grads = vec![None; self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            layer_grads[i] = Some(layer.grads(&cache.activations[i], &dz));
            let mut dx = layer.input_grad(&dz);
            if i > 0 {
                // ReLU mask: the stored activation is the post-ReLU input to
                // layer i, so positive entries mark active units.
                let act = &cache.activations[i];
                for r in 0..dx.rows() {
                    let a = act.row(r);
                    for (v, &h) in dx.row_mut(r).iter_mut().zip(a) {
                        if h <= 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
            dz = dx;
        }

        Gradients {
            layers: layer_grads.into_iter().map(Option::unwrap).collect(),
            input: dz,
        }
    }

    /// Convenience: forward then backward in one call.
    pub fn grad(&self, x: &Matrix, dloss_dprobs: &Matrix) -> Result<Gradients> {
        let cache = self.forward_cached(x)?;
        Ok(self.backward(&cache, dloss_dprobs))
    }

    /// One full-batch gradient-descent step: `theta <- theta - lr * grad`.
    pub fn gd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be > 0, got {learning_rate}"
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch("gradient/layer count mismatch".into()));
        }
        for (layer, (dw, db)) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.add_scaled_in_place(dw, -learning_rate);
            for (b, g) in layer.bias.iter_mut().zip(db) {
                *b -= learning_rate * g;
            }
        }
        for layer in &self.layers {
            if !layer.weights.is_finite() || !layer.bias.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("gradient step".into()));
            }
        }
        Ok(())
    }

    /// Flattened parameter vector (weights then bias per layer); mirrors
    /// [`Gradients::flatten`] ordering.
    pub fn flatten_parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Overwrites parameters from a flat vector in `flatten_parameters` order.
    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        let mut offset = 0;
        for l in &mut self.layers {
            let wlen = l.weights.rows() * l.weights.cols();
            let blen = l.bias.len();
            if offset + wlen + blen > flat.len() {
                return Err(Error::DimensionMismatch("flat parameter vector too short".into()));
            }
            l.weights.data_mut().copy_from_slice(&flat[offset..offset + wlen]);
            offset += wlen;
            l.bias.copy_from_slice(&flat[offset..offset + blen]);
            offset += blen;
        }
        if offset != flat.len() {
            return Err(Error::DimensionMismatch("flat parameter vector too long".into()));
        }
        Ok(())
    }
}

/// Row-wise softmax with max-logit subtraction for overflow safety.
pub fn softmax_rows(logits: &Matrix) -> Result<BatchProbs> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NonFinite("softmax".into()));
        }
        let mut sum = 0.0;
        for (o, &z) in out.row_mut(r).iter_mut().zip(row) {
            *o = (z - max).exp();
            sum += *o;
        }
        for o in out.row_mut(r) {
            *o /= sum;
        }
    }
    BatchProbs::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seed_deterministic() {
        let spec = ModelSpec::linear(2, 2).unwrap();
        let a = Model::init(&spec, 7).unwrap();
        let b = Model::init(&spec, 7).unwrap();
        assert_eq!(a, b);
        let c = Model::init(&spec, 8).unwrap();
        assert_ne!(a.flatten_parameters(), c.flatten_parameters());
    }

    #[test]
    fn mlp_layer_shapes() {
        let spec = ModelSpec::mlp(2, vec![40, 40, 40], 2).unwrap();
        let m = Model::init(&spec, 1).unwrap();
        let shapes: Vec<_> = m
            .layers
            .iter()
            .map(|l| (l.weights.rows(), l.weights.cols(), l.bias.len()))
            .collect();
        assert_eq!(shapes, vec![(2, 40, 40), (40, 40, 40), (40, 40, 40), (40, 2, 2)]);
    }

    #[test]
    fn zero_model_gives_uniform_probs() {
        let spec = ModelSpec::linear(2, 4).unwrap();
        let m = Model::zeros(&spec).unwrap();
        let x = Matrix::new(1, 2, vec![0.3, -0.7]).unwrap();
        let p = m.forward(&x).unwrap();
        for &v in p.matrix().row(0) {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_logit_gives_half_half() {
        let spec = ModelSpec::linear(2, 2).unwrap();
        let mut m = Model::zeros(&spec).unwrap();
        m.layers[0].weights.set(0, 1, 1.0); // class-1 logit = x1
        let x = Matrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        let p = m.forward(&x).unwrap();
        assert!((p.matrix().get(0, 0) - 0.5).abs() < 1e-12);
        assert!((p.matrix().get(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negated_weights_swap_probabilities() {
        let spec = ModelSpec::linear(2, 2).unwrap();
        let mut m = Model::zeros(&spec).unwrap();
        m.layers[0].weights.set(0, 1, 1.0);
        let mut neg = m.clone();
        neg.layers[0].weights.set(0, 1, -1.0);
        let x = Matrix::new(1, 2, vec![0.8, -0.1]).unwrap();
        let p = m.forward(&x).unwrap();
        let q = neg.forward(&x).unwrap();
        assert!((p.matrix().get(0, 0) - q.matrix().get(0, 1)).abs() < 1e-12);
        assert!((p.matrix().get(0, 1) - q.matrix().get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn probs_lie_on_simplex() {
        let spec = ModelSpec::mlp(3, vec![8], 4).unwrap();
        let m = Model::init(&spec, 3).unwrap();
        let x = Matrix::from_fn(17, 3, |r, c| ((r * 3 + c) as f64).sin());
        let p = m.forward(&x).unwrap();
        for r in 0..p.matrix().rows() {
            let s: f64 = p.matrix().row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let spec = ModelSpec::mlp(2, vec![5], 2).unwrap();
        let m = Model::init(&spec, 0).unwrap();
        let x = Matrix::from_fn(4, 2, |r, c| (r + c) as f64 * 0.1);
        let g = m.grad(&x, &Matrix::zeros(4, 2)).unwrap();
        for v in g.flatten() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn gd_step_applies_exact_delta() {
        let spec = ModelSpec::linear(2, 2).unwrap();
        let mut m = Model::init(&spec, 5).unwrap();
        let before = m.flatten_parameters();

        let mut g = Gradients::zeros_like(&m);
        m.gd_step(&g, 1.0).unwrap();
        assert_eq!(m.flatten_parameters(), before, "zero gradient must not move parameters");

        g.layers[0].0.set(1, 0, 0.25);
        g.layers[0].1[1] = -0.5;
        m.gd_step(&g, 1.0).unwrap();
        let after = m.flatten_parameters();
        // Flat order: w(0,0) w(0,1) w(1,0) w(1,1) b0 b1.
        assert_eq!(after[2], before[2] - 0.25);
        assert_eq!(after[5], before[5] + 0.5);
    }

    #[test]
    fn gd_recurrence_on_quadratic() {
        // Two steps of lr=0.5 on f(theta) = theta^2/2 (grad = theta) from 1.0.
        let spec = ModelSpec::linear(1, 2).unwrap();
        let mut m = Model::zeros(&spec).unwrap();
        m.layers[0].weights.set(0, 0, 1.0);
        for _ in 0..2 {
            let mut g = Gradients::zeros_like(&m);
            let theta = m.layers[0].weights.get(0, 0);
            g.layers[0].0.set(0, 0, theta);
            m.gd_step(&g, 0.5).unwrap();
        }
        assert!((m.layers[0].weights.get(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gd_step_rejects_bad_lr() {
        let spec = ModelSpec::linear(1, 2).unwrap();
        let mut m = Model::zeros(&spec).unwrap();
        let g = Gradients::zeros_like(&m);
        assert!(m.gd_step(&g, 0.0).is_err());
        assert!(m.gd_step(&g, -1.0).is_err());
    }
}
