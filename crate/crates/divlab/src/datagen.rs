//! Seeded generators for the synthetic tasks.
//!
//! All generators are pure functions of their spec: identical specs produce
//! bit-identical datasets. Spurious ratios are hit exactly (up to one sample
//! of rounding) by stratified sampling over the agreement/disagreement
//! regions rather than by per-sample coin flips.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, AUX_GROUP, AUX_HYP_A, AUX_HYP_B, AUX_SPURIOUS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seeds::derive_seed;

/// The three splits every task provides: labeled training data, unlabeled
/// diversification data, and held-out test data.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplits {
    pub d_t: Dataset,
    pub d_u: Dataset,
    pub d_ood: Dataset,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; the log argument is kept away from zero.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn shuffled(mut rows: Vec<(Vec<f64>, usize, Vec<usize>)>, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>, Vec<Vec<usize>>) {
    rows.shuffle(rng);
    let n_aux = rows.first().map_or(0, |(_, _, a)| a.len());
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    let mut aux = vec![Vec::with_capacity(rows.len()); n_aux];
    for (x, y, a) in rows {
        xs.push(x);
        ys.push(y);
        for (col, v) in aux.iter_mut().zip(a) {
            col.push(v);
        }
    }
    (xs, ys, aux)
}

// ---------------------------------------------------------------------------
// 2D quadrant task
// ---------------------------------------------------------------------------

/// The 2D binary task on the square `[-1, 1]^2`. The true labeling is
/// `1{x1 > 0}`, the spurious one `1{x2 < 0}`; they agree on the training
/// support (top-left and bottom-right quadrants) and disagree on the other
/// two. `r` controls the spurious ratio of the unlabeled split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoDTaskSpec {
    pub n_train: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub r: f64,
    pub seed: u64,
}

impl TwoDTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidParameter(format!("spurious ratio {} outside [0, 1]", self.r)));
        }
        if self.n_train == 0 || self.n_unlabeled == 0 || self.n_test == 0 {
            return Err(Error::InvalidConfig("all split sizes must be > 0".into()));
        }
        Ok(())
    }
}

pub fn two_d_true_label(x1: f64, _x2: f64) -> usize {
    usize::from(x1 > 0.0)
}

pub fn two_d_spurious_label(_x1: f64, x2: f64) -> usize {
    usize::from(x2 < 0.0)
}

/// Axis-aligned rectangle (x1_lo, x1_hi, x2_lo, x2_hi).
type Rect = (f64, f64, f64, f64);

fn sample_rect(rng: &mut ChaCha8Rng, r: Rect) -> (f64, f64) {
    let x1 = if r.0 < r.1 { rng.gen_range(r.0..r.1) } else { r.0 };
    let x2 = if r.2 < r.3 { rng.gen_range(r.2..r.3) } else { r.2 };
    (x1, x2)
}

/// Agreement support (where true and spurious labels coincide) for the
/// unlabeled split at spurious ratio `r`: strips of the top-left and
/// bottom-right quadrants adjacent to the vertical axis, growing with `r`.
fn agreement_rects(r: f64) -> [Rect; 2] {
    if r <= 0.5 {
        let w = r / (1.0 - r); // |R(r)| with R(r) = r / (r - 1)
        [(-w, 0.0, 0.0, 1.0), (0.0, w, -1.0, 0.0)]
    } else {
        [(-1.0, 0.0, 0.0, 1.0), (0.0, 1.0, -1.0, 0.0)]
    }
}

/// Disagreement support: strips of the top-right and bottom-left quadrants.
fn disagreement_rects(r: f64) -> [Rect; 2] {
    if r <= 0.5 {
        [(0.0, 1.0, 0.0, 1.0), (-1.0, 0.0, -1.0, 0.0)]
    } else {
        // Mirrored construction beyond the formula's domain: the disagreement
        // strip shrinks so the measured ratio still equals r.
        let w = (1.0 - r) / r;
        [(0.0, w, 0.0, 1.0), (-w, 0.0, -1.0, 0.0)]
    }
}

fn two_d_rows(
    n: usize,
    ratio: f64,
    agree: [Rect; 2],
    disagree: [Rect; 2],
    rng: &mut ChaCha8Rng,
) -> Vec<(Vec<f64>, usize, Vec<usize>)> {
    let n_agree = (ratio * n as f64).round() as usize;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let rects = if i < n_agree { &agree } else { &disagree };
        let rect = rects[usize::from(rng.gen::<bool>())];
        let (x1, x2) = sample_rect(rng, rect);
        let y = two_d_true_label(x1, x2);
        let sp = two_d_spurious_label(x1, x2);
        rows.push((vec![x1, x2], y, vec![2 * y + sp, sp]));
    }
    rows
}

/// Generates the three splits of the 2D task. The training split lives on
/// the agreement quadrants (so the true and spurious labelings coincide on
/// it), the unlabeled split has spurious ratio `r` by construction, and the
/// test split is balanced (`r = 0.5`).
pub fn gen_2d_task(spec: &TwoDTaskSpec) -> Result<TaskSplits> {
    spec.validate()?;
    let full_agree = [(-1.0, 0.0, 0.0, 1.0), (0.0, 1.0, -1.0, 0.0)];
    let full_disagree = [(0.0, 1.0, 0.0, 1.0), (-1.0, 0.0, -1.0, 0.0)];

    let build = |n: usize, ratio: f64, agree: [Rect; 2], disagree: [Rect; 2], stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0x2D, stream));
        let rows = two_d_rows(n, ratio, agree, disagree, &mut rng);
        let (xs, ys, aux) = shuffled(rows, &mut rng);
        let mut d = Dataset::labeled(Matrix::from_rows(&xs)?, ys)?;
        d.add_aux(AUX_GROUP, aux[0].clone())?;
        d.add_aux(AUX_SPURIOUS, aux[1].clone())?;
        Ok::<_, Error>(d)
    };

    Ok(TaskSplits {
        d_t: build(spec.n_train, 1.0, full_agree, full_agree, 0)?,
        d_u: build(spec.n_unlabeled, spec.r, agreement_rects(spec.r), disagreement_rects(spec.r), 1)?,
        d_ood: build(spec.n_test, 0.5, full_agree, full_disagree, 2)?,
    })
}

// ---------------------------------------------------------------------------
// Concatenated two-feature task
// ---------------------------------------------------------------------------

/// Ratio by which the spurious block's margin exceeds the semantic one, so
/// that plain ERM prefers the shortcut.
pub const SPURIOUS_MARGIN_FACTOR: f64 = 2.0;

/// Each sample is `[semantic block; spurious block]`: the semantic block
/// encodes the true label along its first coordinate at margin `margin`,
/// the spurious block encodes a binary attribute the same way at twice the
/// margin. On the training split the attribute always equals the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcatTaskSpec {
    pub dim_semantic: usize,
    pub dim_spurious: usize,
    pub noise_sigma: f64,
    pub margin: f64,
    pub n_train: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub r_u: f64,
    pub seed: u64,
}

impl ConcatTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim_semantic == 0 || self.dim_spurious == 0 {
            return Err(Error::InvalidConfig("block dimensions must be > 0".into()));
        }
        if !(self.margin > 0.0) || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("margin must be > 0 and noise >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.r_u) {
            return Err(Error::InvalidParameter(format!("spurious ratio {} outside [0, 1]", self.r_u)));
        }
        if self.n_train == 0 || self.n_unlabeled == 0 || self.n_test == 0 {
            return Err(Error::InvalidConfig("all split sizes must be > 0".into()));
        }
        Ok(())
    }
}

fn concat_features(spec: &ConcatTaskSpec, y: usize, attr: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = Vec::with_capacity(spec.dim_semantic + spec.dim_spurious);
    for c in 0..spec.dim_semantic {
        let signal = if c == 0 { (2.0 * y as f64 - 1.0) * spec.margin } else { 0.0 };
        x.push(signal + spec.noise_sigma * gaussian(rng));
    }
    for c in 0..spec.dim_spurious {
        let signal = if c == 0 {
            (2.0 * attr as f64 - 1.0) * spec.margin * SPURIOUS_MARGIN_FACTOR
        } else {
            0.0
        };
        x.push(signal + spec.noise_sigma * gaussian(rng));
    }
    x
}

/// Exactly stratified (label, attribute) assignments for `n` samples with
/// attribute-equals-label fraction `ratio`.
fn stratified_pairs(n: usize, ratio: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n);
    let n0 = n / 2;
    for (y, count) in [(0usize, n0), (1usize, n - n0)] {
        let matches = (ratio * count as f64).round() as usize;
        for i in 0..count {
            let attr = if i < matches { y } else { 1 - y };
            pairs.push((y, attr));
        }
    }
    pairs
}

pub fn gen_concat_task(spec: &ConcatTaskSpec) -> Result<TaskSplits> {
    spec.validate()?;
    let build = |n: usize, ratio: f64, stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0xC0CA7, stream));
        let rows = stratified_pairs(n, ratio)
            .into_iter()
            .map(|(y, attr)| {
                let x = concat_features(spec, y, attr, &mut rng);
                (x, y, vec![2 * y + attr, attr])
            })
            .collect();
        let (xs, ys, aux) = shuffled(rows, &mut rng);
        let mut d = Dataset::labeled(Matrix::from_rows(&xs)?, ys)?;
        d.add_aux(AUX_GROUP, aux[0].clone())?;
        d.add_aux(AUX_SPURIOUS, aux[1].clone())?;
        Ok::<_, Error>(d)
    };
    Ok(TaskSplits {
        d_t: build(spec.n_train, 1.0, 0)?,
        d_u: build(spec.n_unlabeled, spec.r_u, 1)?,
        d_ood: build(spec.n_test, 0.5, 2)?,
    })
}

// ---------------------------------------------------------------------------
// Co-dependence task
// ---------------------------------------------------------------------------

/// Which unlabeled-data pool the co-dependence task uses: in `PerpA` the
/// planted hypothesis `h_A` is inversely correlated with the true labeling
/// on the unlabeled data while `h_B` is balanced; `PerpB` swaps the roles;
/// `Interpolate(t)` mixes the two pools with weight `t` toward `PerpB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoVariant {
    PerpA,
    PerpB,
    Interpolate(f64),
}

/// How the second planted hypothesis is realized in feature space. `Xor`
/// (the default) encodes `h_B` in the joint sign of a coordinate pair, which
/// a linear model cannot express; `Linear` encodes it like `h_A`, which
/// deliberately breaks the architecture-alignment precondition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HbEncoding {
    #[default]
    Xor,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoDependenceSpec {
    pub variant: CoVariant,
    pub n_train: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    #[serde(default)]
    pub h_b_encoding: HbEncoding,
    pub seed: u64,
}

/// Margins and noise levels of the co-dependence feature blocks. The linear
/// blocks are noisy enough that an MLP cannot fully fit the training data
/// through them alone, while the XOR pair is clean and high-margin; that is
/// what pushes MLP training onto `h_B` and keeps linear models on `h_A`.
pub const CODEP_SEM_MARGIN: f64 = 1.0;
pub const CODEP_SEM_SIGMA: f64 = 0.9;
pub const CODEP_A_MARGIN: f64 = 2.0;
pub const CODEP_A_SIGMA: f64 = 0.9;
pub const CODEP_B_MARGIN: f64 = 3.0;
pub const CODEP_B_SIGMA: f64 = 0.2;
/// Number of XOR coordinate pairs encoding `h_B`.
pub const CODEP_XOR_PAIRS: usize = 2;

/// Feature dimension of the co-dependence task.
pub fn codependence_input_dim(encoding: HbEncoding) -> usize {
    match encoding {
        HbEncoding::Xor => 2 + 2 * CODEP_XOR_PAIRS,
        HbEncoding::Linear => 4,
    }
}

impl CoDependenceSpec {
    pub fn validate(&self) -> Result<()> {
        if let CoVariant::Interpolate(t) = self.variant {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidParameter(format!("interpolation weight {t} outside [0, 1]")));
            }
        }
        if self.n_train == 0 || self.n_unlabeled == 0 || self.n_test == 0 {
            return Err(Error::InvalidConfig("all split sizes must be > 0".into()));
        }
        Ok(())
    }
}

fn codep_features(
    spec: &CoDependenceSpec,
    y: usize,
    a_bit: usize,
    b_bit: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(codependence_input_dim(spec.h_b_encoding));
    x.push((2.0 * y as f64 - 1.0) * CODEP_SEM_MARGIN + CODEP_SEM_SIGMA * gaussian(rng));
    x.push((2.0 * a_bit as f64 - 1.0) * CODEP_A_MARGIN + CODEP_A_SIGMA * gaussian(rng));
    match spec.h_b_encoding {
        HbEncoding::Xor => {
            for _ in 0..CODEP_XOR_PAIRS {
                let sign_u = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let sign_v = sign_u * (2.0 * b_bit as f64 - 1.0);
                x.push(sign_u * CODEP_B_MARGIN + CODEP_B_SIGMA * gaussian(rng));
                x.push(sign_v * CODEP_B_MARGIN + CODEP_B_SIGMA * gaussian(rng));
            }
        }
        HbEncoding::Linear => {
            x.push((2.0 * b_bit as f64 - 1.0) * CODEP_B_MARGIN + CODEP_B_SIGMA * gaussian(rng));
            x.push(CODEP_B_SIGMA * gaussian(rng));
        }
    }
    x
}

/// Exactly stratified (y, h_A, h_B) triples for one pool.
fn codep_bits(n: usize, variant: CoVariant) -> Vec<(usize, usize, usize)> {
    match variant {
        // h_A inverted, h_B balanced: quarter each of (y, h_B).
        CoVariant::PerpA => (0..n)
            .map(|i| {
                let y = usize::from(i % 2 == 1);
                let b = usize::from((i / 2) % 2 == 1);
                (y, 1 - y, b)
            })
            .collect(),
        CoVariant::PerpB => (0..n)
            .map(|i| {
                let y = usize::from(i % 2 == 1);
                let a = usize::from((i / 2) % 2 == 1);
                (y, a, 1 - y)
            })
            .collect(),
        CoVariant::Interpolate(t) => {
            let n_b = (t * n as f64).round() as usize;
            let mut bits = codep_bits(n - n_b, CoVariant::PerpA);
            bits.extend(codep_bits(n_b, CoVariant::PerpB));
            bits
        }
    }
}

/// Generates the co-dependence splits. Training data contains only points
/// where the true labeling and both planted hypotheses agree; the unlabeled
/// and test splits follow the chosen variant's pool, so the test split is
/// distributed like the unlabeled one. The `h_a`/`h_b` aux columns carry the
/// planted hypotheses' labels on every split.
pub fn gen_codependence_task(spec: &CoDependenceSpec) -> Result<TaskSplits> {
    spec.validate()?;
    let build = |bits: Vec<(usize, usize, usize)>, stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0xC0DE, stream));
        let rows = bits
            .into_iter()
            .map(|(y, a, b)| {
                let x = codep_features(spec, y, a, b, &mut rng);
                (x, y, vec![2 * y + a, a, b])
            })
            .collect();
        let (xs, ys, aux) = shuffled(rows, &mut rng);
        let mut d = Dataset::labeled(Matrix::from_rows(&xs)?, ys)?;
        d.add_aux(AUX_GROUP, aux[0].clone())?;
        d.add_aux(AUX_HYP_A, aux[1].clone())?;
        d.add_aux(AUX_HYP_B, aux[2].clone())?;
        Ok::<_, Error>(d)
    };
    let train_bits = (0..spec.n_train)
        .map(|i| {
            let y = usize::from(i % 2 == 1);
            (y, y, y)
        })
        .collect();
    Ok(TaskSplits {
        d_t: build(train_bits, 0)?,
        d_u: build(codep_bits(spec.n_unlabeled, spec.variant), 1)?,
        d_ood: build(codep_bits(spec.n_test, spec.variant), 2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AUX_SPURIOUS;
    use crate::hypotheses::{spurious_ratio, Hypothesis};

    fn aux_hypothesis(d: &Dataset, name: &str) -> Hypothesis {
        Hypothesis::fixed(d.aux(name).unwrap().to_vec(), 2).unwrap()
    }

    #[test]
    fn two_d_training_split_has_full_agreement() {
        let spec = TwoDTaskSpec { n_train: 400, n_unlabeled: 400, n_test: 400, r: 0.3, seed: 5 };
        let splits = gen_2d_task(&spec).unwrap();
        for r in 0..splits.d_t.len() {
            let row = splits.d_t.x.row(r);
            assert_eq!(two_d_true_label(row[0], row[1]), two_d_spurious_label(row[0], row[1]));
            assert_eq!(splits.d_t.labels().unwrap()[r], two_d_true_label(row[0], row[1]));
        }
    }

    #[test]
    fn two_d_unlabeled_ratio_matches_request() {
        for (r, tol) in [(0.0, 0.01), (0.25, 0.02), (0.5, 0.02), (0.75, 0.02), (1.0, 0.01)] {
            let spec = TwoDTaskSpec { n_train: 100, n_unlabeled: 5000, n_test: 100, r, seed: 11 };
            let splits = gen_2d_task(&spec).unwrap();
            let h_sp = aux_hypothesis(&splits.d_u, AUX_SPURIOUS);
            let measured = spurious_ratio(&h_sp, &splits.d_u).unwrap();
            assert!((measured - r).abs() <= tol, "r={r} measured={measured}");
        }
    }

    #[test]
    fn two_d_test_split_is_balanced() {
        let spec = TwoDTaskSpec { n_train: 100, n_unlabeled: 100, n_test: 2000, r: 0.0, seed: 3 };
        let splits = gen_2d_task(&spec).unwrap();
        let h_sp = aux_hypothesis(&splits.d_ood, AUX_SPURIOUS);
        let measured = spurious_ratio(&h_sp, &splits.d_ood).unwrap();
        assert!((measured - 0.5).abs() <= 0.02);
    }

    #[test]
    fn two_d_r_zero_unlabeled_is_pure_disagreement() {
        let spec = TwoDTaskSpec { n_train: 100, n_unlabeled: 1000, n_test: 100, r: 0.0, seed: 7 };
        let splits = gen_2d_task(&spec).unwrap();
        for r in 0..splits.d_u.len() {
            let row = splits.d_u.x.row(r);
            assert_ne!(two_d_true_label(row[0], row[1]), two_d_spurious_label(row[0], row[1]));
        }
    }

    #[test]
    fn generators_are_pure_functions_of_spec() {
        let spec = TwoDTaskSpec { n_train: 50, n_unlabeled: 50, n_test: 50, r: 0.25, seed: 9 };
        assert_eq!(gen_2d_task(&spec).unwrap(), gen_2d_task(&spec).unwrap());

        let cspec = ConcatTaskSpec {
            dim_semantic: 3,
            dim_spurious: 2,
            noise_sigma: 0.25,
            margin: 1.0,
            n_train: 40,
            n_unlabeled: 40,
            n_test: 40,
            r_u: 0.3,
            seed: 2,
        };
        assert_eq!(gen_concat_task(&cspec).unwrap(), gen_concat_task(&cspec).unwrap());

        let kspec = CoDependenceSpec {
            variant: CoVariant::Interpolate(0.5),
            n_train: 40,
            n_unlabeled: 40,
            n_test: 40,
            h_b_encoding: HbEncoding::Xor,
            seed: 4,
        };
        assert_eq!(gen_codependence_task(&kspec).unwrap(), gen_codependence_task(&kspec).unwrap());
    }

    #[test]
    fn concat_ratios_match_request() {
        for (r_u, tol) in [(1.0, 1e-9), (0.0, 0.02), (0.3, 0.02)] {
            let spec = ConcatTaskSpec {
                dim_semantic: 3,
                dim_spurious: 3,
                noise_sigma: 0.25,
                margin: 1.0,
                n_train: 500,
                n_unlabeled: 5000,
                n_test: 500,
                r_u,
                seed: 13,
            };
            let splits = gen_concat_task(&spec).unwrap();
            let h_sp = aux_hypothesis(&splits.d_u, AUX_SPURIOUS);
            let measured = spurious_ratio(&h_sp, &splits.d_u).unwrap();
            assert!((measured - r_u).abs() <= tol, "r_u={r_u} measured={measured}");
            let h_sp_t = aux_hypothesis(&splits.d_t, AUX_SPURIOUS);
            assert_eq!(spurious_ratio(&h_sp_t, &splits.d_t).unwrap(), 1.0);
        }
    }

    #[test]
    fn codependence_ratios_per_variant() {
        let base = |variant| CoDependenceSpec {
            variant,
            n_train: 400,
            n_unlabeled: 5000,
            n_test: 400,
            h_b_encoding: HbEncoding::Xor,
            seed: 21,
        };
        let splits = gen_codependence_task(&base(CoVariant::PerpA)).unwrap();
        let ra = spurious_ratio(&aux_hypothesis(&splits.d_u, AUX_HYP_A), &splits.d_u).unwrap();
        let rb = spurious_ratio(&aux_hypothesis(&splits.d_u, AUX_HYP_B), &splits.d_u).unwrap();
        assert!(ra <= 0.02, "PerpA h_A ratio {ra}");
        assert!((rb - 0.5).abs() <= 0.03, "PerpA h_B ratio {rb}");

        let splits = gen_codependence_task(&base(CoVariant::PerpB)).unwrap();
        let ra = spurious_ratio(&aux_hypothesis(&splits.d_u, AUX_HYP_A), &splits.d_u).unwrap();
        let rb = spurious_ratio(&aux_hypothesis(&splits.d_u, AUX_HYP_B), &splits.d_u).unwrap();
        assert!((ra - 0.5).abs() <= 0.03, "PerpB h_A ratio {ra}");
        assert!(rb <= 0.02, "PerpB h_B ratio {rb}");

        let splits = gen_codependence_task(&base(CoVariant::Interpolate(0.5))).unwrap();
        let ra = spurious_ratio(&aux_hypothesis(&splits.d_u, AUX_HYP_A), &splits.d_u).unwrap();
        let rb = spurious_ratio(&aux_hypothesis(&splits.d_u, AUX_HYP_B), &splits.d_u).unwrap();
        assert!((ra - 0.25).abs() <= 0.03, "mixed h_A ratio {ra}");
        assert!((rb - 0.25).abs() <= 0.03, "mixed h_B ratio {rb}");
    }

    #[test]
    fn codependence_training_split_agrees_everywhere() {
        let spec = CoDependenceSpec {
            variant: CoVariant::PerpA,
            n_train: 200,
            n_unlabeled: 200,
            n_test: 200,
            h_b_encoding: HbEncoding::Xor,
            seed: 8,
        };
        let splits = gen_codependence_task(&spec).unwrap();
        let y = splits.d_t.labels().unwrap();
        assert_eq!(y, splits.d_t.aux(AUX_HYP_A).unwrap());
        assert_eq!(y, splits.d_t.aux(AUX_HYP_B).unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = TwoDTaskSpec { n_train: 10, n_unlabeled: 10, n_test: 10, r: 1.5, seed: 0 };
        assert!(gen_2d_task(&spec).is_err());
        spec.r = 0.5;
        spec.n_test = 0;
        assert!(gen_2d_task(&spec).is_err());

        let kspec = CoDependenceSpec {
            variant: CoVariant::Interpolate(1.5),
            n_train: 10,
            n_unlabeled: 10,
            n_test: 10,
            h_b_encoding: HbEncoding::Xor,
            seed: 0,
        };
        assert!(gen_codependence_task(&kspec).is_err());
    }
}
