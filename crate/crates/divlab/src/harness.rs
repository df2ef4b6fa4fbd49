//! Experiment orchestration: spurious-ratio / K / alpha sweeps, the
//! co-dependence grid, agreement-score measurement, and deterministic
//! machine-readable result emission.
//!
//! Configs are TOML files (see `configs/` for one reference example per
//! experiment family). Re-running any config reproduces the emitted file
//! byte-for-byte: every random stream is derived from the record's seed, and
//! only deterministic fields are written (wall time is kept in memory only).

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    gen_2d_task, gen_codependence_task, gen_concat_task, codependence_input_dim, CoDependenceSpec,
    CoVariant, ConcatTaskSpec, HbEncoding, TaskSplits, TwoDTaskSpec,
};
use crate::dataset::{Dataset, AUX_HYP_A, AUX_HYP_B};
use crate::error::{Error, Result};
use crate::hypotheses::{
    accuracy, agreement, boundary_angle, estimate_agreement_score, linear_from_angle,
    predict_labels, worst_group_accuracy, AgreementScoreEstimate, Hypothesis,
};
use crate::losses::{
    cross_entropy, pairwise_diversification, DiversificationConfig, LossKind, PrevAggregate,
};
use crate::model::{ModelKind, ModelSpec};
use crate::seeds::derive_seed;
use crate::trainers::{
    disambiguate, train_sequential, train_simultaneous, BatchMode, HypothesisSet,
    OracleCriterion, TrainSchedule,
};

const STREAM_DATA: u64 = 0xD0;
const STREAM_SCHED: u64 = 0xD1;
const STREAM_RANDOM_TASK: u64 = 0xD2;
const STREAM_AS: u64 = 0xD3;

/// Version tag written as the first comment line of every CSV file.
pub const RESULTS_VERSION: &str = "divlab-results-v1";

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dbat,
    Divdis,
    DivdisSeq,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dbat => "dbat",
            Method::Divdis => "divdis",
            Method::DivdisSeq => "divdis_seq",
        }
    }

    pub fn loss_kind(self) -> LossKind {
        match self {
            Method::Dbat => LossKind::Dbat,
            Method::Divdis | Method::DivdisSeq => LossKind::Divdis,
        }
    }

    /// Default diversification weight for each method.
    pub fn default_alpha(self) -> f64 {
        match self {
            Method::Dbat => 5.0,
            Method::Divdis | Method::DivdisSeq => 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskConfig {
    TwoD(TwoDParams),
    Concat(ConcatParams),
    Codependence(CodepParams),
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            TaskConfig::TwoD(_) => "two_d",
            TaskConfig::Concat(_) => "concat",
            TaskConfig::Codependence(_) => "codependence",
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            TaskConfig::TwoD(_) => 2,
            TaskConfig::Concat(p) => p.dim_semantic + p.dim_spurious,
            TaskConfig::Codependence(p) => codependence_input_dim(p.h_b_encoding),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoDParams {
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_unlabeled")]
    pub n_unlabeled: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
}

fn default_n_train() -> usize {
    500
}
fn default_n_unlabeled() -> usize {
    5000
}
fn default_n_test() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcatParams {
    #[serde(default = "default_block_dim")]
    pub dim_semantic: usize,
    #[serde(default = "default_block_dim")]
    pub dim_spurious: usize,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_concat_n_train")]
    pub n_train: usize,
    #[serde(default = "default_concat_n_unlabeled")]
    pub n_unlabeled: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
}

fn default_block_dim() -> usize {
    3
}
fn default_noise_sigma() -> f64 {
    0.25
}
fn default_margin() -> f64 {
    1.0
}
fn default_concat_n_train() -> usize {
    2000
}
fn default_concat_n_unlabeled() -> usize {
    4000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodepParams {
    #[serde(default = "default_codep_n")]
    pub n_train: usize,
    #[serde(default = "default_codep_n_unlabeled")]
    pub n_unlabeled: usize,
    #[serde(default = "default_codep_n")]
    pub n_test: usize,
    #[serde(default)]
    pub h_b_encoding: HbEncoding,
}

fn default_codep_n() -> usize {
    1500
}
fn default_codep_n_unlabeled() -> usize {
    3000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: Method,
    /// Pin the first sequential hypothesis to the spurious labeling (2D task
    /// only). Defaults to true there, so the second hypothesis is measured
    /// against a known starting point.
    #[serde(default)]
    pub pin_first_to_spurious: Option<bool>,
    /// Logit gain of the pinned spurious hypothesis.
    #[serde(default = "default_pin_gain")]
    pub pin_gain: f64,
    /// Shared-trunk depth for simultaneous training (0 = independent heads).
    #[serde(default)]
    pub trunk_depth: usize,
}

fn default_pin_gain() -> f64 {
    8.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_model_kind")]
    pub kind: ModelKind,
    #[serde(default)]
    pub hidden: Vec<usize>,
}

fn default_model_kind() -> ModelKind {
    ModelKind::Linear
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Linear, hidden: vec![] }
    }
}

impl ModelConfig {
    pub fn spec(&self, input_dim: usize) -> Result<ModelSpec> {
        ModelSpec::new(self.kind, input_dim, self.hidden.clone(), 2)
    }

    pub fn name(&self) -> String {
        match self.kind {
            ModelKind::Linear => "linear".into(),
            ModelKind::Mlp => {
                let widths: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
                format!("mlp[{}]", widths.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiversificationSection {
    /// Defaults to the method's standard value (5 for D-BAT, 50 for DivDis).
    pub alpha: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Defaults to the empirical label distribution of the training split.
    pub prior: Option<Vec<f64>>,
    #[serde(default)]
    pub prev_aggregate: PrevAggregate,
}

fn default_lambda() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Omit for full-batch descent; set to a batch size for seeded minibatches.
    #[serde(default)]
    pub minibatch: Option<usize>,
}

impl ScheduleConfig {
    pub fn schedule(&self, seed: u64) -> TrainSchedule {
        TrainSchedule {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_mode: self.minibatch.map_or(BatchMode::FullBatch, BatchMode::Minibatch),
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default = "default_r_axis")]
    pub r: Vec<f64>,
    #[serde(default = "default_k_axis")]
    pub k: Vec<usize>,
    /// Overrides `[diversification].alpha` per grid point when set.
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_r_axis() -> Vec<f64> {
    vec![0.0, 0.25, 0.5]
}
fn default_k_axis() -> Vec<usize> {
    vec![2]
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self { r: default_r_axis(), k: default_k_axis(), alpha: None, seeds: default_seeds() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSelection {
    #[serde(default = "default_true")]
    pub per_hypothesis: bool,
    #[serde(default = "default_true")]
    pub worst_group: bool,
    #[serde(default = "default_true")]
    pub agreement_on_du: bool,
    #[serde(default = "default_true")]
    pub boundary_angles: bool,
    #[serde(default)]
    pub agreement_score: bool,
    #[serde(default = "default_oracle_criterion")]
    pub oracle_criterion: OracleCriterion,
}

fn default_true() -> bool {
    true
}
fn default_oracle_criterion() -> OracleCriterion {
    OracleCriterion::Accuracy
}

impl Default for MetricSelection {
    fn default() -> Self {
        Self {
            per_hypothesis: true,
            worst_group: true,
            agreement_on_du: true,
            boundary_angles: true,
            agreement_score: false,
            oracle_criterion: OracleCriterion::Accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
    /// Fraction of the test split held out as the labeled oracle set for
    /// disambiguation; accuracy is reported on the remainder.
    #[serde(default = "default_oracle_fraction")]
    pub oracle_fraction: f64,
}

fn default_format() -> OutputFormat {
    OutputFormat::Csv
}
fn default_oracle_fraction() -> f64 {
    0.2
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: None, format: OutputFormat::Csv, oracle_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseVariant {
    PerpA,
    PerpB,
}

impl BaseVariant {
    fn variant(self) -> CoVariant {
        match self {
            BaseVariant::PerpA => CoVariant::PerpA,
            BaseVariant::PerpB => CoVariant::PerpB,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodepSection {
    #[serde(default = "default_codep_variants")]
    pub variants: Vec<BaseVariant>,
    /// Extra interpolation weights to sweep (0 = PerpA pool, 1 = PerpB pool).
    #[serde(default)]
    pub interpolate: Vec<f64>,
    /// Verify the architecture-alignment inequality on each dataset before
    /// training, and flag records when it fails.
    #[serde(default = "default_true")]
    pub check_precondition: bool,
    #[serde(default = "default_mlp_hidden")]
    pub mlp_hidden: Vec<usize>,
    /// Learning-rate override for the MLP architecture.
    #[serde(default)]
    pub mlp_learning_rate: Option<f64>,
    /// Pair count for the precondition agreement-score estimates.
    #[serde(default = "default_precondition_pairs")]
    pub precondition_pairs: usize,
}

fn default_codep_variants() -> Vec<BaseVariant> {
    vec![BaseVariant::PerpA, BaseVariant::PerpB]
}
fn default_mlp_hidden() -> Vec<usize> {
    vec![12]
}
fn default_precondition_pairs() -> usize {
    2
}

impl Default for CodepSection {
    fn default() -> Self {
        Self {
            variants: default_codep_variants(),
            interpolate: vec![],
            check_precondition: true,
            mlp_hidden: default_mlp_hidden(),
            mlp_learning_rate: None,
            precondition_pairs: default_precondition_pairs(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsSection {
    #[serde(default = "default_as_pairs")]
    pub n_pairs: usize,
    /// Schedule override for the retraining runs inside the estimator.
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
}

fn default_as_pairs() -> usize {
    5
}

impl Default for AsSection {
    fn default() -> Self {
        Self { n_pairs: 5, epochs: None, learning_rate: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: TaskConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub diversification: DiversificationSection,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub sweep: SweepAxes,
    #[serde(default)]
    pub metrics: MetricSelection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub codep: CodepSection,
    #[serde(default)]
    pub agreement_score: AsSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.r.is_empty() || self.sweep.k.is_empty() || self.sweep.seeds.is_empty() {
            return Err(Error::InvalidConfig("every sweep axis must be nonempty".into()));
        }
        if let Some(alpha) = &self.sweep.alpha {
            if alpha.is_empty() {
                return Err(Error::InvalidConfig("alpha axis must be nonempty when given".into()));
            }
        }
        if !(0.0..1.0).contains(&self.output.oracle_fraction) || self.output.oracle_fraction <= 0.0 {
            return Err(Error::InvalidConfig("oracle_fraction must be in (0, 1)".into()));
        }
        self.model.spec(self.task.input_dim())?;
        Ok(())
    }

    fn alpha_axis(&self) -> Vec<f64> {
        self.sweep.alpha.clone().unwrap_or_else(|| {
            vec![self.diversification.alpha.unwrap_or_else(|| self.method.kind.default_alpha())]
        })
    }

    fn diversification_config(&self, k: usize, alpha: f64, d_t: &Dataset) -> Result<DiversificationConfig> {
        let prior = match &self.diversification.prior {
            Some(p) => p.clone(),
            None => empirical_prior(d_t)?,
        };
        let cfg = DiversificationConfig {
            k,
            alpha,
            lambda: self.diversification.lambda,
            loss_kind: self.method.kind.loss_kind(),
            prior,
            prev_aggregate: self.diversification.prev_aggregate,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Empirical class distribution of the training labels.
pub fn empirical_prior(d_t: &Dataset) -> Result<Vec<f64>> {
    let labels = d_t.labels()?;
    let q = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    let mut counts = vec![0usize; q];
    for &y in labels {
        counts[y] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / labels.len() as f64).collect())
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// One result row. Every optional field emits as empty when absent; wall
/// time is informational only and never written to result files.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub task: String,
    pub method: String,
    pub model: String,
    pub variant: String,
    pub t: Option<f64>,
    pub r: Option<f64>,
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub status: String,
    pub best_index: Option<usize>,
    pub best_accuracy: Option<f64>,
    pub h2_accuracy: Option<f64>,
    pub per_hypothesis_accuracy: Vec<f64>,
    pub worst_group_accuracy: Option<f64>,
    pub agreement_on_du: Option<f64>,
    pub boundary_angles: Vec<f64>,
    pub train_accuracies: Vec<Option<f64>>,
    pub erm_loss: Option<f64>,
    pub div_loss: Option<f64>,
    pub as_mean: Option<f64>,
    pub as_std: Option<f64>,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

impl SweepRecord {
    fn blank(cfg: &ExperimentConfig, model: String) -> Self {
        Self {
            task: cfg.task.name().into(),
            method: cfg.method.kind.name().into(),
            model,
            variant: String::new(),
            t: None,
            r: None,
            k: 0,
            alpha: 0.0,
            seed: 0,
            status: "ok".into(),
            best_index: None,
            best_accuracy: None,
            h2_accuracy: None,
            per_hypothesis_accuracy: vec![],
            worst_group_accuracy: None,
            agreement_on_du: None,
            boundary_angles: vec![],
            train_accuracies: vec![],
            erm_loss: None,
            div_loss: None,
            as_mean: None,
            as_std: None,
            wall_time_ms: 0.0,
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn all_ok(&self) -> bool {
        self.records.iter().all(SweepRecord::ok)
    }
}

fn error_tag(e: &Error) -> String {
    let tag = match e {
        Error::NonFinite(_) => "nonfinite_loss",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::InvalidConfig(_) => "invalid_config",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::EmptyDataset => "empty_dataset",
        Error::MissingLabels => "missing_labels",
        Error::MissingAux(_) => "missing_aux",
        Error::Io(_) => "io",
        Error::Parse(_) => "parse",
    };
    format!("error:{tag}")
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

fn build_splits(cfg: &ExperimentConfig, r: f64, seed: u64) -> Result<TaskSplits> {
    let data_seed = derive_seed(seed, STREAM_DATA, 0);
    match &cfg.task {
        TaskConfig::TwoD(p) => gen_2d_task(&TwoDTaskSpec {
            n_train: p.n_train,
            n_unlabeled: p.n_unlabeled,
            n_test: p.n_test,
            r,
            seed: data_seed,
        }),
        TaskConfig::Concat(p) => gen_concat_task(&ConcatTaskSpec {
            dim_semantic: p.dim_semantic,
            dim_spurious: p.dim_spurious,
            noise_sigma: p.noise_sigma,
            margin: p.margin,
            n_train: p.n_train,
            n_unlabeled: p.n_unlabeled,
            n_test: p.n_test,
            r_u: r,
            seed: data_seed,
        }),
        TaskConfig::Codependence(_) => Err(Error::InvalidConfig(
            "co-dependence experiments run through run_codependence".into(),
        )),
    }
}

/// Splits the test data into a labeled oracle slice (first rows; the
/// generators shuffle, so this is unbiased) and the reported test slice.
pub fn oracle_split(d_ood: &Dataset, fraction: f64) -> (Dataset, Dataset) {
    let n_oracle = ((d_ood.len() as f64 * fraction).round() as usize)
        .clamp(1, d_ood.len().saturating_sub(1).max(1));
    let oracle: Vec<usize> = (0..n_oracle).collect();
    let test: Vec<usize> = (n_oracle..d_ood.len()).collect();
    (d_ood.subset(&oracle), d_ood.subset(&test))
}

/// Trains the configured method on prepared splits.
pub fn train_method(
    cfg: &ExperimentConfig,
    spec: &ModelSpec,
    splits: &TaskSplits,
    div: &DiversificationConfig,
    sched: &TrainSchedule,
) -> Result<HypothesisSet> {
    match cfg.method.kind {
        Method::Divdis => {
            train_simultaneous(spec, cfg.method.trunk_depth, &splits.d_t, &splits.d_u, div, sched)
        }
        Method::Dbat | Method::DivdisSeq => {
            let pin_default = matches!(cfg.task, TaskConfig::TwoD(_));
            let pin = cfg.method.pin_first_to_spurious.unwrap_or(pin_default);
            let h1 = if pin {
                if !matches!(cfg.task, TaskConfig::TwoD(_)) {
                    return Err(Error::InvalidConfig(
                        "pin_first_to_spurious applies to the 2D task only".into(),
                    ));
                }
                Some(Hypothesis::Model(linear_from_angle(0.0, cfg.method.pin_gain)?))
            } else {
                None
            };
            train_sequential(spec, &splits.d_t, &splits.d_u, div, sched, h1)
        }
    }
}

/// Runs the full sweep grid: `r` outermost, then `k`, then `alpha`, with
/// seeds innermost. A failing grid point is recorded with an error tag and
/// the sweep continues.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if matches!(cfg.task, TaskConfig::Codependence(_)) {
        return Err(Error::InvalidConfig("use run_codependence for the co-dependence task".into()));
    }
    let alpha_axis = cfg.alpha_axis();
    let mut records = Vec::new();
    for &r in &cfg.sweep.r {
        for &k in &cfg.sweep.k {
            for &alpha in &alpha_axis {
                for &seed in &cfg.sweep.seeds {
                    records.push(run_grid_point(cfg, r, k, alpha, seed));
                }
            }
        }
    }
    Ok(SweepResult { records })
}

fn run_grid_point(cfg: &ExperimentConfig, r: f64, k: usize, alpha: f64, seed: u64) -> SweepRecord {
    let start = Instant::now();
    let mut rec = SweepRecord::blank(cfg, cfg.model.name());
    rec.r = Some(r);
    rec.k = k;
    rec.alpha = alpha;
    rec.seed = seed;

    let outcome = (|| -> Result<()> {
        let splits = build_splits(cfg, r, seed)?;
        let spec = cfg.model.spec(cfg.task.input_dim())?;
        let div = cfg.diversification_config(k, alpha, &splits.d_t)?;
        let sched = cfg.schedule.schedule(derive_seed(seed, STREAM_SCHED, 0));
        let set = train_method(cfg, &spec, &splits, &div, &sched)?;
        fill_metrics(cfg, &mut rec, &set, &splits, &spec, &sched, seed)
    })();
    if let Err(e) = outcome {
        rec.status = error_tag(&e);
    }
    rec.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    rec
}

fn fill_metrics(
    cfg: &ExperimentConfig,
    rec: &mut SweepRecord,
    set: &HypothesisSet,
    splits: &TaskSplits,
    spec: &ModelSpec,
    sched: &TrainSchedule,
    seed: u64,
) -> Result<()> {
    let (oracle, test) = oracle_split(&splits.d_ood, cfg.output.oracle_fraction);
    let (best, _) = disambiguate(set, &oracle, cfg.metrics.oracle_criterion)?;
    rec.best_index = Some(best);

    let per_hyp: Vec<f64> =
        set.hyps.iter().map(|h| accuracy(h, &test)).collect::<Result<_>>()?;
    rec.best_accuracy = Some(per_hyp[best]);
    if per_hyp.len() > 1 {
        rec.h2_accuracy = Some(per_hyp[1]);
    }
    if cfg.metrics.per_hypothesis {
        rec.per_hypothesis_accuracy = per_hyp;
    }
    if cfg.metrics.worst_group {
        rec.worst_group_accuracy = Some(worst_group_accuracy(&set.hyps[best], &test)?);
    }
    if cfg.metrics.agreement_on_du {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..set.hyps.len() {
            for j in i + 1..set.hyps.len() {
                total += agreement(&set.hyps[i], &set.hyps[j], &splits.d_u)?;
                pairs += 1;
            }
        }
        if pairs > 0 {
            rec.agreement_on_du = Some(total / pairs as f64);
        }
    }
    if cfg.metrics.boundary_angles {
        let angles: Vec<f64> = set.hyps.iter().filter_map(|h| boundary_angle(h).ok()).collect();
        if angles.len() == set.hyps.len() {
            rec.boundary_angles = angles;
        }
    }
    rec.train_accuracies = set.train_accuracies.clone();

    // Final objective components on the whole splits.
    let labels = splits.d_t.labels()?;
    let mut erm = 0.0;
    for h in &set.hyps {
        erm += cross_entropy(&h.probs(&splits.d_t.x)?, labels)?;
    }
    rec.erm_loss = Some(erm);
    let probs_u: Vec<_> =
        set.hyps.iter().map(|h| h.probs(&splits.d_u.x)).collect::<Result<Vec<_>>>()?;
    let mut div_total = 0.0;
    let mut pairs = 0usize;
    for i in 0..probs_u.len() {
        for j in i + 1..probs_u.len() {
            div_total += pairwise_diversification(
                set.config.loss_kind,
                &probs_u[i],
                &probs_u[j],
                set.config.lambda,
                &set.config.prior,
            )?;
            pairs += 1;
        }
    }
    if pairs > 0 {
        rec.div_loss = Some(div_total / pairs as f64);
    }

    if cfg.metrics.agreement_score {
        let report = measure_as_of_hypotheses(
            set,
            &splits.d_t,
            &splits.d_u,
            &splits.d_ood,
            spec,
            &as_schedule(cfg, sched),
            cfg.agreement_score.n_pairs,
            derive_seed(seed, STREAM_AS, 0),
        )?;
        let hyp_rows: Vec<&AsRow> =
            report.rows.iter().filter(|r| r.label.starts_with("hypothesis_")).collect();
        if !hyp_rows.is_empty() {
            rec.as_mean =
                Some(hyp_rows.iter().map(|r| r.estimate.mean).sum::<f64>() / hyp_rows.len() as f64);
            rec.as_std =
                Some(hyp_rows.iter().map(|r| r.estimate.std).sum::<f64>() / hyp_rows.len() as f64);
        }
    }
    Ok(())
}

fn as_schedule(cfg: &ExperimentConfig, sched: &TrainSchedule) -> TrainSchedule {
    let mut s = sched.clone();
    if let Some(e) = cfg.agreement_score.epochs {
        s.epochs = e;
    }
    if let Some(lr) = cfg.agreement_score.learning_rate {
        s.learning_rate = lr;
    }
    s
}

// ---------------------------------------------------------------------------
// Co-dependence runs
// ---------------------------------------------------------------------------

/// Runs the co-dependence grid: (architecture x variant) plus any
/// interpolation weights, D-BAT with K = 2 only. Records carry the second
/// hypothesis's test accuracy; when the architecture-alignment precondition
/// check fails for a dataset, its records are flagged `precondition_failed`.
pub fn run_codependence(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let TaskConfig::Codependence(params) = &cfg.task else {
        return Err(Error::InvalidConfig("run_codependence needs a codependence task".into()));
    };
    if cfg.method.kind != Method::Dbat {
        return Err(Error::InvalidConfig("the co-dependence experiment is D-BAT only".into()));
    }
    if cfg.sweep.k != vec![2] {
        return Err(Error::InvalidConfig("the co-dependence experiment uses k = 2".into()));
    }

    let input_dim = cfg.task.input_dim();
    let linear_spec = ModelSpec::linear(input_dim, 2)?;
    let mlp_spec = ModelSpec::mlp(input_dim, cfg.codep.mlp_hidden.clone(), 2)?;
    let alpha = cfg.alpha_axis()[0];

    let mut variants: Vec<(String, CoVariant, Option<f64>)> = cfg
        .codep
        .variants
        .iter()
        .map(|v| {
            let name = match v {
                BaseVariant::PerpA => "perp_a",
                BaseVariant::PerpB => "perp_b",
            };
            (name.to_string(), v.variant(), None)
        })
        .collect();
    for &t in &cfg.codep.interpolate {
        variants.push(("interpolate".into(), CoVariant::Interpolate(t), Some(t)));
    }

    let mut records = Vec::new();
    for (variant_name, variant, t) in &variants {
        for &seed in &cfg.sweep.seeds {
            let splits_res = gen_codependence_task(&CoDependenceSpec {
                variant: *variant,
                n_train: params.n_train,
                n_unlabeled: params.n_unlabeled,
                n_test: params.n_test,
                h_b_encoding: params.h_b_encoding,
                seed: derive_seed(seed, STREAM_DATA, 0),
            });

            let precondition_ok = match (&splits_res, cfg.codep.check_precondition) {
                (Ok(splits), true) => {
                    check_alignment_precondition(cfg, splits, &linear_spec, &mlp_spec, seed)
                        .unwrap_or(false)
                }
                _ => true,
            };

            for (arch_name, spec, lr_override) in [
                ("linear", &linear_spec, None),
                ("mlp", &mlp_spec, cfg.codep.mlp_learning_rate),
            ] {
                let start = Instant::now();
                let mut rec = SweepRecord::blank(cfg, arch_label(arch_name, spec));
                rec.variant = variant_name.clone();
                rec.t = *t;
                rec.k = 2;
                rec.alpha = alpha;
                rec.seed = seed;

                let outcome = (|| -> Result<()> {
                    let splits = splits_res.as_ref().map_err(clone_error)?;
                    let div = cfg.diversification_config(2, alpha, &splits.d_t)?;
                    let mut sched = cfg.schedule.schedule(derive_seed(seed, STREAM_SCHED, 0));
                    if let Some(lr) = lr_override {
                        sched.learning_rate = lr;
                    }
                    let set = train_sequential(spec, &splits.d_t, &splits.d_u, &div, &sched, None)?;

                    let (oracle, test) = oracle_split(&splits.d_ood, cfg.output.oracle_fraction);
                    let (best, _) = disambiguate(&set, &oracle, cfg.metrics.oracle_criterion)?;
                    let per_hyp: Vec<f64> =
                        set.hyps.iter().map(|h| accuracy(h, &test)).collect::<Result<_>>()?;
                    rec.best_index = Some(best);
                    rec.best_accuracy = Some(per_hyp[best]);
                    rec.h2_accuracy = Some(per_hyp[1]);
                    if cfg.metrics.per_hypothesis {
                        rec.per_hypothesis_accuracy = per_hyp;
                    }
                    rec.agreement_on_du =
                        Some(agreement(&set.hyps[0], &set.hyps[1], &splits.d_u)?);
                    rec.train_accuracies = set.train_accuracies.clone();
                    Ok(())
                })();
                match outcome {
                    Err(e) => rec.status = error_tag(&e),
                    Ok(()) if !precondition_ok => rec.status = "precondition_failed".into(),
                    Ok(()) => {}
                }
                rec.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
                records.push(rec);
            }
        }
    }
    Ok(SweepResult { records })
}

fn arch_label(name: &str, spec: &ModelSpec) -> String {
    match spec.kind {
        ModelKind::Linear => name.into(),
        ModelKind::Mlp => {
            let widths: Vec<String> = spec.hidden_widths.iter().map(usize::to_string).collect();
            format!("{name}[{}]", widths.join(","))
        }
    }
}

fn clone_error(e: &Error) -> Error {
    Error::InvalidParameter(e.to_string())
}

/// Empirically checks the alignment inequality behind the co-dependence
/// construction: the linear architecture must score the linear planted
/// hypothesis above the XOR one, and the MLP the other way around. Measured
/// with the agreement-score estimator on the union of the training and
/// unlabeled splits.
pub fn check_alignment_precondition(
    cfg: &ExperimentConfig,
    splits: &TaskSplits,
    linear_spec: &ModelSpec,
    mlp_spec: &ModelSpec,
    seed: u64,
) -> Result<bool> {
    let union = splits.d_t.concat(&splits.d_u)?;
    let labels_a = union.aux(AUX_HYP_A)?.to_vec();
    let labels_b = union.aux(AUX_HYP_B)?.to_vec();
    let sched = cfg.schedule.schedule(0);
    let n_pairs = cfg.codep.precondition_pairs;

    let score = |spec: &ModelSpec, labels: &[usize], stream: u64| {
        let mut s = sched.clone();
        if spec.kind == ModelKind::Mlp {
            if let Some(lr) = cfg.codep.mlp_learning_rate {
                s.learning_rate = lr;
            }
        }
        estimate_agreement_score(
            spec,
            &s,
            labels,
            &union,
            &splits.d_ood,
            n_pairs,
            derive_seed(seed, STREAM_AS, stream),
        )
        .map(|e| e.mean)
    };

    let lin_a = score(linear_spec, &labels_a, 0)?;
    let lin_b = score(linear_spec, &labels_b, 1)?;
    let mlp_a = score(mlp_spec, &labels_a, 2)?;
    let mlp_b = score(mlp_spec, &labels_b, 3)?;
    Ok(lin_a > lin_b && mlp_b > mlp_a)
}

// ---------------------------------------------------------------------------
// Agreement-score measurement
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AsRow {
    pub label: String,
    pub estimate: AgreementScoreEstimate,
}

#[derive(Debug, Clone, Default)]
pub struct AsReport {
    pub rows: Vec<AsRow>,
}

impl AsReport {
    pub fn get(&self, label: &str) -> Option<&AgreementScoreEstimate> {
        self.rows.iter().find(|r| r.label == label).map(|r| &r.estimate)
    }

    pub fn render_csv(&self) -> String {
        let mut out = format!("# {RESULTS_VERSION}\nlabel,as_mean,as_std,n_pairs\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.label,
                fmt_sig(row.estimate.mean, 6),
                fmt_sig(row.estimate.std, 6),
                row.estimate.n_pairs
            ));
        }
        out
    }
}

/// Measures the agreement score of each found hypothesis (relabeling the
/// union of training and unlabeled data with its predictions) alongside the
/// semantic baseline (true labels everywhere) and the random baseline (true
/// labels on training data, uniformly random labels on the unlabeled split).
#[allow(clippy::too_many_arguments)]
pub fn measure_as_of_hypotheses(
    set: &HypothesisSet,
    d_t: &Dataset,
    d_u: &Dataset,
    d_ood: &Dataset,
    spec: &ModelSpec,
    sched: &TrainSchedule,
    n_pairs: usize,
    seed: u64,
) -> Result<AsReport> {
    let union = d_t.concat(d_u)?;
    let mut rows = Vec::new();

    let semantic = union.labels()?.to_vec();
    rows.push(AsRow {
        label: "semantic".into(),
        estimate: estimate_agreement_score(
            spec,
            sched,
            &semantic,
            &union,
            d_ood,
            n_pairs,
            derive_seed(seed, 0, 0),
        )?,
    });

    let mut random = d_t.labels()?.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_RANDOM_TASK, 0));
    let q = set.hyps.first().map_or(2, Hypothesis::num_classes);
    random.extend((0..d_u.len()).map(|_| rng.gen_range(0..q)));
    rows.push(AsRow {
        label: "random".into(),
        estimate: estimate_agreement_score(
            spec,
            sched,
            &random,
            &union,
            d_ood,
            n_pairs,
            derive_seed(seed, 1, 0),
        )?,
    });

    for (i, h) in set.hyps.iter().enumerate() {
        let mut labels = predict_labels(h, d_t)?;
        labels.extend(predict_labels(h, d_u)?);
        rows.push(AsRow {
            label: format!("hypothesis_{i}"),
            estimate: estimate_agreement_score(
                spec,
                sched,
                &labels,
                &union,
                d_ood,
                n_pairs,
                derive_seed(seed, 2, i as u64),
            )?,
        });
    }
    Ok(AsReport { rows })
}

// ---------------------------------------------------------------------------
// Result emission
// ---------------------------------------------------------------------------

/// Formats with `sig` significant digits, plain decimal inside a readable
/// exponent range, scientific outside it. Deterministic.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        format!("{:.*e}", sig.saturating_sub(1), x)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| fmt_sig(v, 6))
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&v| fmt_sig(v, 6)).collect::<Vec<_>>().join(";")
}

fn fmt_opt_list(xs: &[Option<f64>]) -> String {
    xs.iter().map(|&v| fmt_opt(v)).collect::<Vec<_>>().join(";")
}

/// Fixed, versioned CSV column set; list-valued columns are
/// semicolon-joined.
pub const CSV_HEADER: &str = "task,method,model,variant,t,r,k,alpha,seed,status,best_index,\
best_accuracy,h2_accuracy,per_hypothesis_accuracy,worst_group_accuracy,agreement_on_du,\
boundary_angles,train_accuracies,erm_loss,div_loss,as_mean,as_std";

pub fn render_csv(records: &[SweepRecord]) -> String {
    let mut out = format!("# {RESULTS_VERSION}\n{CSV_HEADER}\n");
    for r in records {
        let fields = [
            r.task.clone(),
            r.method.clone(),
            r.model.clone(),
            r.variant.clone(),
            fmt_opt(r.t),
            fmt_opt(r.r),
            r.k.to_string(),
            fmt_sig(r.alpha, 6),
            r.seed.to_string(),
            r.status.clone(),
            r.best_index.map_or_else(String::new, |i| i.to_string()),
            fmt_opt(r.best_accuracy),
            fmt_opt(r.h2_accuracy),
            fmt_list(&r.per_hypothesis_accuracy),
            fmt_opt(r.worst_group_accuracy),
            fmt_opt(r.agreement_on_du),
            fmt_list(&r.boundary_angles),
            fmt_opt_list(&r.train_accuracies),
            fmt_opt(r.erm_loss),
            fmt_opt(r.div_loss),
            fmt_opt(r.as_mean),
            fmt_opt(r.as_std),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn render_jsonl(records: &[SweepRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Parse(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes the sweep result to `path` in the requested format. Output is
/// byte-identical across re-runs of the same config.
pub fn emit_results(res: &SweepResult, path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => render_csv(&res.records),
        OutputFormat::Jsonl => render_jsonl(&res.records)?,
    };
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_sig_covers_ranges() {
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(0.5, 6), "0.5");
        assert_eq!(fmt_sig(0.693147180559945, 6), "0.693147");
        assert_eq!(fmt_sig(27.6310211159, 6), "27.631");
        assert_eq!(fmt_sig(123456.0, 6), "123456");
        assert_eq!(fmt_sig(1234567.0, 6), "1.23457e6");
        assert_eq!(fmt_sig(-0.25, 6), "-0.25");
        assert_eq!(fmt_sig(1e-7, 6), "1.00000e-7");
    }

    #[test]
    fn empty_sweep_renders_header_only() {
        let res = SweepResult::default();
        let text = render_csv(&res.records);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with('#'));
        assert!(lines[1].starts_with("task,method"));
    }

    fn tiny_config(toml_extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
name = "tiny"

[task.two_d]
n_train = 60
n_unlabeled = 80
n_test = 60

[method]
kind = "dbat"

[schedule]
epochs = 40
learning_rate = 1.0

{toml_extra}
"#
        );
        ExperimentConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn grid_produces_one_record_per_point() {
        let cfg = tiny_config("[sweep]\nr = [0.0, 0.5]\nk = [2, 3]\nseeds = [0]\n");
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.records.len(), 4);
        assert!(res.all_ok(), "statuses: {:?}", res.records.iter().map(|r| &r.status).collect::<Vec<_>>());
        // Axis-major ordering: r varies slowest.
        assert_eq!(res.records[0].r, Some(0.0));
        assert_eq!(res.records[0].k, 2);
        assert_eq!(res.records[1].k, 3);
        assert_eq!(res.records[2].r, Some(0.5));
    }

    #[test]
    fn rerun_is_byte_identical() {
        let cfg = tiny_config("[sweep]\nr = [0.25]\nk = [2]\nseeds = [1]\n");
        let a = render_csv(&run_sweep(&cfg).unwrap().records);
        let b = render_csv(&run_sweep(&cfg).unwrap().records);
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation_rejects_empty_axes() {
        let text = r#"
name = "bad"
[task.two_d]
[method]
kind = "dbat"
[schedule]
epochs = 10
learning_rate = 1.0
[sweep]
r = []
"#;
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn oracle_split_is_disjoint_and_sized() {
        let spec = TwoDTaskSpec { n_train: 10, n_unlabeled: 10, n_test: 100, r: 0.5, seed: 0 };
        let splits = gen_2d_task(&spec).unwrap();
        let (oracle, test) = oracle_split(&splits.d_ood, 0.2);
        assert_eq!(oracle.len(), 20);
        assert_eq!(test.len(), 80);
    }
}
