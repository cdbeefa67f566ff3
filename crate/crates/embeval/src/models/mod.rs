//! Model roster: constant analogy solvers, k-NN, logistic regression, RBF
//! kernel ridge and the analogy regression network, plus cross-validated
//! hyperparameter selection with an optional fallback to a constant model.

pub mod analogy_net;
pub mod constant;
pub mod features;
pub mod kernel_ridge;
pub mod knn;
pub mod logistic;

use crate::datasets::{AnalogyQuad, TaskCategory};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seed::derive;
use crate::stats;

use analogy_net::{fit_analogy_net, AnalogyNet, QuadVectors};
use constant::{ConstantAnalogyMethod, DEFAULT_EPSILON};
use kernel_ridge::{
    fit_kernel_ridge, fit_kernel_ridge_classifier, KernelRidge, KernelRidgeClassifier,
};
use knn::{fit_knn, KnnClassifier};
use logistic::{fit_logistic, LogisticClassifier};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Every model the harness knows, by identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    Knn,
    Logistic,
    KernelRidge,
    AnalogyNet,
    CosineConst,
    ThreeCosAdd,
    ThreeCosMul,
    AverageLogistic,
}

impl ModelId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelId::Knn => "knn",
            ModelId::Logistic => "logistic",
            ModelId::KernelRidge => "kernel_ridge",
            ModelId::AnalogyNet => "analogy_net",
            ModelId::CosineConst => "cosine_const",
            ModelId::ThreeCosAdd => "three_cos_add",
            ModelId::ThreeCosMul => "three_cos_mul",
            ModelId::AverageLogistic => "average_logistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "knn" => ModelId::Knn,
            "logistic" => ModelId::Logistic,
            "kernel_ridge" => ModelId::KernelRidge,
            "analogy_net" => ModelId::AnalogyNet,
            "cosine_const" => ModelId::CosineConst,
            "three_cos_add" => ModelId::ThreeCosAdd,
            "three_cos_mul" => ModelId::ThreeCosMul,
            "average_logistic" => ModelId::AverageLogistic,
            other => return Err(Error::Config(format!("unknown model id {other:?}"))),
        })
    }

    /// Linearity class is a function of the model, never free to disagree.
    pub fn linearity(&self) -> Linearity {
        match self {
            ModelId::Knn | ModelId::KernelRidge | ModelId::AnalogyNet => Linearity::Nonlinear,
            ModelId::Logistic | ModelId::AverageLogistic => Linearity::Linear,
            ModelId::CosineConst | ModelId::ThreeCosAdd | ModelId::ThreeCosMul => {
                Linearity::Constant
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.linearity() == Linearity::Constant
    }

    pub fn valid_for(&self, category: TaskCategory) -> bool {
        match category {
            TaskCategory::Similarity => {
                matches!(self, ModelId::CosineConst | ModelId::KernelRidge)
            }
            TaskCategory::Analogy => matches!(
                self,
                ModelId::ThreeCosAdd | ModelId::ThreeCosMul | ModelId::AnalogyNet
            ),
            TaskCategory::SingleWord | TaskCategory::Sentence => matches!(
                self,
                ModelId::Knn | ModelId::Logistic | ModelId::KernelRidge | ModelId::AverageLogistic
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Linearity {
    Constant,
    Linear,
    Nonlinear,
}

impl Linearity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Linearity::Constant => "constant",
            Linearity::Linear => "linear",
            Linearity::Nonlinear => "nonlinear",
        }
    }
}

/// A hyperparameter value in a search grid.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperValue {
    Float(f64),
    Int(i64),
    Bool(bool),
    Str(String),
}

impl HyperValue {
    fn as_f64(&self) -> Option<f64> {
        match self {
            HyperValue::Float(x) => Some(*x),
            HyperValue::Int(n) => Some(*n as f64),
            _ => None,
        }
    }

    fn as_usize(&self) -> Option<usize> {
        match self {
            HyperValue::Int(n) if *n >= 0 => Some(*n as usize),
            _ => None,
        }
    }

    fn as_bool(&self) -> Option<bool> {
        match self {
            HyperValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    fn as_str(&self) -> Option<&str> {
        match self {
            HyperValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn display(&self) -> String {
        match self {
            HyperValue::Float(x) => format!("{x}"),
            HyperValue::Int(n) => format!("{n}"),
            HyperValue::Bool(b) => format!("{b}"),
            HyperValue::Str(s) => s.clone(),
        }
    }
}

/// Ordered hyperparameter grid; order fixes tie-breaking during selection.
pub type HyperGrid = Vec<(String, Vec<HyperValue>)>;

/// One concrete assignment of hyperparameters.
pub type HyperPoint = Vec<(String, HyperValue)>;

/// A model identifier plus its search grid.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub model_id: ModelId,
    pub hyper_grid: HyperGrid,
}

impl ModelSpec {
    pub fn new(model_id: ModelId, hyper_grid: HyperGrid) -> Self {
        Self {
            model_id,
            hyper_grid,
        }
    }

    pub fn linearity(&self) -> Linearity {
        self.model_id.linearity()
    }

    /// Cartesian product of the grid, last key varying fastest.
    pub fn grid_points(&self) -> Vec<HyperPoint> {
        let mut points = vec![Vec::new()];
        for (name, values) in &self.hyper_grid {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for point in &points {
                for value in values {
                    let mut p: HyperPoint = point.clone();
                    p.push((name.clone(), value.clone()));
                    next.push(p);
                }
            }
            points = next;
        }
        points
    }

    /// Whether the grid asks for the constant-model fallback.
    pub fn wants_fallback(&self) -> bool {
        self.hyper_grid.iter().any(|(name, values)| {
            name == "fallback" && values.iter().any(|v| v.as_bool() == Some(true))
        })
    }
}

fn grid(entries: &[(&str, Vec<HyperValue>)]) -> HyperGrid {
    entries
        .iter()
        .map(|(name, values)| (name.to_string(), values.clone()))
        .collect()
}

fn floats(xs: &[f64]) -> Vec<HyperValue> {
    xs.iter().map(|x| HyperValue::Float(*x)).collect()
}

fn ints(xs: &[i64]) -> Vec<HyperValue> {
    xs.iter().map(|x| HyperValue::Int(*x)).collect()
}

/// Default model roster for a task category.
pub fn default_roster(category: TaskCategory) -> Vec<ModelSpec> {
    let logistic_grid = grid(&[
        ("l2", floats(&[0.0, 1e-3, 1e-1])),
        ("learning_rate", floats(&[0.1, 0.01])),
        ("epochs", ints(&[50])),
        ("batch_size", ints(&[32])),
    ]);
    let ridge_grid = grid(&[
        ("gamma", floats(&[0.1, 1.0, 10.0])),
        ("lambda", floats(&[1e-3, 1e-1])),
    ]);
    match category {
        TaskCategory::Similarity => vec![
            ModelSpec::new(ModelId::CosineConst, Vec::new()),
            ModelSpec::new(ModelId::KernelRidge, ridge_grid),
        ],
        TaskCategory::Analogy => vec![
            ModelSpec::new(ModelId::ThreeCosAdd, Vec::new()),
            ModelSpec::new(
                ModelId::ThreeCosMul,
                grid(&[("epsilon", floats(&[DEFAULT_EPSILON]))]),
            ),
            ModelSpec::new(
                ModelId::AnalogyNet,
                grid(&[
                    ("learning_rate", floats(&[0.1, 0.01, 0.001])),
                    ("epochs", ints(&[10, 50])),
                    (
                        "optimizer",
                        vec![
                            HyperValue::Str("sgd".into()),
                            HyperValue::Str("momentum".into()),
                        ],
                    ),
                    ("batch_size", ints(&[32, 128])),
                    ("fallback", vec![HyperValue::Bool(true)]),
                ]),
            ),
        ],
        TaskCategory::SingleWord => vec![
            ModelSpec::new(ModelId::Knn, grid(&[("k", ints(&[1, 5, 9]))])),
            ModelSpec::new(ModelId::Logistic, logistic_grid),
            ModelSpec::new(ModelId::KernelRidge, ridge_grid),
        ],
        TaskCategory::Sentence => vec![
            ModelSpec::new(ModelId::AverageLogistic, logistic_grid),
            ModelSpec::new(ModelId::KernelRidge, ridge_grid),
        ],
    }
}

/// Gradient-descent settings for the trainable models.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub fallback_to_constant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    /// Classical momentum with coefficient 0.9.
    Momentum,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be a positive integer".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be a positive integer".into()));
        }
        Ok(())
    }
}

fn point_get<'a>(point: &'a HyperPoint, name: &str) -> Option<&'a HyperValue> {
    point.iter().find(|(n, _)| n == name).map(|(_, v)| v)
}

fn point_f64(point: &HyperPoint, name: &str, default: f64) -> Result<f64> {
    match point_get(point, name) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Config(format!("hyperparameter {name:?} must be numeric"))),
    }
}

fn point_usize(point: &HyperPoint, name: &str, default: usize) -> Result<usize> {
    match point_get(point, name) {
        None => Ok(default),
        Some(v) => v.as_usize().ok_or_else(|| {
            Error::Config(format!("hyperparameter {name:?} must be a nonnegative integer"))
        }),
    }
}

fn train_config(point: &HyperPoint) -> Result<TrainConfig> {
    let optimizer = match point_get(point, "optimizer") {
        None => Optimizer::Sgd,
        Some(v) => match v.as_str() {
            Some("sgd") => Optimizer::Sgd,
            Some("momentum") => Optimizer::Momentum,
            _ => {
                return Err(Error::Config(
                    "hyperparameter \"optimizer\" must be \"sgd\" or \"momentum\"".into(),
                ))
            }
        },
    };
    let fallback = match point_get(point, "fallback") {
        None => false,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| Error::Config("hyperparameter \"fallback\" must be a boolean".into()))?,
    };
    Ok(TrainConfig {
        learning_rate: point_f64(point, "learning_rate", 0.01)?,
        epochs: point_usize(point, "epochs", 50)?,
        optimizer,
        batch_size: point_usize(point, "batch_size", 32)?,
        fallback_to_constant: fallback,
    })
}

/// How similarity predictions are scored against human scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMetric {
    Spearman,
    /// Median split of predictions and truths, then label agreement.
    AccuracyAtThreshold,
}

impl SimilarityMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimilarityMetric::Spearman => "spearman",
            SimilarityMetric::AccuracyAtThreshold => "accuracy_at_threshold",
        }
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Scores similarity predictions. A constant prediction vector scores 0
/// under Spearman (it carries no rank information); constant truths stay an
/// error so the caller can record a skipped point.
pub fn similarity_score(metric: SimilarityMetric, preds: &[f64], truths: &[f64]) -> Result<f64> {
    match metric {
        SimilarityMetric::Spearman => match stats::spearman(preds, truths) {
            Ok(rho) => Ok(rho),
            Err(Error::UndefinedCorrelation("first")) => Ok(0.0),
            Err(e) => Err(e),
        },
        SimilarityMetric::AccuracyAtThreshold => {
            let mp = median(preds);
            let mt = median(truths);
            let pl: Vec<u8> = preds.iter().map(|&x| u8::from(x >= mp)).collect();
            let tl: Vec<u8> = truths.iter().map(|&x| u8::from(x >= mt)).collect();
            stats::accuracy(&pl, &tl)
        }
    }
}

/// One similarity example: pair features, the human score, and the
/// precomputed cosine for the constant model.
#[derive(Debug, Clone)]
pub struct SimilarityExample {
    pub features: Vec<f64>,
    pub target: f64,
    pub cosine: f64,
}

/// One analogy example: the quad's tokens plus their embedded vectors.
#[derive(Debug, Clone)]
pub struct AnalogyExample {
    pub quad: AnalogyQuad,
    pub vectors: QuadVectors,
}

/// Task-typed training or evaluation material after feature extraction.
#[derive(Debug, Clone)]
pub enum TaskData {
    Classification(Vec<(Vec<f64>, u8)>),
    Similarity(Vec<SimilarityExample>),
    Analogy(Vec<AnalogyExample>),
}

impl TaskData {
    pub fn len(&self) -> usize {
        match self {
            TaskData::Classification(v) => v.len(),
            TaskData::Similarity(v) => v.len(),
            TaskData::Analogy(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subset(&self, idx: &[usize]) -> TaskData {
        match self {
            TaskData::Classification(v) => {
                TaskData::Classification(idx.iter().map(|&i| v[i].clone()).collect())
            }
            TaskData::Similarity(v) => {
                TaskData::Similarity(idx.iter().map(|&i| v[i].clone()).collect())
            }
            TaskData::Analogy(v) => TaskData::Analogy(idx.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Shared evaluation context: the (normalized, intersected) table plus
/// scoring knobs.
#[derive(Debug, Clone, Copy)]
pub struct FitContext<'t> {
    pub table: &'t EmbeddingTable,
    pub exclude_analogy_inputs: bool,
    pub similarity_metric: SimilarityMetric,
}

/// A fitted (or constant) model ready to score test material.
#[derive(Debug, Clone)]
pub enum FittedModel {
    ConstantCosine,
    ConstantAnalogy(ConstantAnalogyMethod),
    Knn(KnnClassifier),
    Logistic(LogisticClassifier),
    KernelRidgeReg(KernelRidge),
    KernelRidgeCls(KernelRidgeClassifier),
    AnalogyNet(Box<AnalogyNet>),
}

/// Fits `model_id` at one grid point on the given training material.
pub fn fit_model(
    model_id: ModelId,
    point: &HyperPoint,
    train: &TaskData,
    seed: u64,
) -> Result<FittedModel> {
    match (model_id, train) {
        (ModelId::CosineConst, TaskData::Similarity(_)) => Ok(FittedModel::ConstantCosine),
        (ModelId::ThreeCosAdd, TaskData::Analogy(_)) => Ok(FittedModel::ConstantAnalogy(
            ConstantAnalogyMethod::three_cos_add(),
        )),
        (ModelId::ThreeCosMul, TaskData::Analogy(_)) => {
            let epsilon = point_f64(point, "epsilon", DEFAULT_EPSILON)?;
            Ok(FittedModel::ConstantAnalogy(
                ConstantAnalogyMethod::three_cos_mul(epsilon)?,
            ))
        }
        (ModelId::Knn, TaskData::Classification(train)) => {
            let k = point_usize(point, "k", 5)?;
            Ok(FittedModel::Knn(fit_knn(train, k)?))
        }
        (ModelId::Logistic | ModelId::AverageLogistic, TaskData::Classification(train)) => {
            let l2 = point_f64(point, "l2", 0.0)?;
            let config = train_config(point)?;
            Ok(FittedModel::Logistic(fit_logistic(train, l2, &config, seed)?))
        }
        (ModelId::KernelRidge, TaskData::Classification(train)) => {
            let gamma = point_f64(point, "gamma", 1.0)?;
            let lambda = point_f64(point, "lambda", 1e-3)?;
            Ok(FittedModel::KernelRidgeCls(fit_kernel_ridge_classifier(
                train, gamma, lambda,
            )?))
        }
        (ModelId::KernelRidge, TaskData::Similarity(examples)) => {
            let gamma = point_f64(point, "gamma", 1.0)?;
            let lambda = point_f64(point, "lambda", 1e-3)?;
            // each pair enters twice, once per word order; the feature map
            // is symmetric, so the second copy is an exact duplicate row
            let rows: Vec<(Vec<f64>, f64)> = examples
                .iter()
                .flat_map(|e| {
                    [
                        (e.features.clone(), e.target),
                        (e.features.clone(), e.target),
                    ]
                })
                .collect();
            Ok(FittedModel::KernelRidgeReg(fit_kernel_ridge(
                &rows, gamma, lambda,
            )?))
        }
        (ModelId::AnalogyNet, TaskData::Analogy(examples)) => {
            let config = train_config(point)?;
            let quads: Vec<QuadVectors> = examples.iter().map(|e| e.vectors.clone()).collect();
            Ok(FittedModel::AnalogyNet(Box::new(fit_analogy_net(
                &quads, &config, seed,
            )?)))
        }
        (id, data) => Err(Error::Config(format!(
            "model {:?} cannot fit {} data",
            id.as_str(),
            match data {
                TaskData::Classification(_) => "classification",
                TaskData::Similarity(_) => "similarity",
                TaskData::Analogy(_) => "analogy",
            }
        ))),
    }
}

/// Scores a fitted model on test material with the task's metric.
///
/// Analogy queries that fail with a degenerate direction count as wrong
/// answers rather than aborting the point.
pub fn score_model(fitted: &FittedModel, test: &TaskData, ctx: &FitContext<'_>) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Input("cannot score an empty test set".into()));
    }
    match (fitted, test) {
        (FittedModel::ConstantCosine, TaskData::Similarity(examples)) => {
            let preds: Vec<f64> = examples.iter().map(|e| e.cosine).collect();
            let truths: Vec<f64> = examples.iter().map(|e| e.target).collect();
            similarity_score(ctx.similarity_metric, &preds, &truths)
        }
        (FittedModel::KernelRidgeReg(model), TaskData::Similarity(examples)) => {
            let preds: Vec<f64> = examples.iter().map(|e| model.predict(&e.features)).collect();
            let truths: Vec<f64> = examples.iter().map(|e| e.target).collect();
            similarity_score(ctx.similarity_metric, &preds, &truths)
        }
        (FittedModel::ConstantAnalogy(method), TaskData::Analogy(examples)) => {
            let mut hits = 0usize;
            for e in examples {
                let inputs = (e.quad.w1.as_str(), e.quad.w2.as_str(), e.quad.w3.as_str());
                match method.predict(ctx.table, inputs, ctx.exclude_analogy_inputs) {
                    Ok(token) => {
                        if token == e.quad.w4 {
                            hits += 1;
                        }
                    }
                    Err(Error::DegenerateQuery) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(hits as f64 / examples.len() as f64)
        }
        (FittedModel::AnalogyNet(net), TaskData::Analogy(examples)) => {
            let mut hits = 0usize;
            for e in examples {
                let inputs = (e.quad.w1.as_str(), e.quad.w2.as_str(), e.quad.w3.as_str());
                match net.predict(ctx.table, inputs, ctx.exclude_analogy_inputs) {
                    Ok(token) => {
                        if token == e.quad.w4 {
                            hits += 1;
                        }
                    }
                    Err(Error::DegenerateQuery) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(hits as f64 / examples.len() as f64)
        }
        (fitted, TaskData::Classification(examples)) => {
            let preds: Vec<u8> = examples
                .iter()
                .map(|(x, _)| classify(fitted, x))
                .collect::<Result<_>>()?;
            let truths: Vec<u8> = examples.iter().map(|(_, y)| *y).collect();
            stats::accuracy(&preds, &truths)
        }
        _ => Err(Error::Config("fitted model does not match test data".into())),
    }
}

fn classify(fitted: &FittedModel, x: &[f64]) -> Result<u8> {
    match fitted {
        FittedModel::Knn(m) => Ok(m.classify(x)),
        FittedModel::Logistic(m) => Ok(m.classify(x)),
        FittedModel::KernelRidgeCls(m) => Ok(m.classify(x)),
        _ => Err(Error::Config("model is not a classifier".into())),
    }
}

/// The category's constant baseline used by the fallback rule.
fn fallback_model(data: &TaskData) -> Result<FittedModel> {
    match data {
        TaskData::Similarity(_) => Ok(FittedModel::ConstantCosine),
        TaskData::Analogy(_) => Ok(FittedModel::ConstantAnalogy(
            ConstantAnalogyMethod::three_cos_add(),
        )),
        TaskData::Classification(_) => Err(Error::Config(
            "no constant fallback exists for classification tasks".into(),
        )),
    }
}

/// Outcome of hyperparameter selection.
#[derive(Debug, Clone)]
pub struct SelectedModel {
    pub hypers: HyperPoint,
    pub fitted: FittedModel,
    pub fell_back: bool,
}

/// Grid search by k-fold cross-validation with the task's metric.
///
/// Every grid point sees the same folds; ties keep the earliest point in
/// grid order. When the grid carries `fallback: true` and the constant
/// model's CV score is at least the best learnable score, the constant
/// model is chosen. The winner is refitted on the full training set.
pub fn cross_validate(
    spec: &ModelSpec,
    train: &TaskData,
    folds: usize,
    seed: u64,
    ctx: &FitContext<'_>,
) -> Result<SelectedModel> {
    if spec.model_id.is_constant() {
        let point = spec.grid_points().into_iter().next().unwrap_or_default();
        let fitted = fit_model(spec.model_id, &point, train, seed)?;
        return Ok(SelectedModel {
            hypers: point,
            fitted,
            fell_back: false,
        });
    }
    if folds < 2 {
        return Err(Error::Config(format!(
            "cross-validation needs >= 2 folds, got {folds}"
        )));
    }
    if train.len() < folds {
        return Err(Error::Config(format!(
            "training set of {} items cannot populate {folds} folds",
            train.len()
        )));
    }

    // round-robin fold assignment over a seed-shuffled order
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &["cv_folds".into()]));
    order.shuffle(&mut rng);
    let fold_sets: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let mut fit_idx = Vec::new();
            let mut val_idx = Vec::new();
            for (pos, &i) in order.iter().enumerate() {
                if pos % folds == f {
                    val_idx.push(i);
                } else {
                    fit_idx.push(i);
                }
            }
            (fit_idx, val_idx)
        })
        .collect();

    let cv_score =
        |fit_one: &dyn Fn(&TaskData, u64) -> Result<FittedModel>, label: usize| -> Option<f64> {
            let mut scores = Vec::with_capacity(folds);
            for (f, (fit_idx, val_idx)) in fold_sets.iter().enumerate() {
                let fit_data = train.subset(fit_idx);
                let val_data = train.subset(val_idx);
                let fit_seed = derive(seed, &["cv_fit".into(), label.into(), f.into()]);
                let fitted = match fit_one(&fit_data, fit_seed) {
                    Ok(m) => m,
                    Err(_) => return None, // this grid point is unusable
                };
                match score_model(&fitted, &val_data, ctx) {
                    Ok(s) => scores.push(s),
                    Err(Error::UndefinedCorrelation(_)) => {} // uninformative fold
                    Err(_) => return None,
                }
            }
            if scores.is_empty() {
                None
            } else {
                Some(stats::mean(&scores))
            }
        };

    let points = spec.grid_points();
    let mut best: Option<(f64, usize)> = None;
    for (p, point) in points.iter().enumerate() {
        let fit_one = |data: &TaskData, s: u64| fit_model(spec.model_id, point, data, s);
        if let Some(score) = cv_score(&fit_one, p) {
            let better = match best {
                None => true,
                Some((bs, _)) => score > bs,
            };
            if better {
                best = Some((score, p));
            }
        }
    }

    let fallback_score = if spec.wants_fallback() {
        let fit_one = |data: &TaskData, _s: u64| fallback_model(data);
        cv_score(&fit_one, usize::MAX)
    } else {
        None
    };

    match (best, fallback_score) {
        (Some((best_score, p)), Some(fb)) if fb >= best_score => Ok(SelectedModel {
            hypers: points[p].clone(),
            fitted: fallback_model(train)?,
            fell_back: true,
        }),
        (Some((_, p)), _) => {
            let point = &points[p];
            let final_seed = derive(seed, &["final_fit".into()]);
            Ok(SelectedModel {
                hypers: point.clone(),
                fitted: fit_model(spec.model_id, point, train, final_seed)?,
                fell_back: false,
            })
        }
        (None, Some(_)) => Ok(SelectedModel {
            hypers: Vec::new(),
            fitted: fallback_model(train)?,
            fell_back: true,
        }),
        (None, None) => Err(Error::Numerical(format!(
            "no usable grid point for model {}",
            spec.model_id.as_str()
        ))),
    }
}
