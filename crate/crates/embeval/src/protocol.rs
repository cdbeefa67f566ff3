//! The evaluation engine: drives (embedding x task x model x fraction x
//! repeat) runs, assembles learning curves, computes per-repeat AUCs,
//! assigns significance-based ranks and derives linear-vs-nonlinear gaps.
//!
//! Split plans are shared across embeddings and models so every comparison
//! is paired, and all randomness flows from streams derived as pure
//! functions of `(seed, embedding, task, model, fraction, repeat)`; parallel
//! scheduling cannot change any output.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datasets::{
    make_splits, quads_from_pairs, train_subset, SplitPlan, TaskCategory, TaskDataset, TaskItems,
};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::models::{
    self, analogy_net::QuadVectors, cross_validate, features, score_model, AnalogyExample,
    FitContext, Linearity, ModelId, ModelSpec, SimilarityExample, SimilarityMetric, TaskData,
};
use crate::seed::derive;
use crate::stats::{self, ScoreSample};

/// Default training fractions; endpoints match the reported 30%/100% columns.
pub const DEFAULT_FRACTIONS: [f64; 5] = [0.3, 0.475, 0.65, 0.825, 1.0];
pub const DEFAULT_N_REPEATS: usize = 6;
pub const DEFAULT_TEST_FRACTION: f64 = 0.3;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_CV_FOLDS: usize = 3;

/// Everything one evaluation run needs.
#[derive(Debug, Clone)]
pub struct EvaluationGrid {
    pub embeddings: Vec<(String, EmbeddingTable)>,
    pub tasks: Vec<TaskDataset>,
    /// Model roster per category; defaults fill categories left out.
    pub rosters: BTreeMap<TaskCategory, Vec<ModelSpec>>,
    pub fractions: Vec<f64>,
    pub n_repeats: usize,
    pub test_fraction: f64,
    pub alpha: f64,
    pub seed: u64,
    pub exclude_analogy_inputs: bool,
    pub similarity_metric: SimilarityMetric,
    pub cv_folds: usize,
    pub jobs: usize,
}

impl EvaluationGrid {
    /// Grid with documented defaults around the given embeddings and tasks.
    pub fn new(embeddings: Vec<(String, EmbeddingTable)>, tasks: Vec<TaskDataset>) -> Self {
        let mut rosters = BTreeMap::new();
        for category in [
            TaskCategory::Similarity,
            TaskCategory::Analogy,
            TaskCategory::SingleWord,
            TaskCategory::Sentence,
        ] {
            rosters.insert(category, models::default_roster(category));
        }
        Self {
            embeddings,
            tasks,
            rosters,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            n_repeats: DEFAULT_N_REPEATS,
            test_fraction: DEFAULT_TEST_FRACTION,
            alpha: DEFAULT_ALPHA,
            seed: DEFAULT_SEED,
            exclude_analogy_inputs: true,
            similarity_metric: SimilarityMetric::Spearman,
            cv_folds: DEFAULT_CV_FOLDS,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embeddings.is_empty() {
            return Err(Error::Config("grid needs at least one embedding".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("grid needs at least one task".into()));
        }
        for (name, table) in &self.embeddings {
            if !table.is_normalized() {
                return Err(Error::Config(format!(
                    "embedding {name:?} is not normalized; normalize before evaluation"
                )));
            }
        }
        let mut names: Vec<&str> = self.embeddings.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("embedding names must be unique".into()));
        }
        let mut task_names: Vec<&str> = self.tasks.iter().map(|t| t.name.as_str()).collect();
        task_names.sort_unstable();
        if task_names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("task names must be unique".into()));
        }
        if self.fractions.len() < 2 {
            return Err(Error::Config("fractions must hold at least 2 points".into()));
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("fractions must be strictly increasing".into()));
        }
        if self.fractions[0] <= 0.0 || *self.fractions.last().unwrap() != 1.0 {
            return Err(Error::Config(
                "fractions must lie in (0, 1] and end at 1.0".into(),
            ));
        }
        if self.n_repeats == 0 {
            return Err(Error::Config("n_repeats must be positive".into()));
        }
        if !(0.0 < self.test_fraction && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must be in (0, 1)".into()));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::Config("alpha must be in (0, 1)".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be positive".into()));
        }
        for task in &self.tasks {
            let category = task.category();
            let roster = self
                .rosters
                .get(&category)
                .filter(|r| !r.is_empty())
                .ok_or_else(|| {
                    Error::Config(format!(
                        "task {:?} has category {category} but no model roster",
                        task.name
                    ))
                })?;
            for spec in roster {
                if !spec.model_id.valid_for(category) {
                    return Err(Error::Config(format!(
                        "model {} is not valid for {category} tasks",
                        spec.model_id.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    fn roster_for(&self, category: TaskCategory) -> &[ModelSpec] {
        self.rosters.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Scores for one (embedding, task, model), indexed `[fraction][repeat]`.
/// `None` marks a skipped point (recorded in the warnings, never fabricated).
#[derive(Debug, Clone)]
pub struct LearningCurve {
    pub embedding: String,
    pub task: String,
    pub model: ModelId,
    pub scores: Vec<Vec<Option<f64>>>,
}

/// A point the engine could not score, with its grid coordinates.
#[derive(Debug, Clone)]
pub struct SkippedPoint {
    pub embedding: String,
    pub task: String,
    pub model: ModelId,
    pub fraction: f64,
    pub repeat: usize,
    pub reason: String,
}

/// Non-fatal observations from a run.
#[derive(Debug, Clone, Default)]
pub struct RunWarnings {
    pub skipped: Vec<SkippedPoint>,
    /// (embedding, task) -> items dropped for OOV words.
    pub oov_dropped: BTreeMap<(String, String), usize>,
    /// (embedding, task) -> sentences whose tokens were all OOV.
    pub all_oov_sentences: BTreeMap<(String, String), usize>,
    /// tasks excluded from rank aggregation, with reasons.
    pub excluded_tasks: Vec<(String, String)>,
    /// (embedding, task) -> repeats omitted from AUC for sparse curves.
    pub auc_omitted_repeats: BTreeMap<(String, String), usize>,
}

/// Per-item prepared material for one (embedding, task): `None` marks an
/// item dropped for OOV words.
enum PreparedItems {
    Classification(Vec<Option<(Vec<f64>, u8)>>),
    Similarity(Vec<Option<SimilarityExample>>),
    Analogy(Vec<Option<AnalogyExample>>),
}

impl PreparedItems {
    fn select(&self, idx: &[usize]) -> (TaskData, usize) {
        let mut dropped = 0usize;
        match self {
            PreparedItems::Classification(items) => {
                let mut out = Vec::with_capacity(idx.len());
                for &i in idx {
                    match &items[i] {
                        Some(item) => out.push(item.clone()),
                        None => dropped += 1,
                    }
                }
                (TaskData::Classification(out), dropped)
            }
            PreparedItems::Similarity(items) => {
                let mut out = Vec::with_capacity(idx.len());
                for &i in idx {
                    match &items[i] {
                        Some(item) => out.push(item.clone()),
                        None => dropped += 1,
                    }
                }
                (TaskData::Similarity(out), dropped)
            }
            PreparedItems::Analogy(items) => {
                let mut out = Vec::with_capacity(idx.len());
                for &i in idx {
                    match &items[i] {
                        Some(item) => out.push(item.clone()),
                        None => dropped += 1,
                    }
                }
                (TaskData::Analogy(out), dropped)
            }
        }
    }

    fn oov_count(&self) -> usize {
        match self {
            PreparedItems::Classification(v) => v.iter().filter(|i| i.is_none()).count(),
            PreparedItems::Similarity(v) => v.iter().filter(|i| i.is_none()).count(),
            PreparedItems::Analogy(v) => v.iter().filter(|i| i.is_none()).count(),
        }
    }
}

fn prepare_items(
    table: &EmbeddingTable,
    items: &TaskItems,
) -> Result<(PreparedItems, usize /* all-OOV sentences */)> {
    let mut all_oov = 0usize;
    let prepared = match items {
        TaskItems::SingleWord(words) => PreparedItems::Classification(
            words
                .iter()
                .map(|w| table.lookup(&w.word).map(|v| (v.to_vec(), w.label)))
                .collect(),
        ),
        TaskItems::Sentence(sentences) => PreparedItems::Classification(
            sentences
                .iter()
                .map(|s| {
                    let (v, oov) = features::sentence_features(
                        &s.tokens,
                        |w| table.lookup(w).map(<[f64]>::to_vec),
                        table.dim(),
                    );
                    if oov == s.tokens.len() {
                        all_oov += 1;
                    }
                    Some((v, s.label))
                })
                .collect(),
        ),
        TaskItems::Similarity(pairs) => PreparedItems::Similarity(
            pairs
                .iter()
                .map(|p| {
                    let va = table.lookup(&p.word_a)?;
                    let vb = table.lookup(&p.word_b)?;
                    Some(SimilarityExample {
                        features: features::pair_features(va, vb),
                        target: p.human_score,
                        cosine: crate::embedding::dot(va, vb),
                    })
                })
                .collect(),
        ),
        TaskItems::Analogy(quads) => PreparedItems::Analogy(
            quads
                .iter()
                .map(|q| {
                    let v1 = table.lookup(&q.w1)?;
                    let v2 = table.lookup(&q.w2)?;
                    let v3 = table.lookup(&q.w3)?;
                    let v4 = table.lookup(&q.w4)?;
                    Some(AnalogyExample {
                        quad: q.clone(),
                        vectors: QuadVectors {
                            v1: v1.to_vec(),
                            v2: v2.to_vec(),
                            v3: v3.to_vec(),
                            v4: v4.to_vec(),
                        },
                    })
                })
                .collect(),
        ),
        TaskItems::AnalogyPairs(_) => {
            return Err(Error::Input(
                "pair-mode items must be expanded to quads before preparation".into(),
            ))
        }
    };
    Ok((prepared, all_oov))
}

/// Splits for one task: shared plans over the dataset items, or per-repeat
/// quad sets generated from word pairs.
enum TaskSplits {
    Shared(Vec<SplitPlan>),
    PairMode(Vec<(TaskItems, SplitPlan)>),
}

fn materialize_splits(task: &TaskDataset, grid: &EvaluationGrid) -> Result<TaskSplits> {
    let task_seed = derive(grid.seed, &["task_splits".into(), task.name.as_str().into()]);
    match &task.items {
        TaskItems::AnalogyPairs(pairs) => {
            let mut repeats = Vec::with_capacity(grid.n_repeats);
            for repeat in 0..grid.n_repeats {
                let quad_seed = derive(task_seed, &["pair_quads".into(), repeat.into()]);
                let (train_quads, test_quads) =
                    quads_from_pairs(pairs, quad_seed, grid.test_fraction)?;
                let n_train = train_quads.len();
                let n_total = n_train + test_quads.len();
                let mut pool: Vec<usize> = (0..n_train).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(derive(
                    task_seed,
                    &["pair_pool".into(), repeat.into()],
                ));
                pool.shuffle(&mut rng);
                let mut quads = train_quads;
                quads.extend(test_quads);
                repeats.push((
                    TaskItems::Analogy(quads),
                    SplitPlan {
                        test_indices: (n_train..n_total).collect(),
                        train_pool: pool,
                        repeat_id: repeat,
                        seed: quad_seed,
                    },
                ));
            }
            Ok(TaskSplits::PairMode(repeats))
        }
        _ => Ok(TaskSplits::Shared(make_splits(
            task.len(),
            grid.test_fraction,
            grid.n_repeats,
            task_seed,
        )?)),
    }
}

/// Prepared state for one (embedding, task): items aligned with each
/// repeat's plan. Shared-split tasks reuse one preparation for all repeats.
struct PreparedTask {
    shared: Option<PreparedItems>,
    per_repeat: Vec<Option<PreparedItems>>,
    plans: Vec<SplitPlan>,
    oov_dropped: usize,
    all_oov_sentences: usize,
}

impl PreparedTask {
    fn items_for(&self, repeat: usize) -> &PreparedItems {
        self.per_repeat[repeat]
            .as_ref()
            .or(self.shared.as_ref())
            .expect("prepared items exist for every repeat")
    }
}

fn prepare_task(
    table: &EmbeddingTable,
    task: &TaskDataset,
    splits: &TaskSplits,
) -> Result<PreparedTask> {
    match splits {
        TaskSplits::Shared(plans) => {
            let (prepared, all_oov) = prepare_items(table, &task.items)?;
            let oov = prepared.oov_count();
            Ok(PreparedTask {
                per_repeat: (0..plans.len()).map(|_| None).collect(),
                plans: plans.clone(),
                shared: Some(prepared),
                oov_dropped: oov,
                all_oov_sentences: all_oov,
            })
        }
        TaskSplits::PairMode(repeats) => {
            let mut per_repeat = Vec::with_capacity(repeats.len());
            let mut plans = Vec::with_capacity(repeats.len());
            let mut oov_total = 0usize;
            for (items, plan) in repeats {
                let (prepared, _) = prepare_items(table, items)?;
                oov_total += prepared.oov_count();
                per_repeat.push(Some(prepared));
                plans.push(plan.clone());
            }
            Ok(PreparedTask {
                shared: None,
                per_repeat,
                plans,
                oov_dropped: oov_total,
                all_oov_sentences: 0,
            })
        }
    }
}

/// Outcome of one grid point.
enum PointOutcome {
    Score(f64),
    Skip(String),
}

/// Scores one (embedding, task, model, fraction, repeat) point: takes the
/// nested training prefix, drops OOV items, cross-validates hyperparameters
/// (with fallback when requested), fits on the full subset and scores the
/// held-out test set with the task's metric.
fn evaluate_point(
    spec: &ModelSpec,
    prepared: &PreparedItems,
    plan: &SplitPlan,
    fraction: f64,
    point_seed: u64,
    ctx: &FitContext<'_>,
    cv_folds: usize,
) -> PointOutcome {
    let train_idx = match train_subset(plan, fraction) {
        Ok(idx) => idx,
        Err(e) => return PointOutcome::Skip(e.to_string()),
    };
    let (train_data, _) = prepared.select(train_idx);
    if train_data.is_empty() {
        return PointOutcome::Skip("training subset is empty after OOV drops".into());
    }
    let (test_data, _) = prepared.select(&plan.test_indices);
    if test_data.is_empty() {
        return PointOutcome::Skip("test set is empty after OOV drops".into());
    }
    let selected = match cross_validate(spec, &train_data, cv_folds, point_seed, ctx) {
        Ok(s) => s,
        Err(e) => return PointOutcome::Skip(e.to_string()),
    };
    match score_model(&selected.fitted, &test_data, ctx) {
        Ok(score) => PointOutcome::Score(score),
        Err(e) => PointOutcome::Skip(e.to_string()),
    }
}

/// All learning curves for the grid, plus run warnings.
pub fn build_curves(grid: &EvaluationGrid) -> Result<(Vec<LearningCurve>, RunWarnings)> {
    grid.validate()?;
    let mut warnings = RunWarnings::default();

    // splits are built once per task and shared by every embedding and model
    let mut splits = Vec::with_capacity(grid.tasks.len());
    for task in &grid.tasks {
        splits.push(materialize_splits(task, grid)?);
    }

    // prepared items per (embedding, task)
    let mut prepared: Vec<Vec<PreparedTask>> = Vec::with_capacity(grid.embeddings.len());
    for (emb_name, table) in &grid.embeddings {
        let mut row = Vec::with_capacity(grid.tasks.len());
        for (task, task_splits) in grid.tasks.iter().zip(&splits) {
            let p = prepare_task(table, task, task_splits)?;
            if p.oov_dropped > 0 {
                warnings
                    .oov_dropped
                    .insert((emb_name.clone(), task.name.clone()), p.oov_dropped);
            }
            if p.all_oov_sentences > 0 {
                warnings
                    .all_oov_sentences
                    .insert((emb_name.clone(), task.name.clone()), p.all_oov_sentences);
            }
            row.push(p);
        }
        prepared.push(row);
    }

    // enumerate every point; constant models score once per repeat
    struct Job {
        emb: usize,
        task: usize,
        spec_idx: usize,
        fraction_idx: Option<usize>, // None: constant model, all fractions
        repeat: usize,
    }
    let mut jobs = Vec::new();
    for e in 0..grid.embeddings.len() {
        for (t, task) in grid.tasks.iter().enumerate() {
            let roster = grid.roster_for(task.category());
            for (s, spec) in roster.iter().enumerate() {
                for repeat in 0..grid.n_repeats {
                    if spec.model_id.is_constant() {
                        jobs.push(Job {
                            emb: e,
                            task: t,
                            spec_idx: s,
                            fraction_idx: None,
                            repeat,
                        });
                    } else {
                        for f in 0..grid.fractions.len() {
                            jobs.push(Job {
                                emb: e,
                                task: t,
                                spec_idx: s,
                                fraction_idx: Some(f),
                                repeat,
                            });
                        }
                    }
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;

    let outcomes: Vec<PointOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (emb_name, table) = &grid.embeddings[job.emb];
                let task = &grid.tasks[job.task];
                let spec = &grid.roster_for(task.category())[job.spec_idx];
                let ctx = FitContext {
                    table,
                    exclude_analogy_inputs: grid.exclude_analogy_inputs,
                    similarity_metric: grid.similarity_metric,
                };
                let prep = &prepared[job.emb][job.task];
                let items = prep.items_for(job.repeat);
                let plan = &prep.plans[job.repeat];
                let fraction_idx = job.fraction_idx.unwrap_or(0);
                let fraction = grid.fractions[fraction_idx];
                let point_seed = derive(
                    grid.seed,
                    &[
                        "point".into(),
                        emb_name.as_str().into(),
                        task.name.as_str().into(),
                        spec.model_id.as_str().into(),
                        fraction_idx.into(),
                        job.repeat.into(),
                    ],
                );
                evaluate_point(spec, items, plan, fraction, point_seed, &ctx, grid.cv_folds)
            })
            .collect()
    });

    // assemble curves by coordinates; scheduling order cannot matter
    let mut curve_index: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    let mut curves: Vec<LearningCurve> = Vec::new();
    for (e, (emb_name, _)) in grid.embeddings.iter().enumerate() {
        for (t, task) in grid.tasks.iter().enumerate() {
            for (s, spec) in grid.roster_for(task.category()).iter().enumerate() {
                curve_index.insert((e, t, s), curves.len());
                curves.push(LearningCurve {
                    embedding: emb_name.clone(),
                    task: task.name.clone(),
                    model: spec.model_id,
                    scores: vec![vec![None; grid.n_repeats]; grid.fractions.len()],
                });
            }
        }
    }

    for (job, outcome) in jobs.iter().zip(outcomes) {
        let curve = &mut curves[curve_index[&(job.emb, job.task, job.spec_idx)]];
        match (job.fraction_idx, outcome) {
            (Some(f), PointOutcome::Score(score)) => {
                curve.scores[f][job.repeat] = Some(score);
            }
            (Some(f), PointOutcome::Skip(reason)) => {
                warnings.skipped.push(SkippedPoint {
                    embedding: curve.embedding.clone(),
                    task: curve.task.clone(),
                    model: curve.model,
                    fraction: grid.fractions[f],
                    repeat: job.repeat,
                    reason,
                });
            }
            (None, PointOutcome::Score(score)) => {
                // constant model: no training, identical at every fraction
                for f in 0..grid.fractions.len() {
                    curve.scores[f][job.repeat] = Some(score);
                }
            }
            (None, PointOutcome::Skip(reason)) => {
                for f in 0..grid.fractions.len() {
                    warnings.skipped.push(SkippedPoint {
                        embedding: curve.embedding.clone(),
                        task: curve.task.clone(),
                        model: curve.model,
                        fraction: grid.fractions[f],
                        repeat: job.repeat,
                        reason: reason.clone(),
                    });
                }
            }
        }
    }
    Ok((curves, warnings))
}

/// Per-cell best score over the models passing the linearity filter.
pub fn best_model_curve(
    curves: &[&LearningCurve],
    filter: Option<Linearity>,
) -> Result<Vec<Vec<Option<f64>>>> {
    let selected: Vec<&&LearningCurve> = curves
        .iter()
        .filter(|c| filter.map_or(true, |lin| c.model.linearity() == lin))
        .collect();
    if selected.is_empty() {
        return Err(Error::Config(format!(
            "no model matches the linearity filter {:?}",
            filter.map(|l| l.as_str())
        )));
    }
    let n_fractions = selected[0].scores.len();
    let n_repeats = selected[0].scores[0].len();
    let mut best = vec![vec![None; n_repeats]; n_fractions];
    for curve in selected {
        for (f, row) in curve.scores.iter().enumerate() {
            for (r, cell) in row.iter().enumerate() {
                if let Some(score) = cell {
                    let slot: &mut Option<f64> = &mut best[f][r];
                    *slot = Some(match slot {
                        Some(prev) => prev.max(*score),
                        None => *score,
                    });
                }
            }
        }
    }
    Ok(best)
}

/// Greedy significance-based ranks: embeddings sorted by descending mean
/// (ties by name); each embedding is ANOVA-compared against the first
/// member of the current rank group and starts a new rank when `p < alpha`.
pub fn assign_ranks(
    samples: &[(String, ScoreSample)],
    alpha: f64,
) -> Result<Vec<(String, usize)>> {
    if samples.is_empty() {
        return Err(Error::Input("assign_ranks needs at least one embedding".into()));
    }
    for (name, sample) in samples {
        if sample.values.len() < 2 {
            return Err(Error::Input(format!(
                "embedding {name:?} has fewer than 2 scores"
            )));
        }
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        samples[b]
            .1
            .mean()
            .partial_cmp(&samples[a].1.mean())
            .expect("finite scores")
            .then_with(|| samples[a].0.cmp(&samples[b].0))
    });
    let mut ranks = Vec::with_capacity(samples.len());
    let mut current_rank = 0usize;
    let mut leader = order[0];
    ranks.push((samples[leader].0.clone(), 0));
    for &i in &order[1..] {
        let (_, p) = stats::anova_f(&samples[leader].1, &samples[i].1)?;
        if p < alpha {
            current_rank += 1;
            leader = i;
        }
        ranks.push((samples[i].0.clone(), current_rank));
    }
    Ok(ranks)
}

/// Per-repeat trapezoidal AUCs of a curve matrix. Repeats with fewer than
/// two scored fractions are omitted and counted; all-omitted is an error.
pub fn auc_samples(
    matrix: &[Vec<Option<f64>>],
    fractions: &[f64],
) -> Result<(ScoreSample, usize)> {
    if matrix.len() != fractions.len() {
        return Err(Error::Input("curve matrix does not match the fraction grid".into()));
    }
    let n_repeats = matrix.first().map(|r| r.len()).unwrap_or(0);
    let mut aucs = Vec::with_capacity(n_repeats);
    let mut omitted = 0usize;
    for r in 0..n_repeats {
        let mut fs = Vec::with_capacity(fractions.len());
        let mut ss = Vec::with_capacity(fractions.len());
        for (f, row) in matrix.iter().enumerate() {
            if let Some(score) = row[r] {
                fs.push(fractions[f]);
                ss.push(score);
            }
        }
        if fs.len() < 2 {
            omitted += 1;
            continue;
        }
        aucs.push(stats::trapezoid_auc(&fs, &ss)?);
    }
    if aucs.is_empty() {
        return Err(Error::Input("every repeat lacks enough scored fractions for AUC".into()));
    }
    Ok((ScoreSample::new(aucs)?, omitted))
}

/// Normalized difference between the best nonlinear and best linear scores;
/// `None` when both means are nonpositive (undefined gap).
pub fn nonlinearity_gap(best_nonlinear: &ScoreSample, best_linear: &ScoreSample) -> Option<f64> {
    let mnl = best_nonlinear.mean();
    let ml = best_linear.mean();
    let denom = mnl.max(ml);
    if denom <= 0.0 {
        return None;
    }
    Some((mnl - ml) / denom)
}

/// Mean and population standard deviation of a set of values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: stats::mean(values),
            std: stats::population_std(values),
        }
    }
}

/// One rank-table row: ranks at the first fraction, the last fraction and
/// on per-repeat AUCs, each aggregated over tasks as mean +- std.
#[derive(Debug, Clone)]
pub struct RankTableRow {
    pub embedding: String,
    pub rank_start: MeanStd,
    pub rank_end: MeanStd,
    pub auc_rank: MeanStd,
}

/// Scores of one model on one task at the first and last fraction,
/// maximized over embeddings (mean over repeats first).
#[derive(Debug, Clone)]
pub struct TaskModelScore {
    pub task: String,
    pub model: ModelId,
    pub first_fraction: Option<f64>,
    pub last_fraction: Option<f64>,
}

/// Linear-vs-nonlinear gap for one embedding on one task; `None` when a
/// linearity class is missing from the roster or every sample was skipped.
#[derive(Debug, Clone)]
pub struct GapEntry {
    pub embedding: String,
    pub task: String,
    pub gap: Option<f64>,
}

/// Aggregated results of a full run.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub rank_table: Vec<RankTableRow>,
    pub task_scores: Vec<TaskModelScore>,
    pub gaps: Vec<GapEntry>,
}

fn sample_at(matrix: &[Vec<Option<f64>>], fraction_idx: usize) -> Option<ScoreSample> {
    let values: Vec<f64> = matrix[fraction_idx].iter().flatten().copied().collect();
    if values.len() < 2 {
        None
    } else {
        ScoreSample::new(values).ok()
    }
}

/// Derives the rank table, per-task scores and nonlinearity gaps from the
/// curves. Tasks where any embedding lacks usable samples are excluded from
/// rank aggregation and listed in the warnings.
pub fn analyze(
    grid: &EvaluationGrid,
    curves: &[LearningCurve],
    warnings: &mut RunWarnings,
) -> Result<EvaluationReport> {
    let last = grid.fractions.len() - 1;
    let by_pair = |emb: &str, task: &str| -> Vec<&LearningCurve> {
        curves
            .iter()
            .filter(|c| c.embedding == emb && c.task == task)
            .collect()
    };

    // per-task rank samples for every embedding
    struct TaskSamples {
        start: Vec<(String, ScoreSample)>,
        end: Vec<(String, ScoreSample)>,
        auc: Vec<(String, ScoreSample)>,
    }
    let mut eligible: Vec<TaskSamples> = Vec::new();
    for task in &grid.tasks {
        let mut samples = TaskSamples {
            start: Vec::new(),
            end: Vec::new(),
            auc: Vec::new(),
        };
        let mut failure: Option<String> = None;
        for (emb_name, _) in &grid.embeddings {
            let pair_curves = by_pair(emb_name, &task.name);
            let best = match best_model_curve(&pair_curves, None) {
                Ok(b) => b,
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            };
            let start = sample_at(&best, 0);
            let end = sample_at(&best, last);
            let auc = auc_samples(&best, &grid.fractions);
            match (start, end, auc) {
                (Some(s), Some(e), Ok((a, omitted))) => {
                    if omitted > 0 {
                        *warnings
                            .auc_omitted_repeats
                            .entry((emb_name.clone(), task.name.clone()))
                            .or_insert(0) += omitted;
                    }
                    if a.values.len() < 2 {
                        failure = Some(format!(
                            "embedding {emb_name:?} has fewer than 2 AUC samples"
                        ));
                        break;
                    }
                    samples.start.push((emb_name.clone(), s));
                    samples.end.push((emb_name.clone(), e));
                    samples.auc.push((emb_name.clone(), a));
                }
                (_, _, Err(e)) => {
                    failure = Some(format!("embedding {emb_name:?}: {e}"));
                    break;
                }
                _ => {
                    failure = Some(format!(
                        "embedding {emb_name:?} has fewer than 2 scores at a rank point"
                    ));
                    break;
                }
            }
        }
        match failure {
            Some(reason) => warnings.excluded_tasks.push((task.name.clone(), reason)),
            None => eligible.push(samples),
        }
    }

    // rank per task, then aggregate over tasks
    let mut start_ranks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut end_ranks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut auc_ranks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for samples in &eligible {
        for (store, sample_set) in [
            (&mut start_ranks, &samples.start),
            (&mut end_ranks, &samples.end),
            (&mut auc_ranks, &samples.auc),
        ] {
            let ranks = assign_ranks(sample_set, grid.alpha)?;
            for (emb, rank) in ranks {
                store.entry(emb).or_default().push(rank as f64);
            }
        }
    }

    let mut rank_table = Vec::new();
    if !eligible.is_empty() {
        for (emb_name, _) in &grid.embeddings {
            let collect = |store: &BTreeMap<String, Vec<f64>>| -> Result<MeanStd> {
                let ranks = store.get(emb_name).ok_or_else(|| Error::AggregationGap {
                    embedding: emb_name.clone(),
                    task: "<any>".into(),
                })?;
                Ok(MeanStd::of(ranks))
            };
            rank_table.push(RankTableRow {
                embedding: emb_name.clone(),
                rank_start: collect(&start_ranks)?,
                rank_end: collect(&end_ranks)?,
                auc_rank: collect(&auc_ranks)?,
            });
        }
    }

    // per-task scores at the first/last fraction, maximized over embeddings
    let mut task_scores = Vec::new();
    for task in &grid.tasks {
        for spec in grid.roster_for(task.category()) {
            let mut first_best: Option<f64> = None;
            let mut last_best: Option<f64> = None;
            for (emb_name, _) in &grid.embeddings {
                let curve = curves.iter().find(|c| {
                    c.embedding == *emb_name && c.task == task.name && c.model == spec.model_id
                });
                if let Some(curve) = curve {
                    for (slot, idx) in [(&mut first_best, 0), (&mut last_best, last)] {
                        let values: Vec<f64> =
                            curve.scores[idx].iter().flatten().copied().collect();
                        if !values.is_empty() {
                            let mean = stats::mean(&values);
                            *slot = Some(slot.map_or(mean, |b: f64| b.max(mean)));
                        }
                    }
                }
            }
            task_scores.push(TaskModelScore {
                task: task.name.clone(),
                model: spec.model_id,
                first_fraction: first_best,
                last_fraction: last_best,
            });
        }
    }

    // nonlinearity gaps at the last fraction
    let mut gaps = Vec::new();
    for (emb_name, _) in &grid.embeddings {
        for task in &grid.tasks {
            let pair_curves = by_pair(emb_name, &task.name);
            let gap = (|| {
                let nl = best_model_curve(&pair_curves, Some(Linearity::Nonlinear)).ok()?;
                let lin = best_model_curve(&pair_curves, Some(Linearity::Linear)).ok()?;
                let nl_sample = sample_at(&nl, last)?;
                let lin_sample = sample_at(&lin, last)?;
                nonlinearity_gap(&nl_sample, &lin_sample)
            })();
            gaps.push(GapEntry {
                embedding: emb_name.clone(),
                task: task.name.clone(),
                gap,
            });
        }
    }

    Ok(EvaluationReport {
        rank_table,
        task_scores,
        gaps,
    })
}
