//! Run orchestration and report emission.
//!
//! A run writes three artifacts under the output directory:
//! - `summary.json`: config echo, rank table, per-task scores at the first
//!   and last fraction, and nonlinearity gaps. Keys are sorted and floats
//!   carry 9 significant digits, so identical runs are byte-identical.
//! - `curves/<embedding>__<task>__<model>.tsv`: one scored point per row.
//! - `warnings.log`: skipped points, OOV counts and rank-table exclusions
//!   (created even when empty).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::datasets::{self, TaskDataset};
use crate::embedding::{intersect_vocabularies, load_embeddings};
use crate::error::{Error, Result};
use crate::models::{HyperValue, ModelSpec};
use crate::protocol::{
    analyze, build_curves, EvaluationGrid, EvaluationReport, LearningCurve, RunWarnings,
};

/// Formats a finite float with 9 significant digits, fixed-point.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.000000000".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (9 - 1 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

/// A JSON document with deterministic serialization: object keys sorted,
/// floats at 9 significant digits, non-finite floats as null.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(BTreeMap<String, Json>),
}

impl Json {
    pub fn obj(entries: impl IntoIterator<Item = (String, Json)>) -> Json {
        Json::Obj(entries.into_iter().collect())
    }

    fn escape(s: &str, out: &mut String) {
        out.push('"');
        for c in s.chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\r' => out.push_str("\\r"),
                '\t' => out.push_str("\\t"),
                c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
                c => out.push(c),
            }
        }
        out.push('"');
    }

    fn write_indented(&self, out: &mut String, indent: usize) {
        const STEP: usize = 2;
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(n) => out.push_str(&n.to_string()),
            Json::UInt(n) => out.push_str(&n.to_string()),
            Json::Float(x) => {
                if x.is_finite() {
                    out.push_str(&fmt_sig9(*x));
                } else {
                    out.push_str("null");
                }
            }
            Json::Str(s) => Self::escape(s, out),
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&" ".repeat(indent + STEP));
                    item.write_indented(out, indent + STEP);
                }
                out.push('\n');
                out.push_str(&" ".repeat(indent));
                out.push(']');
            }
            Json::Obj(map) => {
                if map.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (key, value)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&" ".repeat(indent + STEP));
                    Self::escape(key, out);
                    out.push_str(": ");
                    value.write_indented(out, indent + STEP);
                }
                out.push('\n');
                out.push_str(&" ".repeat(indent));
                out.push('}');
            }
        }
    }

    pub fn to_pretty_string(&self) -> String {
        let mut out = String::new();
        self.write_indented(&mut out, 0);
        out.push('\n');
        out
    }
}

fn hyper_to_json(v: &HyperValue) -> Json {
    match v {
        HyperValue::Float(x) => Json::Float(*x),
        HyperValue::Int(n) => Json::Int(*n),
        HyperValue::Bool(b) => Json::Bool(*b),
        HyperValue::Str(s) => Json::Str(s.clone()),
    }
}

fn roster_to_json(roster: &[ModelSpec]) -> Json {
    Json::Arr(
        roster
            .iter()
            .map(|spec| {
                let grid: BTreeMap<String, Json> = spec
                    .hyper_grid
                    .iter()
                    .map(|(name, values)| {
                        (
                            name.clone(),
                            Json::Arr(values.iter().map(hyper_to_json).collect()),
                        )
                    })
                    .collect();
                Json::obj([
                    ("model".to_string(), Json::Str(spec.model_id.as_str().into())),
                    ("hyper_grid".to_string(), Json::Obj(grid)),
                ])
            })
            .collect(),
    )
}

/// The effective configuration, echoed in the same schema `parse_config`
/// reads, so the echo itself is a valid config file.
pub fn config_echo(config: &RunConfig) -> Json {
    let embeddings = Json::Arr(
        config
            .embeddings
            .iter()
            .map(|e| {
                Json::obj([
                    ("format".to_string(), Json::Str("text".into())),
                    ("name".to_string(), Json::Str(e.name.clone())),
                    ("path".to_string(), Json::Str(e.path.display().to_string())),
                ])
            })
            .collect(),
    );
    let tasks = Json::Arr(
        config
            .tasks
            .iter()
            .map(|t| {
                Json::obj([
                    ("category".to_string(), Json::Str(t.category.as_str().into())),
                    ("name".to_string(), Json::Str(t.name.clone())),
                    ("pair_mode".to_string(), Json::Bool(t.pair_mode)),
                    ("path".to_string(), Json::Str(t.path.display().to_string())),
                ])
            })
            .collect(),
    );
    let models: BTreeMap<String, Json> = config
        .rosters
        .iter()
        .map(|(category, roster)| (category.as_str().to_string(), roster_to_json(roster)))
        .collect();
    Json::obj([
        ("alpha".to_string(), Json::Float(config.alpha)),
        ("cv_folds".to_string(), Json::UInt(config.cv_folds as u64)),
        ("embeddings".to_string(), embeddings),
        (
            "exclude_analogy_inputs".to_string(),
            Json::Bool(config.exclude_analogy_inputs),
        ),
        (
            "fractions".to_string(),
            Json::Arr(config.fractions.iter().map(|f| Json::Float(*f)).collect()),
        ),
        ("jobs".to_string(), Json::UInt(config.jobs as u64)),
        ("models".to_string(), Json::Obj(models)),
        ("n_repeats".to_string(), Json::UInt(config.n_repeats as u64)),
        (
            "output_dir".to_string(),
            Json::Str(config.output_dir.display().to_string()),
        ),
        ("seed".to_string(), Json::UInt(config.seed)),
        (
            "similarity_metric".to_string(),
            Json::Str(config.similarity_metric.as_str().into()),
        ),
        ("tasks".to_string(), tasks),
        (
            "test_fraction".to_string(),
            Json::Float(config.test_fraction),
        ),
    ])
}

fn summary_json(config: &RunConfig, report: &EvaluationReport, warnings: &RunWarnings) -> Json {
    let rank_table: BTreeMap<String, Json> = report
        .rank_table
        .iter()
        .map(|row| {
            let entry = |ms: crate::protocol::MeanStd| {
                Json::obj([
                    ("mean".to_string(), Json::Float(ms.mean)),
                    ("std".to_string(), Json::Float(ms.std)),
                ])
            };
            (
                row.embedding.clone(),
                Json::obj([
                    ("auc_rank".to_string(), entry(row.auc_rank)),
                    ("rank_end".to_string(), entry(row.rank_end)),
                    ("rank_start".to_string(), entry(row.rank_start)),
                ]),
            )
        })
        .collect();

    let mut task_scores: BTreeMap<String, Json> = BTreeMap::new();
    for score in &report.task_scores {
        let entry = Json::obj([
            (
                "first_fraction".to_string(),
                score.first_fraction.map_or(Json::Null, Json::Float),
            ),
            (
                "last_fraction".to_string(),
                score.last_fraction.map_or(Json::Null, Json::Float),
            ),
        ]);
        match task_scores
            .entry(score.task.clone())
            .or_insert_with(|| Json::Obj(BTreeMap::new()))
        {
            Json::Obj(models) => {
                models.insert(score.model.as_str().to_string(), entry);
            }
            _ => unreachable!(),
        }
    }

    let mut gaps: BTreeMap<String, Json> = BTreeMap::new();
    for gap in &report.gaps {
        match gaps
            .entry(gap.embedding.clone())
            .or_insert_with(|| Json::Obj(BTreeMap::new()))
        {
            Json::Obj(tasks) => {
                tasks.insert(gap.task.clone(), gap.gap.map_or(Json::Null, Json::Float));
            }
            _ => unreachable!(),
        }
    }

    Json::obj([
        ("config".to_string(), config_echo(config)),
        ("nonlinearity_gaps".to_string(), Json::Obj(gaps)),
        ("rank_table".to_string(), Json::Obj(rank_table)),
        (
            "skipped_points".to_string(),
            Json::UInt(warnings.skipped.len() as u64),
        ),
        ("task_scores".to_string(), Json::Obj(task_scores)),
        (
            "tasks_excluded_from_ranks".to_string(),
            Json::Arr(
                warnings
                    .excluded_tasks
                    .iter()
                    .map(|(task, _)| Json::Str(task.clone()))
                    .collect(),
            ),
        ),
    ])
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(content.as_bytes()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn warnings_log(warnings: &RunWarnings) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut skipped = warnings.skipped.clone();
    skipped.sort_by(|a, b| {
        (&a.embedding, &a.task, a.model.as_str(), a.repeat)
            .cmp(&(&b.embedding, &b.task, b.model.as_str(), b.repeat))
            .then(a.fraction.partial_cmp(&b.fraction).expect("finite fractions"))
    });
    for s in &skipped {
        lines.push(format!(
            "skipped_point\tembedding={}\ttask={}\tmodel={}\tfraction={}\trepeat={}\treason={}",
            s.embedding,
            s.task,
            s.model.as_str(),
            s.fraction,
            s.repeat,
            s.reason
        ));
    }
    for ((emb, task), count) in &warnings.oov_dropped {
        lines.push(format!(
            "oov_items_dropped\tembedding={emb}\ttask={task}\tcount={count}"
        ));
    }
    for ((emb, task), count) in &warnings.all_oov_sentences {
        lines.push(format!(
            "all_oov_sentences\tembedding={emb}\ttask={task}\tcount={count}"
        ));
    }
    for ((emb, task), count) in &warnings.auc_omitted_repeats {
        lines.push(format!(
            "auc_omitted_repeats\tembedding={emb}\ttask={task}\tcount={count}"
        ));
    }
    for (task, reason) in &warnings.excluded_tasks {
        lines.push(format!("task_excluded_from_ranks\ttask={task}\treason={reason}"));
    }
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Writes `summary.json`, per-curve TSVs and `warnings.log`.
///
/// Every (embedding, task, model, fraction, repeat) coordinate lands exactly
/// once: scored points in their curve TSV, skipped points in the log.
pub fn emit_reports(
    config: &RunConfig,
    report: &EvaluationReport,
    curves: &[LearningCurve],
    warnings: &RunWarnings,
    fractions: &[f64],
    output_dir: &Path,
) -> Result<PathBuf> {
    let curves_dir = output_dir.join("curves");
    fs::create_dir_all(&curves_dir).map_err(|source| Error::Io {
        path: curves_dir.display().to_string(),
        source,
    })?;

    let summary_path = output_dir.join("summary.json");
    write_file(
        &summary_path,
        &summary_json(config, report, warnings).to_pretty_string(),
    )?;

    for curve in curves {
        let name = format!(
            "{}__{}__{}.tsv",
            curve.embedding,
            curve.task,
            curve.model.as_str()
        );
        let mut body = String::from("fraction\trepeat\tscore\n");
        for (f, row) in curve.scores.iter().enumerate() {
            for (repeat, cell) in row.iter().enumerate() {
                if let Some(score) = cell {
                    body.push_str(&format!(
                        "{}\t{}\t{}\n",
                        fractions[f],
                        repeat,
                        fmt_sig9(*score)
                    ));
                }
            }
        }
        write_file(&curves_dir.join(name), &body)?;
    }

    write_file(&output_dir.join("warnings.log"), &warnings_log(warnings))?;
    Ok(summary_path)
}

/// Loads all inputs, runs the full evaluation and writes every report file.
/// Returns the aggregated report and the path of `summary.json`.
pub fn run_evaluation(config: &RunConfig) -> Result<(EvaluationReport, PathBuf)> {
    // load embeddings; vocabulary intersection is mandatory for 2+ tables
    // and a no-op for one
    let mut tables = Vec::with_capacity(config.embeddings.len());
    for entry in &config.embeddings {
        tables.push(load_embeddings(&entry.path)?);
    }
    let tables = intersect_vocabularies(tables)?;
    let mut embeddings = Vec::with_capacity(tables.len());
    for (entry, table) in config.embeddings.iter().zip(tables) {
        embeddings.push((entry.name.clone(), table.normalized()?));
    }

    let mut tasks: Vec<TaskDataset> = Vec::with_capacity(config.tasks.len());
    for entry in &config.tasks {
        let task = if entry.pair_mode {
            datasets::load_analogy_pairs(&entry.path, &entry.name)?
        } else {
            datasets::load_task(&entry.path, entry.category, &entry.name)?
        };
        tasks.push(task);
    }

    let mut grid = EvaluationGrid::new(embeddings, tasks);
    grid.rosters = config.rosters.clone();
    grid.fractions = config.fractions.clone();
    grid.n_repeats = config.n_repeats;
    grid.test_fraction = config.test_fraction;
    grid.alpha = config.alpha;
    grid.seed = config.seed;
    grid.exclude_analogy_inputs = config.exclude_analogy_inputs;
    grid.similarity_metric = config.similarity_metric;
    grid.cv_folds = config.cv_folds;
    grid.jobs = config.jobs;

    let (curves, mut warnings) = build_curves(&grid)?;
    let report = analyze(&grid, &curves, &mut warnings)?;
    let summary_path = emit_reports(
        config,
        &report,
        &curves,
        &warnings,
        &grid.fractions,
        &config.output_dir,
    )?;
    Ok((report, summary_path))
}
