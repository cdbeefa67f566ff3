//! Run configuration: strict JSON schema, documented defaults, and
//! resolution into an evaluation grid.
//!
//! Unknown keys are rejected rather than ignored; a typo in a research
//! config must fail loudly. Hyperparameter grids are JSON objects and are
//! processed in sorted key order, which also fixes grid-search tie-breaks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::datasets::TaskCategory;
use crate::error::{Error, Result};
use crate::models::{self, HyperGrid, HyperValue, ModelId, ModelSpec, SimilarityMetric};
use crate::protocol::{
    DEFAULT_ALPHA, DEFAULT_CV_FOLDS, DEFAULT_FRACTIONS, DEFAULT_N_REPEATS, DEFAULT_SEED,
    DEFAULT_TEST_FRACTION,
};

/// One embedding file to load.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingEntry {
    pub name: String,
    pub path: PathBuf,
}

/// One task file to load.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEntry {
    pub name: String,
    pub path: PathBuf,
    pub category: TaskCategory,
    /// WordRep-style pair files expanded to quads per repeat.
    pub pair_mode: bool,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub embeddings: Vec<EmbeddingEntry>,
    pub tasks: Vec<TaskEntry>,
    pub fractions: Vec<f64>,
    pub n_repeats: usize,
    pub test_fraction: f64,
    pub alpha: f64,
    pub seed: u64,
    pub exclude_analogy_inputs: bool,
    pub similarity_metric: SimilarityMetric,
    pub cv_folds: usize,
    pub rosters: BTreeMap<TaskCategory, Vec<ModelSpec>>,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEmbedding {
    name: String,
    path: String,
    #[serde(default = "default_format")]
    format: String,
}

fn default_format() -> String {
    "text".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTask {
    name: String,
    path: String,
    category: String,
    #[serde(default)]
    pair_mode: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    model: String,
    #[serde(default)]
    hyper_grid: BTreeMap<String, Vec<serde_json::Value>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    embeddings: Vec<FileEmbedding>,
    tasks: Vec<FileTask>,
    fractions: Option<Vec<f64>>,
    n_repeats: Option<usize>,
    test_fraction: Option<f64>,
    alpha: Option<f64>,
    seed: Option<u64>,
    exclude_analogy_inputs: Option<bool>,
    similarity_metric: Option<String>,
    cv_folds: Option<usize>,
    models: Option<BTreeMap<String, Vec<FileModel>>>,
    output_dir: Option<String>,
    jobs: Option<usize>,
}

fn parse_category(s: &str) -> Result<TaskCategory> {
    Ok(match s {
        "similarity" => TaskCategory::Similarity,
        "analogy" => TaskCategory::Analogy,
        "single_word" => TaskCategory::SingleWord,
        "sentence" => TaskCategory::Sentence,
        other => {
            return Err(Error::Schema(format!(
                "unknown task category {other:?} (expected similarity, analogy, single_word or sentence)"
            )))
        }
    })
}

fn parse_metric(s: &str) -> Result<SimilarityMetric> {
    Ok(match s {
        "spearman" => SimilarityMetric::Spearman,
        "accuracy_at_threshold" => SimilarityMetric::AccuracyAtThreshold,
        other => {
            return Err(Error::Schema(format!(
                "unknown similarity_metric {other:?} (expected spearman or accuracy_at_threshold)"
            )))
        }
    })
}

fn hyper_value(v: &serde_json::Value) -> Result<HyperValue> {
    match v {
        serde_json::Value::Bool(b) => Ok(HyperValue::Bool(*b)),
        serde_json::Value::String(s) => Ok(HyperValue::Str(s.clone())),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                // integers without a decimal point stay integers
                if !n.to_string().contains(['.', 'e', 'E']) {
                    return Ok(HyperValue::Int(i));
                }
            }
            n.as_f64()
                .map(HyperValue::Float)
                .ok_or_else(|| Error::Schema(format!("unrepresentable number {n}")))
        }
        other => Err(Error::Schema(format!(
            "hyperparameter values must be numbers, booleans or strings, found {other}"
        ))),
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Parses and validates a config file, filling in documented defaults and
/// checking that every referenced file exists.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: FileConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    resolve(file, path.parent().unwrap_or(Path::new(".")))
}

fn resolve(file: FileConfig, base: &Path) -> Result<RunConfig> {
    if file.embeddings.is_empty() {
        return Err(Error::Config("config needs at least one embedding".into()));
    }
    if file.tasks.is_empty() {
        return Err(Error::Config("config needs at least one task".into()));
    }

    let resolve_path = |p: &str| -> PathBuf {
        let pb = PathBuf::from(p);
        if pb.is_absolute() {
            pb
        } else {
            base.join(pb)
        }
    };

    let mut embeddings = Vec::with_capacity(file.embeddings.len());
    for e in &file.embeddings {
        if !valid_name(&e.name) {
            return Err(Error::Config(format!(
                "embedding name {:?} must be nonempty and use only [A-Za-z0-9._-]",
                e.name
            )));
        }
        if e.format != "text" {
            return Err(Error::Schema(format!(
                "unknown embedding format {:?} (only \"text\" is supported)",
                e.format
            )));
        }
        let path = resolve_path(&e.path);
        if !path.is_file() {
            return Err(Error::MissingPath(path));
        }
        embeddings.push(EmbeddingEntry {
            name: e.name.clone(),
            path,
        });
    }

    let mut tasks = Vec::with_capacity(file.tasks.len());
    for t in &file.tasks {
        if !valid_name(&t.name) {
            return Err(Error::Config(format!(
                "task name {:?} must be nonempty and use only [A-Za-z0-9._-]",
                t.name
            )));
        }
        let category = parse_category(&t.category)?;
        if t.pair_mode && category != TaskCategory::Analogy {
            return Err(Error::Config(format!(
                "task {:?}: pair_mode only applies to analogy tasks",
                t.name
            )));
        }
        let path = resolve_path(&t.path);
        if !path.is_file() {
            return Err(Error::MissingPath(path));
        }
        tasks.push(TaskEntry {
            name: t.name.clone(),
            path,
            category,
            pair_mode: t.pair_mode,
        });
    }

    let mut rosters: BTreeMap<TaskCategory, Vec<ModelSpec>> = BTreeMap::new();
    for category in [
        TaskCategory::Similarity,
        TaskCategory::Analogy,
        TaskCategory::SingleWord,
        TaskCategory::Sentence,
    ] {
        rosters.insert(category, models::default_roster(category));
    }
    if let Some(overrides) = &file.models {
        for (category_name, entries) in overrides {
            let category = parse_category(category_name)?;
            let mut roster = Vec::with_capacity(entries.len());
            for entry in entries {
                let model_id = ModelId::parse(&entry.model)?;
                if !model_id.valid_for(category) {
                    return Err(Error::Config(format!(
                        "model {} is not valid for {category} tasks",
                        entry.model
                    )));
                }
                let mut hyper_grid: HyperGrid = Vec::new();
                for (name, values) in &entry.hyper_grid {
                    if values.is_empty() {
                        return Err(Error::Config(format!(
                            "hyperparameter {name:?} of model {} has no candidate values",
                            entry.model
                        )));
                    }
                    let parsed: Result<Vec<HyperValue>> = values.iter().map(hyper_value).collect();
                    hyper_grid.push((name.clone(), parsed?));
                }
                roster.push(ModelSpec::new(model_id, hyper_grid));
            }
            if roster.is_empty() {
                return Err(Error::Config(format!(
                    "model roster for {category} must not be empty"
                )));
            }
            rosters.insert(category, roster);
        }
    }

    let similarity_metric = match &file.similarity_metric {
        None => SimilarityMetric::Spearman,
        Some(s) => parse_metric(s)?,
    };

    let config = RunConfig {
        embeddings,
        tasks,
        fractions: file.fractions.unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec()),
        n_repeats: file.n_repeats.unwrap_or(DEFAULT_N_REPEATS),
        test_fraction: file.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
        alpha: file.alpha.unwrap_or(DEFAULT_ALPHA),
        seed: file.seed.unwrap_or(DEFAULT_SEED),
        exclude_analogy_inputs: file.exclude_analogy_inputs.unwrap_or(true),
        similarity_metric,
        cv_folds: file.cv_folds.unwrap_or(DEFAULT_CV_FOLDS),
        rosters,
        output_dir: file
            .output_dir
            .map(|p| resolve_path(&p))
            .unwrap_or_else(|| PathBuf::from("embeval-out")),
        jobs: file.jobs.unwrap_or(1),
    };
    config.validate_values()?;
    Ok(config)
}

impl RunConfig {
    fn validate_values(&self) -> Result<()> {
        if self.fractions.len() < 2 || self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "fractions must be a strictly increasing list of at least 2 values".into(),
            ));
        }
        if self.fractions[0] <= 0.0 || *self.fractions.last().unwrap() != 1.0 {
            return Err(Error::Config("fractions must lie in (0, 1] and end at 1.0".into()));
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
        let mut names: Vec<&str> = self.embeddings.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("embedding names must be unique".into()));
        }
        let mut task_names: Vec<&str> = self.tasks.iter().map(|t| t.name.as_str()).collect();
        task_names.sort_unstable();
        if task_names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("task names must be unique".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn minimal_config_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        tmp_file(dir.path(), "emb.txt", "a 1 0\nb 0 1\n");
        tmp_file(dir.path(), "task.tsv", "a\t1\nb\t0\n");
        dir
    }

    #[test]
    fn minimal_config_applies_defaults() {
        let dir = minimal_config_dir();
        let cfg_path = tmp_file(
            dir.path(),
            "config.json",
            r#"{
              "embeddings": [{"name": "emb", "path": "emb.txt"}],
              "tasks": [{"name": "words", "path": "task.tsv", "category": "single_word"}]
            }"#,
        );
        let config = parse_config(&cfg_path).unwrap();
        assert_eq!(config.fractions, DEFAULT_FRACTIONS.to_vec());
        assert_eq!(config.n_repeats, 6);
        assert_eq!(config.test_fraction, 0.3);
        assert_eq!(config.alpha, 0.05);
        assert_eq!(config.seed, 42);
        assert!(config.exclude_analogy_inputs);
        assert_eq!(config.similarity_metric, SimilarityMetric::Spearman);
        assert_eq!(config.cv_folds, 3);
        assert_eq!(config.jobs, 1);
        assert_eq!(config.rosters.len(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = minimal_config_dir();
        let cfg_path = tmp_file(
            dir.path(),
            "config.json",
            r#"{
              "embeddings": [{"name": "emb", "path": "emb.txt"}],
              "tasks": [{"name": "words", "path": "task.tsv", "category": "single_word"}],
              "n_repeat": 6
            }"#,
        );
        match parse_config(&cfg_path) {
            Err(Error::Schema(msg)) => assert!(msg.contains("n_repeat"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_files_are_path_errors() {
        let dir = minimal_config_dir();
        let cfg_path = tmp_file(
            dir.path(),
            "config.json",
            r#"{
              "embeddings": [{"name": "emb", "path": "nope.txt"}],
              "tasks": [{"name": "words", "path": "task.tsv", "category": "single_word"}]
            }"#,
        );
        assert!(matches!(parse_config(&cfg_path), Err(Error::MissingPath(_))));
    }

    #[test]
    fn model_overrides_replace_the_roster() {
        let dir = minimal_config_dir();
        let cfg_path = tmp_file(
            dir.path(),
            "config.json",
            r#"{
              "embeddings": [{"name": "emb", "path": "emb.txt"}],
              "tasks": [{"name": "words", "path": "task.tsv", "category": "single_word"}],
              "models": {
                "single_word": [
                  {"model": "knn", "hyper_grid": {"k": [1, 3]}}
                ]
              }
            }"#,
        );
        let config = parse_config(&cfg_path).unwrap();
        let roster = &config.rosters[&TaskCategory::SingleWord];
        assert_eq!(roster.len(), 1);
        assert_eq!(roster[0].model_id, ModelId::Knn);
        assert_eq!(
            roster[0].hyper_grid,
            vec![("k".to_string(), vec![HyperValue::Int(1), HyperValue::Int(3)])]
        );
        // other categories keep their defaults
        assert!(!config.rosters[&TaskCategory::Analogy].is_empty());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let dir = minimal_config_dir();
        for (key, value) in [
            ("fractions", "[0.5]"),
            ("fractions", "[0.5, 0.8]"),
            ("test_fraction", "1.5"),
            ("alpha", "0"),
            ("n_repeats", "0"),
            ("cv_folds", "1"),
            ("jobs", "0"),
        ] {
            let cfg_path = tmp_file(
                dir.path(),
                "config.json",
                &format!(
                    r#"{{
                      "embeddings": [{{"name": "emb", "path": "emb.txt"}}],
                      "tasks": [{{"name": "words", "path": "task.tsv", "category": "single_word"}}],
                      "{key}": {value}
                    }}"#
                ),
            );
            assert!(
                parse_config(&cfg_path).is_err(),
                "expected rejection for {key}={value}"
            );
        }
    }

    #[test]
    fn category_and_model_names_are_checked() {
        let dir = minimal_config_dir();
        let cfg_path = tmp_file(
            dir.path(),
            "config.json",
            r#"{
              "embeddings": [{"name": "emb", "path": "emb.txt"}],
              "tasks": [{"name": "words", "path": "task.tsv", "category": "wordz"}]
            }"#,
        );
        assert!(matches!(parse_config(&cfg_path), Err(Error::Schema(_))));

        let cfg_path = tmp_file(
            dir.path(),
            "config2.json",
            r#"{
              "embeddings": [{"name": "emb", "path": "emb.txt"}],
              "tasks": [{"name": "words", "path": "task.tsv", "category": "single_word"}],
              "models": {"single_word": [{"model": "three_cos_add"}]}
            }"#,
        );
        assert!(matches!(parse_config(&cfg_path), Err(Error::Config(_))));
    }

    #[test]
    fn pair_mode_requires_analogy_category() {
        let dir = minimal_config_dir();
        let cfg_path = tmp_file(
            dir.path(),
            "config.json",
            r#"{
              "embeddings": [{"name": "emb", "path": "emb.txt"}],
              "tasks": [{"name": "words", "path": "task.tsv", "category": "single_word", "pair_mode": true}]
            }"#,
        );
        assert!(parse_config(&cfg_path).is_err());
    }
}
