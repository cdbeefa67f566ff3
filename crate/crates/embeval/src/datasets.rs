//! Task datasets: the four task families, their file formats, repeated
//! random split plans and nested training subsets.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A word pair with a human-assigned score on the task's native scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub word_a: String,
    pub word_b: String,
    pub human_score: f64,
}

/// Two word pairs in the same relation: `w1 : w2 = w3 : w4`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuad {
    pub w1: String,
    pub w2: String,
    pub w3: String,
    pub w4: String,
}

/// A single word with a binary target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledWord {
    pub word: String,
    pub label: u8,
}

/// A whitespace-tokenized sentence with a binary target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub label: u8,
}

/// The four task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskCategory {
    Similarity,
    Analogy,
    SingleWord,
    Sentence,
}

impl TaskCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskCategory::Similarity => "similarity",
            TaskCategory::Analogy => "analogy",
            TaskCategory::SingleWord => "single_word",
            TaskCategory::Sentence => "sentence",
        }
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Homogeneous item storage for one dataset.
///
/// `AnalogyPairs` holds WordRep-style word pairs; the protocol converts them
/// into quads per repeat via [`quads_from_pairs`] so that train and test
/// quads never share words.
#[derive(Debug, Clone)]
pub enum TaskItems {
    Similarity(Vec<SimilarityPair>),
    Analogy(Vec<AnalogyQuad>),
    AnalogyPairs(Vec<(String, String)>),
    SingleWord(Vec<LabeledWord>),
    Sentence(Vec<LabeledSentence>),
}

impl TaskItems {
    pub fn len(&self) -> usize {
        match self {
            TaskItems::Similarity(v) => v.len(),
            TaskItems::Analogy(v) => v.len(),
            TaskItems::AnalogyPairs(v) => v.len(),
            TaskItems::SingleWord(v) => v.len(),
            TaskItems::Sentence(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn category(&self) -> TaskCategory {
        match self {
            TaskItems::Similarity(_) => TaskCategory::Similarity,
            TaskItems::Analogy(_) | TaskItems::AnalogyPairs(_) => TaskCategory::Analogy,
            TaskItems::SingleWord(_) => TaskCategory::SingleWord,
            TaskItems::Sentence(_) => TaskCategory::Sentence,
        }
    }
}

/// A named, loaded task.
#[derive(Debug, Clone)]
pub struct TaskDataset {
    pub name: String,
    pub items: TaskItems,
}

impl TaskDataset {
    pub fn new(name: impl Into<String>, items: TaskItems) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyInput("task dataset has no items".into()));
        }
        Ok(Self {
            name: name.into(),
            items,
        })
    }

    pub fn category(&self) -> TaskCategory {
        self.items.category()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// One repeated random split: a held-out test set and a shuffled train pool.
///
/// The pool keeps its shuffled order so that training subsets at increasing
/// fractions are nested prefixes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub test_indices: Vec<usize>,
    pub train_pool: Vec<usize>,
    pub repeat_id: usize,
    pub seed: u64,
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(BufReader::new(file).lines())
}

fn parse_label(field: &str, path: &str, lineno: usize) -> Result<u8> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Format {
            path: path.into(),
            line: lineno,
            message: format!("label must be 0 or 1, found {other:?}"),
        }),
    }
}

/// Loads a task file in the given category's format. Tokens are lowercased;
/// sentence text is lowercased then whitespace-split. Lines starting with
/// `#` are comments.
pub fn load_task(path: &Path, category: TaskCategory, name: &str) -> Result<TaskDataset> {
    let items = match category {
        TaskCategory::Similarity => TaskItems::Similarity(parse_lines(path, parse_similarity)?),
        TaskCategory::Analogy => TaskItems::Analogy(parse_lines(path, parse_quad)?),
        TaskCategory::SingleWord => TaskItems::SingleWord(parse_lines(path, parse_single_word)?),
        TaskCategory::Sentence => TaskItems::Sentence(parse_lines(path, parse_sentence)?),
    };
    TaskDataset::new(name, items)
}

/// Loads a WordRep-style pair file (`word_a<TAB>word_b` per line) as an
/// analogy task in pair mode.
pub fn load_analogy_pairs(path: &Path, name: &str) -> Result<TaskDataset> {
    let pairs = parse_lines(path, parse_pair)?;
    TaskDataset::new(name, TaskItems::AnalogyPairs(pairs))
}

fn parse_lines<T>(
    path: &Path,
    parse: impl Fn(&str, &str, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let path_str = path.display().to_string();
    let mut items = Vec::new();
    for (lineno, line) in open_lines(path)?.enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: path_str.clone(),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        items.push(parse(line, &path_str, lineno)?);
    }
    if items.is_empty() {
        return Err(Error::EmptyInput(format!("{path_str} holds no task items")));
    }
    Ok(items)
}

fn split_tabs<'a>(line: &'a str, want: usize, path: &str, lineno: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != want {
        return Err(Error::Format {
            path: path.into(),
            line: lineno,
            message: format!("expected {want} tab-separated fields, found {}", fields.len()),
        });
    }
    Ok(fields)
}

fn parse_similarity(line: &str, path: &str, lineno: usize) -> Result<SimilarityPair> {
    let f = split_tabs(line, 3, path, lineno)?;
    let human_score: f64 = f[2].parse().map_err(|_| Error::Format {
        path: path.into(),
        line: lineno,
        message: format!("unparsable score {:?}", f[2]),
    })?;
    if !human_score.is_finite() {
        return Err(Error::Format {
            path: path.into(),
            line: lineno,
            message: "score must be finite".into(),
        });
    }
    Ok(SimilarityPair {
        word_a: f[0].to_lowercase(),
        word_b: f[1].to_lowercase(),
        human_score,
    })
}

fn parse_quad(line: &str, path: &str, lineno: usize) -> Result<AnalogyQuad> {
    let f: Vec<&str> = line.split_ascii_whitespace().collect();
    if f.len() != 4 {
        return Err(Error::Format {
            path: path.into(),
            line: lineno,
            message: format!("expected 4 whitespace-separated tokens, found {}", f.len()),
        });
    }
    Ok(AnalogyQuad {
        w1: f[0].to_lowercase(),
        w2: f[1].to_lowercase(),
        w3: f[2].to_lowercase(),
        w4: f[3].to_lowercase(),
    })
}

fn parse_pair(line: &str, path: &str, lineno: usize) -> Result<(String, String)> {
    let f = split_tabs(line, 2, path, lineno)?;
    Ok((f[0].to_lowercase(), f[1].to_lowercase()))
}

fn parse_single_word(line: &str, path: &str, lineno: usize) -> Result<LabeledWord> {
    let f = split_tabs(line, 2, path, lineno)?;
    Ok(LabeledWord {
        word: f[0].to_lowercase(),
        label: parse_label(f[1], path, lineno)?,
    })
}

fn parse_sentence(line: &str, path: &str, lineno: usize) -> Result<LabeledSentence> {
    let f = split_tabs(line, 2, path, lineno)?;
    let label = parse_label(f[0], path, lineno)?;
    let tokens: Vec<String> = f[1]
        .to_lowercase()
        .split_ascii_whitespace()
        .map(str::to_string)
        .collect();
    if tokens.is_empty() {
        return Err(Error::Format {
            path: path.into(),
            line: lineno,
            message: "sentence has no tokens".into(),
        });
    }
    Ok(LabeledSentence { tokens, label })
}

/// Draws `n_repeats` independent test/pool splits of `n_items` items.
///
/// Each plan samples a fresh test set of `round(test_fraction * N)` items
/// from a stream derived from `(seed, repeat_id)`; the remaining items form
/// the train pool in shuffled order.
pub fn make_splits(
    n_items: usize,
    test_fraction: f64,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<SplitPlan>> {
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if n_repeats == 0 {
        return Err(Error::Split("n_repeats must be at least 1".into()));
    }
    let n_test = (test_fraction * n_items as f64).round() as usize;
    if n_test == 0 || n_test >= n_items {
        return Err(Error::Split(format!(
            "{n_items} items at test_fraction {test_fraction} leave no test or no train items"
        )));
    }
    let mut plans = Vec::with_capacity(n_repeats);
    for repeat_id in 0..n_repeats {
        let plan_seed = crate::seed::derive(seed, &["split".into(), repeat_id.into()]);
        let mut rng = ChaCha8Rng::seed_from_u64(plan_seed);
        let mut indices: Vec<usize> = (0..n_items).collect();
        indices.shuffle(&mut rng);
        let test_indices = indices[..n_test].to_vec();
        let train_pool = indices[n_test..].to_vec();
        plans.push(SplitPlan {
            test_indices,
            train_pool,
            repeat_id,
            seed: plan_seed,
        });
    }
    Ok(plans)
}

/// The first `ceil(fraction * |pool|)` indices of the plan's shuffled train
/// pool; subsets at increasing fractions are nested prefixes.
pub fn train_subset(plan: &SplitPlan, fraction: f64) -> Result<&[usize]> {
    if !(0.0 < fraction && fraction <= 1.0) {
        return Err(Error::Input(format!(
            "training fraction must be in (0, 1], got {fraction}"
        )));
    }
    let m = (fraction * plan.train_pool.len() as f64).ceil() as usize;
    Ok(&plan.train_pool[..m.min(plan.train_pool.len())])
}

/// Splits word pairs into word-disjoint train/test partitions and expands
/// each partition into analogy quads (all ordered pair combinations).
///
/// Pairs are shuffled by `rng_seed`; the test partition takes
/// `round(test_fraction * n)` pairs, and any remaining pair sharing a word
/// with the test partition is dropped from train.
pub fn quads_from_pairs(
    pairs: &[(String, String)],
    rng_seed: u64,
    test_fraction: f64,
) -> Result<(Vec<AnalogyQuad>, Vec<AnalogyQuad>)> {
    if pairs.len() < 4 {
        return Err(Error::Input(format!(
            "quads_from_pairs needs at least 4 pairs, got {}",
            pairs.len()
        )));
    }
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(Error::Input(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut shuffled: Vec<&(String, String)> = pairs.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    shuffled.shuffle(&mut rng);

    let n_test = (test_fraction * pairs.len() as f64).round() as usize;
    let n_test = n_test.clamp(1, pairs.len() - 1);
    let (test_pairs, train_candidates) = shuffled.split_at(n_test);

    let mut test_words: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for (a, b) in test_pairs.iter().copied() {
        test_words.insert(a);
        test_words.insert(b);
    }
    let train_pairs: Vec<&(String, String)> = train_candidates
        .iter()
        .copied()
        .filter(|(a, b)| !test_words.contains(a.as_str()) && !test_words.contains(b.as_str()))
        .collect();

    if test_pairs.len() < 2 {
        return Err(Error::InsufficientPairs {
            partition: "test",
            got: test_pairs.len(),
        });
    }
    if train_pairs.len() < 2 {
        return Err(Error::InsufficientPairs {
            partition: "train",
            got: train_pairs.len(),
        });
    }

    Ok((expand_quads(&train_pairs), expand_quads(test_pairs)))
}

fn expand_quads(pairs: &[&(String, String)]) -> Vec<AnalogyQuad> {
    let mut quads = Vec::with_capacity(pairs.len() * (pairs.len() - 1));
    for (i, (a1, b1)) in pairs.iter().enumerate() {
        for (j, (a2, b2)) in pairs.iter().enumerate() {
            if i == j {
                continue;
            }
            quads.push(AnalogyQuad {
                w1: a1.clone(),
                w2: b1.clone(),
                w3: a2.clone(),
                w4: b2.clone(),
            });
        }
    }
    quads
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.into(), b.into())
    }

    #[test]
    fn load_similarity_parses_tsv() {
        let f = write_tmp("# comment\ncat\tdog\t7.35\nCar\tTruck\t6.1\n");
        let ds = load_task(f.path(), TaskCategory::Similarity, "sim").unwrap();
        match &ds.items {
            TaskItems::Similarity(pairs) => {
                assert_eq!(pairs.len(), 2);
                assert_eq!(pairs[0].word_a, "cat");
                assert_eq!(pairs[0].human_score, 7.35);
                assert_eq!(pairs[1].word_a, "car");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_analogy_parses_quads() {
        let f = write_tmp("king queen man woman\n");
        let ds = load_task(f.path(), TaskCategory::Analogy, "an").unwrap();
        match &ds.items {
            TaskItems::Analogy(quads) => {
                assert_eq!(quads[0].w1, "king");
                assert_eq!(quads[0].w4, "woman");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_single_word_rejects_bad_label() {
        let f = write_tmp("run\t2\n");
        match load_task(f.path(), TaskCategory::SingleWord, "sw") {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 1);
                assert!(message.contains("label"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_sentence_lowercases_and_tokenizes() {
        let f = write_tmp("1\tThe Cat SAT\n0\tdog ran\n");
        let ds = load_task(f.path(), TaskCategory::Sentence, "snt").unwrap();
        match &ds.items {
            TaskItems::Sentence(sents) => {
                assert_eq!(sents[0].tokens, vec!["the", "cat", "sat"]);
                assert_eq!(sents[0].label, 1);
                assert_eq!(sents[1].label, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_reports_malformed_line_number() {
        let f = write_tmp("a\tb\t1.0\nbad line\n");
        match load_task(f.path(), TaskCategory::Similarity, "sim") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn make_splits_sizes_and_determinism() {
        let plans = make_splits(100, 0.3, 6, 42).unwrap();
        assert_eq!(plans.len(), 6);
        for plan in &plans {
            assert_eq!(plan.test_indices.len(), 30);
            assert_eq!(plan.train_pool.len(), 70);
        }
        let again = make_splits(100, 0.3, 6, 42).unwrap();
        assert_eq!(plans, again);
        let other_seed = make_splits(100, 0.3, 6, 43).unwrap();
        assert_ne!(plans, other_seed);
    }

    #[test]
    fn make_splits_rejects_degenerate_input() {
        assert!(make_splits(100, 0.3, 0, 1).is_err());
        assert!(make_splits(1, 0.3, 2, 1).is_err());
        assert!(make_splits(10, 0.0, 2, 1).is_err());
        assert!(make_splits(3, 0.95, 2, 1).is_err()); // round -> all test
    }

    #[test]
    fn train_subset_prefix_sizes_and_nesting() {
        let plans = make_splits(100, 0.3, 1, 7).unwrap();
        let plan = &plans[0];
        let s30 = train_subset(plan, 0.3).unwrap();
        assert_eq!(s30.len(), 21); // ceil(0.3 * 70)
        let full = train_subset(plan, 1.0).unwrap();
        assert_eq!(full.len(), 70);
        let s65 = train_subset(plan, 0.65).unwrap();
        assert_eq!(&s65[..s30.len()], s30);
        assert!(train_subset(plan, 0.0).is_err());
        assert!(train_subset(plan, 1.5).is_err());
    }

    #[test]
    fn quads_from_pairs_counts_ordered_combinations() {
        // 6 pairs over disjoint words; pick a fraction putting 3 in test.
        let pairs = vec![
            pair("a", "b"),
            pair("c", "d"),
            pair("e", "f"),
            pair("g", "h"),
            pair("i", "j"),
            pair("k", "l"),
        ];
        let (train, test) = quads_from_pairs(&pairs, 1, 0.5).unwrap();
        assert_eq!(test.len(), 3 * 2);
        assert_eq!(train.len(), 3 * 2);
    }

    #[test]
    fn quads_from_pairs_drops_word_sharing_train_pairs() {
        // every pair shares word "x", so any train candidate sharing a word
        // with a test pair must be dropped -> insufficient pairs
        let pairs = vec![pair("x", "b"), pair("x", "c"), pair("x", "d"), pair("x", "e")];
        match quads_from_pairs(&pairs, 3, 0.5) {
            Err(Error::InsufficientPairs { partition, .. }) => assert_eq!(partition, "train"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quads_from_pairs_word_disjointness_holds() {
        let pairs: Vec<(String, String)> = (0..20)
            .map(|i| pair(&format!("a{i}"), &format!("b{i}")))
            .collect();
        for seed in 0..10 {
            let (train, test) = quads_from_pairs(&pairs, seed, 0.3).unwrap();
            let test_words: std::collections::HashSet<&str> = test
                .iter()
                .flat_map(|q| [q.w1.as_str(), q.w2.as_str(), q.w3.as_str(), q.w4.as_str()])
                .collect();
            for q in &train {
                for w in [&q.w1, &q.w2, &q.w3, &q.w4] {
                    assert!(!test_words.contains(w.as_str()), "{w} leaked into train");
                }
            }
        }
    }

    #[test]
    fn quads_from_pairs_rejects_tiny_partitions() {
        let pairs = vec![pair("a", "b"), pair("c", "d"), pair("e", "f"), pair("g", "h")];
        // round(0.2 * 4) = 1 test pair -> 0 test quads
        match quads_from_pairs(&pairs, 1, 0.2) {
            Err(Error::InsufficientPairs { partition, got }) => {
                assert_eq!(partition, "test");
                assert_eq!(got, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn splits_are_disjoint_and_cover(n in 4usize..200, frac in 0.1f64..0.9, seed in 0u64..50) {
            if let Ok(plans) = make_splits(n, frac, 3, seed) {
                for plan in plans {
                    let mut seen = vec![false; n];
                    for &i in plan.test_indices.iter().chain(&plan.train_pool) {
                        prop_assert!(!seen[i], "index {i} appears twice");
                        seen[i] = true;
                    }
                    prop_assert!(seen.iter().all(|&s| s), "not all indices covered");
                    prop_assert!(!plan.test_indices.is_empty());
                    prop_assert!(!plan.train_pool.is_empty());
                }
            }
        }
    }
}
