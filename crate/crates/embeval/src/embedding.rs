//! Word embedding tables: loading, normalization, vocabulary intersection
//! and the inner-product argmax scan behind every analogy prediction.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// A vocabulary plus one row per token, stored as a contiguous row-major
/// matrix. Tokens are lowercased at construction and are unique.
///
/// Tables are immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    dim: usize,
    normalized: bool,
}

impl EmbeddingTable {
    /// Builds a table from parallel token/row lists. Tokens are lowercased;
    /// on duplicates after lowercasing the first occurrence wins.
    pub fn from_rows(tokens: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("no embedding rows".into()));
        }
        if tokens.len() != rows.len() {
            return Err(Error::Input(format!(
                "token/row count mismatch: {} vs {}",
                tokens.len(),
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::Input("embedding dimension is zero".into()));
        }
        let mut vocab = Vec::with_capacity(tokens.len());
        let mut index = HashMap::with_capacity(tokens.len());
        let mut vectors = Vec::with_capacity(tokens.len() * dim);
        for (token, row) in tokens.into_iter().zip(rows) {
            if row.len() != dim {
                return Err(Error::Input(format!(
                    "row for {token:?} has {} components, expected {dim}",
                    row.len()
                )));
            }
            let token = token.to_lowercase();
            if index.contains_key(&token) {
                continue; // first occurrence wins
            }
            index.insert(token.clone(), vocab.len());
            vocab.push(token);
            vectors.extend_from_slice(&row);
        }
        Ok(Self {
            vocab,
            index,
            vectors,
            dim,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Tokens in table order.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token(&self, row: usize) -> &str {
        &self.vocab[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    /// Row for a token, lowercasing the query. Absence is not an error so
    /// callers can apply their own OOV policy.
    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        let row = if word.chars().any(|c| c.is_uppercase()) {
            *self.index.get(&word.to_lowercase())?
        } else {
            *self.index.get(word)?
        };
        Some(self.row(row))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup(word).is_some()
    }

    /// Scales every row to unit Euclidean norm.
    pub fn normalized(mut self) -> Result<Self> {
        for (i, token) in self.vocab.iter().enumerate() {
            let row = &mut self.vectors[i * self.dim..(i + 1) * self.dim];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::DegenerateVector {
                    token: token.clone(),
                });
            }
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
        self.normalized = true;
        Ok(self)
    }

    /// Token with the largest inner product against `query`, skipping
    /// `exclude`. Ties go to the lexicographically smallest token.
    ///
    /// This is a single pass over the contiguous matrix; it dominates
    /// analogy runtime on real vocabularies, so no per-word allocation.
    pub fn argmax_inner_product(&self, query: &[f64], exclude: &[&str]) -> Result<&str> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        let excluded = self.exclusion_rows(exclude);
        let mut best: Option<(f64, usize)> = None;
        for (i, row) in self.vectors.chunks_exact(self.dim).enumerate() {
            if excluded.contains(&i) {
                continue;
            }
            let score = dot(row, query);
            best = match best {
                None => Some((score, i)),
                Some((bs, bi)) => {
                    if score > bs || (score == bs && self.vocab[i] < self.vocab[bi]) {
                        Some((score, i))
                    } else {
                        Some((bs, bi))
                    }
                }
            };
        }
        match best {
            Some((_, i)) => Ok(&self.vocab[i]),
            None => Err(Error::NoCandidate),
        }
    }

    /// Row indices of excluded tokens (lowercased; absent tokens ignored).
    pub(crate) fn exclusion_rows(&self, exclude: &[&str]) -> Vec<usize> {
        let mut rows: Vec<usize> = exclude
            .iter()
            .filter_map(|w| self.index.get(&w.to_lowercase()).copied())
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loads an embedding table from the whitespace-separated text format
/// (`token x1 x2 ... xD` per line, UTF-8, LF or CRLF).
///
/// A first line consisting of exactly two integer fields is treated as a
/// `count dim` header and skipped. Dimensionality is inferred from the first
/// data line; tokens are lowercased with first-occurrence-wins on duplicates.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();

    let mut tokens = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut first_content_line = true;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: path_str.clone(),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let token = fields.next().expect("non-empty line has a first field");
        let values: Vec<&str> = fields.collect();

        if first_content_line {
            first_content_line = false;
            // header auto-detection: exactly two integer fields
            if values.len() == 1
                && token.parse::<u64>().is_ok()
                && values[0].parse::<u64>().is_ok()
            {
                continue;
            }
        }

        let mut row = Vec::with_capacity(values.len());
        for v in &values {
            let x: f64 = v.parse().map_err(|_| Error::Format {
                path: path_str.clone(),
                line: lineno,
                message: format!("unparsable real number {v:?}"),
            })?;
            row.push(x);
        }
        match dim {
            None => {
                if row.is_empty() {
                    return Err(Error::Format {
                        path: path_str.clone(),
                        line: lineno,
                        message: "line has a token but no vector components".into(),
                    });
                }
                dim = Some(row.len());
            }
            Some(d) => {
                if row.len() != d {
                    return Err(Error::Format {
                        path: path_str.clone(),
                        line: lineno,
                        message: format!("expected {d} vector components, found {}", row.len()),
                    });
                }
            }
        }
        tokens.push(token.to_string());
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{path_str} holds no embeddings")));
    }
    EmbeddingTable::from_rows(tokens, rows)
}

/// Restricts every table to the set intersection of all vocabularies, in
/// lexicographic order. Vectors are carried over unchanged.
pub fn intersect_vocabularies(tables: Vec<EmbeddingTable>) -> Result<Vec<EmbeddingTable>> {
    if tables.is_empty() {
        return Err(Error::Input("intersect_vocabularies needs at least one table".into()));
    }
    let mut shared: BTreeSet<&str> = tables[0].vocab.iter().map(String::as_str).collect();
    for table in &tables[1..] {
        shared.retain(|w| table.index.contains_key(*w));
    }
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let order: Vec<String> = shared.into_iter().map(str::to_string).collect();

    let mut out = Vec::with_capacity(tables.len());
    for table in tables {
        let mut vectors = Vec::with_capacity(order.len() * table.dim);
        let mut index = HashMap::with_capacity(order.len());
        for (new_row, word) in order.iter().enumerate() {
            let old_row = table.index[word];
            vectors.extend_from_slice(table.row(old_row));
            index.insert(word.clone(), new_row);
        }
        out.push(EmbeddingTable {
            vocab: order.clone(),
            index,
            vectors,
            dim: table.dim,
            normalized: table.normalized,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        EmbeddingTable::from_rows(
            entries.iter().map(|(t, _)| t.to_string()).collect(),
            entries.iter().map(|(_, v)| v.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn load_lowercases_and_infers_dim() {
        let f = write_tmp("Cat 1.0 0.0\ndog 0.0 1.0\n");
        let t = load_embeddings(f.path()).unwrap();
        assert_eq!(t.vocab(), &["cat".to_string(), "dog".to_string()]);
        assert_eq!(t.dim(), 2);
        assert!(!t.is_normalized());
    }

    #[test]
    fn load_skips_count_dim_header() {
        let f = write_tmp("2 2\na 1 0\nb 0 1\n");
        let t = load_embeddings(f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 2);
    }

    #[test]
    fn load_rejects_dimension_mismatch_with_line_number() {
        let f = write_tmp("a 1 0\nb 1\n");
        match load_embeddings(f.path()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_unparsable_real() {
        let f = write_tmp("a 1 0\nb x 1\n");
        match load_embeddings(f.path()) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("unparsable"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_empty_file() {
        let f = write_tmp("");
        assert!(matches!(load_embeddings(f.path()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn load_accepts_crlf_and_tabs() {
        let f = write_tmp("a\t1\t0\r\nb 0  1\r\n");
        let t = load_embeddings(f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("b").unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn duplicate_tokens_first_wins() {
        let f = write_tmp("Cat 1 0\ncat 0 1\n");
        let t = load_embeddings(f.path()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.lookup("cat").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn normalize_scales_rows() {
        let t = table(&[("a", &[3.0, 4.0]), ("b", &[1.0, 0.0])]).normalized().unwrap();
        assert_eq!(t.lookup("a").unwrap(), &[0.6, 0.8]);
        assert_eq!(t.lookup("b").unwrap(), &[1.0, 0.0]);
        assert!(t.is_normalized());
    }

    #[test]
    fn normalize_rejects_zero_row() {
        let err = table(&[("zero", &[0.0, 0.0])]).normalized().unwrap_err();
        match err {
            Error::DegenerateVector { token } => assert_eq!(token, "zero"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..12).map(|_| rng.gen_range(-2.0..2.0) + 0.01).collect())
            .collect();
        let tokens: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        let once = EmbeddingTable::from_rows(tokens.clone(), rows.clone())
            .unwrap()
            .normalized()
            .unwrap();
        let twice = once.clone().normalized().unwrap();
        for i in 0..once.len() {
            for (a, b) in once.row(i).iter().zip(twice.row(i)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lookup_is_case_insensitive_and_total() {
        let t = table(&[("cat", &[1.0, 0.0])]);
        assert_eq!(t.lookup("CAT").unwrap(), &[1.0, 0.0]);
        assert!(t.lookup("zebra").is_none());
        assert!(t.lookup("").is_none());
    }

    #[test]
    fn intersect_restricts_to_shared_vocab() {
        let t1 = table(&[("a", &[1.0]), ("b", &[2.0])]);
        let t2 = table(&[("b", &[5.0]), ("c", &[6.0])]);
        let out = intersect_vocabularies(vec![t1, t2]).unwrap();
        assert_eq!(out[0].vocab(), &["b".to_string()]);
        assert_eq!(out[1].vocab(), &["b".to_string()]);
        assert_eq!(out[0].row(0), &[2.0]);
        assert_eq!(out[1].row(0), &[5.0]);
    }

    #[test]
    fn intersect_single_table_sorts_lexicographically() {
        let t = table(&[("dog", &[1.0]), ("ant", &[2.0]), ("cat", &[3.0])]);
        let out = intersect_vocabularies(vec![t]).unwrap();
        assert_eq!(
            out[0].vocab(),
            &["ant".to_string(), "cat".to_string(), "dog".to_string()]
        );
        assert_eq!(out[0].lookup("dog").unwrap(), &[1.0]);
    }

    #[test]
    fn intersect_empty_is_an_error() {
        let t1 = table(&[("a", &[1.0])]);
        let t2 = table(&[("b", &[1.0])]);
        assert!(matches!(
            intersect_vocabularies(vec![t1, t2]),
            Err(Error::EmptyIntersection)
        ));
    }

    #[test]
    fn argmax_picks_largest_projection_and_honors_exclusion() {
        let t = table(&[("e1", &[1.0, 0.0]), ("e2", &[0.0, 1.0])])
            .normalized()
            .unwrap();
        assert_eq!(t.argmax_inner_product(&[0.9, 0.1], &[]).unwrap(), "e1");
        assert_eq!(t.argmax_inner_product(&[0.9, 0.1], &["e1"]).unwrap(), "e2");
    }

    #[test]
    fn argmax_breaks_ties_lexicographically() {
        let t = table(&[("b", &[0.0, 1.0]), ("a", &[1.0, 0.0])])
            .normalized()
            .unwrap();
        assert_eq!(t.argmax_inner_product(&[0.5, 0.5], &[]).unwrap(), "a");
    }

    #[test]
    fn argmax_with_everything_excluded_fails() {
        let t = table(&[("a", &[1.0])]);
        assert!(matches!(
            t.argmax_inner_product(&[1.0], &["a"]),
            Err(Error::NoCandidate)
        ));
    }

    /// Brute-force cosine argmax over the full vocabulary.
    fn cosine_argmax_oracle<'a>(t: &'a EmbeddingTable, query: &[f64]) -> &'a str {
        let qn = dot(query, query).sqrt();
        let mut best: Option<(f64, &str)> = None;
        for i in 0..t.len() {
            let row = t.row(i);
            let rn = dot(row, row).sqrt();
            let cos = dot(row, query) / (rn * qn);
            best = match best {
                None => Some((cos, t.token(i))),
                Some((bs, bt)) => {
                    if cos > bs || (cos == bs && t.token(i) < bt) {
                        Some((cos, t.token(i)))
                    } else {
                        Some((bs, bt))
                    }
                }
            };
        }
        best.unwrap().1
    }

    #[test]
    fn argmax_matches_cosine_oracle_on_random_queries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dim = 8;
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0) + 1e-3).collect())
            .collect();
        let tokens: Vec<String> = (0..120).map(|i| format!("w{i:03}")).collect();
        let t = EmbeddingTable::from_rows(tokens, rows)
            .unwrap()
            .normalized()
            .unwrap();
        for _ in 0..1000 {
            let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if dot(&q, &q) < 1e-9 {
                continue;
            }
            assert_eq!(
                t.argmax_inner_product(&q, &[]).unwrap(),
                cosine_argmax_oracle(&t, &q)
            );
        }
    }

    proptest! {
        #[test]
        fn intersection_vocabs_are_identical(words1 in proptest::collection::hash_set("[a-e]{1,2}", 1..8),
                                             words2 in proptest::collection::hash_set("[a-e]{1,2}", 1..8)) {
            let mk = |ws: &std::collections::HashSet<String>| {
                EmbeddingTable::from_rows(
                    ws.iter().cloned().collect(),
                    ws.iter().map(|_| vec![1.0, 2.0]).collect(),
                ).unwrap()
            };
            let t1 = mk(&words1);
            let t2 = mk(&words2);
            match intersect_vocabularies(vec![t1, t2]) {
                Ok(out) => {
                    prop_assert_eq!(out[0].vocab(), out[1].vocab());
                    let mut sorted = out[0].vocab().to_vec();
                    sorted.sort();
                    prop_assert_eq!(out[0].vocab(), &sorted[..]);
                }
                Err(Error::EmptyIntersection) => {
                    prop_assert!(words1.intersection(&words2).next().is_none());
                }
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
    }
}
