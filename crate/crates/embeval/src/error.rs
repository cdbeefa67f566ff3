//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the harness.
///
/// Variants are grouped by exit-code class: configuration problems (exit 1),
/// data/format problems (exit 2) and runtime numerical problems (exit 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- configuration (exit 1) ---
    #[error("configuration error: {0}")]
    Config(String),

    #[error("referenced file does not exist: {0}")]
    MissingPath(PathBuf),

    #[error("config schema error: {0}")]
    Schema(String),

    // --- data / format (exit 2) ---
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate vector for token {token:?}: zero norm")]
    DegenerateVector { token: String },

    #[error("vocabulary intersection is empty")]
    EmptyIntersection,

    #[error("no candidate token: every vocabulary entry is excluded")]
    NoCandidate,

    #[error("out-of-vocabulary word(s): {}", words.join(", "))]
    Oov { words: Vec<String> },

    #[error("degenerate analogy query: v2 - v1 + v3 has zero norm")]
    DegenerateQuery,

    #[error("insufficient pairs: {partition} partition has {got} pair(s), need at least 2")]
    InsufficientPairs { partition: &'static str, got: usize },

    #[error("degenerate split: {0}")]
    Split(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("aggregation gap: no rank for embedding {embedding:?} on task {task:?}")]
    AggregationGap { embedding: String, task: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    // --- runtime numerical (exit 3) ---
    #[error("undefined correlation: {0} input is constant")]
    UndefinedCorrelation(&'static str),

    #[error("divergence while fitting {model}: non-finite loss ({detail})")]
    Divergence { model: &'static str, detail: String },

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit code class for the CLI: 1 config, 2 data/format, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Config(_) | MissingPath(_) | Schema(_) => 1,
            Format { .. } | EmptyInput(_) | DegenerateVector { .. } | EmptyIntersection
            | NoCandidate | Oov { .. } | DegenerateQuery | InsufficientPairs { .. }
            | Split(_) | Input(_) | AggregationGap { .. } | Io { .. } => 2,
            UndefinedCorrelation(_) | Divergence { .. } | Numerical(_) => 3,
        }
    }
}
