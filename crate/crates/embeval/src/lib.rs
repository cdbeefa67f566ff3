//! Data-efficiency evaluation for word embeddings.
//!
//! The harness fits constant, linear and nonlinear models on simple
//! supervised tasks (word similarity, analogy, single-word and sentence
//! classification) across increasing training-set fractions, then reports
//! learning curves, their trapezoidal AUC, significance-based embedding
//! ranks and linear-vs-nonlinear score gaps.
//!
//! Entry points:
//! - [`embedding`]: load / normalize / intersect embedding tables.
//! - [`datasets`]: task files, split plans, nested training subsets.
//! - [`models`]: the model roster, from constant analogy solvers to the
//!   trainable analogy regression network.
//! - [`stats`]: Spearman, two-group ANOVA, incomplete beta, curve AUC.
//! - [`protocol`]: the evaluation engine that drives the full grid.
//! - [`config`] / [`report`]: run configuration and report emission.
//!
//! See the `examples/` directory for one runnable example per capability;
//! the thin `embeval` binary wraps [`config`] + [`protocol`] + [`report`]
//! into `embeval run` / `embeval validate`.

pub mod config;
pub mod datasets;
pub mod embedding;
pub mod error;
pub mod models;
pub mod protocol;
pub mod report;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
