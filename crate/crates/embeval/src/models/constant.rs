//! Non-learning models: cosine similarity scoring and the 3CosAdd /
//! 3CosMul analogy solvers.

use crate::embedding::{dot, EmbeddingTable};
use crate::error::{Error, Result};

/// Default denominator guard for 3CosMul.
pub const DEFAULT_EPSILON: f64 = 0.001;

/// Which constant analogy solver to run, with the 3CosMul guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantAnalogyMethod {
    pub kind: AnalogyKind,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogyKind {
    ThreeCosAdd,
    ThreeCosMul,
}

impl ConstantAnalogyMethod {
    pub fn three_cos_add() -> Self {
        Self {
            kind: AnalogyKind::ThreeCosAdd,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn three_cos_mul(epsilon: f64) -> Result<Self> {
        if epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self {
            kind: AnalogyKind::ThreeCosMul,
            epsilon,
        })
    }

    pub fn predict<'t>(
        &self,
        table: &'t EmbeddingTable,
        inputs: (&str, &str, &str),
        exclude_inputs: bool,
    ) -> Result<&'t str> {
        match self.kind {
            AnalogyKind::ThreeCosAdd => predict_3cosadd(table, inputs, exclude_inputs),
            AnalogyKind::ThreeCosMul => {
                predict_3cosmul(table, inputs, self.epsilon, exclude_inputs)
            }
        }
    }
}

/// Cosine similarity; exactly the inner product when both inputs are unit.
pub fn cosine(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::Input(format!(
            "cosine dimension mismatch: {} vs {}",
            v1.len(),
            v2.len()
        )));
    }
    let n1 = dot(v1, v1).sqrt();
    let n2 = dot(v2, v2).sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::DegenerateVector {
            token: "<cosine input>".into(),
        });
    }
    Ok(dot(v1, v2) / (n1 * n2))
}

/// Cosine shifted onto [0, 1]: `(1 + cos(v1, v2)) / 2`.
pub fn ccos(v1: &[f64], v2: &[f64]) -> Result<f64> {
    Ok((1.0 + cosine(v1, v2)?) / 2.0)
}

fn lookup_inputs<'t>(
    table: &'t EmbeddingTable,
    inputs: (&str, &str, &str),
) -> Result<[&'t [f64]; 3]> {
    let mut missing = Vec::new();
    for w in [inputs.0, inputs.1, inputs.2] {
        if !table.contains(w) {
            missing.push(w.to_lowercase());
        }
    }
    if !missing.is_empty() {
        return Err(Error::Oov { words: missing });
    }
    Ok([
        table.lookup(inputs.0).expect("checked above"),
        table.lookup(inputs.1).expect("checked above"),
        table.lookup(inputs.2).expect("checked above"),
    ])
}

/// 3CosAdd: the vocabulary token maximizing `cos(v, v2 - v1 + v3)`.
///
/// On a normalized table the cosine argmax equals the inner-product argmax
/// against the (unnormalized) target direction, so this is one matrix scan.
pub fn predict_3cosadd<'t>(
    table: &'t EmbeddingTable,
    inputs: (&str, &str, &str),
    exclude_inputs: bool,
) -> Result<&'t str> {
    let [v1, v2, v3] = lookup_inputs(table, inputs)?;
    let target: Vec<f64> = v2
        .iter()
        .zip(v1)
        .zip(v3)
        .map(|((b, a), c)| b - a + c)
        .collect();
    if dot(&target, &target).sqrt() < 1e-12 {
        return Err(Error::DegenerateQuery);
    }
    let exclude: Vec<&str> = if exclude_inputs {
        vec![inputs.0, inputs.1, inputs.2]
    } else {
        Vec::new()
    };
    table.argmax_inner_product(&target, &exclude)
}

/// 3CosMul: the token maximizing
/// `ccos(v, v3) * ccos(v, v2) / (ccos(v, v1) + epsilon)`,
/// computed in shifted-cosine space exactly as written.
pub fn predict_3cosmul<'t>(
    table: &'t EmbeddingTable,
    inputs: (&str, &str, &str),
    epsilon: f64,
    exclude_inputs: bool,
) -> Result<&'t str> {
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    let [v1, v2, v3] = lookup_inputs(table, inputs)?;
    let excluded = if exclude_inputs {
        table.exclusion_rows(&[inputs.0, inputs.1, inputs.2])
    } else {
        Vec::new()
    };
    let mut best: Option<(f64, usize)> = None;
    for i in 0..table.len() {
        if excluded.contains(&i) {
            continue;
        }
        let v = table.row(i);
        // rows and inputs are unit vectors: cos == dot
        let c1 = (1.0 + dot(v, v1)) / 2.0;
        let c2 = (1.0 + dot(v, v2)) / 2.0;
        let c3 = (1.0 + dot(v, v3)) / 2.0;
        let objective = c3 * c2 / (c1 + epsilon);
        best = match best {
            None => Some((objective, i)),
            Some((bs, bi)) => {
                if objective > bs || (objective == bs && table.token(i) < table.token(bi)) {
                    Some((objective, i))
                } else {
                    Some((bs, bi))
                }
            }
        };
    }
    match best {
        Some((_, i)) => Ok(table.token(i)),
        None => Err(Error::NoCandidate),
    }
}
