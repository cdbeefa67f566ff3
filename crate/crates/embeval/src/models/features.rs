//! Feature maps from task items to model inputs.

/// Features for a word pair `(a, b)`: elementwise product concatenated with
/// elementwise absolute difference, length `2D`. Symmetric in its arguments.
pub fn pair_features(va: &[f64], vb: &[f64]) -> Vec<f64> {
    debug_assert_eq!(va.len(), vb.len());
    let mut out = Vec::with_capacity(2 * va.len());
    out.extend(va.iter().zip(vb).map(|(a, b)| a * b));
    out.extend(va.iter().zip(vb).map(|(a, b)| (a - b).abs()));
    out
}

/// Mean of the in-vocabulary token vectors; returns the number of tokens
/// skipped as OOV. An all-OOV sentence yields the zero vector.
pub fn sentence_features(
    tokens: &[String],
    lookup: impl Fn(&str) -> Option<Vec<f64>>,
    dim: usize,
) -> (Vec<f64>, usize) {
    let mut acc = vec![0.0; dim];
    let mut hit = 0usize;
    for token in tokens {
        if let Some(v) = lookup(token) {
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x;
            }
            hit += 1;
        }
    }
    if hit > 0 {
        for a in acc.iter_mut() {
            *a /= hit as f64;
        }
    }
    (acc, tokens.len() - hit)
}
