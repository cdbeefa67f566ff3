//! k-nearest-neighbor classifier under Euclidean distance.

use crate::error::{Error, Result};

/// Fitted k-NN classifier; keeps its training data.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    points: Vec<(Vec<f64>, u8)>,
    k: usize,
}

/// Stores the training set for majority voting over the `k` nearest
/// neighbors. Distance ties break toward the lower training index.
pub fn fit_knn(train: &[(Vec<f64>, u8)], k: usize) -> Result<KnnClassifier> {
    if train.is_empty() {
        return Err(Error::Input("knn needs a nonempty training set".into()));
    }
    if k == 0 || k % 2 == 0 {
        return Err(Error::Config(format!("knn k must be a positive odd integer, got {k}")));
    }
    if k > train.len() {
        return Err(Error::Config(format!(
            "knn k = {k} exceeds training size {}",
            train.len()
        )));
    }
    Ok(KnnClassifier {
        points: train.to_vec(),
        k,
    })
}

impl KnnClassifier {
    pub fn classify(&self, x: &[f64]) -> u8 {
        let mut dists: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, (p, _))| {
                let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                (d2, i)
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
        let ones = dists[..self.k]
            .iter()
            .filter(|&&(_, i)| self.points[i].1 == 1)
            .count();
        u8::from(2 * ones > self.k)
    }
}
