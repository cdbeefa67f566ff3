//! L2-regularized logistic regression fitted by minibatch gradient descent.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{Optimizer, TrainConfig};
use crate::error::{Error, Result};

/// Fitted linear classifier: label 1 iff `w . x + b >= 0`.
#[derive(Debug, Clone)]
pub struct LogisticClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticClassifier {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn classify(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) >= 0.0)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean L2-regularized logistic loss (bias unregularized).
fn loss(train: &[(Vec<f64>, u8)], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = train.len() as f64;
    let mut total = 0.0;
    for (x, y) in train {
        let z = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
        // log(1 + exp(-m)) with m = z for y=1, -z for y=0, stable form
        let m = if *y == 1 { z } else { -z };
        total += if m > 0.0 {
            (-m).exp().ln_1p()
        } else {
            -m + m.exp().ln_1p()
        };
    }
    total / n + 0.5 * l2 * w.iter().map(|wi| wi * wi).sum::<f64>()
}

/// Fits from zero initialization with minibatch gradient descent; epoch
/// shuffling is drawn from `seed`, so repeated fits are identical.
pub fn fit_logistic(
    train: &[(Vec<f64>, u8)],
    l2: f64,
    config: &TrainConfig,
    seed: u64,
) -> Result<LogisticClassifier> {
    if train.is_empty() {
        return Err(Error::Input("logistic regression needs a nonempty training set".into()));
    }
    if l2 < 0.0 {
        return Err(Error::Config(format!("l2 must be >= 0, got {l2}")));
    }
    config.validate()?;
    let dim = train[0].0.len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut vel_w = vec![0.0; dim];
    let mut vel_b = 0.0;
    let momentum = match config.optimizer {
        Optimizer::Sgd => 0.0,
        Optimizer::Momentum => 0.9,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grad_w = vec![0.0; dim];

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for &i in batch {
                let (x, y) = &train[i];
                let z = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
                let err = sigmoid(z) - f64::from(*y);
                for (g, xi) in grad_w.iter_mut().zip(x) {
                    *g += err * xi;
                }
                grad_b += err;
            }
            let inv = 1.0 / batch.len() as f64;
            for ((wi, g), v) in w.iter_mut().zip(&grad_w).zip(vel_w.iter_mut()) {
                let step = g * inv + l2 * *wi;
                *v = momentum * *v + step;
                *wi -= config.learning_rate * *v;
            }
            vel_b = momentum * vel_b + grad_b * inv;
            b -= config.learning_rate * vel_b;
        }
        let j = loss(train, &w, b, l2);
        if !j.is_finite() {
            return Err(Error::Divergence {
                model: "logistic",
                detail: format!(
                    "l2={l2}, learning_rate={}, epochs={}, batch_size={}",
                    config.learning_rate, config.epochs, config.batch_size
                ),
            });
        }
    }
    Ok(LogisticClassifier { weights: w, bias: b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::accuracy;

    fn config(lr: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            epochs,
            optimizer: Optimizer::Sgd,
            batch_size: 32,
            fallback_to_constant: false,
        }
    }

    fn separable_1d() -> Vec<(Vec<f64>, u8)> {
        vec![
            (vec![-1.0], 0),
            (vec![-2.0], 0),
            (vec![1.0], 1),
            (vec![2.0], 1),
        ]
    }

    #[test]
    fn separable_data_reaches_perfect_training_accuracy() {
        let train = separable_1d();
        let clf = fit_logistic(&train, 0.0, &config(0.5, 200), 1).unwrap();
        let preds: Vec<u8> = train.iter().map(|(x, _)| clf.classify(x)).collect();
        let truth: Vec<u8> = train.iter().map(|(_, y)| *y).collect();
        assert_eq!(accuracy(&preds, &truth).unwrap(), 1.0);
    }

    #[test]
    fn single_class_degenerates_to_constant_prediction() {
        // zero-sum features keep the weight gradient at exactly zero, so
        // the fit is bias-only and predicts the lone class everywhere
        let train = vec![(vec![1.0], 0), (vec![-1.0], 0), (vec![0.0], 0)];
        let clf = fit_logistic(&train, 0.0, &config(0.1, 50), 1).unwrap();
        assert_eq!(clf.weights[0], 0.0);
        assert!(clf.bias < 0.0);
        for x in [-5.0, 0.0, 5.0] {
            assert_eq!(clf.classify(&[x]), 0);
        }
    }

    #[test]
    fn huge_l2_shrinks_to_majority_class() {
        // lr * l2 must stay below 2 for the ridge step to contract
        let train = vec![
            (vec![-1.0], 0),
            (vec![1.0], 1),
            (vec![2.0], 1),
            (vec![3.0], 1),
        ];
        let clf = fit_logistic(&train, 1e6, &config(1e-7, 2000), 1).unwrap();
        assert!(clf.weights[0].abs() < 1e-3, "weights {:?}", clf.weights);
        // bias alone predicts the majority class everywhere
        for x in [-10.0, 0.0, 10.0] {
            assert_eq!(clf.classify(&[x]), 1);
        }
    }

    #[test]
    fn fitting_is_deterministic_under_seed() {
        let train = separable_1d();
        let a = fit_logistic(&train, 1e-3, &config(0.1, 30), 9).unwrap();
        let b = fit_logistic(&train, 1e-3, &config(0.1, 30), 9).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }

    #[test]
    fn blowup_learning_rate_reports_divergence() {
        // lr * l2 >> 2 makes the ridge step oscillate with geometric growth
        let train = vec![(vec![1.0], 0), (vec![-1.0], 1)];
        let cfg = config(1e10, 60);
        match fit_logistic(&train, 1.0, &cfg, 1) {
            Err(Error::Divergence { model, detail }) => {
                assert_eq!(model, "logistic");
                assert!(detail.contains("learning_rate"));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn momentum_also_converges() {
        let cfg = TrainConfig {
            learning_rate: 0.2,
            epochs: 100,
            optimizer: Optimizer::Momentum,
            batch_size: 2,
            fallback_to_constant: false,
        };
        let train = separable_1d();
        let clf = fit_logistic(&train, 0.0, &cfg, 3).unwrap();
        let preds: Vec<u8> = train.iter().map(|(x, _)| clf.classify(x)).collect();
        let truth: Vec<u8> = train.iter().map(|(_, y)| *y).collect();
        assert_eq!(accuracy(&preds, &truth).unwrap(), 1.0);
    }
}
