//! RBF kernel ridge regression and its thresholding classifier variant.
//!
//! Fitting solves `(K + lambda I) alpha = y` with `K_ij = exp(-gamma
//! ||x_i - x_j||^2)` by Cholesky decomposition; `K` is positive
//! semi-definite, so the shifted system is positive definite for any
//! `lambda > 0`.

use crate::error::{Error, Result};

/// Fitted RBF kernel ridge regressor.
#[derive(Debug, Clone)]
pub struct KernelRidge {
    centers: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    gamma: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// In-place Cholesky factorization of a symmetric matrix stored row-major;
/// the lower triangle is overwritten with `L` such that `L L^T = A`.
fn cholesky(a: &mut [f64], n: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(Error::Numerical(format!(
                        "kernel matrix is not positive definite at pivot {i} (value {sum})"
                    )));
                }
                a[i * n + j] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    Ok(())
}

/// Solves `L L^T x = y` given the Cholesky factor in the lower triangle.
fn cholesky_solve(l: &[f64], n: usize, y: &[f64]) -> Vec<f64> {
    let mut x = y.to_vec();
    // forward: L z = y
    for i in 0..n {
        for k in 0..i {
            x[i] = x[i] - l[i * n + k] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    // backward: L^T x = z
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] = x[i] - l[k * n + i] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

pub fn fit_kernel_ridge(
    train: &[(Vec<f64>, f64)],
    gamma: f64,
    lambda: f64,
) -> Result<KernelRidge> {
    if train.is_empty() {
        return Err(Error::Input("kernel ridge needs a nonempty training set".into()));
    }
    if gamma <= 0.0 || lambda <= 0.0 {
        return Err(Error::Config(format!(
            "kernel ridge needs gamma > 0 and lambda > 0, got gamma={gamma}, lambda={lambda}"
        )));
    }
    let n = train.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = (-gamma * sq_dist(&train[i].0, &train[j].0)).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += lambda;
    }
    cholesky(&mut k, n)?;
    let y: Vec<f64> = train.iter().map(|(_, t)| *t).collect();
    let alpha = cholesky_solve(&k, n, &y);
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numerical("kernel ridge solve produced non-finite coefficients".into()));
    }
    Ok(KernelRidge {
        centers: train.iter().map(|(x, _)| x.clone()).collect(),
        alpha,
        gamma,
    })
}

impl KernelRidge {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.alpha)
            .map(|(c, a)| a * (-self.gamma * sq_dist(c, x)).exp())
            .sum()
    }
}

/// Classifier variant: regression on labels coded as -1/+1, thresholded at
/// zero; an exact zero maps to label 1.
#[derive(Debug, Clone)]
pub struct KernelRidgeClassifier {
    inner: KernelRidge,
}

pub fn fit_kernel_ridge_classifier(
    train: &[(Vec<f64>, u8)],
    gamma: f64,
    lambda: f64,
) -> Result<KernelRidgeClassifier> {
    let coded: Vec<(Vec<f64>, f64)> = train
        .iter()
        .map(|(x, y)| (x.clone(), if *y == 1 { 1.0 } else { -1.0 }))
        .collect();
    Ok(KernelRidgeClassifier {
        inner: fit_kernel_ridge(&coded, gamma, lambda)?,
    })
}

impl KernelRidgeClassifier {
    pub fn classify(&self, x: &[f64]) -> u8 {
        u8::from(self.inner.predict(x) >= 0.0)
    }
}
