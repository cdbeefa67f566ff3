//! Statistical kernel: Spearman correlation with average ranks, a two-group
//! one-way ANOVA (equivalent to a pooled two-sided t-test), the regularized
//! incomplete beta function behind its p-values, trapezoidal learning-curve
//! AUC, and small summary helpers.

use crate::error::{Error, Result};

/// Scores for one curve point, one value per repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSample {
    pub values: Vec<f64>,
}

impl ScoreSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("score sample is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("score sample holds a non-finite value".into()));
        }
        Ok(Self { values })
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by N).
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Average ranks, 1-based; ties receive the mean of the ranks they span.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j share the value; mean of 1-based ranks i+1..=j+1
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    cov / (vx * vy).sqrt()
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Input(format!(
            "spearman length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Input("spearman needs at least 2 observations".into()));
    }
    if xs.iter().any(|v| !v.is_finite()) || ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("spearman inputs must be finite".into()));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::UndefinedCorrelation("first"));
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(Error::UndefinedCorrelation("second"));
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

/// One-way ANOVA for exactly two groups.
///
/// Returns `(F, p)` with `df1 = 1`, `df2 = n_a + n_b - 2`. Element-wise
/// identical groups give `(0, 1)`; zero within-group variance with distinct
/// means gives `(inf, 0)` so the rank procedure stays total.
pub fn anova_f(group_a: &ScoreSample, group_b: &ScoreSample) -> Result<(f64, f64)> {
    let a = &group_a.values;
    let b = &group_b.values;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Input("anova groups need at least 2 values each".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let grand = (na * ma + nb * mb) / (na + nb);
    let ssb = na * (ma - grand).powi(2) + nb * (mb - grand).powi(2);
    let ssw = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>()
        + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    let df1 = 1.0;
    let df2 = na + nb - 2.0;
    let msb = ssb / df1;
    let msw = ssw / df2;
    if msw == 0.0 {
        return if msb == 0.0 {
            Ok((0.0, 1.0))
        } else {
            Ok((f64::INFINITY, 0.0))
        };
    }
    let f = msb / msw;
    Ok((f, f_survival(f, df1, df2)?))
}

/// P(F_{df1,df2} >= f) via the regularized incomplete beta function.
pub fn f_survival(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if f <= 0.0 {
        return Ok(1.0);
    }
    reg_inc_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))
}

/// ln Gamma(x) for x > 0, Lanczos approximation (g = 7, 9 coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEF.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const BETA_MAX_ITER: usize = 300;
const BETA_EPS: f64 = 1e-15;

/// Continued fraction for the incomplete beta (Lentz's algorithm).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;
        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_EPS {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )))
}

/// Regularized incomplete beta I_x(a, b), absolute error <= 1e-10.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Input(format!("reg_inc_beta needs a, b > 0, got {a}, {b}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Input(format!("reg_inc_beta needs x in [0,1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    // symmetry transform keeps the continued fraction in its fast region
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(a, b, x)? / a)
    } else {
        Ok(1.0 - front * beta_cf(b, a, 1.0 - x)? / b)
    }
}

/// Normalized trapezoidal area under a learning curve: the trapezoid sum
/// divided by the fraction span, so a constant curve has AUC equal to that
/// constant.
pub fn trapezoid_auc(fractions: &[f64], scores: &[f64]) -> Result<f64> {
    if fractions.len() < 2 {
        return Err(Error::Input("trapezoid_auc needs at least 2 points".into()));
    }
    if fractions.len() != scores.len() {
        return Err(Error::Input(format!(
            "trapezoid_auc length mismatch: {} fractions vs {} scores",
            fractions.len(),
            scores.len()
        )));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("fractions must be strictly increasing".into()));
    }
    let mut area = 0.0;
    for i in 0..fractions.len() - 1 {
        area += (fractions[i + 1] - fractions[i]) * (scores[i] + scores[i + 1]) / 2.0;
    }
    Ok(area / (fractions[fractions.len() - 1] - fractions[0]))
}

/// Fraction of exact matches between predictions and truth.
pub fn accuracy<T: PartialEq>(predictions: &[T], truth: &[T]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != truth.len() {
        return Err(Error::Input(format!(
            "accuracy needs equal nonempty lengths, got {} vs {}",
            predictions.len(),
            truth.len()
        )));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(values: &[f64]) -> ScoreSample {
        ScoreSample::new(values.to_vec()).unwrap()
    }

    #[test]
    fn spearman_monotone_and_reversed() {
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        // independent reference: ranks [1, 2.5, 2.5] vs [1, 2, 3]
        let rho = spearman(&[1.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(rho, 0.8660254, epsilon = 1e-6);
    }

    #[test]
    fn spearman_rejects_constant_input() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation("first"))
        ));
        assert!(matches!(
            spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]),
            Err(Error::UndefinedCorrelation("second"))
        ));
    }

    #[test]
    fn anova_identical_groups() {
        let g = sample(&[1.0, 1.0, 1.0]);
        let (f, p) = anova_f(&g, &g).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn anova_hand_computed_f() {
        // SSB = 1.5, SSW = 4, df = (1, 4) -> F = 1.5
        let (f, p) = anova_f(&sample(&[1.0, 2.0, 3.0]), &sample(&[2.0, 3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(f, 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(p, 0.288, epsilon = 0.005);
    }

    #[test]
    fn anova_perfect_separation_gives_p_zero() {
        let (f, p) = anova_f(&sample(&[1.0, 1.0]), &sample(&[2.0, 2.0])).unwrap();
        assert!(f.is_infinite());
        assert_eq!(p, 0.0);
    }

    #[test]
    fn anova_rejects_small_groups() {
        assert!(anova_f(&sample(&[1.0]), &sample(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn anova_p_decreases_as_means_separate() {
        // fixed within-group shape, sweep the mean offset
        let base = [-0.02f64, -0.01, 0.0, 0.01, 0.02, 0.0];
        let mut last_p = 1.0 + 1e-12;
        for step in 0..20 {
            let delta = step as f64 * 0.01;
            let a: Vec<f64> = base.to_vec();
            let b: Vec<f64> = base.iter().map(|x| x + delta).collect();
            let (_, p) = anova_f(&sample(&a), &sample(&b)).unwrap();
            assert!(p <= last_p + 1e-12, "p rose from {last_p} to {p} at delta {delta}");
            last_p = p;
        }
    }

    #[test]
    fn reg_inc_beta_endpoints_and_symmetry() {
        assert_eq!(reg_inc_beta(2.0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(2.0, 3.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(reg_inc_beta(1.0, 1.0, 0.5).unwrap(), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(reg_inc_beta(2.0, 2.0, 0.5).unwrap(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn reg_inc_beta_complement_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = rng.gen_range(0.1..20.0);
            let b = rng.gen_range(0.1..20.0);
            let x = rng.gen_range(0.0..1.0);
            let lhs = reg_inc_beta(a, b, x).unwrap();
            let rhs = 1.0 - reg_inc_beta(b, a, 1.0 - x).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn reg_inc_beta_closed_form_uniform() {
        // I_x(1, 1) = x
        for &x in &[0.1, 0.25, 0.7, 0.99] {
            assert_abs_diff_eq!(reg_inc_beta(1.0, 1.0, x).unwrap(), x, epsilon = 1e-12);
        }
        // I_x(1, b) = 1 - (1-x)^b
        assert_abs_diff_eq!(
            reg_inc_beta(1.0, 4.0, 0.3).unwrap(),
            1.0 - 0.7f64.powi(4),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..10u64 {
            let fact: u64 = (1..n).product();
            assert_abs_diff_eq!(ln_gamma(n as f64), (fact as f64).ln(), epsilon = 1e-10);
        }
        // Gamma(1/2) = sqrt(pi)
        assert_abs_diff_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn auc_constant_curve_is_the_constant() {
        let auc = trapezoid_auc(&[0.3, 0.475, 0.65, 0.825, 1.0], &[0.4; 5]).unwrap();
        assert_abs_diff_eq!(auc, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn auc_triangle_and_hand_sum() {
        assert_abs_diff_eq!(trapezoid_auc(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.5);
        // (0.21 + 0.2625) / 0.7
        assert_abs_diff_eq!(
            trapezoid_auc(&[0.3, 0.65, 1.0], &[0.5, 0.7, 0.8]).unwrap(),
            0.675,
            epsilon = 1e-12
        );
    }

    #[test]
    fn auc_rejects_bad_input() {
        assert!(trapezoid_auc(&[0.5], &[1.0]).is_err());
        assert!(trapezoid_auc(&[0.5, 0.5], &[1.0, 1.0]).is_err());
        assert!(trapezoid_auc(&[0.6, 0.5], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn accuracy_counts_exact_matches() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert_eq!(accuracy(&["a", "b", "c", "d"], &["a", "b", "c", "x"]).unwrap(), 0.75);
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    proptest! {
        #[test]
        fn spearman_is_symmetric(xs in proptest::collection::vec(-100.0f64..100.0, 3..20)) {
            let ys: Vec<f64> = xs.iter().rev().map(|x| x * 0.5 + 1.0).collect();
            let a = spearman(&xs, &ys);
            let b = spearman(&ys, &xs);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one side errored"),
            }
        }

        #[test]
        fn spearman_invariant_under_increasing_transform(
            xs in proptest::collection::vec(-10.0f64..10.0, 3..15),
            ys in proptest::collection::vec(-10.0f64..10.0, 15..16),
        ) {
            let ys = &ys[..xs.len().min(ys.len())];
            let xs = &xs[..ys.len()];
            if let Ok(base) = spearman(xs, ys) {
                // exp is strictly increasing
                let tx: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
                let t = spearman(&tx, ys).unwrap();
                prop_assert!((base - t).abs() < 1e-9);
            }
        }

        #[test]
        fn auc_invariant_under_affine_fraction_rescale(
            scores in proptest::collection::vec(0.0f64..1.0, 3..8),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let n = scores.len();
            let fractions: Vec<f64> = (0..n).map(|i| 0.3 + 0.7 * i as f64 / (n - 1) as f64).collect();
            let rescaled: Vec<f64> = fractions.iter().map(|f| f * scale + shift).collect();
            let a = trapezoid_auc(&fractions, &scores).unwrap();
            let b = trapezoid_auc(&rescaled, &scores).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
