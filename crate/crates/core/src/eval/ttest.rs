use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    pub mean_difference: f64,
    pub variance: f64,
}

/// Paired t-test over `k` repeated train/test splits with the variance
/// inflated by `n_test / n_train` to account for overlapping training sets:
/// `t = mean / sqrt((1/k + n_test/n_train) · s²)`, two-sided, `k − 1` dof.
pub fn corrected_paired_ttest(diffs: &[f64], n_train: f64, n_test: f64) -> Result<TTestResult, EvalError> {
    let k = diffs.len();
    if k < 2 {
        return Err(EvalError::TooFewRepetitions(k));
    }
    if !(n_train > 0.0 && n_test > 0.0) {
        return Err(EvalError::InvalidInput(format!("n_train {n_train} and n_test {n_test} must be positive")));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(EvalError::InvalidInput("differences must be finite".into()));
    }
    let kf = k as f64;
    let mean = diffs.iter().sum::<f64>() / kf;
    let variance = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (kf - 1.0);
    let df = k - 1;
    if variance == 0.0 {
        if mean == 0.0 {
            return Ok(TTestResult { t_statistic: 0.0, p_value: 1.0, degrees_of_freedom: df, mean_difference: 0.0, variance });
        }
        return Err(EvalError::ZeroVariance { t: f64::INFINITY.copysign(mean), mean });
    }
    let t = mean / ((1.0 / kf + n_test / n_train) * variance).sqrt();
    Ok(TTestResult {
        t_statistic: t,
        p_value: student_t_two_sided_p(t, df as f64),
        degrees_of_freedom: df,
        mean_difference: mean,
        variance,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, about 15 significant digits).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// `I_x(a, b)` by the modified Lentz continued fraction, using the symmetry
/// `I_x(a, b) = 1 − I_{1−x}(b, a)` where the fraction converges slowly.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;
    let nudge = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / nudge(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / nudge(1.0 + even * d);
        c = nudge(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / nudge(1.0 + odd * d);
        c = nudge(1.0 + odd / c);
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(2, 3) = 6x² − 8x³ + 3x⁴
        assert!((regularized_incomplete_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
        let x: f64 = 0.4;
        let exact = 6.0 * x.powi(2) - 8.0 * x.powi(3) + 3.0 * x.powi(4);
        assert!((regularized_incomplete_beta(2.0, 3.0, x) - exact).abs() < 1e-14);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn one_degree_of_freedom_is_cauchy() {
        // p = 1 − 2·atan(|t|)/π
        for t in [0.3, 1.0, 4.2] {
            let exact = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_sided_p(t, 1.0) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_differences() {
        let r = corrected_paired_ttest(&[0.0; 5], 100.0, 10.0).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (0.0, 1.0));
        match corrected_paired_ttest(&[0.1, 0.1], 100.0, 10.0) {
            Err(EvalError::ZeroVariance { t, .. }) => assert_eq!(t, f64::INFINITY),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(corrected_paired_ttest(&[0.1], 1.0, 1.0).unwrap_err(), EvalError::TooFewRepetitions(1));
        assert!(corrected_paired_ttest(&[0.1, 0.2], 0.0, 1.0).is_err());
    }

    #[test]
    fn alternating_differences_match_hand_computation() {
        let diffs: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.05 } else { -0.05 }).collect();
        let r = corrected_paired_ttest(&diffs, 1000.0, 100.0).unwrap();
        // mean 0, so t = 0 regardless of the correction
        assert!(r.t_statistic.abs() < 1e-15);
        let shifted: Vec<f64> = diffs.iter().map(|d| d + 0.02).collect();
        let r = corrected_paired_ttest(&shifted, 1000.0, 100.0).unwrap();
        // s² = 10·0.05²/9, t = 0.02 / sqrt((0.1 + 0.1)·s²)
        let s2: f64 = 10.0 * 0.0025 / 9.0;
        assert!((r.t_statistic - 0.02 / (0.2 * s2).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn correction_shrinks_t() {
        let diffs = [0.03, 0.05, 0.01, 0.04, 0.02];
        let mut last = f64::INFINITY;
        for ratio in [0.0001, 0.01, 0.1, 1.0, 10.0] {
            let t = corrected_paired_ttest(&diffs, 1.0, ratio).unwrap().t_statistic;
            assert!(t < last);
            last = t;
        }
    }
}
