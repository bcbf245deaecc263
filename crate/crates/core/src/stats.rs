//! Correlations, t-test p-values and least-squares primitives.
//!
//! p-values come from the regularized incomplete beta function, evaluated
//! with a Lentz continued fraction. No external statistics crate is used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub coefficient: f64,
    pub p_value: f64,
    pub n: usize,
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

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Tail of the Stirling series: `ln_gamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2]`.
fn stirling_correction(z: f64) -> f64 {
    let z2 = z * z;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0) / z2) / z2) / z2) / z
}

/// `ln B(a, b)`, accurate when one argument is large.
fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, large) = if a < b { (a, b) } else { (b, a) };
    if large < 10.0 {
        return ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    }
    // ln G(large) - ln G(large + small) via Stirling, avoiding cancellation.
    let sum = large + small;
    let diff = (large - 0.5) * (-small / sum).ln_1p() - small * sum.ln() + small
        + stirling_correction(large)
        - stirling_correction(sum);
    if small < 10.0 {
        ln_gamma(small) + diff
    } else {
        // both large
        let ln_gs = (small - 0.5) * small.ln() - small
            + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + stirling_correction(small);
        ln_gs + diff
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 100_000;
    const EPS: f64 = 1e-16;
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
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
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
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
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
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)` given both `x` and `y = 1 - x`, so callers can pass an
/// exactly computed complement.
fn beta_reg_xy(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_x = if x > 0.5 { (-y).ln_1p() } else { x.ln() };
    let ln_y = if y > 0.5 { (-x).ln_1p() } else { y.ln() };
    let ln_front = a * ln_x + b * ln_y - ln_beta(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, y) / b
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    beta_reg_xy(a, b, x, 1.0 - x)
}

/// Two-sided p-value of a Student t statistic.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    beta_reg_xy(df / 2.0, 0.5, x, y).clamp(0.0, 1.0)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value".into()));
    }
    if is_constant(x) || is_constant(y) {
        return Err(Error::ConstantVector);
    }
    Ok(())
}

fn correlation_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / ((1.0 - r) * (1.0 + r))).sqrt();
    student_t_two_sided(t, df)
}

/// Sample Pearson correlation with a two-sided t-test (n - 2 df).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok(CorrelationResult {
        coefficient: r,
        p_value: correlation_p(r, x.len()),
        n: x.len(),
    })
}

/// Mid-ranks (1-based); tied values share the average of their positions.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_pair(x, y)?;
    pearson(&mid_ranks(x), &mid_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    pub intercept_p: f64,
    pub slope_p: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

fn coefficient_p(estimate: f64, se: f64, df: f64) -> f64 {
    if se == 0.0 {
        return if estimate == 0.0 { 1.0 } else { 0.0 };
    }
    student_t_two_sided(estimate / se, df)
}

/// Simple least squares `y = b0 + b1 x` with coefficient t-tests.
pub fn ols_simple(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 points, got {n}")));
    }
    if is_constant(x) {
        return Err(Error::ConstantVector);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 0.0 };
    let df = (n - 2) as f64;
    let sigma2 = sse / df;
    let slope_se = (sigma2 / sxx).sqrt();
    let intercept_se = (sigma2 * (1.0 / n as f64 + mx * mx / sxx)).sqrt();
    Ok(OlsFit {
        intercept,
        slope,
        r2,
        intercept_se,
        slope_se,
        intercept_p: coefficient_p(intercept, intercept_se, df),
        slope_p: coefficient_p(slope, slope_se, df),
        n,
    })
}

/// Coefficient of determination of `pred` against `y`; `None` when `y` is constant.
pub fn r2_score(y: &[f64], pred: &[f64]) -> Option<f64> {
    if y.is_empty() || y.len() != pred.len() {
        return None;
    }
    let my = mean(y);
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sst == 0.0 {
        return None;
    }
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    Some(1.0 - sse / sst)
}

/// R^2 of regressing `y` on `xs` with an intercept.
///
/// Regressors are orthogonalized by modified Gram-Schmidt on centered
/// columns; regressors that are numerically dependent on earlier ones are
/// dropped, so rank-deficient designs are handled.
pub fn multiple_r2(y: &[f64], xs: &[&[f64]]) -> Result<f64> {
    let n = y.len();
    for x in xs {
        if x.len() != n {
            return Err(Error::LengthMismatch(x.len(), n));
        }
    }
    let center = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|a| a - m).collect::<Vec<f64>>()
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(xs.len());
    for x in xs {
        let mut q = center(x);
        let original = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if original == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = q.iter().zip(b).map(|(a, c)| a * c).sum();
                for (qi, bi) in q.iter_mut().zip(b) {
                    *qi -= dot * bi;
                }
            }
        }
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * original {
            continue;
        }
        q.iter_mut().for_each(|v| *v /= norm);
        basis.push(q);
    }
    let yc = center(y);
    let sst: f64 = yc.iter().map(|v| v * v).sum();
    if sst == 0.0 {
        return Err(Error::ConstantVector);
    }
    let mut resid = yc;
    for _ in 0..2 {
        for b in &basis {
            let dot: f64 = resid.iter().zip(b).map(|(a, c)| a * c).sum();
            for (ri, bi) in resid.iter_mut().zip(b) {
                *ri -= dot * bi;
            }
        }
    }
    let sse: f64 = resid.iter().map(|v| v * v).sum();
    Ok((1.0 - sse / sst).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn incomplete_beta_reference_values() {
        // Reference values from scipy.special.betainc.
        assert!(rel(beta_reg(2.5, 3.5, 0.3), 0.296_752_989_295_666_46) < 1e-12);
        assert!(rel(beta_reg(0.5, 0.5, 0.9), 0.795_167_235_300_866_5) < 1e-12);
        assert!(rel(beta_reg(50.0, 0.5, 0.99), 0.317_304_397_874_197_3) < 1e-10);
        assert!(rel(beta_reg(1.0, 1.0, 0.37), 0.37) < 1e-14);
        assert_eq!(beta_reg(2.0, 3.0, 0.0), 0.0);
        assert_eq!(beta_reg(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn t_distribution_reference_values() {
        // Reference values from scipy.stats.t.sf.
        assert!(rel(student_t_two_sided(2.0, 10.0), 0.073_388_034_770_740_39) < 1e-12);
        assert!(rel(student_t_two_sided(0.5, 1.0), 0.704_832_764_699_133_6) < 1e-12);
        assert!(rel(student_t_two_sided(3.5, 1000.0), 0.000_485_774_345_967_831_9) < 1e-10);
        assert!(rel(student_t_two_sided(5.0, 1e7 - 2.0), 5.733_128_075_027_856e-7) < 1e-9);
        assert!(rel(student_t_two_sided(1.2, 1e7 - 2.0), 0.230_139_368_872_260_1) < 1e-10);
        assert_eq!(student_t_two_sided(0.0, 5.0), 1.0);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            fact *= n as f64;
            assert!((ln_gamma(n as f64 + 1.0) - fact.ln()).abs() < 1e-12, "n={n}");
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().coefficient - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap().coefficient + 1.0).abs() < 1e-15);
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert!((r.coefficient - 0.6).abs() < 1e-15);
        assert!((r.p_value - 0.4).abs() < 1e-12);
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch(2, 1))));
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ConstantVector)));
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]).unwrap().coefficient - 1.0).abs() < 1e-15);
        let r = spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
        // 1 - 6 * sum(d^2) / (n (n^2 - 1)) with sum(d^2) = 6
        assert!((r.coefficient - (1.0 - 6.0 * 6.0 / 24.0)).abs() < 1e-15);
        assert!(matches!(spearman(&[1.0, 2.0, 3.0, 4.0], &[5.0; 4]), Err(Error::ConstantVector)));
    }

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(mid_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn ols_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let fit = ols_simple(&x, &[0.5, 1.0, 1.5, 2.0]).unwrap();
        assert!(fit.intercept.abs() < 1e-15 && (fit.slope - 0.5).abs() < 1e-15);
        assert_eq!(fit.r2, 1.0);

        let fit = ols_simple(&x, &[3.0; 4]).unwrap();
        assert_eq!((fit.slope, fit.r2), (0.0, 0.0));

        let fit = ols_simple(&[0.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-15);
        assert!((fit.intercept - 7.0 / 6.0).abs() < 1e-15);
        assert!((fit.r2 - 0.75).abs() < 1e-15);
        // scipy.stats.linregress
        assert!((fit.slope_se - 0.288_675_134_594_812_9).abs() < 1e-12);
        assert!((fit.intercept_se - 0.372_677_996_249_965).abs() < 1e-12);
        assert!((fit.slope_p - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(ols_simple(&[1.0; 3], &[1.0, 2.0, 3.0]), Err(Error::ConstantVector)));
    }

    #[test]
    fn multiple_r2_handles_collinearity() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 7.0];
        let b = [2.0, 1.0, 0.0, 3.0, 1.0, 2.0];
        let y: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 2.0 * p - q + 1.0).collect();
        assert!((multiple_r2(&y, &[&a, &b]).unwrap() - 1.0).abs() < 1e-12);
        assert!((multiple_r2(&y, &[&a, &a, &b]).unwrap() - 1.0).abs() < 1e-12);
        let single = ols_simple(&a, &b).unwrap().r2;
        assert!((multiple_r2(&b, &[&a]).unwrap() - single).abs() < 1e-12);
    }

    fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance((x, y) in vec_strategy(), a in 0.1f64..10.0, b in -50.0f64..50.0, c in 0.1f64..10.0, d in -50.0f64..50.0) {
            prop_assume!(!is_constant(&x) && !is_constant(&y));
            let r = pearson(&x, &y).unwrap();
            prop_assert!(r.coefficient.abs() <= 1.0);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let yt: Vec<f64> = y.iter().map(|v| c * v + d).collect();
            let rt = pearson(&xt, &yt).unwrap();
            prop_assert!((r.coefficient - rt.coefficient).abs() < 1e-9);
        }

        #[test]
        fn spearman_monotone_invariance((x, y) in vec_strategy()) {
            prop_assume!(!is_constant(&x) && !is_constant(&y));
            let r = spearman(&x, &y).unwrap();
            let xt: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
            let yt: Vec<f64> = y.iter().map(|v| (v / 10.0).exp()).collect();
            let rt = spearman(&xt, &yt).unwrap();
            prop_assert!((r.coefficient - rt.coefficient).abs() < 1e-12);
        }

        #[test]
        fn ols_residuals_are_orthogonal((x, y) in vec_strategy()) {
            prop_assume!(!is_constant(&x));
            let fit = ols_simple(&x, &y).unwrap();
            let resid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - fit.predict(*a)).collect();
            let scale = y.iter().chain(&x).fold(1.0f64, |m, v| m.max(v.abs()));
            let n = x.len() as f64;
            prop_assert!(resid.iter().sum::<f64>().abs() < 1e-9 * n * scale * scale);
            let dot: f64 = resid.iter().zip(&x).map(|(r, a)| r * a).sum();
            prop_assert!(dot.abs() < 1e-9 * n * scale * scale);
        }

        #[test]
        fn p_value_decreases_with_t(t1 in 0.0f64..20.0, dt in 0.0f64..5.0, df in 1.0f64..500.0) {
            prop_assert!(student_t_two_sided(t1 + dt, df) <= student_t_two_sided(t1, df) + 1e-15);
        }
    }
}
