//! Small-sample estimators used by the Monte-Carlo harnesses.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (`n − 1` denominator).
pub fn variance(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return invalid("variance needs at least two samples");
    }
    let m = mean(xs);
    Ok(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn standard_error_of_mean(xs: &[f64]) -> Result<f64> {
    Ok((variance(xs)? / xs.len() as f64).sqrt())
}

/// Jackknife standard error of the unbiased variance estimator.
pub fn jackknife_variance_se(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < 3 {
        return invalid("jackknife of the variance needs at least three samples");
    }
    let m = mean(xs);
    let c: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let s1: f64 = c.iter().sum();
    let s2: f64 = c.iter().map(|x| x * x).sum();
    let nf = n as f64;
    let loo: Vec<f64> = c
        .iter()
        .map(|x| {
            let mi = (s1 - x) / (nf - 1.0);
            ((s2 - x * x) - (nf - 1.0) * mi * mi) / (nf - 2.0)
        })
        .collect();
    let lm = mean(&loo);
    let ss: f64 = loo.iter().map(|v| (v - lm).powi(2)).sum();
    Ok(((nf - 1.0) / nf * ss).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub se_mean: f64,
    pub variance: f64,
    pub se_variance: f64,
}

impl SampleSummary {
    pub fn of(xs: &[f64]) -> Result<Self> {
        Ok(Self {
            n: xs.len(),
            mean: mean(xs),
            se_mean: standard_error_of_mean(xs)?,
            variance: variance(xs)?,
            se_variance: jackknife_variance_se(xs)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("linear fit needs two equally long series of length >= 2");
    }
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("linear fit needs at least two distinct x values");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return invalid("KS test needs nonempty samples");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    Ok((d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_and_jackknife() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        assert!((variance(&xs).unwrap() - 7.0).abs() < 1e-12);
        // brute-force leave-one-out
        let loo: Vec<f64> = (0..4)
            .map(|i| {
                let v: Vec<f64> = xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| *x).collect();
                variance(&v).unwrap()
            })
            .collect();
        let m = mean(&loo);
        let expect = (0.75 * loo.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt();
        assert!((jackknife_variance_se(&xs).unwrap() - expect).abs() < 1e-12);
        assert!(variance(&[1.0]).is_err());
    }

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.intercept - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_extremes() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..500).map(|i| i as f64 + 0.5).collect();
        assert!(ks_two_sample(&a, &b).unwrap().1 > 0.5);
        let c: Vec<f64> = (0..500).map(|i| i as f64 + 400.0).collect();
        assert!(ks_two_sample(&a, &c).unwrap().1 < 1e-6);
    }
}
