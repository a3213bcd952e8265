//! Summary statistics, binomial confidence intervals and two-sample
//! comparisons of discrete laws.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(samples: &[f64]) -> Result<Summary> {
    if samples.len() < 2 {
        return Err(Error::NoSamples(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let variance = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(Summary {
        n,
        mean,
        variance,
        std_error: (variance / n as f64).sqrt(),
        min,
        max,
    })
}

/// Summary over the non-censored entries (`None` marks censoring).
pub fn summarize_censored(samples: &[Option<f64>]) -> Result<Summary> {
    let kept: Vec<f64> = samples.iter().flatten().copied().collect();
    if kept.is_empty() && !samples.is_empty() {
        return Err(Error::NoSamples("all samples censored".into()));
    }
    summarize(&kept)
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // the endpoints at 0 and n are exact; the formula leaves rounding residue
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub fn histogram<K: Ord + Clone>(samples: &[K]) -> BTreeMap<K, u64> {
    let mut h = BTreeMap::new();
    for s in samples {
        *h.entry(s.clone()).or_insert(0) += 1;
    }
    h
}

/// Total variation distance between two empirical laws.
pub fn tv_distance<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    if na == 0 || nb == 0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let mut acc = 0.0;
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        acc += (ca as f64 / na as f64 - cb as f64 / nb as f64).abs();
    }
    for (k, &cb) in b {
        if !a.contains_key(k) {
            acc += cb as f64 / nb as f64;
        }
    }
    acc / 2.0
}

/// Two-sample comparison after pooling sparse categories.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub bins: usize,
    /// TV distance between the binned laws.
    pub tv: f64,
    /// TV distance between the raw laws.
    pub raw_tv: f64,
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Compare two empirical laws on bins of adjacent categories (in key order)
/// holding at least `min_frac` of the pooled sample each, followed by a
/// chi-square homogeneity test on the same bins.
pub fn compare_laws<K: Ord + Clone>(
    a: &BTreeMap<K, u64>,
    b: &BTreeMap<K, u64>,
    min_frac: f64,
) -> Result<Comparison> {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    if na == 0 || nb == 0 {
        return Err(Error::NoSamples("empty sample in comparison".into()));
    }
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let need = min_frac * (na + nb) as f64;
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let mut cur = (0u64, 0u64);
    for k in keys {
        cur.0 += a.get(k).copied().unwrap_or(0);
        cur.1 += b.get(k).copied().unwrap_or(0);
        if (cur.0 + cur.1) as f64 >= need {
            bins.push(cur);
            cur = (0, 0);
        }
    }
    if cur.0 + cur.1 > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += cur.0;
                last.1 += cur.1;
            }
            None => bins.push(cur),
        }
    }
    let (fa, fb) = (na as f64, nb as f64);
    let tv = bins
        .iter()
        .map(|&(x, y)| (x as f64 / fa - y as f64 / fb).abs())
        .sum::<f64>()
        / 2.0;
    let total = fa + fb;
    let mut chi2 = 0.0;
    for &(x, y) in &bins {
        let pooled = (x + y) as f64 / total;
        let ea = pooled * fa;
        let eb = pooled * fb;
        chi2 += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let df = bins.len().saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sf(chi2)
    };
    Ok(Comparison {
        bins: bins.len(),
        tv,
        raw_tv: tv_distance(a, b),
        chi2,
        df,
        p_value,
    })
}

/// Finite-size coefficient `(mean - r) / ln ln r`; needs `r > e`.
pub fn c_hat(mean: f64, r: f64) -> Result<f64> {
    if !(r > std::f64::consts::E) {
        return Err(Error::InvalidParameter(format!("ln ln r undefined or nonpositive at r = {r}")));
    }
    Ok((mean - r) / r.ln().ln())
}

/// Lower and upper ends of the desk-scale bracket for the coefficient.
pub fn c_hat_bracket() -> (f64, f64) {
    (2.0 / 2f64.ln() * 0.3, 2.0 / 1.5f64.ln() * 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample() {
        let s = summarize(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.variance, 0.0);
        assert_eq!((s.min, s.max), (5.0, 5.0));
    }

    #[test]
    fn too_few_or_censored() {
        assert!(summarize(&[1.0]).is_err());
        assert!(matches!(summarize_censored(&[None, None]), Err(Error::NoSamples(_))));
        let s = summarize_censored(&[Some(1.0), None, Some(3.0)]).unwrap();
        assert_eq!(s.n, 2);
        assert_eq!(s.mean, 2.0);
    }

    #[test]
    fn wilson_zero_of_hundred() {
        let (lo, hi) = wilson(0, 100, Z_95);
        assert_eq!(lo, 0.0);
        // z^2 / (n + z^2)
        let z2 = Z_95 * Z_95;
        assert!((hi - z2 / (100.0 + z2)).abs() < 1e-15);
        assert!((0.036..0.037).contains(&hi), "{hi}");
    }

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(1u64, 10u64), (50, 100), (99, 100), (3, 1_000_000)] {
            let (lo, hi) = wilson(k, n, Z_99);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
    }

    #[test]
    fn tv_examples() {
        let a = histogram(&[0, 0, 1, 1]);
        let b = histogram(&[1, 1, 2, 2]);
        assert!((tv_distance(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(tv_distance(&a, &a), 0.0);
    }

    #[test]
    fn compare_identical_and_disjoint() {
        let a = histogram(&(0..1000).map(|i| i % 7).collect::<Vec<_>>());
        let c = compare_laws(&a, &a, 0.02).unwrap();
        assert_eq!(c.tv, 0.0);
        assert!(c.p_value > 0.999);
        let b = histogram(&(0..1000).map(|i| 10 + i % 7).collect::<Vec<_>>());
        let c = compare_laws(&a, &b, 0.02).unwrap();
        assert!((c.tv - 1.0).abs() < 1e-12);
        assert!(c.p_value < 1e-10);
    }

    #[test]
    fn bins_respect_minimum() {
        let a = histogram(&(0..500u32).collect::<Vec<_>>());
        let c = compare_laws(&a, &a, 0.1).unwrap();
        assert!(c.bins <= 10 && c.bins >= 5);
    }

    #[test]
    fn coefficient() {
        let r = 16.0f64;
        assert!((c_hat(r + 2.0, r).unwrap() - 2.0 / r.ln().ln()).abs() < 1e-15);
        assert!(c_hat(3.0, 2.0).is_err());
    }
}
