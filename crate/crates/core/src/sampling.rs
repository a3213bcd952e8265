//! Exact and approximate count sampling shared by every engine.
//!
//! Counts are `u128`. Binomial draws are exact (BTPE/BINV from `rand_distr`)
//! while `n` stays below [`SamplingPolicy::exact_limit`]; above it a
//! moment-matched Gaussian is used, rounded and clamped to `[0, n]`, and the
//! draw is flagged approximate.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

pub type Count = u128;

/// Default threshold below which every sampling path is exact.
pub const DEFAULT_EXACT_LIMIT: Count = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPolicy {
    pub exact_limit: Count,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            exact_limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

impl SamplingPolicy {
    /// Policy for strict-exact runs: exact paths for anything that fits `u64`.
    pub fn strict() -> Self {
        SamplingPolicy {
            exact_limit: u64::MAX as Count,
        }
    }

    pub fn with_limit(exact_limit: Count) -> Self {
        SamplingPolicy { exact_limit }
    }
}

/// A sampled count together with the approximation flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Draw {
    pub value: Count,
    pub approximate: bool,
}

impl Draw {
    pub fn exact(value: Count) -> Self {
        Draw {
            value,
            approximate: false,
        }
    }
}

/// Round a Gaussian with the given moments to a count in `[0, max]`.
pub fn gaussian_count<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64, max: Option<Count>) -> Count {
    let z: f64 = StandardNormal.sample(rng);
    let x = (mean + var.max(0.0).sqrt() * z).round();
    let v = if x <= 0.0 { 0 } else { x as Count };
    match max {
        Some(m) => v.min(m),
        None => v,
    }
}

pub fn binomial<R: Rng + ?Sized>(rng: &mut R, n: Count, p: f64, policy: &SamplingPolicy) -> Draw {
    if n == 0 || p <= 0.0 {
        return Draw::exact(0);
    }
    if p >= 1.0 {
        return Draw::exact(n);
    }
    if n <= policy.exact_limit && n <= u64::MAX as Count {
        let b = Binomial::new(n as u64, p).expect("probability checked above");
        return Draw::exact(b.sample(rng) as Count);
    }
    let nf = n as f64;
    Draw {
        value: gaussian_count(rng, nf * p, nf * p * (1.0 - p), Some(n)),
        approximate: true,
    }
}

/// Split `n` uniformly over `out.len()` cells by a chain of binomials.
/// Cells are overwritten. Returns whether any link of the chain was approximate.
pub fn multinomial_uniform<R: Rng + ?Sized>(
    rng: &mut R,
    n: Count,
    out: &mut [Count],
    policy: &SamplingPolicy,
) -> bool {
    let m = out.len();
    let mut remaining = n;
    let mut approx = false;
    for (i, cell) in out.iter_mut().enumerate() {
        if i + 1 == m {
            *cell = remaining;
            break;
        }
        let draw = binomial(rng, remaining, 1.0 / (m - i) as f64, policy);
        approx |= draw.approximate;
        *cell = draw.value;
        remaining -= draw.value;
    }
    approx
}

/// Split `n` by arbitrary probabilities (summing to one) via a binomial chain.
pub fn multinomial<R: Rng + ?Sized>(
    rng: &mut R,
    n: Count,
    probs: &[f64],
    out: &mut [Count],
    policy: &SamplingPolicy,
) -> bool {
    debug_assert_eq!(probs.len(), out.len());
    let mut remaining = n;
    let mut mass = 1.0f64;
    let mut approx = false;
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (i, (&p, cell)) in probs.iter().zip(out.iter_mut()).enumerate() {
        if i >= last {
            *cell = if i == last { remaining } else { 0 };
            if i == last {
                remaining = 0;
            }
            continue;
        }
        if remaining == 0 || p <= 0.0 {
            *cell = 0;
            mass -= p;
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = binomial(rng, remaining, q, policy);
        approx |= draw.approximate;
        *cell = draw.value;
        remaining -= draw.value;
        mass -= p;
    }
    approx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policy = SamplingPolicy::with_limit(100);
        let mut out = [0; 3];
        for n in [0u128, 1, 7, 99, 100, 101, 10_000_000, 1u128 << 90] {
            multinomial_uniform(&mut rng, n, &mut out, &policy);
            assert_eq!(out.iter().sum::<Count>(), n);
        }
        let mut out = [0; 4];
        for n in [0u128, 5, 1000] {
            multinomial(&mut rng, n, &[0.1, 0.0, 0.6, 0.3], &mut out, &policy);
            assert_eq!(out.iter().sum::<Count>(), n);
            assert_eq!(out[1], 0);
        }
    }

    #[test]
    fn binomial_flags_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let policy = SamplingPolicy::with_limit(10);
        assert!(!binomial(&mut rng, 10, 0.5, &policy).approximate);
        let d = binomial(&mut rng, 11, 0.5, &policy);
        assert!(d.approximate && d.value <= 11);
        assert_eq!(binomial(&mut rng, 1 << 100, 1.0, &policy), Draw::exact(1 << 100));
    }

    #[test]
    fn binomial_mean_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let policy = SamplingPolicy::default();
        let reps = 20_000;
        let total: f64 = (0..reps)
            .map(|_| binomial(&mut rng, 30, 0.3, &policy).value as f64)
            .sum();
        let mean = total / reps as f64;
        let se = (30.0 * 0.3 * 0.7 / reps as f64).sqrt();
        assert!((mean - 9.0).abs() < 4.0 * se, "mean {mean}");
    }
}
