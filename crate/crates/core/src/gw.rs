//! Critical Galton-Watson processes: simulation, exact survival
//! probabilities by pgf iteration, and Monte Carlo total-progeny tails.

use rand::Rng;

use crate::error::{Error, Result};
use crate::offspring::OffspringDist;
use crate::sampling::{Count, SamplingPolicy};

/// Generation sizes of one Galton-Watson run.
///
/// Sizes are stored up to and including the first zero; later generations
/// are implicitly zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GwTrace {
    sizes: Vec<Count>,
    generations: u32,
    approximate: bool,
}

impl GwTrace {
    pub fn sizes(&self) -> &[Count] {
        &self.sizes
    }

    pub fn generations(&self) -> u32 {
        self.generations
    }

    pub fn size_at(&self, i: u32) -> Count {
        self.sizes.get(i as usize).copied().unwrap_or(0)
    }

    /// `S_n = Z_0 + ... + Z_n`.
    pub fn total_progeny(&self) -> Count {
        self.sizes.iter().sum()
    }

    pub fn survived(&self) -> bool {
        self.size_at(self.generations) > 0
    }

    pub fn approximate(&self) -> bool {
        self.approximate
    }
}

fn require_critical(dist: &OffspringDist) -> Result<()> {
    if dist.is_critical() {
        Ok(())
    } else {
        Err(Error::NotCritical { mean: dist.mean() })
    }
}

pub fn simulate_gw<R: Rng + ?Sized>(
    dist: &OffspringDist,
    n_gen: u32,
    z0: Count,
    rng: &mut R,
    policy: &SamplingPolicy,
) -> Result<GwTrace> {
    require_critical(dist)?;
    if z0 == 0 {
        return Err(Error::InvalidParameter("z0 must be at least 1".into()));
    }
    let mut sizes = Vec::with_capacity(16);
    sizes.push(z0);
    let mut approximate = false;
    let mut z = z0;
    for _ in 0..n_gen {
        let draw = dist.sample_sum(rng, z, policy);
        approximate |= draw.approximate;
        z = draw.value;
        sizes.push(z);
        if z == 0 {
            break;
        }
    }
    Ok(GwTrace {
        sizes,
        generations: n_gen,
        approximate,
    })
}

/// `P(Z_n > 0)` from `Z_0 = 1`, with a bound on accumulated rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalExact {
    pub value: f64,
    pub error_bound: f64,
}

/// Iterates `q_n = 1 - f(1 - q_{n-1})` from `q_0 = 1`.
///
/// The complementary form avoids the cancellation in `1 - f^n(0)` once the
/// survival probability is small. For a critical law `f' <= 1` on `[0, 1]`,
/// so per-step rounding errors add up rather than amplify; the returned bound
/// is that sum.
pub fn survival_exact_with_error(dist: &OffspringDist, n: u64) -> Result<SurvivalExact> {
    require_critical(dist)?;
    let mut q = 1.0f64;
    let mut err = 0.0f64;
    for _ in 0..n {
        q = dist.pgf_complement(q);
        err += 8.0 * f64::EPSILON * q;
    }
    Ok(SurvivalExact {
        value: q,
        error_bound: err,
    })
}

pub fn pgf_survival_exact(dist: &OffspringDist, n: u64) -> Result<f64> {
    survival_exact_with_error(dist, n).map(|s| s.value)
}

/// `P(Z_i > 0)` for `i = 0..=n`.
pub fn survival_curve(dist: &OffspringDist, n: u64) -> Result<Vec<f64>> {
    require_critical(dist)?;
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut q = 1.0f64;
    out.push(q);
    for _ in 0..n {
        q = dist.pgf_complement(q);
        out.push(q);
    }
    Ok(out)
}

/// Hit counts for `{S_n >= gamma n^2}` over a batch of runs from `Z_0 = 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TailCounts {
    pub attempts: u64,
    /// Runs with `Z_n > 0`.
    pub accepted: u64,
    /// Per gamma: accepted runs with `S_n >= gamma n^2`.
    pub conditional_hits: Vec<u64>,
    /// Per gamma: all runs with `S_n >= gamma n^2`.
    pub unconditional_hits: Vec<u64>,
    pub approximate: bool,
}

impl TailCounts {
    pub fn merge(&mut self, other: &TailCounts) {
        if self.conditional_hits.is_empty() {
            self.conditional_hits = vec![0; other.conditional_hits.len()];
            self.unconditional_hits = vec![0; other.unconditional_hits.len()];
        }
        self.attempts += other.attempts;
        self.accepted += other.accepted;
        for (a, b) in self.conditional_hits.iter_mut().zip(&other.conditional_hits) {
            *a += b;
        }
        for (a, b) in self.unconditional_hits.iter_mut().zip(&other.unconditional_hits) {
            *a += b;
        }
        self.approximate |= other.approximate;
    }
}

/// Estimate of `P(S_n >= gamma n^2 | Z_n > 0)` plus the unconditional
/// quantity `n P(S_n >= gamma n^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub gamma: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub accepted: u64,
    pub attempts: u64,
    pub scaled_unconditional: f64,
    pub scaled_unconditional_se: f64,
}

/// Minimum number of surviving runs for a tail estimate.
pub const MIN_ACCEPTED: u64 = 100;

/// Simulate `reps` runs to generation `n` and count progeny exceedances.
pub fn progeny_tail_counts<R: Rng + ?Sized>(
    dist: &OffspringDist,
    n: u32,
    gammas: &[f64],
    reps: u64,
    rng: &mut R,
    policy: &SamplingPolicy,
) -> Result<TailCounts> {
    require_critical(dist)?;
    if gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    let n2 = (n as f64) * (n as f64);
    let thresholds: Vec<f64> = gammas.iter().map(|g| g * n2).collect();
    let mut counts = TailCounts {
        conditional_hits: vec![0; gammas.len()],
        unconditional_hits: vec![0; gammas.len()],
        ..TailCounts::default()
    };
    for _ in 0..reps {
        let mut z: Count = 1;
        let mut s: Count = 1;
        for _ in 0..n {
            let draw = dist.sample_sum(rng, z, policy);
            counts.approximate |= draw.approximate;
            z = draw.value;
            s += z;
            if z == 0 {
                break;
            }
        }
        counts.attempts += 1;
        let survived = z > 0;
        counts.accepted += u64::from(survived);
        let sf = s as f64;
        for (i, t) in thresholds.iter().enumerate() {
            if sf >= *t {
                counts.unconditional_hits[i] += 1;
                counts.conditional_hits[i] += u64::from(survived);
            }
        }
    }
    Ok(counts)
}

pub fn tail_estimates(counts: &TailCounts, n: u32, gammas: &[f64]) -> Result<Vec<TailEstimate>> {
    if counts.accepted < MIN_ACCEPTED {
        return Err(Error::TooFewAccepted {
            accepted: counts.accepted,
            needed: MIN_ACCEPTED,
        });
    }
    let acc = counts.accepted as f64;
    let att = counts.attempts as f64;
    Ok(gammas
        .iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let p = counts.conditional_hits[i] as f64 / acc;
            let pu = counts.unconditional_hits[i] as f64 / att;
            TailEstimate {
                gamma,
                estimate: p,
                std_error: (p * (1.0 - p) / acc).sqrt(),
                accepted: counts.accepted,
                attempts: counts.attempts,
                scaled_unconditional: n as f64 * pu,
                scaled_unconditional_se: n as f64 * (pu * (1.0 - pu) / att).sqrt(),
            }
        })
        .collect())
}

/// Conditioning on `Z_n > 0` is done by rejection.
pub fn total_progeny_tail_mc<R: Rng + ?Sized>(
    dist: &OffspringDist,
    n: u32,
    gamma: f64,
    reps: u64,
    rng: &mut R,
    policy: &SamplingPolicy,
) -> Result<TailEstimate> {
    let counts = progeny_tail_counts(dist, n, &[gamma], reps, rng, policy)?;
    Ok(tail_estimates(&counts, n, &[gamma])?[0])
}

/// Kolmogorov's constant `2 / sigma^2`.
pub fn kolmogorov_limit(dist: &OffspringDist) -> f64 {
    2.0 / dist.variance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::DistKind;
    use crate::rng::rng_from_seed;

    fn critical_builtins() -> Vec<OffspringDist> {
        let d = 3;
        vec![
            OffspringDist::make(DistKind::Deterministic, d, None).unwrap().thin_by_degree(d).unwrap(),
            OffspringDist::make(DistKind::Poisson, d, None).unwrap().thin_by_degree(d).unwrap(),
            OffspringDist::make(DistKind::Geometric, d, None).unwrap().thin_by_degree(d).unwrap(),
            OffspringDist::geometric(1.0).unwrap(),
        ]
    }

    #[test]
    fn deterministic_line() {
        let mut rng = rng_from_seed(0);
        let t = simulate_gw(&OffspringDist::point_mass(1), 10, 1, &mut rng, &SamplingPolicy::default()).unwrap();
        assert!(t.sizes().iter().all(|&z| z == 1));
        assert_eq!(t.total_progeny(), 11);
        assert!(t.survived());
    }

    #[test]
    fn zero_generations() {
        let mut rng = rng_from_seed(0);
        for dist in critical_builtins() {
            let t = simulate_gw(&dist, 0, 7, &mut rng, &SamplingPolicy::default()).unwrap();
            assert_eq!(t.total_progeny(), 7);
            assert!(t.survived());
        }
    }

    #[test]
    fn rejects_supercritical() {
        let mut rng = rng_from_seed(0);
        let d = OffspringDist::point_mass(3);
        assert!(matches!(
            simulate_gw(&d, 3, 1, &mut rng, &SamplingPolicy::default()),
            Err(Error::NotCritical { .. })
        ));
        assert!(pgf_survival_exact(&d, 3).is_err());
    }

    #[test]
    fn trace_invariants() {
        let mut rng = rng_from_seed(4);
        let pol = SamplingPolicy::default();
        for dist in critical_builtins() {
            for _ in 0..2000 {
                let t = simulate_gw(&dist, 30, 2, &mut rng, &pol).unwrap();
                assert_eq!(t.sizes()[0], 2);
                if let Some(p) = t.sizes().iter().position(|&z| z == 0) {
                    assert_eq!(p, t.sizes().len() - 1);
                    assert!((p as u32..=30).all(|i| t.size_at(i) == 0));
                }
                assert_eq!(t.total_progeny(), (0..=30).map(|i| t.size_at(i)).sum());
            }
        }
    }

    #[test]
    fn martingale_mean() {
        let mut rng = rng_from_seed(12);
        let pol = SamplingPolicy::default();
        let dist = critical_builtins().remove(0);
        let reps = 100_000;
        let n = 50;
        let zs: Vec<f64> = (0..reps)
            .map(|_| simulate_gw(&dist, n, 1, &mut rng, &pol).unwrap().size_at(n) as f64)
            .collect();
        let mean = zs.iter().sum::<f64>() / reps as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn survival_closed_form_geometric() {
        // f(s) = 1/(2-s) iterates to P(Z_n > 0) = 1/(n+1)
        let geo = OffspringDist::geometric(1.0).unwrap();
        for n in [0u64, 1, 5, 9, 100] {
            let q = pgf_survival_exact(&geo, n).unwrap();
            assert!((q - 1.0 / (n as f64 + 1.0)).abs() < 1e-12, "n={n}");
        }
        assert!((pgf_survival_exact(&geo, 9).unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn survival_is_nonincreasing_and_kolmogorov() {
        for dist in critical_builtins() {
            let c = survival_curve(&dist, 10_000).unwrap();
            assert_eq!(c[0], 1.0);
            assert!(c.windows(2).all(|w| w[1] <= w[0]));
            let limit = kolmogorov_limit(&dist);
            let scaled = 10_000.0 * c[10_000];
            assert!((scaled - limit).abs() / limit < 0.05, "{dist}: {scaled} vs {limit}");
        }
        let poi = OffspringDist::poisson(1.0).unwrap();
        let s = survival_exact_with_error(&poi, 10_000).unwrap();
        assert!((1e4 * s.value - 2.0).abs() < 0.04);
        assert!(s.error_bound < 1e-12);
    }

    #[test]
    fn tail_small_gamma_and_line() {
        let mut rng = rng_from_seed(3);
        let pol = SamplingPolicy::default();
        let geo = OffspringDist::geometric(1.0).unwrap();
        let e = total_progeny_tail_mc(&geo, 100, 1e-9, 20_000, &mut rng, &pol).unwrap();
        assert_eq!(e.estimate, 1.0);
        let line = OffspringDist::point_mass(1);
        let e = total_progeny_tail_mc(&line, 10, 2.0, 200, &mut rng, &pol).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.accepted, 200);
    }

    #[test]
    fn tail_needs_enough_survivors() {
        let mut rng = rng_from_seed(3);
        let geo = OffspringDist::geometric(1.0).unwrap();
        let r = total_progeny_tail_mc(&geo, 1000, 1.0, 1000, &mut rng, &SamplingPolicy::default());
        assert!(matches!(r, Err(Error::TooFewAccepted { .. })));
    }
}
