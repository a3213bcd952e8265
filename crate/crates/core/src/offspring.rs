//! Offspring laws of the branching random walk.
//!
//! A distribution is immutable once built and can be shared across threads;
//! every sampler takes a caller-owned RNG.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::sampling::{gaussian_count, multinomial, Count, Draw, SamplingPolicy};

/// Tolerance on the mean of user supplied tables.
pub const MEAN_TOLERANCE: f64 = 1e-9;
/// Tolerance on the total mass of a table.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistKind {
    Deterministic,
    Poisson,
    Geometric,
    Table,
}

impl DistKind {
    pub fn tag(self) -> &'static str {
        match self {
            DistKind::Deterministic => "det",
            DistKind::Poisson => "poisson",
            DistKind::Geometric => "geom",
            DistKind::Table => "table",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Point mass at `j`.
    Point(u64),
    Poisson(f64),
    /// `mu(j) = (1/(m+1)) (m/(m+1))^j`, parameterised by its mean `m`.
    Geometric(f64),
    /// Finite support; `pmf[j]` is the mass at `j`.
    Table { pmf: Vec<f64>, cdf: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDist {
    shape: Shape,
    mean: f64,
    variance: f64,
}

fn table_moments(pmf: &[f64]) -> (f64, f64) {
    let mean: f64 = pmf.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let second: f64 = pmf.iter().enumerate().map(|(j, p)| (j as f64).powi(2) * p).sum();
    (mean, second - mean * mean)
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    pmf.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

impl OffspringDist {
    /// Build a distribution of the given kind with mean `d`.
    ///
    /// Tables are given as `(j, mu(j))` pairs and must have mean `d` within
    /// [`MEAN_TOLERANCE`].
    pub fn make(kind: DistKind, d: u32, table: Option<&[(u64, f64)]>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("d must be at least 2, got {d}")));
        }
        let dist = match kind {
            DistKind::Deterministic => Self::point_mass(d as u64),
            DistKind::Poisson => Self::poisson(d as f64)?,
            DistKind::Geometric => Self::geometric(d as f64)?,
            DistKind::Table => {
                let entries = table.ok_or_else(|| {
                    Error::InvalidDistribution("table kind needs a pmf".into())
                })?;
                Self::table(entries)?
            }
        };
        if (dist.mean - d as f64).abs() > MEAN_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "mean {} differs from d = {d}",
                dist.mean
            )));
        }
        Ok(dist)
    }

    pub fn point_mass(j: u64) -> Self {
        OffspringDist {
            shape: Shape::Point(j),
            mean: j as f64,
            variance: 0.0,
        }
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidDistribution(format!("poisson mean {lambda}")));
        }
        Ok(OffspringDist {
            shape: Shape::Poisson(lambda),
            mean: lambda,
            variance: lambda,
        })
    }

    pub fn geometric(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::InvalidDistribution(format!("geometric mean {mean}")));
        }
        Ok(OffspringDist {
            shape: Shape::Geometric(mean),
            mean,
            variance: mean * (1.0 + mean),
        })
    }

    /// A finite table from `(j, mu(j))` pairs; repeated `j` accumulate.
    pub fn table(entries: &[(u64, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("empty table".into()));
        }
        let max_j = entries.iter().map(|e| e.0).max().unwrap_or(0);
        if max_j > 1 << 20 {
            return Err(Error::InvalidDistribution(format!("support up to {max_j} is too large")));
        }
        let mut pmf = vec![0.0; max_j as usize + 1];
        for &(j, p) in entries {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidDistribution(format!("mu({j}) = {p} is not a probability")));
            }
            pmf[j as usize] += p;
        }
        Self::from_pmf(pmf)
    }

    fn from_pmf(mut pmf: Vec<f64>) -> Result<Self> {
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        while pmf.len() > 1 && pmf[pmf.len() - 1] == 0.0 {
            pmf.pop();
        }
        let (mean, variance) = table_moments(&pmf);
        if !variance.is_finite() {
            return Err(Error::InvalidDistribution("infinite variance".into()));
        }
        let cdf = cumulative(&pmf);
        Ok(OffspringDist {
            shape: Shape::Table { pmf, cdf },
            mean,
            variance: variance.max(0.0),
        })
    }

    /// Parse `det:3`, `poisson:3`, `geom:3` or `table:0=0.5,6=0.5` and check
    /// that the mean equals `d`.
    pub fn from_spec(spec: &str, d: u32) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("distribution spec {spec:?} lacks ':'")))?;
        let kind = match kind.trim() {
            "det" | "deterministic" => DistKind::Deterministic,
            "poisson" => DistKind::Poisson,
            "geom" | "geometric" => DistKind::Geometric,
            "table" => DistKind::Table,
            other => return Err(Error::Parse(format!("unknown distribution kind {other:?}"))),
        };
        if kind == DistKind::Table {
            let entries = rest
                .split(',')
                .map(|item| {
                    let (j, p) = item
                        .split_once('=')
                        .ok_or_else(|| Error::Parse(format!("table entry {item:?} lacks '='")))?;
                    let j: u64 = j.trim().parse().map_err(|_| Error::Parse(format!("bad index {j:?}")))?;
                    let p: f64 = p.trim().parse().map_err(|_| Error::Parse(format!("bad mass {p:?}")))?;
                    Ok((j, p))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::make(kind, d, Some(&entries));
        }
        let param: u32 = rest
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad distribution parameter {rest:?}")))?;
        if param != d {
            return Err(Error::InvalidDistribution(format!(
                "{spec} has mean {param} but d = {d}"
            )));
        }
        Self::make(kind, d, None)
    }

    pub fn kind(&self) -> DistKind {
        match self.shape {
            Shape::Point(_) => DistKind::Deterministic,
            Shape::Poisson(_) => DistKind::Poisson,
            Shape::Geometric(_) => DistKind::Geometric,
            Shape::Table { .. } => DistKind::Table,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn is_critical(&self) -> bool {
        (self.mean - 1.0).abs() <= 1e-12
    }

    /// `mu(j)`.
    pub fn pmf(&self, j: u64) -> f64 {
        match &self.shape {
            Shape::Point(k) => f64::from(u8::from(*k == j)),
            Shape::Poisson(l) => {
                if *l == 0.0 {
                    return f64::from(u8::from(j == 0));
                }
                let lg = j as f64 * l.ln() - l - ln_factorial(j);
                lg.exp()
            }
            Shape::Geometric(m) => {
                let q = m / (m + 1.0);
                q.powf(j as f64) / (m + 1.0)
            }
            Shape::Table { pmf, .. } => pmf.get(j as usize).copied().unwrap_or(0.0),
        }
    }

    /// The probability generating function `f(s) = sum mu(j) s^j`.
    pub fn pgf(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Point(j) => s.powi(*j as i32),
            Shape::Poisson(l) => (l * (s - 1.0)).exp(),
            Shape::Geometric(m) => 1.0 / (1.0 + m * (1.0 - s)),
            Shape::Table { pmf, .. } => pmf.iter().rev().fold(0.0, |acc, p| acc * s + p),
        }
    }

    /// `1 - f(1 - q)` computed without cancellation for small `q`.
    pub fn pgf_complement(&self, q: f64) -> f64 {
        // 1 - (1-q)^j
        let tail = |j: u64| -> f64 {
            if j == 0 {
                0.0
            } else {
                -((j as f64) * (-q).ln_1p()).exp_m1()
            }
        };
        match &self.shape {
            Shape::Point(j) => tail(*j),
            Shape::Poisson(l) => -(-l * q).exp_m1(),
            Shape::Geometric(m) => m * q / (1.0 + m * q),
            Shape::Table { pmf, .. } => pmf
                .iter()
                .enumerate()
                .map(|(j, p)| p * tail(j as u64))
                .sum(),
        }
    }

    /// `1 - E[d^{-L}]`: the probability that a particle has at least one child
    /// stepping away from a fixed target.
    pub fn kappa(&self, d: u32) -> f64 {
        1.0 - self.pgf(1.0 / d as f64)
    }

    /// Law of `Binomial(L, p)` with `L` drawn from this distribution.
    pub fn thin(&self, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("thinning probability {p}")));
        }
        if p == 1.0 {
            return Ok(self.clone());
        }
        self.thin_with_mean(p, self.mean * p)
    }

    /// Thinning by `1/d`; the mean is computed as `mean / d` so that a mean-`d`
    /// law thins to mean exactly one.
    pub fn thin_by_degree(&self, d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        if d == 1 {
            return Ok(self.clone());
        }
        self.thin_with_mean(1.0 / d as f64, self.mean / d as f64)
    }

    fn thin_with_mean(&self, p: f64, mean: f64) -> Result<Self> {
        let variance = p * p * self.variance + p * (1.0 - p) * self.mean;
        let shape = match &self.shape {
            Shape::Poisson(_) => Shape::Poisson(mean),
            Shape::Geometric(_) => Shape::Geometric(mean),
            Shape::Point(0) => Shape::Point(0),
            Shape::Point(j) => {
                let mut pmf = vec![0.0; *j as usize + 1];
                pmf[*j as usize] = 1.0;
                thinned_table(&pmf, p)
            }
            Shape::Table { pmf, .. } => thinned_table(pmf, p),
        };
        Ok(OffspringDist {
            shape,
            mean,
            variance,
        })
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.shape {
            Shape::Point(j) => *j,
            Shape::Poisson(l) => poisson_draw(rng, *l),
            Shape::Geometric(m) => geometric_draw(rng, *m),
            Shape::Table { cdf, .. } => {
                let u: f64 = rng.random();
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
            }
        }
    }

    /// Sum of `n` independent draws.
    ///
    /// Exact for `n <= policy.exact_limit` (closed-form additivity where it
    /// exists, a multinomial over the support for tables); beyond that a
    /// Gaussian with matched mean and variance, flagged approximate.
    /// Point masses are exact for every `n`.
    pub fn sample_sum<R: Rng + ?Sized>(&self, rng: &mut R, n: Count, policy: &SamplingPolicy) -> Draw {
        if n == 0 {
            return Draw::exact(0);
        }
        if let Shape::Point(j) = self.shape {
            return match n.checked_mul(j as Count) {
                Some(v) => Draw::exact(v),
                None => Draw {
                    value: Count::MAX,
                    approximate: true,
                },
            };
        }
        if n > policy.exact_limit {
            let nf = n as f64;
            return Draw {
                value: gaussian_count(rng, nf * self.mean, nf * self.variance, None),
                approximate: true,
            };
        }
        match &self.shape {
            Shape::Point(_) => unreachable!(),
            Shape::Poisson(l) => Draw::exact(poisson_draw(rng, l * n as f64) as Count),
            Shape::Geometric(m) => {
                if n <= 16 {
                    Draw::exact((0..n).map(|_| geometric_draw(rng, *m) as Count).sum())
                } else if *m == 0.0 {
                    Draw::exact(0)
                } else {
                    // negative binomial as a gamma mixture of Poissons
                    let g = Gamma::new(n as f64, *m).expect("positive shape and scale");
                    let lambda: f64 = g.sample(rng);
                    Draw::exact(poisson_draw(rng, lambda) as Count)
                }
            }
            Shape::Table { pmf, .. } => {
                if n <= 8 {
                    return Draw::exact((0..n).map(|_| self.sample(rng) as Count).sum());
                }
                let mut counts = vec![0; pmf.len()];
                let approx = multinomial(rng, n, pmf, &mut counts, policy);
                Draw {
                    value: counts.iter().enumerate().map(|(j, c)| j as Count * c).sum(),
                    approximate: approx,
                }
            }
        }
    }

    /// Spec string as accepted by [`OffspringDist::from_spec`] (tables print
    /// their nonzero masses).
    pub fn spec_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for OffspringDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Point(j) => write!(f, "det:{j}"),
            Shape::Poisson(l) => write!(f, "poisson:{l}"),
            Shape::Geometric(m) => write!(f, "geom:{m}"),
            Shape::Table { pmf, .. } => {
                write!(f, "table:")?;
                let mut first = true;
                for (j, p) in pmf.iter().enumerate().filter(|(_, p)| **p > 0.0) {
                    if !first {
                        write!(f, ",")?;
                    }
                    first = false;
                    write!(f, "{j}={p}")?;
                }
                Ok(())
            }
        }
    }
}

fn thinned_table(pmf: &[f64], p: f64) -> Shape {
    let mut out = vec![0.0; pmf.len()];
    for (j, &mass) in pmf.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (i, slot) in out.iter_mut().enumerate().take(j + 1) {
            *slot += mass * binomial_pmf(j as u64, i as u64, p);
        }
    }
    let cdf = cumulative(&out);
    Shape::Table { pmf: out, cdf }
}

fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    let ln_choose = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    let kp = if k == 0 { 0.0 } else { k as f64 * p.ln() };
    let kq = if n == k { 0.0 } else { (n - k) as f64 * (-p).ln_1p() };
    (ln_choose + kp + kq).exp()
}

fn poisson_draw<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda >= Poisson::<f64>::MAX_LAMBDA {
        return gaussian_count(rng, lambda, lambda, None).min(u64::MAX as Count) as u64;
    }
    let x: f64 = Poisson::new(lambda).expect("lambda in range").sample(rng);
    x as u64
}

fn geometric_draw<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let q = mean / (mean + 1.0);
    (u.ln() / q.ln()).floor() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn builtins(d: u32) -> Vec<OffspringDist> {
        vec![
            OffspringDist::make(DistKind::Deterministic, d, None).unwrap(),
            OffspringDist::make(DistKind::Poisson, d, None).unwrap(),
            OffspringDist::make(DistKind::Geometric, d, None).unwrap(),
            OffspringDist::make(DistKind::Table, 3, Some(&[(0, 0.5), (6, 0.5)])).unwrap(),
        ]
    }

    /// Moments by direct summation of the pmf, independent of stored values.
    fn summed_moments(dist: &OffspringDist) -> (f64, f64, f64) {
        let mut mass = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for j in 0..2000u64 {
            let p = dist.pmf(j);
            mass += p;
            m1 += j as f64 * p;
            m2 += (j as f64).powi(2) * p;
        }
        (mass, m1, m2 - m1 * m1)
    }

    #[test]
    fn make_dist_examples() {
        let det = OffspringDist::make(DistKind::Deterministic, 3, None).unwrap();
        assert_eq!(det.pmf(3), 1.0);
        assert_eq!(det.mean(), 3.0);
        assert_eq!(det.variance(), 0.0);

        let poi = OffspringDist::make(DistKind::Poisson, 3, None).unwrap();
        let (mass, m, v) = summed_moments(&poi);
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((m - 3.0).abs() < 1e-10 && (poi.mean() - 3.0).abs() < 1e-12);
        assert!((v - 3.0).abs() < 1e-10 && (poi.variance() - 3.0).abs() < 1e-12);

        let tab = OffspringDist::make(DistKind::Table, 3, Some(&[(0, 0.5), (6, 0.5)])).unwrap();
        assert_eq!(tab.mean(), 3.0);
        assert_eq!(tab.variance(), 9.0);
    }

    #[test]
    fn stored_moments_match_pmf() {
        for d in [2, 3, 4] {
            for dist in builtins(d) {
                let (mass, m, v) = summed_moments(&dist);
                assert!((mass - 1.0).abs() < 1e-12, "{dist}");
                assert!((m - dist.mean()).abs() < 1e-10, "{dist}");
                assert!((v - dist.variance()).abs() < 1e-9, "{dist}");
            }
        }
    }

    #[test]
    fn make_dist_rejects_bad_tables() {
        assert!(OffspringDist::make(DistKind::Table, 3, Some(&[(0, 0.5), (5, 0.5)])).is_err());
        assert!(OffspringDist::make(DistKind::Table, 3, Some(&[(0, -0.5), (6, 1.5)])).is_err());
        assert!(OffspringDist::make(DistKind::Table, 3, Some(&[(3, 0.9)])).is_err());
        assert!(OffspringDist::make(DistKind::Deterministic, 1, None).is_err());
        assert!(OffspringDist::make(DistKind::Table, 3, None).is_err());
        // decimal tables are accepted within the mean tolerance
        assert!(OffspringDist::make(DistKind::Table, 3, Some(&[(2, 0.3), (3, 0.4), (4, 0.3)])).is_ok());
    }

    #[test]
    fn spec_strings() {
        let d = OffspringDist::from_spec("table:0=0.5,6=0.5", 3).unwrap();
        assert_eq!(d.variance(), 9.0);
        assert_eq!(d.to_string(), "table:0=0.5,6=0.5");
        assert_eq!(OffspringDist::from_spec("det:3", 3).unwrap().to_string(), "det:3");
        assert_eq!(OffspringDist::from_spec("geom:4", 4).unwrap().kind(), DistKind::Geometric);
        assert!(OffspringDist::from_spec("poisson:3", 4).is_err());
        assert!(OffspringDist::from_spec("zipf:3", 3).is_err());
        assert!(OffspringDist::from_spec("det3", 3).is_err());
    }

    #[test]
    fn thin_examples() {
        let det = OffspringDist::make(DistKind::Deterministic, 3, None).unwrap();
        let b = det.thin_by_degree(3).unwrap();
        assert_eq!(b.mean(), 1.0);
        // Binomial(3, 1/3)
        let expect = [8.0 / 27.0, 12.0 / 27.0, 6.0 / 27.0, 1.0 / 27.0];
        for (j, e) in expect.iter().enumerate() {
            assert!((b.pmf(j as u64) - e).abs() < 1e-14);
        }
        assert!((b.variance() - 2.0 / 3.0).abs() < 1e-14);

        let poi = OffspringDist::make(DistKind::Poisson, 3, None).unwrap().thin_by_degree(3).unwrap();
        assert_eq!(poi.kind(), DistKind::Poisson);
        for s in [0.0, 0.3, 0.9] {
            assert!((poi.pgf(s) - (s - 1.0f64).exp()).abs() < 1e-14);
        }

        for dist in builtins(3) {
            assert_eq!(dist.thin(1.0).unwrap(), dist);
        }
        assert!(det.thin(0.0).is_err());
    }

    #[test]
    fn thinning_matches_pgf_composition() {
        for dist in builtins(3) {
            let t = dist.thin(0.4).unwrap();
            for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
                assert!((t.pgf(s) - dist.pgf(1.0 - 0.4 + 0.4 * s)).abs() < 1e-12, "{dist}");
            }
        }
    }

    #[test]
    fn thin_by_degree_is_critical() {
        for d in 2..=9 {
            for dist in builtins(d).into_iter().take(3) {
                let t = dist.thin_by_degree(d).unwrap();
                assert_eq!(t.mean(), 1.0, "{dist}");
                let (_, m, _) = summed_moments(&t);
                assert!((m - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pgf_examples_and_monotonicity() {
        let det = OffspringDist::point_mass(3);
        assert_eq!(det.pgf(0.5), 0.125);
        let geo = OffspringDist::geometric(1.0).unwrap();
        assert_eq!(geo.pgf(0.0), 0.5);
        assert!((geo.pmf(3) - 1.0 / 16.0).abs() < 1e-15);
        for dist in builtins(3).into_iter().chain([geo, det]) {
            assert!((dist.pgf(1.0) - 1.0).abs() < 1e-12);
            let mut last = dist.pgf(0.0);
            for i in 1..=1000 {
                let v = dist.pgf(i as f64 / 1000.0);
                assert!(v >= last, "{dist}");
                last = v;
            }
        }
    }

    #[test]
    fn pgf_complement_agrees() {
        for dist in builtins(3) {
            for q in [0.5, 0.1, 1e-3] {
                let direct = 1.0 - dist.pgf(1.0 - q);
                assert!((dist.pgf_complement(q) - direct).abs() < 1e-12);
            }
            // small q: complement ~ mean * q
            let q = 1e-12;
            assert!((dist.pgf_complement(q) / q - dist.mean()).abs() < 1e-6);
        }
    }

    #[test]
    fn kappa_examples() {
        let det = OffspringDist::point_mass(3);
        assert!((det.kappa(3) - 26.0 / 27.0).abs() < 1e-15);
        assert_eq!(OffspringDist::point_mass(0).kappa(3), 0.0);
        let poi = OffspringDist::poisson(3.0).unwrap();
        assert!((poi.kappa(3) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        for dist in builtins(3) {
            assert_eq!(dist.kappa(3), 1.0 - dist.pgf(1.0 / 3.0));
        }
    }

    #[test]
    fn sample_sum_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pol = SamplingPolicy::default();
        let det = OffspringDist::point_mass(3);
        assert_eq!(det.sample_sum(&mut rng, 5, &pol), Draw::exact(15));
        for dist in builtins(3) {
            assert_eq!(dist.sample_sum(&mut rng, 0, &pol), Draw::exact(0));
        }
        let big = det.sample_sum(&mut rng, 1 << 100, &pol);
        assert!(!big.approximate && big.value == 3 << 100);
        let poi = OffspringDist::poisson(3.0).unwrap();
        let d = poi.sample_sum(&mut rng, 2_000_000, &pol);
        assert!(d.approximate);
    }

    /// Empirical mean and variance of `sample_sum` within four standard errors.
    #[test]
    fn sample_sum_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let pol = SamplingPolicy::default();
        let reps = 100_000;
        for dist in builtins(3) {
            for n in [1u128, 10, 40] {
                let xs: Vec<f64> = (0..reps)
                    .map(|_| {
                        let d = dist.sample_sum(&mut rng, n, &pol);
                        assert!(!d.approximate);
                        d.value as f64
                    })
                    .collect();
                let mean = xs.iter().sum::<f64>() / reps as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
                let nf = n as f64;
                let se_mean = (nf * dist.variance() / reps as f64).sqrt();
                assert!((mean - nf * dist.mean()).abs() <= 4.0 * se_mean + 1e-12, "{dist} n={n} mean {mean}");
                if dist.variance() > 0.0 {
                    // standard error of the sample variance via the fourth moment
                    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / reps as f64;
                    let se_var = ((m4 - var * var) / reps as f64).sqrt();
                    assert!((var - nf * dist.variance()).abs() <= 4.0 * se_var, "{dist} n={n} var {var}");
                }
            }
        }
    }

    #[test]
    fn poisson_sum_of_ten() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pol = SamplingPolicy::default();
        let poi = OffspringDist::poisson(3.0).unwrap();
        let reps = 100_000;
        let mean = (0..reps).map(|_| poi.sample_sum(&mut rng, 10, &pol).value as f64).sum::<f64>() / reps as f64;
        let se = (30.0f64 / reps as f64).sqrt();
        assert!((mean - 30.0).abs() < 3.0 * se);
    }
}
