//! Limit law of the rescaled total progeny of a critical Galton-Watson
//! process conditioned on survival.
//!
//! The law `F` has Laplace transform `x csch x` with `x = sqrt(2 sigma^2 theta)`.
//! The tail `1 - F` has transform `(1 - x csch x) / s`, which is inverted
//! with the Abate-Whitt Euler method: a trapezoidal discretisation of the
//! Bromwich integral followed by binomial averaging of the partial sums.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Parameters of the Euler inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionParams {
    /// Contour shift; discretisation error is about `exp(-a)`.
    pub a: f64,
    /// Number of plain terms before averaging.
    pub n: usize,
    /// Order of the binomial average.
    pub m: usize,
    /// Largest acceptable `|E(n) - E(n+1)|`.
    pub tolerance: f64,
}

impl Default for InversionParams {
    fn default() -> Self {
        InversionParams {
            a: 18.4,
            n: 30,
            m: 15,
            tolerance: 1e-6,
        }
    }
}

/// Tail value with the inversion's own error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailValue {
    pub value: f64,
    pub error_estimate: f64,
}

// x csch x = 1 - x^2/6 + 7x^4/360 - 31x^6/15120 + 127x^8/604800 - ...
const SERIES: [f64; 5] = [
    1.0,
    -1.0 / 6.0,
    7.0 / 360.0,
    -31.0 / 15120.0,
    127.0 / 604800.0,
];

fn xcschx_complex(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        let x2 = x * x;
        let mut acc = Complex64::new(0.0, 0.0);
        for c in SERIES.iter().rev() {
            acc = acc * x2 + c;
        }
        return acc;
    }
    // Re x >= 0, so exp(-x) is bounded
    let e = (-x).exp();
    2.0 * x * e / (1.0 - e * e)
}

/// `1 - x csch x` without cancellation for small `|x|`.
fn one_minus_xcschx(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        let x2 = x * x;
        let mut acc = Complex64::new(0.0, 0.0);
        for c in SERIES[1..].iter().rev() {
            acc = acc * x2 - c;
        }
        return acc * x2;
    }
    1.0 - xcschx_complex(x)
}

/// Laplace transform of `F` at `theta >= 0`.
pub fn pakes_transform(theta: f64, sigma2: f64) -> f64 {
    let x = (2.0 * sigma2 * theta).sqrt();
    if x < 0.1 {
        let x2 = x * x;
        return SERIES.iter().rev().fold(0.0, |acc, c| acc * x2 + c);
    }
    if x > 700.0 {
        return 2.0 * x * (-x).exp();
    }
    x / x.sinh()
}

/// Transform of the tail `1 - F`.
fn tail_transform(s: Complex64, sigma2: f64) -> Complex64 {
    let x = (2.0 * sigma2 * s).sqrt();
    one_minus_xcschx(x) / s
}

fn check_args(gamma: f64, sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// `1 - F(gamma)` with the inversion error estimate. Values are clamped to `[0, 1]`.
pub fn pakes_tail_with(gamma: f64, sigma2: f64, params: &InversionParams) -> Result<TailValue> {
    check_args(gamma, sigma2)?;
    let InversionParams { a, n, m, tolerance } = *params;
    let t = gamma;
    let scale = (a / 2.0).exp() / t;
    let terms = n + m + 2;
    let mut partial = Vec::with_capacity(terms);
    let mut sum = 0.5 * tail_transform(Complex64::new(a / (2.0 * t), 0.0), sigma2).re;
    partial.push(scale * sum);
    for k in 1..terms {
        let s = Complex64::new(a, 2.0 * std::f64::consts::PI * k as f64) / (2.0 * t);
        let term = tail_transform(s, sigma2).re;
        sum += if k % 2 == 0 { term } else { -term };
        partial.push(scale * sum);
    }
    let euler = |start: usize| -> f64 {
        let mut binom = 1.0f64;
        let mut acc = 0.0;
        for j in 0..=m {
            acc += binom * partial[start + j];
            binom = binom * (m - j) as f64 / (j + 1) as f64;
        }
        acc / 2f64.powi(m as i32)
    };
    let e0 = euler(n);
    let e1 = euler(n + 1);
    let err = (e0 - e1).abs();
    if !(err <= tolerance) {
        return Err(Error::NonConvergence {
            estimate: err,
            partial_sums: partial,
        });
    }
    Ok(TailValue {
        value: e0.clamp(0.0, 1.0),
        error_estimate: err,
    })
}

/// `1 - F(gamma)` with default inversion parameters.
pub fn pakes_tail(gamma: f64, sigma2: f64) -> Result<f64> {
    pakes_tail_with(gamma, sigma2, &InversionParams::default()).map(|v| v.value)
}

/// Right side of the Chernoff bound `P(X <= E[X]/2) <= exp(-E[X]/8)`.
pub fn chernoff_rhs(ex: f64) -> f64 {
    (-ex / 8.0).exp()
}

/// The law `F` for a fixed variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PakesLaw {
    pub sigma2: f64,
    pub params: InversionParams,
}

impl PakesLaw {
    pub fn new(sigma2: f64) -> Result<Self> {
        check_args(1.0, sigma2)?;
        Ok(PakesLaw {
            sigma2,
            params: InversionParams::default(),
        })
    }

    pub fn transform(&self, theta: f64) -> f64 {
        pakes_transform(theta, self.sigma2)
    }

    /// Tail at `gamma >= 0`; the tail at 0 is 1.
    pub fn tail(&self, gamma: f64) -> Result<f64> {
        if gamma == 0.0 {
            return Ok(1.0);
        }
        pakes_tail_with(gamma, self.sigma2, &self.params).map(|v| v.value)
    }

    /// Beyond this point the tail is below `1e-15`: the nearest pole of the
    /// transform is at `-pi^2 / (2 sigma^2)`.
    pub fn support_cutoff(&self) -> f64 {
        2.0 * self.sigma2 * 36.0 / (std::f64::consts::PI * std::f64::consts::PI)
    }

    /// `int_0^inf w(gamma) tail(gamma) dgamma` by composite Simpson.
    pub fn integrate_tail<W: Fn(f64) -> f64>(&self, w: W, intervals: usize) -> Result<f64> {
        let upper = self.support_cutoff();
        let n = intervals + intervals % 2;
        let h = upper / n as f64;
        let mut acc = w(0.0) * self.tail(0.0)? + w(upper) * self.tail(upper)?;
        for i in 1..n {
            let g = i as f64 * h;
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * w(g) * self.tail(g)?;
        }
        Ok(acc * h / 3.0)
    }

    /// `E[v] = int tail`; equals `sigma^2 / 3`.
    pub fn mean(&self) -> Result<f64> {
        self.integrate_tail(|_| 1.0, 8000)
    }

    /// `E[v^2] = 2 int gamma tail`; equals `7 sigma^4 / 45`.
    pub fn second_moment(&self) -> Result<f64> {
        Ok(2.0 * self.integrate_tail(|g| g, 8000)?)
    }

    /// Transform recomputed from the inverted tail: `1 - theta int e^{-theta g} tail`.
    pub fn retransform(&self, theta: f64) -> Result<f64> {
        Ok(1.0 - theta * self.integrate_tail(|g| (-theta * g).exp(), 16000)?)
    }
}
