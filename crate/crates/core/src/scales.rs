//! Scale sequences for the slow-vertex lower bound and the covering upper
//! bound, evaluated in the log domain.
//!
//! Lower bound, for `M > 1` and `delta` in `(0, 1/4)`, with `b = 3/2 + delta`:
//! `n_k = M^(b^k)`, `p_k = M^(-delta b^(k-1) / 2)`,
//! `R_k = sum_{j<k} M^((1/2 + delta) b^j)`.
//!
//! Upper bound, for `a > 0` and `delta` in `(0, 1]`:
//! `N_k = e^((3/2)^k) / (delta^2 a^2)`, `R_k = sum_{j=1}^{k-1} a N_j^(1/2)`.
//! Since `a N_j^(1/2) = e^((3/2)^j / 2) / delta`, the requirement
//! `R_k + k <= 2 a N_{k-1}^(1/2)` does not involve `a`; it holds for
//! `k = 2` when `delta <= 1.058`, for `k <= 3` when `delta <= 0.321` and for
//! `k <= 4` when `delta <= 0.052`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Logs above this overflow `f64` on exponentiation.
const LN_MAX: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    Lower,
    Upper,
}

/// One row of a scale table. Values whose logarithm exceeds the `f64` range
/// are stored as infinity with `overflow` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleRow {
    pub k: u32,
    /// `n_k` (lower) or `N_k` (upper).
    pub n: f64,
    pub ln_n: f64,
    /// `p_k`; lower tables only.
    pub p: Option<f64>,
    pub radius: f64,
    pub overflow: bool,
    /// `R_k + k <= 2 a N_{k-1}^(1/2)`; upper tables, `k >= 2`.
    pub condition: Option<bool>,
}

impl ScaleRow {
    /// Shell radius used for this row: `floor(R_k)`.
    pub fn shell_radius(&self) -> Option<u32> {
        (self.radius.is_finite() && self.radius < u32::MAX as f64).then(|| self.radius.floor() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleTable {
    pub kind: ScaleKind,
    /// `M` (lower) or `a` (upper).
    pub base: f64,
    pub delta: f64,
    pub rows: Vec<ScaleRow>,
}

fn exp_checked(ln: f64) -> (f64, bool) {
    if ln > LN_MAX {
        (f64::INFINITY, true)
    } else {
        (ln.exp(), false)
    }
}

/// Rows `k = 0..=k_max` of the lower-bound scales.
pub fn lower_table(m: f64, delta: f64, k_max: u32) -> Result<ScaleTable> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!("M must exceed 1, got {m}")));
    }
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1/4), got {delta}")));
    }
    let b = 1.5 + delta;
    let ln_m = m.ln();
    let mut rows = Vec::with_capacity(k_max as usize + 1);
    let mut radius = 0.0f64;
    let mut r_overflow = false;
    for k in 0..=k_max {
        let ln_n = b.powi(k as i32) * ln_m;
        let (n, of) = exp_checked(ln_n);
        let p = (-delta * b.powi(k as i32 - 1) / 2.0 * ln_m).exp();
        rows.push(ScaleRow {
            k,
            n,
            ln_n,
            p: Some(p),
            radius: if r_overflow { f64::INFINITY } else { radius },
            overflow: of || r_overflow,
            condition: None,
        });
        let (term, tof) = exp_checked((0.5 + delta) * b.powi(k as i32) * ln_m);
        r_overflow |= tof;
        radius += term;
    }
    Ok(ScaleTable {
        kind: ScaleKind::Lower,
        base: m,
        delta,
        rows,
    })
}

/// Rows `k = 1..=k_max` of the upper-bound scales.
pub fn upper_table(a: f64, delta: f64, k_max: u32) -> Result<ScaleTable> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1], got {delta}")));
    }
    let ln_scale = -2.0 * (delta.ln() + a.ln());
    let ln_nk = |k: u32| 1.5f64.powi(k as i32) + ln_scale;
    let mut rows = Vec::with_capacity(k_max as usize);
    let mut radius = 0.0f64;
    for k in 1..=k_max {
        let ln_n = ln_nk(k);
        let (n, of) = exp_checked(ln_n);
        let condition = (k >= 2).then(|| {
            let rhs = 2.0 * a * (ln_nk(k - 1) / 2.0).exp();
            radius + k as f64 <= rhs
        });
        rows.push(ScaleRow {
            k,
            n,
            ln_n,
            p: None,
            radius,
            overflow: of || !radius.is_finite(),
            condition,
        });
        radius += a * (ln_n / 2.0).exp();
    }
    Ok(ScaleTable {
        kind: ScaleKind::Upper,
        base: a,
        delta,
        rows,
    })
}

impl ScaleTable {
    pub fn row(&self, k: u32) -> Option<&ScaleRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// Largest `k` such that every row up to `k` meets the upper-bound
    /// requirement (rows without one count as met).
    pub fn condition_holds_through(&self) -> u32 {
        let mut last = 0;
        for r in &self.rows {
            if r.condition == Some(false) {
                break;
            }
            last = r.k;
        }
        last
    }

    /// `n_k`/`N_k` and radii increase, `p_k` decreases (rows with `k >= 1`).
    pub fn is_monotone(&self) -> bool {
        let rows: Vec<&ScaleRow> = self.rows.iter().filter(|r| r.k >= 1).collect();
        rows.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let p_ok = match (a.p, b.p) {
                (Some(x), Some(y)) => y < x,
                _ => true,
            };
            b.ln_n > a.ln_n && b.radius > a.radius && p_ok
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_examples() {
        let t = lower_table(2.0, 0.1, 4).unwrap();
        assert!((t.row(1).unwrap().n - 2f64.powf(1.6)).abs() < 1e-12);
        assert!((t.row(1).unwrap().n - 3.0314).abs() < 1e-4);
        assert!((t.row(1).unwrap().radius - 2f64.powf(0.6)).abs() < 1e-12);
        assert_eq!(t.row(0).unwrap().radius, 0.0);
        // direct sums
        let r3: f64 = (0..3).map(|j| 2f64.powf(0.6 * 1.6f64.powi(j))).sum();
        assert!((t.row(3).unwrap().radius - r3).abs() < 1e-12);
        let p2 = 2f64.powf(-0.1 * 1.6 / 2.0);
        assert!((t.row(2).unwrap().p.unwrap() - p2).abs() < 1e-12);
        assert!(t.is_monotone());
        let radii: Vec<u32> = (1..=3).map(|k| t.row(k).unwrap().shell_radius().unwrap()).collect();
        assert_eq!(radii, vec![1, 3, 6]);
    }

    #[test]
    fn upper_examples() {
        let t = upper_table(0.1, 1.0, 4).unwrap();
        assert!((t.row(1).unwrap().n - 1.5f64.exp() / 0.01).abs() < 1e-9);
        assert!((t.row(1).unwrap().n - 448.17).abs() < 0.01);
        assert_eq!(t.row(1).unwrap().radius, 0.0);
        let r2 = 0.1 * (1.5f64.exp() / 0.01).sqrt();
        assert!((t.row(2).unwrap().radius - r2).abs() < 1e-12);
        assert!(t.is_monotone());
        assert_eq!(t.row(2).unwrap().condition, Some(true));
        assert_eq!(t.condition_holds_through(), 2);
    }

    #[test]
    fn condition_ignores_a() {
        for a in [1e-3, 0.1, 5.0] {
            assert_eq!(upper_table(a, 0.3, 4).unwrap().condition_holds_through(), 3);
            assert_eq!(upper_table(a, 0.05, 4).unwrap().condition_holds_through(), 4);
            assert_eq!(upper_table(a, 1.0, 4).unwrap().condition_holds_through(), 2);
        }
    }

    #[test]
    fn overflow_is_flagged() {
        let t = lower_table(1e6, 0.2, 12).unwrap();
        let last = t.rows.last().unwrap();
        assert!(last.overflow);
        assert!(last.ln_n.is_finite());
        assert!(!t.rows[1].overflow);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(lower_table(2.0, 0.25, 3).is_err());
        assert!(lower_table(2.0, 0.0, 3).is_err());
        assert!(lower_table(1.0, 0.1, 3).is_err());
        assert!(upper_table(0.1, 1.5, 3).is_err());
        assert!(upper_table(0.0, 0.5, 3).is_err());
    }
}
