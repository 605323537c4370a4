//! Independent numerical checks used as test oracles.
//!
//! - [`limsup_probe`]: a sum of polynomial-weighted exponentials with a base
//!   outside the unit disk crosses every finite threshold.
//! - [`unit_combo_floor`]: a nonzero combination of distinct powers with
//!   modulus at least one does not fade out.
//! - [`cayley_limit_check`]: a convergent sequence `y^T M^k x` with `1`
//!   outside `spec(M)` converges to zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::spectral::{charpoly, eigenvalues};

/// Bases closer than this (relative to `max(1, |base|)`) are considered equal.
pub const BASE_SEPARATION: f64 = 1e-6;
/// Slack factor applied to `log(threshold) / log(rho)` when sizing windows.
pub const WINDOW_SLACK: f64 = 4.0;
/// Window used when the sum does not grow.
pub const DEFAULT_WINDOW: usize = 1000;
pub const MAX_WINDOW: usize = 1_000_000;
/// Tail tolerance of [`cayley_limit_check`].
pub const CAYLEY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("exponential sum has no terms")]
    Empty,
    #[error("term {0} has a zero polynomial")]
    ZeroPolynomial(usize),
    #[error("terms {0} and {1} share a base")]
    RepeatedBase(usize, usize),
    #[error("coefficient {0} is zero")]
    ZeroCoefficient(usize),
    #[error("point {0} lies inside the unit disk")]
    InsideUnitDisk(usize),
    #[error("points {0} and {1} coincide")]
    RepeatedPoint(usize, usize),
    #[error("mismatched lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("1 is (numerically) an eigenvalue: |det(I - M)| = {0:e}")]
    OneIsEigenvalue(f64),
}

/// `p(k) base^k` with `p` given by ascending coefficients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpTerm {
    pub coeffs: Vec<Complex64>,
    pub base: Complex64,
}

impl ExpTerm {
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| c.norm() > 0.0)
    }

    fn poly_at(&self, k: f64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * k + c)
    }
}

/// `y_k = sum_i p_i(k) lambda_i^k`.
#[derive(Clone, Debug, Serialize)]
pub struct ExponentialSum {
    terms: Vec<ExpTerm>,
}

impl ExponentialSum {
    pub fn new(terms: Vec<ExpTerm>) -> Result<Self, OracleError> {
        if terms.is_empty() {
            return Err(OracleError::Empty);
        }
        for (i, t) in terms.iter().enumerate() {
            if t.degree().is_none() {
                return Err(OracleError::ZeroPolynomial(i));
            }
            for (j, u) in terms.iter().enumerate().skip(i + 1) {
                let scale = t.base.norm().max(u.base.norm()).max(1.0);
                if (t.base - u.base).norm() <= BASE_SEPARATION * scale {
                    return Err(OracleError::RepeatedBase(i, j));
                }
            }
        }
        Ok(ExponentialSum { terms })
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    /// `max_i |lambda_i|`.
    pub fn rho(&self) -> f64 {
        self.terms.iter().map(|t| t.base.norm()).fold(0.0, f64::max)
    }

    fn dominant(&self) -> impl Iterator<Item = &ExpTerm> {
        let rho = self.rho();
        self.terms
            .iter()
            .filter(move |t| t.base.norm() >= rho * (1.0 - 1e-12))
    }

    /// Highest polynomial degree among the dominant terms.
    pub fn dominant_degree(&self) -> usize {
        self.dominant().filter_map(|t| t.degree()).max().unwrap_or(0)
    }

    pub fn eval(&self, k: usize) -> Complex64 {
        let kf = k as f64;
        self.terms
            .iter()
            .map(|t| t.poly_at(kf) * t.base.powu(k as u32))
            .sum()
    }

    /// `y_k / (rho^k k^d)`, computed without forming `rho^k`.
    pub fn normalized(&self, k: usize) -> f64 {
        let rho = self.rho();
        let d = self.dominant_degree() as i32;
        let kf = k as f64;
        let y: Complex64 = self
            .terms
            .iter()
            .map(|t| t.poly_at(kf) * (t.base / rho).powu(k as u32))
            .sum();
        y.norm() / kf.max(1.0).powi(d)
    }

    /// `ceil(4 max(1, ln T - ln c) / ln rho) + 10` for the largest threshold `T`,
    /// where `c` is the smallest leading coefficient among the dominant terms.
    pub fn window_for(&self, threshold: f64) -> usize {
        let rho = self.rho();
        if rho <= 1.0 {
            return DEFAULT_WINDOW;
        }
        let d = self.dominant_degree();
        let c = self
            .dominant()
            .filter(|t| t.degree() == Some(d))
            .map(|t| t.coeffs[d].norm())
            .fold(f64::INFINITY, f64::min);
        let log_gap = (threshold.ln() - c.ln()).max(1.0);
        let w = (WINDOW_SLACK * log_gap / rho.ln()).ceil() + 10.0;
        if w.is_finite() && w < MAX_WINDOW as f64 {
            w as usize
        } else {
            MAX_WINDOW
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Crossing {
    Reached { k: usize, value: f64 },
    NotReached,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdCrossing {
    pub threshold: f64,
    pub crossing: Crossing,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimsupProbe {
    pub crossings: Vec<ThresholdCrossing>,
    pub window: usize,
    pub rho: f64,
    pub dominant_degree: usize,
    /// Max of `|y_k| / (rho^k k^d)` over the last quarter of the window;
    /// positive when growth is genuine and the window was merely too short.
    pub normalized_tail_max: f64,
}

impl LimsupProbe {
    pub fn all_reached(&self) -> bool {
        self.crossings
            .iter()
            .all(|c| matches!(c.crossing, Crossing::Reached { .. }))
    }
}

/// First index at which `|y_k| >= threshold`, for each threshold, within a
/// window sized from the largest threshold (or `window` when given).
pub fn limsup_probe(s: &ExponentialSum, thresholds: &[f64], window: Option<usize>) -> LimsupProbe {
    let top = thresholds.iter().copied().fold(1.0, f64::max);
    let window = window.unwrap_or_else(|| s.window_for(top));
    let mut crossings: Vec<ThresholdCrossing> = thresholds
        .iter()
        .map(|&threshold| ThresholdCrossing {
            threshold,
            crossing: Crossing::NotReached,
        })
        .collect();
    let mut pending = crossings.len();
    for k in 0..=window {
        if pending == 0 {
            break;
        }
        let value = s.eval(k).norm();
        for c in crossings.iter_mut() {
            if c.crossing == Crossing::NotReached && value >= c.threshold {
                c.crossing = Crossing::Reached { k, value };
                pending -= 1;
            }
        }
    }
    let tail_start = window - window / 4;
    let normalized_tail_max = (tail_start..=window)
        .map(|k| s.normalized(k))
        .fold(0.0, f64::max);
    LimsupProbe {
        crossings,
        window,
        rho: s.rho(),
        dominant_degree: s.dominant_degree(),
        normalized_tail_max,
    }
}

/// `max_{1 <= k <= horizon} |sum_i a_i z_i^k|`.
pub fn unit_combo_floor(a: &[Complex64], z: &[Complex64], horizon: usize) -> Result<f64, OracleError> {
    if a.len() != z.len() {
        return Err(OracleError::LengthMismatch(a.len(), z.len()));
    }
    if a.is_empty() {
        return Err(OracleError::Empty);
    }
    for (i, ai) in a.iter().enumerate() {
        if ai.norm() == 0.0 {
            return Err(OracleError::ZeroCoefficient(i));
        }
    }
    for (i, zi) in z.iter().enumerate() {
        if zi.norm() < 1.0 - 1e-12 {
            return Err(OracleError::InsideUnitDisk(i));
        }
        for (j, zj) in z.iter().enumerate().skip(i + 1) {
            if (zi - zj).norm() <= BASE_SEPARATION * zi.norm().max(zj.norm()) {
                return Err(OracleError::RepeatedPoint(i, j));
            }
        }
    }
    let mut powers: Vec<Complex64> = a.to_vec();
    let mut best = 0.0f64;
    for _ in 1..=horizon {
        for (p, zi) in powers.iter_mut().zip(z) {
            *p *= zi;
        }
        best = best.max(powers.iter().sum::<Complex64>().norm());
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CayleyVerdict {
    /// Tail is Cauchy and the final value is below `tol * scale`.
    LimitZero { limit: f64 },
    /// Tail is Cauchy but settles away from zero; contradicts the lemma.
    LimitNonzero { limit: f64 },
    /// Tail is not Cauchy; the lemma says nothing.
    NonConvergent { tail_variation: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct CayleyReport {
    pub verdict: CayleyVerdict,
    /// `max_k |t_{k+n} + a_1 t_{k+n-1} + ... + a_n t_k| / scale`.
    pub recurrence_residual: f64,
    pub scale: f64,
    pub det_one: f64,
    pub sequence: Vec<f64>,
}

/// Evaluates `t_k = y^T M^k x` for `k = 0..=horizon` and checks the limit claim.
pub fn cayley_limit_check(
    m: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    horizon: usize,
) -> Result<CayleyReport, OracleError> {
    let n = m.nrows();
    if x.len() != n || y.len() != n {
        return Err(OracleError::LengthMismatch(x.len(), y.len()));
    }
    let det_one = (DMatrix::<f64>::identity(n, n) - m).determinant();
    // det(I - M) = prod (1 - mu_i); this scale keeps the test on min |1 - mu_i|.
    let det_scale: f64 = eigenvalues(m).iter().map(|mu| 1.0 + mu.norm()).product();
    if det_one.abs() <= CAYLEY_TOL * det_scale {
        return Err(OracleError::OneIsEigenvalue(det_one.abs()));
    }

    let mut t = Vec::with_capacity(horizon + 1);
    let mut v = x.clone();
    for _ in 0..=horizon {
        t.push(y.dot(&v));
        v = m * v;
    }
    let scale = t.iter().map(|v| v.abs()).fold(1.0, f64::max);

    let chi = charpoly(m);
    let a = chi.coeffs();
    let mut recurrence_residual = 0.0f64;
    for k in 0..t.len().saturating_sub(n) {
        let r: f64 = (0..=n).map(|i| a[i] * t[k + i]).sum();
        recurrence_residual = recurrence_residual.max(r.abs() / scale);
    }

    let w = (horizon / 10).max(10).min(horizon);
    let tail_variation = (horizon - w..horizon)
        .map(|k| (t[k + 1] - t[k]).abs())
        .fold(0.0, f64::max);
    let last = t[horizon];
    let verdict = if tail_variation < CAYLEY_TOL * scale {
        if last.abs() < CAYLEY_TOL * scale {
            CayleyVerdict::LimitZero { limit: last }
        } else {
            CayleyVerdict::LimitNonzero { limit: last }
        }
    } else {
        CayleyVerdict::NonConvergent { tail_variation }
    };
    Ok(CayleyReport {
        verdict,
        recurrence_residual,
        scale,
        det_one,
        sequence: t,
    })
}
