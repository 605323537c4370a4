//! Transfer-function validation and the controllable canonical realization.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::poly::Poly;

/// `|resultant(N, D)|` must exceed this times `scale^(n+m)`.
pub const COPRIME_RELATIVE: f64 = 1e-10;
/// Distance band around the unit circle used to reject extra zeros of `N`.
pub const UNIT_CIRCLE_ZERO_TOL: f64 = 1e-7;
/// `|N(1)|` must not exceed this times the absolute coefficient sum of `N`.
pub const ZERO_AT_ONE_RELATIVE: f64 = 1e-9;
/// Realization must reproduce `G` to this accuracy at the probe points.
pub const PROBE_TOL: f64 = 1e-9;
pub const PROBE_COUNT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    StrictlyProper,
    AsymptoticallyStable,
    Coprime,
    ZeroAtOne,
    NoOtherUnitCircleZero,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    /// The quantity the decision was based on (spr(D), |N(1)|, ...).
    pub measured: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ValidationWarning {
    /// `D` was rescaled (together with `N`) to make it monic.
    DenNotMonic { leading: f64 },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
    pub warnings: Vec<ValidationWarning>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, h: Hypothesis) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.hypothesis == h)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Serialize)]
pub enum ValidationError {
    #[error("denominator must have degree at least 1")]
    DegenerateDenominator,
    #[error("numerator is the zero polynomial")]
    ZeroNumerator,
    #[error("not strictly proper: deg N = {m}, deg D = {n}")]
    NotStrictlyProper { m: usize, n: usize },
    #[error("not asymptotically stable: spr(D) = {spr}")]
    NotAsymptoticallyStable { spr: f64 },
    #[error("N and D are not coprime: |resultant| = {resultant:e}")]
    NotCoprime { resultant: f64 },
    #[error("N(1) = {value:e} is not zero")]
    NoZeroAtOne { value: f64 },
    #[error("N has a zero on the unit circle at {re} + {im}j")]
    ExtraUnitCircleZero { re: f64, im: f64 },
}

/// Every failed hypothesis together with the full report.
#[derive(Clone, Debug, Error, Serialize)]
pub struct ValidationFailure {
    pub errors: Vec<ValidationError>,
    pub report: ValidationReport,
}

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "transfer function rejected: ")?;
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// A validated `G = N/D` with monic `D`.
#[derive(Clone, Debug, Serialize)]
pub struct TransferFunction {
    num: Poly,
    den: Poly,
    validation: ValidationReport,
}

impl TransferFunction {
    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    /// `n = deg D`.
    pub fn order(&self) -> usize {
        self.den.degree().unwrap()
    }

    /// `m = deg N`.
    pub fn num_degree(&self) -> usize {
        self.num.degree().unwrap()
    }

    pub fn relative_degree(&self) -> usize {
        self.order() - self.num_degree()
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }

    /// `p_alpha = D - alpha N`, the closed-loop characteristic polynomial.
    pub fn closed_loop_poly(&self, alpha: f64) -> Poly {
        &self.den - &self.num.scaled(alpha)
    }

    /// Combined coefficient scale of `N` and `D`.
    pub fn coeff_scale(&self) -> f64 {
        self.num.scale().max(self.den.scale())
    }
}

/// Checks the standing hypotheses on `G = N/D`.
///
/// A non-monic `D` is normalized (with `N`) and reported as a warning.
pub fn validate(num: &Poly, den: &Poly) -> Result<TransferFunction, ValidationFailure> {
    let mut report = ValidationReport::default();
    let n = match den.degree() {
        Some(n) if n >= 1 => n,
        _ => {
            return Err(ValidationFailure {
                errors: vec![ValidationError::DegenerateDenominator],
                report,
            })
        }
    };
    let Some(m) = num.degree() else {
        return Err(ValidationFailure {
            errors: vec![ValidationError::ZeroNumerator],
            report,
        });
    };

    let lead = den.leading().unwrap();
    let (num, den) = if lead != 1.0 {
        report
            .warnings
            .push(ValidationWarning::DenNotMonic { leading: lead });
        (num.scaled(1.0 / lead), den.scaled(1.0 / lead))
    } else {
        (num.clone(), den.clone())
    };

    let mut errors = Vec::new();

    let proper = m < n;
    report.checks.push(HypothesisCheck {
        hypothesis: Hypothesis::StrictlyProper,
        passed: proper,
        measured: (n as f64) - (m as f64),
        detail: format!("deg N = {m}, deg D = {n}"),
    });
    if !proper {
        errors.push(ValidationError::NotStrictlyProper { m, n });
    }

    let spr = den.spectral_radius().expect("degree checked above");
    let stable = spr < 1.0;
    report.checks.push(HypothesisCheck {
        hypothesis: Hypothesis::AsymptoticallyStable,
        passed: stable,
        measured: spr,
        detail: "spr(D)".into(),
    });
    if !stable {
        errors.push(ValidationError::NotAsymptoticallyStable { spr });
    }

    let scale = num.scale().max(den.scale());
    let res = resultant(&num, &den).abs();
    let coprime = res > COPRIME_RELATIVE * scale.powi((n + m) as i32);
    report.checks.push(HypothesisCheck {
        hypothesis: Hypothesis::Coprime,
        passed: coprime,
        measured: res,
        detail: "|resultant(N, D)|".into(),
    });
    if !coprime {
        errors.push(ValidationError::NotCoprime { resultant: res });
    }

    let n_at_one = num.eval_real(1.0);
    let abs_sum: f64 = num.coeffs().iter().map(|c| c.abs()).sum();
    let zero_at_one = n_at_one.abs() <= ZERO_AT_ONE_RELATIVE * abs_sum;
    report.checks.push(HypothesisCheck {
        hypothesis: Hypothesis::ZeroAtOne,
        passed: zero_at_one,
        measured: n_at_one.abs(),
        detail: "|N(1)|".into(),
    });
    if !zero_at_one {
        errors.push(ValidationError::NoZeroAtOne { value: n_at_one });
    }

    let mut min_dist = f64::INFINITY;
    let mut offender = None;
    if m >= 1 {
        for z in num.roots().expect("degree >= 1").roots {
            if (z.value - 1.0).norm() <= UNIT_CIRCLE_ZERO_TOL {
                continue;
            }
            let dist = (z.value.norm() - 1.0).abs();
            if dist < min_dist {
                min_dist = dist;
            }
            if dist < UNIT_CIRCLE_ZERO_TOL && offender.is_none() {
                offender = Some(z.value);
            }
        }
    }
    report.checks.push(HypothesisCheck {
        hypothesis: Hypothesis::NoOtherUnitCircleZero,
        passed: offender.is_none(),
        measured: min_dist,
        detail: "min distance of other N-roots to the unit circle".into(),
    });
    if let Some(z) = offender {
        errors.push(ValidationError::ExtraUnitCircleZero { re: z.re, im: z.im });
    }

    if errors.is_empty() {
        Ok(TransferFunction {
            num,
            den,
            validation: report,
        })
    } else {
        Err(ValidationFailure { errors, report })
    }
}

/// Sylvester-matrix resultant.
fn resultant(p: &Poly, q: &Poly) -> f64 {
    let (Some(dp), Some(dq)) = (p.degree(), q.degree()) else {
        return 0.0;
    };
    let size = dp + dq;
    if size == 0 {
        return 1.0;
    }
    let mut s = DMatrix::<f64>::zeros(size, size);
    for row in 0..dq {
        for (i, &c) in p.coeffs().iter().rev().enumerate() {
            s[(row, row + i)] = c;
        }
    }
    for row in 0..dp {
        for (i, &c) in q.coeffs().iter().rev().enumerate() {
            s[(dq + row, row + i)] = c;
        }
    }
    s.determinant()
}

/// Minimal realization `(A, B, C)` of `G`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RealizationError {
    #[error("realization misses G at probe z = {re} + {im}j by {error:e}")]
    ProbeMismatch { re: f64, im: f64, error: f64 },
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (zI - A)^{-1} B`.
    pub fn transfer(&self, z: Complex64) -> Complex64 {
        let n = self.order();
        let zi_a = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let b = self.b.map(|v| Complex64::new(v, 0.0));
        let sol = zi_a.lu().solve(&b).expect("probe point off the spectrum");
        self.c
            .iter()
            .zip(sol.iter())
            .map(|(c, s)| s * *c)
            .sum()
    }

    /// `A + alpha B C`.
    pub fn closed_loop(&self, alpha: f64) -> DMatrix<f64> {
        &self.a + (&self.b * &self.c) * alpha
    }

    pub fn controllability_matrix(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut out = DMatrix::zeros(n, n);
        let mut col = self.b.clone();
        for j in 0..n {
            out.set_column(j, &col);
            col = &self.a * col;
        }
        out
    }

    pub fn observability_matrix(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut out = DMatrix::zeros(n, n);
        let mut row = self.c.clone();
        for i in 0..n {
            out.set_row(i, &row);
            row = &row * &self.a;
        }
        out
    }
}

/// Controllable canonical form; `chi_A = D` by construction.
pub fn realize(g: &TransferFunction) -> Result<StateSpace, RealizationError> {
    let n = g.order();
    let den = g.den().coeffs();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        a[(0, j)] = -den[n - 1 - j];
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[0] = 1.0;
    let c = RowDVector::<f64>::from_fn(n, |_, j| g.num().coeff(n - 1 - j));
    let ss = StateSpace { a, b, c };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for _ in 0..PROBE_COUNT {
        let z = Complex64::from_polar(rng.random_range(1.2..3.0), rng.random_range(-PI..PI));
        let expected = g.eval(z);
        let error = (ss.transfer(z) - expected).norm();
        if error >= PROBE_TOL * expected.norm().max(1.0) {
            return Err(RealizationError::ProbeMismatch {
                re: z.re,
                im: z.im,
                error,
            });
        }
    }
    Ok(ss)
}

/// `sigma_min / sigma_max`, used for numerical rank decisions.
pub fn singular_value_ratio(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}
