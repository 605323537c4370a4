//! The saturated loop `x_{k+1} = A x_k + alpha B sat(C x_k)`.
//!
//! Each step is tagged with a mode: `S1` when `y >= 1`, `S2` when
//! `|y| < 1`, `S3` when `y <= -1`. Trajectories can be run in `f64` or,
//! for second-order systems, exactly in `Q(sqrt d)`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exact::{quadratic_roots, ExactError, QuadRat};
use crate::realization::StateSpace;
use crate::spectral::{eigenvalues, SpectralSplit};

pub const DEFAULT_HORIZON: usize = 2000;
/// Exact trajectories are truncated here; coefficient sizes grow every step.
pub const EXACT_HORIZON_CAP: usize = 200;
/// `|y_k|` above this aborts the run. Bounded inputs make it unreachable.
pub const OVERFLOW_GUARD: f64 = 1e12;
/// Powering `A` stops here if `||A^L|| < 1` has not been reached.
const MAX_POWER: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    S1,
    S2,
    S3,
}

impl Mode {
    pub fn of(y: f64) -> Mode {
        if y >= 1.0 {
            Mode::S1
        } else if y <= -1.0 {
            Mode::S3
        } else {
            Mode::S2
        }
    }

    pub fn of_exact(y: &QuadRat) -> Mode {
        if y.compare_to_one() != Ordering::Less {
            Mode::S1
        } else if y.compare_to_minus_one() != Ordering::Greater {
            Mode::S3
        } else {
            Mode::S2
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::S1 => "S1",
            Mode::S2 => "S2",
            Mode::S3 => "S3",
        }
    }
}

/// `x` clamped to `[-gamma, gamma]`.
pub fn sat(gamma: f64, x: f64) -> f64 {
    assert!(gamma > 0.0, "saturation level must be positive");
    x.clamp(-gamma, gamma)
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LureError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("|y_{k}| = {y:e} exceeds the overflow guard")]
    Overflow { k: usize, y: f64 },
    #[error("open loop is not asymptotically stable: spr(A) = {spr}")]
    OpenLoopUnstable { spr: f64 },
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Final-window `max |y|` below this means convergence.
    pub conv_tol: f64,
    /// Final-window length; `max(50, 10 n)` when unset.
    pub window: Option<usize>,
    /// State recurrence `||x_k - x_{k+p}||_inf` below this means period `p`.
    pub period_tol: f64,
    /// Relative: `||P x||` must exceed `offx_tol * ||x||`.
    pub offx_tol: f64,
    /// Final-window `max |y|` at or above this (and bounded) means self-excited.
    pub osc_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            conv_tol: 1e-9,
            window: None,
            period_tol: 1e-8,
            offx_tol: 1e-9,
            osc_threshold: 1e-3,
        }
    }
}

impl Tolerances {
    pub fn window_for(&self, n: usize) -> usize {
        self.window.unwrap_or(50.max(10 * n))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LureConfig {
    pub ss: StateSpace,
    pub alpha: f64,
    pub x0: DVector<f64>,
    pub horizon: usize,
    pub tolerances: Tolerances,
}

impl LureConfig {
    pub fn new(ss: StateSpace, alpha: f64, x0: DVector<f64>) -> Self {
        LureConfig {
            ss,
            alpha,
            x0,
            horizon: DEFAULT_HORIZON,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn order(&self) -> usize {
        self.ss.order()
    }

    pub fn validate(&self) -> Result<(), LureError> {
        let n = self.order();
        if self.x0.len() != n {
            return Err(LureError::InvalidConfig(format!(
                "x0 has {} entries, the system has order {n}",
                self.x0.len()
            )));
        }
        if self.horizon < 1 {
            return Err(LureError::InvalidConfig("horizon must be at least 1".into()));
        }
        let w = self.tolerances.window_for(n);
        if w >= self.horizon {
            return Err(LureError::InvalidConfig(format!(
                "window {w} must be shorter than the horizon {}",
                self.horizon
            )));
        }
        let t = &self.tolerances;
        if !(t.conv_tol > 0.0 && t.period_tol > 0.0 && t.offx_tol > 0.0 && t.osc_threshold > 0.0) {
            return Err(LureError::InvalidConfig("tolerances must be positive".into()));
        }
        if !self.alpha.is_finite() || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(LureError::InvalidConfig("alpha and x0 must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub nu: f64,
    pub mode: Mode,
    /// `||P x_k||`, present when a spectral split was attached.
    pub proj_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactStep {
    pub x: Vec<QuadRat>,
    pub y: QuadRat,
    pub nu: QuadRat,
    /// `r . x_k` for a fixed row `r` normal to the stable subspace; zero
    /// exactly when `x_k` lies in it.
    pub normal_coord: Option<QuadRat>,
}

/// Mode change: step `k` is the first step in mode `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub k: usize,
    pub from: Mode,
    pub to: Mode,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactTrace {
    pub d: u64,
    pub steps: Vec<ExactStep>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub transitions: Vec<Transition>,
    pub exact: Option<ExactTrace>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.y).collect()
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.steps.iter().map(|s| s.mode).collect()
    }

    pub fn max_abs_y(&self) -> f64 {
        self.steps.iter().map(|s| s.y.abs()).fold(0.0, f64::max)
    }
}

/// Arithmetic the simulator needs from a scalar type.
trait Scalar: Clone {
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    fn mode(&self) -> Mode;
    /// `sat_1` given the mode already computed for `self`.
    fn saturate(&self, mode: Mode) -> Self;
    fn approx(&self) -> f64;
}

impl Scalar for f64 {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn mode(&self) -> Mode {
        Mode::of(*self)
    }
    fn saturate(&self, _: Mode) -> Self {
        sat(1.0, *self)
    }
    fn approx(&self) -> f64 {
        *self
    }
}

impl Scalar for QuadRat {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn mode(&self) -> Mode {
        Mode::of_exact(self)
    }
    fn saturate(&self, mode: Mode) -> Self {
        match mode {
            Mode::S1 => self.rational_like(BigRational::one()),
            Mode::S2 => self.clone(),
            Mode::S3 => self.rational_like(-BigRational::one()),
        }
    }
    fn approx(&self) -> f64 {
        self.to_f64()
    }
}

struct RawStep<S> {
    x: Vec<S>,
    y: S,
    nu: S,
    mode: Mode,
}

/// `x_{k+1} = A x_k + (alpha B) nu_k` for `k < horizon`.
fn run<S: Scalar>(
    a: &[Vec<S>],
    gain_b: &[S],
    c: &[S],
    x0: Vec<S>,
    horizon: usize,
) -> Result<Vec<RawStep<S>>, LureError> {
    let dot = |row: &[S], x: &[S]| {
        row.iter()
            .zip(x)
            .skip(1)
            .fold(row[0].times(&x[0]), |acc, (r, v)| acc.plus(&r.times(v)))
    };
    let mut out = Vec::with_capacity(horizon + 1);
    let mut x = x0;
    for k in 0..=horizon {
        let y = dot(c, &x);
        let approx = y.approx();
        if !(approx.abs() <= OVERFLOW_GUARD) {
            return Err(LureError::Overflow { k, y: approx });
        }
        let mode = y.mode();
        let nu = y.saturate(mode);
        let next = if k < horizon {
            Some(
                a.iter()
                    .zip(gain_b)
                    .map(|(row, g)| dot(row, &x).plus(&g.times(&nu)))
                    .collect(),
            )
        } else {
            None
        };
        out.push(RawStep {
            x: std::mem::take(&mut x),
            y,
            nu,
            mode,
        });
        if let Some(n) = next {
            x = n;
        }
    }
    Ok(out)
}

fn transitions(steps: &[Step]) -> Vec<Transition> {
    steps
        .windows(2)
        .filter(|w| w[0].mode != w[1].mode)
        .map(|w| Transition {
            k: w[1].k,
            from: w[0].mode,
            to: w[1].mode,
        })
        .collect()
}

/// Float simulation, with `||P x_k||` recorded when `split` is given.
pub fn simulate(cfg: &LureConfig, split: Option<&SpectralSplit>) -> Result<Trajectory, LureError> {
    cfg.validate()?;
    let n = cfg.order();
    let a: Vec<Vec<f64>> = (0..n).map(|i| cfg.ss.a.row(i).iter().copied().collect()).collect();
    let gain_b: Vec<f64> = cfg.ss.b.iter().map(|b| cfg.alpha * b).collect();
    let c: Vec<f64> = cfg.ss.c.iter().copied().collect();
    let raw = run(&a, &gain_b, &c, cfg.x0.iter().copied().collect(), cfg.horizon)?;
    let steps: Vec<Step> = raw
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let proj_norm = split.map(|s| s.projection_norm(&DVector::from_column_slice(&r.x)));
            Step {
                k,
                x: r.x,
                y: r.y,
                nu: r.nu,
                mode: r.mode,
                proj_norm,
            }
        })
        .collect();
    Ok(Trajectory {
        transitions: transitions(&steps),
        steps,
        exact: None,
        warnings: Vec::new(),
    })
}

/// Second-order loop with rational data, realized exactly in controllable
/// canonical form over the field containing the closed-loop eigenvalues.
#[derive(Clone, Debug, Serialize)]
pub struct ExactSetup {
    pub d: u64,
    pub a: Vec<Vec<QuadRat>>,
    pub b: Vec<QuadRat>,
    pub c: Vec<QuadRat>,
    pub alpha: QuadRat,
    /// Closed-loop eigenvalues.
    pub eigenvalues: [QuadRat; 2],
    /// Simple eigenvalue of largest modulus outside the unit disk.
    pub unstable: Option<QuadRat>,
    /// Nonzero row of `A + alpha B C - mu I`, `mu` the other eigenvalue;
    /// it annihilates exactly the stable eigenvector.
    pub normal_row: Option<Vec<QuadRat>>,
}

impl ExactSetup {
    /// `num`, `den` ascending. `requested_d` fixes the field; otherwise it is
    /// read off the discriminant of the closed-loop characteristic polynomial.
    pub fn new(
        num: &[BigRational],
        den: &[BigRational],
        alpha: &BigRational,
        requested_d: Option<u64>,
    ) -> Result<Self, ExactError> {
        let trim = |v: &[BigRational]| {
            let end = v.iter().rposition(|c| !c.is_zero()).map_or(0, |i| i + 1);
            v[..end].to_vec()
        };
        let den = trim(den);
        let num = trim(num);
        if den.len() != 3 {
            return Err(ExactError::ExactModeUnsupported(format!(
                "exact mode needs a second-order system, got order {}",
                den.len().saturating_sub(1)
            )));
        }
        let lead = den[2].clone();
        let den: Vec<BigRational> = den.iter().map(|c| c / &lead).collect();
        let num: Vec<BigRational> = num.iter().map(|c| c / &lead).collect();
        let coeff = |v: &[BigRational], i: usize| v.get(i).cloned().unwrap_or_else(BigRational::zero);

        // closed-loop characteristic polynomial D - alpha N
        let c1 = &den[1] - alpha * coeff(&num, 1);
        let c0 = &den[0] - alpha * coeff(&num, 0);
        let (d, r1, r2) = quadratic_roots(&c1, &c0, requested_d)?;

        let q = |r: BigRational| QuadRat::rational(r, d);
        let zero = q(BigRational::zero())?;
        let one = q(BigRational::one())?;
        let a = vec![
            vec![q(-den[1].clone())?, q(-den[0].clone())?],
            vec![one.clone(), zero.clone()],
        ];
        let b = vec![one, zero];
        let c = vec![q(coeff(&num, 1))?, q(coeff(&num, 0))?];
        let alpha_q = q(alpha.clone())?;

        let outside = |r: &QuadRat| r.abs().compare_to_one() == Ordering::Greater;
        let (unstable, other) = if r1 == r2 {
            (None, None)
        } else {
            let mut pair = [(r1.clone(), r2.clone()), (r2.clone(), r1.clone())];
            pair.sort_by(|x, y| {
                let ord = (&y.0.abs() - &x.0.abs()).sign().cmp(&0);
                ord.then((&y.0 - &x.0).sign().cmp(&0))
            });
            let (lead, rest) = pair[0].clone();
            if outside(&lead) {
                (Some(lead), Some(rest))
            } else {
                (None, None)
            }
        };
        let normal_row = other.map(|mu| {
            let acl = |i: usize, j: usize| &a[i][j] + &(&(&alpha_q * &b[i]) * &c[j]);
            let rows: Vec<Vec<QuadRat>> = (0..2)
                .map(|i| {
                    (0..2)
                        .map(|j| if i == j { &acl(i, j) - &mu } else { acl(i, j) })
                        .collect()
                })
                .collect();
            // the second row [1 - ..., -mu] is never zero for this realization
            rows.into_iter()
                .rev()
                .find(|r| r.iter().any(|v| !v.is_zero()))
                .expect("A + alpha B C - mu I is nonzero for a 2x2 companion matrix")
        });
        Ok(ExactSetup {
            d,
            a,
            b,
            c,
            alpha: alpha_q,
            eigenvalues: [r1, r2],
            unstable,
            normal_row,
        })
    }

    pub fn parse_state(&self, entries: &[&str]) -> Result<Vec<QuadRat>, ExactError> {
        entries.iter().map(|s| QuadRat::parse(s, self.d)).collect()
    }

    /// Float image of the exact system.
    pub fn state_space(&self) -> StateSpace {
        StateSpace {
            a: DMatrix::from_fn(2, 2, |i, j| self.a[i][j].to_f64()),
            b: DVector::from_fn(2, |i, _| self.b[i].to_f64()),
            c: RowDVector::from_fn(2, |_, j| self.c[j].to_f64()),
        }
    }

    /// Float configuration matching an exact run, for classification.
    pub fn float_config(&self, x0: &[QuadRat], horizon: usize) -> LureConfig {
        LureConfig {
            ss: self.state_space(),
            alpha: self.alpha.to_f64(),
            x0: DVector::from_iterator(x0.len(), x0.iter().map(|v| v.to_f64())),
            horizon: horizon.min(EXACT_HORIZON_CAP),
            tolerances: Tolerances::default(),
        }
    }

    fn row_norm(&self) -> Option<f64> {
        self.normal_row
            .as_ref()
            .map(|r| r.iter().map(|v| v.to_f64().powi(2)).sum::<f64>().sqrt())
    }
}

/// Exact simulation in `Q(sqrt d)`; the horizon is capped at [`EXACT_HORIZON_CAP`].
pub fn simulate_exact(
    setup: &ExactSetup,
    x0: &[QuadRat],
    horizon: usize,
) -> Result<Trajectory, LureError> {
    if x0.len() != 2 {
        return Err(LureError::InvalidConfig(format!(
            "x0 has {} entries, the system has order 2",
            x0.len()
        )));
    }
    if let Some(bad) = x0.iter().find(|v| v.d() != setup.d) {
        return Err(ExactError::MixedDiscriminant(setup.d, bad.d()).into());
    }
    if horizon < 1 {
        return Err(LureError::InvalidConfig("horizon must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    let horizon = if horizon > EXACT_HORIZON_CAP {
        warnings.push(format!(
            "exact horizon capped at {EXACT_HORIZON_CAP} steps (requested {horizon}); rational sizes grow with every step"
        ));
        EXACT_HORIZON_CAP
    } else {
        horizon
    };
    let gain_b: Vec<QuadRat> = setup.b.iter().map(|b| &setup.alpha * b).collect();
    let raw = run(&setup.a, &gain_b, &setup.c, x0.to_vec(), horizon)?;
    let row_norm = setup.row_norm();
    let mut steps = Vec::with_capacity(raw.len());
    let mut exact_steps = Vec::with_capacity(raw.len());
    for (k, r) in raw.into_iter().enumerate() {
        let normal_coord = setup.normal_row.as_ref().map(|row| {
            row.iter()
                .zip(&r.x)
                .fold(r.x[0].zero_like(), |acc, (a, b)| &acc + &(a * b))
        });
        let proj_norm = normal_coord
            .as_ref()
            .zip(row_norm)
            .map(|(v, n)| v.to_f64().abs() / n);
        steps.push(Step {
            k,
            x: r.x.iter().map(|v| v.to_f64()).collect(),
            y: r.y.to_f64(),
            nu: r.nu.to_f64(),
            mode: r.mode,
            proj_norm,
        });
        exact_steps.push(ExactStep {
            x: r.x,
            y: r.y,
            nu: r.nu,
            normal_coord,
        });
    }
    Ok(Trajectory {
        transitions: transitions(&steps),
        steps,
        exact: Some(ExactTrace {
            d: setup.d,
            steps: exact_steps,
        }),
        warnings,
    })
}

/// Parses a decimal, fraction or exponent literal exactly.
pub fn parse_rational(s: &str) -> Result<BigRational, ExactError> {
    let v = QuadRat::parse(s, 2)?;
    if !v.is_rational() {
        return Err(ExactError::Parse {
            input: s.to_string(),
            reason: "expected a rational number".into(),
        });
    }
    Ok(v.a().clone())
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Explicit output bound for any trajectory started at `x0`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundednessBound {
    pub bound: f64,
    /// `||A^i|| <= c rho^i`.
    pub c: f64,
    pub rho: f64,
    /// Smallest `L` with `||A^L|| < 1`.
    pub power: usize,
    pub sup_power_norm: f64,
    /// Upper bound on `sum_i ||A^i B||`.
    pub series_sum: f64,
}

/// `||C|| (sup_k ||A^k|| ||x0|| + |alpha| sum_i ||A^i B||)`.
pub fn boundedness_bound(cfg: &LureConfig) -> Result<BoundednessBound, LureError> {
    let a = &cfg.ss.a;
    let n = a.nrows();
    let spr = eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if spr >= 1.0 {
        return Err(LureError::OpenLoopUnstable { spr });
    }
    // Block norms ||A^r|| and ||A^r B|| for r < L, with ||A^L|| = q < 1.
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut block_norms = Vec::new();
    let mut block_b = Vec::new();
    let q = loop {
        block_norms.push(op_norm(&power));
        block_b.push((&power * &cfg.ss.b).norm());
        power = a * power;
        let q = op_norm(&power);
        if q < 1.0 {
            break q;
        }
        if block_norms.len() >= MAX_POWER {
            return Err(LureError::OpenLoopUnstable { spr });
        }
    };
    let l = block_norms.len();
    let sup_power_norm = block_norms.iter().copied().fold(0.0, f64::max);
    let rho = if q > 0.0 { q.powf(1.0 / l as f64) } else { spr.max(f64::MIN_POSITIVE) };
    let c = block_norms
        .iter()
        .enumerate()
        .map(|(r, &v)| v / rho.powi(r as i32))
        .fold(0.0, f64::max);

    // Explicit partial sum over J blocks, then a geometric tail.
    let block_sum: f64 = block_b.iter().sum();
    let blocks = 1 + (1000 / l);
    let mut explicit = 0.0;
    let mut v = cfg.ss.b.clone();
    for _ in 0..blocks * l {
        explicit += v.norm();
        v = a * v;
    }
    let tail = q.powi(blocks as i32) / (1.0 - q) * block_sum;
    let series_sum = explicit + tail;

    let bound = cfg.ss.c.norm() * (sup_power_norm * cfg.x0.norm() + cfg.alpha.abs() * series_sum);
    Ok(BoundednessBound {
        bound,
        c,
        rho,
        power: l,
        sup_power_norm,
        series_sum,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Verdict {
    /// Final-window output below `conv_tol`; the only possible limit is zero.
    Convergent { limit: f64 },
    SelfExcited { period: Option<usize> },
    Inconclusive { reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CheckOutcome {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReentryCheck {
    /// First step back in `S2`.
    pub k: usize,
    pub proj_norm: f64,
    /// Set in exact mode: whether the normal coordinate is exactly zero.
    pub exact_zero: Option<bool>,
    pub outcome: CheckOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem1Report {
    /// `x0` must be off the stable subspace when the run starts in `S2`.
    pub x0_check: CheckOutcome,
    pub x0_proj_norm: Option<f64>,
    pub reentry_checks: Vec<ReentryCheck>,
    pub exact: bool,
}

impl Theorem1Report {
    pub fn all_passed(&self) -> bool {
        self.x0_check != CheckOutcome::Fail
            && self.reentry_checks.iter().all(|c| c.outcome == CheckOutcome::Pass)
    }
}

/// Off-subspace checks at the start (if in `S2`) and at each re-entry into `S2`.
///
/// Exact trajectories are judged by exact zero tests of the normal
/// coordinate; float trajectories by `||P x|| > offx_tol ||x||`.
pub fn check_theorem1_hypotheses(
    traj: &Trajectory,
    split: Option<&SpectralSplit>,
    offx_tol: f64,
) -> Theorem1Report {
    let exact = traj
        .exact
        .as_ref()
        .filter(|e| e.steps.first().is_some_and(|s| s.normal_coord.is_some()));
    let judge = |k: usize| -> Option<(f64, Option<bool>, CheckOutcome)> {
        let step = &traj.steps[k];
        let norm = step.proj_norm.or_else(|| {
            split.map(|s| s.projection_norm(&DVector::from_column_slice(&step.x)))
        })?;
        if let Some(e) = exact {
            let zero = e.steps[k].normal_coord.as_ref().unwrap().is_zero();
            let outcome = if zero { CheckOutcome::Fail } else { CheckOutcome::Pass };
            return Some((norm, Some(zero), outcome));
        }
        let scale = step.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let outcome = if norm > offx_tol * scale {
            CheckOutcome::Pass
        } else {
            CheckOutcome::Fail
        };
        Some((norm, None, outcome))
    };

    let (x0_check, x0_proj_norm) = if traj.steps[0].mode == Mode::S2 {
        match judge(0) {
            Some((norm, _, outcome)) => (outcome, Some(norm)),
            None => (CheckOutcome::NotApplicable, None),
        }
    } else {
        (CheckOutcome::NotApplicable, None)
    };
    let reentry_checks = traj
        .transitions
        .iter()
        .filter(|t| t.to == Mode::S2)
        .map(|t| match judge(t.k) {
            Some((proj_norm, exact_zero, outcome)) => ReentryCheck {
                k: t.k,
                proj_norm,
                exact_zero,
                outcome,
            },
            None => ReentryCheck {
                k: t.k,
                proj_norm: f64::NAN,
                exact_zero: None,
                outcome: CheckOutcome::NotApplicable,
            },
        })
        .collect();
    Theorem1Report {
        x0_check,
        x0_proj_norm,
        reentry_checks,
        exact: exact.is_some(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ModeCensus {
    pub s1: usize,
    pub s2: usize,
    pub s3: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub bounded: bool,
    pub bound: Option<f64>,
    pub max_abs_y: f64,
    pub verdict: Verdict,
    pub theorem1_hypotheses: Option<Theorem1Report>,
    pub mode_census: ModeCensus,
    pub window: usize,
    pub final_window_max: f64,
    /// The oscillation threshold is a chosen amplitude floor, not a derived one.
    pub osc_threshold: f64,
    pub diagnostics: Vec<String>,
}

/// Smallest `p <= max_p` with `||x_k - x_{k+p}||_inf < tol` for all `k` in `[start, end - p]`.
fn state_period(steps: &[Step], start: usize, end: usize, max_p: usize, tol: f64) -> Option<usize> {
    (1..=max_p).find(|&p| {
        p <= end - start
            && (start..=end - p).all(|k| {
                steps[k]
                    .x
                    .iter()
                    .zip(&steps[k + p].x)
                    .all(|(a, b)| (a - b).abs() < tol)
            })
    })
}

pub fn classify(traj: &Trajectory, cfg: &LureConfig) -> ClassificationReport {
    let tol = &cfg.tolerances;
    let k_end = traj.horizon();
    let w = tol.window_for(cfg.order()).min(k_end);
    let mut diagnostics = Vec::new();

    let mut census = ModeCensus::default();
    for s in &traj.steps {
        match s.mode {
            Mode::S1 => census.s1 += 1,
            Mode::S2 => census.s2 += 1,
            Mode::S3 => census.s3 += 1,
        }
    }

    let max_abs_y = traj.max_abs_y();
    let bound = match boundedness_bound(cfg) {
        Ok(b) => Some(b.bound),
        Err(e) => {
            diagnostics.push(format!("no explicit bound: {e}"));
            None
        }
    };
    let bounded = bound.is_some_and(|b| max_abs_y <= b * (1.0 + 1e-12));

    let start = (k_end + 1 - w).max(k_end / 2);
    let final_window_max = traj.steps[start..=k_end]
        .iter()
        .map(|s| s.y.abs())
        .fold(0.0, f64::max);

    let verdict = if final_window_max < tol.conv_tol {
        Verdict::Convergent { limit: 0.0 }
    } else if final_window_max >= tol.osc_threshold && bounded {
        let half = w / 2;
        let period = if k_end >= 2 * w {
            let late = state_period(&traj.steps, k_end - w, k_end, half, tol.period_tol);
            let early = state_period(&traj.steps, k_end - 2 * w, k_end - w, half, tol.period_tol);
            if late.is_some() && late == early {
                late
            } else {
                None
            }
        } else {
            None
        };
        if period.is_none() {
            diagnostics.push("no state period stable across the last two windows".into());
        }
        Verdict::SelfExcited { period }
    } else if final_window_max >= tol.osc_threshold {
        Verdict::Inconclusive {
            reason: "final-window amplitude is large but the output exceeded the explicit bound".into(),
        }
    } else {
        Verdict::Inconclusive {
            reason: format!(
                "final-window max |y| = {final_window_max:e} lies between the convergence tolerance and the oscillation threshold; extend the horizon"
            ),
        }
    };

    ClassificationReport {
        bounded,
        bound,
        max_abs_y,
        verdict,
        theorem1_hypotheses: None,
        mode_census: census,
        window: w,
        final_window_max,
        osc_threshold: tol.osc_threshold,
        diagnostics,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub trials: usize,
    pub seed: u64,
    pub half_width: f64,
    pub self_excited: usize,
    pub convergent: usize,
    pub inconclusive: usize,
    pub failed: usize,
    pub fraction_self_excited: f64,
    /// Whether `A` is (numerically) nonsingular.
    pub a_nonsingular: bool,
    /// Whether a simple unstable closed-loop eigenvalue was supplied.
    pub split_found: bool,
}

/// Classifies runs from `x0` drawn uniformly in `[-half_width, half_width]^n`.
pub fn random_x0_census(
    template: &LureConfig,
    split: Option<&SpectralSplit>,
    trials: usize,
    seed: u64,
    half_width: f64,
) -> CensusReport {
    let n = template.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<DVector<f64>> = (0..trials)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-half_width..=half_width)))
        .collect();
    let verdicts: Vec<Option<Verdict>> = starts
        .into_par_iter()
        .map(|x0| {
            let cfg = LureConfig {
                x0,
                ..template.clone()
            };
            simulate(&cfg, split).ok().map(|t| classify(&t, &cfg).verdict)
        })
        .collect();
    let count = |f: fn(&Verdict) -> bool| verdicts.iter().flatten().filter(|v| f(v)).count();
    let self_excited = count(|v| matches!(v, Verdict::SelfExcited { .. }));
    let convergent = count(|v| matches!(v, Verdict::Convergent { .. }));
    let inconclusive = count(|v| matches!(v, Verdict::Inconclusive { .. }));
    let failed = verdicts.iter().filter(|v| v.is_none()).count();
    let det = template.ss.a.determinant();
    let a_scale = template.ss.a.norm().max(1.0);
    CensusReport {
        trials,
        seed,
        half_width,
        self_excited,
        convergent,
        inconclusive,
        failed,
        fraction_self_excited: if trials == 0 { 0.0 } else { self_excited as f64 / trials as f64 },
        a_nonsingular: det.abs() > 1e-12 * a_scale.powi(n as i32),
        split_found: split.is_some(),
    }
}

/// `BigRational` from an integer pair; test and fixture helper.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `f64` value of a rational (nearest).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
