//! Unit-circle crossing sets, the guaranteed-stable gain interval and
//! spectral-radius sweeps of `p_alpha = D - alpha N`.
//!
//! Crossing angles are found as the unit-circle roots of the reciprocal
//! bracket `h` (see [`crate::poly::reciprocal_bracket`]). At each such angle
//! `G(e^{j theta})` is real and the closed loop has a pole on the unit circle
//! for `alpha = 1 / G(e^{j theta})`. The sweep locates the same boundary
//! independently by bisection on `spr(p_alpha) = 1`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::poly::{reciprocal_bracket, RootSet};
use crate::realization::TransferFunction;

/// Maximum `||z| - 1|` for an `h` root to count as a crossing.
pub const UNIT_CIRCLE_TOL: f64 = 1e-7;
/// `|Im G| < REAL_AXIS_RELATIVE * |G|` is required to classify a crossing.
pub const REAL_AXIS_RELATIVE: f64 = 1e-7;
/// Candidates with `|G(e^{j theta})|` below this are rejected.
pub const DEGENERATE_GAIN_TOL: f64 = 1e-12;
/// Margin used by [`stable_interval_check`].
pub const STABLE_MARGIN: f64 = 1e-9;
/// A root counts as outside the unit disk when `|z| > 1 + OUTSIDE_TOL`.
pub const OUTSIDE_TOL: f64 = 1e-9;
pub const DEFAULT_SWEEP_POINTS: usize = 2001;
pub const BISECTION_TOL: f64 = 1e-9;
/// Samples per sign used by [`gain_thresholds`].
pub const THRESHOLD_SAMPLES: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("no gain threshold found on the {0:?} side within the search bound")]
    SearchExhausted(Side),
    #[error("alpha grid is empty")]
    EmptyGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Negative,
    Positive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossing {
    /// Angle in `(-pi, pi]`.
    pub theta: f64,
    /// `1 / G(e^{j theta})`, the gain at which the locus passes through `e^{j theta}`.
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CrossingDiagnostic {
    /// `G(e^{j theta})` failed the real-axis test.
    NotReal { theta: f64, g_re: f64, g_im: f64 },
    /// `|G(e^{j theta})|` is numerically zero.
    DegenerateGain { theta: f64, g_abs: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CrossingFlag {
    EmptyThetaN,
    EmptyThetaP,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingSet {
    /// Angles where `G` is real and negative (180-deg locus).
    pub theta_n: Vec<Crossing>,
    /// Angles where `G` is real and positive (0-deg locus).
    pub theta_p: Vec<Crossing>,
    /// `max 1/G` over `theta_n`; `None` means unbounded below.
    pub alpha_n: Option<f64>,
    /// `min 1/G` over `theta_p`; `None` means unbounded above.
    pub alpha_p: Option<f64>,
    pub diagnostics: Vec<CrossingDiagnostic>,
    pub flags: Vec<CrossingFlag>,
}

impl CrossingSet {
    pub fn interval(&self) -> (f64, f64) {
        (
            self.alpha_n.unwrap_or(f64::NEG_INFINITY),
            self.alpha_p.unwrap_or(f64::INFINITY),
        )
    }
}

fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    if theta <= -PI {
        theta + 2.0 * PI
    } else {
        theta
    }
}

pub fn crossings(g: &TransferFunction) -> CrossingSet {
    let h = reciprocal_bracket(g.num(), g.den()).expect("validated N and D are nonzero");
    let dh = h.derivative();
    let mut theta_n = Vec::new();
    let mut theta_p = Vec::new();
    let mut diagnostics = Vec::new();

    // Strict properness keeps h nonzero with degree >= 1.
    let roots = h.roots().expect("bracket has positive degree");
    for root in &roots.roots {
        let mut z = root.value;
        if root.multiplicity == 1 {
            let d = dh.eval(z);
            if d.norm() > 0.0 {
                z -= h.eval(z) / d;
            }
        }
        if (z.norm() - 1.0).abs() >= UNIT_CIRCLE_TOL || (z - 1.0).norm() < UNIT_CIRCLE_TOL {
            continue;
        }
        let theta = wrap_angle(z.arg());
        let on_circle = Complex64::from_polar(1.0, theta);
        let gz = g.eval(on_circle);
        if gz.norm() < DEGENERATE_GAIN_TOL {
            diagnostics.push(CrossingDiagnostic::DegenerateGain {
                theta,
                g_abs: gz.norm(),
            });
            continue;
        }
        if gz.im.abs() >= REAL_AXIS_RELATIVE * gz.norm() {
            diagnostics.push(CrossingDiagnostic::NotReal {
                theta,
                g_re: gz.re,
                g_im: gz.im,
            });
            continue;
        }
        let crossing = Crossing {
            theta,
            gain: 1.0 / gz.re,
        };
        if gz.re < 0.0 {
            theta_n.push(crossing);
        } else {
            theta_p.push(crossing);
        }
    }
    theta_n.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    theta_p.sort_by(|a, b| a.theta.total_cmp(&b.theta));

    let alpha_n = theta_n.iter().map(|c| c.gain).reduce(f64::max);
    let alpha_p = theta_p.iter().map(|c| c.gain).reduce(f64::min);
    let mut flags = Vec::new();
    if alpha_n.is_none() {
        flags.push(CrossingFlag::EmptyThetaN);
    }
    if alpha_p.is_none() {
        flags.push(CrossingFlag::EmptyThetaP);
    }
    CrossingSet {
        theta_n,
        theta_p,
        alpha_n,
        alpha_p,
        diagnostics,
        flags,
    }
}

/// `spr(D - alpha N)`.
pub fn closed_loop_spr(g: &TransferFunction, alpha: f64) -> f64 {
    closed_loop_roots(g, alpha).spectral_radius()
}

pub fn closed_loop_roots(g: &TransferFunction, alpha: f64) -> RootSet {
    // Monic D keeps deg p_alpha = n for every alpha.
    g.closed_loop_poly(alpha)
        .roots()
        .expect("closed-loop polynomial has degree n >= 1")
}

/// `points` uniformly spaced values from `lo` to `hi` inclusive.
pub fn alpha_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * (i as f64) / ((points - 1) as f64))
            .collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub alphas: Vec<f64>,
    pub spr_values: Vec<f64>,
    pub root_tracks: Vec<RootSet>,
}

pub fn spr_sweep(g: &TransferFunction, alpha_grid: &[f64]) -> Result<SweepResult, StabilityError> {
    if alpha_grid.is_empty() {
        return Err(StabilityError::EmptyGrid);
    }
    let root_tracks: Vec<RootSet> = alpha_grid
        .par_iter()
        .map(|&a| closed_loop_roots(g, a))
        .collect();
    let spr_values = root_tracks.iter().map(RootSet::spectral_radius).collect();
    Ok(SweepResult {
        alphas: alpha_grid.to_vec(),
        spr_values,
        root_tracks,
    })
}

/// Gains where `spr(p_alpha)` crosses 1, located by bisection between
/// adjacent sweep points of opposite sign.
pub fn refine_unit_crossings(g: &TransferFunction, sweep: &SweepResult) -> Vec<f64> {
    let f = |a: f64| closed_loop_spr(g, a) - 1.0;
    let mut out = Vec::new();
    for i in 1..sweep.alphas.len() {
        let (mut lo, mut hi) = (sweep.alphas[i - 1], sweep.alphas[i]);
        let (flo, fhi) = (sweep.spr_values[i - 1] - 1.0, sweep.spr_values[i] - 1.0);
        if flo == 0.0 {
            out.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() || fhi == 0.0 {
            continue;
        }
        let below_at_lo = flo < 0.0;
        while (hi - lo).abs() > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if (f(mid) < 0.0) == below_at_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    if let (Some(&last_a), Some(&last_s)) = (sweep.alphas.last(), sweep.spr_values.last()) {
        if last_s == 1.0 {
            out.push(last_a);
        }
    }
    out
}

/// `spr(D - alpha N) < 1 - STABLE_MARGIN`.
///
/// The open interval `(alpha_n, alpha_p)` is always inside this set, but the
/// set can be larger: stable gains may exist beyond `alpha_p`.
pub fn stable_interval_check(g: &TransferFunction, alpha: f64) -> bool {
    closed_loop_spr(g, alpha) < 1.0 - STABLE_MARGIN
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RootCensus {
    pub count_outside: usize,
    /// Every root outside the closed unit disk is simple.
    pub all_simple: bool,
}

pub fn unstable_root_census(g: &TransferFunction, alpha: f64) -> RootCensus {
    let roots = closed_loop_roots(g, alpha);
    let outside: Vec<_> = roots
        .roots
        .iter()
        .filter(|r| r.value.norm() > 1.0 + OUTSIDE_TOL)
        .collect();
    RootCensus {
        count_outside: outside.iter().map(|r| r.multiplicity).sum(),
        all_simple: outside.iter().all(|r| r.multiplicity == 1),
    }
}

/// Sampled evidence for the large-gain thresholds: every sampled
/// `alpha < beta_n` and every sampled `alpha > beta_p` (up to the search
/// bound) leaves at least `n - m` simple roots outside the unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GainThresholds {
    pub beta_n: f64,
    pub beta_p: f64,
    pub samples_per_side: usize,
}

pub fn gain_thresholds(
    g: &TransferFunction,
    search_bound: f64,
) -> Result<GainThresholds, StabilityError> {
    let required = g.relative_degree();
    let holds = |a: f64| {
        let c = unstable_root_census(g, a);
        c.count_outside >= required && c.all_simple
    };
    let side = |sign: f64, label: Side| -> Result<f64, StabilityError> {
        let samples: Vec<f64> = (1..=THRESHOLD_SAMPLES)
            .map(|i| sign * (i as f64) * search_bound / THRESHOLD_SAMPLES as f64)
            .collect();
        let ok: Vec<bool> = samples.par_iter().map(|&a| holds(a)).collect();
        if !ok[THRESHOLD_SAMPLES - 1] {
            return Err(StabilityError::SearchExhausted(label));
        }
        // Largest-magnitude failing sample; beyond it every sample passes.
        match ok.iter().rposition(|&o| !o) {
            Some(i) => Ok(samples[i]),
            None => Ok(0.5 * samples[0]),
        }
    };
    Ok(GainThresholds {
        beta_n: side(-1.0, Side::Negative)?,
        beta_p: side(1.0, Side::Positive)?,
        samples_per_side: THRESHOLD_SAMPLES,
    })
}
