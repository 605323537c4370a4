//! CSV renderings of trajectories and gain sweeps.
//!
//! Numbers use 17 significant digits in scientific notation so that every
//! value round-trips.

use std::fmt::Write;

use crate::lure::Trajectory;
use crate::stability::SweepResult;

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// `k,y,nu,mode,proj_norm,x_1..x_n`, followed by exact columns
/// (`y_exact,nu_exact,x_1_exact..`) for exact runs.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.steps.first().map_or(0, |s| s.x.len());
    let mut out = String::from("k,y,nu,mode,proj_norm");
    for i in 1..=n {
        write!(out, ",x_{i}").unwrap();
    }
    if traj.exact.is_some() {
        out.push_str(",y_exact,nu_exact");
        for i in 1..=n {
            write!(out, ",x_{i}_exact").unwrap();
        }
    }
    out.push('\n');
    for (k, s) in traj.steps.iter().enumerate() {
        write!(
            out,
            "{},{},{},{},{}",
            s.k,
            fmt_f64(s.y),
            fmt_f64(s.nu),
            s.mode.label(),
            s.proj_norm.map(fmt_f64).unwrap_or_default()
        )
        .unwrap();
        for v in &s.x {
            write!(out, ",{}", fmt_f64(*v)).unwrap();
        }
        if let Some(ex) = &traj.exact {
            let e = &ex.steps[k];
            write!(out, ",{},{}", e.y, e.nu).unwrap();
            for v in &e.x {
                write!(out, ",{v}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// `alpha,spr`.
pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("alpha,spr\n");
    for (a, s) in sweep.alphas.iter().zip(&sweep.spr_values) {
        writeln!(out, "{},{}", fmt_f64(*a), fmt_f64(*s)).unwrap();
    }
    out
}

/// `alpha,index,re,im,multiplicity`, one row per distinct closed-loop root.
pub fn rootlocus_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("alpha,index,re,im,multiplicity\n");
    for (a, roots) in sweep.alphas.iter().zip(&sweep.root_tracks) {
        for (i, r) in roots.roots.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(*a),
                i,
                fmt_f64(r.value.re),
                fmt_f64(r.value.im),
                r.multiplicity
            )
            .unwrap();
        }
    }
    out
}
