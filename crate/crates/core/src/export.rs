//! Plain-text serialisations of curves, traces, and surfaces.
//!
//! Every float is written with 17 significant digits, which round-trips f64
//! exactly; identical inputs therefore always produce identical bytes. CSV
//! is the long form for spreadsheets, JSON carries the full surface
//! structure.

use std::fmt::Write as _;

use crate::dynamics::TaylorRow;
use crate::probe::{InterpolationCurve, ProjectionTrace};
use crate::surface::SurfaceGrid;
use crate::train::TrajectoryRecord;

/// 17 significant digits in scientific notation; parses back to the same
/// bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `alpha,J_train[,J_valid][,err_rate]`, one row per grid point.
pub fn curve_csv(curve: &InterpolationCurve) -> String {
    let mut out = String::from("alpha,J_train");
    if curve.valid.is_some() {
        out.push_str(",J_valid");
    }
    if curve.error_rate.is_some() {
        out.push_str(",err_rate");
    }
    out.push('\n');
    for i in 0..curve.alphas.len() {
        let _ = write!(out, "{},{}", fmt_f64(curve.alphas[i]), fmt_f64(curve.train[i]));
        if let Some(valid) = &curve.valid {
            let _ = write!(out, ",{}", fmt_f64(valid[i]));
        }
        if let Some(err) = &curve.error_rate {
            let _ = write!(out, ",{}", fmt_f64(err[i]));
        }
        out.push('\n');
    }
    out
}

/// `step,alpha,alpha_hat,beta,theta_norm,residual_ratio`, one row per
/// projected point.
pub fn trace_csv(trace: &ProjectionTrace) -> String {
    let mut out = String::from("step,alpha,alpha_hat,beta,theta_norm,residual_ratio\n");
    for p in &trace.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.step,
            fmt_f64(p.alpha),
            fmt_f64(p.alpha_hat),
            fmt_f64(p.beta),
            fmt_f64(p.theta_norm),
            fmt_f64(p.residual_ratio),
        );
    }
    out
}

/// `alpha,beta,J,basis`, one row per grid cell in row-major order. The
/// basis column names where that alpha column's off-axis direction came
/// from.
pub fn surface_csv(surface: &SurfaceGrid) -> String {
    let mut out = String::from("alpha,beta,J,basis\n");
    for (i, &alpha) in surface.alpha.iter().enumerate() {
        let label = surface.provenance[i].label();
        for (j, &beta) in surface.beta.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(alpha),
                fmt_f64(beta),
                fmt_f64(surface.value_at(i, j)),
                label,
            );
        }
    }
    out
}

/// `a,b,J`, one row per trajectory point in the surface's coordinates.
pub fn overlay_csv(surface: &SurfaceGrid) -> String {
    let mut out = String::from("a,b,J\n");
    for p in &surface.overlay {
        let _ = writeln!(out, "{},{},{}", fmt_f64(p.a), fmt_f64(p.b), fmt_f64(p.value));
    }
    out
}

/// The whole surface as one JSON object: axes, row-major value matrix,
/// per-column basis labels, trajectory overlay, and fixed directions when
/// the scan used any.
pub fn surface_json(surface: &SurfaceGrid) -> String {
    let values: Vec<Vec<f64>> = surface
        .alpha
        .iter()
        .enumerate()
        .map(|(i, _)| {
            (0..surface.beta.len())
                .map(|j| surface.value_at(i, j))
                .collect()
        })
        .collect();
    let object = serde_json::json!({
        "alpha": surface.alpha,
        "beta": surface.beta,
        "values": values,
        "basis": surface.provenance.iter().map(|p| p.label()).collect::<Vec<_>>(),
        "overlay": surface
            .overlay
            .iter()
            .map(|p| serde_json::json!({"a": p.a, "b": p.b, "J": p.value}))
            .collect::<Vec<_>>(),
        "dir1": surface.dir1,
        "dir2": surface.dir2,
    });
    let mut text = serde_json::to_string_pretty(&object).expect("serialising plain data");
    text.push('\n');
    text
}

/// `epoch,J_train[,J_valid]`, one row per training epoch (epoch 0 is the
/// untrained objective).
pub fn learning_curve_csv(record: &TrajectoryRecord) -> String {
    let mut out = String::from("epoch,J_train");
    if record.valid_objective().is_some() {
        out.push_str(",J_valid");
    }
    out.push('\n');
    for (epoch, &j) in record.train_objective().iter().enumerate() {
        let _ = write!(out, "{epoch},{}", fmt_f64(j));
        if let Some(valid) = record.valid_objective() {
            let _ = write!(out, ",{}", fmt_f64(valid[epoch]));
        }
        out.push('\n');
    }
    out
}

/// `t,discrepancy,first_order_step,second_order_step`, one row per checked
/// flow time.
pub fn taylor_csv(rows: &[TaylorRow]) -> String {
    let mut out = String::from("t,discrepancy,first_order_step,second_order_step\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.discrepancy),
            fmt_f64(r.first_order_step),
            fmt_f64(r.second_order_step),
        );
    }
    out
}
