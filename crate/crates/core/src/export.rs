//! CSV and JSON renderings of grids, campaign results and tables.
//!
//! CSV files are UTF-8 with a header row, '.' decimal separator and numbers
//! printed with 6 significant digits.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::bounds::{BoundCell, BoundGrid};
use crate::campaign::{los_histogram, CampaignResult, PercentileRow, SweepRow};
use crate::Point3;

/// Formats `v` with 6 significant digits, plain notation for moderate
/// magnitudes and exponent notation otherwise.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding may carry into a new leading digit (9.999996 -> 10.00000).
    let rounded: f64 = s.parse().unwrap_or(v);
    if rounded.abs() >= 10f64.powi(exp + 1) && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{v:.decimals$}");
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_default()
}

/// Columns: `x_m, y_m, gdop_2d, crlb_rmse_2d_m, crlb_rmse_3d_m, singular_flag`.
/// Singular values are left empty and flagged with `1`.
pub fn grid_csv(grid: &BoundGrid) -> String {
    let mut out = String::from("x_m,y_m,gdop_2d,crlb_rmse_2d_m,crlb_rmse_3d_m,singular_flag\n");
    for c in &grid.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sig6(c.x),
            sig6(c.y),
            opt(c.gdop_2d),
            opt(c.crlb_rmse_2d),
            opt(c.crlb_rmse_3d),
            u8::from(c.singular())
        );
    }
    out
}

fn cell_value(v: Option<f64>) -> Value {
    match v {
        Some(v) => json!(v),
        None => json!({ "singular": true }),
    }
}

fn field_rows(grid: &BoundGrid, field: impl Fn(&BoundCell) -> Option<f64>) -> Value {
    Value::Array(
        grid.cells
            .chunks(grid.nx)
            .map(|row| Value::Array(row.iter().map(|c| cell_value(field(c))).collect()))
            .collect(),
    )
}

/// Row-major 2D arrays (`ny` rows of `nx` values, origin at the hall corner).
/// Singular cells are encoded as `{"singular": true}`.
pub fn grid_json(grid: &BoundGrid) -> Value {
    let xs: Vec<f64> = grid.cells[..grid.nx].iter().map(|c| c.x).collect();
    let ys: Vec<f64> = grid.cells.iter().step_by(grid.nx).map(|c| c.y).collect();
    let range = |f: fn(&BoundCell) -> Option<f64>| {
        grid.range_of(f)
            .map(|(lo, hi)| json!({ "min": lo, "max": hi }))
            .unwrap_or(Value::Null)
    };
    json!({
        "origin": grid.origin,
        "cell_size": grid.cell_size,
        "nx": grid.nx,
        "ny": grid.ny,
        "height_m": grid.height,
        "sigma_toa_m": grid.sigma_toa_m,
        "x_m": xs,
        "y_m": ys,
        "gdop_2d": field_rows(grid, |c| c.gdop_2d),
        "crlb_rmse_2d_m": field_rows(grid, |c| c.crlb_rmse_2d),
        "crlb_rmse_3d_m": field_rows(grid, |c| c.crlb_rmse_3d),
        "range": {
            "gdop_2d": range(|c| c.gdop_2d),
            "crlb_rmse_2d_m": range(|c| c.crlb_rmse_2d),
            "crlb_rmse_3d_m": range(|c| c.crlb_rmse_3d),
        },
        "singular_cells": grid.singular_count(),
    })
}

/// Columns: `error_m, cumulative_probability`.
pub fn cdf_csv(result: &CampaignResult) -> String {
    let mut out = String::from("error_m,cumulative_probability\n");
    let n = result.summary.cdf.len();
    for (i, e) in result.summary.cdf.iter().enumerate() {
        let _ = writeln!(out, "{},{}", sig6(*e), sig6((i + 1) as f64 / n as f64));
    }
    out
}

pub fn drops_csv(result: &CampaignResult) -> String {
    let mut out = String::from(
        "drop,x_m,y_m,z_m,estimate_x_m,estimate_y_m,estimate_z_m,horizontal_error_m,n_los_links,available,converged\n",
    );
    for d in &result.drops {
        let p = d.true_position;
        let e = d.estimate;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            d.index,
            sig6(p.x),
            sig6(p.y),
            sig6(p.z),
            opt(e.map(|e| e.x)),
            opt(e.map(|e| e.y)),
            opt(e.map(|e| e.z)),
            opt(d.horizontal_error),
            d.n_los_links,
            u8::from(d.available),
            u8::from(d.converged)
        );
    }
    out
}

/// Columns: `n_los_links, n_ues, fraction`.
pub fn los_histogram_csv(result: &CampaignResult) -> String {
    let hist = los_histogram(result);
    let total = result.drops.len().max(1) as f64;
    let mut out = String::from("n_los_links,n_ues,fraction\n");
    for (k, &n) in hist.iter().enumerate() {
        let _ = writeln!(out, "{k},{n},{}", sig6(n as f64 / total));
    }
    out
}

/// Columns: `deployment, p80_m, p90_m, p95_m`.
pub fn percentile_table_csv<'a>(rows: impl IntoIterator<Item = (&'a str, Option<PercentileRow>)>) -> String {
    let mut out = String::from("deployment,p80_m,p90_m,p95_m\n");
    for (label, row) in rows {
        let _ = writeln!(
            out,
            "{label},{},{},{}",
            opt(row.map(|r| r.p80)),
            opt(row.map(|r| r.p90)),
            opt(row.map(|r| r.p95))
        );
    }
    out
}

/// Columns: `n_trps, p80_m, p90_m, p95_m, availability`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n_trps,p80_m,p90_m,p95_m,availability\n");
    for r in rows {
        let p = r.percentiles;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n_trps,
            opt(p.map(|p| p.p80)),
            opt(p.map(|p| p.p90)),
            opt(p.map(|p| p.p95)),
            sig6(r.availability_fraction)
        );
    }
    out
}

/// Columns: `x_m, y_m, z_m`.
pub fn points_csv(points: &[Point3]) -> String {
    let mut out = String::from("x_m,y_m,z_m\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", sig6(p.x), sig6(p.y), sig6(p.z));
    }
    out
}
