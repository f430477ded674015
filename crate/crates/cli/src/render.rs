//! Deterministic SVG panels: field magnitude heatmap and coefficient stem plot.
//!
//! Colour ramp for the heatmap, linear in magnitude between the panel minimum
//! and maximum, interpolated piecewise-linearly through five stops:
//! `#440154` (min), `#3b528b`, `#21918c`, `#5ec962`, `#fde725` (max).

use std::f64::consts::PI;
use std::fmt::Write;

use sfot::eval::default_region;
use sfot::{CoefficientVector, PlaneWaveDictionary, Rect};

use crate::error::CliResult;

pub const RAMP: [[u8; 3]; 5] = [
    [0x44, 0x01, 0x54],
    [0x3b, 0x52, 0x8b],
    [0x21, 0x91, 0x8c],
    [0x5e, 0xc9, 0x62],
    [0xfd, 0xe7, 0x25],
];

/// Cells per side of the rendered field.
pub const FIELD_RESOLUTION: usize = 64;
const CELL_PX: usize = 6;

/// Colour for `t ∈ [0, 1]`; values outside are clamped.
pub fn ramp(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (RAMP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(RAMP.len() - 2);
    let f = pos - i as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let (a, b) = (RAMP[i][c] as f64, RAMP[i + 1][c] as f64);
        *o = (a + (b - a) * f).round() as u8;
    }
    out
}

fn hex([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heatmap of `|p̂|` over the evaluation region.
pub fn field_svg(
    dict: &PlaneWaveDictionary<f64>,
    coeffs: &CoefficientVector<f64>,
) -> CliResult<String> {
    let region: Rect<f64> = default_region();
    let n = FIELD_RESOLUTION;
    let grid = dict.field_grid(coeffs, region, n, n)?;
    let mags: Vec<f64> = grid.values.iter().map(|z| z.norm()).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let map = n * CELL_PX;
    let (left, top) = (40, 40);
    let bar_x = left + map + 20;
    let width = bar_x + 90;
    let height = top + map + 20;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="24">|p| over {:.2} m x {:.2} m</text>"#,
        region.x_max - region.x_min,
        region.y_max - region.y_min
    );
    for i in 0..n {
        for j in 0..n {
            let t = (mags[i * n + j] - lo) / span;
            // y grows upwards in the region, downwards in SVG
            let x = left + i * CELL_PX;
            let y = top + (n - 1 - j) * CELL_PX;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL_PX}" height="{CELL_PX}" fill="{}"/>"#,
                hex(ramp(t))
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{map}" height="{map}" fill="none" stroke="black"/>"#
    );
    let steps = 64;
    let step_px = map as f64 / steps as f64;
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            top as f64 + k as f64 * step_px,
            step_px + 0.05,
            hex(ramp(t))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">max {hi:.4e}</text>"#,
        bar_x + 20,
        top + 10
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">min {lo:.4e}</text>"#,
        bar_x + 20,
        top + map
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Stem plot of `|Φ̂_l|` against direction in degrees.
pub fn coefficients_svg(
    dict: &PlaneWaveDictionary<f64>,
    coeffs: &CoefficientVector<f64>,
) -> String {
    let (width, height) = (640.0, 320.0);
    let (left, right, top, bottom) = (50.0, 20.0, 40.0, 40.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let base = top + plot_h;
    let mags: Vec<f64> = coeffs.values().iter().map(|z| z.norm()).collect();
    let hi = mags.iter().copied().fold(0.0, f64::max);
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = if hi > 0.0 { plot_h / hi } else { 0.0 };
    let xpos = |theta: f64| left + (theta + PI) / (2.0 * PI) * plot_w;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="24">|coefficient| by direction</text>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
        left + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#
    );
    for deg in [-180, -90, 0, 90, 180] {
        let x = xpos(deg as f64 * PI / 180.0);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{base}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            base + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{deg}</text>"#,
            base + 18.0
        );
    }
    for (&theta, &m) in dict.directions().iter().zip(&mags) {
        let x = xpos(theta);
        let y = base - m * scale;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{base}" x2="{x:.2}" y2="{y:.2}" stroke="#3b528b"/>"##
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#3b528b"/>"##
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="end">min {lo:.4e}, max {hi:.4e}</text>"#,
        left + plot_w
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">direction (deg)</text>"#,
        left + plot_w / 2.0,
        height - 4.0
    );
    s.push_str("</svg>\n");
    s
}
