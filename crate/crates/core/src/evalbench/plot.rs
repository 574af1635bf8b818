use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::geometry::{Boundary, Point2};
use crate::model::FienoModel;
use crate::trainer::predict;
use crate::truth::Dataset;

use super::BenchError;

const SIZE: f64 = 420.0;
const MARGIN: f64 = 20.0;
const BAR: f64 = 70.0;
const OUTLINE_POINTS: usize = 720;

/// Viridis control points.
const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Pred,
    Truth,
    Error,
}

impl PlotKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlotKind::Pred => "pred",
            PlotKind::Truth => "truth",
            PlotKind::Error => "error",
        }
    }
}

/// Colour for `t ∈ [0, 1]`.
pub(crate) fn colormap(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|k| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn normalise(v: f64, vmin: f64, vmax: f64) -> f64 {
    if vmax > vmin {
        (v - vmin) / (vmax - vmin)
    } else {
        0.0
    }
}

/// `{equation}_{bc}_{boundary}_{n}_{kind}.svg`, with characters that are
/// awkward in file names replaced.
pub fn plot_file_name(data: &Dataset, kind: PlotKind) -> String {
    let eq = data.pde.equation.to_string().replace([':', '='], "_");
    format!(
        "{eq}_{}_{}_{}_{}.svg",
        data.pde.bc_kind,
        data.shape_id,
        data.interior.len(),
        kind.as_str()
    )
}

/// One scatter plot with the boundary outline and a colour bar.
pub(crate) fn render_scatter(
    boundary: &Boundary,
    points: &[Point2],
    values: &[f64],
    vmin: f64,
    vmax: f64,
    title: &str,
) -> String {
    let extent = boundary.max_radius() * 1.05;
    let scale = (SIZE - 2.0 * MARGIN) / (2.0 * extent);
    let px = |x: f64| MARGIN + (x + extent) * scale;
    let py = |y: f64| MARGIN + (extent - y) * scale;

    let mut s = String::new();
    let width = SIZE + BAR;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{h}" viewBox="0 0 {width} {h}" data-vmin="{vmin:e}" data-vmax="{vmax:e}">"#,
        h = SIZE + MARGIN
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="14" font-family="sans-serif" font-size="12">{title}</text>"#
    );

    let outline: Vec<String> = (0..OUTLINE_POINTS)
        .map(|i| {
            let p = boundary.point(std::f64::consts::TAU * i as f64 / OUTLINE_POINTS as f64);
            format!("{:.2},{:.2}", px(p.x), py(p.y))
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polygon id="boundary" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        outline.join(" ")
    );

    let _ = writeln!(s, r#"<g id="points">"#);
    for (p, v) in points.iter().zip(values) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" data-value="{v:e}"/>"#,
            px(p.x),
            py(p.y),
            colormap(normalise(*v, vmin, vmax))
        );
    }
    let _ = writeln!(s, "</g>");

    let (bx, by, bh) = (SIZE + 10.0, MARGIN + 20.0, SIZE - 3.0 * MARGIN - 20.0);
    let _ = writeln!(
        s,
        r#"<defs><linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">"#
    );
    for (i, _) in STOPS.iter().enumerate() {
        let t = i as f64 / (STOPS.len() - 1) as f64;
        let _ = writeln!(s, r#"<stop offset="{t}" stop-color="{}"/>"#, colormap(t));
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(
        s,
        r#"<rect x="{bx}" y="{by}" width="14" height="{bh}" fill="url(#scale)" stroke="black" stroke-width="0.5"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10">{vmax:.3e}</text>"#,
        bx - 4.0,
        by - 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10">{vmin:.3e}</text>"#,
        bx - 4.0,
        by + bh + 12.0
    );
    s.push_str("</svg>\n");
    s
}

/// Writes prediction, truth and squared-error scatter plots of `data` into
/// `out_dir`. Prediction and truth share one colour scale; the error plot
/// runs from 0 to the largest per-point squared error.
pub fn emit_plots(model: &FienoModel, data: &Dataset, out_dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let boundary = data.boundary_curve()?;
    let points = data.points();
    let truth = data.truths();
    let pred = predict(model, data)?;
    let err: Vec<f64> = pred.iter().zip(&truth).map(|(p, t)| (p - t) * (p - t)).collect();

    let lo = pred.iter().chain(&truth).copied().fold(f64::INFINITY, f64::min);
    let hi = pred.iter().chain(&truth).copied().fold(f64::NEG_INFINITY, f64::max);
    let emax = err.iter().copied().fold(0.0, f64::max);

    fs::create_dir_all(out_dir)?;
    let label = format!("{} / {} / {}", data.pde.equation, data.pde.bc_kind, data.shape_id);
    let mut paths = Vec::new();
    for (kind, values, vmin, vmax) in [
        (PlotKind::Pred, &pred, lo, hi),
        (PlotKind::Truth, &truth, lo, hi),
        (PlotKind::Error, &err, 0.0, emax),
    ] {
        let title = format!("{label}: {}", kind.as_str());
        let svg = render_scatter(&boundary, &points, values, vmin, vmax, &title);
        let path = out_dir.join(plot_file_name(data, kind));
        fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}
