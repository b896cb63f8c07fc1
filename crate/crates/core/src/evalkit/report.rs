//! Deterministic CSV and SVG writers for evaluation results.

use super::{BaselineResult, EvalReport, SubsetSearch, SupporterMatrix};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::io::Write;

pub const BASELINES_HEADER: [&str; 3] = ["metric_id", "accuracy", "n"];
pub const CV_HEADER: [&str; 4] = ["cycle", "accuracy", "n_train", "n_test"];
pub const SUBSET_HEADER: [&str; 3] = ["size", "metric_ids", "median_accuracy"];
pub const SUPPORTERS_HEADER: [&str; 4] = ["supported", "supporter", "accuracy", "count"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io("<report>", source),
        other => Error::InvalidArgument(format!("csv write failed: {other:?}")),
    }
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io("<report>", e.into_error()))?
        .flush()
        .map_err(|e| Error::io("<report>", e))
}

pub fn write_baselines<W: Write>(rows: &[BaselineResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BASELINES_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.metric_id.clone(), r.accuracy.to_string(), r.n.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// One row per cycle followed by a `median` row.
pub fn write_cv_report<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CV_HEADER).map_err(csv_err)?;
    for c in &report.cycles {
        w.write_record([
            c.cycle.to_string(),
            c.accuracy.to_string(),
            c.n_train.to_string(),
            c.n_test.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.write_record(["median".to_string(), report.median_accuracy.to_string(), String::new(), String::new()])
        .map_err(csv_err)?;
    finish(w)
}

fn write_subset_rows<'a, W: Write>(rows: impl Iterator<Item = &'a super::SubsetResult>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUBSET_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.size().to_string(), r.metric_ids.join("+"), r.median_accuracy().to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_subset_search<W: Write>(search: &SubsetSearch, out: W) -> Result<()> {
    write_subset_rows(search.results.iter(), out)
}

/// Best subset of each size, same columns as the full table.
pub fn write_subset_best<W: Write>(search: &SubsetSearch, out: W) -> Result<()> {
    write_subset_rows(search.best_per_size().into_iter(), out)
}

/// Only the populated cells, in row-major order.
pub fn write_supporters<W: Write>(matrix: &SupporterMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUPPORTERS_HEADER).map_err(csv_err)?;
    let ids = matrix.metric_ids();
    for (s, sid) in ids.iter().enumerate() {
        for (t, tid) in ids.iter().enumerate() {
            if let Some(cell) = matrix.cell(s, t) {
                w.write_record([sid.clone(), tid.clone(), cell.accuracy.to_string(), cell.count.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Median accuracy of every subset against its size, with the best-per-size
/// curve drawn on top.
pub fn subset_scatter_svg(search: &SubsetSearch) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 60.0, 20.0, 30.0, 50.0);
    let max_size = search.results.iter().map(|r| r.size()).max().unwrap_or(1).max(1);
    let accs = search.results.iter().map(|r| r.median_accuracy());
    let lo = accs.clone().fold(f64::INFINITY, f64::min);
    let hi = accs.fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() {
        let pad = ((hi - lo) * 0.1).max(0.01);
        ((lo - pad).max(0.0), (hi + pad).min(1.0))
    } else {
        (0.0, 1.0)
    };
    let px = |size: usize| left + (w - left - right) * (size as f64 - 0.5) / max_size as f64;
    let py = |acc: f64| top + (h - top - bottom) * (1.0 - (acc - lo) / (hi - lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{left}" y1="{top}" x2="{left}" y2="{y0}" stroke="black"/>"#,
        y0 = h - bottom,
        x1 = w - right
    );
    for size in 1..=max_size {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{size}</text>"#,
            px(size),
            h - bottom + 16.0
        );
    }
    for i in 0..=4 {
        let acc = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            left - 6.0,
            py(acc) + 4.0,
            acc
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">subset size</text>"#,
        (left + w - right) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">median accuracy</text>"#,
        h / 2.0,
        h / 2.0
    );
    for r in &search.results {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#4477aa" fill-opacity="0.6"><title>{} {:.4}</title></circle>"##,
            px(r.size()),
            py(r.median_accuracy()),
            escape(&r.metric_ids.join("+")),
            r.median_accuracy()
        );
    }
    let points: Vec<String> = search
        .best_per_size()
        .iter()
        .map(|r| format!("{:.2},{:.2}", px(r.size()), py(r.median_accuracy())))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#cc3311" stroke-width="2"/>"##,
        points.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}

/// Grid of supporter accuracies; rows are supported metrics, columns supporters.
pub fn supporter_heatmap_svg(matrix: &SupporterMatrix) -> String {
    let ids = matrix.metric_ids();
    let k = ids.len();
    let (cell, left, top) = (48.0, 110.0, 110.0);
    let w = left + cell * k as f64 + 20.0;
    let h = top + cell * k as f64 + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (i, id) in ids.iter().enumerate() {
        let c = left + cell * (i as f64 + 0.5);
        let r = top + cell * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            r + 4.0,
            escape(id)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{c:.2}" y="{:.2}" text-anchor="start" transform="rotate(-60 {c:.2} {:.2})">{}</text>"#,
            top - 6.0,
            top - 6.0,
            escape(id)
        );
    }
    for s in 0..k {
        for t in 0..k {
            let x = left + cell * t as f64;
            let y = top + cell * s as f64;
            match matrix.cell(s, t) {
                Some(c) => {
                    let shade = (255.0 * (1.0 - c.accuracy)).round() as u8;
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{x:.2}" y="{y:.2}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="white"><title>{} by {}: {:.4} of {}</title></rect>"#,
                        escape(&ids[s]),
                        escape(&ids[t]),
                        c.accuracy,
                        c.count
                    );
                    let ink = if c.accuracy > 0.6 { "white" } else { "black" };
                    let _ = writeln!(
                        svg,
                        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="{ink}">{:.2}</text>"#,
                        x + cell / 2.0,
                        y + cell / 2.0 + 4.0,
                        c.accuracy
                    );
                }
                None => {
                    let _ = writeln!(
                        svg,
                        r##"<rect x="{x:.2}" y="{y:.2}" width="{cell}" height="{cell}" fill="#dddddd" stroke="white"/>"##
                    );
                }
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}
