//! SVG charts of a backtest report: fan charts of pooled densities, stacked weight areas
//! with the cumulative scenario-view share, and PIT histograms. Every chart is written
//! next to a CSV holding exactly the plotted numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluator::{EvaluationReport, MethodResult};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 13] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1f77b4", "#8c564b", "#17becf",
];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn points(&self, xs: &[f64], ys: &[f64]) -> String {
        xs.iter()
            .zip(ys)
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(*x), self.py(*y)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Closed polygon between a lower and an upper curve.
    fn band(&self, xs: &[f64], lo: &[f64], hi: &[f64]) -> String {
        let mut pts = self.points(xs, hi);
        let rev_x: Vec<f64> = xs.iter().rev().copied().collect();
        let rev_lo: Vec<f64> = lo.iter().rev().copied().collect();
        pts.push(' ');
        pts.push_str(&self.points(&rev_x, &rev_lo));
        pts
    }
}

fn open_svg(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{MARGIN}\" y=\"25\" font-family=\"sans-serif\" font-size=\"15\">{title}</text>\n"
    )
}

fn axes(svg: &mut String, f: &Frame, labels: &[(f64, String)], y_ticks: &[f64]) {
    let _ = writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for (x, label) in labels {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{label}</text>",
            f.px(*x),
            HEIGHT - MARGIN + 15.0
        );
    }
    for y in y_ticks {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{y}</text>",
            MARGIN - 5.0,
            f.py(*y) + 3.0
        );
    }
}

fn year_labels(periods: &[crate::domain::Quarter]) -> Vec<(f64, String)> {
    let step = (periods.len() / 8).max(1);
    periods
        .iter()
        .enumerate()
        .filter(|(i, q)| q.quarter() == 1 && i % step < 4)
        .map(|(i, q)| (i as f64, q.year().to_string()))
        .fold(Vec::new(), |mut acc: Vec<(f64, String)>, item| {
            if acc.last().is_none_or(|l| item.0 - l.0 >= step as f64) {
                acc.push(item);
            }
            acc
        })
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 {
        out.push((t / step).round() * step);
        t += step;
    }
    out
}

/// Fan chart of the percentile paths with the realized series on top.
pub fn fan_chart_svg(m: &MethodResult, levels: &[f64]) -> Result<String> {
    let rows: Vec<_> = m.periods.iter().filter(|p| p.percentiles.is_some()).collect();
    if rows.is_empty() {
        return Err(Error::invalid(format!("method {} has no percentile series", m.method)));
    }
    let xs: Vec<f64> = (0..rows.len()).map(|i| i as f64).collect();
    let col = |j: usize| -> Vec<f64> { rows.iter().map(|p| p.percentiles.as_ref().unwrap()[j]).collect() };
    let realized: Vec<f64> = rows.iter().map(|p| p.realized).collect();
    let all = (0..levels.len()).flat_map(col).chain(realized.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let f = Frame::new(0.0, (rows.len() - 1).max(1) as f64, lo, hi);
    let mut svg = open_svg(&format!("Density forecast percentiles ({})", m.method));
    let n = levels.len();
    // nested bands drawn outermost first; overlapping translucency darkens the centre
    for j in 0..n / 2 {
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"#c0392b\" fill-opacity=\"0.18\" stroke=\"none\"/>",
            f.band(&xs, &col(j), &col(n - 1 - j)),
        );
    }
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
        f.points(&xs, &realized)
    );
    let periods: Vec<_> = rows.iter().map(|p| p.target).collect();
    axes(&mut svg, &f, &year_labels(&periods), &nice_ticks(lo, hi));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Stacked areas of view weights with the cumulative scenario-view share as a line.
/// Returns the SVG and the plotted table (`period`, one column per view, `scenario_total`).
pub fn weights_area_svg(m: &MethodResult, view_ids: &[u32], scenario: &[bool]) -> Result<(String, String)> {
    let rows: Vec<_> = m.periods.iter().filter(|p| p.weights.is_some()).collect();
    if rows.is_empty() {
        return Err(Error::invalid(format!("method {} has no weight series", m.method)));
    }
    let xs: Vec<f64> = (0..rows.len()).map(|i| i as f64).collect();
    let f = Frame::new(0.0, (rows.len() - 1).max(1) as f64, 0.0, 1.0);
    let mut svg = open_svg(&format!("Pooling weights ({})", m.method));
    let mut lower = vec![0.0; rows.len()];
    for (v, id) in view_ids.iter().enumerate() {
        let upper: Vec<f64> = rows
            .iter()
            .zip(&lower)
            .map(|(p, l)| l + p.weights.as_ref().unwrap()[v])
            .collect();
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{}\" stroke=\"none\"><title>view {id}</title></polygon>",
            f.band(&xs, &lower, &upper),
            PALETTE[v % PALETTE.len()]
        );
        lower = upper;
    }
    let fed: Vec<f64> = rows
        .iter()
        .map(|p| {
            p.weights
                .as_ref()
                .unwrap()
                .iter()
                .zip(scenario)
                .filter(|(_, s)| **s)
                .map(|(w, _)| w)
                .sum()
        })
        .collect();
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\" \
         stroke-dasharray=\"6,3\"><title>scenario views, cumulative</title></polyline>",
        f.points(&xs, &fed)
    );
    let periods: Vec<_> = rows.iter().map(|p| p.target).collect();
    axes(&mut svg, &f, &year_labels(&periods), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    svg.push_str("</svg>\n");

    let mut table = String::from("period");
    for id in view_ids {
        let _ = write!(table, ",view_{id}");
    }
    table.push_str(",scenario_total\n");
    for (p, fed) in rows.iter().zip(&fed) {
        table.push_str(&p.target.to_string());
        for w in p.weights.as_ref().unwrap() {
            let _ = write!(table, ",{w}");
        }
        let _ = writeln!(table, ",{fed}");
    }
    Ok((svg, table))
}

/// Ten-bin PIT histogram with the uniform reference line. Returns SVG and bin counts CSV.
pub fn pit_histogram_svg(m: &MethodResult) -> Result<(String, String)> {
    if m.periods.is_empty() {
        return Err(Error::invalid(format!("method {} has no PITs", m.method)));
    }
    const BINS: usize = 10;
    let mut counts = [0usize; BINS];
    for p in &m.periods {
        counts[((p.pit * BINS as f64) as usize).min(BINS - 1)] += 1;
    }
    let n = m.periods.len() as f64;
    let dens: Vec<f64> = counts.iter().map(|&c| c as f64 / n * BINS as f64).collect();
    let top = dens.iter().copied().fold(1.5, f64::max);
    let f = Frame::new(0.0, 1.0, 0.0, top);
    let mut svg = open_svg(&format!("PIT histogram ({})", m.method));
    for (b, d) in dens.iter().enumerate() {
        let (x0, x1) = (b as f64 / BINS as f64, (b + 1) as f64 / BINS as f64);
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4e79a7\" stroke=\"white\"/>",
            f.px(x0),
            f.py(*d),
            f.px(x1) - f.px(x0),
            f.py(0.0) - f.py(*d)
        );
    }
    let _ = writeln!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#e15759\" stroke-dasharray=\"4,3\"/>",
        f.px(0.0),
        f.px(1.0),
        y = f.py(1.0)
    );
    let labels: Vec<(f64, String)> = (0..=5).map(|i| (i as f64 / 5.0, format!("{:.1}", i as f64 / 5.0))).collect();
    axes(&mut svg, &f, &labels, &nice_ticks(0.0, top));
    svg.push_str("</svg>\n");
    let mut table = String::from("bin_lower,bin_upper,count,density\n");
    for (b, (&c, d)) in counts.iter().zip(&dens).enumerate() {
        let _ = writeln!(table, "{},{},{c},{d}", b as f64 / BINS as f64, (b + 1) as f64 / BINS as f64);
    }
    Ok((svg, table))
}

/// Writes every chart the report supports into `outdir` and returns the created files.
pub fn emit_plots(report: &EvaluationReport, outdir: &Path) -> Result<Vec<PathBuf>> {
    if report.methods.is_empty() {
        return Err(Error::invalid("report has no methods to plot"));
    }
    fs::create_dir_all(outdir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> Result<()> {
        let path = outdir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for m in &report.methods {
        let tag = m.method.tag();
        if m.periods.iter().any(|p| p.percentiles.is_some()) {
            put(format!("fan_{tag}.svg"), &fan_chart_svg(m, &report.fan_levels)?)?;
        }
        if m.periods.iter().any(|p| p.weights.is_some()) {
            let (svg, table) = weights_area_svg(m, &report.view_ids, &report.scenario_views)?;
            put(format!("weights_{tag}.svg"), &svg)?;
            put(format!("weights_{tag}.csv"), &table)?;
        }
        let (svg, table) = pit_histogram_svg(m)?;
        put(format!("pit_{tag}.svg"), &svg)?;
        put(format!("pit_{tag}.csv"), &table)?;
    }
    Ok(written)
}
