use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::experiment::{ConvergenceReport, CurveSample};
use crate::error::{Error, Result};
use crate::io::{create, fmt17, write_json};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg];
}

fn csv_line<W: Write>(w: &mut W, fields: &[String]) -> Result<()> {
    writeln!(w, "{}", fields.join(","))?;
    Ok(())
}

pub fn write_rows_csv<W: Write>(report: &ConvergenceReport, mut w: W) -> Result<()> {
    csv_line(
        &mut w,
        &[
            "n", "t_n", "alpha_n", "h", "seeds", "sup_error_median", "sup_error_iqr", "l2_error_median",
            "l2_error_iqr", "sup_error_smoothed_median", "sup_error_smoothed_iqr",
            "l2_error_smoothed_median", "l2_error_smoothed_iqr", "assumptions",
        ]
        .map(String::from),
    )?;
    for r in &report.rows {
        let mut fields = vec![r.n.to_string()];
        fields.extend([r.t_n, r.alpha_n, r.h].map(fmt17));
        fields.push(r.seeds.to_string());
        fields.extend(
            [
                r.sup_error_median,
                r.sup_error_iqr,
                r.l2_error_median,
                r.l2_error_iqr,
                r.sup_error_smoothed_median,
                r.sup_error_smoothed_iqr,
                r.l2_error_smoothed_median,
                r.l2_error_smoothed_iqr,
            ]
            .map(fmt17),
        );
        fields.push(r.assumptions.clone());
        csv_line(&mut w, &fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_decay_csv<W: Write>(report: &ConvergenceReport, mut w: W) -> Result<()> {
    let Some(decay) = &report.decay else {
        return Ok(());
    };
    csv_line(
        &mut w,
        &[
            "n", "t_n", "alpha_n", "h", "x", "seeds", "term_i_mean_abs", "term_i_median_abs",
            "term_iii_mean", "term_iii_std_err", "term_iii_second_moment", "assumptions",
        ]
        .map(String::from),
    )?;
    for r in &decay.rows {
        let mut fields = vec![r.n.to_string()];
        fields.extend([r.t_n, r.alpha_n, r.h, r.x].map(fmt17));
        fields.push(r.seeds.to_string());
        fields.extend(
            [
                r.term_i_mean_abs,
                r.term_i_median_abs,
                r.term_iii_mean,
                r.term_iii_std_err,
                r.term_iii_second_moment,
            ]
            .map(fmt17),
        );
        fields.push(r.assumptions.clone());
        csv_line(&mut w, &fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_seeds_csv<W: Write>(report: &ConvergenceReport, mut w: W) -> Result<()> {
    csv_line(
        &mut w,
        &[
            "n", "replication", "h", "defined_points", "sup_error", "l2_error", "sup_error_smoothed",
            "l2_error_smoothed", "term_i_ratio", "term_iii", "mass",
        ]
        .map(String::from),
    )?;
    for s in &report.seeds {
        let mut fields = vec![s.n.to_string(), s.replication.to_string(), fmt17(s.h), s.defined_points.to_string()];
        fields.extend(
            [
                s.sup_error,
                s.l2_error,
                s.sup_error_smoothed,
                s.l2_error_smoothed,
                s.term_i_ratio,
                s.term_iii,
                s.mass,
            ]
            .map(fmt17),
        );
        csv_line(&mut w, &fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_sample_csv<W: Write>(curve: &CurveSample, mut w: W) -> Result<()> {
    csv_line(&mut w, &["x", "b_hat", "mass", "defined", "b", "b_smoothed"].map(String::from))?;
    for i in 0..curve.x.len() {
        let b = curve.b_hat[i];
        csv_line(
            &mut w,
            &[
                fmt17(curve.x[i]),
                fmt17(b.unwrap_or(f64::NAN)),
                fmt17(curve.mass[i]),
                u8::from(b.is_some()).to_string(),
                fmt17(curve.truth[i]),
                fmt17(curve.smoothed[i]),
            ],
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One named polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    /// Base-2 logarithmic with ticks at powers of two.
    Log2,
}

impl Scale {
    fn map(self, v: f64) -> Option<f64> {
        match self {
            Scale::Linear => v.is_finite().then_some(v),
            Scale::Log2 => (v > 0.0 && v.is_finite()).then(|| v.log2()),
        }
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn ticks(lo: f64, hi: f64, scale: Scale) -> Vec<(f64, String)> {
    match scale {
        Scale::Log2 => {
            let (a, b) = (lo.floor() as i64, hi.ceil() as i64);
            (a..=b)
                .filter(|&e| (e as f64) >= lo - 1e-9 && (e as f64) <= hi + 1e-9)
                .map(|e| (e as f64, format!("2^{e}")))
                .collect()
        }
        Scale::Linear => {
            let span = (hi - lo).max(1e-12);
            let raw = span / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(mag * 10.0);
            let start = (lo / step).ceil() as i64;
            let end = (hi / step).floor() as i64;
            (start..=end).map(|i| (i as f64 * step, format!("{}", i as f64 * step))).collect()
        }
    }
}

/// Static SVG line plot; points that cannot be shown on a log axis are dropped.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], x_scale: Scale, y_scale: Scale) -> String {
    let mapped: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter_map(|&(x, y)| Some((x_scale.map(x)?, y_scale.map(y)?)))
                .collect()
        })
        .collect();
    let all = mapped.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if y_scale == Scale::Log2 {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" fill="none" stroke="black"/>"#
    );
    for (t, label) in ticks(x0, x1, x_scale) {
        let x = px(t);
        let _ = writeln!(
            svg,
            r#"<line class="xtick" x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#,
            bottom + 5.0,
            bottom + 18.0
        );
    }
    for (t, label) in ticks(y0, y1, y_scale) {
        let y = py(t);
        let _ = writeln!(
            svg,
            r#"<line class="ytick" x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (i, (s, pts)) in series.iter().zip(&mapped).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            escape(&s.name),
            coords.join(" ")
        );
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly:.2}" fill="{color}">{}</text>"#,
            right - 150.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn error_plot(report: &ConvergenceReport) -> String {
    let col = |f: fn(&super::experiment::ConvergenceRow) -> f64| -> Vec<(f64, f64)> {
        report.rows.iter().map(|r| (r.n as f64, f(r))).collect()
    };
    let series = [
        Series { name: "median sup error".into(), points: col(|r| r.sup_error_median) },
        Series { name: "median L2 error".into(), points: col(|r| r.l2_error_median) },
        Series { name: "median sup error (smoothed)".into(), points: col(|r| r.sup_error_smoothed_median) },
    ];
    line_plot_svg("Estimation error", "n", "error", &series, Scale::Log2, Scale::Log2)
}

pub fn curve_plot(report: &ConvergenceReport) -> String {
    let mut series = Vec::new();
    if let Some(first) = report.curves.last() {
        series.push(Series {
            name: "drift".into(),
            points: first.x.iter().copied().zip(first.truth.iter().copied()).collect(),
        });
    }
    for c in &report.curves {
        series.push(Series {
            name: format!("n = {}", c.n),
            points: c.x.iter().zip(&c.b_hat).filter_map(|(&x, b)| b.map(|b| (x, b))).collect(),
        });
    }
    line_plot_svg("Estimated drift", "x", "b(x)", &series, Scale::Linear, Scale::Linear)
}

pub fn decay_plot(report: &ConvergenceReport) -> Option<String> {
    let decay = report.decay.as_ref()?;
    let series = [
        Series {
            name: "mean |I/S|".into(),
            points: decay.rows.iter().map(|r| (r.n as f64, r.term_i_mean_abs)).collect(),
        },
        Series {
            name: "E[III^2]".into(),
            points: decay.rows.iter().map(|r| (r.n as f64, r.term_iii_second_moment)).collect(),
        },
    ];
    Some(line_plot_svg("Term decay", "n", "value", &series, Scale::Log2, Scale::Log2))
}

/// Write the requested formats under `dir`; returns the files written.
pub fn emit_report(report: &ConvergenceReport, formats: &[ReportFormat], dir: &Path) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() && report.decay.as_ref().is_none_or(|d| d.rows.is_empty()) {
        return Err(Error::EmptyReport);
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, f: &dyn Fn(&mut dyn Write) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut w = create(&path)?;
        f(&mut w)?;
        w.flush()?;
        written.push(path);
        Ok(())
    };
    for format in formats {
        match format {
            ReportFormat::Csv => {
                if !report.rows.is_empty() {
                    put("report.csv".into(), &|w| write_rows_csv(report, w))?;
                }
                if report.decay.is_some() {
                    put("decay.csv".into(), &|w| write_decay_csv(report, w))?;
                }
                put("seeds.csv".into(), &|w| write_seeds_csv(report, w))?;
                for c in &report.curves {
                    put(format!("curves_n{}.csv", c.n), &|w| write_curve_sample_csv(c, w))?;
                }
            }
            ReportFormat::Json => put("report.json".into(), &|w| write_json(report, w))?,
            ReportFormat::Svg => {
                if !report.rows.is_empty() {
                    put("plot_error.svg".into(), &|w| Ok(w.write_all(error_plot(report).as_bytes())?))?;
                    put("plot_curves.svg".into(), &|w| Ok(w.write_all(curve_plot(report).as_bytes())?))?;
                }
                if let Some(svg) = decay_plot(report) {
                    put("plot_decay.svg".into(), &|w| Ok(w.write_all(svg.as_bytes())?))?;
                }
            }
        }
    }
    Ok(written)
}
