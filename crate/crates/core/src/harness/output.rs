use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::algorithms::SolveReport;

pub const TRACE_HEADER: &str = "iter,elapsed_s,residual_inf,residual_l2_sq,backups,evaluations,step_kind";

pub fn trace_csv(report: &SolveReport) -> String {
    let mut out = String::with_capacity(64 * (report.trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in &report.trace {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{},{},{}",
            t.iter, t.elapsed_s, t.residual_inf, t.residual_l2_sq, t.backups, t.evaluations, t.step_kind
        );
    }
    out
}

pub fn emit_trace_csv(report: &SolveReport, path: impl AsRef<Path>) -> io::Result<()> {
    write_creating_dirs(path.as_ref(), &trace_csv(report))
}

pub(crate) fn write_creating_dirs(path: &Path, text: &str) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const FLOOR: f64 = 1e-16;

/// Log-scale residual against elapsed time, one polyline per report.
pub fn residual_plot_svg(reports: &[&SolveReport]) -> String {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (80.0, 160.0, 30.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let points = || reports.iter().flat_map(|r| r.trace.iter());
    let t_max = points().map(|t| t.elapsed_s).fold(0.0, f64::max).max(1e-6);
    let logs = || points().map(|t| t.residual_inf.max(FLOOR).log10());
    let mut y_lo = logs().fold(f64::INFINITY, f64::min).floor();
    let mut y_hi = logs().fold(f64::NEG_INFINITY, f64::max).ceil();
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (-1.0, 0.0);
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let x = |t: f64| left + pw * t / t_max;
    let y = |r: f64| top + ph * (y_hi - r.max(FLOOR).log10()) / (y_hi - y_lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let step = ((y_hi - y_lo) / 8.0).ceil().max(1.0);
    let mut e = y_lo;
    while e <= y_hi {
        let yy = top + ph * (y_hi - e) / (y_hi - y_lo);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">1e{}</text>"##,
            left + pw,
            left - 6.0,
            yy + 4.0,
            e as i64
        );
        e += step;
    }
    for i in 0..=4 {
        let t = t_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{t:.3}</text>"#,
            x(t),
            top + ph + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">elapsed time (s)</text>"#,
        left + pw / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.1})">Bellman residual (inf-norm)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (k, r) in reports.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = r.trace.iter().map(|t| format!("{:.2},{:.2}", x(t.elapsed_s), y(t.residual_inf))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 10.0 + 18.0 * k as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            r.algorithm
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_residual_plot(reports: &[&SolveReport], path: impl AsRef<Path>) -> io::Result<()> {
    if reports.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no reports to plot"));
    }
    write_creating_dirs(path.as_ref(), &residual_plot_svg(reports))
}
