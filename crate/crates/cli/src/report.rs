//! CSV tables and SVG line plots.

use std::fmt::Write as _;
use std::io::Write;

use heatlmi_core::Trajectory;

use crate::error::CliError;

fn csv_error(e: csv::Error) -> CliError {
    CliError::Other(format!("csv: {e}"))
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(traj.csv_header()).map_err(csv_error)?;
    for k in 0..traj.len() {
        w.write_record(traj.csv_row(k).iter().map(|x| x.to_string()))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Field `z(x, t)` on `points` uniform nodes, one row per snapshot.
pub fn write_field<W: Write>(traj: &Trajectory, points: usize, snapshots: usize, out: W) -> Result<(), CliError> {
    let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let stride = (traj.len() / snapshots.max(1)).max(1);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(grid.iter().map(|x| format!("x={x}")));
    w.write_record(&header).map_err(csv_error)?;
    let mut rows: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    if rows.last() != Some(&(traj.len() - 1)) {
        rows.push(traj.len() - 1);
    }
    for k in rows {
        let z = heatlmi_core::sim::reconstruct_z(&traj.w[k], traj.u[k], &grid);
        let mut rec = vec![traj.times[k].to_string()];
        rec.extend(z.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Table cell: a value, `-` when infeasible, `?` on error.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    Infeasible,
    Error(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Value(v) => format!("{v:.3}"),
            Cell::Infeasible => "-".into(),
            Cell::Error(_) => "?".into(),
        }
    }
}

/// Rows `tau_y`, columns `N`.
pub fn write_table<W: Write>(ns: &[usize], tau_y: &[f64], cells: &[Vec<Cell>], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    if ns.is_empty() {
        w.write_record(["tau_my"]).map_err(csv_error)?;
        w.flush()?;
        return Ok(());
    }
    let mut header = vec!["tau_my".to_string()];
    header.extend(ns.iter().map(|n| format!("N={n}")));
    w.write_record(&header).map_err(csv_error)?;
    for (t, row) in tau_y.iter().zip(cells) {
        let mut rec = vec![format!("{t}")];
        rec.extend(row.iter().map(Cell::render));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One series plotted as a polyline plus an optional straight reference line.
pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    /// `(intercept, slope)` of the reference line and its legend.
    pub reference: Option<(f64, f64, &'a str)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const PAD: f64 = 60.0;
const MAX_POINTS: usize = 2000;

pub fn svg(plot: &Plot) -> String {
    let stride = (plot.x.len() / MAX_POINTS).max(1);
    let pts: Vec<(f64, f64)> = plot
        .x
        .iter()
        .zip(plot.y)
        .step_by(stride)
        .chain(plot.x.last().zip(plot.y.last()))
        .filter(|(_, y)| y.is_finite())
        .map(|(x, y)| (*x, *y))
        .collect();
    let (x0, x1) = bounds(pts.iter().map(|p| p.0));
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    if let Some((c, s, _)) = plot.reference {
        ys.push(c + s * x0);
        ys.push(c + s * x1);
    }
    let (y0, y1) = bounds(ys.into_iter());
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * PAD);
    let sy = |y: f64| HEIGHT - PAD - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * PAD,
        HEIGHT - 2.0 * PAD
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            HEIGHT - PAD + 16.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            PAD - 6.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(plot.y_label)
    );
    let path: Vec<String> = pts
        .iter()
        .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        path.join(" ")
    );
    if let Some((c, slope, label)) = plot.reference {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="6,4"/>"#,
            sx(x0),
            sy(c + slope * x0),
            sx(x1),
            sy(c + slope * x1)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="firebrick" text-anchor="end">{}</text>"#,
            WIDTH - PAD - 6.0,
            PAD + 16.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
