//! Standalone SVG heatmap of `P_m(t)`: sites across, time downwards.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fluxlattice::dynamics::EvolutionRecord;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeatmapError {
    #[error("record has no samples or no lattice sites")]
    EmptyRecord,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 480.0;
const LEFT: f64 = 64.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 48.0;
const RIGHT: f64 = 96.0;
const MAX_ROWS: usize = 240;
const LEVELS: usize = 64;

/// Viridis anchor colours, interpolated linearly.
const STOPS: [(f64, [f64; 3]); 5] = [
    (0.00, [68.0, 1.0, 84.0]),
    (0.25, [59.0, 82.0, 139.0]),
    (0.50, [33.0, 145.0, 140.0]),
    (0.75, [94.0, 201.0, 98.0]),
    (1.00, [253.0, 231.0, 37.0]),
];

fn colour(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let i = STOPS.iter().rposition(|(x, _)| *x <= v).unwrap_or(0).min(STOPS.len() - 2);
    let (x0, c0) = STOPS[i];
    let (x1, c1) = STOPS[i + 1];
    let s = (v - x0) / (x1 - x0);
    let c: Vec<u8> = (0..3).map(|j| (c0[j] + s * (c1[j] - c0[j])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Quantised colour level of a normalised value; level 0 is the background.
fn level(v: f64) -> usize {
    ((v * LEVELS as f64).floor() as usize).min(LEVELS - 1)
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

/// Renders the record to an SVG document. Colours scale linearly from zero
/// to the largest `P_m` in the record; `markers` are drawn as dashed columns.
pub fn heatmap_svg(record: &EvolutionRecord, markers: &[i64]) -> Result<String, HeatmapError> {
    let n_sites = record.n_sites();
    if record.is_empty() || n_sites == 0 {
        return Err(HeatmapError::EmptyRecord);
    }
    let rows = record.len().min(MAX_ROWS);
    let pick: Vec<usize> = (0..rows)
        .map(|r| if rows == 1 { 0 } else { (r * (record.len() - 1) + (rows - 1) / 2) / (rows - 1) })
        .collect();
    let peak = record.p_m.iter().flatten().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let cw = PLOT_W / n_sites as f64;
    let rh = PLOT_H / rows as f64;
    let t0 = record.times[0];
    let t1 = *record.times.last().unwrap();

    let width = LEFT + PLOT_W + RIGHT;
    let height = TOP + PLOT_H + BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="{}"/>"#, colour(0.0));
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for site in 0..n_sites {
        let m = record.m_min + site as i64;
        // merge vertical runs of equal colour
        let mut r = 0;
        while r < rows {
            let lv = level(record.p_m[pick[r]][site] * scale);
            let mut end = r + 1;
            while end < rows && level(record.p_m[pick[end]][site] * scale) == lv {
                end += 1;
            }
            if lv > 0 {
                let _ = writeln!(
                    s,
                    r#"<rect data-m="{m}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    LEFT + site as f64 * cw,
                    TOP + r as f64 * rh,
                    cw,
                    (end - r) as f64 * rh,
                    colour((lv as f64 + 0.5) / LEVELS as f64)
                );
            }
            r = end;
        }
    }
    let _ = writeln!(s, "</g>");

    for &m in markers {
        if m < record.m_min || m >= record.m_min + n_sites as i64 {
            continue;
        }
        let x = LEFT + ((m - record.m_min) as f64 + 0.5) * cw;
        let _ = writeln!(
            s,
            r##"<line class="coupling" x1="{x:.3}" y1="{TOP}" x2="{x:.3}" y2="{}" stroke="#ff4d4d" stroke-width="1" stroke-dasharray="4 3"/>"##,
            TOP + PLOT_H
        );
    }

    // axes
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#);
    let (m_lo, m_hi) = (record.m_min, record.m_min + n_sites as i64 - 1);
    let step = nice_step((m_hi - m_lo) as f64, 8).max(1.0) as i64;
    let mut m = m_lo.div_euclid(step) * step;
    while m <= m_hi {
        if m >= m_lo {
            let x = LEFT + ((m - m_lo) as f64 + 0.5) * cw;
            let y = TOP + PLOT_H;
            let _ = writeln!(s, r#"<line x1="{x:.3}" y1="{y}" x2="{x:.3}" y2="{}" stroke="black"/>"#, y + 4.0);
            let _ = writeln!(s, r#"<text x="{x:.3}" y="{}" text-anchor="middle">{m}</text>"#, y + 16.0);
        }
        m += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">site m</text>"#,
        LEFT + PLOT_W / 2.0,
        TOP + PLOT_H + 36.0
    );
    if t1 > t0 {
        let step = nice_step(t1 - t0, 6);
        let digits = (-step.log10()).ceil().max(0.0) as usize;
        let mut k = (t0 / step).ceil() as i64;
        while k as f64 * step <= t1 + 1e-9 * step {
            let t = k as f64 * step;
            let y = TOP + (t - t0) / (t1 - t0) * PLOT_H;
            let _ = writeln!(s, r#"<line x1="{}" y1="{y:.3}" x2="{LEFT}" y2="{y:.3}" stroke="black"/>"#, LEFT - 4.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.3}" text-anchor="end">{t:.digits$}</text>"#, LEFT - 6.0, y + 4.0);
            k += 1;
        }
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">time (1/J)</text>"#,
        TOP + PLOT_H / 2.0
    );

    // colour bar
    let bx = LEFT + PLOT_W + 24.0;
    for i in 0..LEVELS {
        let y = TOP + PLOT_H * (1.0 - (i + 1) as f64 / LEVELS as f64);
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{y:.3}" width="14" height="{:.3}" fill="{}"/>"#,
            PLOT_H / LEVELS as f64 + 0.5,
            colour((i as f64 + 0.5) / LEVELS as f64)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{:.3e}</text>"#, bx + 18.0, TOP + 8.0, peak);
    let _ = writeln!(s, r#"<text x="{}" y="{}">0</text>"#, bx + 18.0, TOP + PLOT_H);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">P_m</text>"#, bx + 7.0, TOP - 8.0);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes [`heatmap_svg`] to `path`. Nothing is written on error.
pub fn render_heatmap(record: &EvolutionRecord, markers: &[i64], path: &Path) -> Result<(), HeatmapError> {
    let svg = heatmap_svg(record, markers)?;
    fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colour_map_ends() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
        assert_eq!(level(1.0), LEVELS - 1);
    }

    #[test]
    fn tick_steps() {
        assert_eq!(nice_step(199.0, 8), 50.0);
        assert_eq!(nice_step(20.0, 6), 5.0);
        assert_eq!(nice_step(100.0, 6), 20.0);
    }
}
