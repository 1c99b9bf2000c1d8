use std::fmt::Write as _;

use super::{AccuracyTable, ErrorReport};
use crate::prompt::Strategy;
use crate::taxonomy::ErrorLabel;

const PLOT_H: f64 = 200.0;
const BAR_W: f64 = 18.0;
const GAP: f64 = 24.0;
const LEFT: f64 = 50.0;
const PANEL_PAD: f64 = 70.0;

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn strategy_color(s: Strategy) -> &'static str {
    let i = Strategy::ALL.iter().position(|x| *x == s).unwrap_or(0);
    PALETTE[i]
}

/// One panel per direction; bars grouped by model, one per strategy,
/// height proportional to the correct count.
pub fn accuracy_svg(t: &AccuracyTable) -> String {
    let dirs = t.directions();
    let max_n = t.rows.iter().map(|r| r.n).max().unwrap_or(1).max(1) as f64;
    let strategies: Vec<Strategy> = Strategy::ALL.into_iter().filter(|s| t.rows.iter().any(|r| r.strategy == *s)).collect();
    let widest = dirs
        .iter()
        .map(|d| {
            let mut models: Vec<&str> = t.rows.iter().filter(|r| r.direction == *d).map(|r| r.model.as_str()).collect();
            models.dedup();
            models.len()
        })
        .max()
        .unwrap_or(1);
    let group_w = strategies.len() as f64 * BAR_W + GAP;
    let width = LEFT + widest as f64 * group_w + 160.0;
    let panel_h = PLOT_H + PANEL_PAD;
    let height = dirs.len() as f64 * panel_h + 20.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    for (pi, d) in dirs.iter().enumerate() {
        let top = 30.0 + pi as f64 * panel_h;
        let base = top + PLOT_H;
        let _ = writeln!(
            s,
            r#"<g class="panel" data-direction="{}"><text x="{LEFT:.0}" y="{:.2}" font-weight="bold">Correctly translated queries ({})</text>"#,
            esc(d),
            top - 10.0,
            esc(d)
        );
        let _ = writeln!(s, r#"<line x1="{LEFT:.0}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#, width - 150.0);
        let mut models: Vec<&str> = t.rows.iter().filter(|r| r.direction == *d).map(|r| r.model.as_str()).collect();
        models.dedup();
        for (gi, m) in models.iter().enumerate() {
            let gx = LEFT + 10.0 + gi as f64 * group_w;
            for (si, st) in strategies.iter().enumerate() {
                let Some(r) = t.rows.iter().find(|r| r.direction == *d && r.model == *m && r.strategy == *st) else {
                    continue;
                };
                let h = r.correct as f64 / max_n * PLOT_H;
                let x = gx + si as f64 * BAR_W;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}" data-model="{}" data-strategy="{}" data-correct="{}"/>"#,
                    base - h,
                    BAR_W - 2.0,
                    strategy_color(*st),
                    esc(m),
                    st.name(),
                    r.correct
                );
                let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="9">{}</text>"#, x, base - h - 3.0, r.correct);
            }
            let _ = writeln!(s, r#"<text x="{gx:.2}" y="{:.2}">{}</text>"#, base + 14.0, esc(m));
        }
        s.push_str("</g>\n");
    }
    for (i, st) in strategies.iter().enumerate() {
        let y = 30.0 + i as f64 * 16.0;
        let x = width - 140.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.0}" y="{:.0}" width="10" height="10" fill="{}"/><text x="{:.0}" y="{y:.0}">{}</text>"#,
            y - 9.0,
            strategy_color(*st),
            x + 14.0,
            st.name()
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bars: one group per error category, one bar per direction.
pub fn errors_svg(r: &ErrorReport) -> String {
    let max = r.directions.iter().flat_map(|d| d.counts.iter().copied()).max().unwrap_or(0).max(1) as f64;
    let group_w = r.directions.len() as f64 * BAR_W + GAP;
    let width = LEFT + 8.0 * group_w + 180.0;
    let height = PLOT_H + 120.0;
    let base = 30.0 + PLOT_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{LEFT:.0}" y="20" font-weight="bold">Distribution of error types</text>"#);
    let _ = writeln!(s, r#"<line x1="{LEFT:.0}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#, width - 170.0);
    for (gi, l) in ErrorLabel::TABLE_ORDER.iter().enumerate() {
        let gx = LEFT + 10.0 + gi as f64 * group_w;
        for (di, d) in r.directions.iter().enumerate() {
            let c = d.count(*l);
            let h = c as f64 / max * PLOT_H;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}" data-label="{}" data-direction="{}" data-count="{c}"/>"#,
                gx + di as f64 * BAR_W,
                base - h,
                BAR_W - 2.0,
                PALETTE[di % PALETTE.len()],
                l.code(),
                esc(&d.direction)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{gx:.2}" y="{:.2}" transform="rotate(30 {gx:.2} {:.2})" font-size="9">{}</text>"#,
            base + 12.0,
            base + 12.0,
            l.code()
        );
    }
    for (i, d) in r.directions.iter().enumerate() {
        let y = 30.0 + i as f64 * 16.0;
        let x = width - 160.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.0}" y="{:.0}" width="10" height="10" fill="{}"/><text x="{:.0}" y="{y:.0}">Target KG: {}</text>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            esc(&d.target)
        );
    }
    s.push_str("</svg>\n");
    s
}
