//! Minimal self-contained SVG line plots.

use std::fmt::Write as _;

use crate::margins::NyquistRow;
use crate::types::TraceRow;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 15.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
/// Series longer than this are decimated.
const MAX_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy)]
enum Stroke {
    Solid,
    Dashed,
    DashDot,
}

impl Stroke {
    fn dasharray(self) -> &'static str {
        match self {
            Stroke::Solid => "",
            Stroke::Dashed => " stroke-dasharray=\"6,4\"",
            Stroke::DashDot => " stroke-dasharray=\"8,3,2,3\"",
        }
    }
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    stroke: Stroke,
    points: Vec<(f64, f64)>,
}

struct Panel<'a> {
    title: &'a str,
    x_label: &'a str,
    log_x: bool,
    series: Vec<Series<'a>>,
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        Some((lo - pad, hi + pad))
    } else {
        let pad = 0.05 * (hi - lo);
        Some((lo - pad, hi + pad))
    }
}

fn decimate(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points;
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let last = *points.last().unwrap();
    let mut out: Vec<_> = points.into_iter().step_by(stride).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Panel<'_> {
    fn render(&self, out: &mut String, ox: f64, oy: f64) {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| tx(p.0)));
        let ys = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
        let (Some((x0, x1)), Some((y0, y1))) = (bounds(xs), bounds(ys)) else {
            return;
        };
        let pw = PANEL_W - MARGIN_L - MARGIN_R;
        let ph = PANEL_H - MARGIN_T - MARGIN_B;
        let px = |x: f64| ox + MARGIN_L + (tx(x) - x0) / (x1 - x0) * pw;
        let py = |y: f64| oy + MARGIN_T + (y1 - y) / (y1 - y0) * ph;

        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#444"/>"##,
            ox + MARGIN_L,
            oy + MARGIN_T
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
            ox + MARGIN_L + pw / 2.0,
            oy + MARGIN_T - 10.0,
            escape(self.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            ox + MARGIN_L + pw / 2.0,
            oy + PANEL_H - 5.0,
            escape(self.x_label)
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let x_val = if self.log_x { 10f64.powf(fx) } else { fx };
            let sx = ox + MARGIN_L + pw * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{sx:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                oy + MARGIN_T + ph + 14.0,
                tick_label(x_val)
            );
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let sy = py(fy);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{sy:.1}" x2="{:.1}" y2="{sy:.1}" stroke="#ddd"/>"##,
                ox + MARGIN_L,
                ox + MARGIN_L + pw
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
                ox + MARGIN_L - 4.0,
                sy + 3.0,
                tick_label(fy)
            );
        }
        for (i, s) in self.series.iter().enumerate() {
            let mut d = String::new();
            let mut pen_down = false;
            for &(x, y) in &s.points {
                if !x.is_finite() || !y.is_finite() || (self.log_x && x <= 0.0) {
                    pen_down = false;
                    continue;
                }
                let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, px(x), py(y));
                pen_down = true;
            }
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.2"{}/>"#,
                d.trim_end(),
                s.color,
                s.stroke.dasharray()
            );
            let ly = oy + MARGIN_T + 12.0 + 13.0 * i as f64;
            let lx = ox + MARGIN_L + pw - 110.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="1.2"{}/>"#,
                lx + 20.0,
                s.color,
                s.stroke.dasharray()
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
                lx + 24.0,
                ly + 3.0,
                escape(s.label)
            );
        }
    }
}

fn document(title: &str, panels: &[Panel<'_>]) -> String {
    let width = PANEL_W * panels.len() as f64;
    let height = PANEL_H + 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="18" font-size="15" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut out, PANEL_W * i as f64, 30.0);
    }
    out.push_str("</svg>\n");
    out
}

fn series<'a>(
    label: &'a str,
    color: &'a str,
    stroke: Stroke,
    rows: &[TraceRow],
    f: impl Fn(&TraceRow) -> f64,
) -> Series<'a> {
    Series {
        label,
        color,
        stroke,
        points: decimate(rows.iter().map(|r| (r.t, f(r))).collect()),
    }
}

/// Control, setpoint/reference/output and F/F_est panels side by side.
pub fn time_series_svg(trace: &[TraceRow], title: &str) -> String {
    let panels = [
        Panel {
            title: "Control",
            x_label: "t (s)",
            log_x: false,
            series: vec![series("u", "blue", Stroke::Solid, trace, |r| r.u)],
        },
        Panel {
            title: "Setpoint, Reference and Output",
            x_label: "t (s)",
            log_x: false,
            series: vec![
                series("setpoint", "black", Stroke::DashDot, trace, |r| r.setpoint),
                series("reference", "red", Stroke::Dashed, trace, |r| r.y_star),
                series("output", "blue", Stroke::Solid, trace, |r| r.y),
            ],
        },
        Panel {
            title: "F and F_est",
            x_label: "t (s)",
            log_x: false,
            series: vec![
                series("F", "red", Stroke::Dashed, trace, |r| r.f_true),
                series("F_est", "blue", Stroke::Solid, trace, |r| r.f_est),
            ],
        },
    ];
    document(title, &panels)
}

/// Nyquist plane and Bode magnitude/phase panels.
pub fn frequency_svg(rows: &[NyquistRow], title: &str) -> String {
    let pts = |f: &dyn Fn(&NyquistRow) -> (f64, f64)| decimate(rows.iter().map(f).collect());
    let panels = [
        Panel {
            title: "Nyquist",
            x_label: "Re T(jw)",
            log_x: false,
            series: vec![
                Series {
                    label: "T(jw)",
                    color: "blue",
                    stroke: Stroke::Solid,
                    points: pts(&|r| (r.re, r.im)),
                },
                Series {
                    label: "-1",
                    color: "red",
                    stroke: Stroke::Solid,
                    points: vec![(-1.0, -0.02), (-1.0, 0.02)],
                },
            ],
        },
        Panel {
            title: "Gain (dB)",
            x_label: "w (rad/s)",
            log_x: true,
            series: vec![Series {
                label: "|T|",
                color: "blue",
                stroke: Stroke::Solid,
                points: pts(&|r| (r.omega, r.gain_db)),
            }],
        },
        Panel {
            title: "Phase (deg)",
            x_label: "w (rad/s)",
            log_x: true,
            series: vec![Series {
                label: "arg T",
                color: "blue",
                stroke: Stroke::Solid,
                points: pts(&|r| (r.omega, r.phase_deg)),
            }],
        },
    ];
    document(title, &panels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimation_keeps_endpoints() {
        let pts: Vec<(f64, f64)> = (0..10_001).map(|i| (i as f64, 0.0)).collect();
        let d = decimate(pts);
        assert!(d.len() <= MAX_POINTS + 1);
        assert_eq!(d.first().unwrap().0, 0.0);
        assert_eq!(d.last().unwrap().0, 10_000.0);
    }

    #[test]
    fn flat_series_gets_a_range() {
        let (lo, hi) = bounds([2.0, 2.0].into_iter()).unwrap();
        assert!(lo < 2.0 && hi > 2.0);
        assert!(bounds([f64::NAN].into_iter()).is_none());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let rows: Vec<TraceRow> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.1;
                TraceRow {
                    t,
                    setpoint: 1.0,
                    y_star: t.min(1.0),
                    y: t.min(1.0) * 0.9,
                    u: 1.0,
                    f_true: 0.0,
                    f_est: 0.01,
                    e: 0.1,
                    integral_e: 0.0,
                }
            })
            .collect();
        let svg = time_series_svg(&rows, "a < b");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 6);
        assert!(svg.contains("a &lt; b"));
    }
}
