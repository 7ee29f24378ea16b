//! Minimal SVG line charts of CSV columns.

use std::fmt::Write as _;

use super::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    /// x column; the first column when unset.
    pub x: Option<String>,
    /// y columns; every other column when empty.
    pub columns: Vec<String>,
    pub log_y: bool,
    pub title: Option<String>,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_csv(text: &str) -> Result<Table, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Input("empty CSV".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().unwrap_or(f64::NAN))
            .collect();
        if cells.len() != header.len() {
            return Err(CliError::Input(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                cells.len(),
                header.len()
            )));
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }
    Ok(Table { header, rows })
}

fn column(t: &Table, name: &str) -> Result<usize, CliError> {
    t.header.iter().position(|h| h == name).ok_or_else(|| {
        CliError::Input(format!(
            "unknown column `{name}`; available columns: {}",
            t.header.join(", ")
        ))
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Compact tick label.
fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    /// Log axes use `log10(1 + v)` so that iteration 0 is drawable.
    fn fwd(&self, v: f64) -> f64 {
        if self.log {
            (1.0 + v).log10()
        } else {
            v
        }
    }

    fn fit(log: bool, values: impl Iterator<Item = f64>) -> Option<Self> {
        let probe = Axis { log, lo: 0.0, hi: 1.0 };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v >= 0.0)) {
            let u = probe.fwd(v);
            lo = lo.min(u);
            hi = hi.max(u);
        }
        if !lo.is_finite() {
            return None;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Axis { log, lo, hi })
    }

    /// Position in `0..=1` along the axis.
    fn frac(&self, v: f64) -> f64 {
        (self.fwd(v) - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let mut t = Vec::new();
            let mut v = 0.0f64;
            let mut p = 1.0f64;
            while self.fwd(v) <= self.hi + 1e-9 {
                if self.fwd(v) >= self.lo - 1e-9 {
                    t.push(v);
                }
                v = p;
                p *= 10.0;
            }
            t
        } else {
            (0..=4).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0).collect()
        }
    }
}

/// Renders the selected columns against the x column as SVG polylines. The x
/// axis is logarithmic for iteration columns.
pub fn cmd_plot(csv: &str, opts: &PlotOptions) -> Result<String, CliError> {
    let t = parse_csv(csv)?;
    let x_name = opts.x.clone().unwrap_or_else(|| t.header[0].clone());
    let xi = column(&t, &x_name)?;
    let ys: Vec<usize> = if opts.columns.is_empty() {
        (0..t.header.len()).filter(|&i| i != xi).collect()
    } else {
        opts.columns.iter().map(|c| column(&t, c)).collect::<Result<_, _>>()?
    };
    if ys.is_empty() {
        return Err(CliError::Input("no y columns to plot".into()));
    }
    let log_x = matches!(x_name.as_str(), "iteration" | "checkpoint_iter");
    let xa = Axis::fit(log_x, t.rows.iter().map(|r| r[xi]))
        .ok_or_else(|| CliError::Input(format!("column `{x_name}` has no plottable values")))?;
    let usable = |v: f64| v.is_finite() && (!opts.log_y || v > 0.0);
    let ya = {
        let vals = t.rows.iter().flat_map(|r| ys.iter().map(move |&j| r[j])).filter(|&v| usable(v));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in vals {
            let u = if opts.log_y { v.log10() } else { v };
            lo = lo.min(u);
            hi = hi.max(u);
        }
        if !lo.is_finite() {
            return Err(CliError::Input("selected columns have no plottable values".into()));
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        (lo, hi)
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + xa.frac(v) * plot_w;
    let py = |v: f64| {
        let u = if opts.log_y { v.log10() } else { v };
        TOP + (1.0 - (u - ya.0) / (ya.1 - ya.0)) * plot_h
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if let Some(title) = &opts.title {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(title)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for v in xa.ticks() {
        let x = px(v);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            label(v)
        );
    }
    for i in 0..=4 {
        let u = ya.0 + (ya.1 - ya.0) * i as f64 / 4.0;
        let v = if opts.log_y { 10f64.powf(u) } else { u };
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            label(v)
        );
    }
    let x_label = if log_x { format!("{x_name} (log scale)") } else { x_name.clone() };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(&x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        if opts.log_y { "value (log scale)" } else { "value" }
    );
    for (n, &j) in ys.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let points: Vec<String> = t
            .rows
            .iter()
            .filter(|r| usable(r[j]) && r[xi].is_finite() && (!log_x || r[xi] >= 0.0))
            .map(|r| format!("{:.2},{:.2}", px(r[xi]), py(r[j])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * n as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&t.header[j])
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const METRICS: &str = "iteration,train_loss,train_error,test_error,train_variance,strong_test_variance,weak_test_variance
0,2.3,0.9,0.9,5,5,3
10,1.0,0.5,0.5,2,2.5,1
100,0.1,0,0.2,0.5,1,0.5
";

    #[test]
    fn two_columns_two_polylines() {
        let svg = cmd_plot(
            METRICS,
            &PlotOptions {
                columns: vec!["train_variance".into(), "strong_test_variance".into()],
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("iteration (log scale)"));
        assert!(svg.contains(">strong_test_variance<"));
    }

    #[test]
    fn errors() {
        let e = cmd_plot(METRICS, &PlotOptions { columns: vec!["nope".into()], ..Default::default() }).unwrap_err();
        assert!(e.to_string().contains("train_variance"), "{e}");
        let header_only = METRICS.lines().next().unwrap();
        let e = cmd_plot(header_only, &PlotOptions::default()).unwrap_err();
        assert_eq!(e.to_string(), "no data rows");
    }

    #[test]
    fn linear_x_and_determinism() {
        let sweep = "n_train,final_train_loss,final_train_variance,final_strong_test_variance,final_test_error
1000,1e-4,0.3,0.4,0.1
2000,1e-4,0.35,0.38,0.08
4000,1e-4,0.4,0.36,0.06
8000,1e-4,0.45,0.34,0.04
";
        let opts = PlotOptions {
            columns: vec!["final_train_variance".into()],
            ..Default::default()
        };
        let a = cmd_plot(sweep, &opts).unwrap();
        assert_eq!(a, cmd_plot(sweep, &opts).unwrap());
        assert!(!a.contains("log scale"));
        let poly = a.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let points = poly.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        assert_eq!(points.split(' ').count(), 4);
    }
}
