//! CSV, metadata and SVG writers.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::run::RunOutput;

pub const CSV_SCHEMA: &str = "toa-lab-csv/1";

/// Comment line with the schema version, a column header, then one row per time sample.
pub fn csv(scheme: &str, out: &RunOutput) -> String {
    let mut s = format!("# schema={CSV_SCHEMA} scheme={scheme}\n");
    let names: Vec<&str> = out.columns.iter().map(|c| c.0).collect();
    s.push_str(&names.join(","));
    s.push('\n');
    let rows = out.columns[0].1.len();
    for i in 0..rows {
        for (j, (_, col)) in out.columns.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            // 17 significant digits.
            let _ = write!(s, "{:.16e}", col[i]);
        }
        s.push('\n');
    }
    s
}

pub struct MetaInput<'a> {
    pub raw: &'a Value,
    pub resolved: Value,
    pub out: &'a RunOutput,
    pub threads: usize,
    pub seed: u64,
    pub wall_clock: Option<f64>,
}

pub fn meta(m: &MetaInput) -> String {
    let mut resolved = match &m.resolved {
        Value::Object(o) => o.clone(),
        _ => Map::new(),
    };
    resolved.insert("threads".into(), json!(m.threads));
    resolved.insert("seed".into(), json!(m.seed));
    resolved.insert(
        "versions".into(),
        json!({"toa_lab": env!("CARGO_PKG_VERSION"), "csv_schema": CSV_SCHEMA}),
    );
    let mut summary = m.out.summary.clone();
    summary.insert("warnings".into(), json!(m.out.warnings));
    summary.insert("rows".into(), json!(m.out.columns[0].1.len()));
    let tolerances: Map<String, Value> = m.out.checks.iter().map(|c| (c.name.to_string(), c.to_json())).collect();
    let v = json!({
        "scenario": m.raw,
        "resolved_params": resolved,
        "results_summary": summary,
        "tolerances": tolerances,
        "timings": {"wall_clock_s": m.wall_clock.map(crate::run::num)},
    });
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

/// Line plot of every non-`t` column against `t`.
pub fn svg(title: &str, out: &RunOutput) -> String {
    let (w, h, pad) = (720.0, 440.0, 50.0);
    let t = &out.columns[0].1;
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let series = &out.columns[1..];
    let finite = series.iter().flat_map(|c| c.1.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
    let sx = |x: f64| pad + (x - t0) / (t1 - t0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - lo) / (hi - lo) * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(s, r#"<text x="{pad}" y="20">{title}</text>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}">t = {t0:.3} .. {t1:.3}</text>"#, w / 2.0 - 40.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="5" y="{}">{lo:.3e}</text><text x="5" y="{}">{hi:.3e}</text>"#, h - pad, pad);
    for (k, (name, col)) in series.iter().enumerate() {
        let c = colors[k % colors.len()];
        let mut d = String::new();
        let mut pen = false;
        for (x, y) in t.iter().zip(col) {
            if !y.is_finite() {
                pen = false;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen { "L" } else { "M" }, sx(*x), sy(*y));
            pen = true;
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, d.trim_end());
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{c}">{name}</text>"#, w - pad - 110.0, pad + 16.0 * k as f64);
    }
    s.push_str("</svg>\n");
    s
}
