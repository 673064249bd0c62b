//! Metrics files, tables and SVG plots.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ablation::AblationRow;
use super::metrics::EvalReport;
use crate::{AffectLabel, Error, Result};

pub const METRICS_VERSION: u32 = 1;

/// Machine-readable result of `crossval` (one row) or `ablate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

impl MetricsFile {
    pub fn new(config_hash: impl Into<String>, seed: u64, rows: Vec<AblationRow>) -> Self {
        MetricsFile {
            format_version: METRICS_VERSION,
            config_hash: config_hash.into(),
            seed,
            rows,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MetricsFile =
            serde_json::from_str(text).map_err(|e| Error::format("metrics", e.to_string()))?;
        if m.format_version != METRICS_VERSION {
            return Err(Error::format(
                "metrics",
                format!("unsupported format version {}", m.format_version),
            ));
        }
        Ok(m)
    }
}

/// Rows are predictions, columns ground truth.
pub fn confusion_csv(report: &EvalReport) -> String {
    let mut out = String::from("predicted\\truth");
    for l in AffectLabel::ALL {
        write!(out, ",{}", l.name()).unwrap();
    }
    out.push('\n');
    for p in AffectLabel::ALL {
        out.push_str(p.name());
        for t in AffectLabel::ALL {
            write!(out, ",{}", report.confusion[p.index()][t.index()]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Markdown comparison table, one line per row, accuracies in percent.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::from(
        "| Cell | Branches | Features | Data | C | T | F | D | Overall | Overall w/o F |\n\
         |---|---|---|---|---:|---:|---:|---:|---:|---:|\n",
    );
    for row in rows {
        let c = &row.cell;
        let a = &row.report.per_class_accuracy;
        writeln!(
            out,
            "| {} | {} | {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |",
            c.cell.name().to_ascii_uppercase(),
            c.branches,
            c.features,
            if c.augmented { "augmented" } else { "base" },
            a[0],
            a[1],
            a[2],
            a[3],
            row.report.overall,
            row.report.no_frustrated
        )
        .unwrap();
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Per-class accuracy bars on a 0-100 scale.
pub fn accuracy_bars_svg(title: &str, report: &EvalReport) -> String {
    let (w, h, left, bottom, top) = (420.0, 300.0, 50.0, 40.0, 40.0);
    let plot_h = h - bottom - top;
    let slot = (w - left - 20.0) / AffectLabel::COUNT as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    for tick in [0, 25, 50, 75, 100] {
        let y = top + plot_h * (1.0 - tick as f64 / 100.0);
        writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{tick}</text>",
            w - 20.0,
            left - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    for (c, label) in AffectLabel::ALL.iter().enumerate() {
        let acc = report.per_class_accuracy[c];
        let bar_h = plot_h * acc / 100.0;
        let x = left + slot * c as f64 + slot * 0.2;
        let y = top + plot_h - bar_h;
        writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{bar_h:.1}\" fill=\"#4878a8\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{acc:.1}</text>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            slot * 0.6,
            x + slot * 0.3,
            y - 4.0,
            x + slot * 0.3,
            h - bottom + 16.0,
            label.name()
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Confusion heatmap; rows are predictions, columns ground truth, shading
/// is the share of the true class.
pub fn confusion_svg(title: &str, report: &EvalReport) -> String {
    let cell = 70.0;
    let (left, top) = (110.0, 60.0);
    let k = AffectLabel::COUNT as f64;
    let (w, h) = (left + cell * k + 20.0, top + cell * k + 40.0);
    let totals = report.class_totals();
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    for (i, label) in AffectLabel::ALL.iter().enumerate() {
        let c = left + cell * (i as f64 + 0.5);
        writeln!(
            s,
            "<text x=\"{c:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            top - 8.0,
            label.name(),
            left - 8.0,
            top + cell * (i as f64 + 0.5) + 4.0,
            label.name()
        )
        .unwrap();
    }
    for p in 0..AffectLabel::COUNT {
        for t in 0..AffectLabel::COUNT {
            let n = report.confusion[p][t];
            let share = if totals[t] > 0 { n as f64 / totals[t] as f64 } else { 0.0 };
            let shade = (255.0 - 180.0 * share).round() as u8;
            let x = left + cell * t as f64;
            let y = top + cell * p as f64;
            writeln!(
                s,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#fff\"/>\
                 <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{n}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">ground truth (columns) / prediction (rows)</text>",
        left + cell * k / 2.0,
        h - 12.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
