//! Evaluation reports and the cross-run comparison table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{auc_pr_from_curve, confusion_at, ks_statistic, pr_curve, roc_auc, ConfusionCounts, PrPoint};
use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "eval_report.json";
pub const PR_CURVE_FILE: &str = "pr_curve.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub description: String,
    pub n_rows: usize,
    pub n_positives: usize,
    /// Undefined when the evaluated rows hold no positives.
    pub auc_pr: Option<f64>,
    /// Undefined unless both classes are present.
    pub ks: Option<f64>,
    pub roc_auc: Option<f64>,
    pub confusion: ConfusionCounts,
    pub recall: Option<f64>,
    pub false_positive_rate: Option<f64>,
    /// Curve points in order of non-decreasing recall.
    pub pr_points: Vec<PrPoint>,
}

pub fn evaluate(description: impl Into<String>, scores: &[f64], labels: &[bool], threshold: f64) -> Result<EvalReport> {
    let confusion = confusion_at(scores, labels, threshold)?;
    let n_positives = labels.iter().filter(|&&l| l).count();
    let both = n_positives > 0 && n_positives < labels.len();
    let pr_points = if n_positives > 0 { pr_curve(scores, labels)? } else { Vec::new() };
    Ok(EvalReport {
        description: description.into(),
        n_rows: labels.len(),
        n_positives,
        auc_pr: (n_positives > 0).then(|| auc_pr_from_curve(&pr_points)),
        ks: if both { Some(ks_statistic(scores, labels)?) } else { None },
        roc_auc: if both { Some(roc_auc(scores, labels)?) } else { None },
        recall: confusion.recall(),
        false_positive_rate: confusion.false_positive_rate(),
        confusion,
        pr_points,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn pr_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["threshold", "recall", "precision"])?;
        for p in &self.pr_points {
            w.write_record([p.threshold.to_string(), p.recall.to_string(), p.precision.to_string()])?;
        }
        csv_string(w)
    }

    pub fn write_pr_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.pr_csv()?).map_err(|e| Error::io(path, e))
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub const TABLE_COLUMNS: [&str; 7] = [
    "Description",
    "AUC PR",
    "KS",
    "False Positive",
    "False Negative",
    "True Positive",
    "Recall",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub run: String,
    pub description: String,
    pub auc_pr: Option<f64>,
    pub ks: Option<f64>,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_positive: usize,
    pub recall: Option<f64>,
}

impl TableRow {
    pub fn from_report(run: impl Into<String>, report: &EvalReport) -> Self {
        let run = run.into();
        let c = &report.confusion;
        TableRow {
            description: if report.description.is_empty() { run.clone() } else { report.description.clone() },
            run,
            auc_pr: report.auc_pr,
            ks: report.ks,
            false_positive: c.fp,
            false_negative: c.fn_,
            true_positive: c.tp,
            recall: report.recall,
        }
    }

    fn cells(&self, digits: Option<usize>) -> Vec<String> {
        let num = |v: Option<f64>| match (v, digits) {
            (None, _) => "undefined".to_string(),
            (Some(x), Some(d)) => format!("{x:.d$}"),
            (Some(x), None) => x.to_string(),
        };
        vec![
            self.description.clone(),
            num(self.auc_pr),
            num(self.ks),
            self.false_positive.to_string(),
            self.false_negative.to_string(),
            self.true_positive.to_string(),
            num(self.recall),
        ]
    }
}

pub fn markdown_table(rows: &[TableRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", TABLE_COLUMNS.join(" | "));
    let _ = writeln!(s, "|{}", " --- |".repeat(TABLE_COLUMNS.len()));
    for r in rows {
        let _ = writeln!(s, "| {} |", r.cells(Some(3)).join(" | "));
    }
    s
}

pub fn csv_table(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_COLUMNS)?;
    for r in rows {
        w.write_record(r.cells(None))?;
    }
    csv_string(w)
}

fn svg_plot(curves: &[(String, Vec<PrPoint>)]) -> String {
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let (w, h, m) = (640.0, 480.0, 50.0);
    let x = |r: f64| m + r * (w - 2.0 * m);
    let y = |p: f64| h - m - p * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{:.1} {:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        x(0.0),
        y(1.0),
        y(0.0),
        x(1.0)
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Recall</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">Precision</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (name, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (j, p) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if j == 0 { "M" } else { "L" }, x(p.recall), y(p.precision));
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let ly = m + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
            w - m,
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn run_label(dir: &Path, index: usize, seen: &mut Vec<String>) -> String {
    let base = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| format!("run{index}"));
    let label = if seen.contains(&base) { format!("{base}-{index}") } else { base };
    seen.push(label.clone());
    label
}

/// Writes `table.md`, `table.csv` and `pr_curves.csv` (plus `pr_curves.svg`
/// when asked) comparing the reports found in `run_dirs`.
pub fn emit_report(run_dirs: &[PathBuf], out_dir: &Path, svg: bool) -> Result<Vec<TableRow>> {
    if run_dirs.is_empty() {
        return Err(Error::invalid("report needs at least one run directory"));
    }
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut seen = Vec::new();
    for (i, dir) in run_dirs.iter().enumerate() {
        let path = dir.join(REPORT_FILE);
        if !path.is_file() {
            return Err(Error::invalid(format!("run directory {} has no {REPORT_FILE}", dir.display())));
        }
        let report = EvalReport::read_json(&path)?;
        let run = run_label(dir, i, &mut seen);
        rows.push(TableRow::from_report(run.clone(), &report));
        curves.push((run, report.pr_points));
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, text: String| {
        let p = out_dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    write("table.md", markdown_table(&rows))?;
    write("table.csv", csv_table(&rows)?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "threshold", "recall", "precision"])?;
    for (run, pts) in &curves {
        for p in pts {
            w.write_record([run.clone(), p.threshold.to_string(), p.recall.to_string(), p.precision.to_string()])?;
        }
    }
    write("pr_curves.csv", csv_string(w)?)?;
    if svg {
        write("pr_curves.svg", svg_plot(&curves))?;
    }
    Ok(rows)
}
