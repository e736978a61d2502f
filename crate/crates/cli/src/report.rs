//! Plain-text renderings of run and explain results.

use std::fmt::Write;

use clonescope::mil::{MeanStd, MetricsReport};

use crate::config::ExperimentConfig;
use crate::exit::CliResult;
use crate::explain::{load_explain_summary, ExplainSummary};
use crate::io::write_text;
use crate::run::{load_summary, RunSummary};

fn cell(v: Option<MeanStd>) -> String {
    match v {
        Some(m) => format!("{:.1} ± {:.1}", 100.0 * m.mean, 100.0 * m.std),
        None => "n/a".into(),
    }
}

/// Results table: one row per method, mean ± std over folds, in percent.
pub fn format_table(s: &RunSummary) -> String {
    let mut out = String::new();
    let head = ["method", "accuracy", "precision", "recall", "f1", "auc"];
    let width = s.rows.iter().map(|r| r.title.chars().count()).max().unwrap_or(6).max(6);
    let _ = write!(out, "{:<width$}", head[0]);
    for h in &head[1..] {
        let _ = write!(out, "  {h:>13}");
    }
    out.push('\n');
    for r in &s.rows {
        let _ = write!(out, "{:<width$}", r.title);
        let cells = match &r.summary {
            Some(m) => [Some(m.accuracy), Some(m.precision), Some(m.recall), Some(m.f1), m.auc].map(cell),
            None => std::array::from_fn(|_| "failed".to_string()),
        };
        for c in cells {
            let _ = write!(out, "  {c:>13}");
        }
        out.push('\n');
    }
    if !s.comparisons.is_empty() {
        out.push_str("\nWilcoxon signed-rank over folds (best method per metric vs others)\n");
        for c in &s.comparisons {
            let detail = match (&c.result, &c.note) {
                (Some(r), _) => format!("W = {}, p = {:.4}{}", r.statistic, r.p, if r.exact { " (exact)" } else { "" }),
                (None, Some(n)) => n.clone(),
                (None, None) => "not tested".into(),
            };
            let _ = writeln!(out, "  {:<9} {} vs {}: {detail} [{} folds]", c.metric, c.best, c.other, c.folds);
        }
    }
    if !s.errors.is_empty() {
        out.push_str("\nErrors\n");
        for e in &s.errors {
            let who = e.method.map(|m| m.to_string()).unwrap_or_else(|| "all".into());
            let _ = writeln!(out, "  fold {} {who}: {} error: {}", e.fold, e.kind, e.message);
        }
    }
    out
}

/// Confusion matrix as CSV, rows true class, columns predicted class.
pub fn confusion_csv(r: &MetricsReport) -> String {
    let mut out = String::from("true\\predicted");
    for c in &r.classes {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (c, row) in r.classes.iter().zip(&r.confusion) {
        out.push_str(c);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn format_explain(s: &ExplainSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Essential patches: {} from {} correctly classified images", s.essential_patches, s.correct_images);
    for c in &s.clones {
        let _ = writeln!(out, "  clone {}: {} patches, {} cells, {} isolated cells", c.clone, c.patches, c.cells, c.isolated_cells);
    }
    out.push_str("\nSignificant differences\n");
    if s.findings.is_empty() {
        out.push_str("  none\n");
    }
    for f in &s.findings {
        let _ = writeln!(out, "  {}", f.text);
    }
    out.push_str("\nPBoW bins\n");
    for p in &s.pbow {
        let bins = if p.significant_bins.is_empty() {
            "none".to_string()
        } else {
            p.significant_bins.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(out, "  {} vs {}: significant bins {bins}", p.first, p.second);
    }
    out
}

/// Writes `report.txt` in the working directory from whatever results exist.
pub fn cmd_report(cfg: &ExperimentConfig) -> CliResult<String> {
    let mut out = String::new();
    let run = load_summary(&cfg.workdir);
    let explain = load_explain_summary(&cfg.workdir);
    if run.is_err() && explain.is_err() {
        return Err(crate::exit::CliError::data(format!(
            "no results under {}; run `clonescope run` or `clonescope explain` first",
            cfg.workdir.display()
        )));
    }
    if let Ok(r) = run {
        out.push_str("Image classification\n\n");
        out.push_str(&format_table(&r));
    }
    if let Ok(e) = explain {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str("Explainability\n\n");
        out.push_str(&format_explain(&e));
        out.push('\n');
        out.push_str(&e.summary);
    }
    write_text(&cfg.workdir.join("report.txt"), &out)?;
    Ok(out)
}
