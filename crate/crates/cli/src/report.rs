//! Report rendering: the aligned plain-text metrics table, the JSON run
//! report, and comma-separated sweep series. Everything written here is a
//! pure function of (config, seed, data), so identical runs produce
//! byte-identical files; wall-clock timings go to the run log only.

use serde::{Deserialize, Serialize};

use diamond_core::metrics::{MetricsReport, Scores};

/// Machine-readable run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub run: String,
    pub dataset: DatasetSummary,
    pub eval_mode: String,
    pub seed: u64,
    pub metrics: MetricsReport,
    /// Reference percentages [acc, prec, sens, spec, f1] for comparison,
    /// when the config supplies them.
    pub reference: Option<Vec<f64>>,
    /// Chosen alpha and selected-feature count per fold.
    pub selection_summary: Vec<FoldSelection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldSelection {
    pub fold: usize,
    pub alpha: Option<f64>,
    pub selected_features: Option<usize>,
    pub expanded_features: Option<usize>,
}

fn fmt_pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.2}", x * 100.0),
        None => "n/a".to_string(),
    }
}

fn fmt_pct_raw(v: f64) -> String {
    format!("{v:.2}")
}

/// Render the metrics table: one row per score, one column per fold, then
/// mean, std, best fold, and the optional reference column.
pub fn metrics_table(
    title: &str,
    report: &MetricsReport,
    evaluated_folds: &[usize],
    reference: Option<&[f64]>,
) -> String {
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');

    let mut header: Vec<String> = vec!["Metric".to_string()];
    for &f in evaluated_folds {
        header.push(format!("Fold {}", f + 1));
    }
    header.push("Mean".into());
    header.push("Std".into());
    header.push("Best".into());
    if reference.is_some() {
        header.push("Reference".into());
    }

    let score_row = |label: &str,
                     get: &dyn Fn(&Scores) -> Option<f64>,
                     mean: Option<f64>,
                     std: Option<f64>,
                     best: Option<f64>,
                     reference: Option<f64>| {
        let mut row: Vec<String> = vec![label.to_string()];
        for s in &report.per_fold {
            row.push(fmt_pct(get(s)));
        }
        row.push(fmt_pct(mean));
        row.push(fmt_pct(std));
        row.push(fmt_pct(best));
        if let Some(r) = reference {
            row.push(fmt_pct_raw(r));
        }
        row
    };

    let best = &report.per_fold[report.best_fold];
    let rf = |i: usize| reference.map(|r| r[i]);
    let rows = vec![
        score_row("Acc (%)", &|s| s.acc, report.mean.acc, report.std.acc, best.acc, rf(0)),
        score_row("Prec (%)", &|s| s.prec, report.mean.prec, report.std.prec, best.prec, rf(1)),
        score_row("Sens (%)", &|s| s.sens, report.mean.sens, report.std.sens, best.sens, rf(2)),
        score_row("Spec (%)", &|s| s.spec, report.mean.spec, report.std.spec, best.spec, rf(3)),
        score_row("F1 (%)", &|s| s.f1, report.mean.f1, report.std.f1, best.f1, rf(4)),
    ];

    out.push_str(&render_aligned(&header, &rows));

    let undefined_total: usize = report.undefined_counts.iter().sum();
    if undefined_total > 0 {
        out.push_str(&format!(
            "\nNote: {undefined_total} undefined (zero-denominator) fold value(s) excluded from means: \
             acc {}, prec {}, sens {}, spec {}, f1 {}.\n",
            report.undefined_counts[0],
            report.undefined_counts[1],
            report.undefined_counts[2],
            report.undefined_counts[3],
            report.undefined_counts[4],
        ));
    }
    out
}

/// Comparison table across runs (baselines + full), mean values only.
pub fn comparison_table(rows: &[(String, &MetricsReport)]) -> String {
    let header: Vec<String> = ["Run", "Acc (%)", "Prec (%)", "Sens (%)", "Spec (%)", "F1 (%)"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            vec![
                name.clone(),
                fmt_pct(r.mean.acc),
                fmt_pct(r.mean.prec),
                fmt_pct(r.mean.sens),
                fmt_pct(r.mean.spec),
                fmt_pct(r.mean.f1),
            ]
        })
        .collect();
    render_aligned(&header, &body)
}

fn render_aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let push_row = |cells: &[String], out: &mut String| {
        for (i, cell) in cells.iter().enumerate() {
            if i == 0 {
                out.push_str(&format!("{:<width$}", cell, width = widths[0] + 2));
            } else {
                out.push_str(&format!("{:>width$}", cell, width = widths[i] + 2));
            }
        }
        out.push('\n');
    };
    push_row(header, &mut out);
    let total: usize = widths.iter().map(|w| w + 2).sum();
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in rows {
        push_row(row, &mut out);
    }
    out
}

/// One line of a 1-D or 2-D sweep series.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub axis_values: Vec<f64>,
    pub mean_acc: Option<f64>,
    pub std_acc: Option<f64>,
}

pub fn sweep_csv(axis_names: &[&str], points: &[SweepPoint]) -> String {
    let mut out = String::new();
    out.push_str(&axis_names.join(","));
    out.push_str(",mean_acc,std_acc\n");
    for p in points {
        let axes: Vec<String> = p.axis_values.iter().map(|v| format!("{v}")).collect();
        let mean = p.mean_acc.map_or("n/a".into(), |v| format!("{v}"));
        let std = p.std_acc.map_or("n/a".into(), |v| format!("{v}"));
        out.push_str(&format!("{},{mean},{std}\n", axes.join(",")));
    }
    out
}
