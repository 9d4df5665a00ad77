use serde::Serialize;

use super::scores::MetricsReport;

/// One ablation run: a variant, its translation direction and either a report
/// or the reason it failed.
#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub variant: String,
    pub direction: String,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Better {
    Higher,
    Lower,
}

const COLUMNS: [(&str, Better); 4] =
    [("Acc", Better::Higher), ("F1", Better::Higher), ("MAE", Better::Lower), ("Corr", Better::Higher)];

fn column(r: &MetricsReport, c: usize) -> Option<f64> {
    match c {
        0 => Some(r.acc),
        1 => r.f1,
        2 => r.mae,
        _ => r.corr,
    }
}

/// Per column, which rows hold the best value (all tied rows are marked).
pub fn best_marks(rows: &[TableRow]) -> Vec<[bool; 4]> {
    let mut marks = vec![[false; 4]; rows.len()];
    for (c, (_, better)) in COLUMNS.iter().enumerate() {
        let values: Vec<Option<f64>> = rows.iter().map(|r| r.report.as_ref().and_then(|rep| column(rep, c))).collect();
        let best = values.iter().flatten().copied().fold(None, |acc: Option<f64>, v| match acc {
            None => Some(v),
            Some(b) => Some(match better {
                Better::Higher => b.max(v),
                Better::Lower => b.min(v),
            }),
        });
        if let Some(best) = best {
            for (i, v) in values.iter().enumerate() {
                marks[i][c] = *v == Some(best);
            }
        }
    }
    marks
}

fn cell(value: Option<f64>, c: usize, best: bool) -> String {
    let text = match value {
        None => "-".to_string(),
        Some(v) if c < 2 => format!("{:.1}", 100.0 * v),
        Some(v) => format!("{v:.3}"),
    };
    if best {
        format!("{text}*")
    } else {
        text
    }
}

/// Aligned text table with `*` after the best value of each column.
pub fn ablation_table(rows: &[TableRow]) -> String {
    let marks = best_marks(rows);
    let mut grid: Vec<Vec<String>> = vec![vec!["Variant".into(), "Direction".into()]];
    grid[0].extend(COLUMNS.iter().map(|(n, _)| n.to_string()));
    for (row, mark) in rows.iter().zip(&marks) {
        let mut line = vec![format!("({})", row.variant), row.direction.clone()];
        match (&row.report, &row.error) {
            (Some(rep), _) => line.extend((0..4).map(|c| cell(column(rep, c), c, mark[c]))),
            (None, err) => {
                line.push(format!("failed: {}", err.as_deref().unwrap_or("unknown error")));
                line.extend(std::iter::repeat_n(String::new(), 3));
            }
        }
        grid.push(line);
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| {
            grid.iter()
                .filter(|l| c < 2 || !l[2].starts_with("failed"))
                .map(|l| l[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in &grid {
        let failed = line[2].starts_with("failed");
        let mut text = String::new();
        for (c, value) in line.iter().enumerate() {
            if c > 0 {
                text.push_str("  ");
            }
            if failed && c >= 2 {
                text.push_str(value);
                continue;
            }
            let pad = widths[c].saturating_sub(value.chars().count());
            if c < 2 {
                text.push_str(value);
                text.push_str(&" ".repeat(pad));
            } else {
                text.push_str(&" ".repeat(pad));
                text.push_str(value);
            }
        }
        out.push_str(text.trim_end());
        out.push('\n');
    }
    out
}
