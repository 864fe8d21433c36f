use std::fmt::Write as _;

use super::protocol::{EvalReport, Summary};
use crate::regress::ModelKind;

const SIG_DIGITS: usize = 6;

/// Header of the machine-readable comparison table.
pub const TABLE_COLUMNS: [&str; 8] = [
    "model",
    "me_x1000_mean",
    "me_x1000_std",
    "rmse_x100_mean",
    "rmse_x100_std",
    "r2_mean",
    "r2_std",
    "trials",
];

/// `v` rounded to `digits` significant digits, fixed-point for moderate
/// magnitudes and scientific otherwise.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-4..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

fn cells(s: Summary, scale: f64) -> [String; 2] {
    [format_sig(s.mean * scale, SIG_DIGITS), format_sig(s.std * scale, SIG_DIGITS)]
}

fn row(report: &EvalReport) -> Vec<String> {
    let a = &report.aggregate;
    let mut out = vec![report.kind.label().to_string()];
    out.extend(cells(a.me, 1000.0));
    out.extend(cells(a.rmse, 100.0));
    out.extend(cells(a.r2, 1.0));
    out.push(report.trials.len().to_string());
    out
}

/// One CSV row per model: ME×1000, RMSE×100 and R², each as mean and std.
pub fn comparison_csv(reports: &[EvalReport]) -> String {
    let mut out = TABLE_COLUMNS.join(",");
    out.push('\n');
    for r in reports {
        out.push_str(&row(r).join(","));
        out.push('\n');
    }
    out
}

/// Footnote for tables that contain stacked kernel models, whose way of
/// merging sources is a modelling choice rather than a fixed recipe.
const STACKING_NOTE: &str =
    "\nSTACKED-KDR/RDR: sources merged by pairing every instance of one source with every instance of the others (interpretation).\n";

/// Aligned plain-text rendering with `mean ± std` cells.
pub fn comparison_text(reports: &[EvalReport]) -> String {
    let header = ["Model", "ME×1000", "RMSE×100", "R²"];
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            let c = row(r);
            [
                c[0].clone(),
                format!("{} ± {}", c[1], c[2]),
                format!("{} ± {}", c[3], c[4]),
                format!("{} ± {}", c[5], c[6]),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&header.map(String::from));
    line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for r in &rows {
        line(r);
    }
    if reports.iter().any(|r| matches!(r.kind, ModelKind::StackedKdr | ModelKind::StackedRdr)) {
        out.push_str(STACKING_NOTE);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(8.2, 6), "8.20000");
        assert_eq!(format_sig(-0.0123456789, 6), "-0.0123457");
        assert_eq!(format_sig(9.9999996, 6), "10.0000");
        assert_eq!(format_sig(123456789.0, 6), "1.23457e8");
        assert_eq!(format_sig(1.5e-7, 6), "1.50000e-7");
        assert_eq!(format_sig(f64::NAN, 6), "NaN");
    }
}
