//! Delimited-text renderings of training and evaluation results.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::infogain::GainRatioReport;

use super::train::{ClusterDecision, TrainReport};
use super::{aggregate_accuracy, EvaluationReport, Result};

fn push_line(out: &mut String, line: std::fmt::Arguments<'_>) {
    out.write_fmt(line).expect("writing to a String cannot fail");
    out.push('\n');
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ClusterDecision {
    pub fn describe(&self) -> String {
        match self {
            ClusterDecision::Disabled => "disabled".into(),
            ClusterDecision::Fixed(k) => format!("fixed k={k}"),
            ClusterDecision::Clustered(k) => format!("lowest index at k={k}"),
            ClusterDecision::TooFewRows { rows, min } => format!("skipped: {rows} rows < {min}"),
            ClusterDecision::Tight => "skipped: no interior minimum".into(),
            ClusterDecision::Degenerate => "skipped: fewer than two distinct points".into(),
        }
    }
}

impl TrainReport {
    /// Per-group Davies-Bouldin curves: `group,rows,k,dbi,chosen`.
    pub fn dbi_csv(&self) -> String {
        let mut out = String::from("group,rows,k,dbi,chosen\n");
        for g in &self.groups {
            let chosen = g.cluster_sizes.len();
            for &(k, dbi) in &g.curve {
                push_line(
                    &mut out,
                    format_args!("{},{},{k},{dbi:.6},{}", csv_field(&g.group), g.rows, u8::from(k == chosen && chosen > 1)),
                );
            }
        }
        out
    }

    /// One row per group: `group,rows,k,cluster_sizes,decision`.
    pub fn groups_csv(&self) -> String {
        let mut out = String::from("group,rows,k,cluster_sizes,decision\n");
        for g in &self.groups {
            let sizes: Vec<String> = g.cluster_sizes.iter().map(|s| s.to_string()).collect();
            push_line(
                &mut out,
                format_args!(
                    "{},{},{},{},{}",
                    csv_field(&g.group),
                    g.rows,
                    g.cluster_sizes.len(),
                    sizes.join(";"),
                    g.decision.describe()
                ),
            );
        }
        out
    }

    /// `hidden,accuracy` of the hidden-size search, if one ran.
    pub fn hidden_csv(&self) -> Option<String> {
        self.hidden_search.as_ref().map(|s| {
            let mut out = String::from("hidden,accuracy\n");
            for (h, a) in &s.table {
                push_line(&mut out, format_args!("{h},{a:.6}"));
            }
            out
        })
    }

    /// `group,cluster,rows,seconds`.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("group,cluster,rows,seconds\n");
        for t in &self.leaf_timings {
            push_line(
                &mut out,
                format_args!("{},{},{},{:.6}", csv_field(&t.group), t.cluster, t.rows, t.seconds),
            );
        }
        out
    }

    pub fn mean_leaf_seconds(&self) -> f64 {
        if self.leaf_timings.is_empty() {
            return 0.0;
        }
        self.leaf_timings.iter().map(|t| t.seconds).sum::<f64>() / self.leaf_timings.len() as f64
    }
}

impl EvaluationReport {
    /// `scope,group,cluster,n,accuracy` with overall, group and leaf rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scope,group,cluster,n,accuracy\n");
        push_line(&mut out, format_args!("overall,,,{},{:.6}", self.n, self.overall_accuracy));
        for g in &self.per_group {
            push_line(&mut out, format_args!("group,{},,{},{:.6}", csv_field(&g.group), g.n, g.accuracy));
        }
        for l in &self.per_leaf {
            push_line(
                &mut out,
                format_args!("leaf,{},{},{},{:.6}", csv_field(&l.group), l.cluster, l.n, l.accuracy),
            );
        }
        out
    }

    pub fn confusion_csv(&self) -> String {
        let c = &self.confusion;
        format!(
            "true_positive,true_negative,false_positive,false_negative\n{},{},{},{}\n",
            c.true_positive, c.true_negative, c.false_positive, c.false_negative
        )
    }

    /// Weighted mean of the per-group accuracies.
    pub fn aggregated_accuracy(&self) -> Result<f64> {
        let parts: Vec<(usize, f64)> = self.per_group.iter().map(|g| (g.n, g.accuracy)).collect();
        aggregate_accuracy(&parts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_rows: usize,
    pub architecture: Option<String>,
    #[serde(skip)]
    pub gain_report: Option<GainRatioReport>,
    pub evaluation: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    /// Unweighted mean of the fold accuracies.
    pub mean_accuracy: f64,
    /// Gain ratios averaged over the training folds.
    pub mean_gain_report: Option<GainRatioReport>,
}

impl CrossValidation {
    pub(super) fn new(folds: Vec<FoldResult>) -> Result<Self> {
        let mean_accuracy = folds.iter().map(|f| f.evaluation.overall_accuracy).sum::<f64>() / folds.len() as f64;
        let reports: Vec<GainRatioReport> = folds.iter().filter_map(|f| f.gain_report.clone()).collect();
        let mean_gain_report = (reports.len() == folds.len() && !reports.is_empty()).then(|| GainRatioReport::mean(&reports));
        Ok(CrossValidation {
            folds,
            mean_accuracy,
            mean_gain_report,
        })
    }

    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.evaluation.overall_accuracy).collect()
    }

    /// `fold,model,architecture,train_rows,n,accuracy` plus a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,model,architecture,train_rows,n,accuracy\n");
        for f in &self.folds {
            push_line(
                &mut out,
                format_args!(
                    "{},{},{},{},{},{:.6}",
                    f.fold,
                    csv_field(&f.evaluation.model_name),
                    f.architecture.as_deref().unwrap_or(""),
                    f.train_rows,
                    f.evaluation.n,
                    f.evaluation.overall_accuracy
                ),
            );
        }
        let n: usize = self.folds.iter().map(|f| f.evaluation.n).sum();
        push_line(&mut out, format_args!("mean,,,,{n},{:.6}", self.mean_accuracy));
        out
    }
}

/// Least-squares slope of `ln y` against `ln x`. Needs two distinct positive `x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if logs.len() < 2 || sxx == 0.0 {
        return None;
    }
    Some(logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let cubic: Vec<(f64, f64)> = [200.0, 400.0, 800.0].iter().map(|&n: &f64| (n, 3e-9 * n.powi(3))).collect();
        assert!((loglog_slope(&cubic).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(1.0, 2.0)]), None);
        assert_eq!(loglog_slope(&[(2.0, 1.0), (2.0, 3.0)]), None);
    }
}
