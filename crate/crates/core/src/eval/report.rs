//! Verdict aggregation and report rendering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{JudgeVerdict, MetricId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub mean: f64,
    pub count: usize,
}

/// Per-metric means for one judged model. The overall column is the mean of
/// the overall-metric verdicts, not a mean of the other means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model_id: String,
    pub per_metric: BTreeMap<String, MetricAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_mean: Option<f64>,
}

/// Arithmetic per-metric means over all verdicts of each metric.
pub fn aggregate(verdicts: &[JudgeVerdict], model_id: &str) -> Result<MetricReport> {
    if verdicts.is_empty() {
        return Err(Error::validation("no verdicts to aggregate"));
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for verdict in verdicts {
        verdict.validate()?;
        let entry = sums.entry(verdict.metric_id.to_string()).or_insert((0.0, 0));
        entry.0 += verdict.score as f64;
        entry.1 += 1;
    }
    let per_metric: BTreeMap<String, MetricAggregate> = sums
        .into_iter()
        .map(|(metric, (sum, count))| {
            (
                metric,
                MetricAggregate {
                    mean: sum / count as f64,
                    count,
                },
            )
        })
        .collect();
    let overall_mean = per_metric
        .get(MetricId::Overall.as_str())
        .map(|agg| agg.mean);
    Ok(MetricReport {
        model_id: model_id.to_string(),
        per_metric,
        overall_mean,
    })
}

/// Aligned text table with two-decimal means; full precision stays in the
/// JSON report.
pub fn render_report_table(report: &MetricReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("model: {}\n", report.model_id));
    let name_width = report
        .per_metric
        .keys()
        .map(|k| k.len())
        .chain(["metric".len()])
        .max()
        .unwrap_or(6);
    out.push_str(&format!(
        "{:<name_width$}  {:>6}  {:>5}\n",
        "metric", "mean", "count"
    ));
    // Shipped metrics first in canonical order, then customs alphabetically.
    let mut ordered: Vec<&String> = Vec::new();
    for id in MetricId::BUILTIN {
        if let Some(key) = report.per_metric.keys().find(|k| k.as_str() == id.as_str()) {
            ordered.push(key);
        }
    }
    for key in report.per_metric.keys() {
        if !MetricId::BUILTIN.iter().any(|id| id.as_str() == key.as_str()) {
            ordered.push(key);
        }
    }
    for key in ordered {
        let agg = &report.per_metric[key];
        out.push_str(&format!(
            "{:<name_width$}  {:>6.2}  {:>5}\n",
            key, agg.mean, agg.count
        ));
    }
    out
}
