//! Objective values, ratios against the dual bound, and distribution summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::scheduler::ScheduleResult;

/// Quantile convention used by [`summarize`], reported alongside the numbers.
pub const QUANTILE_METHOD: &str = "linear interpolation between order statistics (type 7)";

/// `sum_k w_k C_k` from a schedule's coflow completion times.
pub fn objective(result: &ScheduleResult, instance: &Instance) -> Result<f64> {
    instance.coflows.iter().try_fold(0.0, |acc, c| {
        let ck = result
            .coflow_completion
            .get(&c.id)
            .ok_or(Error::MissingCompletion(c.id))?;
        Ok(acc + c.weight * *ck as f64)
    })
}

/// `objective / dual_cost`. A zero bound is only accepted with a zero objective.
pub fn ratio(objective: f64, dual_cost: f64) -> Result<f64> {
    if dual_cost > 0.0 {
        Ok(objective / dual_cost)
    } else if objective == 0.0 {
        Ok(1.0)
    } else {
        Err(Error::Degenerate(objective))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    /// Fraction of the sample `<= value`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub cdf: Vec<CdfPoint>,
}

/// Type-7 quantile of an ascending, nonempty sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // one point per distinct value, at the last occurrence (right-continuous)
    let mut cdf: Vec<CdfPoint> = Vec::new();
    for (x, &v) in sorted.iter().enumerate() {
        let point = CdfPoint {
            value: v,
            fraction: (x + 1) as f64 / n as f64,
        };
        match cdf.last_mut() {
            Some(last) if last.value == v => *last = point,
            _ => cdf.push(point),
        }
    }
    Ok(Summary {
        count: n,
        mean: sorted.iter().sum::<f64>() / n as f64,
        min: sorted[0],
        max: sorted[n - 1],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        cdf,
    })
}

/// One simulated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Parameter point label, e.g. `n=25` or `m=10`.
    pub point: String,
    pub seed: u64,
    /// `fdls` or `cdls`.
    pub algorithm: String,
    pub objective: f64,
    pub dual_cost: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: String,
    pub algorithm: String,
    pub ratio: Summary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub quantile_method: String,
    pub rows: Vec<ReportRow>,
    pub points: Vec<PointSummary>,
    /// Extra sample summarized for CDF experiments (coflow completion times).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion_times: Option<Summary>,
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            quantile_method: QUANTILE_METHOD.to_string(),
            ..Default::default()
        }
    }

    /// Groups rows by `(point, algorithm)` in first-seen order and summarizes ratios.
    pub fn aggregate(&mut self) -> Result<()> {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let key = (r.point.clone(), r.algorithm.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        self.points = keys
            .into_iter()
            .map(|(point, algorithm)| {
                let ratios: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.point == point && r.algorithm == algorithm)
                    .map(|r| r.ratio)
                    .collect();
                Ok(PointSummary {
                    ratio: summarize(&ratios)?,
                    point,
                    algorithm,
                })
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(csv_error)?;
        }
        finish(w)
    }

    /// JSON aggregate block without the per-instance rows.
    pub fn aggregate_json(&self) -> String {
        #[derive(Serialize)]
        struct Aggregate<'a> {
            experiment: &'a str,
            quantile_method: &'a str,
            points: Vec<PointRow<'a>>,
            #[serde(skip_serializing_if = "Option::is_none")]
            completion_times: Option<SummaryRow>,
        }
        #[derive(Serialize)]
        struct PointRow<'a> {
            point: &'a str,
            algorithm: &'a str,
            #[serde(flatten)]
            stats: SummaryRow,
        }
        #[derive(Serialize)]
        struct SummaryRow {
            count: usize,
            mean: f64,
            min: f64,
            q1: f64,
            median: f64,
            q3: f64,
            max: f64,
        }
        let row = |s: &Summary| SummaryRow {
            count: s.count,
            mean: s.mean,
            min: s.min,
            q1: s.q1,
            median: s.median,
            q3: s.q3,
            max: s.max,
        };
        let doc = Aggregate {
            experiment: &self.experiment,
            quantile_method: &self.quantile_method,
            points: self
                .points
                .iter()
                .map(|p| PointRow {
                    point: &p.point,
                    algorithm: &p.algorithm,
                    stats: row(&p.ratio),
                })
                .collect(),
            completion_times: self.completion_times.as_ref().map(row),
        };
        serde_json::to_string_pretty(&doc).expect("aggregate serializes")
    }

    /// Two-column `value,fraction` CSV of a summary's empirical CDF.
    pub fn cdf_csv(summary: &Summary) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &summary.cdf {
            w.serialize(p).map_err(csv_error)?;
        }
        finish(w)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
