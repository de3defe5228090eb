//! Batch experiments: generate instances per parameter point, order, assign,
//! simulate, and report ratios against the matching dual bound.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{self, ExperimentReport, ReportRow};
use crate::model::Instance;
use crate::primal_dual::{order, Granularity, DEFAULT_KAPPA};
use crate::scheduler::{assign_cdls, assign_fdls, simulate, ScheduleResult};
use crate::workload::{
    filter_min_flows, gen_density, gen_mix, trace_to_instance, Density, GenOptions, TraceCoflow,
    TraceOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RatioVsCoflows,
    RatioVsCores,
    Density,
    TraceThreshold,
    Box,
    Cdf,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::RatioVsCoflows => "ratio-vs-coflows",
            ExperimentKind::RatioVsCores => "ratio-vs-cores",
            ExperimentKind::Density => "density",
            ExperimentKind::TraceThreshold => "trace-threshold",
            ExperimentKind::Box => "box",
            ExperimentKind::Cdf => "cdf",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::RatioVsCoflows,
            ExperimentKind::RatioVsCores,
            ExperimentKind::Density,
            ExperimentKind::TraceThreshold,
            ExperimentKind::Box,
            ExperimentKind::Cdf,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Parsed trace records with the port count they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSource {
    pub records: Vec<TraceCoflow>,
    pub racks: u32,
    pub rack_base: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub granularity: Granularity,
    /// Coflow counts; swept by `ratio-vs-coflows`, first entry used otherwise.
    pub coflows: Vec<usize>,
    /// Core counts; swept by `ratio-vs-cores`, first entry used otherwise.
    pub cores: Vec<u32>,
    pub ports: u32,
    /// Densities swept by `density`.
    pub densities: Vec<Density>,
    /// Flow-count thresholds swept by `trace-threshold`.
    pub thresholds: Vec<usize>,
    pub trace: Option<TraceSource>,
    /// Instances per point; instance `x` uses seed `seed + x`.
    pub instances: usize,
    pub seed: u64,
    pub kappa: f64,
    pub release_spread: Option<i64>,
}

impl ExperimentConfig {
    /// Sweep ranges and sizes used for each experiment kind.
    pub fn defaults(kind: ExperimentKind, granularity: Granularity) -> Self {
        let sweep = vec![5, 10, 15, 20, 25];
        let (coflows, cores) = match kind {
            ExperimentKind::RatioVsCoflows => (sweep, vec![5]),
            ExperimentKind::RatioVsCores => (vec![25], vec![5, 10, 15, 20, 25]),
            ExperimentKind::Cdf => (vec![15], vec![5]),
            _ => (vec![25], vec![5]),
        };
        ExperimentConfig {
            kind,
            granularity,
            coflows,
            cores,
            ports: if kind == ExperimentKind::TraceThreshold {
                150
            } else {
                10
            },
            densities: vec![Density::Dense, Density::Combined],
            thresholds: vec![1, 5, 10, 20, 50],
            trace: None,
            instances: 100,
            seed: 0,
            kappa: DEFAULT_KAPPA,
            release_spread: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.coflows.is_empty() || self.cores.is_empty() {
            return bad("coflow and core ranges must be nonempty");
        }
        if self.cores.contains(&0) {
            return bad("core counts must be at least 1");
        }
        if self.instances == 0 {
            return bad("instance count must be at least 1");
        }
        match self.kind {
            ExperimentKind::Density if self.densities.is_empty() => bad("no densities given"),
            ExperimentKind::TraceThreshold if self.thresholds.is_empty() => {
                bad("no thresholds given")
            }
            ExperimentKind::TraceThreshold if self.thresholds.contains(&0) => {
                bad("thresholds must be positive")
            }
            ExperimentKind::TraceThreshold if self.trace.is_none() => {
                bad("trace-threshold needs a trace file")
            }
            _ if !(self.kappa.is_finite() && self.kappa > 0.0) => Err(Error::BadKappa(self.kappa)),
            _ => Ok(()),
        }
    }
}

/// One instance run through order, assignment and simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub dual_cost: f64,
    pub ratio: f64,
    pub schedule: ScheduleResult,
}

pub fn algorithm_tag(granularity: Granularity) -> &'static str {
    match granularity {
        Granularity::Flow => "fdls",
        Granularity::Coflow => "cdls",
    }
}

/// Orders, assigns and simulates at one granularity; the ratio's denominator is
/// the dual bound of that same granularity.
pub fn evaluate(instance: &Instance, granularity: Granularity, kappa: f64) -> Result<Evaluation> {
    let perm = order(instance, kappa, granularity)?;
    let assignment = match granularity {
        Granularity::Flow => assign_fdls(instance, &perm)?,
        Granularity::Coflow => assign_cdls(instance, &perm)?,
    };
    let schedule = simulate(instance, &perm, &assignment)?;
    let objective = metrics::objective(&schedule, instance)?;
    Ok(Evaluation {
        objective,
        dual_cost: perm.dual_cost,
        ratio: metrics::ratio(objective, perm.dual_cost)?,
        schedule,
    })
}

enum Point {
    Mix { n: usize, m: u32 },
    Density { n: usize, m: u32, mode: Density },
    Threshold { m: u32, threshold: usize },
}

impl Point {
    fn label(&self, kind: ExperimentKind) -> String {
        match (self, kind) {
            (Point::Mix { n, .. }, ExperimentKind::RatioVsCoflows) => format!("n={n}"),
            (Point::Mix { m, .. }, ExperimentKind::RatioVsCores) => format!("m={m}"),
            (Point::Mix { n, m }, _) => format!("n={n},m={m}"),
            (Point::Density { mode, .. }, _) => format!("density={}", mode.as_str()),
            (Point::Threshold { threshold, .. }, _) => format!("threshold={threshold}"),
        }
    }

    fn instance(&self, cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
        let gen = |m: u32| GenOptions {
            cores: m,
            release_spread: cfg.release_spread,
        };
        match *self {
            Point::Mix { n, m } => gen_mix(n, cfg.ports, seed, &gen(m)),
            Point::Density { n, m, mode } => gen_density(n, cfg.ports, mode, seed, &gen(m)),
            Point::Threshold { m, threshold } => {
                let src = cfg.trace.as_ref().expect("validated");
                let opts = TraceOptions {
                    cores: m,
                    seed,
                    rack_base: src.rack_base,
                };
                // the trace experiments release every coflow at time 0
                let mut inst = trace_to_instance(&src.records, src.racks, &opts)?;
                for c in &mut inst.coflows {
                    c.release = 0;
                }
                Ok(filter_min_flows(&inst, threshold))
            }
        }
    }
}

fn points(cfg: &ExperimentConfig) -> Vec<Point> {
    let n = cfg.coflows[0];
    let m = cfg.cores[0];
    match cfg.kind {
        ExperimentKind::RatioVsCoflows => {
            cfg.coflows.iter().map(|&n| Point::Mix { n, m }).collect()
        }
        ExperimentKind::RatioVsCores => cfg.cores.iter().map(|&m| Point::Mix { n, m }).collect(),
        ExperimentKind::Density => cfg
            .densities
            .iter()
            .map(|&mode| Point::Density { n, m, mode })
            .collect(),
        ExperimentKind::TraceThreshold => cfg
            .thresholds
            .iter()
            .map(|&threshold| Point::Threshold { m, threshold })
            .collect(),
        ExperimentKind::Box | ExperimentKind::Cdf => vec![Point::Mix { n, m }],
    }
}

/// Runs every point of the experiment; rows come out in (point, seed) order
/// regardless of how instances were scheduled across threads.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new(cfg.kind.as_str());
    let tag = algorithm_tag(cfg.granularity);
    let mut completions = Vec::new();
    for point in points(cfg) {
        let label = point.label(cfg.kind);
        let runs: Vec<(u64, Evaluation)> = (0..cfg.instances as u64)
            .into_par_iter()
            .map(|x| {
                let seed = cfg.seed.wrapping_add(x);
                let inst = point.instance(cfg, seed)?;
                Ok((seed, evaluate(&inst, cfg.granularity, cfg.kappa)?))
            })
            .collect::<Result<_>>()?;
        for (seed, ev) in runs {
            if cfg.kind == ExperimentKind::Cdf {
                completions.extend(ev.schedule.coflow_completion.values().map(|&c| c as f64));
            }
            report.rows.push(ReportRow {
                point: label.clone(),
                seed,
                algorithm: tag.to_string(),
                objective: ev.objective,
                dual_cost: ev.dual_cost,
                ratio: ev.ratio,
            });
        }
    }
    report.aggregate()?;
    if cfg.kind == ExperimentKind::Cdf {
        report.completion_times = Some(metrics::summarize(&completions)?);
    }
    Ok(report)
}

/// Writes `rows.csv`, `aggregate.json` and, for box and CDF experiments,
/// `cdf.csv` (ratios for box, coflow completion times for CDF).
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        fs::write(dir.join(name), body)?;
        written.push(name.to_string());
        Ok(())
    };
    put("rows.csv", report.rows_csv()?)?;
    put("aggregate.json", report.aggregate_json() + "\n")?;
    let cdf_source = match (&report.completion_times, report.points.as_slice()) {
        (Some(s), _) => Some(s),
        (None, [only]) if report.experiment == ExperimentKind::Box.as_str() => Some(&only.ratio),
        _ => None,
    };
    if let Some(s) = cdf_source {
        put("cdf.csv", ExperimentReport::cdf_csv(s)?)?;
    }
    Ok(written)
}

/// [`run`] followed by [`write_report`].
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    let report = run(cfg)?;
    write_report(&report, dir)?;
    Ok(report)
}
