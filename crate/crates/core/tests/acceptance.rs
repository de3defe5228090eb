//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL|SKIPPED`
//! line with the measured numbers, then asserts.
//!
//! Tolerances are fixed here and not tuned per run.

mod common;

use std::sync::OnceLock;

use coflow_core::experiment::{self, ExperimentConfig, ExperimentKind, TraceSource};
use coflow_core::metrics::ExperimentReport;
use coflow_core::model::Instance;
use coflow_core::oracle::{oracle_check, OracleLimits};
use coflow_core::primal_dual::{order, Granularity, Permutation, DEFAULT_KAPPA};
use coflow_core::scheduler::{assign_cdls, assign_fdls, simulate, Assignment, ScheduleResult};
use coflow_core::verify::{
    check_bounds, check_schedule, coflow_level_bounds, flow_level_bounds, flow_level_flow_bounds,
};
use coflow_core::workload::{parse_trace_records, trace_to_instance, TraceOptions};
use common::{corpus_instance, rebuild_dual, tiny_instance, TOL};
use rayon::prelude::*;

const CORPUS: u64 = 1000;
const ORACLE_INSTANCES: u64 = 240;
const WEAK_DUALITY_REL: f64 = 1e-6;
const FIG6: [f64; 3] = [1.6234, 1.7056, 1.7932];
const FIG6_TOL: f64 = 0.15;
const FIG2_DENSE_MEAN: f64 = 1.33;
const FIG2_TOL: f64 = 0.15;
const FIG9: [f64; 3] = [2.8731, 3.0426, 3.2563];
const FIG9_TOL: f64 = 0.3;
const TREND_N_SLACK: f64 = 0.03;
const TREND_M_SLACK: f64 = 0.05;
const TRACE_ENV: &str = "COFLOW_FB_TRACE";

fn report(n: u32, ok: bool, detail: &str) {
    println!(
        "criterion {n}: {} {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

struct Run {
    instance: Instance,
    granularity: Granularity,
    perm: Permutation,
    assignment: Assignment,
    result: ScheduleResult,
}

/// The corpus scheduled at both granularities, computed once per test binary.
fn corpus() -> &'static [Run] {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..CORPUS)
            .into_par_iter()
            .flat_map_iter(|idx| {
                let instance = corpus_instance(idx);
                [Granularity::Flow, Granularity::Coflow].map(|g| {
                    let perm = order(&instance, DEFAULT_KAPPA, g).unwrap();
                    let assignment = match g {
                        Granularity::Flow => assign_fdls(&instance, &perm),
                        Granularity::Coflow => assign_cdls(&instance, &perm),
                    }
                    .unwrap();
                    let result = simulate(&instance, &perm, &assignment).unwrap();
                    Run {
                        instance: instance.clone(),
                        granularity: g,
                        perm,
                        assignment,
                        result,
                    }
                })
            })
            .collect()
    })
}

#[test]
fn criterion_01_dual_feasibility_and_tightness() {
    let mut worst_slack = f64::INFINITY;
    let mut worst_gap = 0.0f64;
    let mut worst_rebuilt_violation = f64::NEG_INFINITY;
    let mut worst_rebuilt_tightness = 0.0f64;
    let mut worst_objective_drift = 0.0f64;
    for run in corpus() {
        for rec in &run.perm.trace.records {
            worst_slack = worst_slack.min(rec.min_slack);
            if !rec.fallback {
                worst_gap = worst_gap.max(rec.gap.abs());
            }
        }
        let rebuilt = rebuild_dual(&run.instance, &run.perm, run.granularity);
        worst_rebuilt_violation = worst_rebuilt_violation.max(rebuilt.worst_violation);
        worst_rebuilt_tightness = worst_rebuilt_tightness.max(rebuilt.worst_tightness);
        let scale = run.perm.dual_cost.abs().max(1.0);
        worst_objective_drift =
            worst_objective_drift.max((rebuilt.objective - run.perm.dual_cost).abs() / scale);
    }
    let ok = worst_slack >= -TOL
        && worst_gap <= TOL
        && worst_rebuilt_violation <= TOL
        && worst_rebuilt_tightness <= TOL
        && worst_objective_drift <= TOL;
    report(
        1,
        ok,
        &format!(
            "runs={} min(w-delta)={worst_slack:.3e} max|gap|={worst_gap:.3e} \
             rebuilt: violation={worst_rebuilt_violation:.3e} tightness={worst_rebuilt_tightness:.3e} \
             objective drift={worst_objective_drift:.3e}",
            corpus().len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_02_weak_duality() {
    let corpus_violations = corpus()
        .iter()
        .filter(|r| {
            r.perm.dual_cost > r.result.objective * (1.0 + WEAK_DUALITY_REL) + WEAK_DUALITY_REL
        })
        .count();
    let limits = OracleLimits::default();
    let checks: Vec<_> = (0..ORACLE_INSTANCES)
        .into_par_iter()
        .flat_map_iter(|s| {
            let inst = tiny_instance(500 + s, s % 2 == 1);
            [Granularity::Flow, Granularity::Coflow]
                .map(|g| oracle_check(&inst, DEFAULT_KAPPA, g, &limits).unwrap())
        })
        .collect();
    let oracle_violations = checks.iter().filter(|c| !c.dual_below_best).count();
    let ok = corpus_violations == 0 && oracle_violations == 0;
    report(
        2,
        ok,
        &format!(
            "corpus violations={corpus_violations}/{} oracle violations={oracle_violations}/{}",
            corpus().len(),
            checks.len()
        ),
    );
    assert!(ok);
}

/// The flow-level completion bound is checked in its per-coflow form wherever `m >= 2`.
/// At `m = 1` its last coefficient `1 - 2/m` is negative, so replacing a flow's
/// size by the coflow's largest flow is no longer an upper bound; there the
/// per-flow inequality the bound is derived from is checked instead, and
/// counterexamples to the per-coflow form are counted and printed.
#[test]
fn criterion_03_completion_bounds() {
    let mut violations = 0;
    let mut single_core_counterexamples = 0;
    let mut worst = f64::NEG_INFINITY;
    for run in corpus() {
        let bounds = match run.granularity {
            Granularity::Coflow => coflow_level_bounds(&run.instance, &run.perm),
            Granularity::Flow if run.instance.cores >= 2 => {
                let per_flow = flow_level_flow_bounds(&run.instance, &run.perm);
                violations += check_bounds(&run.result, &per_flow, TOL).len();
                flow_level_bounds(&run.instance, &run.perm)
            }
            Granularity::Flow => {
                let literal = flow_level_bounds(&run.instance, &run.perm);
                single_core_counterexamples += check_bounds(&run.result, &literal, TOL).len();
                flow_level_flow_bounds(&run.instance, &run.perm)
            }
        };
        violations += check_bounds(&run.result, &bounds, TOL).len();
        for (k, b) in &bounds {
            worst = worst.max(run.result.coflow_completion[k] as f64 - b);
        }
    }
    let ok = violations == 0;
    report(
        3,
        ok,
        &format!(
            "violations={violations} max(C_k - bound)={worst:.3} \
             (m=1 per-coflow form: {single_core_counterexamples} counterexamples, per-flow form checked)"
        ),
    );
    assert!(ok);
}

fn quartiles(r: &ExperimentReport) -> [f64; 3] {
    let s = &r.points[0].ratio;
    [s.q1, s.median, s.q3]
}

fn within(got: [f64; 3], want: [f64; 3], tol: f64) -> bool {
    got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol)
}

#[test]
fn criterion_04_fdls_box_statistics() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Box, Granularity::Flow);
    let r = experiment::run(&cfg).unwrap();
    let q = quartiles(&r);
    let s = &r.points[0].ratio;
    let ok = within(q, FIG6, FIG6_TOL) && s.min >= 1.0;
    report(
        4,
        ok,
        &format!(
            "Q1/median/Q3={:.4}/{:.4}/{:.4} (target {:?} +-{FIG6_TOL}) min={:.4} max={:.4}",
            q[0], q[1], q[2], FIG6, s.min, s.max
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_fdls_dense_mean() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Density, Granularity::Flow);
    cfg.densities = vec![coflow_core::workload::Density::Dense];
    let r = experiment::run(&cfg).unwrap();
    let mean = r.points[0].ratio.mean;
    let ok = (mean - FIG2_DENSE_MEAN).abs() <= FIG2_TOL;
    report(
        5,
        ok,
        &format!("dense mean={mean:.4} (target {FIG2_DENSE_MEAN} +-{FIG2_TOL})"),
    );
    assert!(ok);
}

#[test]
fn criterion_06_cdls_box_statistics() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Box, Granularity::Coflow);
    let r = experiment::run(&cfg).unwrap();
    let q = quartiles(&r);
    let ok = within(q, FIG9, FIG9_TOL);
    report(
        6,
        ok,
        &format!(
            "Q1/median/Q3={:.4}/{:.4}/{:.4} (target {:?} +-{FIG9_TOL})",
            q[0], q[1], q[2], FIG9
        ),
    );
    assert!(ok);
}

/// Checks a monotone trend allowing at most one inversion of size `slack`.
fn trend_holds(means: &[f64], increasing: bool, slack: f64) -> bool {
    let mut inversions = 0;
    for w in means.windows(2) {
        let step = if increasing { w[1] - w[0] } else { w[0] - w[1] };
        if step < 0.0 {
            if -step > slack {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

fn means(kind: ExperimentKind, g: Granularity) -> Vec<f64> {
    let r = experiment::run(&ExperimentConfig::defaults(kind, g)).unwrap();
    r.points.iter().map(|p| p.ratio.mean).collect()
}

#[test]
fn criterion_07_trends() {
    let by_n = means(ExperimentKind::RatioVsCoflows, Granularity::Flow);
    let by_m_flow = means(ExperimentKind::RatioVsCores, Granularity::Flow);
    let by_m_coflow = means(ExperimentKind::RatioVsCores, Granularity::Coflow);
    let ok = trend_holds(&by_n, false, TREND_N_SLACK)
        && trend_holds(&by_m_flow, true, TREND_M_SLACK)
        && trend_holds(&by_m_coflow, true, TREND_M_SLACK);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    report(
        7,
        ok,
        &format!(
            "fdls by n=[{}] fdls by m=[{}] cdls by m=[{}]",
            fmt(&by_n),
            fmt(&by_m_flow),
            fmt(&by_m_coflow)
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_guarantees_against_oracle() {
    let limits = OracleLimits::default();
    let checks: Vec<_> = (0..ORACLE_INSTANCES)
        .into_par_iter()
        .flat_map_iter(|s| {
            let inst = tiny_instance(90_000 + s, s % 2 == 1);
            [Granularity::Flow, Granularity::Coflow]
                .map(|g| oracle_check(&inst, DEFAULT_KAPPA, g, &limits).unwrap())
        })
        .collect();
    let violations = checks.iter().filter(|c| !c.within_guarantee).count();
    let worst = checks
        .iter()
        .map(|c| c.algorithm_cost / c.best_cost / c.guarantee)
        .fold(0.0, f64::max);
    let ok = violations == 0;
    report(
        8,
        ok,
        &format!(
            "checks={} violations={violations} max(cost/best/guarantee)={worst:.3}",
            checks.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_simulator_soundness() {
    let findings: usize = corpus()
        .par_iter()
        .map(|r| check_schedule(&r.instance, &r.perm, &r.assignment, &r.result).len())
        .sum();
    let ok = findings == 0;
    report(
        9,
        ok,
        &format!("schedules={} findings={findings}", corpus().len()),
    );
    assert!(ok);
}

#[test]
fn criterion_10_trace_pipeline() {
    let Some(path) = std::env::var_os(TRACE_ENV) else {
        println!("criterion 10: SKIPPED ({TRACE_ENV} not set; no trace file supplied)");
        return;
    };
    let text = std::fs::read_to_string(&path).unwrap();
    let records = parse_trace_records(&text).unwrap();
    let opts = TraceOptions {
        rack_base: 0,
        ..TraceOptions::default()
    };
    let inst = trace_to_instance(&records, 150, &opts).unwrap();
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::TraceThreshold, Granularity::Flow);
    cfg.instances = 10;
    cfg.trace = Some(TraceSource {
        records,
        racks: 150,
        rack_base: 0,
    });
    let means: Vec<f64> = experiment::run(&cfg)
        .unwrap()
        .points
        .iter()
        .map(|p| p.ratio.mean)
        .collect();
    let ok = inst.coflow_count() == 526 && means.last() <= means.first();
    report(
        10,
        ok,
        &format!("coflows={} threshold means={means:?}", inst.coflow_count()),
    );
    assert!(ok);
}
