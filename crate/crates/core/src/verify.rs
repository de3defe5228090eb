//! Checks a finished schedule against the guarantees it must satisfy.
//!
//! Everything here works from the instance, the order, the assignment and the
//! recorded timeline; nothing is taken from the simulator's internal state.

use std::collections::BTreeMap;

use crate::model::{FlowKey, Instance};
use crate::primal_dual::{Granularity, Permutation};
use crate::scheduler::{flows_by_size, Assignment, ScheduleResult, Segment};

/// Per-coflow completion bound for flow-driven schedules:
/// `max_{k'<=k} r_k' + (L_mu1(S_k) + L_mu2(S_k)) / m + (1 - 2/m) max d_k`,
/// with `S_k` the first `k` coflows of the order and `mu1`, `mu2` its most
/// loaded input and output ports.
///
/// With one core the last coefficient is negative and subtracting the largest
/// flow no longer bounds every flow; see [`flow_level_flow_bounds`].
pub fn flow_level_bounds(instance: &Instance, order: &Permutation) -> BTreeMap<u32, f64> {
    let m = instance.cores as f64;
    prefix_bounds(instance, order, |c, release, ins, outs| {
        let top_in = *ins.iter().max().unwrap() as f64;
        let top_out = *outs.iter().max().unwrap() as f64;
        release + (top_in + top_out) / m + (1.0 - 2.0 / m) * c.max_flow_size() as f64
    })
}

/// The same bound taken flow by flow, before maximizing over the coflow:
/// `max_{(i,j)} max_{k'<=k} r_k' + (L_i(S_k) + L_j(S_k)) / m + (1 - 2/m) d_ijk`.
/// Never larger than [`flow_level_bounds`] for `m >= 2`, and still valid at `m = 1`.
pub fn flow_level_flow_bounds(instance: &Instance, order: &Permutation) -> BTreeMap<u32, f64> {
    let m = instance.cores as f64;
    prefix_bounds(instance, order, |c, release, ins, outs| {
        c.demands
            .iter()
            .map(|(&(i, j), &d)| {
                release
                    + (ins[i as usize] + outs[j as usize]) as f64 / m
                    + (1.0 - 2.0 / m) * d as f64
            })
            .fold(release, f64::max)
    })
}

/// Per-coflow completion bound for coflow-driven schedules:
/// `max_{k'<=k} r_k' + L_mu1(S_k) + L_mu2(S_k)`.
pub fn coflow_level_bounds(instance: &Instance, order: &Permutation) -> BTreeMap<u32, f64> {
    prefix_bounds(instance, order, |_, release, ins, outs| {
        release + *ins.iter().max().unwrap() as f64 + *outs.iter().max().unwrap() as f64
    })
}

/// Walks the order keeping prefix port loads; `bound` sees the coflow, the
/// latest release so far and the input/output loads indexed by port.
fn prefix_bounds<F>(instance: &Instance, order: &Permutation, bound: F) -> BTreeMap<u32, f64>
where
    F: Fn(&crate::model::Coflow, f64, &[u64], &[u64]) -> f64,
{
    let ports = instance.ports as usize;
    let mut in_load = vec![0u64; ports + 1];
    let mut out_load = vec![0u64; ports + 1];
    let mut latest = i64::MIN;
    let mut out = BTreeMap::new();
    for &k in &order.order {
        let c = instance.coflow(k);
        for (&(i, j), &d) in &c.demands {
            in_load[i as usize] += d;
            out_load[j as usize] += d;
        }
        latest = latest.max(c.release);
        out.insert(k, bound(c, latest as f64, &in_load, &out_load));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    /// Two segments overlap on a port of one core.
    PortConflict {
        core: u32,
        input_side: bool,
        port: u32,
        first: FlowKey,
        second: FlowKey,
        at: i64,
    },
    /// Transmitted volume differs from the flow size.
    Volume { flow: FlowKey, sent: i64, size: u64 },
    /// A segment starts before the coflow's release.
    EarlyStart { flow: FlowKey, start: i64 },
    /// `C_ijk < r_k + d_ijk`.
    BelowReleasePlusSize { flow: FlowKey, completion: i64 },
    /// Reported completion disagrees with the timeline.
    CompletionMismatch {
        flow: FlowKey,
        reported: i64,
        timeline: i64,
    },
    /// Coflow completion is not the max over its flows.
    CoflowCompletion {
        coflow: u32,
        reported: i64,
        expected: i64,
    },
    /// Segment on a core the flow is not assigned to.
    WrongCore { flow: FlowKey, core: u32 },
    /// At `at`, the running set on `core` is not what a greedy priority scan picks.
    NotListSchedule { core: u32, at: i64 },
    /// Coflow completion exceeds its analytical bound.
    BoundExceeded {
        coflow: u32,
        completion: i64,
        bound: f64,
    },
}

/// Port exclusivity, volume conservation, release bounds, completion
/// bookkeeping and the list-scheduling (work conservation) property.
pub fn check_schedule(
    instance: &Instance,
    order: &Permutation,
    assignment: &Assignment,
    result: &ScheduleResult,
) -> Vec<Finding> {
    let mut findings = Vec::new();
    let size_of: BTreeMap<FlowKey, (u64, i64)> = instance
        .coflows
        .iter()
        .flat_map(|c| c.flows().map(move |(f, d)| (f, (d, c.release))))
        .collect();

    let mut sent: BTreeMap<FlowKey, i64> = BTreeMap::new();
    let mut last_end: BTreeMap<FlowKey, i64> = BTreeMap::new();
    for s in &result.timeline {
        *sent.entry(s.flow).or_default() += s.end - s.start;
        let e = last_end.entry(s.flow).or_insert(i64::MIN);
        *e = (*e).max(s.end);
        if let Some(&(_, r)) = size_of.get(&s.flow) {
            if s.start < r {
                findings.push(Finding::EarlyStart {
                    flow: s.flow,
                    start: s.start,
                });
            }
        }
        if assignment.flow_to_core.get(&s.flow) != Some(&s.core) {
            findings.push(Finding::WrongCore {
                flow: s.flow,
                core: s.core,
            });
        }
    }

    for (&f, &(d, r)) in &size_of {
        let got = sent.get(&f).copied().unwrap_or(0);
        if got != d as i64 {
            findings.push(Finding::Volume {
                flow: f,
                sent: got,
                size: d,
            });
        }
        let reported = result.flow_completion.get(&f).copied().unwrap_or(i64::MIN);
        if reported < r + d as i64 {
            findings.push(Finding::BelowReleasePlusSize {
                flow: f,
                completion: reported,
            });
        }
        if let Some(&end) = last_end.get(&f) {
            if end != reported {
                findings.push(Finding::CompletionMismatch {
                    flow: f,
                    reported,
                    timeline: end,
                });
            }
        }
    }
    for c in &instance.coflows {
        let expected = c
            .flows()
            .map(|(f, _)| result.flow_completion.get(&f).copied().unwrap_or(i64::MIN))
            .max()
            .unwrap_or(c.release);
        let reported = result
            .coflow_completion
            .get(&c.id)
            .copied()
            .unwrap_or(i64::MIN);
        if reported != expected {
            findings.push(Finding::CoflowCompletion {
                coflow: c.id,
                reported,
                expected,
            });
        }
    }

    findings.extend(port_conflicts(&result.timeline));
    findings.extend(list_property(instance, order, assignment, &result.timeline));
    findings
}

fn port_conflicts(timeline: &[Segment]) -> Vec<Finding> {
    // (core, side, port) -> segments sorted by start
    let mut by_port: BTreeMap<(u32, bool, u32), Vec<&Segment>> = BTreeMap::new();
    for s in timeline {
        by_port
            .entry((s.core, true, s.flow.input))
            .or_default()
            .push(s);
        by_port
            .entry((s.core, false, s.flow.output))
            .or_default()
            .push(s);
    }
    let mut out = Vec::new();
    for ((core, input_side, port), mut segs) in by_port {
        segs.sort_by_key(|s| (s.start, s.end));
        for w in segs.windows(2) {
            if w[1].start < w[0].end {
                out.push(Finding::PortConflict {
                    core,
                    input_side,
                    port,
                    first: w[0].flow,
                    second: w[1].flow,
                    at: w[1].start,
                });
            }
        }
    }
    out
}

/// Replays the timeline per core. At every release and every segment
/// boundary, the flows transmitting must be exactly those a greedy scan of the
/// released, unfinished flows (in priority order) would start.
fn list_property(
    instance: &Instance,
    order: &Permutation,
    assignment: &Assignment,
    timeline: &[Segment],
) -> Vec<Finding> {
    let mut out = Vec::new();
    for core in 1..=instance.cores {
        // priority-ordered flows on this core: (key, size, release)
        let mut flows: Vec<(FlowKey, u64, i64)> = Vec::new();
        for &k in &order.order {
            let c = instance.coflow(k);
            let list = match assignment.granularity {
                Granularity::Flow => flows_by_size(c),
                Granularity::Coflow => c.flows().collect(),
            };
            for (f, d) in list {
                if assignment.flow_to_core.get(&f) == Some(&core) {
                    flows.push((f, d, c.release));
                }
            }
        }
        if flows.is_empty() {
            continue;
        }
        let index: BTreeMap<FlowKey, usize> =
            flows.iter().enumerate().map(|(x, f)| (f.0, x)).collect();
        let segs: Vec<&Segment> = timeline.iter().filter(|s| s.core == core).collect();
        let mut times: Vec<i64> = segs
            .iter()
            .flat_map(|s| [s.start, s.end])
            .chain(flows.iter().map(|f| f.2))
            .collect();
        times.sort_unstable();
        times.dedup();

        let mut remaining: Vec<i64> = flows.iter().map(|f| f.1 as i64).collect();
        let mut in_busy = vec![false; instance.ports as usize + 1];
        let mut out_busy = vec![false; instance.ports as usize + 1];
        for (x, &t) in times.iter().enumerate() {
            let mut actual: Vec<usize> = segs
                .iter()
                .filter(|s| s.start <= t && t < s.end)
                .filter_map(|s| index.get(&s.flow).copied())
                .collect();
            actual.sort_unstable();

            let mut greedy = Vec::new();
            for (y, f) in flows.iter().enumerate() {
                if f.2 <= t && remaining[y] > 0 {
                    let (i, j) = (f.0.input as usize, f.0.output as usize);
                    if !in_busy[i] && !out_busy[j] {
                        in_busy[i] = true;
                        out_busy[j] = true;
                        greedy.push(y);
                    }
                }
            }
            for &y in &greedy {
                in_busy[flows[y].0.input as usize] = false;
                out_busy[flows[y].0.output as usize] = false;
            }
            if greedy != actual {
                out.push(Finding::NotListSchedule { core, at: t });
            }
            if let Some(&next) = times.get(x + 1) {
                for &y in &actual {
                    remaining[y] -= next - t;
                }
            }
        }
    }
    out
}

/// Compares coflow completions with per-coflow bounds at tolerance `tol`.
pub fn check_bounds(
    result: &ScheduleResult,
    bounds: &BTreeMap<u32, f64>,
    tol: f64,
) -> Vec<Finding> {
    bounds
        .iter()
        .filter_map(|(&k, &bound)| {
            let completion = result.coflow_completion[&k];
            (completion as f64 > bound + tol).then_some(Finding::BoundExceeded {
                coflow: k,
                completion,
                bound,
            })
        })
        .collect()
}
