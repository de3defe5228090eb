//! Core assignment and port-exclusive list scheduling on `m` parallel cores.
//!
//! Assignment is greedy over the permutation: per flow (`assign_fdls`) or per
//! coflow (`assign_cdls`). Transmission is simulated event by event; at every
//! release or completion each core rescans its priority list and starts every
//! flow whose input and output ports are both idle on that core. Running flows
//! move one data unit per time unit. With integer sizes and releases all event
//! times are integers, so time is kept as `i64`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Coflow, FlowKey, Instance};
use crate::primal_dual::{Granularity, Permutation};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub granularity: Granularity,
    pub cores: u32,
    /// Core (1-based) of every flow. Filled at both granularities.
    pub flow_to_core: BTreeMap<FlowKey, u32>,
    /// Core of every coflow; empty at flow granularity.
    pub coflow_to_core: BTreeMap<u32, u32>,
    ports: usize,
    // [core][port] projected loads accumulated while assigning
    load_in: Vec<u64>,
    load_out: Vec<u64>,
}

impl Assignment {
    fn empty(granularity: Granularity, cores: u32, ports: u32) -> Self {
        let cells = cores as usize * ports as usize;
        Assignment {
            granularity,
            cores,
            flow_to_core: BTreeMap::new(),
            coflow_to_core: BTreeMap::new(),
            ports: ports as usize,
            load_in: vec![0; cells],
            load_out: vec![0; cells],
        }
    }

    /// Flow-level assignment from an explicit map, e.g. for enumeration.
    pub fn from_flow_map(instance: &Instance, flow_to_core: BTreeMap<FlowKey, u32>) -> Self {
        let mut a = Assignment::empty(Granularity::Flow, instance.cores, instance.ports);
        for (f, &h) in &flow_to_core {
            if let Some(d) = instance
                .coflows
                .get(f.coflow as usize - 1)
                .and_then(|c| c.demands.get(&(f.input, f.output)))
            {
                if (1..=a.cores).contains(&h)
                    && (1..=instance.ports).contains(&f.input)
                    && (1..=instance.ports).contains(&f.output)
                {
                    a.add_load(h, f.input, f.output, *d);
                }
            }
        }
        a.flow_to_core = flow_to_core;
        a
    }

    /// Coflow-level assignment from an explicit coflow map.
    pub fn from_coflow_map(instance: &Instance, coflow_to_core: BTreeMap<u32, u32>) -> Self {
        let mut a = Assignment::empty(Granularity::Coflow, instance.cores, instance.ports);
        for (&k, &h) in &coflow_to_core {
            if let Some(c) = instance.coflows.get(k as usize - 1) {
                a.place_coflow(c, h);
            }
        }
        a.coflow_to_core = coflow_to_core;
        a
    }

    /// `load_I(i, h)`: data assigned to input port `i` of core `h`.
    pub fn projected_input_load(&self, port: u32, core: u32) -> u64 {
        self.load_in[self.cell(core, port)]
    }

    /// `load_O(j, h)`.
    pub fn projected_output_load(&self, port: u32, core: u32) -> u64 {
        self.load_out[self.cell(core, port)]
    }

    fn cell(&self, core: u32, port: u32) -> usize {
        (core as usize - 1) * self.ports + port as usize - 1
    }

    fn add_load(&mut self, core: u32, i: u32, j: u32, d: u64) {
        let (ci, cj) = (self.cell(core, i), self.cell(core, j));
        self.load_in[ci] += d;
        self.load_out[cj] += d;
    }

    fn place_coflow(&mut self, c: &Coflow, core: u32) {
        for (f, d) in c.flows() {
            self.flow_to_core.insert(f, core);
            self.add_load(core, f.input, f.output, d);
        }
    }
}

/// Flows of a coflow by non-increasing size, then `(i, j)`.
pub fn flows_by_size(c: &Coflow) -> Vec<(FlowKey, u64)> {
    let mut v: Vec<_> = c.flows().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

fn check_order(instance: &Instance, order: &Permutation) -> Result<()> {
    if order.len() != instance.coflow_count() {
        return Err(Error::BadPermutation {
            expected: instance.coflow_count(),
        });
    }
    Ok(())
}

/// Flow-driven list scheduling, assignment phase: every flow goes to the core
/// minimizing `load_I(i, h) + load_O(j, h)`, lowest core on ties.
pub fn assign_fdls(instance: &Instance, order: &Permutation) -> Result<Assignment> {
    instance.check()?;
    check_order(instance, order)?;
    let mut a = Assignment::empty(Granularity::Flow, instance.cores, instance.ports);
    for &k in &order.order {
        for (f, d) in flows_by_size(instance.coflow(k)) {
            let core = (1..=instance.cores)
                .min_by_key(|&h| {
                    a.projected_input_load(f.input, h) + a.projected_output_load(f.output, h)
                })
                .expect("at least one core");
            a.flow_to_core.insert(f, core);
            a.add_load(core, f.input, f.output, d);
        }
    }
    Ok(a)
}

/// Coflow-driven list scheduling, assignment phase: a whole coflow goes to the
/// core minimizing `max_i (load_I(i, h) + L_ik) + max_j (load_O(j, h) + L_jk)`
/// where the maxima range over the ports the coflow actually uses.
pub fn assign_cdls(instance: &Instance, order: &Permutation) -> Result<Assignment> {
    instance.check()?;
    check_order(instance, order)?;
    let mut a = Assignment::empty(Granularity::Coflow, instance.cores, instance.ports);
    for &k in &order.order {
        let c = instance.coflow(k);
        let mut in_load: BTreeMap<u32, u64> = BTreeMap::new();
        let mut out_load: BTreeMap<u32, u64> = BTreeMap::new();
        for (&(i, j), &d) in &c.demands {
            *in_load.entry(i).or_default() += d;
            *out_load.entry(j).or_default() += d;
        }
        let score = |h: u32| -> u64 {
            let worst_in = in_load
                .iter()
                .map(|(&i, &l)| a.projected_input_load(i, h) + l)
                .max()
                .unwrap_or(0);
            let worst_out = out_load
                .iter()
                .map(|(&j, &l)| a.projected_output_load(j, h) + l)
                .max()
                .unwrap_or(0);
            worst_in + worst_out
        };
        let core = (1..=instance.cores)
            .min_by_key(|&h| score(h))
            .expect("at least one core");
        a.coflow_to_core.insert(k, core);
        a.place_coflow(c, core);
    }
    Ok(a)
}

/// A maximal interval during which one flow transmits on one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub start: i64,
    pub end: i64,
    pub flow: FlowKey,
    pub core: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleResult {
    pub flow_completion: BTreeMap<FlowKey, i64>,
    pub coflow_completion: BTreeMap<u32, i64>,
    /// `sum_k w_k C_k`.
    pub objective: f64,
    /// Transmission segments ordered by core, then start time.
    pub timeline: Vec<Segment>,
}

impl ScheduleResult {
    pub fn to_json(&self, include_timeline: bool) -> String {
        #[derive(Serialize)]
        struct CoflowRow {
            id: u32,
            completion: i64,
        }
        #[derive(Serialize)]
        struct FlowRow {
            i: u32,
            j: u32,
            k: u32,
            completion: i64,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            objective: f64,
            coflows: Vec<CoflowRow>,
            flows: Vec<FlowRow>,
            #[serde(skip_serializing_if = "Option::is_none")]
            timeline: Option<&'a [Segment]>,
        }
        let doc = Doc {
            objective: self.objective,
            coflows: self
                .coflow_completion
                .iter()
                .map(|(&id, &completion)| CoflowRow { id, completion })
                .collect(),
            flows: self
                .flow_completion
                .iter()
                .map(|(f, &completion)| FlowRow {
                    i: f.input,
                    j: f.output,
                    k: f.coflow,
                    completion,
                })
                .collect(),
            timeline: include_timeline.then_some(&self.timeline[..]),
        };
        serde_json::to_string_pretty(&doc).expect("schedule serializes")
    }

    /// `start,end,i,j,k,core` rows with a header line.
    pub fn timeline_csv(&self) -> String {
        let mut out = String::from("start,end,i,j,k,core\n");
        for s in &self.timeline {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.start, s.end, s.flow.input, s.flow.output, s.flow.coflow, s.core
            ));
        }
        out
    }
}

/// A flow as seen by a single core's engine.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CoreFlow {
    pub key: FlowKey,
    pub size: u64,
    pub release: i64,
}

/// Runs one core. `flows` must be in priority order. Returns completion times
/// aligned with `flows`; appends segments when `timeline` is given.
pub(crate) fn run_core(
    flows: &[CoreFlow],
    ports: usize,
    core: u32,
    mut timeline: Option<&mut Vec<Segment>>,
) -> Vec<i64> {
    let count = flows.len();
    let mut completion = vec![0i64; count];
    if count == 0 {
        return completion;
    }
    let mut remaining: Vec<u64> = flows.iter().map(|f| f.size).collect();
    let mut by_release: Vec<usize> = (0..count).collect();
    by_release.sort_by_key(|&x| (flows[x].release, x));
    let mut next_arrival = 0;
    // released, incomplete, sorted by priority
    let mut pending: Vec<usize> = Vec::new();
    let mut in_busy = vec![false; ports + 1];
    let mut out_busy = vec![false; ports + 1];
    let mut running: Vec<usize> = Vec::new();
    // index into `timeline` of each flow's most recent segment
    let mut last_segment: Vec<Option<usize>> = vec![None; count];
    let mut done = 0;
    let mut t = flows[by_release[0]].release;

    while done < count {
        let before = pending.len();
        while next_arrival < count && flows[by_release[next_arrival]].release <= t {
            pending.push(by_release[next_arrival]);
            next_arrival += 1;
        }
        if pending.len() != before {
            pending.sort_unstable();
        }

        running.clear();
        for &x in &pending {
            let f = &flows[x].key;
            let (i, j) = (f.input as usize, f.output as usize);
            if !in_busy[i] && !out_busy[j] {
                in_busy[i] = true;
                out_busy[j] = true;
                running.push(x);
                if running.len() == ports {
                    break;
                }
            }
        }
        for &x in &running {
            in_busy[flows[x].key.input as usize] = false;
            out_busy[flows[x].key.output as usize] = false;
        }

        let arrival = (next_arrival < count).then(|| flows[by_release[next_arrival]].release);
        if running.is_empty() {
            t = arrival.expect("idle core with incomplete flows must await a release");
            continue;
        }
        let mut dt = running.iter().map(|&x| remaining[x]).min().unwrap() as i64;
        if let Some(a) = arrival {
            dt = dt.min(a - t);
        }
        let end = t + dt;
        let mut finished = false;
        for &x in &running {
            remaining[x] -= dt as u64;
            if let Some(tl) = timeline.as_deref_mut() {
                match last_segment[x] {
                    Some(s) if tl[s].end == t => tl[s].end = end,
                    _ => {
                        last_segment[x] = Some(tl.len());
                        tl.push(Segment {
                            start: t,
                            end,
                            flow: flows[x].key,
                            core,
                        });
                    }
                }
            }
            if remaining[x] == 0 {
                completion[x] = end;
                done += 1;
                finished = true;
            }
        }
        if finished {
            pending.retain(|&x| remaining[x] > 0);
        }
        t = end;
    }
    completion
}

/// Per-core flow lists in priority order: permutation position, then
/// non-increasing size (flow level) or `(i, j)` (coflow level), then `(i, j)`.
pub(crate) fn core_lists(
    instance: &Instance,
    order: &Permutation,
    assignment: &Assignment,
) -> Result<Vec<Vec<CoreFlow>>> {
    let mut lists = vec![Vec::new(); instance.cores as usize];
    let mut seen = 0usize;
    for &k in &order.order {
        let c = instance.coflow(k);
        let flows = match assignment.granularity {
            Granularity::Flow => flows_by_size(c),
            Granularity::Coflow => c.flows().collect(),
        };
        for (f, size) in flows {
            let core = *assignment
                .flow_to_core
                .get(&f)
                .ok_or(Error::UnassignedFlow(f))?;
            if core == 0 || core > instance.cores {
                return Err(Error::CoreOutOfRange {
                    flow: f,
                    core,
                    cores: instance.cores,
                });
            }
            seen += 1;
            lists[core as usize - 1].push(CoreFlow {
                key: f,
                size,
                release: c.release,
            });
        }
    }
    if seen != assignment.flow_to_core.len() {
        let unknown = assignment
            .flow_to_core
            .keys()
            .find(|f| {
                instance
                    .coflows
                    .get((f.coflow as usize).wrapping_sub(1))
                    .is_none_or(|c| !c.demands.contains_key(&(f.input, f.output)))
            })
            .copied()
            .expect("an assigned flow is not part of the instance");
        return Err(Error::UnknownFlow(unknown));
    }
    Ok(lists)
}

/// Simulates transmission of an assigned instance.
pub fn simulate(
    instance: &Instance,
    order: &Permutation,
    assignment: &Assignment,
) -> Result<ScheduleResult> {
    instance.check()?;
    check_order(instance, order)?;
    let lists = core_lists(instance, order, assignment)?;
    let ports = instance.ports as usize;
    let mut timeline = Vec::new();
    let mut flow_completion = BTreeMap::new();
    for (h, list) in lists.iter().enumerate() {
        let done = run_core(list, ports, h as u32 + 1, Some(&mut timeline));
        for (f, c) in list.iter().zip(done) {
            flow_completion.insert(f.key, c);
        }
    }
    let mut coflow_completion = BTreeMap::new();
    let mut objective = 0.0;
    for c in &instance.coflows {
        let ck = c
            .demands
            .keys()
            .map(|&(i, j)| flow_completion[&FlowKey::new(i, j, c.id)])
            .max()
            .unwrap_or(c.release);
        coflow_completion.insert(c.id, ck);
        objective += c.weight * ck as f64;
    }
    Ok(ScheduleResult {
        flow_completion,
        coflow_completion,
        objective,
        timeline,
    })
}

/// Objective of a list schedule without building the result maps.
pub(crate) fn objective_of(instance: &Instance, lists: &[Vec<CoreFlow>]) -> f64 {
    let mut ck: Vec<i64> = instance.coflows.iter().map(|c| c.release).collect();
    for list in lists {
        let done = run_core(list, instance.ports as usize, 0, None);
        for (f, c) in list.iter().zip(done) {
            let slot = &mut ck[f.key.coflow as usize - 1];
            *slot = (*slot).max(c);
        }
    }
    instance
        .coflows
        .iter()
        .zip(ck)
        .map(|(c, t)| c.weight * t as f64)
        .sum()
}
