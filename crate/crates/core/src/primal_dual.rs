//! Primal-dual construction of the coflow processing order.
//!
//! The order is built right to left. Each step looks at the most loaded input
//! port and output port among the unscheduled coflows and either raises an
//! `alpha` variable (the latest-released coflow goes last) or a `beta` variable
//! on the bottleneck port (the coflow whose dual constraint becomes tight first
//! goes last). Instead of storing `beta` per port set, every coflow keeps an
//! accumulator `delta_k` of how much of its weight has been charged so far, so a
//! run costs `O(n (N + n))` time and `O(N n)` memory. The dual objective is
//! accumulated alongside and is a lower bound on the optimal weighted
//! completion time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;

/// Default threshold between the `alpha` and `beta` steps.
pub const DEFAULT_KAPPA: f64 = 0.5;

/// Whether flows of one coflow may be spread over several cores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Each flow picks its own core.
    Flow,
    /// All flows of a coflow share one core.
    Coflow,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Flow => "flow",
            Granularity::Coflow => "coflow",
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(Granularity::Flow),
            "coflow" => Ok(Granularity::Coflow),
            other => Err(Error::Config(format!("unknown granularity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Input,
    Output,
}

/// One step of the right-to-left construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Position being filled, `n` down to 1.
    pub iteration: usize,
    pub coflow: u32,
    pub branch: Branch,
    pub side: Side,
    pub port: u32,
    /// Remaining load on the bottleneck port when the step started.
    pub bottleneck_load: u64,
    /// `alpha` or `beta`, depending on `branch`.
    pub value: f64,
    pub increment: f64,
    /// `w_k - delta_k - alpha` (alpha step) or `w_k - delta_k - beta * L` (beta
    /// step) for the selected coflow. Zero up to rounding.
    pub gap: f64,
    /// Smallest `w_k - delta_k` over coflows still unscheduled after the step.
    pub min_slack: f64,
    /// `d(S)` of the port set whose `beta` was raised (beta steps only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set_load: Option<f64>,
    /// The set function value `f(S)` credited for that set (beta steps only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set_value: Option<f64>,
    /// Set when every unscheduled coflow had zero load at the bottleneck port.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DualTrace {
    pub kappa: f64,
    pub records: Vec<IterationRecord>,
    /// Final `delta_k`, indexed by `k - 1`.
    pub delta: Vec<f64>,
    pub dual_cost: f64,
}

impl DualTrace {
    /// One JSON object per line, in iteration order.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// A processing order of coflows together with the dual bound that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Permutation {
    /// Coflow ids; index 0 is processed first.
    pub order: Vec<u32>,
    pub dual_cost: f64,
    pub trace: DualTrace,
    position: Vec<usize>,
}

impl Permutation {
    /// Wraps an arbitrary order with no dual information (`dual_cost` is 0).
    pub fn from_order(order: Vec<u32>) -> Result<Self> {
        Self::build(order, DualTrace::default())
    }

    fn build(order: Vec<u32>, trace: DualTrace) -> Result<Self> {
        let n = order.len();
        let mut position = vec![0usize; n];
        for (p, &k) in order.iter().enumerate() {
            let k = k as usize;
            if k == 0 || k > n || position[k - 1] != 0 {
                return Err(Error::BadPermutation { expected: n });
            }
            position[k - 1] = p + 1;
        }
        Ok(Permutation {
            order,
            dual_cost: trace.dual_cost,
            trace,
            position,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// 1-based position of coflow `k` in the order.
    pub fn position(&self, k: u32) -> usize {
        self.position[k as usize - 1]
    }
}

/// `f(S) = (d(S)^2 + d^2(S)) / 2m` over a multiset of flow sizes.
pub fn set_function_flow<I>(sizes: I, cores: u32) -> f64
where
    I: IntoIterator<Item = u64>,
{
    let (sum, sq) = sizes.into_iter().fold((0u128, 0u128), |(s, q), d| {
        (s + d as u128, q + (d as u128) * (d as u128))
    });
    set_value(sum, sq, cores)
}

/// `f_i(S) = (sum L^2 + (sum L)^2) / 2m` over the port loads of the coflows in `S`.
///
/// The same expression as [`set_function_flow`] with coflow loads in place of
/// flow sizes; it serves both the input and output side.
pub fn set_function_coflow<I>(port_loads: I, cores: u32) -> f64
where
    I: IntoIterator<Item = u64>,
{
    set_function_flow(port_loads, cores)
}

fn set_value(sum: u128, sum_sq: u128, cores: u32) -> f64 {
    let s = sum as f64;
    (s * s + sum_sq as f64) / (2.0 * cores as f64)
}

/// Flow-level ordering.
pub fn order_flow_level(instance: &Instance, kappa: f64) -> Result<Permutation> {
    order(instance, kappa, Granularity::Flow)
}

/// Coflow-level ordering.
pub fn order_coflow_level(instance: &Instance, kappa: f64) -> Result<Permutation> {
    order(instance, kappa, Granularity::Coflow)
}

/// Per-port, per-coflow quantities the ordering needs, laid out `[port][coflow]`.
struct PortTable {
    n: usize,
    load: Vec<u64>,
    // flow level: sum of squared flow sizes; coflow level: squared port load
    sq: Vec<u128>,
    // largest flow (flow level) or the port load (coflow level); the alpha credit
    alpha_len: Vec<u64>,
}

impl PortTable {
    fn new(ports: usize, n: usize) -> Self {
        PortTable {
            n,
            load: vec![0; ports * n],
            sq: vec![0; ports * n],
            alpha_len: vec![0; ports * n],
        }
    }

    fn idx(&self, p: usize, k: usize) -> usize {
        p * self.n + k
    }
}

pub fn order(instance: &Instance, kappa: f64, granularity: Granularity) -> Result<Permutation> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::BadKappa(kappa));
    }
    instance.check()?;

    let n = instance.coflow_count();
    let ports = instance.ports as usize;
    let m = instance.cores as f64;

    let mut input = PortTable::new(ports, n);
    let mut output = PortTable::new(ports, n);
    for (k, c) in instance.coflows.iter().enumerate() {
        for (&(i, j), &d) in &c.demands {
            let (ii, jj) = (input.idx(i as usize - 1, k), output.idx(j as usize - 1, k));
            input.load[ii] += d;
            output.load[jj] += d;
            if granularity == Granularity::Flow {
                let d2 = d as u128 * d as u128;
                input.sq[ii] += d2;
                output.sq[jj] += d2;
                input.alpha_len[ii] = input.alpha_len[ii].max(d);
                output.alpha_len[jj] = output.alpha_len[jj].max(d);
            }
        }
    }
    if granularity == Granularity::Coflow {
        for t in [&mut input, &mut output] {
            for x in 0..t.load.len() {
                let l = t.load[x] as u128;
                t.sq[x] = l * l;
                t.alpha_len[x] = t.load[x];
            }
        }
    }

    // Remaining totals over unscheduled coflows.
    let totals = |t: &PortTable| -> (Vec<u64>, Vec<u128>) {
        (0..ports)
            .map(|p| {
                let row = p * n..(p + 1) * n;
                (
                    t.load[row.clone()].iter().sum::<u64>(),
                    t.sq[row].iter().sum::<u128>(),
                )
            })
            .unzip()
    };
    let (mut in_left, mut in_sq_left) = totals(&input);
    let (mut out_left, mut out_sq_left) = totals(&output);

    let weights: Vec<f64> = instance.coflows.iter().map(|c| c.weight).collect();
    let releases: Vec<i64> = instance.coflows.iter().map(|c| c.release).collect();
    let mut delta = vec![0.0f64; n];
    let mut active = vec![true; n];
    let mut order = vec![0u32; n];
    let mut records = Vec::with_capacity(n);
    let mut dual_cost = 0.0f64;

    for r in (1..=n).rev() {
        let mu1 = argmax(&in_left);
        let mu2 = argmax(&out_left);
        let latest = (0..n)
            .filter(|&k| active[k])
            .fold(None, |best: Option<usize>, k| match best {
                Some(b) if releases[b] >= releases[k] => Some(b),
                _ => Some(k),
            })
            .expect("an unscheduled coflow remains");

        let (side, port, table, left, sq_left) = if in_left[mu1] > out_left[mu2] {
            (Side::Input, mu1, &input, in_left[mu1], in_sq_left[mu1])
        } else {
            (Side::Output, mu2, &output, out_left[mu2], out_sq_left[mu2])
        };
        let at = |k: usize| table.idx(port, k);

        let record = if releases[latest] as f64 > kappa * left as f64 / m {
            let alpha = weights[latest] - delta[latest];
            let increment = alpha * (releases[latest] as f64 + table.alpha_len[at(latest)] as f64);
            IterationRecord {
                iteration: r,
                coflow: latest as u32 + 1,
                branch: Branch::Alpha,
                side,
                port: port as u32 + 1,
                bottleneck_load: left,
                value: alpha,
                increment,
                gap: weights[latest] - delta[latest] - alpha,
                min_slack: 0.0,
                set_load: None,
                set_value: None,
                fallback: false,
            }
        } else {
            let mut best: Option<(usize, f64)> = None;
            for k in (0..n).filter(|&k| active[k] && table.load[at(k)] > 0) {
                let ratio = (weights[k] - delta[k]) / table.load[at(k)] as f64;
                if best.is_none_or(|(_, b)| ratio < b) {
                    best = Some((k, ratio));
                }
            }
            match best {
                Some((chosen, beta)) => {
                    for k in (0..n).filter(|&k| active[k] && k != chosen) {
                        delta[k] += beta * table.load[at(k)] as f64;
                    }
                    let f = set_value(left as u128, sq_left, instance.cores);
                    IterationRecord {
                        iteration: r,
                        coflow: chosen as u32 + 1,
                        branch: Branch::Beta,
                        side,
                        port: port as u32 + 1,
                        bottleneck_load: left,
                        value: beta,
                        increment: beta * f,
                        gap: weights[chosen] - delta[chosen] - beta * table.load[at(chosen)] as f64,
                        min_slack: 0.0,
                        set_load: Some(left as f64),
                        set_value: Some(f),
                        fallback: false,
                    }
                }
                None => {
                    // Nothing left at the bottleneck port: no beta can be raised.
                    let chosen = (0..n)
                        .filter(|&k| active[k])
                        .fold(None, |b: Option<usize>, k| match b {
                            Some(b) if weights[b] - delta[b] <= weights[k] - delta[k] => Some(b),
                            _ => Some(k),
                        })
                        .expect("an unscheduled coflow remains");
                    IterationRecord {
                        iteration: r,
                        coflow: chosen as u32 + 1,
                        branch: Branch::Beta,
                        side,
                        port: port as u32 + 1,
                        bottleneck_load: left,
                        value: 0.0,
                        increment: 0.0,
                        gap: weights[chosen] - delta[chosen],
                        min_slack: 0.0,
                        set_load: Some(0.0),
                        set_value: Some(0.0),
                        fallback: true,
                    }
                }
            }
        };

        let chosen = record.coflow as usize - 1;
        dual_cost += record.increment;
        active[chosen] = false;
        order[r - 1] = record.coflow;
        for p in 0..ports {
            in_left[p] -= input.load[input.idx(p, chosen)];
            in_sq_left[p] -= input.sq[input.idx(p, chosen)];
            out_left[p] -= output.load[output.idx(p, chosen)];
            out_sq_left[p] -= output.sq[output.idx(p, chosen)];
        }
        let min_slack = (0..n)
            .filter(|&k| active[k])
            .map(|k| weights[k] - delta[k])
            .fold(f64::INFINITY, f64::min);
        records.push(IterationRecord {
            min_slack: if min_slack.is_finite() {
                min_slack
            } else {
                0.0
            },
            ..record
        });
    }

    Permutation::build(
        order,
        DualTrace {
            kappa,
            records,
            delta,
            dual_cost,
        },
    )
}

/// Index of the largest entry, lowest index on ties.
fn argmax(v: &[u64]) -> usize {
    let mut best = 0;
    for (p, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = p;
        }
    }
    best
}
