//! Exhaustive baselines for desk-sized instances.
//!
//! `enumerate_best` tries every coflow order with every core assignment and
//! keeps the cheapest list schedule. That value is an upper bound on the
//! optimum, so every valid lower bound must sit below it and every
//! approximation guarantee stated against the optimum also holds against it.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::primal_dual::{order, Granularity};
use crate::scheduler::{assign_cdls, assign_fdls, flows_by_size, objective_of, simulate, CoreFlow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_coflows: usize,
    pub max_ports: u32,
    pub max_cores: u32,
    /// Cap on `n! * m^(units - 1)` simulated schedules.
    pub max_schedules: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_coflows: 6,
            max_ports: 3,
            max_cores: 2,
            max_schedules: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Cheapest list schedule found; an upper bound on the optimum.
    pub best_cost: f64,
    /// [`trivial_lower_bound`] of the instance.
    pub lower_bound: f64,
    pub schedules_examined: u64,
    /// Order achieving `best_cost` (first in enumeration order on ties).
    pub best_order: Vec<u32>,
    /// Core per assignment unit (flow in priority order, or coflow id order).
    pub best_cores: Vec<u32>,
}

/// `sum_k w_k max(r_k + max d_k, max_i L_ik / m, max_j L_jk / m)`.
pub fn trivial_lower_bound(instance: &Instance) -> f64 {
    let m = instance.cores as f64;
    instance
        .coflows
        .iter()
        .map(|c| {
            let mut ins = std::collections::BTreeMap::<u32, u64>::new();
            let mut outs = std::collections::BTreeMap::<u32, u64>::new();
            for (&(i, j), &d) in &c.demands {
                *ins.entry(i).or_default() += d;
                *outs.entry(j).or_default() += d;
            }
            let port = ins
                .values()
                .chain(outs.values())
                .copied()
                .max()
                .unwrap_or(0);
            let single = (c.release + c.max_flow_size() as i64) as f64;
            c.weight * single.max(port as f64 / m)
        })
        .sum()
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

fn schedule_count(n: usize, units: usize, cores: u32) -> Option<u64> {
    let mut total = factorial(n);
    for _ in 1..units {
        total = total.checked_mul(cores as u64)?;
    }
    Some(total)
}

/// All permutations of `1..=n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<u32>> {
    let mut cur: Vec<u32> = (1..=n as u32).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

/// Minimum objective over all orders and all assignments at `granularity`.
///
/// Flow granularity assigns each flow independently; coflow granularity keeps a
/// coflow's flows together. The first unit is pinned to core 1 since cores are
/// interchangeable.
pub fn enumerate_best(
    instance: &Instance,
    limits: &OracleLimits,
    granularity: Granularity,
) -> Result<OracleResult> {
    instance.check()?;
    let n = instance.coflow_count();
    if n > limits.max_coflows
        || instance.ports > limits.max_ports
        || instance.cores > limits.max_cores
    {
        return Err(Error::LimitExceeded(format!(
            "n={n}, N={}, m={} exceeds caps n<={}, N<={}, m<={}",
            instance.ports, instance.cores, limits.max_coflows, limits.max_ports, limits.max_cores
        )));
    }
    let units = match granularity {
        Granularity::Flow => instance.flow_count(),
        Granularity::Coflow => n,
    };
    let total = schedule_count(n, units, instance.cores)
        .filter(|&t| t <= limits.max_schedules)
        .ok_or_else(|| {
            Error::LimitExceeded(format!(
                "{n}! orders x {}^{} assignments exceeds {} schedules",
                instance.cores,
                units.saturating_sub(1),
                limits.max_schedules
            ))
        })?;

    let m = instance.cores as usize;
    let per_order = |perm: &Vec<u32>| -> (f64, Vec<u32>) {
        // priority-ordered flows, each tagged with its assignment unit
        let mut flows: Vec<(CoreFlow, usize)> = Vec::new();
        for &k in perm {
            let c = instance.coflow(k);
            let list = match granularity {
                Granularity::Flow => flows_by_size(c),
                Granularity::Coflow => c.flows().collect(),
            };
            for (key, size) in list {
                let unit = match granularity {
                    Granularity::Flow => flows.len(),
                    Granularity::Coflow => k as usize - 1,
                };
                flows.push((
                    CoreFlow {
                        key,
                        size,
                        release: c.release,
                    },
                    unit,
                ));
            }
        }
        let mut cores = vec![0usize; units];
        let mut best = (f64::INFINITY, Vec::new());
        let mut lists: Vec<Vec<CoreFlow>> = vec![Vec::new(); m];
        loop {
            for l in lists.iter_mut() {
                l.clear();
            }
            for (f, u) in &flows {
                lists[cores[*u]].push(*f);
            }
            let cost = objective_of(instance, &lists);
            if cost < best.0 {
                best = (cost, cores.iter().map(|&h| h as u32 + 1).collect());
            }
            // odometer over units 1.., unit 0 stays on core 1
            let mut x = 1;
            while x < units {
                cores[x] += 1;
                if cores[x] < m {
                    break;
                }
                cores[x] = 0;
                x += 1;
            }
            if x >= units {
                break;
            }
        }
        best
    };

    let perms = permutations(n);
    let results: Vec<(f64, Vec<u32>)> = perms.par_iter().map(per_order).collect();
    let (idx, (best_cost, best_cores)) = results
        .into_iter()
        .enumerate()
        .fold(
            None,
            |acc: Option<(usize, (f64, Vec<u32>))>, (x, r)| match acc {
                Some(a) if a.1 .0 <= r.0 => Some(a),
                _ => Some((x, r)),
            },
        )
        .expect("at least one order");

    Ok(OracleResult {
        best_cost,
        lower_bound: trivial_lower_bound(instance),
        schedules_examined: total,
        best_order: perms[idx].clone(),
        best_cores,
    })
}

/// Approximation guarantee of the list scheduler at `granularity` on `m` cores.
pub fn guarantee(granularity: Granularity, cores: u32, with_releases: bool) -> f64 {
    let m = cores as f64;
    match (granularity, with_releases) {
        (Granularity::Flow, false) => 5.0 - 2.0 / m,
        (Granularity::Flow, true) => 6.0 - 2.0 / m,
        (Granularity::Coflow, false) => 4.0 * m,
        (Granularity::Coflow, true) => 4.0 * m + 1.0,
    }
}

/// All sandwich quantities for one instance and granularity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub granularity: Granularity,
    pub dual_cost: f64,
    pub trivial_lower_bound: f64,
    pub best_cost: f64,
    pub algorithm_cost: f64,
    pub guarantee: f64,
    /// `dual_cost <= best_cost` (relative tolerance 1e-9).
    pub dual_below_best: bool,
    /// `trivial_lower_bound <= best_cost`.
    pub trivial_below_best: bool,
    /// `algorithm_cost <= guarantee * best_cost`.
    pub within_guarantee: bool,
}

pub fn oracle_check(
    instance: &Instance,
    kappa: f64,
    granularity: Granularity,
    limits: &OracleLimits,
) -> Result<OracleCheck> {
    let best = enumerate_best(instance, limits, granularity)?;
    let perm = order(instance, kappa, granularity)?;
    let assignment = match granularity {
        Granularity::Flow => assign_fdls(instance, &perm)?,
        Granularity::Coflow => assign_cdls(instance, &perm)?,
    };
    let algorithm_cost = simulate(instance, &perm, &assignment)?.objective;
    let rho = guarantee(granularity, instance.cores, instance.has_releases());
    let slack = |x: f64| 1e-9 * x.abs().max(1.0);
    Ok(OracleCheck {
        granularity,
        dual_cost: perm.dual_cost,
        trivial_lower_bound: best.lower_bound,
        best_cost: best.best_cost,
        algorithm_cost,
        guarantee: rho,
        dual_below_best: perm.dual_cost <= best.best_cost + slack(best.best_cost),
        trivial_below_best: best.lower_bound <= best.best_cost + slack(best.best_cost),
        within_guarantee: algorithm_cost <= rho * best.best_cost + slack(best.best_cost),
    })
}
