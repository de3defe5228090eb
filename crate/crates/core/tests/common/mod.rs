//! Shared helpers for integration tests: a random corpus and an independent
//! rebuild of the dual solution from an ordering trace.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use coflow_core::model::{Coflow, Instance};
use coflow_core::primal_dual::{Branch, Granularity, Permutation, Side};
use coflow_core::workload::{gen_density, gen_mix, Density, GenOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;

/// Instance `idx` of the 1000-instance mixed corpus: default mix and the three
/// density modes, `n <= 25`, `N = 10`, `m` in {1, 2, 5}, half with releases.
pub fn corpus_instance(idx: u64) -> Instance {
    let n = 1 + (idx as usize * 7) % 25;
    let opts = GenOptions {
        cores: [1, 2, 5][(idx % 3) as usize],
        release_spread: ((idx / 4) % 2 == 1).then_some(200),
    };
    let seed = 10_000 + idx;
    match idx % 4 {
        0 => gen_mix(n, 10, seed, &opts),
        1 => gen_density(n, 10, Density::Dense, seed, &opts),
        2 => gen_density(n, 10, Density::Sparse, seed, &opts),
        _ => gen_density(n, 10, Density::Combined, seed, &opts),
    }
    .unwrap()
}

/// Small instance the exhaustive oracle can handle at flow granularity:
/// `n <= 5`, `N <= 3`, `m <= 2`, at most two flows per coflow.
pub fn tiny_instance(seed: u64, releases: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=5u32);
    let ports = rng.gen_range(1..=3u32);
    let cores = rng.gen_range(1..=2u32);
    let coflows = (1..=n)
        .map(|k| {
            let release = if releases { rng.gen_range(0..=6) } else { 0 };
            let mut c = Coflow::new(k, release, rng.gen_range(1..=10) as f64);
            let flows = rng.gen_range(1..=2);
            while c.flow_count() < flows.min((ports * ports) as usize) {
                let i = rng.gen_range(1..=ports);
                let j = rng.gen_range(1..=ports);
                c.demands.entry((i, j)).or_insert(rng.gen_range(1..=5));
            }
            c
        })
        .collect();
    Instance::new(cores, ports, coflows)
}

fn port_load(c: &Coflow, side: Side, port: u32) -> u64 {
    c.demands
        .iter()
        .filter(|(&(i, j), _)| match side {
            Side::Input => i == port,
            Side::Output => j == port,
        })
        .map(|(_, &d)| d)
        .sum()
}

fn port_flows(c: &Coflow, side: Side, port: u32) -> Vec<u64> {
    c.demands
        .iter()
        .filter(|(&(i, j), _)| match side {
            Side::Input => i == port,
            Side::Output => j == port,
        })
        .map(|(_, &d)| d)
        .collect()
}

/// Dual solution rebuilt from the trace using only the instance.
#[derive(Debug)]
pub struct RebuiltDual {
    pub objective: f64,
    /// Largest violation of `alpha_k + sum beta L <= w_k`.
    pub worst_violation: f64,
    /// Largest `|lhs - w_k|` for the coflow picked at each step, measured when it
    /// was picked.
    pub worst_tightness: f64,
    pub alpha_steps: usize,
    pub beta_steps: usize,
}

/// Rebuilds explicit `alpha_k` and `beta_{port,S}` from the recorded steps,
/// recomputing every objective coefficient from the instance.
pub fn rebuild_dual(instance: &Instance, perm: &Permutation, g: Granularity) -> RebuiltDual {
    let m = instance.cores as f64;
    let mut remaining: BTreeSet<u32> = instance.coflows.iter().map(|c| c.id).collect();
    let mut lhs: BTreeMap<u32, f64> = remaining.iter().map(|&k| (k, 0.0)).collect();
    let mut out = RebuiltDual {
        objective: 0.0,
        worst_violation: f64::NEG_INFINITY,
        worst_tightness: 0.0,
        alpha_steps: 0,
        beta_steps: 0,
    };
    for r in &perm.trace.records {
        let c = instance.coflow(r.coflow);
        match r.branch {
            Branch::Alpha => {
                out.alpha_steps += 1;
                let reach = match g {
                    Granularity::Flow => {
                        port_flows(c, r.side, r.port).into_iter().max().unwrap_or(0)
                    }
                    Granularity::Coflow => port_load(c, r.side, r.port),
                };
                out.objective += r.value * (c.release + reach as i64) as f64;
                *lhs.get_mut(&r.coflow).unwrap() += r.value;
            }
            Branch::Beta => {
                out.beta_steps += 1;
                let loads: Vec<u64> = remaining
                    .iter()
                    .map(|&k| port_load(instance.coflow(k), r.side, r.port))
                    .collect();
                let total: f64 = loads.iter().sum::<u64>() as f64;
                let squares: f64 = match g {
                    Granularity::Flow => remaining
                        .iter()
                        .flat_map(|&k| port_flows(instance.coflow(k), r.side, r.port))
                        .map(|d| (d as f64).powi(2))
                        .sum(),
                    Granularity::Coflow => loads.iter().map(|&l| (l as f64).powi(2)).sum(),
                };
                out.objective += r.value * (total * total + squares) / (2.0 * m);
                for (&k, &l) in remaining.iter().zip(&loads) {
                    *lhs.get_mut(&k).unwrap() += r.value * l as f64;
                }
            }
        }
        let w = c.weight;
        if !r.fallback {
            out.worst_tightness = out
                .worst_tightness
                .max((lhs[&r.coflow] - w).abs() / w.max(1.0));
        }
        remaining.remove(&r.coflow);
    }
    for c in &instance.coflows {
        out.worst_violation = out.worst_violation.max(lhs[&c.id] - c.weight);
    }
    out
}
