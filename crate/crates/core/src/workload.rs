//! Synthetic instance generators and the cluster-trace importer.
//!
//! All generators are pure functions of their parameters and a 64-bit seed
//! (ChaCha8 stream). Weights are uniform integers in `[1, 100]`.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coflow, Instance, Violation, ViolationKind};

pub const WEIGHT_RANGE: (u32, u32) = (1, 100);

/// `(W_min, W_max, L_min, L_max)` with a selection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoflowTemplate {
    pub w_min: u32,
    pub w_max: u32,
    pub l_min: u64,
    pub l_max: u64,
    pub probability: f64,
}

/// The four-template mix: 41% narrow-short, 29% narrow-long, 9% wide-short,
/// 21% wide-long.
pub fn default_mix(ports: u32) -> [CoflowTemplate; 4] {
    let t = |w_min, w_max, l_min, l_max, probability| CoflowTemplate {
        w_min,
        w_max,
        l_min,
        l_max,
        probability,
    };
    [
        t(1, 4, 1, 10, 0.41),
        t(1, 4, 10, 1000, 0.29),
        t(4, ports, 1, 10, 0.09),
        t(4, ports, 10, 1000, 0.21),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOptions {
    pub cores: u32,
    /// When set, releases are uniform integers in `[0, spread]`; otherwise 0.
    pub release_spread: Option<i64>,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            cores: 5,
            release_spread: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Dense,
    Sparse,
    Combined,
}

impl Density {
    pub fn as_str(self) -> &'static str {
        match self {
            Density::Dense => "dense",
            Density::Sparse => "sparse",
            Density::Combined => "combined",
        }
    }
}

impl FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Density::Dense),
            "sparse" => Ok(Density::Sparse),
            "combined" => Ok(Density::Combined),
            other => Err(Error::Config(format!("unknown density {other:?}"))),
        }
    }
}

fn draw_weight(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1) as f64
}

fn draw_release(rng: &mut ChaCha8Rng, opts: &GenOptions) -> i64 {
    match opts.release_spread {
        Some(s) if s > 0 => rng.gen_range(0..=s),
        _ => 0,
    }
}

fn check_cores(opts: &GenOptions) -> Result<()> {
    if opts.cores == 0 {
        return Err(Error::Config("core count must be at least 1".into()));
    }
    Ok(())
}

/// Default-mix instance with `n` coflows on `ports` ports.
pub fn gen_mix(n: usize, ports: u32, seed: u64, opts: &GenOptions) -> Result<Instance> {
    gen_mix_labeled(n, ports, seed, opts).map(|(inst, _)| inst)
}

/// [`gen_mix`], also returning the template index (0..4) drawn for each coflow.
pub fn gen_mix_labeled(
    n: usize,
    ports: u32,
    seed: u64,
    opts: &GenOptions,
) -> Result<(Instance, Vec<usize>)> {
    if ports < 4 {
        return Err(Error::Config(format!(
            "the default mix needs at least 4 ports, got {ports}"
        )));
    }
    check_cores(opts)?;
    let mix = default_mix(ports);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coflows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 1..=n as u32 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = mix.len() - 1;
        for (x, t) in mix.iter().enumerate() {
            acc += t.probability;
            if u < acc {
                pick = x;
                break;
            }
        }
        let t = mix[pick];
        let w1 = rng.gen_range(t.w_min..=t.w_max) as usize;
        let w2 = rng.gen_range(t.w_min..=t.w_max) as usize;
        let mut inputs: Vec<u32> = sample(&mut rng, ports as usize, w1)
            .into_iter()
            .map(|p| p as u32 + 1)
            .collect();
        let mut outputs: Vec<u32> = sample(&mut rng, ports as usize, w2)
            .into_iter()
            .map(|p| p as u32 + 1)
            .collect();
        inputs.sort_unstable();
        outputs.sort_unstable();
        let weight = draw_weight(&mut rng);
        let release = draw_release(&mut rng, opts);
        let mut c = Coflow::new(k, release, weight);
        for &i in &inputs {
            for &j in &outputs {
                c.demands.insert((i, j), rng.gen_range(t.l_min..=t.l_max));
            }
        }
        coflows.push(c);
        labels.push(pick);
    }
    Ok((Instance::new(opts.cores, ports, coflows), labels))
}

/// Density-controlled instance: `M` distinct flows per coflow with `M` uniform
/// in `{N..N^2}` (dense) or `{1..N}` (sparse), sizes uniform in `{1..100}`.
pub fn gen_density(
    n: usize,
    ports: u32,
    mode: Density,
    seed: u64,
    opts: &GenOptions,
) -> Result<Instance> {
    if ports < 2 {
        return Err(Error::Config(format!(
            "density workloads need at least 2 ports, got {ports}"
        )));
    }
    check_cores(opts)?;
    let cells = ports as usize * ports as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coflows = Vec::with_capacity(n);
    for k in 1..=n as u32 {
        let dense = match mode {
            Density::Dense => true,
            Density::Sparse => false,
            Density::Combined => rng.gen_bool(0.5),
        };
        let count = if dense {
            rng.gen_range(ports as usize..=cells)
        } else {
            rng.gen_range(1..=ports as usize)
        };
        let mut picks = sample(&mut rng, cells, count).into_vec();
        picks.sort_unstable();
        let weight = draw_weight(&mut rng);
        let release = draw_release(&mut rng, opts);
        let mut c = Coflow::new(k, release, weight);
        for cell in picks {
            let i = (cell / ports as usize) as u32 + 1;
            let j = (cell % ports as usize) as u32 + 1;
            c.demands.insert((i, j), rng.gen_range(1..=100));
        }
        coflows.push(c);
    }
    Ok(Instance::new(opts.cores, ports, coflows))
}

/// One coflow as recorded in the trace, before conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceCoflow {
    pub id: u64,
    pub arrival_ms: u64,
    pub mappers: Vec<u32>,
    /// `(rack, shuffle megabytes)`.
    pub reducers: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOptions {
    pub cores: u32,
    /// Seed for the per-coflow weights.
    pub seed: u64,
    /// Rack number that maps to port 1.
    pub rack_base: u32,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            cores: 5,
            seed: 0,
            rack_base: 1,
        }
    }
}

/// Link rate in MB per second; one time unit moves one MB.
pub const LINK_MBPS: u64 = 128;

/// `round(ms * 128 / 1000)`, half away from zero.
pub fn arrival_units(ms: u64) -> i64 {
    ((ms as u128 * LINK_MBPS as u128 + 500) / 1000) as i64
}

struct Tokens<'a> {
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.it.next().ok_or_else(|| Error::Parse {
            line: self.line,
            message: format!("missing {what}"),
        })?;
        tok.parse().map_err(|_| Error::Parse {
            line: self.line,
            message: format!("bad {what} {tok:?}"),
        })
    }

    fn raw(&mut self, what: &str) -> Result<&'a str> {
        self.it.next().ok_or_else(|| Error::Parse {
            line: self.line,
            message: format!("missing {what}"),
        })
    }
}

/// Parses the raw coflow records without converting them.
///
/// Format: a header `<machines> <coflows>`, then one line per coflow
/// `<id> <arrival_ms> <num_mappers> <rack>... <num_reducers> <rack>:<MB>...`.
pub fn parse_trace_records(text: &str) -> Result<Vec<TraceCoflow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(x, l)| (x + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty trace".into(),
    })?;
    let mut h = Tokens {
        line: hline,
        it: header.split_whitespace(),
    };
    let _machines: u64 = h.next("machine count")?;
    let expected: usize = h.next("coflow count")?;
    if h.it.next().is_some() {
        return Err(Error::Parse {
            line: hline,
            message: "trailing tokens after header".into(),
        });
    }

    let mut out = Vec::new();
    let mut last_line = hline;
    for (line, body) in lines {
        last_line = line;
        let mut t = Tokens {
            line,
            it: body.split_whitespace(),
        };
        let id: u64 = t.next("coflow id")?;
        let arrival_ms: u64 = t.next("arrival time")?;
        let num_mappers: usize = t.next("mapper count")?;
        if num_mappers == 0 {
            return Err(Error::Parse {
                line,
                message: "coflow without mappers".into(),
            });
        }
        let mut mappers = Vec::new();
        for _ in 0..num_mappers {
            mappers.push(t.next("mapper rack")?);
        }
        let num_reducers: usize = t.next("reducer count")?;
        let mut reducers = Vec::new();
        for _ in 0..num_reducers {
            let tok = t.raw("reducer")?;
            let (rack, mb) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                message: format!("reducer {tok:?} is not <rack>:<MB>"),
            })?;
            let rack: u32 = rack.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad reducer rack {rack:?}"),
            })?;
            let mb: f64 = mb.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad shuffle size {mb:?}"),
            })?;
            if !(mb > 0.0 && mb.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: format!("shuffle size must be positive, got {mb}"),
                });
            }
            reducers.push((rack, mb));
        }
        if t.it.next().is_some() {
            return Err(Error::Parse {
                line,
                message: "trailing tokens".into(),
            });
        }
        out.push(TraceCoflow {
            id,
            arrival_ms,
            mappers,
            reducers,
        });
    }
    if out.len() != expected {
        return Err(Error::Parse {
            line: last_line,
            message: format!("header announces {expected} coflows, found {}", out.len()),
        });
    }
    Ok(out)
}

/// Converts trace records to an instance on `rack_count` ports.
///
/// Every (mapper rack, reducer rack) pair becomes a flow. A reducer's
/// megabytes are split equally over the coflow's mappers, each share rounded
/// up to a whole data unit; pairs that repeat are merged by summing.
pub fn trace_to_instance(
    records: &[TraceCoflow],
    rack_count: u32,
    opts: &TraceOptions,
) -> Result<Instance> {
    if opts.cores == 0 {
        return Err(Error::Config("core count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut violations = Vec::new();
    let mut coflows = Vec::with_capacity(records.len());
    let to_port = |rack: u32| -> Option<u32> {
        let p = rack.checked_sub(opts.rack_base)?.checked_add(1)?;
        (p <= rack_count).then_some(p)
    };
    for (pos, rec) in records.iter().enumerate() {
        let k = pos as u32 + 1;
        let mut demands: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        let share_of = |mb: f64| -> u64 { ((mb / rec.mappers.len() as f64).ceil() as u64).max(1) };
        for &(reducer, mb) in &rec.reducers {
            let share = share_of(mb);
            for &mapper in &rec.mappers {
                match (to_port(mapper), to_port(reducer)) {
                    (Some(i), Some(j)) => {
                        let e = demands.entry((i, j)).or_insert(0);
                        *e = e.saturating_add(share);
                    }
                    (a, b) => {
                        for (side, rack, port) in [("input", mapper, a), ("output", reducer, b)] {
                            if port.is_none() {
                                violations.push(Violation::new(
                                    &format!("trace coflow {}", rec.id),
                                    ViolationKind::PortOutOfRange {
                                        side,
                                        port: rack,
                                        ports: rack_count,
                                    },
                                ));
                            }
                        }
                    }
                }
            }
        }
        let weight = draw_weight(&mut rng);
        coflows.push(Coflow {
            id: k,
            release: arrival_units(rec.arrival_ms),
            weight,
            demands,
        });
    }
    if !violations.is_empty() {
        violations.dedup();
        return Err(Error::Invalid(violations));
    }
    Ok(Instance::new(opts.cores, rack_count, coflows))
}

/// Parses a trace and converts it in one step.
pub fn parse_trace(text: &str, rack_count: u32, opts: &TraceOptions) -> Result<Instance> {
    trace_to_instance(&parse_trace_records(text)?, rack_count, opts)
}

/// Keeps coflows with at least `threshold` flows, renumbering ids densely.
pub fn filter_min_flows(instance: &Instance, threshold: usize) -> Instance {
    let coflows = instance
        .coflows
        .iter()
        .filter(|c| c.flow_count() >= threshold)
        .enumerate()
        .map(|(x, c)| Coflow {
            id: x as u32 + 1,
            ..c.clone()
        })
        .collect();
    Instance::new(instance.cores, instance.ports, coflows)
}
