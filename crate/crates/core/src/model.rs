//! Coflows on `m` identical parallel `N x N` non-blocking network cores.
//!
//! Ports and coflow ids are 1-based everywhere they are visible, including the
//! JSON instance format. Demands are stored sparsely, keyed by `(input, output)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Identifies a flow by `(input port, output port, coflow)`.
///
/// The derived ordering is lexicographic in `(input, output, coflow)`, which is
/// the tie rule used wherever flows of equal size must be ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub input: u32,
    pub output: u32,
    pub coflow: u32,
}

impl FlowKey {
    pub fn new(input: u32, output: u32, coflow: u32) -> Self {
        FlowKey {
            input,
            output,
            coflow,
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.input, self.output, self.coflow)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coflow {
    pub id: u32,
    /// Release time in time units.
    pub release: i64,
    pub weight: f64,
    /// `(input, output) -> size` in data units. Zero entries must be absent.
    pub demands: BTreeMap<(u32, u32), u64>,
}

impl Coflow {
    pub fn new(id: u32, release: i64, weight: f64) -> Self {
        Coflow {
            id,
            release,
            weight,
            demands: BTreeMap::new(),
        }
    }

    /// Builder-style helper; a repeated `(input, output)` pair accumulates.
    pub fn with_flow(mut self, input: u32, output: u32, size: u64) -> Self {
        *self.demands.entry((input, output)).or_insert(0) += size;
        self
    }

    pub fn flows(&self) -> impl Iterator<Item = (FlowKey, u64)> + '_ {
        self.demands
            .iter()
            .map(move |(&(i, j), &d)| (FlowKey::new(i, j, self.id), d))
    }

    pub fn flow_count(&self) -> usize {
        self.demands.len()
    }

    pub fn total_size(&self) -> u64 {
        self.demands.values().sum()
    }

    /// Largest single flow, 0 for a coflow without flows.
    pub fn max_flow_size(&self) -> u64 {
        self.demands.values().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Number of identical network cores `m`.
    pub cores: u32,
    /// Number of input (and output) ports `N`.
    pub ports: u32,
    pub coflows: Vec<Coflow>,
}

impl Instance {
    pub fn new(cores: u32, ports: u32, coflows: Vec<Coflow>) -> Self {
        Instance {
            cores,
            ports,
            coflows,
        }
    }

    pub fn coflow_count(&self) -> usize {
        self.coflows.len()
    }

    /// Coflow with 1-based id `k`. Relies on the dense-id invariant.
    pub fn coflow(&self, k: u32) -> &Coflow {
        &self.coflows[k as usize - 1]
    }

    pub fn flows(&self) -> impl Iterator<Item = (FlowKey, u64)> + '_ {
        self.coflows.iter().flat_map(Coflow::flows)
    }

    pub fn flow_count(&self) -> usize {
        self.coflows.iter().map(Coflow::flow_count).sum()
    }

    pub fn total_demand(&self) -> u64 {
        self.coflows.iter().map(Coflow::total_size).sum()
    }

    pub fn has_releases(&self) -> bool {
        self.coflows.iter().any(|c| c.release != 0)
    }

    /// Same instance on a different number of cores.
    pub fn with_cores(&self, cores: u32) -> Instance {
        Instance {
            cores,
            ..self.clone()
        }
    }

    /// Every invariant violation, in document order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.cores == 0 {
            out.push(Violation::new("instance", ViolationKind::NoCores));
        }
        if self.ports == 0 {
            out.push(Violation::new("instance", ViolationKind::NoPorts));
        }
        for (pos, c) in self.coflows.iter().enumerate() {
            let loc = format!("coflow #{}", pos + 1);
            if c.id as usize != pos + 1 {
                out.push(Violation::new(
                    &loc,
                    ViolationKind::IdOutOfSequence {
                        expected: pos as u32 + 1,
                        found: c.id,
                    },
                ));
            }
            if c.release < 0 {
                out.push(Violation::new(
                    &loc,
                    ViolationKind::NegativeRelease(c.release),
                ));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                out.push(Violation::new(
                    &loc,
                    ViolationKind::NonPositiveWeight(c.weight),
                ));
            }
            for (&(i, j), &d) in &c.demands {
                let floc = format!("{loc} flow ({i}, {j})");
                for (side, p) in [("input", i), ("output", j)] {
                    if p == 0 || p > self.ports {
                        out.push(Violation::new(
                            &floc,
                            ViolationKind::PortOutOfRange {
                                side,
                                port: p,
                                ports: self.ports,
                            },
                        ));
                    }
                }
                if d == 0 {
                    out.push(Violation::new(&floc, ViolationKind::ZeroDemand));
                }
            }
        }
        out
    }

    /// `Ok` iff [`Instance::validate`] reports nothing.
    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: String,
    pub kind: ViolationKind,
}

impl Violation {
    pub(crate) fn new(location: &str, kind: ViolationKind) -> Self {
        Violation {
            location: location.to_string(),
            kind,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NoCores,
    NoPorts,
    IdOutOfSequence {
        expected: u32,
        found: u32,
    },
    NegativeRelease(i64),
    NonPositiveWeight(f64),
    PortOutOfRange {
        side: &'static str,
        port: u32,
        ports: u32,
    },
    ZeroDemand,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::NoCores => write!(f, "core count must be at least 1"),
            ViolationKind::NoPorts => write!(f, "port count must be at least 1"),
            ViolationKind::IdOutOfSequence { expected, found } => {
                write!(f, "coflow id {found} out of sequence, expected {expected}")
            }
            ViolationKind::NegativeRelease(r) => write!(f, "negative release {r}"),
            ViolationKind::NonPositiveWeight(w) => write!(f, "nonpositive weight {w}"),
            ViolationKind::PortOutOfRange { side, port, ports } => {
                write!(f, "port out of range: {side} {port} not in [1, {ports}]")
            }
            ViolationKind::ZeroDemand => write!(f, "zero demand must be absent"),
        }
    }
}

/// Per-port loads, `L_{i,k}`, `L_{j,k}` and their totals over coflows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortLoadTable {
    ports: usize,
    coflows: usize,
    // row-major [port][coflow]
    input_load: Vec<u64>,
    output_load: Vec<u64>,
    input_total: Vec<u64>,
    output_total: Vec<u64>,
}

impl PortLoadTable {
    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn coflows(&self) -> usize {
        self.coflows
    }

    /// `L_{i,k}`, 1-based.
    pub fn input_load(&self, i: u32, k: u32) -> u64 {
        self.input_load[(i as usize - 1) * self.coflows + k as usize - 1]
    }

    /// `L_{j,k}`, 1-based.
    pub fn output_load(&self, j: u32, k: u32) -> u64 {
        self.output_load[(j as usize - 1) * self.coflows + k as usize - 1]
    }

    pub fn input_total(&self, i: u32) -> u64 {
        self.input_total[i as usize - 1]
    }

    pub fn output_total(&self, j: u32) -> u64 {
        self.output_total[j as usize - 1]
    }
}

/// Entries that reference ports outside `[1, N]` are skipped; run
/// [`Instance::validate`] first if that matters.
pub fn compute_loads(instance: &Instance) -> PortLoadTable {
    let ports = instance.ports as usize;
    let n = instance.coflow_count();
    let mut t = PortLoadTable {
        ports,
        coflows: n,
        input_load: vec![0; ports * n],
        output_load: vec![0; ports * n],
        input_total: vec![0; ports],
        output_total: vec![0; ports],
    };
    for (pos, c) in instance.coflows.iter().enumerate() {
        for (&(i, j), &d) in &c.demands {
            let (i, j) = (i as usize, j as usize);
            if i == 0 || j == 0 || i > ports || j > ports {
                continue;
            }
            t.input_load[(i - 1) * n + pos] += d;
            t.output_load[(j - 1) * n + pos] += d;
            t.input_total[i - 1] += d;
            t.output_total[j - 1] += d;
        }
    }
    t
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    cores: u32,
    ports: u32,
    coflows: Vec<CoflowFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoflowFile {
    id: u32,
    release: i64,
    #[serde(serialize_with = "serialize_weight")]
    weight: f64,
    flows: Vec<FlowFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowFile {
    i: u32,
    j: u32,
    size: u64,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            cores: inst.cores,
            ports: inst.ports,
            coflows: inst
                .coflows
                .iter()
                .map(|c| CoflowFile {
                    id: c.id,
                    release: c.release,
                    weight: c.weight,
                    flows: c
                        .demands
                        .iter()
                        .map(|(&(i, j), &size)| FlowFile { i, j, size })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance> {
        let mut coflows = Vec::with_capacity(self.coflows.len());
        for c in self.coflows {
            let mut demands = BTreeMap::new();
            for f in c.flows {
                if demands.insert((f.i, f.j), f.size).is_some() {
                    return Err(Error::DuplicateFlow {
                        coflow: c.id,
                        input: f.i,
                        output: f.j,
                    });
                }
            }
            coflows.push(Coflow {
                id: c.id,
                release: c.release,
                weight: c.weight,
                demands,
            });
        }
        Ok(Instance {
            cores: self.cores,
            ports: self.ports,
            coflows,
        })
    }
}

// Integral weights are written as JSON integers so generated files stay integer-exact.
fn serialize_weight<S: Serializer>(w: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if w.fract() == 0.0 && w.abs() < 9.007_199_254_740_992e15 {
        s.serialize_i64(*w as i64)
    } else {
        s.serialize_f64(*w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_flow() -> Instance {
        Instance::new(
            1,
            2,
            vec![Coflow::new(1, 0, 1.0).with_flow(1, 1, 2).with_flow(1, 2, 3)],
        )
    }

    #[test]
    fn loads_of_empty_instance_are_zero() {
        let t = compute_loads(&Instance::new(3, 4, vec![]));
        for p in 1..=4 {
            assert_eq!(t.input_total(p), 0);
            assert_eq!(t.output_total(p), 0);
        }
    }

    #[test]
    fn loads_of_single_flow() {
        let inst = Instance::new(1, 1, vec![Coflow::new(1, 0, 1.0).with_flow(1, 1, 4)]);
        let t = compute_loads(&inst);
        assert_eq!(t.input_total(1), 4);
        assert_eq!(t.output_total(1), 4);
        assert_eq!(t.input_load(1, 1), 4);
    }

    #[test]
    fn loads_split_by_output() {
        let t = compute_loads(&two_flow());
        assert_eq!(t.input_total(1), 5);
        assert_eq!(t.output_total(1), 2);
        assert_eq!(t.output_total(2), 3);
        assert_eq!(t.input_total(2), 0);
    }

    #[test]
    fn well_formed_instance_validates() {
        assert!(two_flow().validate().is_empty());
        assert!(two_flow().check().is_ok());
    }

    #[test]
    fn explicit_zero_demand_is_a_violation() {
        let mut inst = two_flow();
        inst.coflows[0].demands.insert((2, 2), 0);
        let v = inst.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ZeroDemand);
        assert!(v[0].to_string().contains("zero demand must be absent"));
    }

    #[test]
    fn output_port_past_n_is_a_violation() {
        let mut inst = two_flow();
        inst.coflows[0].demands.insert((1, 3), 1);
        let v = inst.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("port out of range"));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut c = Coflow::new(2, -1, 0.0).with_flow(0, 1, 1);
        c.demands.insert((1, 1), 0);
        let inst = Instance::new(0, 1, vec![c]);
        let kinds: Vec<_> = inst.validate().into_iter().map(|v| v.kind).collect();
        assert_eq!(kinds.len(), 6, "{kinds:?}");
        assert!(kinds.contains(&ViolationKind::NoCores));
        assert!(kinds.contains(&ViolationKind::NegativeRelease(-1)));
        assert!(kinds.contains(&ViolationKind::IdOutOfSequence {
            expected: 1,
            found: 2
        }));
    }

    #[test]
    fn json_round_trip_keeps_integers() {
        let mut inst = two_flow();
        inst.coflows[0].weight = 77.0;
        inst.coflows[0].release = 9_007_199_254_740_993;
        inst.coflows[0].demands.insert((2, 1), u64::MAX);
        let text = inst.to_json();
        assert!(text.contains("\"weight\": 77,"));
        assert!(text.contains("18446744073709551615"));
        assert_eq!(Instance::from_json(&text).unwrap(), inst);
    }

    #[test]
    fn json_rejects_duplicate_pairs() {
        let text = r#"{"cores":1,"ports":2,"coflows":[{"id":1,"release":0,"weight":1,
            "flows":[{"i":1,"j":2,"size":3},{"i":1,"j":2,"size":4}]}]}"#;
        assert!(matches!(
            Instance::from_json(text),
            Err(Error::DuplicateFlow {
                coflow: 1,
                input: 1,
                output: 2
            })
        ));
    }

    #[test]
    fn fractional_weight_survives() {
        let mut inst = two_flow();
        inst.coflows[0].weight = 2.5;
        assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
    }
}
