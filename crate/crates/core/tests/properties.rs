use std::collections::BTreeSet;

use coflow_core::model::{compute_loads, Coflow, Instance};
use coflow_core::primal_dual::{order, Granularity, DEFAULT_KAPPA};
use coflow_core::scheduler::{assign_cdls, assign_fdls, simulate};
use coflow_core::verify::check_schedule;
use proptest::prelude::*;

fn arb_instance() -> impl Strategy<Value = Instance> {
    (1u32..=4, 1u32..=5, 1usize..=8).prop_flat_map(|(m, ports, n)| {
        let coflow = (
            0i64..=30,
            1u32..=100,
            prop::collection::btree_map((1..=ports, 1..=ports), 1u64..=50, 1..=4),
        );
        prop::collection::vec(coflow, n).prop_map(move |raw| {
            let coflows = raw
                .into_iter()
                .enumerate()
                .map(|(x, (release, weight, demands))| Coflow {
                    id: x as u32 + 1,
                    release,
                    weight: weight as f64,
                    demands,
                })
                .collect();
            Instance::new(m, ports, coflows)
        })
    })
}

fn granularity() -> impl Strategy<Value = Granularity> {
    prop_oneof![Just(Granularity::Flow), Just(Granularity::Coflow)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn order_is_a_permutation(inst in arb_instance(), g in granularity()) {
        let p = order(&inst, DEFAULT_KAPPA, g).unwrap();
        let ids: BTreeSet<u32> = p.order.iter().copied().collect();
        prop_assert_eq!(ids.len(), inst.coflow_count());
        prop_assert_eq!(ids, (1..=inst.coflow_count() as u32).collect::<BTreeSet<_>>());
        prop_assert_eq!(p.trace.records.len(), inst.coflow_count());
        let sum: f64 = p.trace.records.iter().map(|r| r.increment).sum();
        prop_assert!((sum - p.dual_cost).abs() <= 1e-9 * p.dual_cost.max(1.0));
        prop_assert!(p.trace.records.iter().all(|r| r.value >= 0.0));
    }

    #[test]
    fn loads_are_consistent(inst in arb_instance()) {
        let t = compute_loads(&inst);
        let ins: u64 = (1..=inst.ports).map(|i| t.input_total(i)).sum();
        let outs: u64 = (1..=inst.ports).map(|j| t.output_total(j)).sum();
        prop_assert_eq!(ins, inst.total_demand());
        prop_assert_eq!(outs, inst.total_demand());
        for c in &inst.coflows {
            let per: u64 = (1..=inst.ports).map(|i| t.input_load(i, c.id)).sum();
            prop_assert_eq!(per, c.total_size());
        }
    }

    #[test]
    fn weak_duality_and_soundness(inst in arb_instance(), g in granularity()) {
        let p = order(&inst, DEFAULT_KAPPA, g).unwrap();
        let a = match g {
            Granularity::Flow => assign_fdls(&inst, &p),
            Granularity::Coflow => assign_cdls(&inst, &p),
        }.unwrap();
        let r = simulate(&inst, &p, &a).unwrap();
        prop_assert!(p.dual_cost <= r.objective * (1.0 + 1e-9) + 1e-9);
        prop_assert_eq!(check_schedule(&inst, &p, &a, &r), vec![]);
    }

    #[test]
    fn doubling_weights_doubles_the_dual(inst in arb_instance(), g in granularity()) {
        let mut scaled = inst.clone();
        for c in &mut scaled.coflows {
            c.weight *= 2.0;
        }
        let p = order(&inst, DEFAULT_KAPPA, g).unwrap();
        let q = order(&scaled, DEFAULT_KAPPA, g).unwrap();
        prop_assert_eq!(&p.order, &q.order);
        prop_assert_eq!(q.dual_cost, 2.0 * p.dual_cost);
    }

    #[test]
    fn json_round_trip(inst in arb_instance()) {
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn long_mantissa_weight_round_trips() {
    let text = r#"{"cores":1,"ports":1,"coflows":[{"id":1,"release":0,
        "weight":44444444444444444444444444444444444444444444444444444444444444444444444444666666666666666766666666666666666662,
        "flows":[{"i":1,"j":1,"size":1}]}]}"#;
    let inst = Instance::from_json(text).unwrap();
    assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
}
