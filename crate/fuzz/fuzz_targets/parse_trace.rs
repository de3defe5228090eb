#![no_main]

use coflow_core::model::Instance;
use coflow_core::workload::{parse_trace_records, trace_to_instance, TraceOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(records) = parse_trace_records(text) else {
        return;
    };
    // size the fabric to the largest rack so conversion gets exercised
    let racks = records
        .iter()
        .flat_map(|r| {
            r.mappers
                .iter()
                .copied()
                .chain(r.reducers.iter().map(|x| x.0))
        })
        .max()
        .unwrap_or(1)
        .clamp(1, 4096);
    let opts = TraceOptions {
        cores: 2,
        ..TraceOptions::default()
    };
    if let Ok(inst) = trace_to_instance(&records, racks, &opts) {
        let back = Instance::from_json(&inst.to_json()).expect("converted instance reparses");
        assert_eq!(back, inst);
    }
});
