#![no_main]

use coflow_core::model::Instance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(inst) = Instance::from_json(text) {
        let _ = inst.validate();
        let json = inst.to_json();
        let back = Instance::from_json(&json).expect("serialized instance reparses");
        assert_eq!(back, inst);
        assert_eq!(back.to_json(), json);
    }
});
