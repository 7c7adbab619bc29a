#![no_main]

use libfuzzer_sys::fuzz_target;
use risloc::estimators::Estimate;

fuzz_target!(|data: &[u8]| {
    if let Ok(e) = serde_json::from_slice::<Estimate>(data) {
        let text = serde_json::to_string(&e).expect("estimate serializes");
        let _: Estimate = serde_json::from_str(&text).expect("serialized estimate parses");
    }
});
