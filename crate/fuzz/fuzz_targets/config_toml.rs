#![no_main]

use libfuzzer_sys::fuzz_target;
use risloc::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        let again = cfg.to_toml_string().expect("valid config serializes");
        ExperimentConfig::from_toml_str(&again).expect("serialized config parses");
        let _ = cfg.axis_points();
    }
});
