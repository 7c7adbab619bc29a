#![no_main]

use libfuzzer_sys::fuzz_target;
use risloc::scene::Scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = serde_json::from_slice::<Scenario>(data) {
        if s.validate().is_ok() {
            let _ = s.snr_db();
            let _ = risloc::harness::fraunhofer_distance(&s);
        }
    }
});
