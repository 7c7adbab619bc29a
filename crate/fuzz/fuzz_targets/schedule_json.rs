#![no_main]

use libfuzzer_sys::fuzz_target;
use risloc::scene::PhaseSchedule;

fuzz_target!(|data: &[u8]| {
    if let Ok(raw) = serde_json::from_slice::<PhaseSchedule>(data) {
        if let Ok(s) = PhaseSchedule::from_matrix(raw.phases) {
            assert_eq!(s.phases.nrows(), s.num_elements());
        }
    }
});
