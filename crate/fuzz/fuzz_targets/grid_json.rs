#![no_main]

use libfuzzer_sys::fuzz_target;
use risloc::estimators::GridSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = serde_json::from_slice::<GridSpec>(data) {
        if grid.validate().is_ok() {
            let _ = grid.refined_cell();
        }
    }
});
