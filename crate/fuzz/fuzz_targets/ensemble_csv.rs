#![no_main]

use ambulate::eval::read_ensemble_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_ensemble_csv(data) {
        assert!(points.iter().all(|p| p.stops.is_finite() && p.time_s.is_finite()));
    }
});
