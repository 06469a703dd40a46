#![no_main]

use ambulate::eval::PerformancePoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = text.parse::<PerformancePoint>() {
        assert!(p.stops.is_finite() && p.time_s.is_finite());
    }
});
