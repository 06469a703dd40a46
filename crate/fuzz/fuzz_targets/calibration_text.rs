#![no_main]

use ambulate::controller::{calibrate, CalibrationData};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cal) = CalibrationData::parse(text) {
        if let Ok(th) = calibrate(&cal.idle, &cal.walk) {
            assert!(th.t_idle <= th.t_walk);
        }
    }
});
