#![no_main]

use ambulate::sigproc::read_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = read_csv(data, 256.0) {
        assert_eq!(rec.labels.len(), rec.n_samples());
        assert!(rec.samples.iter().flatten().all(|v| v.is_finite()));
    }
});
