#![no_main]

use ambulate::controller::Thresholds;
use ambulate::course::CourseSpec;
use ambulate::kv::KeyValues;
use ambulate::synth::GeneratorConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(th) = Thresholds::parse(text) {
        assert!(0.0 <= th.t_idle && th.t_idle <= th.t_walk && th.t_walk <= 1.0);
    }
    let Ok(kv) = KeyValues::parse(text) else { return };
    let _ = GeneratorConfig::from_key_values(&kv);
    let mut spec = CourseSpec::default_course();
    if spec.apply_overrides(&kv).is_ok() {
        assert!(spec.validate().is_ok());
    }
});
