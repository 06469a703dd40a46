//! Replays the checked-in fuzz seeds through the same entry points and
//! invariants as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use ambulate::controller::{calibrate, CalibrationData, Thresholds};
use ambulate::course::CourseSpec;
use ambulate::decoder::{decode_model, encode_model};
use ambulate::eval::{read_ensemble_csv, PerformancePoint};
use ambulate::kv::KeyValues;
use ambulate::sigproc::{decode_recording, encode_recording, read_csv};
use ambulate::synth::GeneratorConfig;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn recording_kmw() {
    let mut decoded = 0;
    for (_, data) in seeds("recording_kmw") {
        if let Ok(rec) = decode_recording(&data) {
            let bytes = encode_recording(&rec).unwrap();
            assert_eq!(decode_recording(&bytes).unwrap(), rec);
            decoded += 1;
        }
    }
    assert_eq!(decoded, 1);
}

#[test]
fn recording_csv() {
    for (name, data) in seeds("recording_csv") {
        let r = read_csv(&data[..], 256.0);
        match name.as_str() {
            "labelled" => assert_eq!(r.unwrap().n_samples(), 5),
            "header_only" => assert_eq!(r.unwrap().n_samples(), 0),
            _ => assert!(r.is_err(), "{name}"),
        }
    }
}

#[test]
fn model_kmm() {
    for (name, data) in seeds("model_kmm") {
        match decode_model(&data) {
            Ok(m) => {
                assert_eq!(name, "trained");
                assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
            }
            Err(_) => assert_eq!(name, "truncated"),
        }
    }
}

#[test]
fn calibration_text() {
    for (name, data) in seeds("calibration_text") {
        let parsed = CalibrationData::parse(std::str::from_utf8(&data).unwrap());
        let th = parsed.as_ref().ok().map(|c| calibrate(&c.idle, &c.walk));
        match name.as_str() {
            "both" => {
                let th = th.unwrap().unwrap();
                assert_eq!((th.t_idle, th.t_walk), (0.2, 0.8));
            }
            "inverted" => assert!(th.unwrap().is_err()),
            _ => assert!(parsed.is_err(), "{name}"),
        }
    }
}

#[test]
fn key_value() {
    for (name, data) in seeds("key_value") {
        let text = std::str::from_utf8(&data).unwrap();
        let kv = KeyValues::parse(text).unwrap();
        let th = Thresholds::parse(text);
        let generator = GeneratorConfig::from_key_values(&kv);
        let mut spec = CourseSpec::default_course();
        let course = spec.apply_overrides(&kv);
        match name.as_str() {
            "thresholds" => assert!(th.is_ok()),
            "inverted" => assert!(th.is_err()),
            "generator" => assert!(generator.is_ok() && th.is_err()),
            "course" => {
                assert!(course.is_ok());
                assert_eq!((spec.time_limit_s, spec.tick_s), (600.0, 0.25));
            }
            other => panic!("unexpected seed {other}"),
        }
    }
}

#[test]
fn observed_pair() {
    for (name, data) in seeds("observed_pair") {
        let p = std::str::from_utf8(&data).unwrap().parse::<PerformancePoint>();
        match name.as_str() {
            "perfect" => assert_eq!(p.unwrap().stops, 10.0),
            "spaced" => assert_eq!(p.unwrap().time_s, 1200.0),
            _ => assert!(p.is_err(), "{name}"),
        }
    }
}

#[test]
fn ensemble_csv() {
    for (name, data) in seeds("ensemble_csv") {
        let r = read_ensemble_csv(&data[..]);
        match name.as_str() {
            "ensemble" => assert_eq!(r.unwrap().len(), 40),
            _ => assert!(r.is_err(), "{name}"),
        }
    }
}
