#![no_main]

use ambulate::sigproc::{decode_recording, encode_recording};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = decode_recording(data) {
        let bytes = encode_recording(&rec).expect("decoded recording re-encodes");
        let again = decode_recording(&bytes).expect("re-encoded recording decodes");
        assert_eq!(encode_recording(&again).expect("stable"), bytes);
    }
});
