//! `KMW1` recording container and CSV import.
//!
//! Layout (little-endian): magic `KMW1`, `f64` sample rate, `u32` channel
//! count, `u64` sample count, then per channel a `u32` byte length and UTF-8
//! name, then channel-major `f32` samples, then one `u8` label per sample
//! (0 = unlabeled, 1 = idle, 2 = walk).

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

use super::recording::{Label, Recording};

pub const RECORDING_MAGIC: &[u8; 4] = b"KMW1";

pub fn encode_recording(rec: &Recording) -> Result<Vec<u8>> {
    rec.validate()?;
    let mut w = Writer::new();
    w.bytes(RECORDING_MAGIC);
    w.f64(rec.sample_rate);
    w.len_u32(rec.n_channels());
    w.u64(rec.n_samples() as u64);
    for name in &rec.channels {
        w.string(name);
    }
    for ch in &rec.samples {
        for &v in ch {
            w.f32(v as f32);
        }
    }
    for l in &rec.labels {
        w.u8(l.code());
    }
    Ok(w.buf)
}

pub fn decode_recording(bytes: &[u8]) -> Result<Recording> {
    let mut r = Reader::new(bytes);
    r.expect_magic(RECORDING_MAGIC)?;
    let sample_rate = r.f64()?;
    let n_channels = r.u32()? as usize;
    let n_samples = usize::try_from(r.u64()?).map_err(|_| Error::format("sample count overflow"))?;
    // Every channel needs at least its 4-byte name length.
    r.check_available(n_channels, 4)?;
    let channels = (0..n_channels).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let per_sample = n_channels
        .checked_mul(4)
        .and_then(|b| b.checked_add(1))
        .ok_or_else(|| Error::format("channel count overflow"))?;
    r.check_available(n_samples, per_sample)?;
    let mut samples = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let mut ch = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            ch.push(r.f32()? as f64);
        }
        samples.push(ch);
    }
    let labels = r
        .bytes(n_samples)?
        .iter()
        .map(|&b| Label::from_code(b))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Recording::new(sample_rate, channels, samples, labels).map_err(|e| Error::format(e.to_string()))
}

pub fn write_recording(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_recording(rec)?)?;
    Ok(())
}

pub fn read_recording(path: impl AsRef<Path>) -> Result<Recording> {
    decode_recording(&fs::read(path)?)
}

fn parse_label(field: &str) -> Result<Label> {
    match field.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "unlabeled" | "none" => Ok(Label::Unlabeled),
        "1" | "idle" => Ok(Label::Idle),
        "2" | "walk" => Ok(Label::Walk),
        other => Err(Error::format(format!("unknown label {other:?}"))),
    }
}

/// Loads a header-row CSV with one column per channel and a `label` column.
pub fn read_csv(input: impl Read, sample_rate: f64) -> Result<Recording> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::format(format!("csv header: {e}")))?
        .clone();
    let label_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("label"))
        .ok_or_else(|| Error::format("csv has no label column"))?;
    let channels: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_col)
        .map(|(_, h)| h.to_string())
        .collect();
    let mut samples = vec![Vec::new(); channels.len()];
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(format!("csv row {}: {e}", row + 1)))?;
        if record.len() != headers.len() {
            return Err(Error::format(format!(
                "csv row {} has {} fields",
                row + 1,
                record.len()
            )));
        }
        let mut ch = 0;
        for (i, field) in record.iter().enumerate() {
            if i == label_col {
                labels.push(parse_label(field)?);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::format(format!("csv row {}: bad value {field:?}", row + 1)))?;
                if !v.is_finite() {
                    return Err(Error::format(format!("csv row {}: non-finite value", row + 1)));
                }
                samples[ch].push(v);
                ch += 1;
            }
        }
    }
    Recording::new(sample_rate, channels, samples, labels).map_err(|e| Error::format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Recording {
        Recording::new(
            256.0,
            vec!["Cz".into(), "C3".into()],
            vec![vec![0.5, -1.25, 3.0], vec![2.0, 0.0, -7.5]],
            vec![Label::Idle, Label::Walk, Label::Unlabeled],
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let rec = small();
        let bytes = encode_recording(&rec).unwrap();
        assert_eq!(&bytes[..4], b"KMW1");
        assert_eq!(decode_recording(&bytes).unwrap(), rec);
    }

    #[test]
    fn truncation_and_corruption_rejected() {
        let bytes = encode_recording(&small()).unwrap();
        for cut in 0..bytes.len() {
            assert!(decode_recording(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() = 9;
        assert!(decode_recording(&bad).is_err());
        let mut magic = bytes;
        magic[3] = b'2';
        assert!(decode_recording(&magic).is_err());
    }

    #[test]
    fn csv_imports_exact_values() {
        let text = "Cz,label,C3\n0.5,idle,2\n-1.25,2,0\n3.0,0,-7.5\n";
        let rec = read_csv(text.as_bytes(), 256.0).unwrap();
        assert_eq!(rec, small());
        let precise = "a,label\n0.1234567890123456789,1\n";
        let r = read_csv(precise.as_bytes(), 100.0).unwrap();
        assert_eq!(r.samples[0][0], "0.1234567890123456789".parse::<f64>().unwrap());
    }

    #[test]
    fn csv_errors() {
        assert!(read_csv("a,b\n1,2\n".as_bytes(), 256.0).is_err());
        assert!(read_csv("a,label\nx,1\n".as_bytes(), 256.0).is_err());
        assert!(read_csv("a,label\n1,run\n".as_bytes(), 256.0).is_err());
        assert!(read_csv("a,label\n1\n".as_bytes(), 256.0).is_err());
    }
}
