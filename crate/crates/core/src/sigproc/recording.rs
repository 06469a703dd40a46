use crate::error::{Error, Result};
use crate::Class;

use super::spectrum::Periodogram;

pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

/// Per-sample annotation carried alongside the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Unlabeled,
    Idle,
    Walk,
}

impl Label {
    pub fn code(self) -> u8 {
        match self {
            Label::Unlabeled => 0,
            Label::Idle => 1,
            Label::Walk => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Label::Unlabeled),
            1 => Ok(Label::Idle),
            2 => Ok(Label::Walk),
            other => Err(Error::format(format!("unknown label code {other}"))),
        }
    }

    pub fn class(self) -> Option<Class> {
        match self {
            Label::Unlabeled => None,
            Label::Idle => Some(Class::Idle),
            Label::Walk => Some(Class::Walk),
        }
    }
}

impl From<Class> for Label {
    fn from(c: Class) -> Self {
        match c {
            Class::Idle => Label::Idle,
            Class::Walk => Label::Walk,
        }
    }
}

/// Multichannel signal in microvolts with a per-sample label stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub sample_rate: f64,
    pub channels: Vec<String>,
    /// Channel-major: `samples[c][t]`.
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl Recording {
    pub fn new(sample_rate: f64, channels: Vec<String>, samples: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        let rec = Recording {
            sample_rate,
            channels,
            samples,
            labels,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate {} must be > 0", self.sample_rate)));
        }
        if self.channels.len() != self.samples.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} channel signals", self.channels.len()),
                actual: format!("{}", self.samples.len()),
            });
        }
        let n = self.labels.len();
        for (name, s) in self.channels.iter().zip(&self.samples) {
            if s.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} samples (label length)"),
                    actual: format!("{} on channel {name}", s.len()),
                });
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate
    }

    /// Channel slices for `len` samples starting at `start`.
    pub fn window(&self, start: usize, len: usize) -> Vec<&[f64]> {
        self.samples.iter().map(|s| &s[start..start + len]).collect()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.iter().any(|l| *l != Label::Unlabeled)
    }

    /// Keeps the named channels in the given order.
    pub fn select_channels(&self, names: &[String]) -> Result<Recording> {
        let mut samples = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .channels
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::invalid(format!("channel {name} not in recording")))?;
            samples.push(self.samples[idx].clone());
        }
        Ok(Recording {
            sample_rate: self.sample_rate,
            channels: names.to_vec(),
            samples,
            labels: self.labels.clone(),
        })
    }
}

/// Subtracts the instantaneous across-channel mean from every channel.
pub fn common_average_reference(rec: &Recording) -> Result<Recording> {
    if rec.n_channels() < 2 {
        return Err(Error::invalid("common average reference needs at least 2 channels"));
    }
    let n = rec.n_samples();
    let c = rec.n_channels() as f64;
    let mut mean = vec![0.0; n];
    for s in &rec.samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= c);
    let samples = rec
        .samples
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    Ok(Recording {
        sample_rate: rec.sample_rate,
        channels: rec.channels.clone(),
        samples,
        labels: rec.labels.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct Rejection {
    pub recording: Recording,
    pub excluded: Vec<String>,
}

const ARTIFACT_BAND_HZ: (f64, f64) = (30.0, 40.0);
const ARTIFACT_SEGMENT_S: f64 = 2.0;

/// Log of the mean 30–40 Hz periodogram power of one channel, averaged over
/// non-overlapping 2-s segments.
fn high_band_log_power(signal: &[f64], sample_rate: f64) -> f64 {
    let seg = ((ARTIFACT_SEGMENT_S * sample_rate).round() as usize).clamp(1, signal.len().max(1));
    let pgram = Periodogram::new(seg, sample_rate);
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in signal.chunks_exact(seg) {
        let spec = pgram.one_sided_power(chunk);
        total += spec
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = pgram.frequency(*k);
                f >= ARTIFACT_BAND_HZ.0 && f < ARTIFACT_BAND_HZ.1
            })
            .map(|(_, p)| p)
            .sum::<f64>();
        count += 1;
    }
    if count == 0 {
        return f64::NEG_INFINITY;
    }
    (total / count as f64).max(f64::MIN_POSITIVE).ln()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Iteratively removes the channel whose high-frequency log power lies most
/// robust z-scores above the median, one channel per pass, until no channel
/// exceeds `z_threshold` or `max_iters` passes have run.
pub fn reject_artifact_channels(rec: &Recording, z_threshold: f64, max_iters: usize) -> Result<Rejection> {
    rec.validate()?;
    if rec.n_channels() == 0 {
        return Err(Error::NoChannelsSurvive);
    }
    let powers: Vec<f64> = rec
        .samples
        .iter()
        .map(|s| high_band_log_power(s, rec.sample_rate))
        .collect();
    let mut retained: Vec<usize> = (0..rec.n_channels()).collect();
    let mut excluded = Vec::new();

    for _ in 0..max_iters {
        if retained.len() < 3 {
            break;
        }
        let mut vals: Vec<f64> = retained.iter().map(|&i| powers[i]).collect();
        let med = median(&mut vals);
        let mut dev: Vec<f64> = retained.iter().map(|&i| (powers[i] - med).abs()).collect();
        let mut scale = 1.4826 * median(&mut dev);
        if scale <= 0.0 {
            scale = 1.2533 * dev.iter().sum::<f64>() / dev.len() as f64;
        }
        if scale <= 0.0 || !scale.is_finite() {
            break;
        }
        let (worst_pos, worst_z) = retained
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos, (powers[i] - med) / scale))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("retained is nonempty");
        if !(worst_z > z_threshold) {
            break;
        }
        let idx = retained.remove(worst_pos);
        log::debug!("rejecting channel {} (z = {worst_z:.2})", rec.channels[idx]);
        excluded.push(rec.channels[idx].clone());
    }

    if retained.is_empty() {
        return Err(Error::NoChannelsSurvive);
    }
    let names: Vec<String> = retained.iter().map(|&i| rec.channels[i].clone()).collect();
    Ok(Rejection {
        recording: rec.select_channels(&names)?,
        excluded,
    })
}
