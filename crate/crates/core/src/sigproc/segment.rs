use crate::error::Result;
use crate::Class;

use super::recording::{Label, Recording};
use super::spectrum::{binned_trial, Periodogram, SpectralTrial};

/// Timing of the cued training protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segmentation {
    pub epoch_s: f64,
    pub discard_s: f64,
    pub trial_s: f64,
}

impl Default for Segmentation {
    fn default() -> Self {
        Segmentation {
            epoch_s: 30.0,
            discard_s: 8.0,
            trial_s: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialWindow {
    pub label: Class,
    pub start: usize,
    pub len: usize,
}

impl TrialWindow {
    pub fn spectral(&self, rec: &Recording) -> SpectralTrial {
        let pgram = Periodogram::new(self.len, rec.sample_rate);
        binned_trial(&pgram, &rec.window(self.start, self.len)).with_label(Some(self.label))
    }
}

/// Cuts each labelled epoch into non-overlapping trials after dropping the
/// leading `discard_s` seconds. Samples left over at the end of an epoch are
/// dropped. Runs of one label longer than an epoch are split into epochs.
pub fn segment_training_trials(rec: &Recording, seg: Segmentation) -> Vec<TrialWindow> {
    let fs = rec.sample_rate;
    let epoch = (seg.epoch_s * fs).round() as usize;
    let discard = (seg.discard_s * fs).round() as usize;
    let trial = (seg.trial_s * fs).round() as usize;
    let per_epoch = epoch.saturating_sub(discard) / trial.max(1);
    let mut out = Vec::new();
    if trial == 0 || epoch == 0 {
        return out;
    }

    let labels = &rec.labels;
    let mut start = 0;
    while start < labels.len() {
        let label = labels[start];
        let mut end = start;
        while end < labels.len() && labels[end] == label {
            end += 1;
        }
        if let Some(class) = label.class() {
            let mut epoch_start = start;
            while epoch_start < end {
                let epoch_end = (epoch_start + epoch).min(end);
                let usable = (epoch_end - epoch_start).saturating_sub(discard);
                let n = (usable / trial).min(per_epoch);
                if n == 0 {
                    log::warn!(
                        "skipping {} epoch at {:.1} s: {:.1} s is shorter than discard + trial",
                        class,
                        epoch_start as f64 / fs,
                        (epoch_end - epoch_start) as f64 / fs
                    );
                }
                for k in 0..n {
                    out.push(TrialWindow {
                        label: class,
                        start: epoch_start + discard + k * trial,
                        len: trial,
                    });
                }
                epoch_start = epoch_end;
            }
        }
        start = end;
    }
    out
}

/// One spectral estimate per block tick over the most recent `window_s`.
pub struct OnlineWindows<'a> {
    rec: &'a Recording,
    pgram: Periodogram,
    hop: usize,
    next_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineFrame {
    pub end_sample: usize,
    pub time_s: f64,
    /// Cue label at the last sample of the window.
    pub label: Label,
    pub trial: SpectralTrial,
}

impl<'a> OnlineWindows<'a> {
    pub fn new(rec: &'a Recording, block_s: f64, window_s: f64) -> Self {
        let len = ((window_s * rec.sample_rate).round() as usize).max(1);
        let hop = ((block_s * rec.sample_rate).round() as usize).max(1);
        OnlineWindows {
            rec,
            pgram: Periodogram::new(len, rec.sample_rate),
            hop,
            next_end: len,
        }
    }
}

impl Iterator for OnlineWindows<'_> {
    type Item = OnlineFrame;

    fn next(&mut self) -> Option<OnlineFrame> {
        let end = self.next_end;
        if end > self.rec.n_samples() {
            return None;
        }
        self.next_end += self.hop;
        let len = self.pgram.len();
        let label = self.rec.labels[end - 1];
        let trial = binned_trial(&self.pgram, &self.rec.window(end - len, len));
        Some(OnlineFrame {
            end_sample: end,
            time_s: end as f64 / self.rec.sample_rate,
            label,
            trial,
        })
    }
}

/// Collects every online frame of a stream.
pub fn sliding_online_window(rec: &Recording, block_s: f64, window_s: f64) -> Result<Vec<OnlineFrame>> {
    rec.validate()?;
    Ok(OnlineWindows::new(rec, block_s, window_s).collect())
}
