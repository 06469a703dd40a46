//! Raw recordings to labelled spectral trials.

mod io;
mod recording;
mod segment;
mod spectrum;

pub use io::{decode_recording, encode_recording, read_csv, read_recording, write_recording, RECORDING_MAGIC};
pub use recording::{
    common_average_reference, reject_artifact_channels, Label, Recording, Rejection, DEFAULT_Z_THRESHOLD,
};
pub use segment::{
    segment_training_trials, sliding_online_window, OnlineFrame, OnlineWindows, Segmentation, TrialWindow,
};
pub use spectrum::{psd_bins, restrict_band, FrequencyBand, Periodogram, SpectralTrial, BIN_CENTERS, N_BINS};
