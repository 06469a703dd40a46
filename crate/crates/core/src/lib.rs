//! End-to-end pipeline for a self-paced, two-state (idle/walk) EEG controller
//! driving an avatar along a linear course.
//!
//! The crate is organised bottom-up:
//!
//! - [`sigproc`]: recordings, re-referencing, artefact-channel rejection,
//!   trial segmentation and 2-Hz spectral binning.
//! - [`decoder`]: classwise PCA, linear discriminants, Gaussian Bayes
//!   posteriors, stratified cross-validation and frequency-band search.
//! - [`controller`]: posterior smoothing plus the hysteresis state machine.
//! - [`course`]: a fixed-tick simulator of the ten-stop course and its scoring.
//! - [`eval`]: random-walk controls, Parzen density estimates, HDR p-values and
//!   correlation/regression statistics.
//! - [`synth`]: synthetic EEG and scripted agents for hardware-free testing.
//! - [`pipeline`]: training, online posterior streams, calibration and the
//!   closed-loop synthetic session.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binio;
pub mod controller;
pub mod course;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod kv;
pub mod pipeline;
pub mod sigproc;
pub mod synth;

pub use error::{Error, Result};

/// One of the two mental states the decoder distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    Idle,
    Walk,
}

impl Class {
    pub const BOTH: [Class; 2] = [Class::Idle, Class::Walk];

    pub fn index(self) -> usize {
        match self {
            Class::Idle => 0,
            Class::Walk => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Idle => "idle",
            Class::Walk => "walk",
        }
    }
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
