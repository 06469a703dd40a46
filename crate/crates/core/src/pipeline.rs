//! End-to-end glue: offline training from a labelled recording, online
//! posterior streams, calibration and the closed-loop synthetic session.

use crate::controller::{calibrate, CalibrationData, Controller, Smoother, Thresholds, DEFAULT_SMOOTHING};
use crate::course::{competent_intent, CourseSpec, SessionResult, Simulator};
use crate::decoder::{optimize_band, BandStep, CvConfig, CvReport, DecodingModel, FitOptions};
use crate::error::{Error, Result};
use crate::sigproc::{
    common_average_reference, reject_artifact_channels, restrict_band, segment_training_trials, FrequencyBand, Label,
    OnlineWindows, Recording, Segmentation, SpectralTrial, DEFAULT_Z_THRESHOLD,
};
use crate::synth::{GeneratorConfig, SyntheticSubject};
use crate::Class;

pub const ONLINE_WINDOW_S: f64 = 0.75;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub z_threshold: f64,
    pub max_reject_iters: usize,
    pub segmentation: Segmentation,
    pub fit: FitOptions,
    pub cv: CvConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            z_threshold: DEFAULT_Z_THRESHOLD,
            max_reject_iters: usize::MAX,
            segmentation: Segmentation::default(),
            fit: FitOptions::default(),
            cv: CvConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DecodingModel,
    pub report: CvReport,
    pub band: FrequencyBand,
    pub excluded: Vec<String>,
    pub n_trials: [usize; 2],
    pub band_path: Vec<BandStep>,
}

/// Rejection, re-referencing, segmentation and 2-Hz binning.
pub fn prepare_trials(rec: &Recording, cfg: &TrainConfig) -> Result<(Vec<SpectralTrial>, Vec<String>, Recording)> {
    if !rec.has_labels() {
        return Err(Error::invalid("training recording carries no class labels"));
    }
    let rej = reject_artifact_channels(rec, cfg.z_threshold, cfg.max_reject_iters)?;
    let car = common_average_reference(&rej.recording)?;
    let windows = segment_training_trials(&car, cfg.segmentation);
    if windows.is_empty() {
        return Err(Error::TooFewTrials("no complete trials in the recording".into()));
    }
    let trials = windows.iter().map(|w| w.spectral(&car)).collect();
    Ok((trials, rej.excluded, car))
}

pub fn train(rec: &Recording, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let (trials, excluded, car) = prepare_trials(rec, cfg)?;
    let mut n_trials = [0usize; 2];
    for t in &trials {
        n_trials[t.label.expect("segmented trials are labelled").index()] += 1;
    }
    let search = optimize_band(&trials, car.channels.clone(), &cfg.fit, &cfg.cv)?;
    Ok(TrainOutcome {
        model: search.model,
        report: search.report,
        band: search.band,
        excluded,
        n_trials,
        band_path: search.path,
    })
}

/// Walking posterior for one online frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlinePosterior {
    pub time_s: f64,
    pub label: Label,
    pub p_walk: f64,
}

/// Model channels, re-referenced, windowed every `block_s`.
pub fn online_posteriors(model: &DecodingModel, rec: &Recording, block_s: f64) -> Result<Vec<OnlinePosterior>> {
    let sel = common_average_reference(&rec.select_channels(&model.channels)?)?;
    OnlineWindows::new(&sel, block_s, ONLINE_WINDOW_S)
        .map(|f| {
            let t = restrict_band(&f.trial, model.band)?;
            Ok(OnlinePosterior {
                time_s: f.time_s,
                label: f.label,
                p_walk: model.posterior(&t)?,
            })
        })
        .collect()
}

/// Smoothed posteriors of a cued session grouped by cue.
pub fn calibration_data(model: &DecodingModel, rec: &Recording, block_s: f64) -> Result<CalibrationData> {
    let mut smoother = Smoother::new(DEFAULT_SMOOTHING)?;
    let mut out = CalibrationData::default();
    for p in online_posteriors(model, rec, block_s)? {
        let p_bar = smoother.push(p.p_walk);
        match p.label.class() {
            Some(Class::Idle) => out.idle.push(p_bar),
            Some(Class::Walk) => out.walk.push(p_bar),
            None => {}
        }
    }
    Ok(out)
}

pub fn calibrate_from_recording(model: &DecodingModel, rec: &Recording, block_s: f64) -> Result<Thresholds> {
    let data = calibration_data(model, rec, block_s)?;
    calibrate(&data.idle, &data.walk)
}

/// Closed-loop run with a synthetic subject who intends to stop at each zone
/// centre until the stop is fully credited, and to walk otherwise.
pub fn run_closed_loop(
    model: &DecodingModel,
    thresholds: Thresholds,
    spec: &CourseSpec,
    subject_cfg: &GeneratorConfig,
    keep_log: bool,
) -> Result<SessionResult> {
    let fs = subject_cfg.sample_rate;
    let hop = (spec.tick_s * fs).round() as usize;
    let window = (ONLINE_WINDOW_S * fs).round() as usize;
    if hop == 0 || window == 0 {
        return Err(Error::invalid("tick and window must span at least one sample"));
    }
    let preroll = window.saturating_sub(hop);
    let ticks = (spec.time_limit_s / spec.tick_s).ceil() as usize;
    let capacity = (preroll + hop * ticks + 1) as f64 / fs;
    let mut subject = SyntheticSubject::new(subject_cfg.clone(), capacity)?;
    let names = subject_cfg.channel_names();
    let index: Vec<usize> = model
        .channels
        .iter()
        .map(|c| {
            names
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| Error::invalid(format!("model channel {c} missing from synthetic montage")))
        })
        .collect::<Result<_>>()?;

    let mut buffer: Vec<Vec<f64>> = vec![Vec::new(); index.len()];
    let push = |buffer: &mut Vec<Vec<f64>>, block: Vec<Vec<f64>>| {
        for (dst, &src) in buffer.iter_mut().zip(&index) {
            dst.extend_from_slice(&block[src]);
            let excess = dst.len().saturating_sub(window);
            dst.drain(..excess);
        }
    };
    if preroll > 0 {
        push(&mut buffer, subject.emit(Class::Idle, preroll)?);
    }

    let mut sim = Simulator::new(spec.clone())?.with_log(keep_log);
    let mut ctrl = Controller::new(thresholds);
    while !sim.is_finished() {
        let intent = competent_intent(&sim);
        push(&mut buffer, subject.emit(intent, hop)?);
        let rec = Recording::new(
            fs,
            model.channels.clone(),
            buffer.clone(),
            vec![Label::Unlabeled; window],
        )?;
        let car = common_average_reference(&rec)?;
        let trial = crate::sigproc::psd_bins(&car.window(0, window), fs)?;
        let p = model.posterior(&restrict_band(&trial, model.band)?)?;
        let d = ctrl.step(p)?;
        sim.tick(d.state, Some(d.p_bar))?;
    }
    Ok(sim.result())
}
