//! Synthetic EEG with class-dependent rhythm attenuation, plus scripted
//! posterior traces for driving the course without a decoder.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::course::CourseSpec;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::sigproc::{Label, Recording};
use crate::Class;

const STANDARD_16: [&str; 16] = [
    "Fp1", "Fp2", "F3", "Fz", "F4", "FCz", "C3", "Cz", "C4", "CPz", "P3", "Pz", "P4", "O1", "Oz", "O2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_channels: usize,
    pub sample_rate: f64,
    /// Indices of channels whose rhythm is attenuated during Walk.
    pub modulated_channels: Vec<usize>,
    pub rhythm_band: (f64, f64),
    pub rhythm_amplitude_uv: f64,
    /// Fractional amplitude attenuation during Walk.
    pub erd_depth: f64,
    pub noise_rms_uv: f64,
    pub noise_exponent: f64,
    /// Below this frequency the noise spectrum is flat.
    pub noise_knee_hz: f64,
    /// Log-amplitude spread of the rhythm envelope.
    pub envelope_sigma: f64,
    /// Correlation time of the rhythm envelope.
    pub envelope_tau_s: f64,
    pub epoch_s: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_channels: 16,
            sample_rate: 256.0,
            modulated_channels: vec![5, 6, 7, 8],
            rhythm_band: (10.0, 12.0),
            rhythm_amplitude_uv: 20.0,
            erd_depth: 0.8,
            noise_rms_uv: 2.0,
            noise_exponent: 1.0,
            noise_knee_hz: 2.0,
            envelope_sigma: 0.6,
            envelope_tau_s: 0.25,
            epoch_s: 30.0,
            duration_s: 600.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::invalid("generator needs at least one channel"));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.erd_depth) {
            return Err(Error::invalid(format!("erd_depth {} outside [0, 1]", self.erd_depth)));
        }
        if let Some(&c) = self.modulated_channels.iter().find(|&&c| c >= self.n_channels) {
            return Err(Error::invalid(format!("modulated channel {c} out of range")));
        }
        let (lo, hi) = self.rhythm_band;
        if !(lo > 0.0 && hi > lo && hi < self.sample_rate / 2.0) {
            return Err(Error::invalid("rhythm band must satisfy 0 < low < high < Nyquist"));
        }
        if !(self.rhythm_amplitude_uv >= 0.0 && self.noise_rms_uv >= 0.0) {
            return Err(Error::invalid("amplitudes must be nonnegative"));
        }
        if !self.noise_exponent.is_finite() {
            return Err(Error::invalid("noise exponent must be finite"));
        }
        if !(self.noise_knee_hz >= 0.0 && self.envelope_sigma >= 0.0 && self.envelope_tau_s > 0.0) {
            return Err(Error::invalid(
                "noise knee, envelope spread and envelope time must be nonnegative",
            ));
        }
        if !(self.epoch_s > 0.0 && self.duration_s > 0.0) {
            return Err(Error::invalid("epoch and duration must be positive"));
        }
        Ok(())
    }

    pub fn channel_names(&self) -> Vec<String> {
        if self.n_channels == STANDARD_16.len() {
            STANDARD_16.iter().map(|s| s.to_string()).collect()
        } else {
            (1..=self.n_channels).map(|i| format!("ch{i:02}")).collect()
        }
    }

    /// Reads overrides from a key-value document. `modulated_channels` is a
    /// comma-separated list of indices or channel names; `rhythm_band` is
    /// `low,high` in Hz.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut cfg = GeneratorConfig::default();
        for key in kv.keys() {
            match key {
                "n_channels" => cfg.n_channels = kv.require(key)?,
                "sample_rate" => cfg.sample_rate = kv.require(key)?,
                "rhythm_amplitude_uv" => cfg.rhythm_amplitude_uv = kv.require(key)?,
                "erd_depth" => cfg.erd_depth = kv.require(key)?,
                "noise_rms_uv" => cfg.noise_rms_uv = kv.require(key)?,
                "noise_exponent" => cfg.noise_exponent = kv.require(key)?,
                "noise_knee_hz" => cfg.noise_knee_hz = kv.require(key)?,
                "envelope_sigma" => cfg.envelope_sigma = kv.require(key)?,
                "envelope_tau_s" => cfg.envelope_tau_s = kv.require(key)?,
                "epoch_s" => cfg.epoch_s = kv.require(key)?,
                "duration_s" => cfg.duration_s = kv.require(key)?,
                "seed" => cfg.seed = kv.require(key)?,
                "modulated_channels" | "rhythm_band" => {}
                other => return Err(Error::format(format!("unknown generator key `{other}`"))),
            }
        }
        if let Some(band) = kv.get_str("rhythm_band") {
            let parts: Vec<f64> = band
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(format!("bad rhythm_band `{band}`")))?;
            match parts[..] {
                [lo, hi] => cfg.rhythm_band = (lo, hi),
                _ => return Err(Error::format("rhythm_band needs two values")),
            }
        }
        if let Some(list) = kv.get_str("modulated_channels") {
            let names = cfg.channel_names();
            cfg.modulated_channels = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>()
                        .ok()
                        .or_else(|| names.iter().position(|n| n == s))
                        .ok_or_else(|| Error::format(format!("unknown channel `{s}`")))
                })
                .collect::<Result<_>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("n_channels", self.n_channels);
        kv.insert("sample_rate", self.sample_rate);
        let mods: Vec<String> = self.modulated_channels.iter().map(|c| c.to_string()).collect();
        kv.insert("modulated_channels", mods.join(","));
        kv.insert("rhythm_band", format!("{},{}", self.rhythm_band.0, self.rhythm_band.1));
        kv.insert("rhythm_amplitude_uv", self.rhythm_amplitude_uv);
        kv.insert("erd_depth", self.erd_depth);
        kv.insert("noise_rms_uv", self.noise_rms_uv);
        kv.insert("noise_exponent", self.noise_exponent);
        kv.insert("noise_knee_hz", self.noise_knee_hz);
        kv.insert("envelope_sigma", self.envelope_sigma);
        kv.insert("envelope_tau_s", self.envelope_tau_s);
        kv.insert("epoch_s", self.epoch_s);
        kv.insert("duration_s", self.duration_s);
        kv.insert("seed", self.seed);
        kv
    }
}

/// Noise with power spectrum `1/max(f, knee)^alpha`, scaled to `rms`. DC is
/// removed.
pub fn colored_noise(n: usize, alpha: f64, knee_hz: f64, sample_rate: f64, rms: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    let df = sample_rate / n as f64;
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        let f = (k.min(n - k) as f64 * df).max(knee_hz);
        *c *= f.powf(-alpha / 2.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let scale = if cur > 0.0 { rms / cur } else { 0.0 };
    x.into_iter().map(|v| v * scale).collect()
}

/// Log-normal amplitude envelope `exp(sigma z - sigma^2)` driven by a
/// unit-variance AR(1) process `z`, so its mean square is one.
fn envelope(n: usize, sigma: f64, tau_s: f64, sample_rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rho = (-1.0 / (tau_s * sample_rate)).exp();
    let innov = (1.0 - rho * rho).sqrt();
    let mut z: f64 = rng.sample(StandardNormal);
    (0..n)
        .map(|_| {
            z = rho * z + innov * rng.sample::<f64, _>(StandardNormal);
            (sigma * z - sigma * sigma).exp()
        })
        .collect()
}

/// Streams EEG-like samples for an arbitrary intent sequence.
///
/// Each channel carries colored noise plus a rhythm at the centre of the
/// rhythm band with a slowly fluctuating amplitude envelope. A common phase
/// offset is redrawn whenever a new segment starts. On modulated channels
/// the rhythm is scaled by `1 - erd_depth` under Walk.
#[derive(Debug, Clone)]
pub struct SyntheticSubject {
    cfg: GeneratorConfig,
    rng: ChaCha8Rng,
    noise: Vec<Vec<f64>>,
    envelope: Vec<Vec<f64>>,
    channel_phase: Vec<f64>,
    cursor: usize,
    current: Option<Class>,
    segment_phase: f64,
}

impl SyntheticSubject {
    /// Pre-draws noise and envelopes for `capacity_s` seconds.
    pub fn new(cfg: GeneratorConfig, capacity_s: f64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let fs = cfg.sample_rate;
        let n = (capacity_s * fs).ceil() as usize;
        let noise = (0..cfg.n_channels)
            .map(|_| colored_noise(n, cfg.noise_exponent, cfg.noise_knee_hz, fs, cfg.noise_rms_uv, &mut rng))
            .collect();
        let envelope = (0..cfg.n_channels)
            .map(|_| envelope(n, cfg.envelope_sigma, cfg.envelope_tau_s, fs, &mut rng))
            .collect();
        let channel_phase = (0..cfg.n_channels).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Ok(SyntheticSubject {
            cfg,
            rng,
            noise,
            envelope,
            channel_phase,
            cursor: 0,
            current: None,
            segment_phase: 0.0,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn samples_emitted(&self) -> usize {
        self.cursor
    }

    /// Starts a new rhythm segment even if the intent is unchanged.
    pub fn new_epoch(&mut self) {
        self.current = None;
    }

    /// Emits `n` samples per channel for `intent`, rounded to `f32` precision.
    pub fn emit(&mut self, intent: Class, n: usize) -> Result<Vec<Vec<f64>>> {
        let capacity = self.noise.first().map_or(0, Vec::len);
        if self.cursor + n > capacity {
            return Err(Error::invalid("synthetic subject ran past its pre-drawn noise"));
        }
        if self.current != Some(intent) {
            self.current = Some(intent);
            self.segment_phase = self.rng.random_range(0.0..2.0 * PI);
        }
        let fs = self.cfg.sample_rate;
        let f = 0.5 * (self.cfg.rhythm_band.0 + self.cfg.rhythm_band.1);
        let mut out = Vec::with_capacity(self.cfg.n_channels);
        for c in 0..self.cfg.n_channels {
            let gain = if intent == Class::Walk && self.cfg.modulated_channels.contains(&c) {
                1.0 - self.cfg.erd_depth
            } else {
                1.0
            };
            let amp = self.cfg.rhythm_amplitude_uv * gain;
            let phase = self.channel_phase[c] + self.segment_phase;
            let ch: Vec<f64> = (self.cursor..self.cursor + n)
                .map(|i| {
                    let t = i as f64 / fs;
                    let rhythm = amp * self.envelope[c][i] * (2.0 * PI * f * t + phase).sin();
                    (self.noise[c][i] + rhythm) as f32 as f64
                })
                .collect();
            out.push(ch);
        }
        self.cursor += n;
        Ok(out)
    }
}

/// Labelled recording of alternating epochs, starting with Idle.
pub fn generate_recording(cfg: &GeneratorConfig) -> Result<Recording> {
    cfg.validate()?;
    let fs = cfg.sample_rate;
    let total = (cfg.duration_s * fs).round() as usize;
    let epoch = ((cfg.epoch_s * fs).round() as usize).max(1);
    if (cfg.duration_s / cfg.epoch_s).fract().abs() > 1e-9 {
        log::warn!(
            "duration {} s is not a multiple of the {} s epoch",
            cfg.duration_s,
            cfg.epoch_s
        );
    }
    let mut subject = SyntheticSubject::new(cfg.clone(), total as f64 / fs)?;
    let mut samples = vec![Vec::with_capacity(total); cfg.n_channels];
    let mut labels = Vec::with_capacity(total);
    let mut start = 0;
    let mut k = 0;
    while start < total {
        let len = epoch.min(total - start);
        let class = if k % 2 == 0 { Class::Idle } else { Class::Walk };
        subject.new_epoch();
        for (dst, src) in samples.iter_mut().zip(subject.emit(class, len)?) {
            dst.extend(src);
        }
        labels.extend(std::iter::repeat_n(Label::from(class), len));
        start += len;
        k += 1;
    }
    Recording::new(fs, cfg.channel_names(), samples, labels)
}

/// Piecewise-constant schedule of posterior values over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedAgent {
    /// Contiguous `(start_s, end_s, value)` segments.
    pub segments: Vec<(f64, f64, f64)>,
}

impl ScriptedAgent {
    pub fn constant(value: f64, horizon_s: f64) -> Self {
        ScriptedAgent {
            segments: vec![(0.0, horizon_s, value)],
        }
    }

    /// Builds a schedule from intents, mapping Walk to 1 and Idle to 0.
    pub fn from_intents(intents: &[(Class, f64)]) -> Self {
        let mut t = 0.0;
        let mut segments = Vec::with_capacity(intents.len());
        for &(c, dur) in intents {
            let v = if c == Class::Walk { 1.0 } else { 0.0 };
            segments.push((t, t + dur, v));
            t += dur;
        }
        ScriptedAgent { segments }
    }

    pub fn horizon_s(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.1)
    }
}

/// Intent schedule that walks to each stop centre, idles `dwell_full_s`
/// there, and walks out past the end until the time limit.
pub fn perfect_course_intents(spec: &CourseSpec) -> Vec<(Class, f64)> {
    let mut out = Vec::new();
    let mut pos = 0.0;
    let mut t = 0.0;
    for &c in &spec.npc_positions_m {
        let walk = (c - pos) / spec.walk_speed_mps;
        out.push((Class::Walk, walk));
        out.push((Class::Idle, spec.dwell_full_s));
        t += walk + spec.dwell_full_s;
        pos = c;
    }
    out.push((Class::Walk, (spec.time_limit_s - t).max(spec.walking_time_s())));
    out
}

pub fn perfect_course_agent(spec: &CourseSpec) -> ScriptedAgent {
    ScriptedAgent::from_intents(&perfect_course_intents(spec))
}

/// Samples a schedule at tick resolution. The value at tick `i` is the one
/// scheduled at `i * tick_s`.
pub fn ideal_posterior_trace(agent: &ScriptedAgent, tick_s: f64) -> Result<Vec<f64>> {
    if !(tick_s > 0.0) {
        return Err(Error::invalid("tick must be positive"));
    }
    let mut prev_end = 0.0;
    for &(a, b, v) in &agent.segments {
        if (a - prev_end).abs() > 1e-9 {
            return Err(Error::invalid(format!("schedule gap or overlap at {prev_end} s")));
        }
        if !(b > a) {
            return Err(Error::invalid(format!("empty schedule segment at {a} s")));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("scheduled value {v} outside [0, 1]")));
        }
        prev_end = b;
    }
    let n = ((prev_end / tick_s) + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let t = i as f64 * tick_s + 1e-9;
        while seg + 1 < agent.segments.len() && t >= agent.segments[seg].1 {
            seg += 1;
        }
        out.push(agent.segments[seg].2);
    }
    Ok(out)
}
