//! Posterior smoothing and the two-threshold Idle/Walk state machine.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::Class;

pub const DEFAULT_SMOOTHING: usize = 3;

/// Hysteresis thresholds with `0 <= t_idle <= t_walk <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub t_idle: f64,
    pub t_walk: f64,
}

impl Thresholds {
    pub fn new(t_idle: f64, t_walk: f64) -> Result<Self> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(t_idle) || !in_unit(t_walk) {
            return Err(Error::invalid(format!(
                "thresholds must lie in [0, 1], got ({t_idle}, {t_walk})"
            )));
        }
        if t_idle > t_walk {
            return Err(Error::UnusableThresholds { t_idle, t_walk });
        }
        Ok(Thresholds { t_idle, t_walk })
    }

    /// `T_I = T_W = 0.5`: tick-wise MAP on the smoothed posterior.
    pub fn map_rule() -> Self {
        Thresholds {
            t_idle: 0.5,
            t_walk: 0.5,
        }
    }

    pub fn dead_band(&self) -> f64 {
        self.t_walk - self.t_idle
    }

    /// Shifts both thresholds, clamping to `[0, 1]`.
    pub fn adjust(&self, delta_idle: f64, delta_walk: f64) -> Result<Self> {
        let t_idle = (self.t_idle + delta_idle).clamp(0.0, 1.0);
        let t_walk = (self.t_walk + delta_walk).clamp(0.0, 1.0);
        Thresholds::new(t_idle, t_walk)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("t_idle", self.t_idle);
        kv.insert("t_walk", self.t_walk);
        kv
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        for key in kv.keys() {
            if key != "t_idle" && key != "t_walk" {
                return Err(Error::format(format!("unknown thresholds key `{key}`")));
            }
        }
        Thresholds::new(kv.require("t_idle")?, kv.require("t_walk")?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Thresholds::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn render(&self) -> String {
        self.to_key_values().render()
    }
}

impl fmt::Display for Thresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T_I={:.4} T_W={:.4}", self.t_idle, self.t_walk)
    }
}

/// Mean of the most recent `k` per-tick posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoother {
    k: usize,
    buf: VecDeque<f64>,
}

impl Smoother {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("smoothing horizon must be at least one tick"));
        }
        Ok(Smoother {
            k,
            buf: VecDeque::with_capacity(k),
        })
    }

    pub fn horizon(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Pushes a posterior and returns the updated mean. During warm-up the
    /// mean covers whatever ticks exist.
    pub fn push(&mut self, p: f64) -> f64 {
        if self.buf.len() == self.k {
            self.buf.pop_front();
        }
        self.buf.push_back(p);
        self.mean().expect("just pushed")
    }

    pub fn mean(&self) -> Option<f64> {
        if self.buf.is_empty() {
            return None;
        }
        let m = self.buf.iter().sum::<f64>() / self.buf.len() as f64;
        Some(m.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    state: Class,
    tick: u64,
    thresholds: Thresholds,
    smoother: Smoother,
}

/// Outcome of one controller tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub tick: u64,
    pub p_bar: f64,
    pub state: Class,
    pub changed: bool,
}

impl Controller {
    pub fn new(thresholds: Thresholds) -> Self {
        Controller::with_horizon(thresholds, DEFAULT_SMOOTHING).expect("nonzero default horizon")
    }

    pub fn with_horizon(thresholds: Thresholds, k: usize) -> Result<Self> {
        Ok(Controller {
            state: Class::Idle,
            tick: 0,
            thresholds,
            smoother: Smoother::new(k)?,
        })
    }

    pub fn state(&self) -> Class {
        self.state
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn step(&mut self, p_walk: f64) -> Result<Decision> {
        if !(0.0..=1.0).contains(&p_walk) {
            return Err(Error::invalid(format!("posterior {p_walk} outside [0, 1]")));
        }
        let p_bar = self.smoother.push(p_walk);
        let next = match self.state {
            Class::Idle if p_bar > self.thresholds.t_walk => Class::Walk,
            Class::Walk if p_bar < self.thresholds.t_idle => Class::Idle,
            s => s,
        };
        let changed = next != self.state;
        self.state = next;
        let d = Decision {
            tick: self.tick,
            p_bar,
            state: next,
            changed,
        };
        self.tick += 1;
        Ok(d)
    }
}

/// Runs a fresh controller over a posterior trace and returns the state at
/// every tick.
pub fn replay(thresholds: Thresholds, trace: &[f64]) -> Result<Vec<Class>> {
    let mut c = Controller::new(thresholds);
    trace.iter().map(|&p| c.step(p).map(|d| d.state)).collect()
}

pub fn count_transitions(states: &[Class]) -> usize {
    let mut prev = Class::Idle;
    let mut n = 0;
    for &s in states {
        if s != prev {
            n += 1;
        }
        prev = s;
    }
    n
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Thresholds from the medians of cued-idle and cued-walk posteriors.
///
/// Identical lists mean the model cannot tell the cues apart and are
/// rejected. Distinct lists with equal medians give a zero dead-band.
pub fn calibrate(idle: &[f64], walk: &[f64]) -> Result<Thresholds> {
    if idle.is_empty() || walk.is_empty() {
        return Err(Error::invalid("calibration needs posteriors for both conditions"));
    }
    if idle.iter().chain(walk).any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("calibration posterior outside [0, 1]"));
    }
    if idle == walk {
        return Err(Error::invalid("idle and walk calibration posteriors are identical"));
    }
    let t_idle = median(idle);
    let t_walk = median(walk);
    if t_idle > t_walk {
        return Err(Error::UnusableThresholds { t_idle, t_walk });
    }
    if t_idle == t_walk {
        log::warn!("calibration medians coincide at {t_idle}; dead-band is empty");
    }
    Thresholds::new(t_idle, t_walk)
}

/// Posteriors grouped by cue, as read from a calibration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationData {
    pub idle: Vec<f64>,
    pub walk: Vec<f64>,
}

impl CalibrationData {
    /// One posterior per line under `[idle]` and `[walk]` headers. Blank lines
    /// and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = CalibrationData::default();
        let mut section: Option<Class> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[idle]" => section = Some(Class::Idle),
                "[walk]" => section = Some(Class::Walk),
                _ if line.starts_with('[') => {
                    return Err(Error::format(format!("line {}: unknown section {line}", i + 1)))
                }
                _ => {
                    let p: f64 = line
                        .parse()
                        .map_err(|_| Error::format(format!("line {}: bad posterior `{line}`", i + 1)))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::format(format!("line {}: posterior {p} outside [0, 1]", i + 1)));
                    }
                    match section {
                        Some(Class::Idle) => out.idle.push(p),
                        Some(Class::Walk) => out.walk.push(p),
                        None => {
                            return Err(Error::format(format!(
                                "line {}: value before any section header",
                                i + 1
                            )))
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("[idle]\n");
        for p in &self.idle {
            s.push_str(&format!("{p}\n"));
        }
        s.push_str("[walk]\n");
        for p in &self.walk {
            s.push_str(&format!("{p}\n"));
        }
        s
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        calibrate(&self.idle, &self.walk)
    }
}
