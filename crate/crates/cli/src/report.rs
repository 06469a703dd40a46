//! Structured reports, the configuration digest and their human rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Everything a command's output depends on: input contents (by digest),
/// seeds and parameters. Output paths are deliberately absent so that reruns
/// into another directory carry the same digest.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub parameters: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    pub fn new(command: &str) -> Self {
        ExperimentConfig {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn input(&mut self, name: &str, bytes: &[u8]) -> &mut Self {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
        self
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), seed);
        self
    }

    pub fn param(&mut self, name: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(
            name.to_string(),
            serde_json::to_value(value).expect("serialisable parameter"),
        );
        self
    }

    /// SHA-256 of the canonical JSON form (keys are sorted by the maps).
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("serialisable config"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BandStepRow {
    pub low_hz: u32,
    pub high_hz: u32,
    pub accuracy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainSummary {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub p_value: f64,
    pub n_trials: usize,
    pub n_idle: usize,
    pub n_walk: usize,
    pub channels: Vec<String>,
    pub excluded: Vec<String>,
    pub band_low_hz: u32,
    pub band_high_hz: u32,
    pub band_path: Vec<BandStepRow>,
    pub model_sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CalibrateSummary {
    pub t_idle: f64,
    pub t_walk: f64,
    pub n_idle: usize,
    pub n_walk: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub score: f64,
    pub zone_scores: Vec<f64>,
    pub completion_time_s: f64,
    pub finished: bool,
    pub censored: Option<String>,
    pub ticks: u64,
    pub walk_ticks: u64,
    pub final_position_m: f64,
    pub false_starts: usize,
    pub false_stops: usize,
    pub false_start_s: f64,
    pub false_stop_s: f64,
    pub t_idle: f64,
    pub t_walk: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObservationRow {
    pub stops: f64,
    pub time_s: f64,
    pub hdr_p: Option<f64>,
    pub outside_grid: Option<bool>,
    pub mc_p: f64,
    /// The reported p: HDR when a density was fitted, Monte Carlo otherwise.
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvaluateSummary {
    pub t_idle: f64,
    pub t_walk: f64,
    pub n_runs: usize,
    pub stops_mean: f64,
    pub stops_std: f64,
    pub time_mean: f64,
    pub time_std: f64,
    pub censored_fraction: f64,
    pub stops_cell: String,
    pub time_cell: String,
    pub method: String,
    pub fallback_reason: Option<String>,
    pub bandwidth_stops: Option<f64>,
    pub bandwidth_time: Option<f64>,
    pub alpha: f64,
    pub observations: Vec<ObservationRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Train(TrainSummary),
    Calibrate(CalibrateSummary),
    Run(RunSummary),
    Evaluate(EvaluateSummary),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub outcome: Outcome,
}

impl Report {
    pub fn new(config: ExperimentConfig, outcome: Outcome) -> Self {
        Report {
            tool: "ambulate".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: config.digest(),
            config,
            outcome,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serialisable report");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        let body = match &self.outcome {
            Outcome::Train(t) => render_train(t),
            Outcome::Calibrate(c) => format!(
                "thresholds  T_I = {:.4}  T_W = {:.4}  (dead-band {:.4}; {} idle / {} walk posteriors)\n",
                c.t_idle,
                c.t_walk,
                c.t_walk - c.t_idle,
                c.n_idle,
                c.n_walk
            ),
            Outcome::Run(r) => render_run(r),
            Outcome::Evaluate(e) => render_evaluate(e),
        };
        format!("{body}config digest {}\n", self.config_digest)
    }
}

fn format_p(p: f64) -> String {
    if p == 0.0 {
        "0".to_string()
    } else if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn render_train(t: &TrainSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:<10} {:<14} {:<10}",
        "accuracy (%)", "p-value", "channels", "band (Hz)"
    );
    let excluded = if t.excluded.is_empty() {
        "none".to_string()
    } else {
        t.excluded.join(" ")
    };
    let _ = writeln!(
        s,
        "{:<16} {:<10} {:<14} {:<10}",
        format!("{:.1} ± {:.1}", 100.0 * t.accuracy_mean, 100.0 * t.accuracy_std),
        format_p(t.p_value),
        format!("{} (excl. {})", t.channels.len(), excluded),
        format!("{}-{}", t.band_low_hz, t.band_high_hz)
    );
    let _ = writeln!(s, "trials {} ({} idle, {} walk)", t.n_trials, t.n_idle, t.n_walk);
    for step in &t.band_path {
        let _ = writeln!(
            s,
            "  band {:>2}-{:<2} Hz  {:.1}%{}",
            step.low_hz,
            step.high_hz,
            100.0 * step.accuracy,
            if step.accepted { "  *" } else { "" }
        );
    }
    s
}

fn render_run(r: &RunSummary) -> String {
    let mut s = String::new();
    let time = if r.finished {
        format!("{:.1} s", r.completion_time_s)
    } else {
        format!(
            "> {:.0} s ({})",
            r.completion_time_s,
            r.censored.as_deref().unwrap_or("censored")
        )
    };
    let _ = writeln!(s, "stops {:.2} / {}   time {}", r.score, r.zone_scores.len(), time);
    let zones: Vec<String> = r.zone_scores.iter().map(|z| format!("{z:.2}")).collect();
    let _ = writeln!(s, "zones [{}]", zones.join(" "));
    let _ = writeln!(
        s,
        "false starts {} ({:.1} s), false stops {} ({:.1} s), thresholds ({:.2}, {:.2})",
        r.false_starts, r.false_start_s, r.false_stops, r.false_stop_s, r.t_idle, r.t_walk
    );
    s
}

fn render_evaluate(e: &EvaluateSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "random walk ({:.2}, {:.2}), {} runs, {:.1}% censored",
        e.t_idle,
        e.t_walk,
        e.n_runs,
        100.0 * e.censored_fraction
    );
    let _ = writeln!(s, "{:<12} {:<18} {:<14}", "", "time (s)", "stops");
    let _ = writeln!(s, "{:<12} {:<18} {:<14}", "RW", e.time_cell, e.stops_cell);
    for o in &e.observations {
        let _ = writeln!(
            s,
            "{:<12} {:<18} {:<14} p = {} ({}){}",
            "observed",
            format!("{:.1}", o.time_s),
            format!("{:.2}", o.stops),
            format_p(o.p),
            e.method,
            if o.significant { " *" } else { "" }
        );
    }
    if let Some(reason) = &e.fallback_reason {
        let _ = writeln!(s, "density fallback: {reason}");
    }
    s
}
