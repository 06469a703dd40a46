//! Fixed-tick simulator of the linear stop-and-go course.

use std::fmt;
use std::io::Write;

use crate::controller::{Controller, Thresholds};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::Class;

const POS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CourseSpec {
    pub course_length_m: f64,
    pub npc_positions_m: Vec<f64>,
    pub zone_radius_m: f64,
    pub walk_speed_mps: f64,
    pub dwell_full_s: f64,
    pub dwell_min_s: f64,
    pub time_limit_s: f64,
    pub tick_s: f64,
}

impl Default for CourseSpec {
    fn default() -> Self {
        CourseSpec::default_course()
    }
}

impl CourseSpec {
    /// 210 m walked in 191 s, ten stops 18 s of walking apart, 3.5 m zones.
    pub fn default_course() -> Self {
        let speed = 210.0 / 191.0;
        CourseSpec {
            course_length_m: 210.0,
            npc_positions_m: (1..=10).map(|i| i as f64 * 18.0 * speed).collect(),
            zone_radius_m: 3.5,
            walk_speed_mps: speed,
            dwell_full_s: 2.0,
            dwell_min_s: 0.5,
            time_limit_s: 1200.0,
            tick_s: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.course_length_m, "course_length_m")?;
        pos(self.zone_radius_m, "zone_radius_m")?;
        pos(self.walk_speed_mps, "walk_speed_mps")?;
        pos(self.dwell_full_s, "dwell_full_s")?;
        pos(self.time_limit_s, "time_limit_s")?;
        pos(self.tick_s, "tick_s")?;
        if !(self.dwell_min_s >= 0.0 && self.dwell_min_s <= self.dwell_full_s) {
            return Err(Error::invalid("dwell_min_s must lie in [0, dwell_full_s]"));
        }
        if self.npc_positions_m.is_empty() {
            return Err(Error::invalid("course needs at least one stop"));
        }
        let mut prev = f64::NEG_INFINITY;
        for &p in &self.npc_positions_m {
            if !(p > prev) || p < 0.0 || p > self.course_length_m {
                return Err(Error::invalid(
                    "stop positions must be strictly increasing and within the course",
                ));
            }
            prev = p;
        }
        Ok(())
    }

    pub fn n_stops(&self) -> usize {
        self.npc_positions_m.len()
    }

    pub fn step_m(&self) -> f64 {
        self.walk_speed_mps * self.tick_s
    }

    /// Pure walking time for the whole course.
    pub fn walking_time_s(&self) -> f64 {
        self.course_length_m / self.walk_speed_mps
    }

    /// Index of the zone containing `position`, if any.
    pub fn zone_at(&self, position: f64) -> Option<usize> {
        self.npc_positions_m
            .iter()
            .position(|c| (position - c).abs() <= self.zone_radius_m + POS_EPS)
    }

    /// Points for one idle episode inside a zone.
    pub fn score_dwell(&self, episode_s: f64, in_zone: bool) -> f64 {
        if !in_zone || episode_s + POS_EPS < self.dwell_min_s {
            return 0.0;
        }
        (episode_s / self.dwell_full_s).min(1.0)
    }

    /// Overrides scalar fields from `key = value` pairs.
    pub fn apply_overrides(&mut self, kv: &KeyValues) -> Result<()> {
        for key in kv.keys() {
            let value: f64 = kv.require(key)?;
            match key {
                "course_length_m" => self.course_length_m = value,
                "zone_radius_m" => self.zone_radius_m = value,
                "walk_speed_mps" => self.walk_speed_mps = value,
                "dwell_full_s" => self.dwell_full_s = value,
                "dwell_min_s" => self.dwell_min_s = value,
                "time_limit_s" => self.time_limit_s = value,
                "tick_s" => self.tick_s = value,
                other => return Err(Error::invalid(format!("unknown course key `{other}`"))),
            }
        }
        self.validate()
    }
}

/// What happened during a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Enter,
    Exit,
    FalseStart,
    FalseStop,
    StopScored,
    Finish,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::Enter => "enter",
            Event::Exit => "exit",
            Event::FalseStart => "false_start",
            Event::FalseStop => "false_stop",
            Event::StopScored => "stop_scored",
            Event::Finish => "finish",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorReason {
    TimeLimit,
    SourceExhausted,
}

impl CensorReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CensorReason::TimeLimit => "time_limit",
            CensorReason::SourceExhausted => "source_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    /// Clock at the end of the tick.
    pub clock_s: f64,
    pub p_bar: Option<f64>,
    pub state: Class,
    /// Position at the end of the tick.
    pub position_m: f64,
    /// 1-based zone containing the end position.
    pub zone: Option<usize>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub score: f64,
    pub zone_scores: Vec<f64>,
    /// Crossing time, or the clock when the run was censored.
    pub completion_time_s: f64,
    pub censored: Option<CensorReason>,
    pub ticks: u64,
    pub walk_ticks: u64,
    pub final_position_m: f64,
    pub false_start_s: f64,
    pub false_stop_s: f64,
    pub false_starts: usize,
    pub false_stops: usize,
    /// Empty unless logging was requested.
    pub log: Vec<TickRecord>,
}

impl SessionResult {
    pub fn finished(&self) -> bool {
        self.censored.is_none()
    }

    pub fn productive_s(&self) -> f64 {
        self.completion_time_s - self.false_start_s - self.false_stop_s
    }
}

#[derive(Debug, Clone)]
pub struct Simulator {
    spec: CourseSpec,
    step: f64,
    tick: u64,
    walk_ticks: u64,
    position: f64,
    clock: f64,
    episode: Option<(usize, f64)>,
    best: Vec<f64>,
    prev_class: Option<(Class, bool, bool)>,
    false_start_ticks: u64,
    false_stop_ticks: u64,
    false_starts: usize,
    false_stops: usize,
    done: Option<Option<CensorReason>>,
    completion: f64,
    keep_log: bool,
    log: Vec<TickRecord>,
}

impl Simulator {
    pub fn new(spec: CourseSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_stops();
        Ok(Simulator {
            step: spec.step_m(),
            spec,
            tick: 0,
            walk_ticks: 0,
            position: 0.0,
            clock: 0.0,
            episode: None,
            best: vec![0.0; n],
            prev_class: None,
            false_start_ticks: 0,
            false_stop_ticks: 0,
            false_starts: 0,
            false_stops: 0,
            done: None,
            completion: 0.0,
            keep_log: false,
            log: Vec::new(),
        })
    }

    pub fn with_log(mut self, keep: bool) -> Self {
        self.keep_log = keep;
        self
    }

    pub fn spec(&self) -> &CourseSpec {
        &self.spec
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn is_finished(&self) -> bool {
        self.done.is_some()
    }

    /// Best score for zone `z`, counting an episode still in progress.
    pub fn zone_credit(&self, z: usize) -> f64 {
        let open = match self.episode {
            Some((ez, d)) if ez == z => self.spec.score_dwell(d, true),
            _ => 0.0,
        };
        self.best[z].max(open)
    }

    fn close_episode(&mut self, events: &mut Vec<Event>) {
        if let Some((zone, dur)) = self.episode.take() {
            let pts = self.spec.score_dwell(dur, true);
            if pts > self.best[zone] {
                self.best[zone] = pts;
                events.push(Event::StopScored);
            }
        }
    }

    /// Advances one tick with the controller output `state`.
    pub fn tick(&mut self, state: Class, p_bar: Option<f64>) -> Result<()> {
        if self.done.is_some() {
            return Err(Error::SimulationFinished);
        }
        let mut events = Vec::new();
        let zone_before = self.spec.zone_at(self.position);

        // Classify the tick for the error accounting. Segments are reported
        // once, on their first tick.
        let (is_fs, is_fstop) = match state {
            Class::Walk => {
                let fs = zone_before.is_some_and(|z| {
                    self.position >= self.spec.npc_positions_m[z] - POS_EPS && self.zone_credit(z) < 1.0 - 1e-12
                });
                (fs, false)
            }
            Class::Idle => (false, zone_before.is_none()),
        };
        let (prev_fs, prev_fstop) = match self.prev_class {
            Some((_, a, b)) => (a, b),
            None => (false, false),
        };
        if is_fs {
            self.false_start_ticks += 1;
            if !prev_fs {
                self.false_starts += 1;
                events.push(Event::FalseStart);
            }
        }
        if is_fstop {
            self.false_stop_ticks += 1;
            if !prev_fstop {
                self.false_stops += 1;
                events.push(Event::FalseStop);
            }
        }
        self.prev_class = Some((state, is_fs, is_fstop));

        match state {
            Class::Walk => {
                self.close_episode(&mut events);
                self.walk_ticks += 1;
                self.position = (self.walk_ticks as f64 * self.step).min(self.spec.course_length_m);
            }
            Class::Idle => {
                if let Some(z) = zone_before {
                    let dur = self.episode.map_or(0.0, |(_, d)| d) + self.spec.tick_s;
                    self.episode = Some((z, dur));
                }
            }
        }
        self.tick += 1;
        self.clock = self.tick as f64 * self.spec.tick_s;

        let zone_after = self.spec.zone_at(self.position);
        if zone_after != zone_before {
            if zone_before.is_some() {
                events.push(Event::Exit);
            }
            if zone_after.is_some() {
                events.push(Event::Enter);
            }
        }

        if self.position >= self.spec.course_length_m - POS_EPS {
            self.close_episode(&mut events);
            events.push(Event::Finish);
            self.done = Some(None);
            self.completion = self.clock;
        } else if self.clock >= self.spec.time_limit_s - POS_EPS {
            self.close_episode(&mut events);
            self.done = Some(Some(CensorReason::TimeLimit));
            self.completion = self.spec.time_limit_s;
        }

        if self.keep_log {
            self.log.push(TickRecord {
                tick: self.tick - 1,
                clock_s: self.clock,
                p_bar,
                state,
                position_m: self.position,
                zone: zone_after.map(|z| z + 1),
                events,
            });
        }
        Ok(())
    }

    /// Ends a run early, e.g. when the posterior source runs dry.
    pub fn censor(&mut self, reason: CensorReason) {
        if self.done.is_none() {
            let mut ev = Vec::new();
            self.close_episode(&mut ev);
            if let (true, Some(last)) = (self.keep_log, self.log.last_mut()) {
                last.events.extend(ev);
            }
            self.done = Some(Some(reason));
            self.completion = self.clock;
        }
    }

    pub fn result(mut self) -> SessionResult {
        if self.done.is_none() {
            self.censor(CensorReason::SourceExhausted);
        }
        let tick_s = self.spec.tick_s;
        SessionResult {
            score: self.best.iter().sum(),
            zone_scores: self.best,
            completion_time_s: self.completion,
            censored: self.done.flatten(),
            ticks: self.tick,
            walk_ticks: self.walk_ticks,
            final_position_m: self.position,
            false_start_s: self.false_start_ticks as f64 * tick_s,
            false_stop_s: self.false_stop_ticks as f64 * tick_s,
            false_starts: self.false_starts,
            false_stops: self.false_stops,
            log: self.log,
        }
    }
}

/// Supplies one walking posterior per controller tick. `None` means the
/// source is exhausted.
pub trait PosteriorSource {
    fn next_posterior(&mut self) -> Result<Option<f64>>;
}

impl<I: Iterator<Item = f64>> PosteriorSource for std::iter::Fuse<I> {
    fn next_posterior(&mut self) -> Result<Option<f64>> {
        Ok(self.next())
    }
}

/// Posteriors from a fixed trace.
#[derive(Debug, Clone)]
pub struct TraceSource {
    trace: Vec<f64>,
    pos: usize,
}

impl TraceSource {
    pub fn new(trace: Vec<f64>) -> Self {
        TraceSource { trace, pos: 0 }
    }
}

impl PosteriorSource for TraceSource {
    fn next_posterior(&mut self) -> Result<Option<f64>> {
        let p = self.trace.get(self.pos).copied();
        self.pos += 1;
        Ok(p)
    }
}

/// Drives the simulator from a posterior source through the controller.
pub fn run_session(
    spec: &CourseSpec,
    thresholds: Thresholds,
    source: &mut dyn PosteriorSource,
    keep_log: bool,
) -> Result<SessionResult> {
    let mut sim = Simulator::new(spec.clone())?.with_log(keep_log);
    let mut ctrl = Controller::new(thresholds);
    while !sim.is_finished() {
        match source.next_posterior()? {
            Some(p) => {
                let d = ctrl.step(p)?;
                sim.tick(d.state, Some(d.p_bar))?;
            }
            None => sim.censor(CensorReason::SourceExhausted),
        }
    }
    Ok(sim.result())
}

/// What a competent subject intends at the current position: hold Idle from
/// a zone centre until that zone's stop is fully credited, walk otherwise.
pub fn competent_intent(sim: &Simulator) -> Class {
    let spec = sim.spec();
    match spec.zone_at(sim.position()) {
        Some(z) if sim.position() >= spec.npc_positions_m[z] - 1e-9 && sim.zone_credit(z) < 1.0 => Class::Idle,
        _ => Class::Walk,
    }
}

/// Session of an agent that follows [`competent_intent`] with certain
/// posteriors (0 for Idle, 1 for Walk), seen through the controller.
pub fn run_competent_agent(spec: &CourseSpec, thresholds: Thresholds, keep_log: bool) -> Result<SessionResult> {
    let mut sim = Simulator::new(spec.clone())?.with_log(keep_log);
    let mut ctrl = Controller::new(thresholds);
    while !sim.is_finished() {
        let p = match competent_intent(&sim) {
            Class::Idle => 0.0,
            Class::Walk => 1.0,
        };
        let d = ctrl.step(p)?;
        sim.tick(d.state, Some(d.p_bar))?;
    }
    Ok(sim.result())
}

/// Drives the simulator directly from motion states, bypassing the controller.
pub fn run_states(spec: &CourseSpec, states: impl IntoIterator<Item = Class>, keep_log: bool) -> Result<SessionResult> {
    let mut sim = Simulator::new(spec.clone())?.with_log(keep_log);
    let mut it = states.into_iter();
    while !sim.is_finished() {
        match it.next() {
            Some(s) => sim.tick(s, None)?,
            None => sim.censor(CensorReason::SourceExhausted),
        }
    }
    Ok(sim.result())
}

/// Writes the tick log as CSV with a commented header and summary footer.
pub fn write_session_log(
    out: &mut dyn Write,
    result: &SessionResult,
    thresholds: Option<Thresholds>,
    adjustment: Option<(f64, f64)>,
) -> Result<()> {
    if let Some(th) = thresholds {
        writeln!(out, "# t_idle={} t_walk={}", th.t_idle, th.t_walk)?;
    }
    if let Some((di, dw)) = adjustment {
        writeln!(out, "# adjust_idle={di} adjust_walk={dw}")?;
    }
    writeln!(out, "tick,clock_s,p_bar,state,position_m,zone_id,event")?;
    for r in &result.log {
        let p = r.p_bar.map_or(String::new(), |p| format!("{p:.6}"));
        let zone = r.zone.map_or(String::new(), |z| z.to_string());
        let ev = if r.events.is_empty() {
            "none".to_string()
        } else {
            r.events.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(";")
        };
        writeln!(
            out,
            "{},{:.1},{},{},{:.4},{},{}",
            r.tick, r.clock_s, p, r.state, r.position_m, zone, ev
        )?;
    }
    writeln!(
        out,
        "# score={:.4} time_s={:.1} censored={} false_start_s={:.1} false_stop_s={:.1}",
        result.score,
        result.completion_time_s,
        result.censored.map_or("no", |c| c.as_str()),
        result.false_start_s,
        result.false_stop_s
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perfect_states(spec: &CourseSpec, dwell_ticks: usize) -> Vec<Class> {
        let step = spec.step_m();
        let mut out = Vec::new();
        let mut pos_ticks = 0u64;
        for &c in &spec.npc_positions_m {
            let target = (c / step).round() as u64;
            while pos_ticks < target {
                out.push(Class::Walk);
                pos_ticks += 1;
            }
            out.extend(std::iter::repeat_n(Class::Idle, dwell_ticks));
        }
        out.extend(std::iter::repeat_n(Class::Walk, 1000));
        out
    }

    #[test]
    fn default_geometry() {
        let s = CourseSpec::default_course();
        assert!((s.walking_time_s() - 191.0).abs() < 1e-9);
        assert!((s.npc_positions_m[0] - 19.790_575_916_230_37).abs() < 1e-9);
        assert!((s.step_m() - 0.549_738_219_895_288).abs() < 1e-12);
        assert_eq!(s.n_stops(), 10);
        s.validate().unwrap();
    }

    #[test]
    fn perfect_agent_scores_ten_in_211_seconds() {
        let s = CourseSpec::default_course();
        let r = run_states(&s, perfect_states(&s, 4), true).unwrap();
        assert_eq!(r.score, 10.0);
        assert!(r.finished());
        assert!((r.completion_time_s - 211.0).abs() < 1e-9, "{}", r.completion_time_s);
        assert_eq!(r.false_starts + r.false_stops, 0);
        let scored = r.log.iter().filter(|t| t.events.contains(&Event::StopScored)).count();
        assert_eq!(scored, 10);
        assert!(r.log.last().unwrap().events.contains(&Event::Finish));
    }

    #[test]
    fn competent_agent_absorbs_controller_lag() {
        let s = CourseSpec::default_course();
        for (ti, tw) in [(0.5, 0.5), (0.19, 0.45), (0.32, 0.87), (0.05, 0.95)] {
            let r = run_competent_agent(&s, Thresholds::new(ti, tw).unwrap(), false).unwrap();
            assert_eq!(r.score, 10.0, "({ti}, {tw})");
            assert!(r.finished());
            assert!(
                r.completion_time_s >= 211.0 && r.completion_time_s < 240.0,
                "{}",
                r.completion_time_s
            );
        }
    }

    #[test]
    fn never_walking_or_never_stopping() {
        let s = CourseSpec::default_course();
        let idle = run_states(&s, std::iter::repeat(Class::Idle), false).unwrap();
        assert_eq!(idle.censored, Some(CensorReason::TimeLimit));
        assert_eq!(idle.completion_time_s, 1200.0);
        assert_eq!(idle.score, 0.0);
        let walk = run_states(&s, std::iter::repeat(Class::Walk), false).unwrap();
        assert!(walk.finished());
        assert!((walk.completion_time_s - 191.0).abs() <= s.tick_s);
        assert_eq!(walk.score, 0.0);
    }

    #[test]
    fn tick_kinematics_and_finish_guard() {
        let s = CourseSpec::default_course();
        let mut sim = Simulator::new(s.clone()).unwrap();
        sim.tick(Class::Walk, None).unwrap();
        assert!((sim.position() - 0.5497).abs() < 1e-4);
        sim.tick(Class::Idle, None).unwrap();
        assert!((sim.position() - 0.5497).abs() < 1e-4);
        assert_eq!(sim.clock(), 1.0);
        let mut done = Simulator::new(s).unwrap();
        while !done.is_finished() {
            done.tick(Class::Walk, None).unwrap();
        }
        assert!(matches!(done.tick(Class::Walk, None), Err(Error::SimulationFinished)));
    }

    #[test]
    fn dwell_scoring_rule() {
        let s = CourseSpec::default_course();
        assert_eq!(s.score_dwell(2.0, true), 1.0);
        assert_eq!(s.score_dwell(1.0, true), 0.5);
        assert_eq!(s.score_dwell(0.4, true), 0.0);
        assert_eq!(s.score_dwell(5.0, true), 1.0);
        assert_eq!(s.score_dwell(2.0, false), 0.0);
        let r = run_states(&s, perfect_states(&s, 2), false).unwrap();
        assert!((r.score - 5.0).abs() < 1e-12);
    }

    #[test]
    fn best_episode_counts_once_per_zone() {
        let s = CourseSpec::default_course();
        let first = (s.npc_positions_m[0] / s.step_m()).round() as usize;
        let mut states = vec![Class::Walk; first - 2];
        states.extend([
            Class::Idle,
            Class::Idle,
            Class::Walk,
            Class::Idle,
            Class::Idle,
            Class::Idle,
        ]);
        states.extend(std::iter::repeat_n(Class::Walk, 400));
        let r = run_states(&s, states, false).unwrap();
        assert!((r.zone_scores[0] - 0.75).abs() < 1e-12);
        assert!((r.score - 0.75).abs() < 1e-12);
    }

    #[test]
    fn constant_walk_posterior_passes_through() {
        let s = CourseSpec::default_course();
        let th = Thresholds::new(0.3, 0.8).unwrap();
        let r = run_session(&s, th, &mut TraceSource::new(vec![1.0; 1000]), false).unwrap();
        assert!(r.finished());
        assert!((r.completion_time_s - 191.0).abs() <= s.tick_s);
        assert_eq!(r.score, 0.0);
        let short = run_session(&s, th, &mut TraceSource::new(vec![1.0; 10]), false).unwrap();
        assert_eq!(short.censored, Some(CensorReason::SourceExhausted));
    }

    #[test]
    fn log_output_has_header_rows_and_footer() {
        let s = CourseSpec::default_course();
        let r = run_states(&s, perfect_states(&s, 4), true).unwrap();
        let mut buf = Vec::new();
        write_session_log(&mut buf, &r, Some(Thresholds::map_rule()), Some((0.0, 0.0))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[2], "tick,clock_s,p_bar,state,position_m,zone_id,event");
        assert_eq!(lines.len(), 3 + r.log.len() + 1);
        assert!(lines.last().unwrap().starts_with("# score=10.0000 time_s=211.0"));
    }

    proptest! {
        #[test]
        fn timeline_and_kinematics_invariants(walks in prop::collection::vec(prop::bool::weighted(0.6), 0..3000)) {
            let s = CourseSpec::default_course();
            let states = walks.iter().map(|&w| if w { Class::Walk } else { Class::Idle });
            let r = run_states(&s, states, true).unwrap();
            prop_assert!(r.score >= 0.0 && r.score <= 10.0);
            prop_assert!((r.final_position_m - (r.walk_ticks as f64 * s.step_m()).min(s.course_length_m)).abs() < 1e-9);
            if r.finished() {
                prop_assert!(r.completion_time_s >= 191.0 - s.tick_s);
            }
            prop_assert!(r.productive_s() >= -1e-9);
            let mut last = 0.0;
            for t in &r.log {
                prop_assert!(t.position_m >= last);
                last = t.position_m;
            }
        }
    }
}
