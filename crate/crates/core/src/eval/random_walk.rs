use std::fmt;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::controller::{Controller, Thresholds, DEFAULT_SMOOTHING};
use crate::course::{CourseSpec, SessionResult, Simulator};
use crate::error::{Error, Result};

use super::PerformancePoint;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of uniform draws averaged into each tick's P̄, matching the online
/// smoother. A horizon of 1 feeds the draws to the thresholds directly.
pub const DEFAULT_RW_HORIZON: usize = DEFAULT_SMOOTHING;

/// Chance controller: each tick's posterior is drawn from U(0, 1) and passed
/// through a `horizon`-tick smoother and the hysteresis rule.
pub fn random_walk_with(
    thresholds: Thresholds,
    spec: &CourseSpec,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SessionResult> {
    let mut sim = Simulator::new(spec.clone())?;
    let mut ctrl = Controller::with_horizon(thresholds, horizon)?;
    while !sim.is_finished() {
        let d = ctrl.step(rng.random::<f64>())?;
        sim.tick(d.state, Some(d.p_bar))?;
    }
    Ok(sim.result())
}

pub fn random_walk_session(thresholds: Thresholds, spec: &CourseSpec, seed: u64) -> Result<SessionResult> {
    random_walk_with(thresholds, spec, DEFAULT_RW_HORIZON, &mut stream_rng(seed, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalkEnsemble {
    pub spec: CourseSpec,
    pub thresholds: Thresholds,
    pub horizon: usize,
    pub seed: u64,
    pub runs: Vec<SessionResult>,
}

pub fn run_ensemble(thresholds: Thresholds, spec: &CourseSpec, n: usize, seed: u64) -> Result<RandomWalkEnsemble> {
    run_ensemble_with(thresholds, spec, n, seed, DEFAULT_RW_HORIZON)
}

/// `n` independent random walks; run `i` uses ChaCha stream `i` of `seed`.
pub fn run_ensemble_with(
    thresholds: Thresholds,
    spec: &CourseSpec,
    n: usize,
    seed: u64,
    horizon: usize,
) -> Result<RandomWalkEnsemble> {
    if n == 0 {
        return Err(Error::invalid("ensemble needs at least one run"));
    }
    spec.validate()?;
    let runs = (0..n as u64)
        .into_par_iter()
        .map(|i| random_walk_with(thresholds, spec, horizon, &mut stream_rng(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomWalkEnsemble {
        spec: spec.clone(),
        thresholds,
        horizon,
        seed,
        runs,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSummary {
    pub n: usize,
    pub stops_mean: f64,
    pub stops_std: f64,
    /// Censored runs count at the time limit.
    pub time_mean: f64,
    pub time_std: f64,
    pub censored_fraction: f64,
    pub time_limit_s: f64,
}

impl RandomWalkEnsemble {
    pub fn points(&self) -> Vec<PerformancePoint> {
        self.runs.iter().map(PerformancePoint::from).collect()
    }

    pub fn summary(&self) -> EnsembleSummary {
        let stops: Vec<f64> = self.runs.iter().map(|r| r.score).collect();
        let times: Vec<f64> = self.runs.iter().map(|r| r.completion_time_s).collect();
        let (stops_mean, stops_std) = mean_std(&stops);
        let (time_mean, time_std) = mean_std(&times);
        let censored = self.runs.iter().filter(|r| !r.finished()).count();
        EnsembleSummary {
            n: self.runs.len(),
            stops_mean,
            stops_std,
            time_mean,
            time_std,
            censored_fraction: censored as f64 / self.runs.len() as f64,
            time_limit_s: self.spec.time_limit_s,
        }
    }
}

impl EnsembleSummary {
    /// Completion time as `mean ± std`, or `> limit` when most runs hit it.
    pub fn time_cell(&self) -> String {
        if self.censored_fraction > 0.5 {
            format!("> {:.0}", self.time_limit_s)
        } else {
            format!("{:.1} ± {:.1}", self.time_mean, self.time_std)
        }
    }

    pub fn stops_cell(&self) -> String {
        format!("{:.2} ± {:.2}", self.stops_mean, self.stops_std)
    }
}

impl fmt::Display for EnsembleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "time {} s, stops {} ({} runs, {:.1}% censored)",
            self.time_cell(),
            self.stops_cell(),
            self.n,
            100.0 * self.censored_fraction
        )
    }
}

pub fn write_ensemble_csv(out: &mut dyn Write, ensemble: &RandomWalkEnsemble) -> Result<()> {
    writeln!(out, "run,stops,time_s,censored")?;
    for (i, r) in ensemble.runs.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            i,
            r.score,
            r.completion_time_s,
            u8::from(!r.finished())
        )?;
    }
    Ok(())
}

/// Reads the `run,stops,time_s,censored` table back as performance points.
pub fn read_ensemble_csv(input: impl Read) -> Result<Vec<PerformancePoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::format(e.to_string()))?.clone();
    let expected = ["run", "stops", "time_s", "censored"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::format("ensemble header must be run,stops,time_s,censored"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(e.to_string()))?;
        let field = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| Error::format(format!("row {}: bad value `{}`", i + 1, &rec[k])))
        };
        let mut p = PerformancePoint::new(field(1)?, field(2)?).map_err(|e| Error::format(e.to_string()))?;
        p.censored = match &rec[3] {
            "0" => false,
            "1" => true,
            other => return Err(Error::format(format!("row {}: censored flag `{other}`", i + 1))),
        };
        out.push(p);
    }
    Ok(out)
}
