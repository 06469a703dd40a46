//! Random-walk controls, Parzen density estimates and the statistics used to
//! compare online performance against chance.

mod kde;
mod random_walk;
mod stats;

pub use kde::{
    fit_parzen, hdr_p_value, mc_p_value, member_p_values, silverman_bandwidth, Bandwidth, HdrP, KdeConfig, Pdf2D,
    MAX_CENSORED_FRACTION,
};
pub use random_walk::{
    random_walk_session, random_walk_with, read_ensemble_csv, run_ensemble, run_ensemble_with, write_ensemble_csv,
    EnsembleSummary, RandomWalkEnsemble, DEFAULT_RW_HORIZON,
};
pub use stats::{correlate, ks_uniform, regress_offline_on_online, Correlation, KsTest, Regression};

use std::fmt;
use std::str::FromStr;

use crate::course::SessionResult;
use crate::error::{Error, Result};

/// One session's (successful stops, completion time) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformancePoint {
    pub stops: f64,
    pub time_s: f64,
    pub censored: bool,
}

impl PerformancePoint {
    pub fn new(stops: f64, time_s: f64) -> Result<Self> {
        if !(stops.is_finite() && time_s.is_finite()) {
            return Err(Error::invalid("performance values must be finite"));
        }
        if stops < 0.0 {
            return Err(Error::invalid(format!("negative stop score {stops}")));
        }
        if time_s <= 0.0 {
            return Err(Error::invalid(format!("completion time {time_s} must be positive")));
        }
        Ok(PerformancePoint {
            stops,
            time_s,
            censored: false,
        })
    }
}

impl From<&SessionResult> for PerformancePoint {
    fn from(r: &SessionResult) -> Self {
        PerformancePoint {
            stops: r.score,
            time_s: r.completion_time_s,
            censored: !r.finished(),
        }
    }
}

/// Parses `stops,time_s`.
impl FromStr for PerformancePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::format(format!("expected `stops,time`, got `{s}`")))?;
        let stops: f64 = a
            .trim()
            .parse()
            .map_err(|_| Error::format(format!("bad stop score `{}`", a.trim())))?;
        let time: f64 = b
            .trim()
            .parse()
            .map_err(|_| Error::format(format!("bad completion time `{}`", b.trim())))?;
        PerformancePoint::new(stops, time).map_err(|e| Error::format(e.to_string()))
    }
}

impl fmt::Display for PerformancePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.stops, self.time_s)
    }
}
