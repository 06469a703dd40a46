//! Greedy frequency-band search: raise the lower edge in 2-Hz steps while
//! CV accuracy strictly improves, then lower the upper edge the same way.

use crate::error::{Error, Result};
use crate::sigproc::{restrict_band, FrequencyBand, SpectralTrial};

use super::{cross_validate, fit_model, CvConfig, CvReport, DecodingModel, FitOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct BandStep {
    pub band: FrequencyBand,
    pub accuracy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct BandSearch {
    pub band: FrequencyBand,
    pub report: CvReport,
    pub model: DecodingModel,
    /// Every candidate evaluated, in order.
    pub path: Vec<BandStep>,
}

pub fn restrict_all(trials: &[SpectralTrial], band: FrequencyBand) -> Result<Vec<SpectralTrial>> {
    trials.iter().map(|t| restrict_band(t, band)).collect()
}

pub fn optimize_band(
    trials: &[SpectralTrial],
    channels: Vec<String>,
    opts: &FitOptions,
    cv: &CvConfig,
) -> Result<BandSearch> {
    let first = trials.first().ok_or_else(|| Error::TooFewTrials("no trials".into()))?;
    let lo = *first
        .bin_centers
        .first()
        .ok_or_else(|| Error::invalid("trial has no bins"))?;
    let hi = *first.bin_centers.last().expect("nonempty");
    let initial = FrequencyBand::new(lo, hi)?;

    let evaluate = |band: FrequencyBand| -> Result<CvReport> { cross_validate(&restrict_all(trials, band)?, opts, cv) };

    let mut best_band = initial;
    let mut best = evaluate(initial)?;
    let mut path = vec![BandStep {
        band: initial,
        accuracy: best.mean_accuracy,
        accepted: true,
    }];

    // Raise F_L.
    while best_band.f_low + 2 <= best_band.f_high {
        let cand = FrequencyBand::new(best_band.f_low + 2, best_band.f_high)?;
        let report = evaluate(cand)?;
        let accepted = report.mean_accuracy > best.mean_accuracy;
        path.push(BandStep {
            band: cand,
            accuracy: report.mean_accuracy,
            accepted,
        });
        if !accepted {
            break;
        }
        best_band = cand;
        best = report;
    }
    // Lower F_H.
    while best_band.f_high >= best_band.f_low + 2 {
        let cand = FrequencyBand::new(best_band.f_low, best_band.f_high - 2)?;
        let report = evaluate(cand)?;
        let accepted = report.mean_accuracy > best.mean_accuracy;
        path.push(BandStep {
            band: cand,
            accuracy: report.mean_accuracy,
            accepted,
        });
        if !accepted {
            break;
        }
        best_band = cand;
        best = report;
    }

    let mut model = fit_model(&restrict_all(trials, best_band)?, channels, opts)?;
    model.cv = Some(best.clone());
    Ok(BandSearch {
        band: best_band,
        report: best,
        model,
        path,
    })
}
