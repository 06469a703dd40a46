//! Repeated stratified k-fold cross-validation of the full fit.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::sigproc::SpectralTrial;
use crate::Class;

use super::{fit_model, FitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvConfig {
    pub runs: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            runs: 10,
            folds: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub mean_accuracy: f64,
    /// Sample standard deviation of the per-run accuracies.
    pub std_accuracy: f64,
    pub run_accuracies: Vec<f64>,
    /// `runs x folds`, run-major.
    pub fold_accuracies: Vec<f64>,
    /// Exact binomial upper tail against chance 0.5.
    pub p_value: f64,
    pub n_trials: usize,
    pub runs: usize,
    pub folds: usize,
    pub seed: u64,
}

/// P(X >= k) for X ~ Binomial(n, 1/2), summed in log space so that tails far
/// below machine epsilon stay accurate.
pub fn binomial_upper_tail(k: u64, n: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    let terms: Vec<f64> = (k..=n).map(|j| ln_binomial(n, j) + ln_half_n).collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

/// Assigns every trial to a fold so that each class is spread evenly:
/// returns `fold_of[trial]`.
pub fn stratified_folds(labels: &[Class], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut fold_of = vec![0; labels.len()];
    let mut offset = 0;
    for class in Class::BOTH {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = (pos + offset) % folds;
        }
        // Continue the round-robin so that odd class counts do not pile the
        // remainder of both classes into the same folds.
        offset = (offset + idx.len()) % folds;
    }
    fold_of
}

fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn evaluate_run(
    trials: &[SpectralTrial],
    labels: &[Class],
    opts: &FitOptions,
    cfg: &CvConfig,
    run: usize,
) -> Result<(usize, Vec<f64>)> {
    let mut rng = run_rng(cfg.seed, run);
    let fold_of = stratified_folds(labels, cfg.folds, &mut rng);
    let names: Vec<String> = (0..trials[0].n_channels).map(|c| format!("ch{c}")).collect();
    let mut correct_total = 0;
    let mut fold_acc = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        let train: Vec<SpectralTrial> = trials
            .iter()
            .zip(&fold_of)
            .filter(|(_, f)| **f != fold)
            .map(|(t, _)| t.clone())
            .collect();
        let model = fit_model(&train, names.clone(), opts)?;
        let mut correct = 0;
        let mut count = 0;
        for (t, _) in trials.iter().zip(&fold_of).filter(|(_, f)| **f == fold) {
            count += 1;
            if model.classify_map(&t.clone().with_label(None))? == t.label.expect("labelled") {
                correct += 1;
            }
        }
        correct_total += correct;
        fold_acc.push(if count > 0 { correct as f64 / count as f64 } else { 0.0 });
    }
    Ok((correct_total, fold_acc))
}

/// `runs` repetitions of stratified `folds`-fold CV, refitting the whole
/// model inside every fold.
pub fn cross_validate(trials: &[SpectralTrial], opts: &FitOptions, cfg: &CvConfig) -> Result<CvReport> {
    if cfg.runs == 0 || cfg.folds < 2 {
        return Err(Error::invalid("cross-validation needs runs >= 1 and folds >= 2"));
    }
    let labels: Vec<Class> = trials
        .iter()
        .map(|t| {
            t.label
                .ok_or_else(|| Error::invalid("unlabelled trial in cross-validation"))
        })
        .collect::<Result<_>>()?;
    for class in Class::BOTH {
        let n = labels.iter().filter(|&&c| c == class).count();
        if n < cfg.folds {
            return Err(Error::TooFewTrials(format!(
                "{class} class has {n} trials, need at least {} for {}-fold CV",
                cfg.folds, cfg.folds
            )));
        }
    }
    let results: Vec<(usize, Vec<f64>)> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| evaluate_run(trials, &labels, opts, cfg, run))
        .collect::<Result<_>>()?;

    let n = trials.len();
    let run_accuracies: Vec<f64> = results.iter().map(|(c, _)| *c as f64 / n as f64).collect();
    let mean_accuracy = run_accuracies.iter().sum::<f64>() / cfg.runs as f64;
    let std_accuracy = if cfg.runs > 1 {
        (run_accuracies.iter().map(|a| (a - mean_accuracy).powi(2)).sum::<f64>() / (cfg.runs - 1) as f64).sqrt()
    } else {
        0.0
    };
    let pooled_correct: usize = results.iter().map(|(c, _)| c).sum();
    let mean_correct = (pooled_correct as f64 / cfg.runs as f64).round() as u64;
    Ok(CvReport {
        mean_accuracy,
        std_accuracy,
        run_accuracies,
        fold_accuracies: results.into_iter().flat_map(|(_, f)| f).collect(),
        p_value: binomial_upper_tail(mean_correct, n as u64),
        n_trials: n,
        runs: cfg.runs,
        folds: cfg.folds,
        seed: cfg.seed,
    })
}
