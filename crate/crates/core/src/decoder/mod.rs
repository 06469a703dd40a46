//! Subject-specific decoding model: classwise PCA, a discriminant per class
//! subspace, and Gaussian Bayes posteriors on the resulting 1-D features.

mod band;
mod bayes;
mod cpca;
mod cv;
mod discriminant;
mod io;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

pub use band::{optimize_band, restrict_all, BandSearch, BandStep};
pub use bayes::{fuse_posteriors, Gaussian1, GaussianBayes, VARIANCE_FLOOR};
pub use cpca::{fit_cpca, ClassSubspace, CpcaMap, DEFAULT_VARIANCE_KEEP};
pub use cv::{binomial_upper_tail, cross_validate, stratified_folds, CvConfig, CvReport};
pub use discriminant::{fit_discriminant, Discriminant, DiscriminantMethod, Lda};
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};

use crate::error::{Error, Result};
use crate::sigproc::{FrequencyBand, SpectralTrial};
use crate::Class;

use cpca::trial_vector;

#[derive(Clone)]
pub struct FitOptions {
    pub variance_keep: f64,
    pub discriminant: Arc<dyn Discriminant>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            variance_keep: DEFAULT_VARIANCE_KEEP,
            discriminant: Arc::new(Lda),
        }
    }
}

impl fmt::Debug for FitOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FitOptions")
            .field("variance_keep", &self.variance_keep)
            .field("discriminant", &self.discriminant.method())
            .finish()
    }
}

/// Unit-norm weights per class subspace, indexed by [`Class::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantMap {
    pub method: DiscriminantMethod,
    pub weights: [DVector<f64>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodingModel {
    pub channels: Vec<String>,
    pub band: FrequencyBand,
    pub cpca: CpcaMap,
    pub discriminant: DiscriminantMap,
    pub bayes: GaussianBayes,
    pub cv: Option<CvReport>,
}

fn check_training_shape(trials: &[SpectralTrial]) -> Result<()> {
    let first = trials
        .first()
        .ok_or_else(|| Error::TooFewTrials("no training trials".into()))?;
    for t in trials {
        if t.n_channels != first.n_channels || t.bin_centers != first.bin_centers {
            return Err(Error::ShapeMismatch {
                expected: format!("{} bins x {} channels", first.n_bins(), first.n_channels),
                actual: format!("{} bins x {} channels", t.n_bins(), t.n_channels),
            });
        }
        if t.label.is_none() {
            return Err(Error::invalid("training trial without a class label"));
        }
    }
    Ok(())
}

fn band_of(trial: &SpectralTrial) -> Result<FrequencyBand> {
    let lo = *trial
        .bin_centers
        .first()
        .ok_or_else(|| Error::invalid("trial has no bins"))?;
    let hi = *trial.bin_centers.last().expect("nonempty");
    let band = FrequencyBand::new(lo, hi)?;
    if band.n_bins() != trial.n_bins() {
        return Err(Error::invalid("trial bins are not a contiguous band"));
    }
    Ok(band)
}

/// Fits discriminants and class densities on top of a given subspace map.
pub fn fit_with_map(
    trials: &[SpectralTrial],
    cpca: CpcaMap,
    channels: Vec<String>,
    opts: &FitOptions,
) -> Result<DecodingModel> {
    check_training_shape(trials)?;
    if cpca.dim() != trials[0].dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("dimension {}", cpca.dim()),
            actual: format!("{}", trials[0].dim()),
        });
    }
    let band = band_of(&trials[0])?;
    let vectors: Vec<(Class, DVector<f64>)> = trials
        .iter()
        .map(|t| (t.label.expect("checked"), trial_vector(t)))
        .collect();
    let n_walk = vectors.iter().filter(|(c, _)| *c == Class::Walk).count();
    let n_idle = vectors.len() - n_walk;
    if n_walk == 0 || n_idle == 0 {
        return Err(Error::TooFewTrials("both classes are required".into()));
    }

    let mut weights = Vec::with_capacity(2);
    let mut densities = Vec::with_capacity(2);
    for sub in &cpca.subspaces {
        let mut proj: [Vec<DVector<f64>>; 2] = [Vec::new(), Vec::new()];
        for (c, x) in &vectors {
            proj[c.index()].push(sub.project(x));
        }
        let w = opts.discriminant.fit(&proj[0], &proj[1])?;
        let feats = |k: usize| proj[k].iter().map(|z| w.dot(z)).collect::<Vec<_>>();
        densities.push([Gaussian1::fit(&feats(0))?, Gaussian1::fit(&feats(1))?]);
        weights.push(w);
    }
    let total = vectors.len() as f64;
    let bayes = GaussianBayes {
        densities: [densities[0], densities[1]],
        priors: [n_idle as f64 / total, n_walk as f64 / total],
    };
    let w_walk = weights.pop().expect("two subspaces");
    let w_idle = weights.pop().expect("two subspaces");
    Ok(DecodingModel {
        channels,
        band,
        cpca,
        discriminant: DiscriminantMap {
            method: opts.discriminant.method(),
            weights: [w_idle, w_walk],
        },
        bayes,
        cv: None,
    })
}

/// Full fit: classwise PCA, then discriminants and densities.
pub fn fit_model(trials: &[SpectralTrial], channels: Vec<String>, opts: &FitOptions) -> Result<DecodingModel> {
    check_training_shape(trials)?;
    let cpca = fit_cpca(trials, opts.variance_keep)?;
    fit_with_map(trials, cpca, channels, opts)
}

impl DecodingModel {
    pub fn dim(&self) -> usize {
        self.cpca.dim()
    }

    fn check_trial(&self, trial: &SpectralTrial) -> Result<()> {
        let centers: Vec<u32> = self.band.centers().collect();
        if trial.n_channels != self.channels.len() || trial.bin_centers != centers {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "{} bins ({}) x {} channels",
                    centers.len(),
                    self.band,
                    self.channels.len()
                ),
                actual: format!("{} bins x {} channels", trial.n_bins(), trial.n_channels),
            });
        }
        Ok(())
    }

    /// One feature per class subspace: `w_h . (B_h^T (vec(d) - m_h))`.
    pub fn extract_feature(&self, trial: &SpectralTrial) -> Result<[f64; 2]> {
        self.check_trial(trial)?;
        let x = trial_vector(trial);
        Ok(self.features_of(&x))
    }

    fn features_of(&self, x: &DVector<f64>) -> [f64; 2] {
        let f = |k: usize| {
            let sub = &self.cpca.subspaces[k];
            self.discriminant.weights[k].dot(&sub.project(x))
        };
        [f(0), f(1)]
    }

    /// Posterior of the walk class in each subspace.
    pub fn subspace_posteriors(&self, trial: &SpectralTrial) -> Result<[f64; 2]> {
        let f = self.extract_feature(trial)?;
        Ok([self.bayes.posterior_walk(0, f[0]), self.bayes.posterior_walk(1, f[1])])
    }

    /// P(W | d).
    pub fn posterior(&self, trial: &SpectralTrial) -> Result<f64> {
        Ok(fuse_posteriors(self.subspace_posteriors(trial)?))
    }

    /// MAP decision; ties go to idle.
    pub fn classify_map(&self, trial: &SpectralTrial) -> Result<Class> {
        Ok(map_decision(self.posterior(trial)?))
    }
}

pub fn map_decision(p_walk: f64) -> Class {
    if p_walk > 0.5 {
        Class::Walk
    } else {
        Class::Idle
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn gaussian_trials(n_per_class: usize, dim: usize, separation: f64, seed: u64) -> Vec<SpectralTrial> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in 0..2 * n_per_class {
            let class = if i % 2 == 0 { Class::Idle } else { Class::Walk };
            let shift = if class == Class::Walk { separation } else { 0.0 };
            let powers = (0..dim)
                .map(|j| 100.0 + if j == 0 { shift } else { 0.0 } + rng.sample::<f64, _>(StandardNormal))
                .collect();
            out.push(SpectralTrial {
                powers,
                n_channels: 1,
                bin_centers: (0..dim as u32).map(|b| 2 * b + 1).collect(),
                label: Some(class),
            });
        }
        out
    }

    #[test]
    fn two_features_and_centered_projection() {
        let trials = gaussian_trials(30, 4, 3.0, 1);
        let model = fit_model(&trials, vec!["c".into()], &FitOptions::default()).unwrap();
        let f = model.extract_feature(&trials[0]).unwrap();
        assert_eq!(f.len(), 2);
        for k in 0..2 {
            let mean = model.cpca.subspaces[k].mean.as_slice().to_vec();
            let t = SpectralTrial {
                powers: mean,
                ..trials[0].clone()
            };
            assert!(model.extract_feature(&t).unwrap()[k].abs() < 1e-9);
        }
    }

    #[test]
    fn feature_map_is_affine() {
        let trials = gaussian_trials(30, 4, 3.0, 2);
        let model = fit_model(&trials, vec!["c".into()], &FitOptions::default()).unwrap();
        let (a, b) = (1.7, -0.4);
        let x1 = trial_vector(&trials[0]);
        let x2 = trial_vector(&trials[1]);
        let zero = model.features_of(&DVector::zeros(4));
        let f1 = model.features_of(&x1);
        let f2 = model.features_of(&x2);
        let fc = model.features_of(&(&x1 * a + &x2 * b));
        for k in 0..2 {
            // f(a x1 + b x2) - f(0) = a (f(x1) - f(0)) + b (f(x2) - f(0))
            let lhs = fc[k] - zero[k];
            let rhs = a * (f1[k] - zero[k]) + b * (f2[k] - zero[k]);
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn separable_walk_mean_has_high_posterior() {
        let trials = gaussian_trials(40, 3, 12.0, 3);
        let model = fit_model(&trials, vec!["c".into()], &FitOptions::default()).unwrap();
        let walk: Vec<&SpectralTrial> = trials.iter().filter(|t| t.label == Some(Class::Walk)).collect();
        let mut mean = vec![0.0; 3];
        for t in &walk {
            for (m, p) in mean.iter_mut().zip(&t.powers) {
                *m += p / walk.len() as f64;
            }
        }
        let t = SpectralTrial {
            powers: mean,
            ..trials[0].clone()
        };
        assert!(model.posterior(&t).unwrap() > 0.95);
        assert_eq!(model.classify_map(&t).unwrap(), Class::Walk);
    }

    #[test]
    fn tie_goes_to_idle() {
        assert_eq!(map_decision(0.5), Class::Idle);
        assert_eq!(map_decision(0.7), Class::Walk);
        assert_eq!(map_decision(0.2), Class::Idle);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let trials = gaussian_trials(10, 3, 5.0, 4);
        let model = fit_model(&trials, vec!["c".into()], &FitOptions::default()).unwrap();
        let wrong = SpectralTrial {
            powers: vec![1.0; 4],
            n_channels: 1,
            bin_centers: vec![1, 3, 5, 7],
            label: None,
        };
        assert!(matches!(model.posterior(&wrong), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn complement_and_range_on_random_trials() {
        let trials = gaussian_trials(25, 5, 2.0, 5);
        let model = fit_model(&trials, vec!["c".into()], &FitOptions::default()).unwrap();
        for t in gaussian_trials(20, 5, 1.0, 99) {
            let p = model.posterior(&t).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(p + (1.0 - p), 1.0);
        }
    }

    #[test]
    fn amplitude_scaling_preserves_decisions() {
        let trials = gaussian_trials(30, 4, 1.5, 6);
        let test = gaussian_trials(30, 4, 1.5, 60);
        let scale = |ts: &[SpectralTrial], k: f64| -> Vec<SpectralTrial> {
            ts.iter()
                .map(|t| SpectralTrial {
                    powers: t.powers.iter().map(|p| p * k).collect(),
                    ..t.clone()
                })
                .collect()
        };
        let opts = FitOptions::default();
        let base = fit_model(&trials, vec!["c".into()], &opts).unwrap();
        for k in [1e-3, 7.5, 1e4] {
            let scaled = fit_model(&scale(&trials, k), vec!["c".into()], &opts).unwrap();
            for (t, ts) in test.iter().zip(scale(&test, k)) {
                assert_eq!(base.classify_map(t).unwrap(), scaled.classify_map(&ts).unwrap());
            }
        }
    }

    // Brute-force oracle: with both subspaces forced to the identity basis the
    // pipeline reduces to Fisher LDA plus 1-D Gaussian Bayes. The oracle solves
    // the 2x2 system by Cramer's rule.
    #[test]
    fn shared_subspace_equals_plain_lda() {
        let trials = gaussian_trials(50, 2, 1.2, 8);
        let map = CpcaMap::shared(DVector::zeros(2), DMatrix::identity(2, 2));
        let model = fit_with_map(&trials, map, vec!["c".into()], &FitOptions::default()).unwrap();

        let class_pts = |c: Class| -> Vec<[f64; 2]> {
            trials
                .iter()
                .filter(|t| t.label == Some(c))
                .map(|t| [t.powers[0], t.powers[1]])
                .collect()
        };
        let (pi, pw) = (class_pts(Class::Idle), class_pts(Class::Walk));
        let mean = |p: &[[f64; 2]]| {
            let n = p.len() as f64;
            [
                p.iter().map(|x| x[0]).sum::<f64>() / n,
                p.iter().map(|x| x[1]).sum::<f64>() / n,
            ]
        };
        let (mi, mw) = (mean(&pi), mean(&pw));
        let mut s = [[0.0; 2]; 2];
        for (pts, m) in [(&pi, mi), (&pw, mw)] {
            for x in pts.iter() {
                for a in 0..2 {
                    for b in 0..2 {
                        s[a][b] += (x[a] - m[a]) * (x[b] - m[b]);
                    }
                }
            }
        }
        let dof = (pi.len() + pw.len() - 2) as f64;
        let ridge = 1e-6 * (s[0][0] + s[1][1]) / dof / 2.0;
        let (a, b, c, d) = (
            s[0][0] / dof + ridge,
            s[0][1] / dof,
            s[1][0] / dof,
            s[1][1] / dof + ridge,
        );
        let det = a * d - b * c;
        let diff = [mw[0] - mi[0], mw[1] - mi[1]];
        let w = [(d * diff[0] - b * diff[1]) / det, (-c * diff[0] + a * diff[1]) / det];
        let nrm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        let w = [w[0] / nrm, w[1] / nrm];
        let proj = |p: &[[f64; 2]]| p.iter().map(|x| w[0] * x[0] + w[1] * x[1]).collect::<Vec<_>>();
        let stats = |f: &[f64]| {
            let n = f.len() as f64;
            let m = f.iter().sum::<f64>() / n;
            (m, f.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
        };
        let (gi, gw) = (stats(&proj(&pi)), stats(&proj(&pw)));
        let ll = |g: (f64, f64), f: f64| -0.5 * ((f - g.0).powi(2) / g.1 + g.1.ln());

        for t in gaussian_trials(200, 2, 1.2, 80) {
            let f = w[0] * t.powers[0] + w[1] * t.powers[1];
            let oracle = if ll(gw, f) > ll(gi, f) {
                Class::Walk
            } else {
                Class::Idle
            };
            assert_eq!(model.classify_map(&t).unwrap(), oracle);
        }
    }
}
