//! Gaussian class-conditional densities of the 1-D features and the Bayes
//! posterior of the walk class.

use crate::error::{Error, Result};
use crate::Class;

pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1 {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian1 {
    pub fn fit(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::TooFewTrials("gaussian fit needs samples".into()));
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Gaussian1 {
            mean,
            var: var.max(VARIANCE_FLOOR),
        })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        -0.5 * ((x - self.mean).powi(2) / self.var + self.var.ln() + std::f64::consts::TAU.ln())
    }
}

/// Per-subspace class densities (`densities[subspace][class]`) and priors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBayes {
    pub densities: [[Gaussian1; 2]; 2],
    pub priors: [f64; 2],
}

impl GaussianBayes {
    pub fn prior(&self, class: Class) -> f64 {
        self.priors[class.index()]
    }

    /// P(W | f) in one subspace.
    pub fn posterior_walk(&self, subspace: usize, f: f64) -> f64 {
        let [idle, walk] = &self.densities[subspace];
        let li = self.priors[0].ln() + idle.log_pdf(f);
        let lw = self.priors[1].ln() + walk.log_pdf(f);
        // Logistic of the log-odds; stable for large |lw - li|.
        let d = li - lw;
        if d >= 0.0 {
            let e = (-d).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + d.exp())
        }
    }
}

/// Equal-weight mixture of the per-subspace posteriors.
pub fn fuse_posteriors(per_subspace: [f64; 2]) -> f64 {
    0.5 * (per_subspace[0] + per_subspace[1])
}
