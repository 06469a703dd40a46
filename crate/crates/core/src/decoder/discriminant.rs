//! One-dimensional discriminant projections within a class subspace.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscriminantMethod {
    Lda,
    /// Reserved for an externally supplied information-discriminant plug-in.
    Aida,
}

impl DiscriminantMethod {
    pub fn code(self) -> u8 {
        match self {
            DiscriminantMethod::Lda => 0,
            DiscriminantMethod::Aida => 1,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(DiscriminantMethod::Lda),
            1 => Ok(DiscriminantMethod::Aida),
            _ => Err(Error::format(format!("unknown discriminant method {c}"))),
        }
    }
}

impl fmt::Display for DiscriminantMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscriminantMethod::Lda => "LDA",
            DiscriminantMethod::Aida => "AIDA",
        })
    }
}

/// A rule reducing projected class samples to a single unit-norm direction,
/// oriented so that larger values point towards the walk class.
pub trait Discriminant: Send + Sync {
    fn method(&self) -> DiscriminantMethod;

    fn fit(&self, idle: &[DVector<f64>], walk: &[DVector<f64>]) -> Result<DVector<f64>>;
}

const RIDGE_SCALE: f64 = 1e-6;

/// Fisher's discriminant with a small trace-scaled ridge.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lda;

fn mean(xs: &[DVector<f64>]) -> DVector<f64> {
    let mut m = DVector::zeros(xs[0].len());
    for x in xs {
        m += x;
    }
    m / xs.len() as f64
}

fn scatter(xs: &[DVector<f64>], m: &DVector<f64>) -> DMatrix<f64> {
    let d = m.len();
    let mut s = DMatrix::zeros(d, d);
    for x in xs {
        let c = x - m;
        s.ger(1.0, &c, &c, 1.0);
    }
    s
}

impl Discriminant for Lda {
    fn method(&self) -> DiscriminantMethod {
        DiscriminantMethod::Lda
    }

    fn fit(&self, idle: &[DVector<f64>], walk: &[DVector<f64>]) -> Result<DVector<f64>> {
        if idle.is_empty() || walk.is_empty() {
            return Err(Error::TooFewTrials("discriminant needs both classes".into()));
        }
        let dim = idle[0].len();
        if idle.iter().chain(walk).any(|x| x.len() != dim) {
            return Err(Error::invalid("discriminant inputs differ in dimension"));
        }
        let (mi, mw) = (mean(idle), mean(walk));
        let diff = &mw - &mi;
        let scale = mi.norm() + mw.norm();
        if !(diff.norm() > 1e-12 * scale) {
            return Err(Error::DegenerateDiscriminant);
        }
        let dof = (idle.len() + walk.len()).saturating_sub(2).max(1) as f64;
        let mut pooled = (scatter(idle, &mi) + scatter(walk, &mw)) / dof;
        let trace = pooled.trace();
        let ridge = if trace > 0.0 {
            RIDGE_SCALE * trace / dim as f64
        } else {
            1.0
        };
        for i in 0..dim {
            pooled[(i, i)] += ridge;
        }
        let w = match pooled.clone().cholesky() {
            Some(ch) => ch.solve(&diff),
            None => pooled
                .lu()
                .solve(&diff)
                .ok_or_else(|| Error::invalid("pooled covariance is singular"))?,
        };
        let norm = w.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateDiscriminant);
        }
        let mut w = w / norm;
        if w.dot(&diff) < 0.0 {
            w.neg_mut();
        }
        Ok(w)
    }
}

pub fn fit_discriminant(
    idle: &[DVector<f64>],
    walk: &[DVector<f64>],
    method: &dyn Discriminant,
) -> Result<DVector<f64>> {
    method.fit(idle, walk)
}
