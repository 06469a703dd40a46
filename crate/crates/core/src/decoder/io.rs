//! `KMM1` model container.
//!
//! Little-endian: magic `KMM1`, `u32` version, channel names, band centres,
//! discriminant method, both class subspaces (mean, basis, weights), the four
//! Gaussian densities, priors, and an optional CV report. All reals are
//! stored as `f64` so a save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::sigproc::FrequencyBand;
use crate::Class;

use super::{
    ClassSubspace, CpcaMap, CvReport, DecodingModel, DiscriminantMap, DiscriminantMethod, Gaussian1, GaussianBayes,
};

pub const MODEL_MAGIC: &[u8; 4] = b"KMM1";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(m: &DecodingModel) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.len_u32(m.channels.len());
    for c in &m.channels {
        w.string(c);
    }
    w.u32(m.band.f_low);
    w.u32(m.band.f_high);
    w.u8(m.discriminant.method.code());
    w.len_u32(m.cpca.dim());
    for (sub, weights) in m.cpca.subspaces.iter().zip(&m.discriminant.weights) {
        w.f64_slice(sub.mean.as_slice());
        w.len_u32(sub.basis.ncols());
        for v in sub.basis.iter() {
            w.f64(*v);
        }
        w.f64_slice(weights.as_slice());
    }
    for sub in &m.bayes.densities {
        for g in sub {
            w.f64(g.mean);
            w.f64(g.var);
        }
    }
    w.f64(m.bayes.priors[0]);
    w.f64(m.bayes.priors[1]);
    match &m.cv {
        None => w.u8(0),
        Some(cv) => {
            w.u8(1);
            w.f64(cv.mean_accuracy);
            w.f64(cv.std_accuracy);
            w.f64(cv.p_value);
            w.u64(cv.n_trials as u64);
            w.u64(cv.runs as u64);
            w.u64(cv.folds as u64);
            w.u64(cv.seed);
            w.f64_slice(&cv.run_accuracies);
            w.f64_slice(&cv.fold_accuracies);
        }
    }
    w.buf
}

fn usize_of(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::format("count overflow"))
}

pub fn decode_model(bytes: &[u8]) -> Result<DecodingModel> {
    let mut r = Reader::new(bytes);
    r.expect_magic(MODEL_MAGIC)?;
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::format(format!("unsupported model version {version}")));
    }
    let n_ch = r.count(4)?;
    let channels = (0..n_ch).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let band = FrequencyBand::new(r.u32()?, r.u32()?).map_err(|e| Error::format(e.to_string()))?;
    let method = DiscriminantMethod::from_code(r.u8()?)?;
    let dim = r.u32()? as usize;
    if dim != band.n_bins() * channels.len() {
        return Err(Error::format(format!(
            "model dimension {dim} inconsistent with {} bins x {} channels",
            band.n_bins(),
            channels.len()
        )));
    }

    let mut subs = Vec::with_capacity(2);
    let mut weights = Vec::with_capacity(2);
    for class in Class::BOTH {
        let mean = r.f64_vec()?;
        if mean.len() != dim {
            return Err(Error::format("subspace mean has wrong length"));
        }
        let m = r.u32()? as usize;
        let cells = m.checked_mul(dim).ok_or_else(|| Error::format("basis size overflow"))?;
        if m == 0 {
            return Err(Error::format("empty subspace basis"));
        }
        r.check_available(cells, 8)?;
        let data = (0..cells).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let w = r.f64_vec()?;
        if w.len() != m {
            return Err(Error::format("discriminant weights have wrong length"));
        }
        subs.push(ClassSubspace {
            class,
            mean: DVector::from_vec(mean),
            basis: DMatrix::from_vec(dim, m, data),
        });
        weights.push(DVector::from_vec(w));
    }
    let mut dens = [[Gaussian1 { mean: 0.0, var: 1.0 }; 2]; 2];
    for sub in dens.iter_mut() {
        for g in sub.iter_mut() {
            *g = Gaussian1 {
                mean: r.f64()?,
                var: r.f64()?,
            };
            if !(g.var > 0.0) {
                return Err(Error::format("nonpositive density variance"));
            }
        }
    }
    let priors = [r.f64()?, r.f64()?];
    if !(priors[0] > 0.0 && priors[1] > 0.0) {
        return Err(Error::format("priors must be positive"));
    }
    let cv = match r.u8()? {
        0 => None,
        1 => {
            let mean_accuracy = r.f64()?;
            let std_accuracy = r.f64()?;
            let p_value = r.f64()?;
            let n_trials = usize_of(r.u64()?)?;
            let runs = usize_of(r.u64()?)?;
            let folds = usize_of(r.u64()?)?;
            let seed = r.u64()?;
            let run_accuracies = r.f64_vec()?;
            let fold_accuracies = r.f64_vec()?;
            Some(CvReport {
                mean_accuracy,
                std_accuracy,
                run_accuracies,
                fold_accuracies,
                p_value,
                n_trials,
                runs,
                folds,
                seed,
            })
        }
        t => return Err(Error::format(format!("bad cv tag {t}"))),
    };
    r.finish()?;
    let walk = subs.pop().expect("two");
    let idle = subs.pop().expect("two");
    let w_walk = weights.pop().expect("two");
    let w_idle = weights.pop().expect("two");
    Ok(DecodingModel {
        channels,
        band,
        cpca: CpcaMap {
            subspaces: [idle, walk],
        },
        discriminant: DiscriminantMap {
            method,
            weights: [w_idle, w_walk],
        },
        bayes: GaussianBayes {
            densities: dens,
            priors,
        },
        cv,
    })
}

pub fn save_model(model: &DecodingModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DecodingModel> {
    decode_model(&fs::read(path)?)
}
