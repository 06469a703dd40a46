//! Classwise principal component analysis: one principal subspace per class,
//! together forming a piecewise linear map of the trial space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sigproc::SpectralTrial;
use crate::Class;

pub const DEFAULT_VARIANCE_KEEP: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSubspace {
    pub class: Class,
    pub mean: DVector<f64>,
    /// Orthonormal columns, `dim x m`.
    pub basis: DMatrix<f64>,
}

impl ClassSubspace {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `basis^T (x - mean)`
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(&(x - &self.mean))
    }
}

/// Indexed by [`Class::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct CpcaMap {
    pub subspaces: [ClassSubspace; 2],
}

impl CpcaMap {
    pub fn dim(&self) -> usize {
        self.subspaces[0].dim()
    }

    pub fn subspace(&self, class: Class) -> &ClassSubspace {
        &self.subspaces[class.index()]
    }

    /// Both "classwise" subspaces set to the same mean and basis.
    pub fn shared(mean: DVector<f64>, basis: DMatrix<f64>) -> Self {
        let sub = |class| ClassSubspace {
            class,
            mean: mean.clone(),
            basis: basis.clone(),
        };
        CpcaMap {
            subspaces: [sub(Class::Idle), sub(Class::Walk)],
        }
    }
}

pub(crate) fn trial_vector(t: &SpectralTrial) -> DVector<f64> {
    DVector::from_column_slice(&t.powers)
}

/// Rows of the returned matrix are the class's vectorised trials.
fn class_matrix(trials: &[&SpectralTrial]) -> DMatrix<f64> {
    let dim = trials[0].dim();
    DMatrix::from_fn(trials.len(), dim, |i, j| trials[i].powers[j])
}

fn fit_class(class: Class, trials: &[&SpectralTrial], variance_keep: f64) -> ClassSubspace {
    let n = trials.len();
    let dim = trials[0].dim();
    let x = class_matrix(trials);
    let mean = DVector::from_iterator(dim, x.column_iter().map(|c| c.mean()));
    let mut xc = x;
    for mut row in xc.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = (n - 1) as f64;

    // Eigen-decompose whichever of the covariance (dim x dim) or the Gram
    // matrix (n x n) is smaller; both share the nonzero spectrum.
    let (mut pairs, from_gram) = if dim <= n {
        let cov = xc.tr_mul(&xc) / denom;
        (eigen_pairs(cov), false)
    } else {
        let gram = &xc * xc.transpose() / denom;
        (eigen_pairs(gram), true)
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let total: f64 = pairs.iter().map(|p| p.0.max(0.0)).sum();
    let lambda_max = pairs.first().map_or(0.0, |p| p.0);
    if !(total > 0.0) || !(lambda_max > 0.0) {
        log::warn!("{class} class has zero variance; using an arbitrary unit basis");
        let mut basis = DMatrix::zeros(dim, 1);
        basis[(0, 0)] = 1.0;
        return ClassSubspace { class, mean, basis };
    }

    let numeric_rank = pairs.iter().filter(|p| p.0 > 1e-12 * lambda_max).count();
    let cap = numeric_rank.min(n - 1).min(dim).max(1);
    let mut kept = 0;
    let mut cum = 0.0;
    for p in pairs.iter().take(cap) {
        kept += 1;
        cum += p.0;
        if cum / total >= variance_keep - 1e-12 {
            break;
        }
    }

    let mut cols = Vec::with_capacity(kept);
    for (lambda, v) in pairs.into_iter().take(kept) {
        let col = if from_gram {
            xc.tr_mul(&v) / (lambda * denom).sqrt()
        } else {
            v
        };
        cols.push(col);
    }
    let raw = DMatrix::from_columns(&cols);
    // Re-orthonormalise; QR keeps the spanned subspace and column order.
    let q = raw.clone().qr().q();
    let mut basis = q.columns(0, kept).into_owned();
    for (j, col) in raw.column_iter().enumerate() {
        if basis.column(j).dot(&col) < 0.0 {
            basis.column_mut(j).neg_mut();
        }
    }
    ClassSubspace { class, mean, basis }
}

fn eigen_pairs(m: DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| (l, v.into_owned()))
        .collect()
}

/// Fits one principal subspace per class keeping the smallest number of
/// components whose eigenvalues reach `variance_keep` of the class variance,
/// capped at the class trial count minus one.
pub fn fit_cpca(trials: &[SpectralTrial], variance_keep: f64) -> Result<CpcaMap> {
    if !(variance_keep > 0.0 && variance_keep <= 1.0) {
        return Err(Error::invalid(format!("variance_keep {variance_keep} outside (0, 1]")));
    }
    let dim = trials.first().map_or(0, SpectralTrial::dim);
    if trials.iter().any(|t| t.dim() != dim) {
        return Err(Error::ShapeMismatch {
            expected: format!("trials of dimension {dim}"),
            actual: "mixed trial shapes".into(),
        });
    }
    let mut subs = Vec::with_capacity(2);
    for class in Class::BOTH {
        let members: Vec<&SpectralTrial> = trials.iter().filter(|t| t.label == Some(class)).collect();
        if members.len() < 2 {
            return Err(Error::TooFewTrials(format!(
                "{class} class has {} trials, need at least 2",
                members.len()
            )));
        }
        subs.push(fit_class(class, &members, variance_keep));
    }
    let walk = subs.pop().expect("two classes");
    let idle = subs.pop().expect("two classes");
    Ok(CpcaMap {
        subspaces: [idle, walk],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn trial(v: Vec<f64>, class: Class) -> SpectralTrial {
        let n = v.len();
        SpectralTrial {
            powers: v,
            n_channels: 1,
            bin_centers: (0..n as u32).map(|i| 2 * i + 1).collect(),
            label: Some(class),
        }
    }

    fn gramian_error(b: &DMatrix<f64>) -> f64 {
        let g = b.tr_mul(b);
        (g - DMatrix::identity(b.ncols(), b.ncols())).abs().max()
    }

    fn rank_one(dir: &[f64], offset: f64, n: usize, class: Class, rng: &mut ChaCha8Rng) -> Vec<SpectralTrial> {
        (0..n)
            .map(|_| {
                let s: f64 = rng.sample::<f64, _>(StandardNormal) * 3.0;
                trial(dir.iter().map(|d| offset + s * d).collect(), class)
            })
            .collect()
    }

    #[test]
    fn rank_one_classes_recover_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = [0.6, 0.8, 0.0, 0.0];
        let v = [0.0, 0.0, 1.0, 0.0];
        let mut trials = rank_one(&u, 50.0, 20, Class::Idle, &mut rng);
        trials.extend(rank_one(&v, 60.0, 20, Class::Walk, &mut rng));
        let map = fit_cpca(&trials, 0.99).unwrap();
        for (sub, dir) in map.subspaces.iter().zip([u, v]) {
            assert_eq!(sub.rank(), 1);
            let cos = sub.basis.column(0).dot(&DVector::from_column_slice(&dir));
            assert!(cos.abs() > 0.99, "cos {cos}");
            assert!(gramian_error(&sub.basis) < 1e-8);
        }
    }

    #[test]
    fn same_covariance_gives_same_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scales = [5.0, 3.0, 0.01, 0.01, 0.01];
        let mut trials = Vec::new();
        for (class, off) in [(Class::Idle, 20.0), (Class::Walk, 30.0)] {
            for _ in 0..400 {
                let v = scales
                    .iter()
                    .map(|s| off + s * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                trials.push(trial(v, class));
            }
        }
        let map = fit_cpca(&trials, 0.99).unwrap();
        let (a, b) = (&map.subspaces[0].basis, &map.subspaces[1].basis);
        assert_eq!(a.ncols(), 2);
        assert_eq!(b.ncols(), 2);
        // Principal angles: singular values of A^T B are their cosines.
        let sv = a.tr_mul(b).singular_values();
        for s in sv.iter() {
            let angle = s.clamp(-1.0, 1.0).acos();
            assert!(angle < 1e-3, "angle {angle}");
        }
    }

    #[test]
    fn full_variance_in_high_dimension_caps_at_n_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut trials = Vec::new();
        for (class, n) in [(Class::Idle, 6), (Class::Walk, 9)] {
            for _ in 0..n {
                trials.push(trial((0..40).map(|_| 10.0 + rng.random::<f64>()).collect(), class));
            }
        }
        let map = fit_cpca(&trials, 1.0).unwrap();
        assert_eq!(map.subspaces[0].rank(), 5);
        assert_eq!(map.subspaces[1].rank(), 8);
        for s in &map.subspaces {
            assert!(gramian_error(&s.basis) < 1e-8);
        }
    }

    #[test]
    fn too_few_and_zero_variance() {
        let t = vec![trial(vec![1.0, 2.0], Class::Idle), trial(vec![1.0, 2.0], Class::Walk)];
        assert!(matches!(fit_cpca(&t, 0.99), Err(Error::TooFewTrials(_))));

        let mut t = vec![trial(vec![1.0, 2.0], Class::Idle); 3];
        t.push(trial(vec![0.0, 1.0], Class::Walk));
        t.push(trial(vec![1.0, 3.0], Class::Walk));
        let map = fit_cpca(&t, 0.99).unwrap();
        assert_eq!(map.subspaces[0].rank(), 1);
        assert!(gramian_error(&map.subspaces[0].basis) < 1e-12);
    }
}
