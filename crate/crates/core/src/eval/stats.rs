//! Correlation, regression and a one-sample Kolmogorov-Smirnov test.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub n: usize,
}

/// Pearson correlation with a t-test on `n - 2` degrees of freedom.
pub fn correlate(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values", x.len()),
            actual: format!("{}", y.len()),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("correlation needs at least 3 pairs"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation undefined for a constant series"));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= f64::EPSILON {
        return Ok(Correlation {
            rho,
            t: rho.signum() * f64::INFINITY,
            p: 0.0,
            n,
        });
    }
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(Correlation { rho, t, p, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    /// Intercept, then one coefficient per regressor.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub f: f64,
    pub p: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares of `y` on an intercept plus `regressors`, with the
/// overall F-test.
pub fn ols(y: &[f64], regressors: &[&[f64]]) -> Result<Regression> {
    let n = y.len();
    let k = regressors.len();
    if regressors.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("regressors and response differ in length"));
    }
    if n <= k + 1 {
        return Err(Error::invalid(format!(
            "{n} observations cannot fit {} parameters",
            k + 1
        )));
    }
    let x = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { regressors[j - 1][i] });
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(Error::Collinear);
    }
    let beta = svd.solve(&yv, 0.0).map_err(|_| Error::Collinear)?;
    let fitted = &x * &beta;
    let resid = &yv - &fitted;
    let my = yv.mean();
    let sst: f64 = yv.iter().map(|v| (v - my).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::invalid("response has zero variance"));
    }
    let ssr: f64 = resid.iter().map(|v| v * v).sum();
    let r2 = 1.0 - ssr / sst;
    let df1 = k as f64;
    let df2 = (n - k - 1) as f64;
    let (f, p) = if ssr <= sst * 1e-15 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (r2 / df1) / ((1.0 - r2) / df2);
        let dist = FisherSnedecor::new(df1, df2).expect("positive degrees of freedom");
        (f, dist.sf(f))
    };
    Ok(Regression {
        coefficients: beta.iter().copied().collect(),
        r2,
        f,
        p,
        residuals: resid.iter().copied().collect(),
    })
}

/// Offline accuracy regressed on completion time and successful stops.
pub fn regress_offline_on_online(accuracy: &[f64], times: &[f64], stops: &[f64]) -> Result<Regression> {
    ols(accuracy, &[times, stops])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub d: f64,
    pub p: f64,
    pub n: usize,
}

fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS distance from U(0, 1), asymptotic p-value with Stephens'
/// small-sample correction.
pub fn ks_uniform(values: &[f64]) -> Result<KsTest> {
    if values.is_empty() {
        return Err(Error::invalid("KS test needs at least one value"));
    }
    let mut v = values.to_vec();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("KS test values must be finite"));
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let u = x.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / nf - u).max(u - i as f64 / nf);
    }
    let sq = nf.sqrt();
    let p = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsTest { d, p, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_linear_relation() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let c = correlate(&x, &y).unwrap();
        assert!((c.rho - 1.0).abs() < 1e-15);
        assert_eq!(c.p, 0.0);
        assert!(correlate(&x, &[1.0; 5]).is_err());
        assert!(correlate(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn t_test_matches_known_value() {
        // rho = 0.5 with n = 12: t = 0.5 sqrt(10 / 0.75) = 1.8257, two-sided
        // p = 0.0979 from the t distribution with 10 degrees of freedom.
        let x: [f64; 12] = [1., 2., 3., 4., 5., 6., 7., 8., 9., 10., 11., 12.];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c0 = correlate(&x, &x.map(|v| v + rng.random::<f64>())).unwrap();
        assert!(c0.rho > 0.9);
        let dist = StudentsT::new(0.0, 1.0, 10.0).unwrap();
        assert!((2.0 * dist.cdf(-1.825_741_858_350_553_8) - 0.0979).abs() < 5e-4);
    }

    #[test]
    fn independent_series_are_rarely_significant() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..200).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..200).map(|_| rng.random()).collect();
            if correlate(&x, &y).unwrap().p > 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 90, "{hits}");
    }

    #[test]
    fn regression_fits_and_residuals_are_orthogonal() {
        let t = [200.0, 250.0, 300.0, 320.0, 410.0, 290.0, 230.0];
        let s = [9.0, 8.0, 7.5, 9.2, 9.3, 7.7, 9.4];
        let y: Vec<f64> = t.iter().zip(&s).map(|(a, b)| 0.1 + 0.001 * a + 0.05 * b).collect();
        let r = regress_offline_on_online(&y, &t, &s).unwrap();
        assert!((r.r2 - 1.0).abs() < 1e-12);
        assert!((r.coefficients[1] - 0.001).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise: Vec<f64> = (0..7).map(|_| rng.random()).collect();
        let r = regress_offline_on_online(&noise, &t, &s).unwrap();
        for reg in [&t[..], &s[..]] {
            let dot: f64 = r.residuals.iter().zip(reg).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8, "{dot}");
        }
        assert!(r.residuals.iter().sum::<f64>().abs() < 1e-10);
        let doubled: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
        assert!(matches!(
            regress_offline_on_online(&noise, &t, &doubled),
            Err(Error::Collinear)
        ));
    }

    #[test]
    fn pure_noise_regression_has_small_r2() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 500;
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r = regress_offline_on_online(&y, &a, &b).unwrap();
        assert!(r.r2 < 0.03, "{}", r.r2);
    }

    #[test]
    fn ks_distance() {
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let k = ks_uniform(&grid).unwrap();
        assert!((k.d - 0.0005).abs() < 1e-12);
        assert!(k.p > 0.99);
        let skewed: Vec<f64> = grid.iter().map(|u| u * u).collect();
        let k = ks_uniform(&skewed).unwrap();
        assert!((k.d - 0.25).abs() < 1e-3);
        assert!(k.p < 1e-10);
        // Kolmogorov distribution: P(K > 1.36) = 0.0494.
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
    }
}
