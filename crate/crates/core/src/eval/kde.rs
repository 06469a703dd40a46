//! Gaussian product-kernel density on the (stops, time) plane.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::PerformancePoint;

pub const MAX_CENSORED_FRACTION: f64 = 0.05;
const MIN_UNCENSORED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR / 1.34) n^(-1/5)` per dimension.
    Silverman,
    Fixed {
        stops: f64,
        time: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: Bandwidth,
    pub grid: usize,
    pub pad_bandwidths: f64,
    pub max_censored_fraction: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            bandwidth: Bandwidth::Silverman,
            grid: 256,
            pad_bandwidths: 3.0,
            max_censored_fraction: MAX_CENSORED_FRACTION,
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Rule-of-thumb bandwidth. Degenerate samples fall back to the other spread
/// measure, then to a small floor relative to the data scale.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 1e-3;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = (quantile(&sorted, 0.75) - quantile(&sorted, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => 0.0,
    };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    let floor = 1e-3 * mean.abs().max(1.0);
    if h < floor {
        log::warn!("degenerate spread in density estimate; bandwidth floored at {floor}");
        floor
    } else {
        h
    }
}

fn gauss(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Density on a regular grid, normalised to unit mass.
#[derive(Debug, Clone)]
pub struct Pdf2D {
    pub stops_axis: (f64, f64, usize),
    pub time_axis: (f64, f64, usize),
    /// `density[i * ny + j]` at `(stops_i, time_j)`.
    pub density: Vec<f64>,
    pub bandwidth: (f64, f64),
    pub n_samples: usize,
    points: Vec<(f64, f64)>,
    norm: f64,
    levels: Vec<f64>,
    cum_mass: Vec<f64>,
}

impl Pdf2D {
    pub fn cell_area(&self) -> f64 {
        self.stops_axis.1 * self.time_axis.1
    }

    pub fn stops_at(&self, i: usize) -> f64 {
        self.stops_axis.0 + i as f64 * self.stops_axis.1
    }

    pub fn time_at(&self, j: usize) -> f64 {
        self.time_axis.0 + j as f64 * self.time_axis.1
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_area()
    }

    /// Grid point of maximum density.
    pub fn argmax(&self) -> (f64, f64) {
        let ny = self.time_axis.2;
        let (k, _) = self
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty grid");
        (self.stops_at(k / ny), self.time_at(k % ny))
    }

    /// Bilinear interpolation; `None` outside the grid.
    pub fn density_at(&self, stops: f64, time: f64) -> Option<f64> {
        let (x0, dx, nx) = self.stops_axis;
        let (y0, dy, ny) = self.time_axis;
        let u = (stops - x0) / dx;
        let v = (time - y0) / dy;
        let eps = 1e-9;
        if !(u >= -eps && v >= -eps && u <= (nx - 1) as f64 + eps && v <= (ny - 1) as f64 + eps) {
            return None;
        }
        let u = u.clamp(0.0, (nx - 1) as f64);
        let v = v.clamp(0.0, (ny - 1) as f64);
        let i = (u.floor() as usize).min(nx - 2);
        let j = (v.floor() as usize).min(ny - 2);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let d = |a: usize, b: usize| self.density[a * ny + b];
        Some(
            (1.0 - fu) * (1.0 - fv) * d(i, j)
                + fu * (1.0 - fv) * d(i + 1, j)
                + (1.0 - fu) * fv * d(i, j + 1)
                + fu * fv * d(i + 1, j + 1),
        )
    }

    fn kernel_sum(&self, stops: f64, time: f64, skip: Option<usize>) -> f64 {
        let (hx, hy) = self.bandwidth;
        self.points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, &(x, y))| gauss((stops - x) / hx) * gauss((time - y) / hy))
            .sum::<f64>()
            / (hx * hy)
    }

    /// Direct kernel sum at an arbitrary point, on the grid's normalisation.
    pub fn exact_density(&self, stops: f64, time: f64) -> f64 {
        self.norm * self.kernel_sum(stops, time, None) / self.points.len() as f64
    }

    /// Density at sample `j` estimated from the other samples.
    pub fn leave_one_out_density(&self, j: usize) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        let (x, y) = self.points[j];
        self.norm * self.kernel_sum(x, y, Some(j)) / (n - 1) as f64
    }

    /// Probability mass where the density is strictly below `level`.
    pub fn mass_below(&self, level: f64) -> f64 {
        let k = self.levels.partition_point(|&v| v < level);
        if k == 0 {
            0.0
        } else {
            self.cum_mass[k - 1].min(1.0)
        }
    }
}

/// Fits the density on a `grid x grid` lattice spanning the data padded by
/// `pad_bandwidths` bandwidths.
pub fn fit_parzen(points: &[PerformancePoint], cfg: &KdeConfig) -> Result<Pdf2D> {
    if cfg.grid < 2 {
        return Err(Error::invalid("density grid needs at least 2 points per axis"));
    }
    let censored = points.iter().filter(|p| p.censored).count();
    let uncensored = points.len() - censored;
    if uncensored < MIN_UNCENSORED {
        return Err(Error::TooFewTrials(format!(
            "density estimation needs at least {MIN_UNCENSORED} completed runs, got {uncensored}"
        )));
    }
    let fraction = censored as f64 / points.len() as f64;
    if fraction > cfg.max_censored_fraction {
        return Err(Error::TooCensored {
            fraction,
            limit: cfg.max_censored_fraction,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.stops).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.time_s).collect();
    let (hx, hy) = match cfg.bandwidth {
        Bandwidth::Silverman => (silverman_bandwidth(&xs), silverman_bandwidth(&ys)),
        Bandwidth::Fixed { stops, time } => {
            if !(stops > 0.0 && time > 0.0) {
                return Err(Error::invalid("fixed bandwidths must be positive"));
            }
            (stops, time)
        }
    };
    let axis = |v: &[f64], h: f64| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min) - cfg.pad_bandwidths * h;
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + cfg.pad_bandwidths * h;
        (lo, (hi - lo) / (cfg.grid - 1) as f64, cfg.grid)
    };
    let stops_axis = axis(&xs, hx);
    let time_axis = axis(&ys, hy);
    let n = points.len();

    let kx = DMatrix::from_fn(cfg.grid, n, |i, k| {
        gauss((stops_axis.0 + i as f64 * stops_axis.1 - xs[k]) / hx) / hx
    });
    let ky = DMatrix::from_fn(cfg.grid, n, |j, k| {
        gauss((time_axis.0 + j as f64 * time_axis.1 - ys[k]) / hy) / hy
    });
    let grid = (kx * ky.transpose()) / n as f64;
    let area = stops_axis.1 * time_axis.1;
    let raw_mass = grid.sum() * area;
    let norm = 1.0 / raw_mass;
    let mut density = vec![0.0; cfg.grid * cfg.grid];
    for i in 0..cfg.grid {
        for j in 0..cfg.grid {
            density[i * cfg.grid + j] = grid[(i, j)] * norm;
        }
    }

    let mut levels = density.clone();
    levels.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    let cum_mass = levels
        .iter()
        .map(|v| {
            acc += v * area;
            acc
        })
        .collect();

    Ok(Pdf2D {
        stops_axis,
        time_axis,
        density,
        bandwidth: (hx, hy),
        n_samples: n,
        points: xs.into_iter().zip(ys).collect(),
        norm,
        levels,
        cum_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdrP {
    pub p: f64,
    pub density: f64,
    pub outside_grid: bool,
}

/// Mass outside the density contour through `observed`.
pub fn hdr_p_value(pdf: &Pdf2D, observed: PerformancePoint) -> HdrP {
    match pdf.density_at(observed.stops, observed.time_s) {
        None => HdrP {
            p: 0.0,
            density: 0.0,
            outside_grid: true,
        },
        Some(c) => HdrP {
            p: pdf.mass_below(c),
            density: c,
            outside_grid: false,
        },
    }
}

/// HDR p-value of every sample, each levelled by its leave-one-out density.
pub fn member_p_values(pdf: &Pdf2D) -> Vec<f64> {
    (0..pdf.points.len())
        .map(|j| pdf.mass_below(pdf.leave_one_out_density(j)))
        .collect()
}

/// Fraction of ensemble points whose leave-one-out density lies below the
/// density at `observed`. Needs no grid and tolerates censoring.
pub fn mc_p_value(points: &[PerformancePoint], observed: PerformancePoint, bandwidth: Bandwidth) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invalid("Monte Carlo p-value needs a nonempty ensemble"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.stops).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.time_s).collect();
    let (hx, hy) = match bandwidth {
        Bandwidth::Silverman => (silverman_bandwidth(&xs), silverman_bandwidth(&ys)),
        Bandwidth::Fixed { stops, time } => (stops, time),
    };
    let k = |a: usize, x: f64, y: f64| gauss((x - xs[a]) / hx) * gauss((y - ys[a]) / hy);
    let n = points.len();
    let c = (0..n).map(|a| k(a, observed.stops, observed.time_s)).sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(0.0);
    }
    let below = (0..n)
        .filter(|&j| {
            let loo = (0..n).filter(|&a| a != j).map(|a| k(a, xs[j], ys[j])).sum::<f64>() / (n - 1) as f64;
            loo < c
        })
        .count();
    Ok(below as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_points(n: usize, seed: u64) -> Vec<PerformancePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                PerformancePoint {
                    stops: x,
                    time_s: y,
                    censored: false,
                }
            })
            .collect()
    }

    #[test]
    fn grid_is_normalised_and_unimodal_for_a_cluster() {
        let pts: Vec<_> = (0..50)
            .map(|i| PerformancePoint {
                stops: 5.0 + 0.01 * ((i % 7) as f64 - 3.0),
                time_s: 300.0 + 0.1 * ((i % 5) as f64 - 2.0),
                censored: false,
            })
            .collect();
        let pdf = fit_parzen(&pts, &KdeConfig::default()).unwrap();
        assert!((pdf.integral() - 1.0).abs() < 1e-2);
        let (mx, my) = pdf.argmax();
        assert!((mx - 5.0).abs() <= 0.03 + pdf.stops_axis.1);
        assert!((my - 300.0).abs() <= 0.2 + pdf.time_axis.1);
        let at_max = hdr_p_value(
            &pdf,
            PerformancePoint {
                stops: mx,
                time_s: my,
                censored: false,
            },
        );
        assert!(at_max.p > 0.99);
        let far = hdr_p_value(&pdf, PerformancePoint::new(9.0, 900.0).unwrap());
        assert!(far.outside_grid && far.p == 0.0);
    }

    #[test]
    fn grid_matches_direct_kernel_sum() {
        let pts = gaussian_points(200, 3);
        let pdf = fit_parzen(
            &pts,
            &KdeConfig {
                grid: 64,
                ..KdeConfig::default()
            },
        )
        .unwrap();
        let (hx, hy) = pdf.bandwidth;
        let ny = pdf.time_axis.2;
        for (i, j) in [(0, 0), (10, 40), (31, 32), (63, 5)] {
            let (x, y) = (pdf.stops_at(i), pdf.time_at(j));
            let direct = pts
                .iter()
                .map(|p| {
                    let (u, v) = ((x - p.stops) / hx, (y - p.time_s) / hy);
                    (-(u * u + v * v) / 2.0).exp() / (2.0 * PI * hx * hy)
                })
                .sum::<f64>()
                / pts.len() as f64;
            let grid = pdf.density[i * ny + j];
            assert!(
                (grid - direct * pdf.norm).abs() <= 1e-12 * direct.max(1e-300),
                "{grid} vs {direct}"
            );
            assert!((pdf.exact_density(x, y) - grid).abs() <= 1e-12 * grid.max(1e-300));
        }
        // Riemann sum of the unnormalised estimate is already close to one.
        assert!((1.0 / pdf.norm - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gaussian_density_error_is_near_asymptotic() {
        let pts = gaussian_points(1000, 4);
        let pdf = fit_parzen(&pts, &KdeConfig::default()).unwrap();
        let (nx, ny) = (pdf.stops_axis.2, pdf.time_axis.2);
        let mut ise = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                let (x, y) = (pdf.stops_at(i), pdf.time_at(j));
                let truth = (-(x * x + y * y) / 2.0).exp() / (2.0 * PI);
                ise += (pdf.density[i * ny + j] - truth).powi(2) * pdf.cell_area();
            }
        }
        // AMISE of a product Gaussian kernel against the standard bivariate
        // normal: 1 / (4 pi n hx hy) + 3 (hx^4 + hy^4) / (64 pi) + hx^2 hy^2 / (32 pi).
        let (hx, hy) = pdf.bandwidth;
        let n = pts.len() as f64;
        let amise = 1.0 / (4.0 * PI * n * hx * hy)
            + 3.0 * (hx.powi(4) + hy.powi(4)) / (64.0 * PI)
            + hx * hx * hy * hy / (32.0 * PI);
        assert!(ise < 2.0 * amise && ise > 0.25 * amise, "ISE {ise} AMISE {amise}");
    }

    #[test]
    fn censoring_limits() {
        let mut pts = gaussian_points(100, 1);
        for p in pts.iter_mut().take(6) {
            p.censored = true;
        }
        assert!(matches!(
            fit_parzen(&pts, &KdeConfig::default()),
            Err(Error::TooCensored { .. })
        ));
        assert!(mc_p_value(
            &pts,
            PerformancePoint {
                stops: 0.0,
                time_s: 0.0,
                censored: false
            },
            Bandwidth::Silverman
        )
        .is_ok());
        assert!(fit_parzen(&gaussian_points(9, 1), &KdeConfig::default()).is_err());
    }

    #[test]
    fn mc_p_is_one_at_the_densest_member_and_zero_far_away() {
        let pts = gaussian_points(300, 8);
        let pdf = fit_parzen(&pts, &KdeConfig::default()).unwrap();
        let densest = (0..pts.len())
            .max_by(|&a, &b| {
                pdf.exact_density(pts[a].stops, pts[a].time_s)
                    .total_cmp(&pdf.exact_density(pts[b].stops, pts[b].time_s))
            })
            .unwrap();
        let p = mc_p_value(&pts, pts[densest], Bandwidth::Silverman).unwrap();
        assert!(p > 0.99, "{p}");
        let far = PerformancePoint {
            stops: 50.0,
            time_s: 50.0,
            censored: false,
        };
        assert_eq!(mc_p_value(&pts, far, Bandwidth::Silverman).unwrap(), 0.0);
    }

    #[test]
    fn silverman_rule_and_floor() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let sd = (v.iter().map(|x| (x - 49.5f64).powi(2)).sum::<f64>() / 99.0).sqrt();
        let iqr = (74.25 - 24.75) / 1.34;
        let expect = 0.9 * sd.min(iqr) * 100f64.powf(-0.2);
        assert!((silverman_bandwidth(&v) - expect).abs() < 1e-12);
        assert_eq!(silverman_bandwidth(&[1200.0; 20]), 1.2);
    }
}
