//! Synthetic regression benchmarks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, expm1, sin, sqrt};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{param, Result};
use crate::matrix::Matrix;
use crate::rng::stream;

/// A generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub features: Matrix,
    pub target: Vec<f64>,
}

pub const SOBOL_LEVITAN_DIM: usize = 16;

/// Two tiers: 0.2 for the first eight inputs, 0.05 for the rest.
pub fn default_beta() -> [f64; SOBOL_LEVITAN_DIM] {
    core::array::from_fn(|i| if i < 8 { 0.2 } else { 0.05 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SobolLevitanSpec {
    pub beta: [f64; SOBOL_LEVITAN_DIM],
    pub n: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SobolLevitanSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        SobolLevitanSpec {
            beta: default_beta(),
            n,
            noise_sd: 1.0,
            seed,
        }
    }
}

/// Noise-free response `exp(beta'x) + prod (e^b - 1)/b`.
pub fn sobol_levitan_response(beta: &[f64], x: &[f64]) -> f64 {
    let lin: f64 = beta.iter().zip(x).map(|(b, x)| b * x).sum();
    let constant: f64 = beta.iter().map(|&b| expm1(b) / b).product();
    exp(lin) + constant
}

pub fn gen_sobol_levitan(spec: &SobolLevitanSpec) -> Result<Dataset> {
    if let Some(i) = spec.beta.iter().position(|&b| b == 0.0 || !b.is_finite()) {
        return Err(param(format!("beta[{i}] must be finite and nonzero")));
    }
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(param("noise_sd must be finite and non-negative"));
    }
    let mut rng = stream(spec.seed, 0);
    let mut data = Vec::with_capacity(spec.n * SOBOL_LEVITAN_DIM);
    let mut target = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = data.len();
        data.extend((0..SOBOL_LEVITAN_DIM).map(|_| rng.random::<f64>()));
        let eps: f64 = rng.sample(StandardNormal);
        target.push(sobol_levitan_response(&spec.beta, &data[start..]) + spec.noise_sd * eps);
    }
    Ok(Dataset {
        names: column_names(SOBOL_LEVITAN_DIM),
        features: Matrix::new(spec.n, SOBOL_LEVITAN_DIM, data)?,
        target,
    })
}

pub const FRIEDMAN_DIM: usize = 11;

/// Lower clamp applied to the variance before sampling.
pub const FRIEDMAN_MIN_VARIANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FriedmanVariantSpec {
    pub n: usize,
    pub seed: u64,
}

/// Friedman data plus the latent mean and variance used to draw each row.
#[derive(Debug, Clone, PartialEq)]
pub struct FriedmanData {
    pub data: Dataset,
    /// Conditional mean `Z` (including its own noise).
    pub mean: Vec<f64>,
    /// Conditional variance `V` after clamping.
    pub variance: Vec<f64>,
}

fn friedman(a: f64, b: f64, c: f64, d: f64, e: f64) -> f64 {
    let half = c - 0.5;
    10.0 * sin(core::f64::consts::PI * a * b) + 20.0 * half * half + 10.0 * d + 5.0 * e
}

/// Noise-free variance driver, a function of the first five inputs.
pub fn friedman_variance(x: &[f64]) -> f64 {
    friedman(x[0], x[1], x[2], x[3], x[4])
}

/// Noise-free mean driver, a function of inputs six to ten.
pub fn friedman_mean(x: &[f64]) -> f64 {
    friedman(x[5], x[6], x[7], x[8], x[9])
}

/// `Y ~ N(Z, V)` with `V` read as a variance; the last input is pure noise.
pub fn gen_friedman_variant(spec: &FriedmanVariantSpec) -> Result<FriedmanData> {
    let mut rng = stream(spec.seed, 0);
    let mut data = Vec::with_capacity(spec.n * FRIEDMAN_DIM);
    let (mut target, mut mean, mut variance) = (
        Vec::with_capacity(spec.n),
        Vec::with_capacity(spec.n),
        Vec::with_capacity(spec.n),
    );
    for _ in 0..spec.n {
        let start = data.len();
        data.extend((0..FRIEDMAN_DIM).map(|_| rng.random::<f64>()));
        let x = &data[start..];
        let eps_v: f64 = rng.sample(StandardNormal);
        let eps_z: f64 = rng.sample(StandardNormal);
        let eps_y: f64 = rng.sample(StandardNormal);
        let v = (friedman_variance(x) + eps_v).max(FRIEDMAN_MIN_VARIANCE);
        let z = friedman_mean(x) + eps_z;
        target.push(z + sqrt(v) * eps_y);
        mean.push(z);
        variance.push(v);
    }
    Ok(FriedmanData {
        data: Dataset {
            names: column_names(FRIEDMAN_DIM),
            features: Matrix::new(spec.n, FRIEDMAN_DIM, data)?,
            target,
        },
        mean,
        variance,
    })
}

fn column_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;

    #[test]
    fn sobol_levitan_at_center() {
        let b = 0.3;
        let beta = [b; 16];
        let x = [0.5; 16];
        let expected = libm::exp(8.0 * b) + libm::pow((libm::exp(b) - 1.0) / b, 16.0);
        assert!((sobol_levitan_response(&beta, &x) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn sobol_levitan_small_beta_limit() {
        let beta = [1e-8; 16];
        let x = [0.7; 16];
        let y = sobol_levitan_response(&beta, &x);
        assert!((y - (libm::exp(16.0 * 0.7 * 1e-8) + 1.0)).abs() < 1e-7);
    }

    #[test]
    fn sobol_levitan_determinism_and_validation() {
        let spec = SobolLevitanSpec::new(50, 4);
        let a = gen_sobol_levitan(&spec).unwrap();
        assert_eq!(a, gen_sobol_levitan(&spec).unwrap());
        assert_eq!((a.features.rows(), a.features.cols()), (50, 16));
        assert!(a.features.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
        let mut bad = spec.clone();
        bad.beta[3] = 0.0;
        assert!(gen_sobol_levitan(&bad).is_err());
        let mut quiet = spec;
        quiet.noise_sd = 0.0;
        let q = gen_sobol_levitan(&quiet).unwrap();
        let r0 = q.features.row(0);
        assert_eq!(q.target[0], sobol_levitan_response(&quiet.beta, r0));
    }

    #[test]
    fn friedman_center_value() {
        let x = [0.5; 11];
        let expected = 10.0 * libm::sin(core::f64::consts::FRAC_PI_4) + 5.0 + 2.5;
        assert!((friedman_variance(&x) - expected).abs() < 1e-12);
        assert!((friedman_mean(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn friedman_variance_slope_and_noise_column() {
        let n = 100_000;
        let f = gen_friedman_variant(&FriedmanVariantSpec { n, seed: 11 }).unwrap();
        let sq: Vec<f64> = f
            .data
            .target
            .iter()
            .zip(&f.mean)
            .map(|(y, z)| (y - z) * (y - z))
            .collect();
        // Least-squares slope of squared residual on V.
        let (mv, ms) = (mean(&f.variance), mean(&sq));
        let cov: f64 = f.variance.iter().zip(&sq).map(|(v, s)| (v - mv) * (s - ms)).sum();
        let var: f64 = f.variance.iter().map(|v| (v - mv) * (v - mv)).sum();
        assert!((cov / var - 1.0).abs() < 0.1, "slope {}", cov / var);

        let noise = f.data.features.column(10);
        let (mx, my) = (mean(&noise), mean(&f.data.target));
        let sxy: f64 = noise.iter().zip(&f.data.target).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = noise.iter().map(|x| (x - mx) * (x - mx)).sum();
        let syy: f64 = f.data.target.iter().map(|y| (y - my) * (y - my)).sum();
        let corr = sxy / libm::sqrt(sxx * syy);
        assert!(corr.abs() < 3.0 / libm::sqrt(n as f64), "corr {corr}");
        assert!(f.variance.iter().all(|&v| v >= FRIEDMAN_MIN_VARIANCE));
    }
}
