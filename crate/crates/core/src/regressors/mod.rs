//! Retrainable regressors: the learning algorithm run once per coalition.
//!
//! Every family accepts an empty feature set, in which case the model is a
//! constant (training mean, or empirical quantile for quantile fits), so the
//! empty coalition is a well-defined baseline.

mod knn;
mod linear;
mod tree;

use alloc::format;
use alloc::vec::Vec;

use libm::sqrt;

use crate::coalition::Coalition;
use crate::error::{dim, param, Error, Result};
use crate::matrix::Matrix;
use crate::stats::{empirical_quantile, mean, pinball_loss, std_dev};

pub use knn::Knn;
pub use linear::{ridge_fit, LinearFit};
pub use tree::{Ensemble, Loss, TreeParams};

/// Learning algorithm and its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressorSpec {
    Constant,
    /// Least squares with an intercept; `ridge` is relative to the mean
    /// diagonal of the centered Gram matrix.
    Linear { ridge: f64 },
    Knn { k: usize },
    TreeEnsemble(TreeParams),
}

impl RegressorSpec {
    pub const DEFAULT_RIDGE: f64 = 1e-10;

    pub fn linear(ridge: f64) -> Result<Self> {
        if !(ridge.is_finite() && ridge > 0.0) {
            return Err(param(format!("ridge epsilon must be positive, got {ridge}")));
        }
        Ok(RegressorSpec::Linear { ridge })
    }

    pub fn knn(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(param("knn needs k >= 1"));
        }
        Ok(RegressorSpec::Knn { k })
    }

    pub fn tree_ensemble(params: TreeParams) -> Result<Self> {
        params.validate()?;
        Ok(RegressorSpec::TreeEnsemble(params))
    }

    pub fn family(&self) -> &'static str {
        match self {
            RegressorSpec::Constant => "constant",
            RegressorSpec::Linear { .. } => "linear",
            RegressorSpec::Knn { .. } => "knn",
            RegressorSpec::TreeEnsemble(_) => "tree",
        }
    }

    fn fingerprint_into(&self, h: &mut Fnv) {
        h.write_str(self.family());
        match self {
            RegressorSpec::Constant => {}
            RegressorSpec::Linear { ridge } => h.write_f64(*ridge),
            RegressorSpec::Knn { k } => h.write_u64(*k as u64),
            RegressorSpec::TreeEnsemble(p) => {
                h.write_u64(p.trees as u64);
                h.write_u64(p.max_leaves as u64);
                h.write_f64(p.learning_rate);
                h.write_f64(p.min_node_fraction);
            }
        }
    }
}

impl Default for RegressorSpec {
    fn default() -> Self {
        RegressorSpec::Linear {
            ridge: Self::DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Constant(f64),
    Linear(LinearFit),
    Knn(Knn),
    Trees(Ensemble),
}

/// A model trained on one coalition's columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    spec: RegressorSpec,
    coalition: Coalition,
    params: Params,
    /// `Some(level)` for quantile models.
    level: Option<f64>,
    fingerprint: u64,
}

impl FittedModel {
    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn coalition(&self) -> Coalition {
        self.coalition
    }

    pub fn level(&self) -> Option<f64> {
        self.level
    }

    /// Hash of (training rows, coalition, spec, seed).
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `x` holds the coalition's features in ascending index order.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coalition.len() {
            return Err(dim(format!(
                "model expects {} features, got {}",
                self.coalition.len(),
                x.len()
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    pub fn predict_rows(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.coalition.len() {
            return Err(dim(format!(
                "model expects {} features, got {}",
                self.coalition.len(),
                x.cols()
            )));
        }
        Ok(x.iter_rows().map(|r| self.predict_unchecked(r)).collect())
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match &self.params {
            Params::Constant(c) => *c,
            Params::Linear(fit) => fit.predict(x),
            Params::Knn(knn) => knn.predict(x),
            Params::Trees(e) => e.predict(x),
        }
    }

    /// The boosted trees, when this is a tree model.
    pub fn ensemble(&self) -> Option<&Ensemble> {
        match &self.params {
            Params::Trees(e) => Some(e),
            _ => None,
        }
    }
}

fn check_inputs(features: &Matrix, coalition: Coalition, target: &[f64]) -> Result<()> {
    if target.is_empty() || features.rows() == 0 {
        return Err(Error::EmptyData);
    }
    if features.rows() != target.len() {
        return Err(dim(format!(
            "{} feature rows but {} targets",
            features.rows(),
            target.len()
        )));
    }
    if features.cols() != coalition.len() {
        return Err(dim(format!(
            "coalition has {} members but features have {} columns",
            coalition.len(),
            features.cols()
        )));
    }
    Ok(())
}

fn fingerprint(
    spec: &RegressorSpec,
    features: &Matrix,
    coalition: Coalition,
    target: &[f64],
    seed: u64,
    level: Option<f64>,
) -> u64 {
    let mut h = Fnv::new();
    spec.fingerprint_into(&mut h);
    h.write_u64(coalition.bits());
    h.write_u64(seed);
    h.write_f64(level.unwrap_or(-1.0));
    h.write_u64(features.rows() as u64);
    features.as_slice().iter().for_each(|&v| h.write_f64(v));
    target.iter().for_each(|&v| h.write_f64(v));
    h.finish()
}

/// Fits a mean regressor on `features` (already restricted to `coalition`).
pub fn train(
    spec: &RegressorSpec,
    features: &Matrix,
    coalition: Coalition,
    target: &[f64],
    seed: u64,
) -> Result<FittedModel> {
    check_inputs(features, coalition, target)?;
    let params = if coalition.is_empty() {
        Params::Constant(mean(target))
    } else {
        match spec {
            RegressorSpec::Constant => Params::Constant(mean(target)),
            RegressorSpec::Linear { ridge } => {
                Params::Linear(ridge_fit(features, target, None, *ridge))
            }
            RegressorSpec::Knn { k } => Params::Knn(Knn::fit(features, target, *k, None)),
            RegressorSpec::TreeEnsemble(p) => {
                Params::Trees(Ensemble::fit(features, target, p, Loss::Squared))
            }
        }
    };
    Ok(FittedModel {
        spec: spec.clone(),
        coalition,
        params,
        level: None,
        fingerprint: fingerprint(spec, features, coalition, target, seed, None),
    })
}

/// Fits a conditional `level`-quantile model.
///
/// Constant: empirical quantile. Linear: smoothed-pinball IRLS. Knn:
/// neighbourhood empirical quantile. Trees: gradient boosting on the
/// pinball loss. If the fit does worse than the constant quantile on the
/// training data, the constant is kept instead.
pub fn train_quantile(
    spec: &RegressorSpec,
    features: &Matrix,
    coalition: Coalition,
    target: &[f64],
    level: f64,
    seed: u64,
) -> Result<FittedModel> {
    if !(level > 0.0 && level < 1.0) {
        return Err(param(format!("quantile level must lie in (0, 1), got {level}")));
    }
    check_inputs(features, coalition, target)?;
    let baseline = empirical_quantile(target, level);
    let params = if coalition.is_empty() {
        Params::Constant(baseline)
    } else {
        let candidate = match spec {
            RegressorSpec::Constant => Params::Constant(baseline),
            RegressorSpec::Linear { ridge } => {
                Params::Linear(linear::quantile_irls(features, target, level, *ridge, baseline))
            }
            RegressorSpec::Knn { k } => Params::Knn(Knn::fit(features, target, *k, Some(level))),
            RegressorSpec::TreeEnsemble(p) => {
                Params::Trees(Ensemble::fit(features, target, p, Loss::Pinball(level)))
            }
        };
        let preds: Vec<f64> = features
            .iter_rows()
            .map(|r| match &candidate {
                Params::Constant(c) => *c,
                Params::Linear(f) => f.predict(r),
                Params::Knn(k) => k.predict(r),
                Params::Trees(e) => e.predict(r),
            })
            .collect();
        let base = alloc::vec![baseline; target.len()];
        if pinball_loss(target, &preds, level) <= pinball_loss(target, &base, level) {
            candidate
        } else {
            Params::Constant(baseline)
        }
    };
    Ok(FittedModel {
        spec: spec.clone(),
        coalition,
        params,
        level: Some(level),
        fingerprint: fingerprint(spec, features, coalition, target, seed, Some(level)),
    })
}

/// Lower and upper conditional-quantile models for CQR.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileModel {
    pub lower: FittedModel,
    pub upper: FittedModel,
}

impl QuantileModel {
    pub fn fit(
        spec: &RegressorSpec,
        features: &Matrix,
        coalition: Coalition,
        target: &[f64],
        levels: (f64, f64),
        seed: u64,
    ) -> Result<Self> {
        let (lo, hi) = levels;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(param(format!(
                "quantile levels must satisfy 0 < low < up < 1, got ({lo}, {hi})"
            )));
        }
        Ok(QuantileModel {
            lower: train_quantile(spec, features, coalition, target, lo, seed)?,
            upper: train_quantile(spec, features, coalition, target, hi, seed)?,
        })
    }

    pub fn levels(&self) -> (f64, f64) {
        (
            self.lower.level().unwrap_or(0.0),
            self.upper.level().unwrap_or(1.0),
        )
    }
}

/// How residuals become the dispersion regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualTransform {
    /// Fit `|y - f(x)|`; predictions are used as the dispersion directly.
    #[default]
    Absolute,
    /// Fit `(y - f(x))^2`; the dispersion is the square root of the
    /// prediction.
    Squared,
}

/// Local dispersion model `sigma(x)` for LACP, floored at a positive value.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionModel {
    model: FittedModel,
    transform: ResidualTransform,
    floor: f64,
}

impl DispersionModel {
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.finish(self.model.predict(x)?))
    }

    pub fn predict_rows(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self
            .model
            .predict_rows(x)?
            .into_iter()
            .map(|p| self.finish(p))
            .collect())
    }

    fn finish(&self, raw: f64) -> f64 {
        let sigma = match self.transform {
            ResidualTransform::Absolute => raw,
            ResidualTransform::Squared => sqrt(raw.max(0.0)),
        };
        if sigma.is_nan() {
            self.floor
        } else {
            sigma.max(self.floor)
        }
    }
}

/// Relative floor on dispersion predictions, times the target's std dev.
pub const DISPERSION_FLOOR: f64 = 1e-8;

/// Fits `spec` on the transformed in-sample residuals of `mean_model`.
pub fn train_dispersion(
    mean_model: &FittedModel,
    features: &Matrix,
    target: &[f64],
    spec: &RegressorSpec,
    transform: ResidualTransform,
    seed: u64,
) -> Result<DispersionModel> {
    check_inputs(features, mean_model.coalition(), target)?;
    let fitted = mean_model.predict_rows(features)?;
    let residuals: Vec<f64> = target
        .iter()
        .zip(&fitted)
        .map(|(y, f)| match transform {
            ResidualTransform::Absolute => (y - f).abs(),
            ResidualTransform::Squared => (y - f) * (y - f),
        })
        .collect();
    let model = train(spec, features, mean_model.coalition(), &residuals, seed)?;
    let floor = (DISPERSION_FLOOR * std_dev(target)).max(f64::MIN_POSITIVE);
    Ok(DispersionModel {
        model,
        transform,
        floor,
    })
}

/// 64-bit FNV-1a, for model fingerprints.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    fn write_str(&mut self, s: &str) {
        self.write(s.as_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
