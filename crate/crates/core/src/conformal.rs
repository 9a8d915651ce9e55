//! Split conformal prediction: SMR, LACP and CQR intervals.

use alloc::format;
use alloc::vec::Vec;

use libm::round;
use rand::seq::SliceRandom;

use crate::coalition::Coalition;
use crate::error::{dim, param, Error, Result};
use crate::matrix::Matrix;
use crate::regressors::{
    train, train_dispersion, DispersionModel, FittedModel, QuantileModel, RegressorSpec,
    ResidualTransform,
};
use crate::rng::stream;
use crate::stats::ceil_rank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CpMethod {
    /// Absolute residual of a mean model; constant width.
    Smr,
    /// Residual scaled by a local dispersion model.
    Lacp,
    /// Conformalized quantile regression.
    Cqr,
}

impl CpMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CpMethod::Smr => "smr",
            CpMethod::Lacp => "lacp",
            CpMethod::Cqr => "cqr",
        }
    }
}

/// Train / calibration / test row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub train: Vec<usize>,
    pub calibration: Vec<usize>,
    /// Rows left after train and calibration; empty when the ratios sum to 1.
    pub test: Vec<usize>,
    pub seed: u64,
    pub ratios: (f64, f64),
}

/// Uniformly random partition of `0..n_rows`, reproducible from `seed`.
pub fn split(n_rows: usize, ratios: (f64, f64), seed: u64) -> Result<SplitData> {
    let (tf, cf) = ratios;
    if !(tf > 0.0 && cf > 0.0 && tf + cf <= 1.0 + 1e-12) {
        return Err(Error::Split(format!(
            "ratios ({tf}, {cf}) must be positive and sum to at most 1"
        )));
    }
    let n_train = round(n_rows as f64 * tf) as usize;
    let n_cal = (round(n_rows as f64 * cf) as usize).min(n_rows.saturating_sub(n_train));
    if n_train == 0 || n_cal == 0 {
        return Err(Error::Split(format!(
            "{n_rows} rows leave an empty partition under ({tf}, {cf})"
        )));
    }
    let mut idx: Vec<usize> = (0..n_rows).collect();
    idx.shuffle(&mut stream(seed, 0));
    let test = idx.split_off(n_train + n_cal);
    let calibration = idx.split_off(n_train);
    Ok(SplitData {
        train: idx,
        calibration,
        test,
        seed,
        ratios,
    })
}

/// `k`-th smallest score with `k = ceil((n + 1)(1 - alpha))`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = scores.len();
    let rank = ceil_rank((n as f64 + 1.0) * (1.0 - alpha));
    if rank > n || rank == 0 {
        return Err(Error::InsufficientCalibration { rank, n });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

/// A closed prediction interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// Set when CQR bounds crossed and were collapsed to their midpoint.
    pub crossed: bool,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        if lower <= upper {
            Interval {
                lower,
                upper,
                crossed: false,
            }
        } else {
            let mid = 0.5 * (lower + upper);
            Interval {
                lower: mid,
                upper: mid,
                crossed: true,
            }
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// The fitted models behind one conformal predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum CpModels {
    Smr {
        mean: FittedModel,
    },
    Lacp {
        mean: FittedModel,
        dispersion: DispersionModel,
    },
    Cqr {
        quantiles: QuantileModel,
    },
}

impl CpModels {
    pub fn method(&self) -> CpMethod {
        match self {
            CpModels::Smr { .. } => CpMethod::Smr,
            CpModels::Lacp { .. } => CpMethod::Lacp,
            CpModels::Cqr { .. } => CpMethod::Cqr,
        }
    }

    pub fn coalition(&self) -> Coalition {
        match self {
            CpModels::Smr { mean } | CpModels::Lacp { mean, .. } => mean.coalition(),
            CpModels::Cqr { quantiles } => quantiles.lower.coalition(),
        }
    }

    /// One conformity score per row of `x` (restricted to the coalition).
    pub fn scores(&self, x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
        if x.rows() != y.len() {
            return Err(dim("feature rows and targets differ in length"));
        }
        Ok(match self {
            CpModels::Smr { mean } => {
                let f = mean.predict_rows(x)?;
                y.iter().zip(f).map(|(y, f)| (y - f).abs()).collect()
            }
            CpModels::Lacp { mean, dispersion } => {
                let f = mean.predict_rows(x)?;
                let s = dispersion.predict_rows(x)?;
                y.iter()
                    .zip(f)
                    .zip(s)
                    .map(|((y, f), s)| (y - f).abs() / s)
                    .collect()
            }
            CpModels::Cqr { quantiles } => {
                let lo = quantiles.lower.predict_rows(x)?;
                let hi = quantiles.upper.predict_rows(x)?;
                y.iter()
                    .zip(lo)
                    .zip(hi)
                    .map(|((y, lo), hi)| (lo - y).max(y - hi))
                    .collect()
            }
        })
    }

    /// Conformity score of a single point.
    pub fn score(&self, x: &[f64], y: f64) -> Result<f64> {
        Ok(match self {
            CpModels::Smr { mean } => (y - mean.predict(x)?).abs(),
            CpModels::Lacp { mean, dispersion } => {
                (y - mean.predict(x)?).abs() / dispersion.predict(x)?
            }
            CpModels::Cqr { quantiles } => {
                (quantiles.lower.predict(x)? - y).max(y - quantiles.upper.predict(x)?)
            }
        })
    }

    /// Interval for threshold `q_hat`.
    pub fn interval(&self, x: &[f64], q_hat: f64) -> Result<Interval> {
        Ok(match self {
            CpModels::Smr { mean } => {
                let f = mean.predict(x)?;
                Interval::new(f - q_hat, f + q_hat)
            }
            CpModels::Lacp { mean, dispersion } => {
                let f = mean.predict(x)?;
                let half = q_hat * dispersion.predict(x)?;
                Interval::new(f - half, f + half)
            }
            CpModels::Cqr { quantiles } => Interval::new(
                quantiles.lower.predict(x)? - q_hat,
                quantiles.upper.predict(x)? + q_hat,
            ),
        })
    }
}

/// Everything needed to fit a conformal predictor on any coalition.
#[derive(Debug, Clone, PartialEq)]
pub struct CpSettings {
    pub method: CpMethod,
    pub alpha: f64,
    pub mean: RegressorSpec,
    pub dispersion: RegressorSpec,
    pub quantile: RegressorSpec,
    pub transform: ResidualTransform,
    /// CQR quantile levels; `None` means `(alpha/2, 1 - alpha/2)`.
    pub cqr_levels: Option<(f64, f64)>,
    pub seed: u64,
}

impl CpSettings {
    pub fn new(method: CpMethod, alpha: f64) -> Self {
        CpSettings {
            method,
            alpha,
            mean: RegressorSpec::default(),
            dispersion: RegressorSpec::default(),
            quantile: RegressorSpec::default(),
            transform: ResidualTransform::Absolute,
            cqr_levels: None,
            seed: 0,
        }
    }

    pub fn levels(&self) -> (f64, f64) {
        self.cqr_levels
            .unwrap_or((self.alpha / 2.0, 1.0 - self.alpha / 2.0))
    }

    /// Trains the method's models on `train_x` (restricted to `coalition`).
    pub fn fit_models(
        &self,
        coalition: Coalition,
        train_x: &Matrix,
        train_y: &[f64],
    ) -> Result<CpModels> {
        Ok(match self.method {
            CpMethod::Smr => CpModels::Smr {
                mean: train(&self.mean, train_x, coalition, train_y, self.seed)?,
            },
            CpMethod::Lacp => {
                let mean = train(&self.mean, train_x, coalition, train_y, self.seed)?;
                let dispersion = train_dispersion(
                    &mean,
                    train_x,
                    train_y,
                    &self.dispersion,
                    self.transform,
                    self.seed,
                )?;
                CpModels::Lacp { mean, dispersion }
            }
            CpMethod::Cqr => CpModels::Cqr {
                quantiles: QuantileModel::fit(
                    &self.quantile,
                    train_x,
                    coalition,
                    train_y,
                    self.levels(),
                    self.seed,
                )?,
            },
        })
    }
}

/// Calibrated predictor for one coalition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalPredictor {
    models: CpModels,
    cal_scores: Vec<f64>,
    q_hat: f64,
    alpha: f64,
}

impl ConformalPredictor {
    /// Scores the calibration rows and fixes the threshold.
    pub fn calibrate(models: CpModels, cal_x: &Matrix, cal_y: &[f64], alpha: f64) -> Result<Self> {
        if cal_y.is_empty() {
            return Err(Error::InsufficientCalibration { rank: 1, n: 0 });
        }
        let mut cal_scores = models.scores(cal_x, cal_y)?;
        let q_hat = conformal_quantile(&cal_scores, alpha)?;
        cal_scores.sort_by(f64::total_cmp);
        Ok(ConformalPredictor {
            models,
            cal_scores,
            q_hat,
            alpha,
        })
    }

    /// Trains and calibrates; `train_x` and `cal_x` are already restricted
    /// to `coalition`.
    pub fn fit(
        settings: &CpSettings,
        coalition: Coalition,
        train_x: &Matrix,
        train_y: &[f64],
        cal_x: &Matrix,
        cal_y: &[f64],
    ) -> Result<Self> {
        let models = settings.fit_models(coalition, train_x, train_y)?;
        Self::calibrate(models, cal_x, cal_y, settings.alpha)
    }

    pub fn method(&self) -> CpMethod {
        self.models.method()
    }

    pub fn coalition(&self) -> Coalition {
        self.models.coalition()
    }

    pub fn models(&self) -> &CpModels {
        &self.models
    }

    pub fn cal_scores(&self) -> &[f64] {
        &self.cal_scores
    }

    pub fn q_hat(&self) -> f64 {
        self.q_hat
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `x` holds the coalition's features in ascending index order.
    pub fn predict_interval(&self, x: &[f64]) -> Result<Interval> {
        self.models.interval(x, self.q_hat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageReport {
    pub coverage: f64,
    pub mean_width: f64,
    pub n: usize,
    /// `[1 - alpha, 1 - alpha + 1/(n_cal + 1)]`.
    pub band: (f64, f64),
}

impl CoverageReport {
    /// Binomial standard error of the empirical coverage at the band's
    /// lower edge.
    pub fn binomial_se(&self) -> f64 {
        let p = self.band.0;
        libm::sqrt(p * (1.0 - p) / self.n.max(1) as f64)
    }
}

pub fn coverage_audit(
    intervals: &[Interval],
    truths: &[f64],
    alpha: f64,
    n_cal: usize,
) -> Result<CoverageReport> {
    if intervals.len() != truths.len() {
        return Err(dim("one truth per interval required"));
    }
    let n = intervals.len();
    let hits = intervals
        .iter()
        .zip(truths)
        .filter(|(i, &y)| i.contains(y))
        .count();
    let width: f64 = intervals.iter().map(Interval::width).sum();
    let denom = n.max(1) as f64;
    Ok(CoverageReport {
        coverage: hits as f64 / denom,
        mean_width: width / denom,
        n,
        band: (1.0 - alpha, 1.0 - alpha + 1.0 / (n_cal as f64 + 1.0)),
    })
}
