use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::matrix::Matrix;
use crate::stats::{pinball_loss, std_dev};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// (Weighted) ridge least squares with an unpenalized intercept.
///
/// The penalty is `ridge` times the mean diagonal of the centered Gram
/// matrix, so collinear designs stay solvable while the fit approaches the
/// minimum-norm least-squares solution as `ridge -> 0`.
pub fn ridge_fit(x: &Matrix, y: &[f64], weights: Option<&[f64]>, ridge: f64) -> LinearFit {
    let n = x.rows();
    let p = x.cols();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..n).map(w).sum();
    let mut xbar = vec![0.0; p];
    let mut ybar = 0.0;
    for i in 0..n {
        let wi = w(i);
        for (m, v) in xbar.iter_mut().zip(x.row(i)) {
            *m += wi * v;
        }
        ybar += wi * y[i];
    }
    xbar.iter_mut().for_each(|m| *m /= wsum);
    ybar /= wsum;

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut centered = vec![0.0; p];
    for i in 0..n {
        let wi = w(i);
        for ((c, v), m) in centered.iter_mut().zip(x.row(i)).zip(&xbar) {
            *c = v - m;
        }
        let yc = y[i] - ybar;
        for a in 0..p {
            let wa = wi * centered[a];
            rhs[a] += wa * yc;
            for b in a..p {
                gram[(a, b)] += wa * centered[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let trace: f64 = (0..p).map(|a| gram[(a, a)]).sum();
    let scale = if trace > 0.0 { trace / p as f64 } else { 1.0 };
    let mut lambda = ridge * scale;
    let beta = loop {
        let mut g = gram.clone();
        for a in 0..p {
            g[(a, a)] += lambda;
        }
        if let Some(ch) = g.cholesky() {
            break ch.solve(&rhs);
        }
        lambda *= 10.0;
    };
    let coef: Vec<f64> = beta.iter().copied().collect();
    let intercept = ybar - coef.iter().zip(&xbar).map(|(b, m)| b * m).sum::<f64>();
    LinearFit { intercept, coef }
}

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 200;

/// Linear quantile regression by iteratively reweighted least squares on a
/// smoothed pinball loss. Returns the iterate with the lowest training
/// pinball loss, the constant `baseline` quantile included.
pub fn quantile_irls(x: &Matrix, y: &[f64], level: f64, ridge: f64, baseline: f64) -> LinearFit {
    let n = y.len();
    let smooth = (1e-6 * std_dev(y)).max(f64::MIN_POSITIVE);
    let loss = |fit: &LinearFit| {
        let pred: Vec<f64> = x.iter_rows().map(|r| fit.predict(r)).collect();
        pinball_loss(y, &pred, level)
    };
    let mut best = LinearFit {
        intercept: baseline,
        coef: vec![0.0; x.cols()],
    };
    let mut best_loss = loss(&best);

    let mut fit = ridge_fit(x, y, None, ridge);
    let mut weights = vec![0.0; n];
    for _ in 0..IRLS_MAX_ITER {
        let l = loss(&fit);
        if l < best_loss {
            best_loss = l;
            best = fit.clone();
        }
        for (i, row) in x.iter_rows().enumerate() {
            let r = y[i] - fit.predict(row);
            let side = if r >= 0.0 { level } else { 1.0 - level };
            weights[i] = side / r.abs().max(smooth);
        }
        let next = ridge_fit(x, y, Some(&weights), ridge);
        let size = fit
            .coef
            .iter()
            .chain(core::iter::once(&fit.intercept))
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let change = next
            .coef
            .iter()
            .zip(&fit.coef)
            .map(|(a, b)| (a - b).abs())
            .fold((next.intercept - fit.intercept).abs(), f64::max);
        fit = next;
        if change <= IRLS_TOL * size {
            break;
        }
    }
    if loss(&fit) < best_loss {
        best = fit;
    }
    best
}
