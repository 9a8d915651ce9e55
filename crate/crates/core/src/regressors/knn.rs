use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::stats::{mean, sorted_quantile, std_dev};

/// Brute-force k-nearest neighbours on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    x: Matrix,
    y: Vec<f64>,
    scale: Vec<f64>,
    k: usize,
    level: Option<f64>,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[f64], k: usize, level: Option<f64>) -> Self {
        let scale = (0..x.cols())
            .map(|j| {
                let s = std_dev(&x.column(j));
                if s > 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        Knn {
            x: x.clone(),
            y: y.to_vec(),
            scale,
            k: k.min(y.len()),
            level,
        }
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, r)| {
                let d = r
                    .iter()
                    .zip(q)
                    .zip(&self.scale)
                    .map(|((a, b), s)| {
                        let t = (a - b) * s;
                        t * t
                    })
                    .sum::<f64>();
                (d, i)
            })
            .collect();
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_dist);
            dist.truncate(self.k);
        }
        let mut targets: Vec<f64> = dist.iter().map(|&(_, i)| self.y[i]).collect();
        match self.level {
            None => mean(&targets),
            Some(level) => {
                targets.sort_by(f64::total_cmp);
                sorted_quantile(&targets, level)
            }
        }
    }
}
