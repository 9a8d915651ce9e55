//! Turning conformal intervals into coalition values.

use alloc::vec::Vec;

use crate::conformal::Interval;
use crate::error::{Error, Result};

/// Which property of the interval a coalition is worth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntervalValue {
    Width,
    Lower,
    Upper,
}

impl IntervalValue {
    pub const ALL: [IntervalValue; 3] = [Self::Width, Self::Lower, Self::Upper];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Width => "width",
            Self::Lower => "lower",
            Self::Upper => "upper",
        }
    }

    pub fn of(self, interval: &Interval) -> f64 {
        match self {
            Self::Width => interval.width(),
            Self::Lower => interval.lower,
            Self::Upper => interval.upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValueFunctionKind {
    pub kind: IntervalValue,
    /// Divide allocations by `v(D, x) - v(empty)` so they sum to one.
    pub normalized: bool,
}

impl ValueFunctionKind {
    pub fn new(kind: IntervalValue, normalized: bool) -> Self {
        ValueFunctionKind { kind, normalized }
    }
}

/// Smallest span `v(D, x) - v(empty)` that normalization accepts.
pub fn normalization_threshold(v_full: f64, v_empty: f64) -> f64 {
    1e-12 * v_full.abs().max(v_empty.abs()).max(1.0)
}

/// Divides `values` by the span; `point` only labels the error.
pub fn normalize(values: &[f64], v_full: f64, v_empty: f64, point: usize) -> Result<Vec<f64>> {
    let span = v_full - v_empty;
    if !(span.abs() > normalization_threshold(v_full, v_empty)) {
        return Err(Error::DegenerateBaseline { point, span });
    }
    Ok(values.iter().map(|v| v / span).collect())
}
