//! Utility functions: the mapping from a raw-scale measurement onto the unit
//! interval, where 1 is the best value and 0 the worst.

use serde::{Deserialize, Serialize};

/// Interpretation of a raw value as a normalized score in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityFunction {
    /// Piecewise-linear curve through `points`, flat outside its domain.
    Linear { points: Vec<(f64, f64)> },
    /// `below` for `x < threshold`, `at_or_above` otherwise.
    Step {
        threshold: f64,
        below: f64,
        at_or_above: f64,
    },
}

impl UtilityFunction {
    pub fn linear(points: impl Into<Vec<(f64, f64)>>) -> Self {
        UtilityFunction::Linear {
            points: points.into(),
        }
    }

    pub fn step(threshold: f64, below: f64, at_or_above: f64) -> Self {
        UtilityFunction::Step {
            threshold,
            below,
            at_or_above,
        }
    }

    /// `[(0,0),(1,1)]`, used by extractors whose base value is already a ratio.
    pub fn identity() -> Self {
        Self::linear(vec![(0.0, 0.0), (1.0, 1.0)])
    }

    /// Returns the list of broken invariants; empty when the function is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        match self {
            UtilityFunction::Linear { points } => {
                if points.len() < 2 {
                    out.push(format!(
                        "linear utility needs at least 2 points, got {}",
                        points.len()
                    ));
                }
                for (x, y) in points {
                    if !x.is_finite() {
                        out.push(format!("breakpoint x {x} is not finite"));
                    }
                    if !unit(*y) {
                        out.push(format!("breakpoint y {y} outside [0,1]"));
                    }
                }
                for pair in points.windows(2) {
                    if pair[1].0 <= pair[0].0 {
                        out.push(format!(
                            "breakpoint x values must strictly increase ({} then {})",
                            pair[0].0, pair[1].0
                        ));
                    }
                }
            }
            UtilityFunction::Step {
                threshold,
                below,
                at_or_above,
            } => {
                if !threshold.is_finite() {
                    out.push(format!("step threshold {threshold} is not finite"));
                }
                if !unit(*below) {
                    out.push(format!("step below value {below} outside [0,1]"));
                }
                if !unit(*at_or_above) {
                    out.push(format!("step at_or_above value {at_or_above} outside [0,1]"));
                }
            }
        }
        out
    }

    /// Maps a raw value onto `[0, 1]`.
    ///
    /// Linear curves return the exact `y` at a breakpoint, interpolate between
    /// neighbours and clamp to the first/last `y` outside the domain. A NaN
    /// input scores 0.
    pub fn evaluate(&self, x: f64) -> f64 {
        if x.is_nan() {
            return 0.0;
        }
        let y = match self {
            UtilityFunction::Step {
                threshold,
                below,
                at_or_above,
            } => {
                if x < *threshold {
                    *below
                } else {
                    *at_or_above
                }
            }
            UtilityFunction::Linear { points } => interpolate(points, x),
        };
        y.clamp(0.0, 1.0)
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let (Some(&(x_first, y_first)), Some(&(x_last, y_last))) = (points.first(), points.last())
    else {
        return 0.0;
    };
    if x <= x_first {
        return y_first;
    }
    if x >= x_last {
        return y_last;
    }
    // first segment whose right end is at or beyond x
    let idx = points.partition_point(|&(px, _)| px < x);
    let (x1, y1) = points[idx - 1];
    let (x2, y2) = points[idx];
    if x == x2 {
        return y2;
    }
    let t = (x - x1) / (x2 - x1);
    y1 + t * (y2 - y1)
}
