use std::fmt;

use serde::{Deserialize, Serialize};

pub const DEFAULT_WARNING: f64 = 0.67;
pub const DEFAULT_CRITICAL: f64 = 0.33;

/// Traffic-light boundaries on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub warning: f64,
    pub critical: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            warning: DEFAULT_WARNING,
            critical: DEFAULT_CRITICAL,
        }
    }
}

impl Thresholds {
    pub fn new(warning: f64, critical: f64) -> Self {
        Thresholds { warning, critical }
    }

    pub fn is_valid(&self) -> bool {
        0.0 <= self.critical && self.critical <= self.warning && self.warning <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Color {
    Green,
    Orange,
    Red,
    NoData,
}

impl Color {
    /// 0 for green, 1 for orange, 2 for red. No-data has no severity.
    pub fn severity(self) -> Option<u8> {
        match self {
            Color::Green => Some(0),
            Color::Orange => Some(1),
            Color::Red => Some(2),
            Color::NoData => None,
        }
    }

    /// True when `self` is strictly worse than `other`; no-data on either side is never worse.
    pub fn is_worse_than(self, other: Color) -> bool {
        match (self.severity(), other.severity()) {
            (Some(a), Some(b)) => a > b,
            _ => false,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Green => "green",
            Color::Orange => "orange",
            Color::Red => "red",
            Color::NoData => "no-data",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies a normalized value. Both boundaries are inclusive on the upper
/// side: `value == warning` is green, `value == critical` is orange.
pub fn classify_color(value: Option<f64>, t: &Thresholds) -> Color {
    match value {
        None => Color::NoData,
        Some(v) if v >= t.warning => Color::Green,
        Some(v) if v >= t.critical => Color::Orange,
        Some(_) => Color::Red,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_boundaries() {
        let t = Thresholds::default();
        assert_eq!(classify_color(Some(0.91), &t), Color::Green);
        assert_eq!(classify_color(Some(0.5), &t), Color::Orange);
        assert_eq!(classify_color(Some(0.2), &t), Color::Red);
        assert_eq!(classify_color(Some(0.67), &t), Color::Green);
        assert_eq!(classify_color(Some(0.33), &t), Color::Orange);
        assert_eq!(classify_color(None, &t), Color::NoData);
    }

    #[test]
    fn worse_ordering() {
        assert!(Color::Orange.is_worse_than(Color::Green));
        assert!(Color::Red.is_worse_than(Color::Orange));
        assert!(!Color::Green.is_worse_than(Color::Orange));
        assert!(!Color::Red.is_worse_than(Color::NoData));
        assert!(!Color::NoData.is_worse_than(Color::Green));
        assert_eq!(serde_json::to_string(&Color::NoData).unwrap(), "\"no-data\"");
    }

    proptest! {
        #[test]
        fn monotone_in_value(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, w in 0.0f64..=1.0) {
            let t = Thresholds::new(w.max(c), w.min(c));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let lo_c = classify_color(Some(lo), &t);
            let hi_c = classify_color(Some(hi), &t);
            prop_assert!(!hi_c.is_worse_than(lo_c));
        }
    }
}
