//! Order statistics for distribution summaries.

use serde::{Deserialize, Serialize};

use crate::serial::ext_f64;

/// Quantile of sorted data by linear interpolation between closest ranks
/// (`h = (len - 1) * q`). Returns NaN for empty input.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b {
        return a;
    }
    a + (b - a) * (h - lo as f64)
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median and quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    #[serde(with = "ext_f64")]
    pub q1: f64,
    #[serde(with = "ext_f64")]
    pub median: f64,
    #[serde(with = "ext_f64")]
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let s = sorted(values);
        Self {
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
        }
    }

    pub fn iqr(&self) -> f64 {
        if self.q3 == self.q1 {
            0.0
        } else {
            self.q3 - self.q1
        }
    }
}

/// Box-plot summary with whiskers at the most extreme data within
/// `1.5 * IQR` of the quartiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub count: usize,
    #[serde(with = "ext_f64")]
    pub lower_whisker: f64,
    #[serde(with = "ext_f64")]
    pub q1: f64,
    #[serde(with = "ext_f64")]
    pub median: f64,
    #[serde(with = "ext_f64")]
    pub q3: f64,
    #[serde(with = "ext_f64")]
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

impl BoxSummary {
    pub fn of(values: &[f64]) -> Self {
        let s = sorted(values);
        let q = Quartiles {
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
        };
        let fence = 1.5 * q.iqr();
        let (lo, hi) = (q.q1 - fence, q.q3 + fence);
        let inside: Vec<f64> = s.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
        Self {
            count: s.len(),
            lower_whisker: inside.first().copied().unwrap_or(f64::NAN),
            q1: q.q1,
            median: q.median,
            q3: q.q3,
            upper_whisker: inside.last().copied().unwrap_or(f64::NAN),
            outliers: s.iter().copied().filter(|v| *v < lo || *v > hi).collect(),
        }
    }

    /// `(name, value)` pairs in plotting order.
    pub fn quantiles(&self) -> [(&'static str, f64); 5] {
        [
            ("lower_whisker", self.lower_whisker),
            ("q1", self.q1),
            ("median", self.median),
            ("q3", self.q3),
            ("upper_whisker", self.upper_whisker),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interpolated_quartiles() {
        let q = Quartiles::of(&[0.6, 0.2, 0.4]);
        assert_abs_diff_eq!(q.median, 0.4);
        assert_abs_diff_eq!(q.q1, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(q.q3, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn constant_data_has_zero_iqr() {
        let q = Quartiles::of(&[f64::NEG_INFINITY; 4]);
        assert_eq!(q.median, f64::NEG_INFINITY);
        assert_eq!(q.iqr(), 0.0);
    }

    #[test]
    fn box_whiskers_and_outliers() {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0, 100.0];
        let b = BoxSummary::of(&data);
        assert_eq!(b.count, 6);
        assert_abs_diff_eq!(b.q1, 2.25);
        assert_abs_diff_eq!(b.q3, 4.75);
        assert_eq!(b.lower_whisker, 1.0);
        assert_eq!(b.upper_whisker, 5.0);
        assert_eq!(b.outliers, vec![100.0]);
    }

    #[test]
    fn empty_summary_is_nan() {
        let b = BoxSummary::of(&[]);
        assert!(b.median.is_nan() && b.lower_whisker.is_nan());
    }
}
