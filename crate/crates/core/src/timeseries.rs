//! Uniformly sampled multivariate records, standardization and window
//! extraction.
//!
//! Time is indexed in integer steps throughout. Encounter-wave units only
//! appear through [`TimeSeries::steps_per_wave`].

use std::collections::HashSet;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of samples per encounter wave.
pub const DEFAULT_STEPS_PER_WAVE: usize = 32;

/// Relative tolerance on the spacing of the `t` column when loading CSV.
const SPACING_RTOL: f64 = 1e-6;

/// An `n`-variable record sampled every `dt` seconds, stored as an
/// `n x m` matrix (one row per variable, one column per step).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Mat<f64>,
    dt: f64,
    names: Vec<String>,
    steps_per_wave: usize,
}

impl TimeSeries {
    pub fn new(
        values: Mat<f64>,
        dt: f64,
        names: Vec<String>,
        steps_per_wave: usize,
    ) -> Result<Self> {
        if values.ncols() < 2 {
            return Err(Error::InvalidSeries(format!(
                "at least 2 steps required, got {}",
                values.ncols()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::InvalidSeries("no variables".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSeries(format!("dt must be positive, got {dt}")));
        }
        if steps_per_wave == 0 {
            return Err(Error::InvalidSeries("steps_per_wave must be positive".into()));
        }
        if names.len() != values.nrows() {
            return Err(Error::InvalidSeries(format!(
                "{} names for {} variables",
                names.len(),
                values.nrows()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSeries(format!("duplicate variable name `{name}`")));
            }
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::InvalidSeries(format!(
                        "non-finite value in `{}` at step {j}",
                        names[i]
                    )));
                }
            }
        }
        Ok(Self {
            values,
            dt,
            names,
            steps_per_wave,
        })
    }

    /// Builds a series from rows, naming variables `x1..xn`.
    pub fn from_rows(rows: &[Vec<f64>], dt: f64, steps_per_wave: usize) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidSeries("ragged rows".into()));
        }
        let values = Mat::from_fn(n, m, |i, j| rows[i][j]);
        let names = (1..=n).map(|i| format!("x{i}")).collect();
        Self::new(values, dt, names, steps_per_wave)
    }

    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn steps_per_wave(&self) -> usize {
        self.steps_per_wave
    }

    pub fn n_vars(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    /// Encounter period in seconds.
    pub fn encounter_period(&self) -> f64 {
        self.dt * self.steps_per_wave as f64
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.values[(i, j)]).collect()
    }

    /// Columns `range` as a new series with the same metadata.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::OutOfBounds {
                start: range.start,
                end: range.end,
                lead: 0,
                len: self.len(),
            });
        }
        let values = self
            .values
            .as_ref()
            .subcols(range.start, range.end - range.start)
            .to_owned();
        Self::new(values, self.dt, self.names.clone(), self.steps_per_wave)
    }

    /// Raw columns `range`; unlike [`slice`](Self::slice) this may be empty.
    pub fn block(&self, range: Range<usize>) -> Mat<f64> {
        self.values
            .as_ref()
            .subcols(range.start, range.end - range.start)
            .to_owned()
    }

    /// Loads a CSV whose first column is `t` (seconds) and whose remaining
    /// columns are the variables.
    pub fn from_csv_path(path: impl AsRef<Path>, steps_per_wave: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, steps_per_wave)
    }

    pub fn from_csv_reader(reader: impl Read, steps_per_wave: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::InvalidSeries(
                "header needs a `t` column and at least one variable".into(),
            ));
        }
        if headers[0].trim() != "t" {
            return Err(Error::InvalidSeries(format!(
                "first column must be `t`, found `{}`",
                &headers[0]
            )));
        }
        let names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let n = names.len();
        let mut times = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            // header is line 1
            let line = line + 2;
            if record.len() != n + 1 {
                return Err(Error::InvalidSeries(format!(
                    "line {line}: expected {} fields, found {}",
                    n + 1,
                    record.len()
                )));
            }
            let parse = |k: usize| -> Result<f64> {
                record[k].trim().parse::<f64>().map_err(|_| {
                    let col = if k == 0 { "t" } else { names[k - 1].as_str() };
                    Error::InvalidSeries(format!(
                        "line {line}: `{}` is not a number in column `{col}`",
                        &record[k]
                    ))
                })
            };
            times.push(parse(0)?);
            let mut col = Vec::with_capacity(n);
            for k in 1..=n {
                col.push(parse(k)?);
            }
            cols.push(col);
        }
        let m = times.len();
        if m < 2 {
            return Err(Error::InvalidSeries(format!("at least 2 rows required, got {m}")));
        }
        let dt = (times[m - 1] - times[0]) / (m - 1) as f64;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSeries("time column must be increasing".into()));
        }
        for k in 1..m {
            let step = times[k] - times[k - 1];
            if (step - dt).abs() > SPACING_RTOL * dt {
                return Err(Error::InvalidSeries(format!(
                    "non-uniform spacing at step {k}: {step} vs {dt}"
                )));
            }
        }
        let values = Mat::from_fn(n, m, |i, j| cols[j][i]);
        Self::new(values, dt, names, steps_per_wave)
    }

    /// Writes the series in the same layout [`from_csv_reader`](Self::from_csv_reader) reads.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for j in 0..self.len() {
            let mut rec = Vec::with_capacity(self.n_vars() + 1);
            rec.push((j as f64 * self.dt).to_string());
            for i in 0..self.n_vars() {
                rec.push(self.values[(i, j)].to_string());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Per-variable affine transform to zero mean and unit (population) variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationRecord {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationRecord {
    /// Statistics of `values` over the columns in `segment`.
    pub fn from_segment(values: MatRef<'_, f64>, names: &[String], segment: Range<usize>) -> Result<Self> {
        if segment.end > values.ncols() || segment.start >= segment.end {
            return Err(Error::OutOfBounds {
                start: segment.start,
                end: segment.end,
                lead: 0,
                len: values.ncols(),
            });
        }
        let len = (segment.end - segment.start) as f64;
        let mut mean = Vec::with_capacity(values.nrows());
        let mut std = Vec::with_capacity(values.nrows());
        for i in 0..values.nrows() {
            let mu = segment.clone().map(|j| values[(i, j)]).sum::<f64>() / len;
            let var = segment
                .clone()
                .map(|j| (values[(i, j)] - mu).powi(2))
                .sum::<f64>()
                / len;
            let scale = segment
                .clone()
                .map(|j| values[(i, j)].abs())
                .fold(0.0_f64, f64::max);
            let sd = var.sqrt();
            if !(sd > f64::EPSILON * scale.max(f64::MIN_POSITIVE)) {
                return Err(Error::ZeroVariance {
                    variable: names.get(i).cloned().unwrap_or_else(|| format!("#{i}")),
                });
            }
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self { mean, std })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    pub fn apply(&self, values: MatRef<'_, f64>) -> Mat<f64> {
        Mat::from_fn(values.nrows(), values.ncols(), |i, j| {
            (values[(i, j)] - self.mean[i]) / self.std[i]
        })
    }

    pub fn invert(&self, values: MatRef<'_, f64>) -> Mat<f64> {
        Mat::from_fn(values.nrows(), values.ncols(), |i, j| {
            values[(i, j)] * self.std[i] + self.mean[i]
        })
    }
}

/// Standardizes the whole series with statistics taken from `segment` only.
pub fn standardize(ts: &TimeSeries, segment: Range<usize>) -> Result<(TimeSeries, StandardizationRecord)> {
    let record = StandardizationRecord::from_segment(ts.values(), ts.names(), segment)?;
    let values = record.apply(ts.values());
    let out = TimeSeries {
        values,
        dt: ts.dt,
        names: ts.names.clone(),
        steps_per_wave: ts.steps_per_wave,
    };
    Ok((out, record))
}

pub fn destandardize(ts: &TimeSeries, record: &StandardizationRecord) -> Result<TimeSeries> {
    if record.mean.len() != ts.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: ts.n_vars(),
            found: record.mean.len(),
        });
    }
    Ok(TimeSeries {
        values: record.invert(ts.values()),
        dt: ts.dt,
        names: ts.names.clone(),
        steps_per_wave: ts.steps_per_wave,
    })
}

/// Placement of one training/test window inside a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub start: usize,
    pub niw: usize,
    pub now: usize,
    /// Leading history steps needed before `start`.
    pub lead: usize,
}

impl WindowSpec {
    pub fn train_range(&self, steps_per_wave: usize) -> Range<usize> {
        self.start..self.start + self.niw * steps_per_wave
    }

    pub fn test_range(&self, steps_per_wave: usize) -> Range<usize> {
        let t = self.train_range(steps_per_wave).end;
        t..t + self.now * steps_per_wave
    }

    pub fn history_range(&self) -> Range<usize> {
        self.start.saturating_sub(self.lead)..self.start
    }

    /// The contiguous span history‖train‖test.
    pub fn full_range(&self, steps_per_wave: usize) -> Range<usize> {
        self.start.saturating_sub(self.lead)..self.test_range(steps_per_wave).end
    }

    pub fn check(&self, len: usize, steps_per_wave: usize) -> Result<()> {
        let end = self.test_range(steps_per_wave).end;
        if self.niw == 0 || self.now == 0 || self.start < self.lead || end > len {
            return Err(Error::OutOfBounds {
                start: self.start,
                end,
                lead: self.lead,
                len,
            });
        }
        Ok(())
    }
}

/// The three contiguous pieces of a window.
#[derive(Debug, Clone)]
pub struct WindowSlices {
    /// `n x lead` block immediately preceding `train` (may have zero columns).
    pub history: Mat<f64>,
    pub train: TimeSeries,
    pub test: TimeSeries,
}

pub fn extract_window(ts: &TimeSeries, w: &WindowSpec) -> Result<WindowSlices> {
    let spw = ts.steps_per_wave;
    w.check(ts.len(), spw)?;
    Ok(WindowSlices {
        history: ts.block(w.history_range()),
        train: ts.slice(w.train_range(spw))?,
        test: ts.slice(w.test_range(spw))?,
    })
}

/// Draws `count` window placements uniformly (with replacement) over all
/// valid start indices.
pub fn sample_windows(
    ts: &TimeSeries,
    niw: usize,
    now: usize,
    lead: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<WindowSpec>> {
    let span = (niw + now) * ts.steps_per_wave;
    let needed = lead + span;
    if niw == 0 || now == 0 || needed > ts.len() {
        return Err(Error::NoValidWindow {
            needed,
            available: ts.len(),
        });
    }
    let last_start = ts.len() - span;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| WindowSpec {
            start: rng.random_range(lead..=last_start),
            niw,
            now,
            lead,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(rows: &[Vec<f64>]) -> TimeSeries {
        TimeSeries::from_rows(rows, 1.0, 32).unwrap()
    }

    fn ramp(m: usize) -> TimeSeries {
        series(&[(0..m).map(|k| k as f64).collect()])
    }

    #[test]
    fn standardize_affine_row() {
        let ts = series(&[vec![2.0, 4.0, 6.0]]);
        let (out, rec) = standardize(&ts, 0..3).unwrap();
        let c = (1.5f64).sqrt();
        assert_abs_diff_eq!(out.values()[(0, 0)], -c, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values()[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values()[(0, 2)], c, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.mean[0], 4.0);
        assert_abs_diff_eq!(rec.std[0], (8.0f64 / 3.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn standardize_is_idempotent() {
        let ts = series(&[vec![2.0, 4.0, 6.0, 1.0], vec![0.5, -1.0, 3.0, 2.0]]);
        let (once, _) = standardize(&ts, 0..4).unwrap();
        let (twice, rec) = standardize(&once, 0..4).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(rec.mean[i], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(rec.std[i], 1.0, epsilon = 1e-12);
            for j in 0..4 {
                assert_abs_diff_eq!(once.values()[(i, j)], twice.values()[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_channel_is_rejected() {
        let ts = series(&[vec![1.0, 1.0, 1.0]]);
        assert!(matches!(standardize(&ts, 0..3), Err(Error::ZeroVariance { .. })));
    }

    #[test]
    fn statistics_come_from_segment_only() {
        let ts = series(&[vec![0.0, 2.0, 100.0, -50.0]]);
        let (out, rec) = standardize(&ts, 0..2).unwrap();
        assert_abs_diff_eq!(rec.mean[0], 1.0);
        assert_abs_diff_eq!(rec.std[0], 1.0);
        assert_abs_diff_eq!(out.values()[(0, 2)], 99.0);
    }

    #[test]
    fn window_index_arithmetic() {
        let ts = ramp(320);
        let w = WindowSpec { start: 64, niw: 4, now: 2, lead: 0 };
        let s = extract_window(&ts, &w).unwrap();
        assert_eq!(s.train.len(), 128);
        assert_eq!(s.train.values()[(0, 0)], 64.0);
        assert_eq!(s.test.values()[(0, 0)], 192.0);
        assert_eq!(s.test.len(), 64);
        assert_eq!(s.history.ncols(), 0);

        let w = WindowSpec { lead: 16, ..w };
        let s = extract_window(&ts, &w).unwrap();
        assert_eq!(s.history.ncols(), 16);
        assert_eq!(s.history[(0, 0)], 48.0);
        assert_eq!(s.history[(0, 15)], 63.0);
    }

    #[test]
    fn window_without_room_for_lead_is_out_of_bounds() {
        let ts = ramp(320);
        let w = WindowSpec { start: 0, niw: 4, now: 2, lead: 1 };
        assert!(matches!(extract_window(&ts, &w), Err(Error::OutOfBounds { .. })));
        let w = WindowSpec { start: 200, niw: 4, now: 2, lead: 0 };
        assert!(matches!(extract_window(&ts, &w), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn sampling_is_deterministic() {
        let ts = ramp(2000);
        let a = sample_windows(&ts, 2, 1, 5, 1001, 7).unwrap();
        let b = sample_windows(&ts, 2, 1, 5, 1001, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1001);
        let c = sample_windows(&ts, 2, 1, 5, 1001, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_valid_start() {
        let ts = ramp(3 + 3 * 32);
        let w = sample_windows(&ts, 2, 1, 3, 50, 1).unwrap();
        assert!(w.iter().all(|w| w.start == 3));
        assert!(matches!(
            sample_windows(&ts, 2, 1, 4, 50, 1),
            Err(Error::NoValidWindow { .. })
        ));
    }

    #[test]
    fn sampled_starts_are_uniform() {
        // chi-square goodness of fit over 10 equal-width bins
        let ts = ramp(1000 + 2 * 32);
        let starts = sample_windows(&ts, 1, 1, 0, 1001, 2024).unwrap();
        let valid = 1001; // starts 0..=1000
        let bins = 10;
        let mut hist = vec![0usize; bins];
        for w in &starts {
            hist[w.start * bins / valid] += 1;
        }
        let expected: Vec<f64> = (0..bins)
            .map(|b| {
                let lo = (b * valid).div_ceil(bins);
                let hi = ((b + 1) * valid).div_ceil(bins);
                (hi - lo) as f64 * 1001.0 / valid as f64
            })
            .collect();
        let chi2: f64 = hist
            .iter()
            .zip(&expected)
            .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
            .sum();
        // chi-square critical value, 9 degrees of freedom, alpha = 0.01
        assert!(chi2 < 21.666, "chi2 = {chi2}, hist = {hist:?}");
    }

    #[test]
    fn csv_round_trip() {
        let ts = TimeSeries::new(
            Mat::from_fn(2, 5, |i, j| (i as f64 + 1.0) * (j as f64).sin()),
            0.25,
            vec!["heave".into(), "roll".into()],
            32,
        )
        .unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let back = TimeSeries::from_csv_reader(buf.as_slice(), 32).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn csv_rejects_non_uniform_spacing() {
        let text = "t,a\n0,1\n1,2\n2.5,3\n";
        let err = TimeSeries::from_csv_reader(text.as_bytes(), 32).unwrap_err();
        assert!(err.to_string().contains("non-uniform"), "{err}");
    }

    #[test]
    fn csv_reports_offending_field() {
        let text = "t,a,b\n0,1,2\n1,2,oops\n";
        let err = TimeSeries::from_csv_reader(text.as_bytes(), 32).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("`b`"), "{msg}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let r = TimeSeries::new(Mat::zeros(2, 3), 1.0, vec!["a".into(), "a".into()], 32);
        assert!(matches!(r, Err(Error::InvalidSeries(_))));
    }
}
