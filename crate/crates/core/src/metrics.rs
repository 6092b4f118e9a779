//! Variable-averaged forecast accuracy metrics.
//!
//! `pred` and `meas` are `n x m` matrices (variables by steps). NRMSE and
//! NAMMAE normalize by the population standard deviation of the measured
//! series; Pearson's R uses the sample convention.

use std::f64::consts::FRAC_PI_4;

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableMetrics {
    pub nrmse: f64,
    pub pearson_r: f64,
    pub aam: f64,
    pub nammae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nrmse: f64,
    pub pearson_r: f64,
    pub aam: f64,
    pub nammae: f64,
    pub per_variable: Vec<VariableMetrics>,
}

fn check_shapes(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>) -> Result<()> {
    if pred.nrows() != meas.nrows() || pred.ncols() != meas.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "prediction is {}x{}, measurement is {}x{}",
            pred.nrows(),
            pred.ncols(),
            meas.nrows(),
            meas.ncols()
        )));
    }
    if meas.nrows() == 0 || meas.ncols() == 0 {
        return Err(Error::ShapeMismatch("empty series".into()));
    }
    Ok(())
}

fn row(a: MatRef<'_, f64>, i: usize) -> impl Iterator<Item = f64> + '_ {
    (0..a.ncols()).map(move |j| a[(i, j)])
}

fn mean(a: MatRef<'_, f64>, i: usize) -> f64 {
    row(a, i).sum::<f64>() / a.ncols() as f64
}

fn population_std(a: MatRef<'_, f64>, i: usize) -> f64 {
    let mu = mean(a, i);
    (row(a, i).map(|v| (v - mu).powi(2)).sum::<f64>() / a.ncols() as f64).sqrt()
}

fn nonzero_std(a: MatRef<'_, f64>, i: usize, std: f64) -> Result<f64> {
    let scale = row(a, i).fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if std > f64::EPSILON * scale && std > 0.0 {
        Ok(std)
    } else {
        Err(Error::ZeroVariance {
            variable: format!("#{i}"),
        })
    }
}

fn nrmse_row(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>, i: usize) -> Result<f64> {
    let sigma = nonzero_std(meas, i, population_std(meas, i))?;
    let m = meas.ncols() as f64;
    let sse: f64 = row(pred, i).zip(row(meas, i)).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sse / (m * sigma * sigma)).sqrt())
}

fn pearson_row(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>, i: usize) -> Result<f64> {
    let (mx, my) = (mean(pred, i), mean(meas, i));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in row(pred, i).zip(row(meas, i)) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    // the (m - 1) factors of the sample deviations cancel
    let m = meas.ncols() as f64;
    if meas.ncols() < 2 {
        return Err(Error::ZeroVariance { variable: format!("#{i}") });
    }
    nonzero_std(pred, i, (sxx / m).sqrt())?;
    nonzero_std(meas, i, (syy / m).sqrt())?;
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn aam_row(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>, i: usize) -> Result<f64> {
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (x, y) in row(pred, i).zip(row(meas, i)) {
        let d = x.hypot(y);
        if d == 0.0 {
            continue;
        }
        // arccos(|x + y| / (sqrt2 d)) written as an arctangent, exact at alpha = 0
        let alpha = (x - y).abs().atan2((x + y).abs());
        weighted += d * alpha;
        total += d;
    }
    if total == 0.0 {
        return Err(Error::AllZero { variable: format!("#{i}") });
    }
    Ok(1.0 - (weighted / total) / FRAC_PI_4)
}

fn nammae_row(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>, i: usize) -> Result<f64> {
    let sigma = nonzero_std(meas, i, population_std(meas, i))?;
    let (pmin, pmax) = row(pred, i).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (mmin, mmax) = row(meas, i).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(((pmin - mmin).abs() + (pmax - mmax).abs()) / (2.0 * sigma))
}

fn averaged(
    pred: MatRef<'_, f64>,
    meas: MatRef<'_, f64>,
    f: fn(MatRef<'_, f64>, MatRef<'_, f64>, usize) -> Result<f64>,
) -> Result<f64> {
    check_shapes(pred, meas)?;
    let n = meas.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        acc += f(pred, meas, i)?;
    }
    Ok(acc / n as f64)
}

/// Normalized root mean square error, averaged over variables.
pub fn nrmse(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>) -> Result<f64> {
    averaged(pred, meas, nrmse_row)
}

/// Pearson correlation coefficient, averaged over variables.
pub fn pearson(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>) -> Result<f64> {
    averaged(pred, meas, pearson_row)
}

/// Average angle measure, averaged over variables.
pub fn aam(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>) -> Result<f64> {
    averaged(pred, meas, aam_row)
}

/// Normalized average min/max absolute error.
pub fn nammae(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>) -> Result<f64> {
    averaged(pred, meas, nammae_row)
}

/// All four metrics, per variable and averaged.
pub fn evaluate(pred: MatRef<'_, f64>, meas: MatRef<'_, f64>) -> Result<MetricReport> {
    check_shapes(pred, meas)?;
    let n = meas.nrows();
    let mut per_variable = Vec::with_capacity(n);
    for i in 0..n {
        per_variable.push(VariableMetrics {
            nrmse: nrmse_row(pred, meas, i)?,
            pearson_r: pearson_row(pred, meas, i)?,
            aam: aam_row(pred, meas, i)?,
            nammae: nammae_row(pred, meas, i)?,
        });
    }
    let avg = |f: fn(&VariableMetrics) -> f64| per_variable.iter().map(f).sum::<f64>() / n as f64;
    Ok(MetricReport {
        nrmse: avg(|v| v.nrmse),
        pearson_r: avg(|v| v.pearson_r),
        aam: avg(|v| v.aam),
        nammae: avg(|v| v.nammae),
        per_variable,
    })
}

/// Replaces `#i` placeholders in variable-level errors with real names.
pub fn name_error(err: Error, names: &[String]) -> Error {
    let rename = |v: String| {
        v.strip_prefix('#')
            .and_then(|i| i.parse::<usize>().ok())
            .and_then(|i| names.get(i).cloned())
            .unwrap_or(v)
    };
    match err {
        Error::ZeroVariance { variable } => Error::ZeroVariance { variable: rename(variable) },
        Error::AllZero { variable } => Error::AllZero { variable: rename(variable) },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use faer::Mat;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    fn mat(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn perfect_prediction() {
        let y = mat(&[&[1.0, -2.0, 0.5, 3.0], &[0.1, 0.2, -0.4, 0.0]]);
        let r = evaluate(y.as_ref(), y.as_ref()).unwrap();
        assert_eq!(r.nrmse, 0.0);
        assert_abs_diff_eq!(r.pearson_r, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.aam, 1.0, epsilon = 1e-12);
        assert_eq!(r.nammae, 0.0);
    }

    #[test]
    fn nrmse_hand_values() {
        let meas = mat(&[&[1.0, -1.0, 1.0, -1.0]]);
        let pred = mat(&[&[0.0; 4]]);
        assert_abs_diff_eq!(nrmse(pred.as_ref(), meas.as_ref()).unwrap(), 1.0, epsilon = 1e-15);

        let meas = mat(&[&[1.0, -1.0, 1.0, -1.0], &[1.0, -1.0, 1.0, -1.0]]);
        let pred = mat(&[&[0.0; 4], &[1.0, -1.0, 1.0, -1.0]]);
        assert_abs_diff_eq!(nrmse(pred.as_ref(), meas.as_ref()).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn pearson_signs_and_affine() {
        let y = mat(&[&[1.0, 3.0, 2.0, 5.0, 4.0]]);
        let neg = Mat::from_fn(1, 5, |i, j| -y[(i, j)]);
        let aff = Mat::from_fn(1, 5, |i, j| 2.5 * y[(i, j)] - 7.0);
        assert_abs_diff_eq!(pearson(neg.as_ref(), y.as_ref()).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pearson(aff.as_ref(), y.as_ref()).unwrap(), 1.0, epsilon = 1e-12);
        let flat = mat(&[&[2.0; 5]]);
        assert!(matches!(pearson(flat.as_ref(), y.as_ref()), Err(Error::ZeroVariance { .. })));
    }

    #[test]
    fn aam_hand_values() {
        let y = mat(&[&[1.0, -2.0, 0.5]]);
        let neg = Mat::from_fn(1, 3, |i, j| -y[(i, j)]);
        assert_abs_diff_eq!(aam(y.as_ref(), y.as_ref()).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(aam(neg.as_ref(), y.as_ref()).unwrap(), -1.0, epsilon = 1e-12);

        // second step: pred 0, meas 1 -> alpha = pi/4 with weight 1
        let pred = mat(&[&[1.0, 0.0]]);
        let meas = mat(&[&[1.0, 1.0]]);
        let expect = 1.0 - (4.0 / PI) * (PI / 4.0) / (SQRT_2 + 1.0);
        assert_abs_diff_eq!(aam(pred.as_ref(), meas.as_ref()).unwrap(), expect, epsilon = 1e-12);

        let zero = mat(&[&[0.0, 0.0]]);
        assert!(matches!(aam(zero.as_ref(), zero.as_ref()), Err(Error::AllZero { .. })));
    }

    #[test]
    fn nammae_hand_values() {
        let meas = mat(&[&[-1.0, 1.0]]);
        let pred = mat(&[&[-2.0, 3.0]]);
        assert_abs_diff_eq!(nammae(pred.as_ref(), meas.as_ref()).unwrap(), 1.5, epsilon = 1e-15);

        let meas = mat(&[&[0.0, 2.0, 1.0, 3.0]]);
        let shifted = Mat::from_fn(1, 4, |i, j| meas[(i, j)] + 0.7);
        let sigma = (1.25f64).sqrt();
        assert_abs_diff_eq!(nammae(shifted.as_ref(), meas.as_ref()).unwrap(), 0.7 / sigma, epsilon = 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = mat(&[&[1.0, 2.0]]);
        let b = mat(&[&[1.0, 2.0, 3.0]]);
        assert!(matches!(nrmse(a.as_ref(), b.as_ref()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn errors_are_named() {
        let e = name_error(Error::ZeroVariance { variable: "#1".into() }, &["a".into(), "b".into()]);
        assert!(e.to_string().contains("`b`"));
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..20).prop_flat_map(|m| {
            (
                prop::collection::vec(-10.0f64..10.0, m),
                prop::collection::vec(-10.0f64..10.0, m),
            )
        })
    }

    proptest! {
        #[test]
        fn ranges_and_scale_invariance((x, y) in pair(), a in 0.1f64..5.0, b in -3.0f64..3.0, sign in prop::bool::ANY) {
            let m = x.len();
            let pred = Mat::from_fn(1, m, |_, j| x[j]);
            let meas = Mat::from_fn(1, m, |_, j| y[j]);
            prop_assume!(population_std(meas.as_ref(), 0) > 1e-3 && population_std(pred.as_ref(), 0) > 1e-3);
            let r = evaluate(pred.as_ref(), meas.as_ref()).unwrap();
            prop_assert!(r.nrmse >= 0.0 && r.nammae >= 0.0);
            prop_assert!((-1.0..=1.0).contains(&r.pearson_r));
            prop_assert!((-1.0..=1.0).contains(&r.aam));

            let a = if sign { a } else { -a };
            let tp = Mat::from_fn(1, m, |_, j| a * x[j] + b);
            let tm = Mat::from_fn(1, m, |_, j| a * y[j] + b);
            let n1 = nrmse(tp.as_ref(), tm.as_ref()).unwrap();
            prop_assert!((n1 - r.nrmse).abs() <= 1e-9 * (1.0 + r.nrmse));
            let n2 = nammae(tp.as_ref(), tm.as_ref()).unwrap();
            prop_assert!((n2 - r.nammae).abs() <= 1e-9 * (1.0 + r.nammae));

            let pa = Mat::from_fn(1, m, |_, j| a.abs() * x[j] + b);
            let p2 = pearson(pa.as_ref(), meas.as_ref()).unwrap();
            prop_assert!((p2 - r.pearson_r).abs() <= 1e-12);
        }
    }
}
