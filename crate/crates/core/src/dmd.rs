//! Operator fit, spectrum, stabilization and forecasting.
//!
//! The discrete operator is `A = X' pinv(X)`, computed directly with a
//! rank threshold of `max(p, q) * eps * sigma_max` and no projection onto a
//! reduced basis. Each eigenpair `(lambda_k, phi_k)` of `A` gives a
//! continuous frequency `omega_k = ln(lambda_k) / dt` (principal branch),
//! and the forecast is the modal expansion
//! `x(t) = sum_k phi_k b_k exp(omega_k t)` with `b = pinv(Phi) x0`.

use std::path::Path;

use faer::prelude::Solve;
use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::augmentation::{AugmentationSpec, Block, Layout, SnapshotPair};
use crate::error::{Error, Result};
use crate::linalg::{self, RankRevealed};
use crate::serial::{cplx_columns, cplx_vec};
use crate::timeseries::{StandardizationRecord, WindowSpec};

/// Eigenvalues with modulus below this are excluded from forecasts.
pub const ZERO_EIGENVALUE: f64 = 1e-14;

/// Fits the discrete operator `A` minimizing `||X' - A X||_F`.
pub fn fit(pair: &SnapshotPair, dt: f64) -> Result<Mat<f64>> {
    check_fit_input(pair, dt)?;
    let svd = RankRevealed::new(pair.x.as_ref())?;
    // X' V S^-1 U^T
    let xv = &pair.xp * &svd.v;
    let b = Mat::from_fn(xv.nrows(), svd.rank(), |i, k| xv[(i, k)] / svd.s[k]);
    Ok(&b * svd.u.transpose())
}

fn check_fit_input(pair: &SnapshotPair, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidSeries(format!("dt must be positive, got {dt}")));
    }
    if pair.is_empty() {
        return Err(Error::EmptyWindow(pair.len() + 1));
    }
    Ok(())
}

/// Eigenpairs of a real operator and their continuous-time frequencies.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<c64>,
    /// Unit-norm columns, phase fixed so the largest component is real positive.
    pub modes: Mat<c64>,
    pub omegas: Vec<c64>,
    pub excluded: Vec<bool>,
}

/// `ln(lambda) / dt` on the principal branch, `Im in (-pi/dt, pi/dt]`.
/// Returns `None` for eigenvalues below [`ZERO_EIGENVALUE`].
pub fn continuous_frequency(lambda: c64, dt: f64) -> Option<c64> {
    if lambda.norm() < ZERO_EIGENVALUE {
        return None;
    }
    // -0.0 would put negative reals on the wrong side of the branch cut
    let lambda = if lambda.im == 0.0 { c64::new(lambda.re, 0.0) } else { lambda };
    Some(lambda.ln() / dt)
}

fn zero_omega() -> c64 {
    c64::new(f64::NEG_INFINITY, 0.0)
}

/// Rescales column `k` in place and returns the factor applied.
fn normalize_mode(modes: &mut Mat<c64>, k: usize) -> c64 {
    let p = modes.nrows();
    let mut best = 0;
    let mut best_mag = -1.0;
    let mut norm2 = 0.0;
    for i in 0..p {
        let mag = modes[(i, k)].norm();
        norm2 += mag * mag;
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return c64::new(1.0, 0.0);
    }
    let norm = norm2.sqrt();
    let pivot = modes[(best, k)];
    let phase = pivot.conj() / pivot.norm();
    for i in 0..p {
        modes[(i, k)] = modes[(i, k)] * phase / norm;
    }
    modes[(best, k)] = c64::new(modes[(best, k)].re, 0.0);
    phase / norm
}

pub fn eigendecompose(a: MatRef<'_, f64>, dt: f64) -> Result<Spectrum> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "operator must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let evd = a.eigen().map_err(|_| Error::EigFailure)?;
    let p = a.nrows();
    let s = evd.S().column_vector();
    let eigenvalues: Vec<c64> = (0..p).map(|k| s[k]).collect();
    if eigenvalues.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
        return Err(Error::EigFailure);
    }
    let mut modes = evd.U().to_owned();
    for k in 0..p {
        normalize_mode(&mut modes, k);
    }
    let (omegas, excluded) = frequencies(&eigenvalues, dt);
    Ok(Spectrum {
        eigenvalues,
        modes,
        omegas,
        excluded,
    })
}

fn frequencies(eigenvalues: &[c64], dt: f64) -> (Vec<c64>, Vec<bool>) {
    let mut omegas = Vec::with_capacity(eigenvalues.len());
    let mut excluded = Vec::with_capacity(eigenvalues.len());
    for &l in eigenvalues {
        match continuous_frequency(l, dt) {
            Some(w) => {
                omegas.push(w);
                excluded.push(false);
            }
            None => {
                omegas.push(zero_omega());
                excluded.push(true);
            }
        }
    }
    (omegas, excluded)
}

/// Eigenpairs of the operator restricted to the numerical range of `X`.
///
/// With `X = U S V^T` and `B = X' V S^-1`, `A = B U^T`, so every eigenpair
/// `(lambda, w)` of `U^T B` with `lambda != 0` gives the eigenpair
/// `(lambda, B w)` of `A`, and the orthogonal complement of `U` spans the
/// null space of `A`.
struct Restricted {
    u: Mat<f64>,
    b: Mat<f64>,
    w: Mat<c64>,
    eigenvalues: Vec<c64>,
    /// `W^-1 U^T x0`
    y: Vec<c64>,
}

/// `None` when the restricted operator is singular or its eigenvectors are
/// numerically dependent, leaving the caller to use the dense path.
fn restricted(pair: &SnapshotPair) -> Result<Option<Restricted>> {
    let svd = RankRevealed::new(pair.x.as_ref())?;
    let (p, r) = (pair.dim(), svd.rank());
    let xv = &pair.xp * &svd.v;
    let b = Mat::from_fn(p, r, |i, k| xv[(i, k)] / svd.s[k]);
    let a_r = svd.u.transpose() * &b;
    let evd = a_r.eigen().map_err(|_| Error::EigFailure)?;
    let lam = evd.S().column_vector();
    let eigenvalues: Vec<c64> = (0..r).map(|k| lam[k]).collect();
    if eigenvalues.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
        return Err(Error::EigFailure);
    }
    if eigenvalues.iter().any(|l| l.norm() < ZERO_EIGENVALUE) {
        return Ok(None);
    }
    let w = evd.U().to_owned();
    let x0 = pair.last_snapshot();
    let utx = Mat::<c64>::from_fn(r, 1, |k, _| c64::new((0..p).map(|i| svd.u[(i, k)] * x0[i]).sum(), 0.0));
    let y = w.partial_piv_lu().solve(&utx);
    let y: Vec<c64> = (0..r).map(|k| y[(k, 0)]).collect();
    if y.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Ok(None);
    }
    Ok(Some(Restricted {
        u: svd.u,
        b,
        w,
        eigenvalues,
        y,
    }))
}

/// Model parts produced by [`reduced_fit`].
struct ReducedFit {
    spectrum: Spectrum,
    amplitudes: Vec<c64>,
}

fn reduced_fit(pair: &SnapshotPair, dt: f64) -> Result<Option<ReducedFit>> {
    let Some(core) = restricted(pair)? else {
        return Ok(None);
    };
    let (p, r) = (pair.dim(), core.eigenvalues.len());
    let bc = Mat::<c64>::from_fn(p, r, |i, k| c64::new(core.b[(i, k)], 0.0));
    let mut modes = Mat::<c64>::zeros(p, p);
    modes.subcols_mut(0, r).copy_from(&bc * &core.w);
    if r < p {
        let q = core.u.qr().compute_Q();
        for k in r..p {
            for i in 0..p {
                modes[(i, k)] = c64::new(q[(i, k)], 0.0);
            }
        }
    }
    let scale: Vec<c64> = (0..p).map(|k| normalize_mode(&mut modes, k)).collect();
    let mut eigenvalues = core.eigenvalues;
    eigenvalues.extend(std::iter::repeat_n(c64::new(0.0, 0.0), p - r));

    // U^T Phi_r = W Lambda C, so b_r = C^-1 Lambda^-1 W^-1 U^T x0, and the
    // null-space amplitudes take the remainder.
    let mut amplitudes: Vec<c64> = (0..r).map(|k| core.y[k] / (eigenvalues[k] * scale[k])).collect();
    let mut rest: Vec<c64> = pair.last_snapshot().iter().map(|&v| c64::new(v, 0.0)).collect();
    for k in 0..r {
        for (i, v) in rest.iter_mut().enumerate() {
            *v -= modes[(i, k)] * amplitudes[k];
        }
    }
    for k in r..p {
        amplitudes.push((0..p).map(|i| modes[(i, k)] * rest[i]).sum());
    }
    let (omegas, excluded) = frequencies(&eigenvalues, dt);
    Ok(Some(ReducedFit {
        spectrum: Spectrum {
            eigenvalues,
            modes,
            omegas,
            excluded,
        },
        amplitudes,
    }))
}

/// State-row forecast of the model fitted to `pair`, optionally stabilized,
/// without assembling the model. Matches
/// `DmdModel::fit` followed by `stabilize` and `forecast`.
pub fn fit_forecast(pair: &SnapshotPair, dt: f64, stabilize: bool, horizon: usize) -> Result<Mat<f64>> {
    check_fit_input(pair, dt)?;
    let Some(core) = restricted(pair)? else {
        let mut model = DmdModel::fit_dense(pair, dt)?;
        if stabilize {
            model.stabilize();
        }
        return Ok(model.forecast(horizon));
    };
    let rows = pair.layout.rows(Block::State).unwrap_or(0..pair.layout.n_vars);
    let (n, r) = (rows.len(), core.eigenvalues.len());
    // phi_k b_k = B w_k y_k / lambda_k, whatever the normalization of phi_k
    let bs = Mat::<c64>::from_fn(n, r, |i, k| c64::new(core.b[(rows.start + i, k)], 0.0));
    let coef = Mat::<c64>::from_fn(r, r, |i, k| core.w[(i, k)] * (core.y[k] / core.eigenvalues[k]));
    let phi_b = &bs * &coef;
    let (omegas, _) = frequencies(&core.eigenvalues, dt);
    let mut acc = vec![0.0; n * horizon];
    let mut col = vec![c64::new(0.0, 0.0); n];
    for (k, &omega) in omegas.iter().enumerate() {
        let omega = if stabilize && omega.re > 0.0 { c64::new(0.0, omega.im) } else { omega };
        for (i, c) in col.iter_mut().enumerate() {
            *c = phi_b[(i, k)];
        }
        for j in 0..horizon {
            let e = (omega * ((j + 1) as f64 * dt)).exp();
            let dst = &mut acc[j * n..(j + 1) * n];
            for (d, c) in dst.iter_mut().zip(&col) {
                *d += c.re * e.re - c.im * e.im;
            }
        }
    }
    let out = Mat::from_fn(n, horizon, |i, j| acc[j * n + i]);
    Ok(out)
}

/// A fitted (possibly augmented) DMD model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmdModel {
    pub dim: usize,
    pub dt: f64,
    #[serde(with = "cplx_vec")]
    pub eigenvalues: Vec<c64>,
    #[serde(with = "cplx_columns")]
    pub modes: Mat<c64>,
    #[serde(with = "cplx_vec")]
    pub omegas: Vec<c64>,
    #[serde(with = "cplx_vec")]
    pub amplitudes: Vec<c64>,
    pub layout: Layout,
    pub standardization: StandardizationRecord,
    pub stabilized: Vec<bool>,
    pub excluded: Vec<bool>,
    pub names: Vec<String>,
    pub steps_per_wave: usize,
    pub augmentation: AugmentationSpec,
    pub window: Option<WindowSpec>,
}

impl DmdModel {
    /// Assembles a model from a spectrum and the forecast origin `x0`.
    pub fn from_spectrum(spectrum: Spectrum, dt: f64, layout: Layout, x0: &[f64]) -> Result<Self> {
        let dim = spectrum.eigenvalues.len();
        if layout.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: layout.dim(),
            });
        }
        let mut model = Self::assemble(spectrum, dt, layout, vec![c64::new(0.0, 0.0); dim]);
        model.amplitudes = model.amplitudes_for(x0)?;
        Ok(model)
    }

    fn assemble(spectrum: Spectrum, dt: f64, layout: Layout, amplitudes: Vec<c64>) -> Self {
        let dim = spectrum.eigenvalues.len();
        let n = layout.n_vars;
        let augmentation = AugmentationSpec {
            nde: layout
                .blocks
                .iter()
                .filter(|b| matches!(b, Block::Derivative(_)))
                .count(),
            nts: layout
                .blocks
                .iter()
                .filter(|b| matches!(b, Block::Shift(_)))
                .count(),
            scheme: Default::default(),
        };
        Self {
            dim,
            dt,
            eigenvalues: spectrum.eigenvalues,
            modes: spectrum.modes,
            omegas: spectrum.omegas,
            amplitudes,
            layout,
            standardization: StandardizationRecord::identity(n),
            stabilized: vec![false; dim],
            excluded: spectrum.excluded,
            names: (1..=n).map(|i| format!("x{i}")).collect(),
            steps_per_wave: crate::timeseries::DEFAULT_STEPS_PER_WAVE,
            augmentation,
            window: None,
        }
    }

    /// Full pipeline: fit, eigendecompose, amplitudes from the last snapshot.
    /// No stabilization is applied. Works in the numerical range of `X` and
    /// falls back to [`DmdModel::fit_dense`] when that operator is singular.
    pub fn fit(pair: &SnapshotPair, dt: f64) -> Result<Self> {
        check_fit_input(pair, dt)?;
        match reduced_fit(pair, dt)? {
            Some(r) => Ok(Self::assemble(r.spectrum, dt, pair.layout.clone(), r.amplitudes)),
            None => Self::fit_dense(pair, dt),
        }
    }

    /// The same model through the dense `p x p` operator.
    pub fn fit_dense(pair: &SnapshotPair, dt: f64) -> Result<Self> {
        let a = fit(pair, dt)?;
        let spectrum = eigendecompose(a.as_ref(), dt)?;
        Self::from_spectrum(spectrum, dt, pair.layout.clone(), &pair.last_snapshot())
    }

    pub fn n_vars(&self) -> usize {
        self.layout.n_vars
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }

    /// Sets `Re(omega) = 0` wherever it is positive and recomputes the
    /// corresponding eigenvalues. Modes and amplitudes are untouched.
    pub fn stabilize(&mut self) {
        for k in 0..self.dim {
            if self.excluded[k] {
                continue;
            }
            if self.omegas[k].re > 0.0 {
                self.omegas[k] = c64::new(0.0, self.omegas[k].im);
                self.eigenvalues[k] = (self.omegas[k] * self.dt).exp();
                self.stabilized[k] = true;
            }
        }
    }

    /// `b = pinv(Phi) x0`.
    pub fn amplitudes_for(&self, x0: &[f64]) -> Result<Vec<c64>> {
        if x0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x0.len(),
            });
        }
        let rhs: Vec<c64> = x0.iter().map(|&v| c64::new(v, 0.0)).collect();
        linalg::pinv_solve_complex(self.modes.as_ref(), &rhs)
    }

    /// Complex modal sum over all non-excluded modes at time `t` after the origin.
    pub fn modal_sum(&self, t: f64) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.dim];
        for k in 0..self.dim {
            if self.excluded[k] {
                continue;
            }
            let coef = self.amplitudes[k] * (self.omegas[k] * t).exp();
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.modes[(i, k)] * coef;
            }
        }
        out
    }

    /// Real part of the modal sum at steps `1..=horizon`, all `p` rows.
    pub fn forecast_augmented(&self, horizon: usize) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(self.dim, horizon);
        for j in 0..horizon {
            let x = self.modal_sum((j + 1) as f64 * self.dt);
            for (i, v) in x.iter().enumerate() {
                out[(i, j)] = v.re;
            }
        }
        out
    }

    /// Forecast of the original `n` variables at steps `1..=horizon`, in
    /// standardized units.
    pub fn forecast(&self, horizon: usize) -> Mat<f64> {
        let rows = self.layout.rows(Block::State).unwrap_or(0..self.n_vars());
        let n = rows.len();
        let mut out = Mat::<f64>::zeros(n, horizon);
        for k in 0..self.dim {
            if self.excluded[k] {
                continue;
            }
            for j in 0..horizon {
                let coef = self.amplitudes[k] * (self.omegas[k] * ((j + 1) as f64 * self.dt)).exp();
                for i in 0..n {
                    out[(i, j)] += (self.modes[(rows.start + i, k)] * coef).re;
                }
            }
        }
        out
    }

    /// Upper bound `sum_k |b_k| ||phi_k||` on the modal sum of a stable model.
    pub fn amplitude_bound(&self) -> f64 {
        (0..self.dim)
            .filter(|&k| !self.excluded[k])
            .map(|k| {
                let norm = (0..self.dim).map(|i| self.modes[(i, k)].norm_sqr()).sum::<f64>().sqrt();
                self.amplitudes[k].norm() * norm
            })
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<()> {
        let p = self.dim;
        let lens = [
            self.eigenvalues.len(),
            self.omegas.len(),
            self.amplitudes.len(),
            self.stabilized.len(),
            self.excluded.len(),
            self.modes.nrows(),
            self.modes.ncols(),
            self.layout.dim(),
        ];
        if let Some(&bad) = lens.iter().find(|&&l| l != p) {
            return Err(Error::DimensionMismatch { expected: p, found: bad });
        }
        if self.names.len() != self.n_vars() || self.standardization.mean.len() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                found: self.names.len(),
            });
        }
        Ok(())
    }
}

pub fn stabilize(model: &DmdModel) -> DmdModel {
    let mut out = model.clone();
    out.stabilize();
    out
}

pub fn amplitudes(model: &DmdModel, x0: &[f64]) -> Result<Vec<c64>> {
    model.amplitudes_for(x0)
}

/// Modal forecast from an arbitrary augmented origin `x0`.
pub fn forecast(model: &DmdModel, x0: &[f64], horizon: usize) -> Result<Mat<f64>> {
    let mut m = model.clone();
    m.amplitudes = m.amplitudes_for(x0)?;
    Ok(m.forecast(horizon))
}

/// Iterates `x_{k+1} = A x_k` from `x0`; column `j` is `A^(j+1) x0`.
pub fn one_step_matrix_forecast(a: MatRef<'_, f64>, x0: &[f64], horizon: usize) -> Result<Mat<f64>> {
    let p = a.nrows();
    if a.ncols() != p || x0.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: x0.len(),
        });
    }
    let mut out = Mat::<f64>::zeros(p, horizon);
    let mut x = x0.to_vec();
    for j in 0..horizon {
        let next: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|k| a[(i, k)] * x[k]).sum())
            .collect();
        for i in 0..p {
            out[(i, j)] = next[i];
        }
        x = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn scalar_pair(v: &[f64]) -> SnapshotPair {
        SnapshotPair::from_sequence(Mat::from_fn(1, v.len(), |_, j| v[j]).as_ref()).unwrap()
    }

    fn rotation(theta: f64) -> Mat<f64> {
        let (s, c) = theta.sin_cos();
        Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c,
            (0, 1) => -s,
            _ => s,
        })
    }

    #[test]
    fn geometric_sequence_gives_scalar_two() {
        let a = fit(&scalar_pair(&[1.0, 2.0, 4.0, 8.0]), 1.0).unwrap();
        assert_abs_diff_eq!(a[(0, 0)], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rotation_is_recovered() {
        let r = rotation(0.1);
        let mut z = Mat::<f64>::zeros(2, 33);
        z[(0, 0)] = 1.0;
        for j in 1..33 {
            let prev = z.as_ref().col(j - 1).to_owned();
            let next = &r * &prev;
            z[(0, j)] = next[0];
            z[(1, j)] = next[1];
        }
        let a = fit(&SnapshotPair::from_sequence(z.as_ref()).unwrap(), 1.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(a[(i, j)], r[(i, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn zero_snapshots_are_degenerate() {
        let pair = SnapshotPair::from_sequence(Mat::<f64>::zeros(2, 5).as_ref()).unwrap();
        assert!(matches!(fit(&pair, 1.0), Err(Error::DegenerateData)));
    }

    #[test]
    fn skew_operator_spectrum() {
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            _ => 0.0,
        });
        let s = eigendecompose(a.as_ref(), 1.0).unwrap();
        let mut ims: Vec<f64> = s.omegas.iter().map(|w| w.im).collect();
        ims.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(ims[0], -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ims[1], PI / 2.0, epsilon = 1e-12);
        for w in &s.omegas {
            assert_abs_diff_eq!(w.re, 0.0, epsilon = 1e-12);
        }
        for l in &s.eigenvalues {
            assert_abs_diff_eq!(l.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(l.re, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_spectrum() {
        let a = Mat::<f64>::identity(3, 3);
        let s = eigendecompose(a.as_ref(), 0.37).unwrap();
        for (l, w) in s.eigenvalues.iter().zip(&s.omegas) {
            assert_abs_diff_eq!(l.re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(w.norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn scalar_log() {
        let a = Mat::from_fn(1, 1, |_, _| 2.0);
        let s = eigendecompose(a.as_ref(), 0.5).unwrap();
        assert_abs_diff_eq!(s.omegas[0].re, 2f64.ln() / 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.omegas[0].im, 0.0);
    }

    #[test]
    fn negative_real_eigenvalue_takes_positive_branch() {
        let w = continuous_frequency(c64::new(-1.0, -0.0), 1.0).unwrap();
        assert_abs_diff_eq!(w.im, PI);
    }

    #[test]
    fn zero_eigenvalue_is_excluded() {
        let a = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { 0.5 } else { 0.0 });
        let s = eigendecompose(a.as_ref(), 1.0).unwrap();
        assert_eq!(s.excluded.iter().filter(|&&e| e).count(), 1);
        let k = s.excluded.iter().position(|&e| e).unwrap();
        assert_eq!(s.omegas[k].re, f64::NEG_INFINITY);
    }

    #[test]
    fn eigen_residuals_and_normalization() {
        let a = Mat::from_fn(5, 5, |i, j| ((i * 5 + j) as f64 * 0.7).sin());
        let s = eigendecompose(a.as_ref(), 1.0).unwrap();
        let anorm = linalg::frobenius(a.as_ref());
        for k in 0..5 {
            let mut res = 0.0;
            let mut norm = 0.0;
            let mut best = (0, 0.0);
            for i in 0..5 {
                let mut av = c64::new(0.0, 0.0);
                for j in 0..5 {
                    av += s.modes[(j, k)] * a[(i, j)];
                }
                res += (av - s.eigenvalues[k] * s.modes[(i, k)]).norm_sqr();
                norm += s.modes[(i, k)].norm_sqr();
                if s.modes[(i, k)].norm() > best.1 {
                    best = (i, s.modes[(i, k)].norm());
                }
            }
            assert!(res.sqrt() <= 1e-8 * anorm);
            assert_abs_diff_eq!(norm.sqrt(), 1.0, epsilon = 1e-10);
            let pivot = s.modes[(best.0, k)];
            assert!(pivot.re > 0.0 && pivot.im == 0.0);
        }
    }

    fn doubling_model() -> DmdModel {
        DmdModel::fit(&scalar_pair(&[1.0, 2.0, 4.0]), 1.0).unwrap()
    }

    #[test]
    fn clamped_and_unclamped_doubling_forecast() {
        let m = doubling_model();
        let f = m.forecast(3);
        for (j, want) in [8.0, 16.0, 32.0].iter().enumerate() {
            assert_abs_diff_eq!(f[(0, j)], *want, epsilon = 1e-10);
        }
        let s = stabilize(&m);
        assert!(s.stabilized[0]);
        assert_eq!(s.omegas[0].re, 0.0);
        let f = s.forecast(3);
        for j in 0..3 {
            assert_abs_diff_eq!(f[(0, j)], 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn stabilize_rule() {
        let mut m = doubling_model();
        m.omegas = vec![c64::new(0.3, 2.0)];
        m.stabilize();
        assert_eq!(m.omegas[0], c64::new(0.0, 2.0));
        assert_abs_diff_eq!(m.eigenvalues[0].norm(), 1.0, epsilon = 1e-15);

        let mut m = doubling_model();
        m.omegas = vec![c64::new(-0.1, 2.0)];
        let before = m.clone();
        m.stabilize();
        assert_eq!(m, before);
        let again = stabilize(&m);
        assert_eq!(again, m);
    }

    #[test]
    fn amplitudes_in_eigenbasis() {
        let mut m = doubling_model();
        m.modes = Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
        let b = m.amplitudes_for(&[3.5]).unwrap();
        assert_abs_diff_eq!(b[0].re, 3.5, epsilon = 1e-15);

        // triangular operator: real, distinct eigenvalues
        let a = Mat::from_fn(3, 3, |i, j| [[0.9, 0.2, 0.0], [0.0, 0.8, 0.3], [0.0, 0.0, 0.5]][i][j]);
        let spec = eigendecompose(a.as_ref(), 1.0).unwrap();
        let layout = Layout { n_vars: 3, blocks: vec![Block::State] };
        let x0: Vec<f64> = (0..3).map(|i| spec.modes[(i, 0)].re).collect();
        let model = DmdModel::from_spectrum(spec, 1.0, layout, &x0).unwrap();
        assert_abs_diff_eq!(model.amplitudes[0].re, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(model.amplitudes[0].im, 0.0, epsilon = 1e-8);
        for z in &model.amplitudes[1..] {
            assert!(z.norm() < 1e-8);
        }
    }

    #[test]
    fn one_step_doubling() {
        let a = Mat::from_fn(1, 1, |_, _| 2.0);
        let f = one_step_matrix_forecast(a.as_ref(), &[1.0], 3).unwrap();
        assert_eq!((0..3).map(|j| f[(0, j)]).collect::<Vec<_>>(), vec![2.0, 4.0, 8.0]);
    }

    #[test]
    fn one_step_rotation_closed_form() {
        let f = one_step_matrix_forecast(rotation(0.1).as_ref(), &[1.0, 0.0], 5).unwrap();
        for j in 0..5 {
            let th = 0.1 * (j + 1) as f64;
            assert_abs_diff_eq!(f[(0, j)], th.cos(), epsilon = 1e-10);
            assert_abs_diff_eq!(f[(1, j)], th.sin(), epsilon = 1e-10);
        }
    }

    #[test]
    fn json_round_trip_keeps_sentinels() {
        let a = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { 0.5 } else { 0.0 });
        let spec = eigendecompose(a.as_ref(), 1.0).unwrap();
        let layout = Layout { n_vars: 2, blocks: vec![Block::State] };
        let m = DmdModel::from_spectrum(spec, 1.0, layout, &[1.0, 1.0]).unwrap();
        let back = DmdModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.excluded_count(), 1);
    }

    fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
        let mut m = 0.0_f64;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                m = m.max((a[(i, j)] - b[(i, j)]).abs());
            }
        }
        m
    }

    fn contracting_sequence(p: usize, m: usize) -> Mat<f64> {
        let a = Mat::from_fn(p, p, |i, j| {
            0.1 * ((i * p + j) as f64 * 1.3).sin() + if i == j { 0.95 - 0.2 * i as f64 } else { 0.0 }
        });
        let mut z = Mat::<f64>::zeros(p, m);
        for i in 0..p {
            z[(i, 0)] = (i as f64 + 1.0).cos();
        }
        for j in 1..m {
            for i in 0..p {
                z[(i, j)] = (0..p).map(|k| a[(i, k)] * z[(k, j - 1)]).sum();
            }
        }
        z
    }

    #[test]
    fn restricted_and_dense_paths_agree_at_full_rank() {
        let pair = SnapshotPair::from_sequence(contracting_sequence(4, 20).as_ref()).unwrap();
        let fast = DmdModel::fit(&pair, 0.5).unwrap();
        let dense = DmdModel::fit_dense(&pair, 0.5).unwrap();
        assert_eq!(fast.excluded_count(), 0);
        assert!(max_abs_diff(&fast.forecast_augmented(30), &dense.forecast_augmented(30)) < 1e-10);
        let b = fast.amplitudes_for(&pair.last_snapshot()).unwrap();
        for (x, y) in b.iter().zip(&fast.amplitudes) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_deficient_fit_follows_iterated_operator() {
        // rank-2 data in four dimensions
        let z = Mat::from_fn(4, 12, |i, j| {
            let t = j as f64 * 0.4;
            let (s, c) = t.sin_cos();
            [s, c, s + c, s - 2.0 * c][i] * 0.97_f64.powi(j as i32)
        });
        let pair = SnapshotPair::from_sequence(z.as_ref()).unwrap();
        let model = DmdModel::fit(&pair, 1.0).unwrap();
        assert_eq!(model.excluded_count(), 2);
        let a = fit(&pair, 1.0).unwrap();
        let it = one_step_matrix_forecast(a.as_ref(), &pair.last_snapshot(), 20).unwrap();
        assert!(max_abs_diff(&model.forecast_augmented(20), &it) < 1e-10);
        let fc = fit_forecast(&pair, 1.0, false, 20).unwrap();
        assert!(max_abs_diff(&fc, &model.forecast(20)) < 1e-10);
    }

    #[test]
    fn fit_forecast_matches_stabilized_model() {
        let z = Mat::from_fn(2, 40, |i, j| {
            let t = j as f64 * 0.3;
            1.01_f64.powi(j as i32) * if i == 0 { t.sin() } else { t.cos() }
        });
        let pair = SnapshotPair::from_sequence(z.as_ref()).unwrap();
        let mut model = DmdModel::fit(&pair, 0.1).unwrap();
        model.stabilize();
        assert!(model.stabilized.iter().any(|&s| s));
        let fc = fit_forecast(&pair, 0.1, true, 64).unwrap();
        assert!(max_abs_diff(&fc, &model.forecast(64)) < 1e-10);
    }
}
