//! Thresholded Moore-Penrose pseudo-inverses on top of faer's SVD.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};

/// Runs every dense kernel on the calling thread, so results do not depend
/// on how many workers are available.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Rank threshold `max(rows, cols) * eps * sigma_max`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Thin SVD factors of a real matrix, truncated to its numerical rank.
pub struct RankRevealed {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

impl RankRevealed {
    pub fn new(a: MatRef<'_, f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::DegenerateData);
        }
        let svd = a.thin_svd().map_err(|_| Error::DegenerateData)?;
        let sv = svd.S().column_vector();
        let smax = sv[0];
        if !(smax.is_finite() && smax > 0.0) {
            return Err(Error::DegenerateData);
        }
        let tol = rank_tolerance(a.nrows(), a.ncols(), smax);
        let r = (0..sv.nrows()).take_while(|&k| sv[k] > tol).count();
        if r == 0 {
            return Err(Error::DegenerateData);
        }
        Ok(Self {
            u: svd.U().subcols(0, r).to_owned(),
            s: (0..r).map(|k| sv[k]).collect(),
            v: svd.V().subcols(0, r).to_owned(),
        })
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `V S^-1 U^T`
    pub fn pinv(&self) -> Mat<f64> {
        let vs = Mat::from_fn(self.v.nrows(), self.rank(), |i, k| self.v[(i, k)] / self.s[k]);
        &vs * self.u.transpose()
    }
}

pub fn pinv(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    Ok(RankRevealed::new(a)?.pinv())
}

/// `pinv(a) * b` for complex `a` and vector `b`. A zero matrix maps to zero.
pub fn pinv_solve_complex(a: MatRef<'_, c64>, b: &[c64]) -> Result<Vec<c64>> {
    let (rows, cols) = (a.nrows(), a.ncols());
    if b.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            found: b.len(),
        });
    }
    if rows == 0 || cols == 0 {
        return Ok(vec![c64::new(0.0, 0.0); cols]);
    }
    let svd = a.thin_svd().map_err(|_| Error::DegenerateData)?;
    let sv = svd.S().column_vector();
    let smax = sv[0].re;
    if smax == 0.0 {
        return Ok(vec![c64::new(0.0, 0.0); cols]);
    }
    if !smax.is_finite() {
        return Err(Error::DegenerateData);
    }
    let tol = rank_tolerance(rows, cols, smax);
    let u = svd.U();
    let v = svd.V();
    let mut out = vec![c64::new(0.0, 0.0); cols];
    for k in 0..sv.nrows() {
        let s = sv[k].re;
        if s <= tol {
            break;
        }
        // (u_k^H b) / s_k
        let mut coef = c64::new(0.0, 0.0);
        for i in 0..rows {
            coef += u[(i, k)].conj() * b[i];
        }
        coef /= s;
        for (i, o) in out.iter_mut().enumerate() {
            *o += v[(i, k)] * coef;
        }
    }
    Ok(out)
}

pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * a[(i, j)];
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pinv_of_full_column_rank_is_left_inverse() {
        let a = Mat::from_fn(5, 3, |i, j| ((i * 3 + j) as f64).sin() + if i == j { 2.0 } else { 0.0 });
        let p = pinv(a.as_ref()).unwrap();
        let eye = &p * &a;
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(eye[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rank_deficient_pinv_satisfies_penrose_identity() {
        // rank 1
        let a = Mat::from_fn(3, 4, |i, j| (i + 1) as f64 * (j as f64 - 1.5));
        let rr = RankRevealed::new(a.as_ref()).unwrap();
        assert_eq!(rr.rank(), 1);
        let p = rr.pinv();
        let back = &(&a * &p) * &a;
        for i in 0..3 {
            for j in 0..4 {
                assert_abs_diff_eq!(back[(i, j)], a[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        assert!(matches!(pinv(Mat::<f64>::zeros(3, 3).as_ref()), Err(Error::DegenerateData)));
    }

    #[test]
    fn complex_solve_matches_inverse() {
        let a = Mat::from_fn(3, 3, |i, j| c64::new(if i == j { 3.0 } else { 0.5 }, (i as f64) - (j as f64)));
        let x = [c64::new(1.0, -1.0), c64::new(0.5, 2.0), c64::new(-1.0, 0.0)];
        let b: Vec<c64> = (0..3).map(|i| (0..3).map(|j| a[(i, j)] * x[j]).sum()).collect();
        let got = pinv_solve_complex(a.as_ref(), &b).unwrap();
        for k in 0..3 {
            assert!((got[k] - x[k]).norm() < 1e-12);
        }
    }
}
