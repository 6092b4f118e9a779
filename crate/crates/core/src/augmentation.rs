//! Snapshot matrices for plain and augmented DMD.
//!
//! The augmented snapshot stacks, in this order, the state, its time
//! derivatives (ascending order) and delayed copies of the state
//! (ascending delay). Every block has `n` rows.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

/// Highest derivative order accepted in an augmentation.
pub const MAX_DERIVATIVES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeScheme {
    /// `f'_k = (3 f_k - 4 f_{k-1} + f_{k-2}) / (2 dt)`, applied recursively
    /// for higher orders.
    #[default]
    SecondOrderBackward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub nde: usize,
    pub nts: usize,
    #[serde(default)]
    pub scheme: DerivativeScheme,
}

impl AugmentationSpec {
    pub fn new(nde: usize, nts: usize) -> Result<Self> {
        if nde > MAX_DERIVATIVES {
            return Err(Error::ConfigInfeasible(format!(
                "nde = {nde} exceeds the maximum of {MAX_DERIVATIVES}"
            )));
        }
        Ok(Self {
            nde,
            nts,
            scheme: DerivativeScheme::SecondOrderBackward,
        })
    }

    pub fn plain() -> Self {
        Self {
            nde: 0,
            nts: 0,
            scheme: DerivativeScheme::SecondOrderBackward,
        }
    }

    /// Steps of real history needed before the first training step.
    pub fn lead_required(&self) -> usize {
        let der = if self.nde > 0 { 2 * self.nde } else { 0 };
        let shift = if self.nts > 0 { self.nts + 1 } else { 0 };
        der.max(shift)
    }

    pub fn dim(&self, n_vars: usize) -> usize {
        n_vars * (1 + self.nde + self.nts)
    }

    pub fn layout(&self, n_vars: usize) -> Layout {
        let mut blocks = vec![Block::State];
        blocks.extend((1..=self.nde).map(Block::Derivative));
        blocks.extend((1..=self.nts).map(Block::Shift));
        Layout { n_vars, blocks }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Block {
    State,
    Derivative(usize),
    Shift(usize),
}

/// Row layout of an augmented snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_vars: usize,
    pub blocks: Vec<Block>,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.n_vars * self.blocks.len()
    }

    /// Row range of `block`, if present.
    pub fn rows(&self, block: Block) -> Option<std::ops::Range<usize>> {
        let idx = self.blocks.iter().position(|b| *b == block)?;
        Some(idx * self.n_vars..(idx + 1) * self.n_vars)
    }
}

/// The pair `(X, X')` fed to the least-squares fit.
#[derive(Debug, Clone)]
pub struct SnapshotPair {
    pub x: Mat<f64>,
    pub xp: Mat<f64>,
    pub layout: Layout,
}

impl SnapshotPair {
    /// Pair built directly from a snapshot sequence (no augmentation).
    pub fn from_sequence(z: MatRef<'_, f64>) -> Result<Self> {
        let q = z.ncols();
        if q < 2 {
            return Err(Error::EmptyWindow(q));
        }
        Ok(Self {
            x: z.subcols(0, q - 1).to_owned(),
            xp: z.subcols(1, q - 1).to_owned(),
            layout: Layout {
                n_vars: z.nrows(),
                blocks: vec![Block::State],
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// Number of snapshot pairs (`q - 1`).
    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    /// The final augmented snapshot, used as the forecast origin.
    pub fn last_snapshot(&self) -> Vec<f64> {
        let j = self.xp.ncols() - 1;
        (0..self.xp.nrows()).map(|i| self.xp[(i, j)]).collect()
    }
}

fn concat(history: MatRef<'_, f64>, series: MatRef<'_, f64>) -> Mat<f64> {
    let h = history.ncols();
    Mat::from_fn(series.nrows(), h + series.ncols(), |i, j| {
        if j < h {
            history[(i, j)]
        } else {
            series[(i, j - h)]
        }
    })
}

fn check_history(series: &TimeSeries, history: MatRef<'_, f64>, needed: usize) -> Result<()> {
    if history.ncols() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: history.ncols(),
        });
    }
    if history.ncols() > 0 && history.nrows() != series.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: series.n_vars(),
            found: history.nrows(),
        });
    }
    Ok(())
}

/// Derivatives of orders `1..=max_order` over the last `q` columns of `seq`.
fn derivative_stack(seq: MatRef<'_, f64>, q: usize, dt: f64, max_order: usize) -> Vec<Mat<f64>> {
    let n = seq.nrows();
    let len = seq.ncols();
    let mut current = seq.to_owned();
    let mut out = Vec::with_capacity(max_order);
    for order in 1..=max_order {
        // only columns >= 2*order hold valid values
        let first = 2 * order;
        let mut next = Mat::<f64>::zeros(n, len);
        for j in first..len {
            for i in 0..n {
                next[(i, j)] = (3.0 * current[(i, j)] - 4.0 * current[(i, j - 1)]
                    + current[(i, j - 2)])
                    / (2.0 * dt);
            }
        }
        out.push(next.as_ref().subcols(len - q, q).to_owned());
        current = next;
    }
    out
}

/// `order`-th time derivative of `series` by recursive second-order backward
/// differences. `history` must hold at least `2 * order` preceding steps.
pub fn derivative(series: &TimeSeries, order: usize, history: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if order == 0 {
        return Ok(series.values().to_owned());
    }
    let needed = 2 * order;
    check_history(series, history, needed)?;
    let h = history.subcols(history.ncols() - needed, needed);
    let seq = concat(h, series.values());
    let mut stack = derivative_stack(seq.as_ref(), series.len(), series.dt(), order);
    Ok(stack.pop().expect("order >= 1"))
}

/// Delayed copies of `series`: block `s` (1-based) holds the state `s`
/// steps earlier, with leading entries drawn from `history`.
pub fn hankel_shifts(series: &TimeSeries, nts: usize, history: MatRef<'_, f64>) -> Result<Mat<f64>> {
    check_history(series, history, nts)?;
    let n = series.n_vars();
    let q = series.len();
    let h = history.ncols();
    let seq = concat(history, series.values());
    Ok(Mat::from_fn(n * nts, q, |r, j| {
        let s = r / n + 1;
        let i = r % n;
        seq[(i, h + j - s)]
    }))
}

/// Augmented snapshot sequence `Z` (`p x q`) for a training window.
pub fn augmented_sequence(train: &TimeSeries, history: MatRef<'_, f64>, spec: &AugmentationSpec) -> Result<Mat<f64>> {
    let q = train.len();
    check_history(train, history, spec.lead_required())?;
    let n = train.n_vars();
    let p = spec.dim(n);
    let mut z = Mat::<f64>::zeros(p, q);
    z.as_mut().subrows_mut(0, n).copy_from(train.values());
    if spec.nde > 0 {
        let needed = 2 * spec.nde;
        let h = history.subcols(history.ncols() - needed, needed);
        let seq = concat(h, train.values());
        for (k, d) in derivative_stack(seq.as_ref(), q, train.dt(), spec.nde)
            .into_iter()
            .enumerate()
        {
            z.as_mut().subrows_mut((k + 1) * n, n).copy_from(&d);
        }
    }
    if spec.nts > 0 {
        let shifts = hankel_shifts(train, spec.nts, history)?;
        z.as_mut()
            .subrows_mut((1 + spec.nde) * n, n * spec.nts)
            .copy_from(&shifts);
    }
    Ok(z)
}

pub fn build_snapshots(train: &TimeSeries, history: MatRef<'_, f64>, spec: &AugmentationSpec) -> Result<SnapshotPair> {
    let q = train.len();
    if q < 2 {
        return Err(Error::EmptyWindow(q));
    }
    let z = augmented_sequence(train, history, spec)?;
    Ok(SnapshotPair {
        x: z.as_ref().subcols(0, q - 1).to_owned(),
        xp: z.as_ref().subcols(1, q - 1).to_owned(),
        layout: spec.layout(train.n_vars()),
    })
}
