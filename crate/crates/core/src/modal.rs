//! Mode sorting, modal participation and statistics across realizations.

use std::io::{Read, Write};

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::dmd::DmdModel;
use crate::error::{Error, Result};
use crate::stats::Quartiles;

/// How much each mode contributes to the fitted dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ParticipationMeasure {
    /// `|b_k| ||phi_k||` at the forecast origin.
    #[default]
    Amplitude,
    /// `sum_j |b_k exp(omega_k t_j)|^2 ||phi_k||^2` over `steps` steps.
    Energy { steps: usize },
}

fn mode_norm(model: &DmdModel, k: usize) -> f64 {
    (0..model.dim)
        .map(|i| model.modes[(i, k)].norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Normalized participation per mode; excluded modes get zero.
pub fn participation_with(model: &DmdModel, measure: ParticipationMeasure) -> Result<Vec<f64>> {
    let raw: Vec<f64> = (0..model.dim)
        .map(|k| {
            if model.excluded[k] {
                return 0.0;
            }
            let b = model.amplitudes[k];
            let norm = mode_norm(model, k);
            match measure {
                ParticipationMeasure::Amplitude => b.norm() * norm,
                ParticipationMeasure::Energy { steps } => (0..steps)
                    .map(|j| (b * (model.omegas[k] * (j as f64 * model.dt)).exp()).norm_sqr())
                    .sum::<f64>()
                    * norm
                    * norm,
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateAmplitudes);
    }
    Ok(raw.into_iter().map(|v| v / total).collect())
}

pub fn participation(model: &DmdModel) -> Result<Vec<f64>> {
    participation_with(model, ParticipationMeasure::Amplitude)
}

/// Permutation that orders modes by ascending `Im(omega)`, then ascending
/// `Re(omega)`, then descending participation.
pub fn sort_order(model: &DmdModel) -> Vec<usize> {
    let part = participation(model).unwrap_or_else(|_| vec![0.0; model.dim]);
    let mut order: Vec<usize> = (0..model.dim).collect();
    order.sort_by(|&a, &b| {
        let (wa, wb) = (model.omegas[a], model.omegas[b]);
        wa.im
            .total_cmp(&wb.im)
            .then(wa.re.total_cmp(&wb.re))
            .then(part[b].total_cmp(&part[a]))
    });
    order
}

/// Applies `order` jointly to every per-mode field.
pub fn permute_modes(model: &DmdModel, order: &[usize]) -> DmdModel {
    let pick_c = |v: &[c64]| order.iter().map(|&k| v[k]).collect::<Vec<_>>();
    let pick_b = |v: &[bool]| order.iter().map(|&k| v[k]).collect::<Vec<_>>();
    let mut out = model.clone();
    out.eigenvalues = pick_c(&model.eigenvalues);
    out.omegas = pick_c(&model.omegas);
    out.amplitudes = pick_c(&model.amplitudes);
    out.stabilized = pick_b(&model.stabilized);
    out.excluded = pick_b(&model.excluded);
    out.modes = faer::Mat::from_fn(model.dim, model.dim, |i, j| model.modes[(i, order[j])]);
    out
}

pub fn sort_modes(model: &DmdModel) -> DmdModel {
    permute_modes(model, &sort_order(model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotStatistics {
    pub slot: usize,
    pub re_omega: Quartiles,
    pub im_omega: Quartiles,
    pub participation: Quartiles,
}

/// Median and quartiles of `|phi_slot[i]|` for every entry `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBand {
    pub slot: usize,
    pub entries: Vec<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeStatistics {
    pub dim: usize,
    pub realizations: usize,
    pub slots: Vec<SlotStatistics>,
    /// Slots with the highest median participation among those with
    /// nonnegative median `Im(omega)`, so each conjugate pair appears once.
    pub top_slots: Vec<usize>,
    pub component_bands: Vec<ComponentBand>,
}

/// Statistics over sorted realizations sharing one augmented dimension.
pub fn aggregate(realizations: &[DmdModel]) -> Result<ModeStatistics> {
    let first = realizations
        .first()
        .ok_or_else(|| Error::ConfigInfeasible("no realizations to aggregate".into()))?;
    let p = first.dim;
    if let Some(bad) = realizations.iter().find(|m| m.dim != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bad.dim,
        });
    }
    let parts = realizations
        .iter()
        .map(participation)
        .collect::<Result<Vec<_>>>()?;
    let column = |f: &dyn Fn(&DmdModel) -> f64| -> Vec<f64> { realizations.iter().map(f).collect() };
    let slots: Vec<SlotStatistics> = (0..p)
        .map(|k| SlotStatistics {
            slot: k,
            re_omega: Quartiles::of(&column(&|m| m.omegas[k].re)),
            im_omega: Quartiles::of(&column(&|m| m.omegas[k].im)),
            participation: Quartiles::of(&parts.iter().map(|v| v[k]).collect::<Vec<_>>()),
        })
        .collect();
    let mut ranked: Vec<usize> = (0..p).filter(|&k| slots[k].im_omega.median >= 0.0).collect();
    ranked.sort_by(|&a, &b| {
        slots[b]
            .participation
            .median
            .total_cmp(&slots[a].participation.median)
            .then(a.cmp(&b))
    });
    let top_slots: Vec<usize> = ranked.into_iter().take(2).collect();
    let component_bands = top_slots
        .iter()
        .map(|&k| ComponentBand {
            slot: k,
            entries: (0..p)
                .map(|i| Quartiles::of(&column(&|m| m.modes[(i, k)].norm())))
                .collect(),
        })
        .collect();
    Ok(ModeStatistics {
        dim: p,
        realizations: realizations.len(),
        slots,
        top_slots,
        component_bands,
    })
}

/// One row of a per-model mode table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub slot: usize,
    pub re_omega: f64,
    pub im_omega: f64,
    pub participation: f64,
    pub stabilized: bool,
    pub excluded: bool,
}

/// Sorted mode table of a single model.
pub fn mode_table(model: &DmdModel) -> Result<Vec<ModeRow>> {
    let sorted = sort_modes(model);
    let part = participation(&sorted)?;
    Ok((0..sorted.dim)
        .map(|k| ModeRow {
            slot: k,
            re_omega: sorted.omegas[k].re,
            im_omega: sorted.omegas[k].im,
            participation: part[k],
            stabilized: sorted.stabilized[k],
            excluded: sorted.excluded[k],
        })
        .collect())
}

/// Flat row of aggregated slot statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    pub slot: usize,
    pub quantity: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Flat row of an eigenvector-magnitude band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub slot: usize,
    pub entry: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl ModeStatistics {
    pub fn slot_rows(&self) -> Vec<SlotRow> {
        let mut rows = Vec::with_capacity(3 * self.slots.len());
        for s in &self.slots {
            for (name, q) in [
                ("re_omega", s.re_omega),
                ("im_omega", s.im_omega),
                ("participation", s.participation),
            ] {
                rows.push(SlotRow {
                    slot: s.slot,
                    quantity: name.into(),
                    q1: q.q1,
                    median: q.median,
                    q3: q.q3,
                });
            }
        }
        rows
    }

    pub fn band_rows(&self) -> Vec<BandRow> {
        self.component_bands
            .iter()
            .flat_map(|b| {
                b.entries.iter().enumerate().map(move |(i, q)| BandRow {
                    slot: b.slot,
                    entry: i,
                    q1: q.q1,
                    median: q.median,
                    q3: q.q3,
                })
            })
            .collect()
    }
}

pub fn write_rows<T: Serialize>(rows: &[T], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(reader: impl Read) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
