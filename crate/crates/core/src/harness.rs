//! Full-factorial forecasting sweep over randomly placed windows.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{build_snapshots, AugmentationSpec};
use crate::dmd::{self, DmdModel};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport};
use crate::modal::{self, ModeStatistics};
use crate::stats::BoxSummary;
use crate::timeseries::{sample_windows, StandardizationRecord, TimeSeries, WindowSpec, DEFAULT_STEPS_PER_WAVE};

pub const METRICS: [&str; 4] = ["nrmse", "pearson_r", "aam", "nammae"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub niw_set: Vec<usize>,
    pub now_set: Vec<usize>,
    pub nde_set: Vec<usize>,
    pub nts_set: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub stabilize: bool,
    pub steps_per_wave: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            niw_set: vec![1, 2, 4, 8],
            now_set: vec![1, 2, 4],
            nde_set: vec![0, 1, 2, 3, 4],
            nts_set: vec![0, 2, 4, 8, 16],
            samples: 1001,
            seed: 0,
            stabilize: true,
            steps_per_wave: DEFAULT_STEPS_PER_WAVE,
        }
    }
}

impl ExperimentConfig {
    pub fn augmentations(&self) -> Result<Vec<AugmentationSpec>> {
        let mut out = Vec::with_capacity(self.nde_set.len() * self.nts_set.len());
        for &nde in &self.nde_set {
            for &nts in &self.nts_set {
                out.push(AugmentationSpec::new(nde, nts)?);
            }
        }
        Ok(out)
    }

    /// Largest history any augmentation in the grid needs.
    pub fn max_lead(&self) -> Result<usize> {
        Ok(self
            .augmentations()?
            .iter()
            .map(AugmentationSpec::lead_required)
            .max()
            .unwrap_or(0))
    }

    pub fn cell_count(&self) -> usize {
        self.niw_set.len() * self.now_set.len() * self.nde_set.len() * self.nts_set.len()
    }

    /// Checks grid shape and that every cell fits a record of `len` steps.
    pub fn validate(&self, len: usize) -> Result<()> {
        for (name, set) in [
            ("niw_set", &self.niw_set),
            ("now_set", &self.now_set),
            ("nde_set", &self.nde_set),
            ("nts_set", &self.nts_set),
        ] {
            if set.is_empty() {
                return Err(Error::ConfigInfeasible(format!("{name} is empty")));
            }
            let mut seen = set.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != set.len() {
                return Err(Error::ConfigInfeasible(format!("{name} has duplicate entries")));
            }
        }
        if self.niw_set.contains(&0) || self.now_set.contains(&0) {
            return Err(Error::ConfigInfeasible("niw and now must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::ConfigInfeasible("samples must be positive".into()));
        }
        if self.steps_per_wave == 0 {
            return Err(Error::ConfigInfeasible("steps_per_wave must be positive".into()));
        }
        let lead = self.max_lead().map_err(|e| Error::ConfigInfeasible(e.to_string()))?;
        let niw = self.niw_set.iter().max().copied().unwrap_or(0);
        let now = self.now_set.iter().max().copied().unwrap_or(0);
        let needed = lead + (niw + now) * self.steps_per_wave;
        if needed > len {
            return Err(Error::ConfigInfeasible(format!(
                "largest cell needs {needed} steps but the record has {len}"
            )));
        }
        Ok(())
    }

    /// Seed for the windows of one `(niw, now)` pair.
    pub fn window_seed(&self, niw: usize, now: usize) -> u64 {
        let mut z = self
            .seed
            .wrapping_add((niw as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add((now as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummaries {
    pub nrmse: BoxSummary,
    pub pearson_r: BoxSummary,
    pub aam: BoxSummary,
    pub nammae: BoxSummary,
}

impl MetricSummaries {
    fn of(reports: &[MetricReport]) -> Self {
        let pick = |f: fn(&MetricReport) -> f64| BoxSummary::of(&reports.iter().map(f).collect::<Vec<_>>());
        Self {
            nrmse: pick(|r| r.nrmse),
            pearson_r: pick(|r| r.pearson_r),
            aam: pick(|r| r.aam),
            nammae: pick(|r| r.nammae),
        }
    }

    pub fn get(&self, metric: &str) -> Option<&BoxSummary> {
        match metric {
            "nrmse" => Some(&self.nrmse),
            "pearson_r" => Some(&self.pearson_r),
            "aam" => Some(&self.aam),
            "nammae" => Some(&self.nammae),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub niw: usize,
    pub now: usize,
    pub nde: usize,
    pub nts: usize,
    pub evaluated: usize,
    pub failed: usize,
    /// Failure counts keyed by error kind.
    pub failures: BTreeMap<String, usize>,
    pub metrics: MetricSummaries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSetup {
    pub niw: usize,
    pub now: usize,
    pub nde: usize,
    pub nts: usize,
    pub median_nrmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalSelection {
    pub label: String,
    pub niw: usize,
    pub now: usize,
    pub nde: usize,
    pub nts: usize,
    pub skipped: usize,
    pub statistics: ModeStatistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordInfo {
    pub names: Vec<String>,
    pub len: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub record: RecordInfo,
    pub cells: Vec<CellReport>,
    pub best: Vec<BestSetup>,
    pub modal: Vec<ModalSelection>,
}

/// One flat table row: configuration x metric x quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub niw: usize,
    pub now: usize,
    pub nde: usize,
    pub nts: usize,
    pub evaluated: usize,
    pub failed: usize,
    pub metric: String,
    pub quantile: String,
    pub value: f64,
}

impl ExperimentReport {
    pub fn cell(&self, niw: usize, now: usize, nde: usize, nts: usize) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.niw == niw && c.now == now && c.nde == nde && c.nts == nts)
    }

    pub fn cell_rows(&self) -> Vec<CellRow> {
        let mut rows = Vec::new();
        for c in &self.cells {
            for metric in METRICS {
                let summary = c.metrics.get(metric).expect("known metric");
                for (quantile, value) in summary.quantiles() {
                    rows.push(CellRow {
                        niw: c.niw,
                        now: c.now,
                        nde: c.nde,
                        nts: c.nts,
                        evaluated: c.evaluated,
                        failed: c.failed,
                        metric: metric.to_string(),
                        quantile: quantile.to_string(),
                        value,
                    });
                }
            }
        }
        rows
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `report.json`, `cells.csv`, `best.csv` and per-selection mode
    /// tables into `dir`. Returns the written paths.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let io = |path: &Path| {
            let p = path.to_path_buf();
            move |source| Error::Io { path: p, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json()? + "\n").map_err(io(&json))?;
        written.push(json);
        let mut emit = |name: String, f: &dyn Fn(std::fs::File) -> Result<()>| -> Result<()> {
            let path = dir.join(name);
            let file = std::fs::File::create(&path).map_err(io(&path))?;
            f(file)?;
            written.push(path);
            Ok(())
        };
        emit("cells.csv".into(), &|f| modal::write_rows(&self.cell_rows(), f))?;
        emit("best.csv".into(), &|f| modal::write_rows(&self.best, f))?;
        for sel in &self.modal {
            emit(format!("modes_{}_slots.csv", sel.label), &|f| {
                modal::write_rows(&sel.statistics.slot_rows(), f)
            })?;
            emit(format!("modes_{}_bands.csv", sel.label), &|f| {
                modal::write_rows(&sel.statistics.band_rows(), f)
            })?;
        }
        Ok(written)
    }
}

pub fn read_cell_rows(reader: impl Read) -> Result<Vec<CellRow>> {
    modal::read_rows(reader)
}

pub fn write_cell_rows(rows: &[CellRow], writer: impl Write) -> Result<()> {
    modal::write_rows(rows, writer)
}

/// Pair `(nde, nts)` with the lowest median NRMSE in cell `(niw, now)`.
/// Ties go to the smaller `nde`, then the smaller `nts`.
pub fn best_setup(report: &ExperimentReport, niw: usize, now: usize) -> Result<(usize, usize)> {
    let mut best: Option<(&CellReport, f64)> = None;
    for c in report.cells.iter().filter(|c| c.niw == niw && c.now == now) {
        let m = c.metrics.nrmse.median;
        if c.evaluated == 0 || m.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, bm)) => m < bm || (m == bm && (c.nde, c.nts) < (b.nde, b.nts)),
        };
        if better {
            best = Some((c, m));
        }
    }
    best.map(|(c, _)| (c.nde, c.nts)).ok_or(Error::MissingCell { niw, now })
}

/// Standardized pieces of one window shared by every augmentation.
struct PreparedWindow {
    history: Mat<f64>,
    train: TimeSeries,
    test: Mat<f64>,
    record: StandardizationRecord,
}

fn prepare(ts: &TimeSeries, w: &WindowSpec) -> Result<PreparedWindow> {
    let spw = ts.steps_per_wave();
    w.check(ts.len(), spw)?;
    let record = StandardizationRecord::from_segment(ts.values(), ts.names(), w.train_range(spw))?;
    let full = w.full_range(spw);
    let z = record.apply(ts.block(full.clone()).as_ref());
    let h = w.lead;
    let t = w.niw * spw;
    let train = TimeSeries::new(z.subcols(h, t).to_owned(), ts.dt(), ts.names().to_vec(), spw)?;
    Ok(PreparedWindow {
        history: z.subcols(0, h).to_owned(),
        train,
        test: z.subcols(h + t, z.ncols() - h - t).to_owned(),
        record,
    })
}

fn fit_window(p: &PreparedWindow, spec: &AugmentationSpec, stabilize: bool) -> Result<DmdModel> {
    let lead = spec.lead_required();
    let hist = p.history.subcols(p.history.ncols() - lead, lead);
    let pair = build_snapshots(&p.train, hist, spec)?;
    let mut model = DmdModel::fit(&pair, p.train.dt())?;
    if stabilize {
        model.stabilize();
    }
    model.standardization = p.record.clone();
    model.names = p.train.names().to_vec();
    model.steps_per_wave = p.train.steps_per_wave();
    Ok(model)
}

/// Fits a model on `niw` waves starting at `start`, standardized on that
/// segment, with the history the augmentation needs taken from before `start`.
pub fn fit_training_window(
    ts: &TimeSeries,
    start: usize,
    niw: usize,
    spec: &AugmentationSpec,
    stabilize: bool,
) -> Result<DmdModel> {
    let spw = ts.steps_per_wave();
    let lead = spec.lead_required();
    let w = WindowSpec { start, niw, now: 0, lead };
    let end = w.train_range(spw).end;
    if niw == 0 || start < lead || end > ts.len() {
        return Err(Error::OutOfBounds { start, end, lead, len: ts.len() });
    }
    let record = StandardizationRecord::from_segment(ts.values(), ts.names(), w.train_range(spw))?;
    let z = record.apply(ts.block(start - lead..end).as_ref());
    let p = PreparedWindow {
        history: z.subcols(0, lead).to_owned(),
        train: TimeSeries::new(z.subcols(lead, niw * spw).to_owned(), ts.dt(), ts.names().to_vec(), spw)?,
        test: Mat::zeros(ts.n_vars(), 0),
        record,
    };
    let mut model = fit_window(&p, spec, stabilize)?;
    model.window = Some(w);
    Ok(model)
}

fn evaluate_window(p: &PreparedWindow, spec: &AugmentationSpec, stabilize: bool) -> Result<MetricReport> {
    let lead = spec.lead_required();
    let hist = p.history.subcols(p.history.ncols() - lead, lead);
    let pair = build_snapshots(&p.train, hist, spec)?;
    let pred = dmd::fit_forecast(&pair, p.train.dt(), stabilize, p.test.ncols())?;
    metrics::evaluate(pred.as_ref(), p.test.as_ref())
}

type WindowOutcome = Vec<std::result::Result<MetricReport, &'static str>>;

fn sweep_pair(
    ts: &TimeSeries,
    cfg: &ExperimentConfig,
    specs: &[AugmentationSpec],
    windows: &[WindowSpec],
) -> Vec<WindowOutcome> {
    windows
        .par_iter()
        .map(|w| match prepare(ts, w) {
            Err(e) => vec![Err(e.kind()); specs.len()],
            Ok(p) => specs
                .iter()
                .map(|s| evaluate_window(&p, s, cfg.stabilize).map_err(|e| e.kind()))
                .collect(),
        })
        .collect()
}

/// Runs the sweep on the current rayon pool.
pub fn run(ts: &TimeSeries, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    crate::linalg::use_sequential_kernels();
    let ts = &with_steps_per_wave(ts, cfg.steps_per_wave)?;
    cfg.validate(ts.len())?;
    let specs = cfg.augmentations()?;
    let lead = cfg.max_lead()?;
    let mut cells = Vec::with_capacity(cfg.cell_count());
    let mut best = Vec::new();
    let mut windows_by_pair = BTreeMap::new();
    for &niw in &cfg.niw_set {
        for &now in &cfg.now_set {
            let windows = sample_windows(ts, niw, now, lead, cfg.samples, cfg.window_seed(niw, now))
                .map_err(|e| Error::ConfigInfeasible(e.to_string()))?;
            let outcomes = sweep_pair(ts, cfg, &specs, &windows);
            for (k, spec) in specs.iter().enumerate() {
                let mut ok = Vec::with_capacity(windows.len());
                let mut failures = BTreeMap::new();
                for o in &outcomes {
                    match &o[k] {
                        Ok(r) => ok.push(r.clone()),
                        Err(kind) => *failures.entry(kind.to_string()).or_insert(0) += 1,
                    }
                }
                cells.push(CellReport {
                    niw,
                    now,
                    nde: spec.nde,
                    nts: spec.nts,
                    evaluated: ok.len(),
                    failed: windows.len() - ok.len(),
                    failures,
                    metrics: MetricSummaries::of(&ok),
                });
            }
            windows_by_pair.insert((niw, now), windows);
        }
    }
    let mut report = ExperimentReport {
        config: cfg.clone(),
        record: RecordInfo {
            names: ts.names().to_vec(),
            len: ts.len(),
            dt: ts.dt(),
        },
        cells,
        best: Vec::new(),
        modal: Vec::new(),
    };
    for &niw in &cfg.niw_set {
        for &now in &cfg.now_set {
            if let Ok((nde, nts)) = best_setup(&report, niw, now) {
                let median_nrmse = report.cell(niw, now, nde, nts).expect("cell").metrics.nrmse.median;
                best.push(BestSetup {
                    niw,
                    now,
                    nde,
                    nts,
                    median_nrmse,
                });
            }
        }
    }
    report.best = best;
    report.modal = modal_selections(ts, cfg, &report, &windows_by_pair)?;
    Ok(report)
}

/// Runs the sweep on a dedicated pool of `jobs` workers.
pub fn run_with_jobs(ts: &TimeSeries, cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::ConfigInfeasible(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run(ts, cfg))
}

fn with_steps_per_wave(ts: &TimeSeries, spw: usize) -> Result<TimeSeries> {
    if ts.steps_per_wave() == spw {
        return Ok(ts.clone());
    }
    TimeSeries::new(ts.values().to_owned(), ts.dt(), ts.names().to_vec(), spw)
}

/// Modal statistics at the longest horizon for plain DMD and for the best
/// setup of the `niw` whose best setup forecasts best there.
fn modal_selections(
    ts: &TimeSeries,
    cfg: &ExperimentConfig,
    report: &ExperimentReport,
    windows_by_pair: &BTreeMap<(usize, usize), Vec<WindowSpec>>,
) -> Result<Vec<ModalSelection>> {
    let now = *cfg.now_set.iter().max().expect("validated");
    let chosen = report
        .best
        .iter()
        .filter(|b| b.now == now)
        .min_by(|a, b| a.median_nrmse.total_cmp(&b.median_nrmse).then(a.niw.cmp(&b.niw)));
    let Some(chosen) = chosen else {
        return Ok(Vec::new());
    };
    let mut picks = Vec::new();
    if cfg.nde_set.contains(&0) && cfg.nts_set.contains(&0) {
        picks.push(("plain".to_string(), 0, 0));
    }
    if (chosen.nde, chosen.nts) != (0, 0) {
        picks.push((format!("nde{}_nts{}", chosen.nde, chosen.nts), chosen.nde, chosen.nts));
    }
    let windows = &windows_by_pair[&(chosen.niw, now)];
    let mut out = Vec::new();
    for (label, nde, nts) in picks {
        let spec = AugmentationSpec::new(nde, nts)?;
        let fitted: Vec<Option<DmdModel>> = windows
            .par_iter()
            .map(|w| {
                let p = prepare(ts, w).ok()?;
                let model = fit_window(&p, &spec, cfg.stabilize).ok()?;
                modal::participation(&model).ok()?;
                Some(modal::sort_modes(&model))
            })
            .collect();
        let skipped = fitted.iter().filter(|m| m.is_none()).count();
        let models: Vec<DmdModel> = fitted.into_iter().flatten().collect();
        if models.is_empty() {
            continue;
        }
        out.push(ModalSelection {
            label,
            niw: chosen.niw,
            now,
            nde,
            nts,
            skipped,
            statistics: modal::aggregate(&models)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_synthetic, SignalKind};

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            niw_set: vec![1, 4],
            now_set: vec![1, 2],
            nde_set: vec![0, 1],
            nts_set: vec![0, 2],
            samples: 21,
            seed: 7,
            ..Default::default()
        }
    }

    fn cell(nde: usize, nts: usize, median: f64) -> CellReport {
        let mut metrics = MetricSummaries::of(&[]);
        metrics.nrmse.median = median;
        CellReport {
            niw: 1,
            now: 1,
            nde,
            nts,
            evaluated: if median.is_nan() { 0 } else { 5 },
            failed: 0,
            failures: BTreeMap::new(),
            metrics,
        }
    }

    fn report_of(cells: Vec<CellReport>) -> ExperimentReport {
        ExperimentReport {
            config: ExperimentConfig::default(),
            record: RecordInfo {
                names: vec![],
                len: 0,
                dt: 1.0,
            },
            cells,
            best: vec![],
            modal: vec![],
        }
    }

    #[test]
    fn default_grid_has_300_cells() {
        assert_eq!(ExperimentConfig::default().cell_count(), 300);
        assert_eq!(ExperimentConfig::default().max_lead().unwrap(), 17);
    }

    #[test]
    fn best_setup_unique_minimum() {
        let r = report_of(vec![cell(0, 0, 0.5), cell(1, 2, 0.1), cell(2, 0, 0.3)]);
        assert_eq!(best_setup(&r, 1, 1).unwrap(), (1, 2));
    }

    #[test]
    fn best_setup_tie_prefers_cheaper() {
        let r = report_of(vec![cell(4, 2, 0.1), cell(2, 2, 0.1), cell(2, 4, 0.1)]);
        assert_eq!(best_setup(&r, 1, 1).unwrap(), (2, 2));
    }

    #[test]
    fn best_setup_all_failed_is_missing() {
        let r = report_of(vec![cell(0, 0, f64::NAN), cell(1, 0, f64::NAN)]);
        assert!(matches!(best_setup(&r, 1, 1), Err(Error::MissingCell { niw: 1, now: 1 })));
        assert!(matches!(best_setup(&r, 2, 1), Err(Error::MissingCell { .. })));
    }

    #[test]
    fn infeasible_configs_rejected() {
        let ts = generate_synthetic(SignalKind::SingleTone, 2, 190, 1).unwrap();
        let mut cfg = small_cfg();
        assert!(matches!(run(&ts, &cfg), Err(Error::ConfigInfeasible(_))));
        cfg.niw_set.clear();
        assert!(matches!(cfg.validate(10_000), Err(Error::ConfigInfeasible(_))));
    }

    #[test]
    fn sinusoid_cell_is_exact_and_accounting_adds_up() {
        let ts = generate_synthetic(SignalKind::SingleTone, 2, 600, 3).unwrap();
        let cfg = small_cfg();
        let report = run(&ts, &cfg).unwrap();
        assert_eq!(report.cells.len(), cfg.cell_count());
        for c in &report.cells {
            assert_eq!(c.evaluated + c.failed, cfg.samples);
            assert_eq!(c.failures.values().sum::<usize>(), c.failed);
        }
        let c = report.cell(4, 1, 0, 0).unwrap();
        assert!(c.metrics.nrmse.median <= 1e-6, "{}", c.metrics.nrmse.median);
        assert_eq!(report.best.len(), 4);
    }

    #[test]
    fn repeated_runs_identical() {
        let ts = generate_synthetic(SignalKind::TwoTone, 2, 600, 4).unwrap();
        let cfg = small_cfg();
        let a = run_with_jobs(&ts, &cfg, 1).unwrap().to_json().unwrap();
        let b = run_with_jobs(&ts, &cfg, 3).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cell_rows_round_trip() {
        let ts = generate_synthetic(SignalKind::TwoTone, 2, 600, 4).unwrap();
        let report = run(&ts, &small_cfg()).unwrap();
        let rows = report.cell_rows();
        assert_eq!(rows.len(), 16 * 4 * 5);
        let mut buf = Vec::new();
        write_cell_rows(&rows, &mut buf).unwrap();
        assert_eq!(read_cell_rows(&buf[..]).unwrap(), rows);
        let back = ExperimentReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back.to_json().unwrap(), report.to_json().unwrap());
    }
}
