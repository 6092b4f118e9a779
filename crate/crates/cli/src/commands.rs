use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;

use admd::augmentation::AugmentationSpec;
use admd::dmd::DmdModel;
use admd::harness::{self, ExperimentConfig};
use admd::metrics;
use admd::modal;
use admd::synthetic::{SignalKind, SyntheticSignal};
use admd::timeseries::TimeSeries;

use crate::manifest::Recorder;

#[derive(Debug)]
pub enum CliError {
    /// Malformed input or usage; exit code 2.
    Input(String),
    /// Numerical failure or incompatible models/records; exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<admd::Error> for CliError {
    fn from(e: admd::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create_file(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn load_model(path: &Path) -> Result<DmdModel, CliError> {
    DmdModel::load(path).map_err(|e| match e {
        admd::Error::DimensionMismatch { .. } => CliError::Numerical(format!("{}: {e}", path.display())),
        e => CliError::Input(format!("{}: {e}", path.display())),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitArgs {
    pub niw: usize,
    pub nde: usize,
    pub nts: usize,
    pub steps_per_wave: usize,
    pub start: Option<usize>,
    pub stabilize: bool,
}

pub fn fit(argv: Vec<String>, csv: &Path, args: FitArgs, out: &Path) -> Result<(), CliError> {
    let mut rec = Recorder::start("fit", argv);
    let ts = TimeSeries::from_csv_path(csv, args.steps_per_wave)?;
    rec.input(csv)?;
    let spec = AugmentationSpec::new(args.nde, args.nts)?;
    let start = args.start.unwrap_or(spec.lead_required());
    let model = harness::fit_training_window(&ts, start, args.niw, &spec, args.stabilize)?;
    rec.config(&args, None);
    create_dir(out)?;
    let path = out.join("model.json");
    model.save(&path)?;
    rec.output(path);
    rec.finish(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PlotRow {
    pub t_over_te: f64,
    pub variable: String,
    pub predicted: f64,
    pub measured: Option<f64>,
}

pub fn forecast(argv: Vec<String>, model_path: &Path, csv: &Path, horizon_waves: usize, out: &Path) -> Result<(), CliError> {
    let mut rec = Recorder::start("forecast", argv);
    let model = load_model(model_path)?;
    rec.input(model_path)?;
    let spw = model.steps_per_wave;
    let ts = TimeSeries::from_csv_path(csv, spw)?;
    rec.input(csv)?;
    if ts.names() != model.names.as_slice() {
        return Err(CliError::Numerical(format!(
            "variables in {} are [{}] but the model was fitted on [{}]",
            csv.display(),
            ts.names().join(", "),
            model.names.join(", ")
        )));
    }
    if (ts.dt() - model.dt).abs() > 1e-6 * model.dt {
        return Err(CliError::Input(format!(
            "{} has time step {} but the model was fitted with {}",
            csv.display(),
            ts.dt(),
            model.dt
        )));
    }
    let window = model
        .window
        .ok_or_else(|| CliError::Input(format!("{} records no training window", model_path.display())))?;
    let origin = window.train_range(spw).end;
    let horizon = horizon_waves * spw;
    let predicted = model.forecast(horizon);
    let available = ts.len().saturating_sub(origin).min(horizon);
    let measured = model
        .standardization
        .apply(ts.block(origin..origin + available).as_ref());

    let mut rows = Vec::with_capacity(horizon * model.names.len());
    for j in 0..horizon {
        for (i, name) in model.names.iter().enumerate() {
            rows.push(PlotRow {
                t_over_te: (j + 1) as f64 / spw as f64,
                variable: name.clone(),
                predicted: predicted[(i, j)],
                measured: (j < available).then(|| measured[(i, j)]),
            });
        }
    }
    rec.config(
        serde_json::json!({ "horizon_waves": horizon_waves, "origin": origin }),
        None,
    );
    create_dir(out)?;
    let plot = out.join("forecast.csv");
    modal::write_rows(&rows, create_file(&plot)?)?;
    rec.output(plot);
    if available >= 2 {
        let report = metrics::evaluate(predicted.subcols(0, available), measured.as_ref())
            .map_err(|e| CliError::from(metrics::name_error(e, &model.names)))?;
        let path = out.join("metrics.json");
        write_json(&path, &report)?;
        rec.output(path);
    }
    rec.finish(out)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn experiment(
    argv: Vec<String>,
    csv: &Path,
    config_file: Option<&Path>,
    out_dir: &Path,
    jobs: usize,
) -> Result<(), CliError> {
    let mut rec = Recorder::start("experiment", argv);
    let cfg = match config_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            rec.input(path)?;
            parse_config(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    let ts = TimeSeries::from_csv_path(csv, cfg.steps_per_wave)?;
    rec.input(csv)?;
    cfg.validate(ts.len())?;
    let report = harness::run_with_jobs(&ts, &cfg, jobs)?;
    rec.config(&cfg, Some(cfg.seed));
    for path in report.write_dir(out_dir)? {
        rec.output(path);
    }
    rec.finish(out_dir)
}

pub fn modes(argv: Vec<String>, paths: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut rec = Recorder::start("modes", argv);
    let mut models = Vec::with_capacity(paths.len());
    for p in paths {
        models.push(load_model(p)?);
        rec.input(p)?;
    }
    if let Some(bad) = models.iter().find(|m| m.dim != models[0].dim) {
        return Err(CliError::Numerical(format!(
            "models have different dimensions: {} and {}",
            models[0].dim, bad.dim
        )));
    }
    create_dir(out)?;
    for (k, m) in models.iter().enumerate() {
        let path = out.join(format!("modes_{k}.csv"));
        modal::write_rows(&modal::mode_table(m)?, create_file(&path)?)?;
        rec.output(path);
    }
    if models.len() > 1 {
        let sorted: Vec<DmdModel> = models.iter().map(modal::sort_modes).collect();
        let stats = modal::aggregate(&sorted)?;
        let path = out.join("statistics.json");
        write_json(&path, &stats)?;
        rec.output(path);
        let path = out.join("slots.csv");
        modal::write_rows(&stats.slot_rows(), create_file(&path)?)?;
        rec.output(path);
        let path = out.join("bands.csv");
        modal::write_rows(&stats.band_rows(), create_file(&path)?)?;
        rec.output(path);
    }
    rec.finish(out)
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    kind: &str,
    vars: usize,
    steps: usize,
    seed: u64,
    snr_db: Option<f64>,
    dt: f64,
    steps_per_wave: usize,
    out: &Path,
) -> Result<(), CliError> {
    let mut kind: SignalKind = kind.parse()?;
    if let (SignalKind::ToneNoise { snr_db: s }, Some(v)) = (&mut kind, snr_db) {
        *s = v;
    }
    if vars == 0 {
        return Err(CliError::Input("--vars must be positive".into()));
    }
    let signal = SyntheticSignal {
        kind,
        n_vars: vars,
        len: steps,
        dt,
        steps_per_wave,
        seed,
    };
    let ts = signal.generate()?;
    ts.write_csv(create_file(out)?)?;
    Ok(())
}
