//! Closed-form synthetic records with a known dominant period.
//!
//! With `T_e = steps_per_wave * dt`, `phi` the golden ratio and per-variable
//! amplitudes `a_i`, `c_i`, `d_i` and phases drawn from a seeded generator:
//!
//! * single tone: `a_i sin(2 pi t / T_e + p_i)`
//! * two tone: `a_i sin(2 pi t / T_e + p_i) + c_i sin(2 pi phi t / T_e + r_i)`
//! * quasi-periodic with drift: the two-tone signal with the first tone
//!   amplitude-modulated by `1 + 0.4 sin(2 pi t / T_m + s_i)`, `T_m = 3 (1 + sqrt 2) T_e`,
//!   plus a slow component `d_i sin(2 pi t / T_d + u_i)`, `T_d = 40 phi T_e`,
//!   plus white noise at 30 dB below the tone power
//! * tone plus noise: the single tone plus white Gaussian noise at the
//!   requested signal-to-noise ratio (signal power `a_i^2 / 2`).

use std::f64::consts::{PI, SQRT_2, TAU};

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{TimeSeries, DEFAULT_STEPS_PER_WAVE};

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

const MODULATION_DEPTH: f64 = 0.4;
const DRIFT_NOISE_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    SingleTone,
    TwoTone,
    QuasiPeriodicWithDrift,
    ToneNoise { snr_db: f64 },
}

impl std::str::FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-tone" => Ok(Self::SingleTone),
            "two-tone" => Ok(Self::TwoTone),
            "quasi-periodic-with-drift" | "quasi-periodic" => Ok(Self::QuasiPeriodicWithDrift),
            "tone-plus-noise" => Ok(Self::ToneNoise { snr_db: 20.0 }),
            other => Err(Error::InvalidSeries(format!("unknown signal kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSignal {
    pub kind: SignalKind,
    pub n_vars: usize,
    pub len: usize,
    pub dt: f64,
    pub steps_per_wave: usize,
    pub seed: u64,
}

impl SyntheticSignal {
    pub fn new(kind: SignalKind, n_vars: usize, len: usize, seed: u64) -> Self {
        Self {
            kind,
            n_vars,
            len,
            dt: 0.1,
            steps_per_wave: DEFAULT_STEPS_PER_WAVE,
            seed,
        }
    }

    pub fn generate(&self) -> Result<TimeSeries> {
        let spw = self.steps_per_wave;
        if self.len < 4 * spw {
            return Err(Error::InvalidSeries(format!(
                "synthetic records need at least {} steps, got {}",
                4 * spw,
                self.len
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let m = self.len;
        // phase per step of the dominant tone
        let w1 = TAU / spw as f64;
        let w2 = w1 * GOLDEN_RATIO;
        let wm = w1 / (3.0 * (1.0 + SQRT_2));
        let wd = w1 / (40.0 * GOLDEN_RATIO);
        let mut values = Mat::<f64>::zeros(self.n_vars, m);
        for i in 0..self.n_vars {
            let a = rng.random_range(0.5..1.5);
            let p1 = rng.random_range(0.0..TAU);
            let c = a * rng.random_range(0.3..0.7);
            let p2 = rng.random_range(0.0..TAU);
            let d = rng.random_range(0.5..1.0);
            let pm = rng.random_range(0.0..TAU);
            let pd = rng.random_range(0.0..TAU);
            let tone = |k: f64| a * (w1 * k + p1).sin();
            let second = |k: f64| c * (w2 * k + p2).sin();
            match self.kind {
                SignalKind::SingleTone => {
                    for k in 0..m {
                        values[(i, k)] = tone(k as f64);
                    }
                }
                SignalKind::TwoTone => {
                    for k in 0..m {
                        let k = k as f64;
                        values[(i, k as usize)] = tone(k) + second(k);
                    }
                }
                SignalKind::QuasiPeriodicWithDrift => {
                    let sigma = noise_sigma(a, DRIFT_NOISE_DB);
                    for k in 0..m {
                        let kf = k as f64;
                        let envelope = 1.0 + MODULATION_DEPTH * (wm * kf + pm).sin();
                        values[(i, k)] = envelope * tone(kf) + second(kf) + d * (wd * kf + pd).sin()
                            + sigma * unit.sample(&mut rng);
                    }
                }
                SignalKind::ToneNoise { snr_db } => {
                    let sigma = noise_sigma(a, snr_db);
                    for k in 0..m {
                        values[(i, k)] = tone(k as f64) + sigma * unit.sample(&mut rng);
                    }
                }
            }
        }
        let names = (1..=self.n_vars).map(|i| format!("x{i}")).collect();
        TimeSeries::new(values, self.dt, names, spw)
    }
}

fn noise_sigma(amplitude: f64, snr_db: f64) -> f64 {
    (amplitude * amplitude / 2.0 / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Synthetic record with `dt = 0.1` and 32 steps per wave.
pub fn generate_synthetic(kind: SignalKind, n: usize, m: usize, seed: u64) -> Result<TimeSeries> {
    SyntheticSignal::new(kind, n, m, seed).generate()
}

/// Angular frequencies (rad/step) of the two tones for `steps_per_wave`.
pub fn tone_frequencies(steps_per_wave: usize) -> (f64, f64) {
    let w1 = 2.0 * PI / steps_per_wave as f64;
    (w1, w1 * GOLDEN_RATIO)
}
