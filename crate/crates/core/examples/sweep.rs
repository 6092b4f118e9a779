//! Times the default experiment grid on a synthetic quasi-periodic record.
//!
//! `cargo run --release --example sweep -- [samples] [niw]`

use std::time::Instant;

use admd::harness::{run, ExperimentConfig};
use admd::synthetic::{generate_synthetic, SignalKind};

fn main() -> admd::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1001);
    let ts = generate_synthetic(SignalKind::QuasiPeriodicWithDrift, 7, 10_000, 1)?;
    let mut cfg = ExperimentConfig {
        samples,
        ..Default::default()
    };
    if let Some(niw) = std::env::args().nth(2).and_then(|s| s.parse().ok()) {
        cfg.niw_set = vec![niw];
    }
    let t0 = Instant::now();
    let report = run(&ts, &cfg)?;
    println!("{} cells, {samples} samples, {:.1} s", report.cells.len(), t0.elapsed().as_secs_f64());
    for b in &report.best {
        println!("niw {} now {} -> nde {} nts {} median nrmse {:.4}", b.niw, b.now, b.nde, b.nts, b.median_nrmse);
    }
    Ok(())
}
