//! Seeded Monte-Carlo sweeps. Every trial draws one fresh instance and runs
//! all configured algorithms on it, so comparisons between algorithms are
//! paired. Trials run in parallel but are reduced in trial order, which
//! keeps the output bit-reproducible for any worker count.

mod config;
mod output;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{recover, Algorithm};
use crate::error::{Error, Result};
use crate::model::{noise_variance_from_db, quantize_final, ser, Prior, ProblemInstance};

pub use config::{SweepConfig, SweepKind};
pub use output::{read_raw, read_summary, write_raw, write_summary, SUMMARY_HEADER};

/// One summary line of the output CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub sweep_kind: SweepKind,
    pub sweep_value: f64,
    /// Iteration index (1-based), flops-trace rows only.
    pub iteration: Option<usize>,
    pub trials: usize,
    pub ser_mean: f64,
    pub ser_stderr: f64,
    pub iters_mean: f64,
    /// Mean total FLOPs, or mean cumulative FLOPs at `iteration`.
    pub flops_mean: f64,
}

/// Outcome of one algorithm on one trial (at one iteration for traces).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub sweep_kind: SweepKind,
    pub sweep_value: f64,
    pub iteration: Option<usize>,
    pub trial: usize,
    pub ser: f64,
    pub iterations: usize,
    pub flops: u64,
}

/// Generator for trial `trial` at grid point `grid_idx`: the master seed
/// fixes the key and `(grid_idx << 32) | trial` selects a ChaCha stream, so
/// distinct pairs never share keystream.
pub fn child_rng(master_seed: u64, grid_idx: usize, trial: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(((grid_idx as u64) << 32) | trial as u64);
    rng
}

/// Instance of trial `trial` at grid point `grid_idx`.
pub fn trial_instance(
    config: &SweepConfig,
    grid_idx: usize,
    trial: usize,
) -> Result<ProblemInstance> {
    let (s, db) = config.operating_point(grid_idx);
    let prior = Prior::new(config.l, s, &config.alphabet)?;
    let mut rng = child_rng(config.master_seed, grid_idx, trial);
    ProblemInstance::generate(config.k, &prior, noise_variance_from_db(db), &mut rng)
}

fn run_trial(config: &SweepConfig, grid_idx: usize, trial: usize) -> Result<Vec<TrialRecord>> {
    let inst = trial_instance(config, grid_idx, trial)?;
    let sweep_value = config.grid[grid_idx];
    let mut out = Vec::new();
    for &algorithm in &config.algorithms {
        let res = recover(&inst, &config.recovery_config(algorithm))?;
        let record = |iteration, ser, flops| TrialRecord {
            algorithm,
            sweep_kind: config.sweep_kind,
            sweep_value,
            iteration,
            trial,
            ser,
            iterations: res.iterations_run,
            flops,
        };
        if config.sweep_kind == SweepKind::FlopsTrace {
            // A run that stopped early keeps its last state.
            for t in 0..config.max_iterations {
                let rec = &res.trace[t.min(res.trace.len() - 1)];
                let q = quantize_final(&rec.x_hat, inst.prior());
                out.push(record(
                    Some(t + 1),
                    ser(&q, inst.x_true()),
                    rec.cumulative_flops,
                ));
            }
        } else {
            out.push(record(
                None,
                ser(&res.x_hat_quantized, inst.x_true()),
                res.total_flops(),
            ));
        }
    }
    Ok(out)
}

/// Runs every trial of the sweep and returns the raw records, ordered by
/// grid point, trial, algorithm and iteration.
pub fn simulate(config: &SweepConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut records = Vec::new();
    for grid_idx in 0..config.grid.len() {
        let per_trial: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
            (0..config.trials)
                .into_par_iter()
                .map(|t| run_trial(config, grid_idx, t))
                .collect()
        });
        for r in per_trial {
            records.extend(r?);
        }
    }
    Ok(records)
}

#[derive(Default)]
struct Accumulator {
    n: usize,
    ser: Vec<f64>,
    iters: f64,
    flops: f64,
}

/// Summary rows from raw records. Groups keep the order of their first
/// record; sums run in record order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<ResultRow> {
    let mut keys: Vec<(Algorithm, SweepKind, u64, Option<usize>)> = Vec::new();
    let mut accs: Vec<Accumulator> = Vec::new();
    for r in records {
        let key = (
            r.algorithm,
            r.sweep_kind,
            r.sweep_value.to_bits(),
            r.iteration,
        );
        let idx = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                accs.push(Accumulator::default());
                keys.len() - 1
            }
        };
        let acc = &mut accs[idx];
        acc.n += 1;
        acc.ser.push(r.ser);
        acc.iters += r.iterations as f64;
        acc.flops += r.flops as f64;
    }
    keys.into_iter()
        .zip(accs)
        .map(|((algorithm, sweep_kind, value, iteration), acc)| {
            let n = acc.n as f64;
            let (mean, stderr) = mean_stderr(&acc.ser);
            ResultRow {
                algorithm,
                sweep_kind,
                sweep_value: f64::from_bits(value),
                iteration,
                trials: acc.n,
                ser_mean: mean,
                ser_stderr: stderr,
                iters_mean: acc.iters / n,
                flops_mean: acc.flops / n,
            }
        })
        .collect()
}

/// Sample mean and its standard error (`n − 1` normalization; zero for a
/// single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Noise or sparsity sweep: simulates, aggregates and writes the configured
/// output files.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ResultRow>> {
    let records = simulate(config)?;
    let rows = aggregate(&records);
    if let Some(path) = &config.raw_output {
        write_raw(path, &records)?;
    }
    if let Some(path) = &config.output {
        write_summary(path, &rows)?;
    }
    Ok(rows)
}

/// Per-iteration view. Same as [`run_sweep`] but insists on the
/// flops-trace kind.
pub fn flops_trace(config: &SweepConfig) -> Result<Vec<ResultRow>> {
    if config.sweep_kind != SweepKind::FlopsTrace {
        return Err(Error::Config(format!(
            "flops_trace called on a {} sweep",
            config.sweep_kind
        )));
    }
    run_sweep(config)
}

#[cfg(test)]
mod tests;
