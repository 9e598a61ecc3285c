use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, AlphaPolicy, RecoveryConfig};
use crate::error::{Error, Result};
use crate::estimators::VarianceMode;
use crate::model::Prior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Grid over `inv_noise_db` at fixed sparsity.
    Noise,
    /// Grid over the sparsity at fixed `inv_noise_db`.
    Sparsity,
    /// Per-iteration SER and FLOPs; the grid holds `inv_noise_db` values.
    FlopsTrace,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Noise => "noise",
            SweepKind::Sparsity => "sparsity",
            SweepKind::FlopsTrace => "flops-trace",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_alphabet() -> Vec<f64> {
    vec![-1.0, 1.0]
}

fn default_trials() -> usize {
    500
}

fn default_max_iterations() -> usize {
    RecoveryConfig::DEFAULT_MAX_ITERATIONS
}

fn default_tolerance() -> f64 {
    RecoveryConfig::DEFAULT_TOL
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

/// One Monte-Carlo experiment. Deserializes from a flat key/value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "L", alias = "l")]
    pub l: usize,
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    /// Nonzero symbols, equiprobable; zero is always part of the alphabet.
    #[serde(default = "default_alphabet")]
    pub alphabet: Vec<f64>,
    pub sweep_kind: SweepKind,
    pub grid: Vec<f64>,
    /// Fixed sparsity for the noise and flops-trace kinds.
    #[serde(default)]
    pub sparsity: Option<usize>,
    /// Fixed `10·log10(1/σ_N²)` for the sparsity kind.
    #[serde(default)]
    pub inv_noise_db: Option<f64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Per-trial rows go here when set.
    #[serde(default)]
    pub raw_output: Option<PathBuf>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub variance_mode: VarianceMode,
    #[serde(default)]
    pub alpha_policy: AlphaPolicy,
    /// Worker threads; all available cores when unset.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepConfig {
    /// Noise sweep at `L = 258`, `K = 129` with every algorithm.
    pub fn noise(grid: Vec<f64>, sparsity: usize) -> Self {
        Self {
            l: 258,
            k: 129,
            alphabet: default_alphabet(),
            sweep_kind: SweepKind::Noise,
            grid,
            sparsity: Some(sparsity),
            inv_noise_db: None,
            algorithms: default_algorithms(),
            trials: default_trials(),
            master_seed: 0,
            output: None,
            raw_output: None,
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            variance_mode: VarianceMode::default(),
            alpha_policy: AlphaPolicy::default(),
            workers: None,
        }
    }

    pub fn sparsity_sweep(grid: Vec<usize>, inv_noise_db: f64) -> Self {
        Self {
            sweep_kind: SweepKind::Sparsity,
            grid: grid.into_iter().map(|s| s as f64).collect(),
            sparsity: None,
            inv_noise_db: Some(inv_noise_db),
            ..Self::noise(Vec::new(), 0)
        }
    }

    pub fn flops_trace(inv_noise_db: f64, sparsity: usize) -> Self {
        Self {
            sweep_kind: SweepKind::FlopsTrace,
            ..Self::noise(vec![inv_noise_db], sparsity)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k == 0 || self.k >= self.l {
            return bad(format!(
                "need 0 < K < L, got K = {}, L = {}",
                self.k, self.l
            ));
        }
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return bad("grid values must be finite".into());
        }
        match self.sweep_kind {
            SweepKind::Noise | SweepKind::FlopsTrace => {
                let Some(s) = self.sparsity else {
                    return bad(format!("{} sweep needs `sparsity`", self.sweep_kind));
                };
                if s > self.l {
                    return bad(format!("sparsity {s} exceeds L = {}", self.l));
                }
            }
            SweepKind::Sparsity => {
                match self.inv_noise_db {
                    Some(db) if db.is_finite() => {}
                    _ => return bad("sparsity sweep needs a finite `inv_noise_db`".into()),
                }
                for &s in &self.grid {
                    if s < 0.0 || s.fract() != 0.0 || s > self.l as f64 {
                        return bad(format!("sparsity grid value {s} is not in 0..=L"));
                    }
                }
            }
        }
        if let Some(0) = self.workers {
            return bad("workers must be at least 1".into());
        }
        Prior::new(self.l, 0, &self.alphabet)?;
        for alg in &self.algorithms {
            self.recovery_config(*alg).validate()?;
        }
        Ok(())
    }

    /// `(s, inv_noise_db)` at grid point `idx`.
    pub(crate) fn operating_point(&self, idx: usize) -> (usize, f64) {
        let v = self.grid[idx];
        match self.sweep_kind {
            SweepKind::Noise | SweepKind::FlopsTrace => (self.sparsity.unwrap_or(0), v),
            SweepKind::Sparsity => (v as usize, self.inv_noise_db.unwrap_or(0.0)),
        }
    }

    /// Loop settings for one algorithm. Traces run the full budget so that
    /// every iteration index is populated.
    pub fn recovery_config(&self, algorithm: Algorithm) -> RecoveryConfig {
        let tol = match self.sweep_kind {
            SweepKind::FlopsTrace => 0.0,
            _ => self.tolerance,
        };
        RecoveryConfig::new(algorithm)
            .with_max_iterations(self.max_iterations)
            .with_tolerance(tol)
            .with_variance_mode(self.variance_mode)
            .with_alpha_policy(self.alpha_policy)
    }
}
