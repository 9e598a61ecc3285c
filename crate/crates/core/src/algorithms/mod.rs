//! The recovery loops. All seven share one skeleton: starting from
//! `x̂ = 0`, `r = y`, alternate
//!
//! 1. an estimation step `x̃ = x̂ + H·r` with a variance estimate `σ_E²`,
//! 2. an element-wise step `x̂ = T(x̃)` that injects the prior,
//! 3. a residual update `r = y − A·x̂`,
//!
//! until the estimate stops moving or the iteration budget is spent. They
//! differ in how `H` is chosen, how variances are tracked, and whether the
//! soft output is converted to extrinsic form before feedback.

mod oracle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::denoiser::{
    hard_threshold_keep_s, soft_output, soft_output_individual, soft_threshold_keep_s, unbias,
    SoftOutput, VARIANCE_FLOOR,
};
use crate::error::{Error, Result};
use crate::estimators::{
    alpha_max, error_var_individual, krylov_first_order, lambda_max_estimate,
    lambda_max_statistical, matched_filter, mf_variance, mmse, variance_au, variance_ua,
    LinearEstimator, SignalVariance, VarianceMode,
};
use crate::model::{quantize_final, ProblemInstance};
use crate::numerics::{axpy, dist_sq, flops, mat_vec, norm_sq, sub, FlopCounter};

pub use oracle::{brute_force_oracle, ORACLE_CANDIDATE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Algorithm {
    /// Iterative hard thresholding.
    Iht,
    /// Iterative soft thresholding.
    Ist,
    /// Iterative soft feedback: matched filter, soft values, extrinsic
    /// feedback.
    Isf,
    /// Bayesian approximate message passing with Onsager-corrected residual.
    Amp,
    /// Turbo LMMSE with average variance feedback.
    Tms,
    /// Turbo LMMSE with individual per-element variance feedback.
    Ims,
    /// Soft feedback over a fixed first-order Krylov approximation of the
    /// LMMSE estimator.
    Iks,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Iht,
        Algorithm::Ist,
        Algorithm::Isf,
        Algorithm::Amp,
        Algorithm::Tms,
        Algorithm::Ims,
        Algorithm::Iks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Iht => "IHT",
            Algorithm::Ist => "IST",
            Algorithm::Isf => "ISF",
            Algorithm::Amp => "AMP",
            Algorithm::Tms => "TMS",
            Algorithm::Ims => "IMS",
            Algorithm::Iks => "IKS",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// How IKS picks its step size `α`. The factor variants give
/// `α = factor·α_max` with `σ_S² = s/L` and differ in the `λ_max(AAᵀ)`
/// plugged into `α_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// Large-system value `(1 + √(L/K))²`.
    Statistical(f64),
    /// Gershgorin bound of the actual matrix. Always stable but loose,
    /// which weakens the first-order term.
    Gershgorin(f64),
    /// Use this `α` as is (must still be stable).
    Fixed(f64),
}

impl AlphaPolicy {
    pub const DEFAULT_FACTOR: f64 = 0.6;
}

impl Default for AlphaPolicy {
    fn default() -> Self {
        AlphaPolicy::Statistical(Self::DEFAULT_FACTOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub algorithm: Algorithm,
    pub max_iterations: usize,
    /// Stop once `‖x̂⁽ᵗ⁾ − x̂⁽ᵗ⁻¹⁾‖₂²` drops below this.
    pub convergence_tol: f64,
    /// TMS only.
    pub variance_mode: VarianceMode,
    /// IKS only.
    pub alpha_policy: AlphaPolicy,
}

impl RecoveryConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 20;
    pub const DEFAULT_TOL: f64 = 1e-8;

    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            convergence_tol: Self::DEFAULT_TOL,
            variance_mode: VarianceMode::default(),
            alpha_policy: AlphaPolicy::default(),
        }
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.convergence_tol = tol;
        self
    }

    pub fn with_variance_mode(mut self, mode: VarianceMode) -> Self {
        self.variance_mode = mode;
        self
    }

    pub fn with_alpha_policy(mut self, policy: AlphaPolicy) -> Self {
        self.alpha_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        // A zero tolerance disables the stopping rule.
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("convergence_tol must be non-negative".into()));
        }
        match self.alpha_policy {
            AlphaPolicy::Statistical(f) | AlphaPolicy::Gershgorin(f) if !(f > 0.0 && f < 1.0) => {
                Err(Error::Config(format!(
                    "alpha safety factor {f} outside (0, 1)"
                )))
            }
            AlphaPolicy::Fixed(a) if !(a > 0.0) => {
                Err(Error::Config(format!("alpha {a} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// State after one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Feedback estimate (pre-quantization).
    pub x_hat: Vec<f64>,
    pub sigma_e_sq: Option<f64>,
    pub sigma_s_sq: Option<f64>,
    /// Per-element signal variances, IMS only.
    pub sigma_s_sq_per_element: Option<Vec<f64>>,
    /// FLOPs spent by the loop up to and including this iteration.
    pub cumulative_flops: u64,
    /// `‖r‖₂` after the residual update.
    pub residual_norm: f64,
}

pub type IterationTrace = Vec<IterationRecord>;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    pub x_hat_quantized: Vec<f64>,
    pub iterations_run: usize,
    /// True when the loop ended before the iteration budget.
    pub converged: bool,
    pub trace: IterationTrace,
}

impl RecoveryResult {
    /// FLOPs of the whole run.
    pub fn total_flops(&self) -> u64 {
        self.trace.last().map_or(0, |r| r.cumulative_flops)
    }
}

/// Runs the configured algorithm on `instance`.
pub fn recover(instance: &ProblemInstance, config: &RecoveryConfig) -> Result<RecoveryResult> {
    config.validate()?;
    match config.algorithm {
        Algorithm::Iht => run_iht(instance, config),
        Algorithm::Ist => run_ist(instance, config),
        Algorithm::Isf => run_isf(instance, config),
        Algorithm::Amp => run_amp(instance, config),
        Algorithm::Tms => run_tms(instance, config),
        Algorithm::Ims => run_ims(instance, config),
        Algorithm::Iks => run_iks(instance, config),
    }
}

#[derive(Default)]
struct StepInfo {
    sigma_e_sq: Option<f64>,
    sigma_s_sq: Option<f64>,
    sigma_s_sq_per_element: Option<Vec<f64>>,
    /// The posterior variance collapsed below the floor; stop after this
    /// iteration.
    collapsed: bool,
}

/// Iteration driver shared by all loops. `step` performs one full
/// iteration on `(x̂, r)`. Work done before the call (fixed estimators) is
/// not charged to the trace.
fn drive(
    instance: &ProblemInstance,
    config: &RecoveryConfig,
    mut step: impl FnMut(&mut Vec<f64>, &mut Vec<f64>) -> Result<StepInfo>,
) -> Result<RecoveryResult> {
    let mut x_hat = vec![0.0; instance.dimension()];
    let mut r = instance.y().to_vec();
    let mut trace = Vec::with_capacity(config.max_iterations);
    let mut counter = FlopCounter::start();
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let prev = x_hat.clone();
        let info = step(&mut x_hat, &mut r)?;
        let moved = dist_sq(&x_hat, &prev);
        let cumulative_flops = counter.lap();
        let residual_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        trace.push(IterationRecord {
            x_hat: x_hat.clone(),
            sigma_e_sq: info.sigma_e_sq,
            sigma_s_sq: info.sigma_s_sq,
            sigma_s_sq_per_element: info.sigma_s_sq_per_element,
            cumulative_flops,
            residual_norm,
        });
        if info.collapsed || moved < config.convergence_tol {
            converged = true;
            break;
        }
    }

    let x_hat_quantized = quantize_final(&x_hat, instance.prior());
    Ok(RecoveryResult {
        iterations_run: trace.len(),
        x_hat,
        x_hat_quantized,
        converged,
        trace,
    })
}

/// `r = y − A·x̂`.
fn residual(instance: &ProblemInstance, x_hat: &[f64]) -> Result<Vec<f64>> {
    Ok(sub(
        instance.y(),
        &mat_vec(instance.sensing_matrix(), x_hat)?,
    ))
}

/// Initial signal variance `s/L`, floored so that `s = 0` stays usable.
fn initial_signal_variance(instance: &ProblemInstance) -> f64 {
    (instance.sparsity() as f64 / instance.dimension() as f64).max(VARIANCE_FLOOR)
}

/// Converts soft values to extrinsic form. Falls back to the biased values
/// when the soft variance is not below `sigma_e_sq`; flags a collapsed
/// posterior.
fn extrinsic_feedback(
    soft: SoftOutput,
    x_tilde: &[f64],
    sigma_e_sq: f64,
) -> Result<(Vec<f64>, f64, bool)> {
    if soft.var_avg < VARIANCE_FLOOR {
        return Ok((soft.x_hat_b, VARIANCE_FLOOR, true));
    }
    match unbias(&soft.x_hat_b, x_tilde, soft.var_avg, sigma_e_sq) {
        Ok((x, var)) => Ok((x, var.max(VARIANCE_FLOOR), false)),
        Err(Error::NoInformation { .. }) => Ok((soft.x_hat_b, soft.var_avg, false)),
        Err(e) => Err(e),
    }
}

fn run_thresholding(
    instance: &ProblemInstance,
    config: &RecoveryConfig,
    threshold: fn(&[f64], usize) -> Vec<f64>,
) -> Result<RecoveryResult> {
    let mf = matched_filter(instance.sensing_matrix())?;
    let s = instance.sparsity();
    drive(instance, config, |x_hat, r| {
        let x_tilde = mf.apply(x_hat, r)?;
        *x_hat = threshold(&x_tilde, s);
        *r = residual(instance, x_hat)?;
        Ok(StepInfo::default())
    })
}

/// Matched filter followed by keeping the `s` largest magnitudes.
pub fn run_iht(instance: &ProblemInstance, config: &RecoveryConfig) -> Result<RecoveryResult> {
    run_thresholding(instance, config, hard_threshold_keep_s)
}

/// Matched filter followed by shrinkage to at most `s` survivors.
pub fn run_ist(instance: &ProblemInstance, config: &RecoveryConfig) -> Result<RecoveryResult> {
    run_thresholding(instance, config, soft_threshold_keep_s)
}

/// Matched filter, soft values, extrinsic feedback; `σ_E²` from the
/// large-system approximation `(L/K)·σ_S² + σ_N²`.
pub fn run_isf(instance: &ProblemInstance, config: &RecoveryConfig) -> Result<RecoveryResult> {
    let mf = matched_filter(instance.sensing_matrix())?;
    let (k, l) = (instance.measurements(), instance.dimension());
    let sigma_n_sq = instance.sigma_n_sq();
    let mut sigma_s_sq = initial_signal_variance(instance);
    drive(instance, config, |x_hat, r| {
        let x_tilde = mf.apply(x_hat, r)?;
        let sigma_e_sq = mf_variance(sigma_s_sq, sigma_n_sq, k, l).max(VARIANCE_FLOOR);
        let soft = soft_output(&x_tilde, sigma_e_sq, instance.prior())?;
        let (x, var, collapsed) = extrinsic_feedback(soft, &x_tilde, sigma_e_sq)?;
        *x_hat = x;
        sigma_s_sq = var;
        *r = residual(instance, x_hat)?;
        Ok(StepInfo {
            sigma_e_sq: Some(sigma_e_sq),
            sigma_s_sq: Some(sigma_s_sq),
            collapsed,
            ..StepInfo::default()
        })
    })
}

/// Onsager coefficient `b = (L/K)·σ_{S,B}²/σ_E² = (1/K)·Σ T′(x̃_l)`.
pub fn onsager_coefficient(var_avg: f64, sigma_e_sq: f64, k: usize, l: usize) -> f64 {
    flops::add(3);
    (l as f64 / k as f64) * var_avg / sigma_e_sq
}

/// Bayesian AMP: the matched-filter proxy is formed around the biased soft
/// values, and the residual carries the Onsager term
/// `r = y − A·x̂_B + b·r` instead of an explicit unbiasing step. The
/// estimation variance is tracked as `‖r‖²/K`.
pub fn run_amp(instance: &ProblemInstance, config: &RecoveryConfig) -> Result<RecoveryResult> {
    let mf = matched_filter(instance.sensing_matrix())?;
    let (k, l) = (instance.measurements(), instance.dimension());
    drive(instance, config, |x_hat_b, r| {
        flops::add(1);
        let sigma_e_sq = (norm_sq(r) / k as f64).max(VARIANCE_FLOOR);
        let x_tilde = mf.apply(x_hat_b, r)?;
        let soft = soft_output(&x_tilde, sigma_e_sq, instance.prior())?;
        let b = onsager_coefficient(soft.var_avg, sigma_e_sq, k, l);
        let mut next = residual(instance, &soft.x_hat_b)?;
        axpy(b, r, &mut next);
        *r = next;
        *x_hat_b = soft.x_hat_b;
        Ok(StepInfo {
            sigma_e_sq: Some(sigma_e_sq),
            sigma_s_sq: Some(soft.var_avg),
            collapsed: soft.var_avg < VARIANCE_FLOOR,
            ..StepInfo::default()
        })
    })
}

/// Turbo LMMSE with average feedback: the unbiased LMMSE estimator is
/// rebuilt every iteration for the current `σ_S²`, and `σ_E²` follows the
/// configured [`VarianceMode`].
pub fn run_tms(instance: &ProblemInstance, config: &RecoveryConfig) -> Result<RecoveryResult> {
    let sigma_n_sq = instance.sigma_n_sq();
    let mut sigma_s_sq = initial_signal_variance(instance);
    drive(instance, config, |x_hat, r| {
        let est = mmse(
            instance.sensing_matrix(),
            sigma_n_sq,
            SignalVariance::Scalar(sigma_s_sq),
        )?;
        let x_tilde = est.apply(x_hat, r)?;
        let k_diag = est.k_diag().expect("LMMSE estimator records its cascade");
        let sigma_e_sq = match config.variance_mode {
            VarianceMode::Au => variance_au(k_diag, sigma_s_sq)?,
            VarianceMode::Ua => variance_ua(k_diag, sigma_s_sq)?,
        }
        .max(VARIANCE_FLOOR);
        let soft = soft_output(&x_tilde, sigma_e_sq, instance.prior())?;
        let (x, var, collapsed) = extrinsic_feedback(soft, &x_tilde, sigma_e_sq)?;
        *x_hat = x;
        sigma_s_sq = var;
        *r = residual(instance, x_hat)?;
        Ok(StepInfo {
            sigma_e_sq: Some(sigma_e_sq),
            sigma_s_sq: Some(sigma_s_sq),
            collapsed,
            ..StepInfo::default()
        })
    })
}

/// Turbo LMMSE with individual feedback: every entry keeps its own signal
/// variance and the LMMSE estimator uses `Φ = diag(σ_{S,l}²)`. The
/// estimator output is unbiased per entry, each entry gets its own
/// estimation variance `σ_{S,l}²(1 − K_ll)/K_ll`, and the posterior means
/// with their posterior variances are fed back directly.
///
/// An entry-wise extrinsic conversion is not applied here: where the
/// posterior variance approaches the estimation variance it amplifies the
/// proxy without bound, and the loop stalls at a far worse error rate.
pub fn run_ims(instance: &ProblemInstance, config: &RecoveryConfig) -> Result<RecoveryResult> {
    let sigma_n_sq = instance.sigma_n_sq();
    let l = instance.dimension();
    let mut var_s = vec![initial_signal_variance(instance); l];
    drive(instance, config, |x_hat, r| {
        let est = mmse(
            instance.sensing_matrix(),
            sigma_n_sq,
            SignalVariance::PerElement(&var_s),
        )?;
        let x_tilde = est.apply(x_hat, r)?;
        let k_diag = est.k_diag().expect("LMMSE estimator records its cascade");
        let (_, mut var_e) = error_var_individual(k_diag, SignalVariance::PerElement(&var_s))?;
        var_e.iter_mut().for_each(|v| *v = v.max(VARIANCE_FLOOR));
        let soft = soft_output_individual(&x_tilde, &var_e, instance.prior())?;
        let collapsed = soft.var_avg < VARIANCE_FLOOR;
        x_hat.copy_from_slice(&soft.x_hat_b);
        for (v, &t) in var_s.iter_mut().zip(&soft.var_per_element) {
            *v = t.max(VARIANCE_FLOOR);
        }
        *r = residual(instance, x_hat)?;
        flops::add(l as u64 + 1);
        let mean_s = var_s.iter().sum::<f64>() / l as f64;
        let mean_e = var_e.iter().sum::<f64>() / l as f64;
        Ok(StepInfo {
            sigma_e_sq: Some(mean_e),
            sigma_s_sq: Some(mean_s),
            sigma_s_sq_per_element: Some(var_s.clone()),
            collapsed,
        })
    })
}

/// Builds the fixed first-order Krylov estimator IKS runs with.
pub fn iks_estimator(instance: &ProblemInstance, policy: AlphaPolicy) -> Result<LinearEstimator> {
    let a = instance.sensing_matrix();
    let sigma_s_sq = initial_signal_variance(instance);
    let sigma_n_sq = instance.sigma_n_sq();
    let alpha = match policy {
        AlphaPolicy::Statistical(f) => {
            let lambda = lambda_max_statistical(a.rows(), a.cols());
            f * alpha_max(lambda, sigma_s_sq, sigma_n_sq)
        }
        AlphaPolicy::Gershgorin(f) => {
            f * alpha_max(lambda_max_estimate(a)?, sigma_s_sq, sigma_n_sq)
        }
        AlphaPolicy::Fixed(alpha) => alpha,
    };
    krylov_first_order(a, sigma_s_sq, sigma_n_sq, alpha)
}

/// Iterative Krylov soft feedback: one fixed, unbiased first-order Krylov
/// estimator with precomputed `(μ_S, μ_N)`, so `σ_E² = σ_S²·μ_S + σ_N²·μ_N`
/// costs three FLOPs per iteration.
pub fn run_iks(instance: &ProblemInstance, config: &RecoveryConfig) -> Result<RecoveryResult> {
    let est = iks_estimator(instance, config.alpha_policy)?;
    run_iks_with(instance, config, &est)
}

/// The IKS loop over a caller-supplied estimator, which must carry error
/// coefficients.
pub fn run_iks_with(
    instance: &ProblemInstance,
    config: &RecoveryConfig,
    est: &LinearEstimator,
) -> Result<RecoveryResult> {
    let coeffs = est.coeffs().ok_or_else(|| {
        Error::Config("IKS needs an estimator with precomputed error coefficients".into())
    })?;
    let sigma_n_sq = instance.sigma_n_sq();
    let mut sigma_s_sq = initial_signal_variance(instance);
    drive(instance, config, |x_hat, r| {
        let x_tilde = est.apply(x_hat, r)?;
        let sigma_e_sq = coeffs
            .error_variance(sigma_s_sq, sigma_n_sq)
            .max(VARIANCE_FLOOR);
        let soft = soft_output(&x_tilde, sigma_e_sq, instance.prior())?;
        let (x, var, collapsed) = extrinsic_feedback(soft, &x_tilde, sigma_e_sq)?;
        *x_hat = x;
        sigma_s_sq = var;
        *r = residual(instance, x_hat)?;
        Ok(StepInfo {
            sigma_e_sq: Some(sigma_e_sq),
            sigma_s_sq: Some(sigma_s_sq),
            collapsed,
            ..StepInfo::default()
        })
    })
}
