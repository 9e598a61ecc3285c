//! Element-wise denoisers: posterior-mean soft values and their variances
//! under a discrete prior, hard/soft thresholding, and the extrinsic
//! (unbiasing) conversion.

use crate::error::{Error, Result};
use crate::model::{top_s_indices, Prior};
use crate::numerics::flops;

/// Lower clamp for every variance tracked by the recovery loops.
pub const VARIANCE_FLOOR: f64 = 1e-15;

/// Soft values of a vector together with their per-element posterior
/// variances and the average variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftOutput {
    pub x_hat_b: Vec<f64>,
    pub var_per_element: Vec<f64>,
    pub var_avg: f64,
}

/// Scalar MMSE denoiser for an observation `x̃ = x + e`, `e ~ N(0, σ²)`.
pub trait Denoiser {
    /// Posterior mean `E{x | x̃}` and variance `E{(x − E{x | x̃})² | x̃}`.
    /// Callers guarantee `sigma_e_sq > 0`.
    fn posterior(&self, x_tilde: f64, sigma_e_sq: f64) -> (f64, f64);

    /// FLOPs charged for one [`Denoiser::posterior`] call.
    fn posterior_cost(&self) -> u64;
}

const INLINE_ATOMS: usize = 8;

fn posterior_discrete(prior: &Prior, x_tilde: f64, sigma_e_sq: f64) -> (f64, f64) {
    let atoms = prior.atoms();
    let ln_p = prior.ln_probs();
    let inv_two_var = 0.5 / sigma_e_sq;
    let log_weight = |j: usize| {
        let d = x_tilde - atoms[j].value;
        ln_p[j] - d * d * inv_two_var
    };

    let mut inline = [f64::NEG_INFINITY; INLINE_ATOMS];
    let mut heap = Vec::new();
    let lw: &mut [f64] = if atoms.len() <= INLINE_ATOMS {
        &mut inline[..atoms.len()]
    } else {
        heap.resize(atoms.len(), f64::NEG_INFINITY);
        &mut heap
    };
    let mut max = f64::NEG_INFINITY;
    for (j, slot) in lw.iter_mut().enumerate() {
        if ln_p[j].is_finite() {
            *slot = log_weight(j);
            max = max.max(*slot);
        }
    }

    let (mut den, mut num) = (0.0, 0.0);
    for (j, slot) in lw.iter_mut().enumerate() {
        if ln_p[j].is_finite() {
            *slot = (*slot - max).exp();
            den += *slot;
            num += *slot * atoms[j].value;
        }
    }
    let mean = num / den;
    let mut var = 0.0;
    for (j, w) in lw.iter().enumerate() {
        if ln_p[j].is_finite() {
            let d = atoms[j].value - mean;
            var += w * d * d;
        }
    }
    (mean, var / den)
}

impl Denoiser for Prior {
    fn posterior(&self, x_tilde: f64, sigma_e_sq: f64) -> (f64, f64) {
        // Evaluate symmetric priors on |x̃| so odd/even symmetry is exact.
        if self.is_symmetric() && x_tilde < 0.0 {
            let (m, v) = posterior_discrete(self, -x_tilde, sigma_e_sq);
            (-m, v)
        } else {
            posterior_discrete(self, x_tilde, sigma_e_sq)
        }
    }

    fn posterior_cost(&self) -> u64 {
        let active = self.ln_probs().iter().filter(|p| p.is_finite()).count() as u64;
        // Per atom: log-weight 4, shifted exp 1 + exp, accumulation 3,
        // variance term 4. Per call: 1/(2σ²) 2, two final divisions.
        active * (12 + flops::TRANSCENDENTAL) + 4
    }
}

fn check_variance(sigma_e_sq: f64) -> Result<()> {
    if sigma_e_sq > 0.0 && sigma_e_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "estimation variance must be positive, got {sigma_e_sq}"
        )))
    }
}

/// Posterior mean `E{x | x̃}` of a single entry.
pub fn soft_value<D: Denoiser + ?Sized>(x_tilde: f64, sigma_e_sq: f64, prior: &D) -> Result<f64> {
    check_variance(sigma_e_sq)?;
    flops::add(prior.posterior_cost());
    Ok(prior.posterior(x_tilde, sigma_e_sq).0)
}

/// Posterior variance of a single entry; equals `σ²·T′(x̃)`.
pub fn soft_variance<D: Denoiser + ?Sized>(
    x_tilde: f64,
    sigma_e_sq: f64,
    prior: &D,
) -> Result<f64> {
    check_variance(sigma_e_sq)?;
    flops::add(prior.posterior_cost());
    Ok(prior.posterior(x_tilde, sigma_e_sq).1)
}

fn collect_soft(pairs: impl Iterator<Item = (f64, f64)>, n: usize) -> SoftOutput {
    let mut x_hat_b = Vec::with_capacity(n);
    let mut var_per_element = Vec::with_capacity(n);
    for (m, v) in pairs {
        x_hat_b.push(m);
        var_per_element.push(v);
    }
    flops::add(n as u64 + 1);
    let var_avg = if n == 0 {
        0.0
    } else {
        var_per_element.iter().sum::<f64>() / n as f64
    };
    SoftOutput {
        x_hat_b,
        var_per_element,
        var_avg,
    }
}

/// Soft values of every entry of `x_tilde` under one common estimation
/// variance.
pub fn soft_output<D: Denoiser + ?Sized>(
    x_tilde: &[f64],
    sigma_e_sq: f64,
    prior: &D,
) -> Result<SoftOutput> {
    check_variance(sigma_e_sq)?;
    flops::add(prior.posterior_cost() * x_tilde.len() as u64);
    Ok(collect_soft(
        x_tilde.iter().map(|&x| prior.posterior(x, sigma_e_sq)),
        x_tilde.len(),
    ))
}

/// Soft values with an individual estimation variance per entry.
pub fn soft_output_individual<D: Denoiser + ?Sized>(
    x_tilde: &[f64],
    sigma_e_sq: &[f64],
    prior: &D,
) -> Result<SoftOutput> {
    if x_tilde.len() != sigma_e_sq.len() {
        return Err(Error::dims(
            "soft_output_individual",
            x_tilde.len(),
            sigma_e_sq.len(),
        ));
    }
    sigma_e_sq.iter().try_for_each(|&v| check_variance(v))?;
    flops::add(prior.posterior_cost() * x_tilde.len() as u64);
    Ok(collect_soft(
        x_tilde
            .iter()
            .zip(sigma_e_sq)
            .map(|(&x, &v)| prior.posterior(x, v)),
        x_tilde.len(),
    ))
}

/// Extrinsic variance `(1/var_b − 1/var_prior_side)⁻¹`, or `None` when the
/// biased variance carries no information beyond the a-priori side.
#[inline]
pub fn extrinsic_variance(var_b: f64, var_prior_side: f64) -> Option<f64> {
    if var_b > 0.0 && var_b < var_prior_side {
        Some(1.0 / (1.0 / var_b - 1.0 / var_prior_side))
    } else {
        None
    }
}

/// Removes the a-priori contribution `x_tilde` (variance `var_prior_side`)
/// from the biased estimate `x_hat_b` (variance `var_b`). Returns the
/// unbiased estimate and its variance.
pub fn unbias(
    x_hat_b: &[f64],
    x_tilde: &[f64],
    var_b: f64,
    var_prior_side: f64,
) -> Result<(Vec<f64>, f64)> {
    if x_hat_b.len() != x_tilde.len() {
        return Err(Error::dims("unbias", x_hat_b.len(), x_tilde.len()));
    }
    flops::add(4);
    let var = extrinsic_variance(var_b, var_prior_side).ok_or(Error::NoInformation {
        biased: var_b,
        prior_side: var_prior_side,
    })?;
    let wb = var / var_b;
    let wt = var / var_prior_side;
    flops::add(2 + 3 * x_hat_b.len() as u64);
    let x = x_hat_b
        .iter()
        .zip(x_tilde)
        .map(|(&b, &t)| wb * b - wt * t)
        .collect();
    Ok((x, var))
}

/// Inverse of [`unbias`]: recombines an extrinsic estimate with the
/// a-priori side.
pub fn rebias(
    x_hat: &[f64],
    x_tilde: &[f64],
    var_u: f64,
    var_prior_side: f64,
) -> Result<(Vec<f64>, f64)> {
    if x_hat.len() != x_tilde.len() {
        return Err(Error::dims("rebias", x_hat.len(), x_tilde.len()));
    }
    if !(var_u > 0.0 && var_prior_side > 0.0) {
        return Err(Error::Domain("rebias needs positive variances".into()));
    }
    let var_b = 1.0 / (1.0 / var_u + 1.0 / var_prior_side);
    let x = x_hat
        .iter()
        .zip(x_tilde)
        .map(|(&u, &t)| var_b * (u / var_u + t / var_prior_side))
        .collect();
    Ok((x, var_b))
}

/// Zeros all but the `s` largest-magnitude entries (lowest index wins
/// ties). Comparisons are not charged.
pub fn hard_threshold_keep_s(x_tilde: &[f64], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; x_tilde.len()];
    for i in top_s_indices(x_tilde, s.min(x_tilde.len())) {
        out[i] = x_tilde[i];
    }
    out
}

/// Shrinks every entry towards zero by the magnitude of the `(s+1)`-th
/// largest entry, leaving at most `s` nonzeros. With `s ≥ len` nothing is
/// shrunk.
pub fn soft_threshold_keep_s(x_tilde: &[f64], s: usize) -> Vec<f64> {
    if s >= x_tilde.len() {
        return x_tilde.to_vec();
    }
    let mut mags: Vec<f64> = x_tilde.iter().map(|v| v.abs()).collect();
    let (_, tau, _) = mags.select_nth_unstable_by(s, |a, b| b.total_cmp(a));
    let tau = *tau;
    flops::add(x_tilde.len() as u64);
    x_tilde
        .iter()
        .map(|&v| v.signum() * (v.abs() - tau).max(0.0))
        .map(|v| if v == 0.0 { 0.0 } else { v })
        .collect()
}
