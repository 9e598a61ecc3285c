//! Linear front-ends for the estimation step: matched filter, exact LMMSE
//! (scalar or per-element signal variance) with diagonal unbiasing, and the
//! first-order Krylov (polynomial expansion) approximation of the LMMSE
//! matrix together with its precomputed error-variance coefficients.

use crate::error::{Error, Result};
use crate::numerics::{
    add_to_diag, diag_of_product, flops, mat_mat, mat_mat_t, mat_vec, scale_cols, scale_rows,
    solve_spd, Matrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    MatchedFilter,
    Mmse,
    Krylov0,
    Krylov1,
}

/// Order in which the estimation variance is averaged and unbiased.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VarianceMode {
    /// Average the biased variances, then unbias (arithmetic mean of `K_ll`).
    #[default]
    Au,
    /// Unbias per element, then average (harmonic mean of `K_ll`).
    Ua,
}

/// Variance of the remaining signal `x − x̂`.
#[derive(Debug, Clone, Copy)]
pub enum SignalVariance<'a> {
    Scalar(f64),
    PerElement(&'a [f64]),
}

impl SignalVariance<'_> {
    fn at(&self, l: usize) -> f64 {
        match self {
            SignalVariance::Scalar(v) => *v,
            SignalVariance::PerElement(v) => v[l],
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match self {
            SignalVariance::Scalar(v) if ok(*v) => Ok(()),
            SignalVariance::PerElement(v) if v.len() != len => {
                Err(Error::dims("signal variance", len, v.len()))
            }
            SignalVariance::PerElement(v) if v.iter().all(|x| ok(*x)) => Ok(()),
            _ => Err(Error::Domain("signal variances must be positive".into())),
        }
    }
}

/// Trace coefficients with `σ_E² = σ_S²·μ_S + σ_N²·μ_N` for a fixed
/// estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCoeffs {
    pub mu_s: f64,
    pub mu_n: f64,
}

impl ErrorCoeffs {
    pub fn error_variance(&self, sigma_s_sq: f64, sigma_n_sq: f64) -> f64 {
        flops::add(3);
        sigma_s_sq * self.mu_s + sigma_n_sq * self.mu_n
    }
}

/// Immutable estimation matrix `H` (`L×K`, already unbiased where the kind
/// calls for it) plus the bookkeeping needed for variance tracking.
#[derive(Debug, Clone)]
pub struct LinearEstimator {
    h: Matrix,
    kind: EstimatorKind,
    k_diag: Option<Vec<f64>>,
    coeffs: Option<ErrorCoeffs>,
}

impl LinearEstimator {
    /// Wraps an arbitrary estimation matrix; used to substitute estimators
    /// in experiments.
    pub fn from_parts(
        h: Matrix,
        kind: EstimatorKind,
        k_diag: Option<Vec<f64>>,
        coeffs: Option<ErrorCoeffs>,
    ) -> Self {
        Self {
            h,
            kind,
            k_diag,
            coeffs,
        }
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Diagonal of the biased cascade `H_B·A`.
    pub fn k_diag(&self) -> Option<&[f64]> {
        self.k_diag.as_deref()
    }

    pub fn coeffs(&self) -> Option<ErrorCoeffs> {
        self.coeffs
    }

    /// The biased matrix `H_B = diag(K_ll)·H`, when the cascade diagonal is
    /// known. Uncharged.
    pub fn biased(&self) -> Option<Matrix> {
        let k = self.k_diag.as_ref()?;
        let mut hb = self.h.clone();
        for (l, &kl) in k.iter().enumerate() {
            hb.row_mut(l).iter_mut().for_each(|v| *v *= kl);
        }
        Some(hb)
    }

    /// Proxy `x̃ = x̂ + H·r`.
    pub fn apply(&self, x_hat: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        if x_hat.len() != self.h.rows() {
            return Err(Error::dims(
                "LinearEstimator::apply",
                self.h.rows(),
                x_hat.len(),
            ));
        }
        let mut x = mat_vec(&self.h, r)?;
        flops::add(x.len() as u64);
        x.iter_mut().zip(x_hat).for_each(|(a, b)| *a += b);
        Ok(x)
    }
}

/// Row scaling `diag(1/K_ll)·H_B`, checking `K_ll > 0`.
fn unbiased_from(h_b: Matrix, k_diag: &[f64]) -> Result<Matrix> {
    if let Some(l) = k_diag.iter().position(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(Error::DegenerateMatrix(format!(
            "cascade diagonal K[{l}] = {} is not positive",
            k_diag[l]
        )));
    }
    flops::add(k_diag.len() as u64);
    let c: Vec<f64> = k_diag.iter().map(|k| 1.0 / k).collect();
    scale_rows(&c, &h_b)
}

/// `H = C·Aᵀ` with `c_l = 1/‖a_l‖²`.
pub fn matched_filter(a: &Matrix) -> Result<LinearEstimator> {
    let at = a.transpose();
    let norms: Vec<f64> = (0..at.rows())
        .map(|l| at.row(l).iter().map(|v| v * v).sum())
        .collect();
    flops::add(2 * (a.rows() * a.cols()) as u64);
    if let Some(l) = norms.iter().position(|n| *n == 0.0) {
        return Err(Error::DegenerateMatrix(format!("column {l} is zero")));
    }
    let h = if norms.iter().all(|n| *n == 1.0) {
        at
    } else {
        unbiased_from(at, &norms)?
    };
    Ok(LinearEstimator {
        h,
        kind: EstimatorKind::MatchedFilter,
        k_diag: None,
        coeffs: None,
    })
}

/// Estimation variance of the matched filter for normalized i.i.d.
/// Gaussian sensing matrices, `(L/K)·σ_S² + σ_N²`.
pub fn mf_variance(sigma_s_sq: f64, sigma_n_sq: f64, k: usize, l: usize) -> f64 {
    flops::add(3);
    (l as f64 / k as f64) * sigma_s_sq + sigma_n_sq
}

/// Unbiased LMMSE estimator. With a scalar signal variance
/// `H_B = Aᵀ(AAᵀ + σ_N²/σ_S²·I)⁻¹`; with per-element variances
/// `H_B = ΦAᵀ(AΦAᵀ + σ_N²·I)⁻¹`, `Φ = diag(σ_{S,l}²)`. The returned `H` is
/// `diag(1/K_ll)·H_B` with `K = H_B·A`.
pub fn mmse(a: &Matrix, sigma_n_sq: f64, sigma_s: SignalVariance<'_>) -> Result<LinearEstimator> {
    if !(sigma_n_sq > 0.0 && sigma_n_sq.is_finite()) {
        return Err(Error::Domain(format!(
            "LMMSE estimator needs positive noise variance, got {sigma_n_sq}"
        )));
    }
    sigma_s.check(a.cols())?;
    let h_b = match sigma_s {
        SignalVariance::Scalar(var) => {
            let mut g = mat_mat_t(a, a)?;
            flops::add(1);
            add_to_diag(&mut g, sigma_n_sq / var);
            solve_spd(&g, a)?.transpose()
        }
        SignalVariance::PerElement(var) => {
            let a_phi = scale_cols(a, var)?;
            let mut g = mat_mat_t(&a_phi, a)?;
            add_to_diag(&mut g, sigma_n_sq);
            // Round-off can leave A·Φ·Aᵀ a hair off symmetric.
            symmetrize(&mut g);
            let w = solve_spd(&g, a)?;
            scale_rows(var, &w.transpose())?
        }
    };
    let k_diag = diag_of_product(&h_b, a)?;
    let h = unbiased_from(h_b, &k_diag)?;
    Ok(LinearEstimator {
        h,
        kind: EstimatorKind::Mmse,
        k_diag: Some(k_diag),
        coeffs: None,
    })
}

fn symmetrize(g: &mut Matrix) {
    let n = g.rows();
    flops::add((n * (n - 1)) as u64);
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = m;
            g[(j, i)] = m;
        }
    }
}

fn check_k_diag(k_diag: &[f64]) -> Result<()> {
    if k_diag.is_empty() {
        return Err(Error::Domain("empty cascade diagonal".into()));
    }
    match k_diag.iter().find(|k| !(**k > 0.0)) {
        Some(k) => Err(Error::Domain(format!("cascade diagonal entry {k} <= 0"))),
        None => Ok(()),
    }
}

/// Per-element error variances of the biased and unbiased LMMSE estimates,
/// `σ_S²(1 − K_ll)` and `σ_S²(1 − K_ll)/K_ll`.
pub fn error_var_individual(
    k_diag: &[f64],
    sigma_s_sq: SignalVariance<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_k_diag(k_diag)?;
    if let SignalVariance::PerElement(v) = sigma_s_sq {
        if v.len() != k_diag.len() {
            return Err(Error::dims("error_var_individual", k_diag.len(), v.len()));
        }
    }
    flops::add(4 * k_diag.len() as u64);
    Ok(k_diag
        .iter()
        .enumerate()
        .map(|(l, &k)| {
            let biased = sigma_s_sq.at(l) * (1.0 - k);
            (biased, biased / k)
        })
        .unzip())
}

/// Mean accumulated as deviations from the first value, so equal inputs
/// return that value exactly.
fn shifted_mean(mut xs: impl Iterator<Item = f64>, n: f64) -> f64 {
    let Some(first) = xs.next() else {
        return f64::NAN;
    };
    first + xs.map(|x| x - first).sum::<f64>() / n
}

/// Unbias-then-average: `σ_S²·(1/M_H(K_ll) − 1)`.
pub fn variance_ua(k_diag: &[f64], sigma_s_sq: f64) -> Result<f64> {
    check_k_diag(k_diag)?;
    let n = k_diag.len() as f64;
    flops::add(3 * k_diag.len() as u64 + 4);
    let inv_harmonic = shifted_mean(k_diag.iter().map(|k| 1.0 / k), n);
    Ok(sigma_s_sq * (inv_harmonic - 1.0))
}

/// Average-then-unbias: `σ_S²·(1/M_A(K_ll) − 1)`.
pub fn variance_au(k_diag: &[f64], sigma_s_sq: f64) -> Result<f64> {
    check_k_diag(k_diag)?;
    let n = k_diag.len() as f64;
    flops::add(2 * k_diag.len() as u64 + 5);
    let arithmetic = shifted_mean(k_diag.iter().copied(), n);
    Ok(sigma_s_sq * (1.0 / arithmetic - 1.0))
}

fn abs_row_sum_max(g: &Matrix) -> f64 {
    flops::add((g.rows() * g.cols()) as u64);
    (0..g.rows())
        .map(|l| g.row(l).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Gershgorin-type upper bound on `λ_max(AAᵀ)`: the largest absolute row
/// sum of the Gram matrix `AAᵀ`.
pub fn lambda_max_estimate(a: &Matrix) -> Result<f64> {
    Ok(abs_row_sum_max(&mat_mat_t(a, a)?))
}

/// Large-system value of `λ_max(AAᵀ)` for a `K×L` column-normalized
/// i.i.d. Gaussian matrix, `(1 + √(L/K))²`. Costs nothing and tracks the
/// exact eigenvalue closely, unlike the Gershgorin bound.
pub fn lambda_max_statistical(k: usize, l: usize) -> f64 {
    flops::add(3);
    (1.0 + (l as f64 / k as f64).sqrt()).powi(2)
}

/// Upper end of the stable step-size range,
/// `2 / (σ_S²·λ_max + σ_N²)`.
pub fn alpha_max(lambda_max: f64, sigma_s_sq: f64, sigma_n_sq: f64) -> f64 {
    flops::add(4);
    2.0 / (sigma_s_sq * lambda_max + sigma_n_sq)
}

fn krylov_estimator(a: &Matrix, h_b: Matrix, kind: EstimatorKind) -> Result<LinearEstimator> {
    let k_diag = diag_of_product(&h_b, a)?;
    let h = unbiased_from(h_b, &k_diag)?;
    let coeffs = krylov_error_coeffs(&h, a)?;
    Ok(LinearEstimator {
        h,
        kind,
        k_diag: Some(k_diag),
        coeffs: Some(coeffs),
    })
}

/// `max_l (AAᵀ)_ll` from the Gram matrix, a lower bound on `λ_max(AAᵀ)`.
fn gram_diag_max(gram: &Matrix) -> f64 {
    gram.diag().into_iter().fold(0.0, f64::max)
}

fn check_alpha(alpha: f64, a_max: f64) -> Result<()> {
    if alpha > 0.0 && alpha < a_max {
        Ok(())
    } else {
        Err(Error::Stability {
            alpha,
            alpha_max: a_max,
        })
    }
}

/// Zeroth-order truncation `H_B = α·σ_S²·Aᵀ`. After unbiasing this is the
/// matched filter, but with error coefficients attached.
pub fn krylov_zeroth_order(
    a: &Matrix,
    sigma_s_sq: f64,
    sigma_n_sq: f64,
    alpha: f64,
) -> Result<LinearEstimator> {
    let gram = mat_mat_t(a, a)?;
    check_alpha(
        alpha,
        alpha_max(gram_diag_max(&gram), sigma_s_sq, sigma_n_sq),
    )?;
    let scale = vec![alpha * sigma_s_sq; a.cols()];
    let h_b = scale_rows(&scale, &a.transpose())?;
    krylov_estimator(a, h_b, EstimatorKind::Krylov0)
}

/// First-order truncation
/// `H_B = γ·Aᵀ(I − β·AAᵀ)`, `β = σ_S²/(2/α − σ_N²)`,
/// `γ = α·σ_S²·(2 − α·σ_N²)`, unbiased, with `(μ_S, μ_N)` precomputed.
///
/// `alpha` is rejected when it is certainly unstable, i.e. not below
/// `α_max` evaluated at the lower bound `max_l (AAᵀ)_ll`. Any `α` below
/// `α_max` taken from [`lambda_max_estimate`] is certainly stable.
pub fn krylov_first_order(
    a: &Matrix,
    sigma_s_sq: f64,
    sigma_n_sq: f64,
    alpha: f64,
) -> Result<LinearEstimator> {
    let gram = mat_mat_t(a, a)?;
    check_alpha(
        alpha,
        alpha_max(gram_diag_max(&gram), sigma_s_sq, sigma_n_sq),
    )?;
    let (beta, gamma) = krylov_beta_gamma(sigma_s_sq, sigma_n_sq, alpha);
    // H_Bᵀ = γ·(A − β·(AAᵀ)·A)
    let ga = mat_mat(&gram, a)?;
    flops::add(3 * (a.rows() * a.cols()) as u64);
    let mut h_bt = a.clone();
    for (v, g) in h_bt.as_mut_slice().iter_mut().zip(ga.as_slice()) {
        *v = gamma * (*v - beta * g);
    }
    krylov_estimator(a, h_bt.transpose(), EstimatorKind::Krylov1)
}

/// `(β, γ)` of the first-order expansion for step size `alpha`.
pub fn krylov_beta_gamma(sigma_s_sq: f64, sigma_n_sq: f64, alpha: f64) -> (f64, f64) {
    flops::add(7);
    let beta = sigma_s_sq / (2.0 / alpha - sigma_n_sq);
    let gamma = alpha * sigma_s_sq * (2.0 - alpha * sigma_n_sq);
    (beta, gamma)
}

/// `μ_S = trace(HAAᵀHᵀ − AᵀHᵀ − HA + I)/L` and `μ_N = trace(HHᵀ)/L`
/// for `H` (`L×K`) and `A` (`K×L`).
pub fn krylov_error_coeffs(h: &Matrix, a: &Matrix) -> Result<ErrorCoeffs> {
    if h.rows() != a.cols() || h.cols() != a.rows() {
        return Err(Error::dims(
            "krylov_error_coeffs",
            format!("{}x{}", a.cols(), a.rows()),
            format!("{}x{}", h.rows(), h.cols()),
        ));
    }
    let l = h.rows() as f64;
    // trace(HA·(HA)ᵀ) = ‖HA‖_F², trace(AᵀHᵀ) = trace(HA).
    let ha = mat_mat(h, a)?;
    let n2 = ha.as_slice().len() as u64;
    flops::add(2 * n2 + h.rows() as u64 + 2 * (h.rows() * h.cols()) as u64 + 6);
    let fro_ha: f64 = ha.as_slice().iter().map(|v| v * v).sum();
    let tr_ha: f64 = ha.diag().iter().sum();
    let fro_h: f64 = h.as_slice().iter().map(|v| v * v).sum();
    Ok(ErrorCoeffs {
        mu_s: (fro_ha - 2.0 * tr_ha + l) / l,
        mu_n: fro_h / l,
    })
}

/// Order-`n` truncation `α·σ_S²·Aᵀ·Σ_{i≤n}(−Q)^i`, biased, with
/// `Q = α·σ_S²·AAᵀ + (α·σ_N² − 1)·I`.
#[cfg(test)]
pub(crate) fn krylov_order_n(
    a: &Matrix,
    sigma_s_sq: f64,
    sigma_n_sq: f64,
    alpha: f64,
    order: usize,
) -> Matrix {
    let k = a.rows();
    let mut q = mat_mat_t(a, a).unwrap();
    q.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v *= alpha * sigma_s_sq);
    add_to_diag(&mut q, alpha * sigma_n_sq - 1.0);
    let mut term = Matrix::identity(k);
    let mut sum = Matrix::identity(k);
    for _ in 0..order {
        term = mat_mat(&term, &q).unwrap();
        term.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        sum.as_mut_slice()
            .iter_mut()
            .zip(term.as_slice())
            .for_each(|(s, t)| *s += t);
    }
    let mut h = mat_mat(&a.transpose(), &sum).unwrap();
    h.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v *= alpha * sigma_s_sq);
    h
}
