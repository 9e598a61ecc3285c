//! Problem generation for discrete compressed sensing: the prior, the
//! column-normalized Gaussian sensing matrix, exact-sparsity signals, noisy
//! observations, final quantization and symbol-error scoring.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{mat_vec, Matrix};

/// One symbol of a discrete prior with its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Finite atomic prior on the entries of an `s`-sparse vector of length
/// `L`: the zero atom carries probability `(L−s)/L`, the nonzero atoms
/// share `s/L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    /// Sorted by value, zero atom included.
    atoms: Vec<Atom>,
    /// Nonzero symbols with probabilities conditioned on being nonzero.
    conditional: Vec<Atom>,
    /// `ln p` per atom, `-inf` for empty atoms.
    ln_probs: Vec<f64>,
    sparsity: usize,
    dimension: usize,
    symmetric: bool,
}

impl Prior {
    /// Equiprobable nonzero symbols.
    pub fn new(dimension: usize, sparsity: usize, nonzero_symbols: &[f64]) -> Result<Self> {
        let w = vec![1.0; nonzero_symbols.len()];
        Self::with_weights(dimension, sparsity, nonzero_symbols, &w)
    }

    /// Nonzero symbols drawn with probabilities proportional to `weights`.
    pub fn with_weights(
        dimension: usize,
        sparsity: usize,
        nonzero_symbols: &[f64],
        weights: &[f64],
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("signal dimension must be at least 1".into()));
        }
        if sparsity > dimension {
            return Err(Error::Config(format!(
                "sparsity {sparsity} exceeds dimension {dimension}"
            )));
        }
        if nonzero_symbols.is_empty() {
            return Err(Error::Config(
                "alphabet needs at least one nonzero symbol".into(),
            ));
        }
        if weights.len() != nonzero_symbols.len() {
            return Err(Error::dims(
                "Prior::with_weights",
                nonzero_symbols.len(),
                weights.len(),
            ));
        }
        if nonzero_symbols.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return Err(Error::Config(
                "nonzero symbols must be finite and different from 0".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config("symbol weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let active = sparsity as f64 / dimension as f64;
        let mut conditional: Vec<Atom> = nonzero_symbols
            .iter()
            .zip(weights)
            .map(|(&value, &w)| Atom {
                value,
                prob: w / total,
            })
            .collect();
        conditional.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut atoms: Vec<Atom> = conditional
            .iter()
            .map(|a| Atom {
                value: a.value,
                prob: active * a.prob,
            })
            .collect();
        atoms.push(Atom {
            value: 0.0,
            prob: (dimension - sparsity) as f64 / dimension as f64,
        });
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        if atoms.windows(2).any(|w| w[0].value == w[1].value) {
            return Err(Error::Config("alphabet contains duplicate symbols".into()));
        }
        let n = atoms.len();
        let symmetric = (0..n).all(|i| {
            let (a, b) = (atoms[i], atoms[n - 1 - i]);
            a.value == -b.value && a.prob == b.prob
        });
        let ln_probs = atoms.iter().map(|a| a.prob.ln()).collect();
        Ok(Self {
            atoms,
            conditional,
            ln_probs,
            sparsity,
            dimension,
            symmetric,
        })
    }

    /// Symbols {−1, 0, +1} with the nonzero mass split evenly.
    pub fn ternary(dimension: usize, sparsity: usize) -> Result<Self> {
        Self::new(dimension, sparsity, &[-1.0, 1.0])
    }

    /// Same alphabet and dimension, different sparsity.
    pub fn with_sparsity(&self, sparsity: usize) -> Result<Self> {
        let (values, weights): (Vec<f64>, Vec<f64>) =
            self.conditional.iter().map(|a| (a.value, a.prob)).unzip();
        Self::with_weights(self.dimension, sparsity, &values, &weights)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub(crate) fn ln_probs(&self) -> &[f64] {
        &self.ln_probs
    }

    pub fn nonzero_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.value != 0.0)
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// True when the prior is invariant under `x ↦ −x`.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// The alphabet including 0, ascending.
    pub fn alphabet(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.value).collect()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .map(|a| a.prob * (a.value - m) * (a.value - m))
            .sum()
    }

    /// Largest possible variance of any distribution on the alphabet,
    /// `(max − min)² / 4`.
    pub fn max_variance(&self) -> f64 {
        let lo = self.atoms.first().map_or(0.0, |a| a.value);
        let hi = self.atoms.last().map_or(0.0, |a| a.value);
        (hi - lo) * (hi - lo) / 4.0
    }

    /// Nearest nonzero symbol; equidistant candidates resolve to the
    /// smaller value.
    pub fn nearest_nonzero(&self, v: f64) -> f64 {
        let mut best = f64::NAN;
        let mut best_d = f64::INFINITY;
        // Ascending order plus strict `<` keeps the smaller symbol on ties.
        for a in self.nonzero_atoms() {
            let d = (v - a.value).abs();
            if d < best_d {
                best_d = d;
                best = a.value;
            }
        }
        best
    }

    fn sample_nonzero(&self, rng: &mut impl Rng) -> f64 {
        let mut u = rng.random::<f64>();
        for a in &self.conditional {
            if u < a.prob {
                return a.value;
            }
            u -= a.prob;
        }
        self.conditional[self.conditional.len() - 1].value
    }
}

/// One draw of `y = A·x + n`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    a: Matrix,
    x_true: Vec<f64>,
    y: Vec<f64>,
    sigma_n_sq: f64,
    prior: Prior,
}

impl ProblemInstance {
    /// Assembles an instance from explicit parts. Only shapes are checked,
    /// so tests may use sensing matrices other than the Gaussian ensemble.
    pub fn new(
        a: Matrix,
        x_true: Vec<f64>,
        y: Vec<f64>,
        sigma_n_sq: f64,
        prior: Prior,
    ) -> Result<Self> {
        if a.cols() != x_true.len() || a.cols() != prior.dimension() {
            return Err(Error::dims(
                "ProblemInstance::new",
                format!("{} signal entries", a.cols()),
                format!("x {} / prior {}", x_true.len(), prior.dimension()),
            ));
        }
        if a.rows() != y.len() {
            return Err(Error::dims("ProblemInstance::new", a.rows(), y.len()));
        }
        if !(sigma_n_sq >= 0.0 && sigma_n_sq.is_finite()) {
            return Err(Error::Domain(format!("noise variance {sigma_n_sq}")));
        }
        Ok(Self {
            a,
            x_true,
            y,
            sigma_n_sq,
            prior,
        })
    }

    /// Fresh sensing matrix, signal and noise from `rng`, in that order.
    pub fn generate(
        measurements: usize,
        prior: &Prior,
        sigma_n_sq: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let a = gen_sensing_matrix(measurements, prior.dimension(), rng)?;
        let x = gen_signal(prior, rng)?;
        let y = observe(&a, &x, sigma_n_sq, rng)?;
        Self::new(a, x, y, sigma_n_sq, prior.clone())
    }

    pub fn sensing_matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn x_true(&self) -> &[f64] {
        &self.x_true
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma_n_sq(&self) -> f64 {
        self.sigma_n_sq
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    /// Number of measurements `K`.
    pub fn measurements(&self) -> usize {
        self.a.rows()
    }

    /// Signal length `L`.
    pub fn dimension(&self) -> usize {
        self.a.cols()
    }

    pub fn sparsity(&self) -> usize {
        self.prior.sparsity()
    }
}

/// Noise variance for an inverse noise level given in dB,
/// `10·log10(1/σ²)`.
pub fn noise_variance_from_db(inv_noise_db: f64) -> f64 {
    10f64.powf(-inv_noise_db / 10.0)
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `K×L` i.i.d. standard normal matrix with every column scaled to unit
/// ℓ2 norm.
pub fn gen_sensing_matrix(k: usize, l: usize, rng: &mut impl Rng) -> Result<Matrix> {
    if k == 0 || k >= l {
        return Err(Error::Config(format!(
            "need 1 <= K < L for an underdetermined system, got K={k}, L={l}"
        )));
    }
    let mut a = gaussian_matrix(k, l, rng);
    for j in 0..l {
        let norm = (0..k).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
        for i in 0..k {
            a[(i, j)] /= norm;
        }
    }
    Ok(a)
}

/// Exactly `s` nonzero entries on a uniformly drawn support.
pub fn gen_signal(prior: &Prior, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let (l, s) = (prior.dimension(), prior.sparsity());
    if s > l {
        return Err(Error::Config(format!("sparsity {s} exceeds dimension {l}")));
    }
    let mut x = vec![0.0; l];
    let mut support = index::sample(rng, l, s).into_vec();
    support.sort_unstable();
    for pos in support {
        x[pos] = prior.sample_nonzero(rng);
    }
    Ok(x)
}

/// `A·x` plus i.i.d. `N(0, σ²)` noise.
pub fn observe(a: &Matrix, x: &[f64], sigma_n_sq: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(sigma_n_sq >= 0.0) {
        return Err(Error::Domain(format!("noise variance {sigma_n_sq}")));
    }
    let mut y = mat_vec(a, x)?;
    if sigma_n_sq > 0.0 {
        let sd = sigma_n_sq.sqrt();
        for yi in &mut y {
            *yi += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(y)
}

/// Indices of the `s` largest magnitudes, lowest index first on ties,
/// returned in ascending index order.
pub(crate) fn top_s_indices(x: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// Keeps the `s` largest-magnitude entries, maps each to its nearest nonzero
/// symbol and zeros the rest.
pub fn quantize_final(x_hat: &[f64], prior: &Prior) -> Vec<f64> {
    let s = prior.sparsity().min(x_hat.len());
    let mut q = vec![0.0; x_hat.len()];
    for i in top_s_indices(x_hat, s) {
        q[i] = prior.nearest_nonzero(x_hat[i]);
    }
    q
}

/// Fraction of positions where the two vectors differ.
pub fn ser(x_hat_q: &[f64], x_true: &[f64]) -> f64 {
    assert_eq!(x_hat_q.len(), x_true.len(), "ser length");
    if x_true.is_empty() {
        return 0.0;
    }
    let errors = x_hat_q.iter().zip(x_true).filter(|(a, b)| a != b).count();
    errors as f64 / x_true.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ternary_prior_layout() {
        let p = Prior::ternary(258, 12).unwrap();
        assert_eq!(p.alphabet(), vec![-1.0, 0.0, 1.0]);
        let probs: Vec<f64> = p.atoms().iter().map(|a| a.prob).collect();
        assert!((probs[0] - 6.0 / 258.0).abs() < 1e-15);
        assert!((probs[1] - 246.0 / 258.0).abs() < 1e-15);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.is_symmetric());
        assert!((p.variance() - 12.0 / 258.0).abs() < 1e-15);
    }

    #[test]
    fn prior_validation() {
        assert!(Prior::ternary(4, 5).is_err());
        assert!(Prior::new(4, 1, &[0.0, 1.0]).is_err());
        assert!(Prior::new(4, 1, &[1.0, 1.0]).is_err());
        assert!(Prior::new(4, 1, &[]).is_err());
        assert!(!Prior::new(4, 2, &[1.0, 3.0]).unwrap().is_symmetric());
    }

    #[test]
    fn sensing_matrix_columns_are_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = gen_sensing_matrix(129, 258, &mut rng).unwrap();
        for j in 0..258 {
            let n: f64 = a.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sensing_matrix_requires_underdetermined_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gen_sensing_matrix(10, 10, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(gen_sensing_matrix(0, 10, &mut rng).is_err());
    }

    #[test]
    fn sensing_matrix_is_seed_deterministic() {
        let a = gen_sensing_matrix(8, 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = gen_sensing_matrix(8, 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn raw_gaussian_entries_have_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = gaussian_matrix(1000, 1000, &mut rng);
        let mean = g.as_slice().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() < 5e-3, "mean {mean}");
    }

    #[test]
    fn signal_sparsity_and_symbol_balance() {
        let prior = Prior::ternary(258, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (mut plus, mut total) = (0usize, 0usize);
        for _ in 0..10_000 {
            let x = gen_signal(&prior, &mut rng).unwrap();
            let nz: Vec<f64> = x.iter().copied().filter(|v| *v != 0.0).collect();
            assert_eq!(nz.len(), 12);
            assert!(nz.iter().all(|v| *v == 1.0 || *v == -1.0));
            plus += nz.iter().filter(|v| **v > 0.0).count();
            total += nz.len();
        }
        let freq = plus as f64 / total as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn zero_sparsity_gives_zero_signal() {
        let prior = Prior::ternary(16, 0).unwrap();
        let x = gen_signal(&prior, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = gen_sensing_matrix(5, 9, &mut rng).unwrap();
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let y = observe(&a, &x, 0.0, &mut rng).unwrap();
        assert_eq!(y, mat_vec(&a, &x).unwrap());
    }

    #[test]
    fn noise_has_requested_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = gen_sensing_matrix(10, 20, &mut rng).unwrap();
        let x = vec![0.0; 20];
        let sigma = 0.3;
        let mut samples = Vec::with_capacity(100_000);
        while samples.len() < 100_000 {
            samples.extend(observe(&a, &x, sigma, &mut rng).unwrap());
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!((var / sigma - 1.0).abs() < 0.03, "var {var}");

        let again = observe(&a, &x, sigma, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let twice = observe(&a, &x, sigma, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(again, twice);
    }

    #[test]
    fn quantize_examples() {
        let p = Prior::ternary(4, 2).unwrap();
        assert_eq!(
            quantize_final(&[0.9, -0.8, 0.1, 0.05], &p),
            vec![1.0, -1.0, 0.0, 0.0]
        );
        let already = [0.0, 1.0, 0.0, -1.0];
        assert_eq!(quantize_final(&already, &p), already.to_vec());
        // Ties: lowest indices kept, 0 rounds to the smaller symbol.
        assert_eq!(quantize_final(&[0.0; 4], &p), vec![-1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn ser_examples() {
        assert_eq!(ser(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(ser(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(ser(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]), 0.5);
    }

    #[test]
    fn db_convention() {
        assert!((noise_variance_from_db(17.0) - 10f64.powf(-1.7)).abs() < 1e-18);
        assert_eq!(noise_variance_from_db(0.0), 1.0);
    }

    proptest! {
        #[test]
        fn quantized_output_is_s_sparse_in_alphabet(
            x in prop::collection::vec(-3.0f64..3.0, 1..40),
            s_frac in 0.0f64..1.0,
        ) {
            let l = x.len();
            let s = ((l as f64) * s_frac) as usize;
            let p = Prior::ternary(l, s).unwrap();
            let q = quantize_final(&x, &p);
            prop_assert_eq!(q.iter().filter(|v| **v != 0.0).count(), s);
            prop_assert!(q.iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
        }

        #[test]
        fn ser_symmetric_and_permutation_invariant(
            pairs in prop::collection::vec((-1i8..=1, -1i8..=1), 1..50),
            seed in any::<u64>(),
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            prop_assert_eq!(ser(&a, &b), ser(&b, &a));
            let mut perm: Vec<usize> = (0..a.len()).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
            let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
            prop_assert_eq!(ser(&pa, &pb), ser(&a, &b));
        }

        #[test]
        fn generated_signals_respect_prior(seed in any::<u64>(), l in 1usize..60, s_frac in 0.0f64..=1.0) {
            let s = ((l as f64) * s_frac) as usize;
            let prior = Prior::new(l, s, &[-3.0, -1.0, 1.0, 3.0]).unwrap();
            let x = gen_signal(&prior, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(x.iter().filter(|v| **v != 0.0).count(), s);
            prop_assert!(x.iter().all(|v| prior.alphabet().contains(v)));
        }
    }
}
