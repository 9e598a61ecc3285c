//! Exhaustive search over all `s`-sparse vectors with entries from the
//! alphabet. Only usable on toy sizes; serves as a reference point for the
//! iterative algorithms.

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

pub const ORACLE_CANDIDATE_LIMIT: u128 = 1_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Global minimizer of `‖y − A·x̃‖₂²` over `x̃` with exactly `s` nonzero
/// entries drawn from the nonzero symbols. The first minimizer in
/// lexicographic (support, symbol) order wins ties.
pub fn brute_force_oracle(instance: &ProblemInstance) -> Result<Vec<f64>> {
    let (l, s) = (instance.dimension(), instance.sparsity());
    let symbols: Vec<f64> = instance.prior().nonzero_atoms().map(|a| a.value).collect();
    let candidates = binomial(l as u128, s as u128)
        .checked_mul((symbols.len() as u128).pow(s as u32))
        .unwrap_or(u128::MAX);
    if candidates > ORACLE_CANDIDATE_LIMIT {
        return Err(Error::TooLarge {
            candidates,
            limit: ORACLE_CANDIDATE_LIMIT,
        });
    }

    let a = instance.sensing_matrix();
    let columns: Vec<Vec<f64>> = (0..l).map(|j| a.column(j)).collect();
    let y = instance.y();

    let mut best = (f64::INFINITY, Vec::new(), Vec::new());
    let mut support: Vec<usize> = (0..s).collect();
    let mut choice = vec![0usize; s];
    let mut pred = vec![0.0; y.len()];
    loop {
        choice.iter_mut().for_each(|c| *c = 0);
        loop {
            pred.iter_mut().for_each(|p| *p = 0.0);
            for (&j, &c) in support.iter().zip(&choice) {
                for (p, v) in pred.iter_mut().zip(&columns[j]) {
                    *p += symbols[c] * v;
                }
            }
            let cost: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
            if cost < best.0 {
                best = (cost, support.clone(), choice.clone());
            }
            // Odometer over symbol assignments.
            let mut i = s;
            while i > 0 {
                i -= 1;
                choice[i] += 1;
                if choice[i] < symbols.len() {
                    break;
                }
                choice[i] = 0;
            }
            if choice.iter().all(|c| *c == 0) {
                break;
            }
        }
        if !next_combination(&mut support, l) {
            break;
        }
    }

    let mut x = vec![0.0; l];
    for (&j, &c) in best.1.iter().zip(&best.2) {
        x[j] = symbols[c];
    }
    Ok(x)
}

/// Advances `comb` (sorted, distinct, below `n`) to the next combination in
/// lexicographic order.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{observe, Prior};
    use crate::numerics::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_candidates() {
        assert_eq!(binomial(12, 2) * 4, 264);
        let mut comb = vec![0, 1];
        let mut n = 1;
        while next_combination(&mut comb, 12) {
            n += 1;
        }
        assert_eq!(n, 66);
    }

    #[test]
    fn noiseless_instance_returns_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let prior = Prior::ternary(12, 2).unwrap();
            let inst = ProblemInstance::generate(8, &prior, 0.0, &mut rng).unwrap();
            assert_eq!(brute_force_oracle(&inst).unwrap(), inst.x_true());
        }
    }

    #[test]
    fn zero_sparsity_is_the_zero_vector() {
        let prior = Prior::ternary(6, 0).unwrap();
        let a = Matrix::from_fn(3, 6, |i, j| (i + j) as f64);
        let y = observe(&a, &[0.0; 6], 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let inst = ProblemInstance::new(a, vec![0.0; 6], y, 0.0, prior).unwrap();
        assert_eq!(brute_force_oracle(&inst).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn refuses_large_instances() {
        let prior = Prior::ternary(258, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = ProblemInstance::generate(129, &prior, 0.01, &mut rng).unwrap();
        assert!(matches!(
            brute_force_oracle(&inst),
            Err(Error::TooLarge { .. })
        ));
    }
}
