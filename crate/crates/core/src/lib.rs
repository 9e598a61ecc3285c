//! Iterative ("turbo") recovery of discrete-valued sparse vectors from
//! underdetermined noisy measurements `y = A·x + n`.
//!
//! Every algorithm alternates a linear estimation step (matched filter,
//! exact LMMSE, or a Krylov approximation of it) with an element-wise
//! denoising step that exploits the discrete prior. All arithmetic is
//! FLOP-counted so complexity comparisons come straight out of the runs.
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha20Rng;
//! use turbocs::{recover, Algorithm, Prior, ProblemInstance, RecoveryConfig};
//!
//! let prior = Prior::ternary(64, 4).unwrap();
//! let mut rng = ChaCha20Rng::seed_from_u64(7);
//! let inst = ProblemInstance::generate(32, &prior, 0.01, &mut rng).unwrap();
//! let out = recover(&inst, &RecoveryConfig::new(Algorithm::Iks)).unwrap();
//! assert_eq!(out.x_hat_quantized.iter().filter(|v| **v != 0.0).count(), 4);
//! ```

pub mod algorithms;
pub mod denoiser;
pub mod error;
pub mod estimators;
pub mod model;
pub mod numerics;
pub mod sweep;

pub use algorithms::{
    brute_force_oracle, recover, Algorithm, AlphaPolicy, IterationRecord, IterationTrace,
    RecoveryConfig, RecoveryResult,
};
pub use denoiser::{Denoiser, SoftOutput};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, LinearEstimator, VarianceMode};
pub use model::{Prior, ProblemInstance};
pub use numerics::Matrix;
pub use sweep::{ResultRow, SweepConfig, SweepKind};
