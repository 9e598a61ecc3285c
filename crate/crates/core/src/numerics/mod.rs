//! Dense real linear algebra with FLOP instrumentation.

pub mod flops;
mod linalg;
mod matrix;

pub use flops::{counter_scope, FlopCounter};
pub use linalg::{
    add_assign, add_to_diag, axpy, diag_of_product, dist_sq, dot, mat_mat, mat_mat_t, mat_vec,
    norm_sq, scale_cols, scale_rows, solve_spd, sub,
};
pub use matrix::Matrix;
