//! Dense kernels. Every function charges its work to the thread-local FLOP
//! counter according to the model in [`super::flops`].

use super::flops;
use super::matrix::Matrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// Unrolled dot product; uncharged, callers account for it.
#[inline]
fn dot_raw(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy_raw(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `M·v`, charged `2·rows·cols`.
pub fn mat_vec(m: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    if m.cols() != v.len() {
        return Err(Error::dims("mat_vec", m.cols(), v.len()));
    }
    flops::add(2 * (m.rows() * m.cols()) as u64);
    Ok((0..m.rows()).map(|i| dot_raw(m.row(i), v)).collect())
}

/// `Ma·Mb`, charged `2·m·k·n`.
pub fn mat_mat(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::dims(
            "mat_mat",
            format!("{} rows", a.cols()),
            format!("{} rows", b.rows()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    flops::add(2 * (m * k * n) as u64);
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (p, &aip) in arow.iter().enumerate() {
            if aip != 0.0 {
                axpy_raw(aip, b.row(p), orow);
            }
        }
    }
    Ok(out)
}

/// `Ma·Mbᵀ` without materializing the transpose, charged `2·m·k·n`.
pub fn mat_mat_t(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::dims("mat_mat_t", a.cols(), b.cols()));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    flops::add(2 * (m * k * n) as u64);
    Ok(Matrix::from_fn(m, n, |i, j| dot_raw(a.row(i), b.row(j))))
}

/// Lower Cholesky factor of a symmetric positive definite matrix. Charged
/// separately by [`solve_spd`].
fn cholesky(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let ljj_sq = m[(j, j)] - dot_raw(&l.row(j)[..j], &l.row(j)[..j]);
        if !(ljj_sq > 0.0) || !ljj_sq.is_finite() {
            return Err(Error::DegenerateMatrix(format!(
                "non-positive pivot {ljj_sq:e} at index {j}"
            )));
        }
        let ljj = ljj_sq.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let s = m[(i, j)] - dot_raw(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `M·X = B` for symmetric positive definite `M` via a Cholesky
/// factorization. Charged `n³/3 + 2·n²·B.cols` (rounded).
pub fn solve_spd(m: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::dims(
            "solve_spd",
            "square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let n = m.rows();
    if b.rows() != n {
        return Err(Error::dims("solve_spd", n, b.rows()));
    }
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (m[(i, j)], m[(j, i)]);
            if (x - y).abs() > SYMMETRY_TOL * x.abs().max(y.abs()).max(1.0) {
                return Err(Error::DegenerateMatrix(format!(
                    "not symmetric at ({i}, {j}): {x} vs {y}"
                )));
            }
        }
    }
    let nf = n as f64;
    let cost = nf * nf * nf / 3.0 + 2.0 * nf * nf * b.cols() as f64;
    flops::add(cost.round() as u64);

    let l = cholesky(m)?;
    // Forward substitution, L·Y = B, row by row.
    let mut x = b.clone();
    for i in 0..n {
        let (done, rest) = x.as_mut_slice().split_at_mut(i * b.cols());
        let row_i = &mut rest[..b.cols()];
        for j in 0..i {
            let lij = l[(i, j)];
            if lij != 0.0 {
                axpy_raw(-lij, &done[j * b.cols()..(j + 1) * b.cols()], row_i);
            }
        }
        let inv = 1.0 / l[(i, i)];
        row_i.iter_mut().for_each(|v| *v *= inv);
    }
    // Back substitution, Lᵀ·X = Y.
    for i in (0..n).rev() {
        let (head, solved) = x.as_mut_slice().split_at_mut((i + 1) * b.cols());
        let row_i = &mut head[i * b.cols()..];
        for j in i + 1..n {
            let lji = l[(j, i)];
            if lji != 0.0 {
                let off = (j - i - 1) * b.cols();
                axpy_raw(-lji, &solved[off..off + b.cols()], row_i);
            }
        }
        let inv = 1.0 / l[(i, i)];
        row_i.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(x)
}

/// `diag(d)·M`, charged one multiply per entry.
pub fn scale_rows(d: &[f64], m: &Matrix) -> Result<Matrix> {
    if d.len() != m.rows() {
        return Err(Error::dims("scale_rows", m.rows(), d.len()));
    }
    flops::add((m.rows() * m.cols()) as u64);
    let mut out = m.clone();
    for (i, &di) in d.iter().enumerate() {
        out.row_mut(i).iter_mut().for_each(|v| *v *= di);
    }
    Ok(out)
}

/// `M·diag(d)`, charged one multiply per entry.
pub fn scale_cols(m: &Matrix, d: &[f64]) -> Result<Matrix> {
    if d.len() != m.cols() {
        return Err(Error::dims("scale_cols", m.cols(), d.len()));
    }
    flops::add((m.rows() * m.cols()) as u64);
    let mut out = m.clone();
    for i in 0..out.rows() {
        out.row_mut(i)
            .iter_mut()
            .zip(d)
            .for_each(|(v, di)| *v *= di);
    }
    Ok(out)
}

/// `M + λ·I` in place, charged one add per diagonal entry.
pub fn add_to_diag(m: &mut Matrix, lambda: f64) {
    let n = m.rows().min(m.cols());
    flops::add(n as u64);
    for i in 0..n {
        m[(i, i)] += lambda;
    }
}

/// `Σ_l (Ma)_{l,:}·(Mb)_{:,l}`, i.e. the diagonal of `Ma·Mb`, charged
/// `2·rows·cols` of `Ma`.
pub fn diag_of_product(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    if a.cols() != b.rows() || a.rows() != b.cols() {
        return Err(Error::dims(
            "diag_of_product",
            format!("{}x{}", a.cols(), a.rows()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    flops::add(2 * (a.rows() * a.cols()) as u64);
    Ok((0..a.rows())
        .map(|l| {
            a.row(l)
                .iter()
                .enumerate()
                .map(|(k, &h)| h * b[(k, l)])
                .sum()
        })
        .collect())
}

/// `a − b`, charged `n`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "sub length");
    flops::add(a.len() as u64);
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha·x`, charged `2n`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy length");
    flops::add(2 * x.len() as u64);
    axpy_raw(alpha, x, y);
}

/// `a + b` element-wise into `a`, charged `n`.
pub fn add_assign(a: &mut [f64], b: &[f64]) {
    assert_eq!(a.len(), b.len(), "add_assign length");
    flops::add(a.len() as u64);
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

/// Charged `2n`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot length");
    flops::add(2 * a.len() as u64);
    dot_raw(a, b)
}

/// `‖a‖₂²`, charged `2n`.
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `‖a − b‖₂²`, charged `3n`.
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dist_sq length");
    flops::add(3 * a.len() as u64);
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
