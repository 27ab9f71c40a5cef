//! Mixed discriminants of symmetric matrices.
//!
//! `Q(A_1, ..., A_n)` is the symmetric multilinear form with
//! `Q(A, ..., A) = det A`. Up to `n = 4` it is expanded over permutations
//! (the generalized Kronecker delta); above that it is obtained by
//! polarization of the determinant.

use nalgebra::DMatrix;

use crate::error::{CapError, Result};

/// Relative asymmetry accepted in input matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

const EXPANSION_LIMIT: usize = 4;

fn validate(matrices: &[DMatrix<f64>]) -> Result<usize> {
    let n = matrices.len();
    if n == 0 {
        return Err(CapError::DimensionMismatch("no matrices given".into()));
    }
    for (index, m) in matrices.iter().enumerate() {
        if m.nrows() != n || m.ncols() != n {
            return Err(CapError::DimensionMismatch(format!(
                "matrix {index} is {}x{}, expected {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let deviation = (m - m.transpose()).amax() / scale;
        if deviation > SYMMETRY_TOLERANCE {
            return Err(CapError::Asymmetric { index, deviation });
        }
    }
    Ok(n)
}

pub fn mixed_discriminant(matrices: &[DMatrix<f64>]) -> Result<f64> {
    let n = validate(matrices)?;
    if n > EXPANSION_LIMIT {
        return Ok(polarize(matrices, n));
    }
    Ok(expand(matrices, n))
}

/// Mixed discriminant by polarization of `det`, for cross-validation.
pub fn mixed_discriminant_polarized(matrices: &[DMatrix<f64>]) -> Result<f64> {
    let n = validate(matrices)?;
    Ok(polarize(matrices, n))
}

/// Closed form at `n = 2`.
pub fn q2(a: &nalgebra::Matrix2<f64>, b: &nalgebra::Matrix2<f64>) -> f64 {
    0.5 * (a[(0, 0)] * b[(1, 1)] + a[(1, 1)] * b[(0, 0)]
        - a[(0, 1)] * b[(1, 0)]
        - a[(1, 0)] * b[(0, 1)])
}

fn expand(matrices: &[DMatrix<f64>], n: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for_each_permutation(n, &mut |sigma| {
        let cols = DMatrix::from_fn(n, n, |r, c| matrices[sigma[c]][(r, c)]);
        total += cols.determinant();
        count += 1;
    });
    total / count as f64
}

fn polarize(matrices: &[DMatrix<f64>], n: usize) -> f64 {
    let mut total = 0.0;
    for mask in 1u32..(1u32 << n) {
        let mut sum = DMatrix::zeros(n, n);
        for (i, m) in matrices.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum += m;
            }
        }
        let sign = if (n as u32 - mask.count_ones()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        total += sign * sum.determinant();
    }
    total / factorial(n)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn for_each_permutation(n: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(k: usize, p: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(k + 1, p, f);
            p.swap(k, i);
        }
    }
    let mut p: Vec<usize> = (0..n).collect();
    rec(0, &mut p, f);
}
