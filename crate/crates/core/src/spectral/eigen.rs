//! Eigenvalues and eigenvectors of the discrete operator.
//!
//! Small problems are solved densely: all eigenvalues from a real Schur form,
//! eigenvectors by shifted subspace inverse iteration. Large problems use
//! inverse iteration with preconditioned GMRES for the top eigenvalue and the
//! cluster at zero.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::krylov::{shifted_solve, ModePreconditioner};
use super::WeightedSpace;
use crate::error::{CapError, Result};
use crate::grid::ScalarField;

/// Largest interior problem (48 x 64 nodes) handled by the dense path.
pub const DENSE_LIMIT: usize = 48 * 64;
/// Relative deflation thresholds tried in turn by the real Schur iteration.
const SCHUR_TOLERANCES: [f64; 5] = [1e-15, 1e-14, 1e-13, 1e-12, 1e-11];
/// Shift used to isolate the top eigenvalue in the iterative path.
pub const TOP_SHIFT: f64 = 1.25;
/// Shift at the centre of the forbidden band.
pub const BAND_SHIFT: f64 = 0.5;
/// Shift used to isolate the kernel in the iterative path.
pub const KERNEL_SHIFT: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Number of leading eigenpairs reported with eigenvectors.
    pub how_many: usize,
    pub dense_limit: usize,
    pub kernel_relative: f64,
    pub band: f64,
    pub seed: u64,
    pub max_outer: usize,
    pub eigen_tolerance: f64,
}

impl SpectrumOptions {
    pub fn new(how_many: usize) -> Self {
        SpectrumOptions {
            how_many,
            dense_limit: DENSE_LIMIT,
            kernel_relative: 1e-6,
            band: 0.01,
            seed: 0,
            max_outer: 60,
            eigen_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    /// `|A v - value v|_omega` for the omega-normalized vector.
    pub residual: f64,
    /// Full-grid values, normalized in the omega norm.
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub theta: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub method: String,
    pub unknowns: usize,
    /// Real parts, descending.
    pub eigenvalues: Vec<f64>,
    pub complex_count: usize,
    pub max_imag: f64,
    pub max_complex_real: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gap: f64,
    pub lambda1_simple: bool,
    pub kernel_values: Vec<f64>,
    /// Principal-angle cosines between the computed kernel and the horizontal linears.
    pub kernel_cosines: Vec<f64>,
    pub nonpositive_tail: usize,
    pub band: f64,
    pub band_checked: bool,
    pub band_violations: Vec<f64>,
    /// `|S - S^T|_F / |S|_F` for the omega-symmetrized matrix (dense path only).
    pub asymmetry: Option<f64>,
    /// Deflation threshold at which the Schur iteration converged (dense path only).
    pub schur_tolerance: Option<f64>,
    pub pairs: Vec<EigenPair>,
}

impl SpectrumReport {
    pub fn without_vectors(mut self) -> Self {
        for p in &mut self.pairs {
            p.vector.clear();
        }
        self
    }
}

pub fn spectrum(space: &WeightedSpace, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    if space.interior_len() <= opts.dense_limit {
        dense(space, opts)
    } else {
        iterative(space, opts)
    }
}

fn interior_weights(space: &WeightedSpace) -> &[f64] {
    &space.omega()[..space.interior_len()]
}

fn ip(space: &WeightedSpace, x: &[f64], y: &[f64]) -> f64 {
    space.inner(&space.extend(x), &space.extend(y))
}

/// Omega-orthonormalizes columns in place (two passes of Gram-Schmidt).
fn orthonormalize(space: &WeightedSpace, cols: &mut [Vec<f64>]) {
    for k in 0..cols.len() {
        for _ in 0..2 {
            for j in 0..k {
                let c = ip(space, &cols[k], &cols[j]);
                let (head, tail) = cols.split_at_mut(k);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= c * b;
                }
            }
        }
        let n = ip(space, &cols[k], &cols[k]).max(0.0).sqrt();
        if n > 0.0 {
            for a in cols[k].iter_mut() {
                *a /= n;
            }
        }
    }
}

fn residual(space: &WeightedSpace, x: &[f64], value: f64) -> f64 {
    let ax = space.apply_interior(x);
    let w = interior_weights(space);
    let r: f64 = ax
        .iter()
        .zip(x)
        .zip(w)
        .map(|((a, b), w)| w * (a - value * b).powi(2))
        .sum();
    let n: f64 = x.iter().zip(w).map(|(b, w)| w * b * b).sum();
    (r / n).sqrt()
}

fn rayleigh(space: &WeightedSpace, x: &[f64]) -> f64 {
    let ax = space.apply_interior(x);
    let w = interior_weights(space);
    let num: f64 = ax.iter().zip(x).zip(w).map(|((a, b), w)| w * a * b).sum();
    let den: f64 = x.iter().zip(w).map(|(b, w)| w * b * b).sum();
    num / den
}

fn random_block(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn pair_from(space: &WeightedSpace, x: &[f64]) -> EigenPair {
    let value = rayleigh(space, x);
    EigenPair {
        value,
        residual: residual(space, x, value),
        vector: space.extend(x),
    }
}

/// Principal-angle cosines between `span(vectors)` and the horizontal linears.
fn kernel_cosines(space: &WeightedSpace, vectors: &[Vec<f64>]) -> Vec<f64> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let grid = space.grid();
    let n = space.interior_len();
    let mut lin: Vec<Vec<f64>> = [0.0f64, 1.0]
        .iter()
        .map(|&q| {
            let f = ScalarField::from_fn(grid, |r, p| {
                r.sin() * (p - q * std::f64::consts::FRAC_PI_2).cos()
            });
            f.values()[..n].to_vec()
        })
        .collect();
    orthonormalize(space, &mut lin);
    let mut v: Vec<Vec<f64>> = vectors.to_vec();
    orthonormalize(space, &mut v);
    let c = DMatrix::from_fn(v.len(), 2, |i, j| ip(space, &v[i], &lin[j]));
    let mut s: Vec<f64> = c.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.truncate(v.len().min(2));
    s
}

fn assemble(space: &WeightedSpace) -> DMatrix<f64> {
    let n = space.interior_len();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        let col = space.apply_interior(&e);
        m.column_mut(k).copy_from_slice(&col);
        e[k] = 0.0;
    }
    m
}

fn cluster_vectors(
    space: &WeightedSpace,
    m: &DMatrix<f64>,
    centre: f64,
    size: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = m.nrows();
    let shift = centre + 1e-7 * centre.abs().max(1.0);
    let lu = (m - DMatrix::identity(n, n) * shift).lu();
    let mut block = random_block(n, size, seed);
    orthonormalize(space, &mut block);
    for _ in 0..8 {
        for col in block.iter_mut() {
            let sol = lu
                .solve(&DVector::from_column_slice(col))
                .ok_or_else(|| CapError::SolverFailure(format!("singular shift {shift:e}")))?;
            col.copy_from_slice(sol.as_slice());
        }
        orthonormalize(space, &mut block);
    }
    Ok(block)
}

fn dense(space: &WeightedSpace, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    let grid = space.grid();
    let m = assemble(space);
    let n = m.nrows();

    let d: Vec<f64> = interior_weights(space).iter().map(|w| w.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| d[i] * m[(i, j)] / d[j]);
    let asymmetry = (&s - s.transpose()).norm() / s.norm();

    let (eig, schur_tolerance) = SCHUR_TOLERANCES
        .iter()
        .find_map(|&eps| {
            nalgebra::linalg::Schur::try_new(m.clone(), eps, 100 * n)
                .map(|s| (s.complex_eigenvalues(), eps))
        })
        .ok_or_else(|| {
            CapError::SolverFailure(format!("Schur iteration did not converge for {n} unknowns"))
        })?;
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut values: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
    values.sort_by(|a, b| b.0.total_cmp(&a.0));
    let is_complex = |im: f64| im.abs() > 1e-10 * scale;
    let complex_count = values.iter().filter(|v| is_complex(v.1)).count();
    let max_imag = values.iter().map(|v| v.1.abs()).fold(0.0, f64::max);
    let max_complex_real = values
        .iter()
        .filter(|v| is_complex(v.1))
        .map(|v| v.0)
        .reduce(f64::max);
    let eigenvalues: Vec<f64> = values.iter().map(|v| v.0).collect();

    let lambda1 = eigenvalues[0];
    let lambda2 = eigenvalues.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    let kernel_cut = opts.kernel_relative * lambda1.abs();
    let kernel_values: Vec<f64> = values
        .iter()
        .filter(|v| !is_complex(v.1) && v.0.abs() <= kernel_cut)
        .map(|v| v.0)
        .collect();
    let nonpositive_tail = eigenvalues.iter().filter(|&&v| v < -kernel_cut).count();
    let band_violations: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&v| v > opts.band && v < 1.0 - opts.band)
        .collect();

    // eigenvectors for the leading clusters
    let mut pairs = Vec::new();
    let mut kernel_basis = Vec::new();
    let mut k = 0;
    let mut seed = opts.seed;
    while k < eigenvalues.len() && k < opts.how_many.max(1) {
        if is_complex(values[k].1) {
            k += 1;
            continue;
        }
        let centre = eigenvalues[k];
        let tol = 1e-6 * centre.abs().max(1.0);
        let size = eigenvalues[k..]
            .iter()
            .take_while(|&&v| (v - centre).abs() <= tol)
            .count();
        let block = cluster_vectors(space, &m, centre, size, seed)?;
        seed = seed.wrapping_add(1);
        if centre.abs() <= kernel_cut {
            kernel_basis = block.clone();
        }
        pairs.extend(block.iter().map(|x| pair_from(space, x)));
        k += size;
    }
    if kernel_basis.is_empty() && !kernel_values.is_empty() {
        kernel_basis = cluster_vectors(space, &m, 0.0, kernel_values.len(), seed)?;
    }
    let kernel_cosines = kernel_cosines(space, &kernel_basis);

    Ok(SpectrumReport {
        theta: grid.theta(),
        n_rho: grid.n_rho(),
        n_phi: grid.n_phi(),
        method: "dense".into(),
        unknowns: n,
        eigenvalues,
        complex_count,
        max_imag,
        max_complex_real,
        lambda1,
        lambda2,
        gap: lambda1 - lambda2,
        lambda1_simple: lambda1 - lambda2 > 1.0 - 2.0 * opts.band,
        kernel_values,
        kernel_cosines,
        nonpositive_tail,
        band: opts.band,
        band_checked: true,
        band_violations,
        asymmetry: Some(asymmetry),
        schur_tolerance: Some(schur_tolerance),
        pairs,
    })
}

/// Block inverse iteration at `shift`; returns Ritz values and omega-orthonormal vectors.
fn inverse_iteration(
    space: &WeightedSpace,
    shift: f64,
    size: usize,
    opts: &SpectrumOptions,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let pre = ModePreconditioner::new(space, shift)?;
    let n = space.interior_len();
    let mut block = random_block(n, size, seed);
    orthonormalize(space, &mut block);
    let mut values = vec![0.0; size];
    for _ in 0..opts.max_outer {
        for col in block.iter_mut() {
            *col = shifted_solve(space, &pre, shift, col, 1e-11)?.x;
        }
        orthonormalize(space, &mut block);
        // Rayleigh-Ritz in the omega inner product
        let images: Vec<Vec<f64>> = block.iter().map(|x| space.apply_interior(x)).collect();
        let h = DMatrix::from_fn(size, size, |i, j| ip(space, &block[i], &images[j]));
        let eig = h.complex_eigenvalues();
        let mut ritz: Vec<f64> = eig.iter().map(|z| z.re).collect();
        ritz.sort_by(|a, b| b.total_cmp(a));
        values = ritz;
        let worst = block
            .iter()
            .zip(&images)
            .map(|(x, ax)| {
                let coeffs: Vec<f64> = block.iter().map(|b| ip(space, b, ax)).collect();
                let mut r = ax.clone();
                for (cf, b) in coeffs.iter().zip(&block) {
                    for (ri, bi) in r.iter_mut().zip(b) {
                        *ri -= cf * bi;
                    }
                }
                ip(space, &r, &r).max(0.0).sqrt() / ip(space, x, x).sqrt()
            })
            .fold(0.0, f64::max);
        if worst <= opts.eigen_tolerance * values.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
            return Ok((values, block));
        }
    }
    Err(CapError::SolverFailure(format!(
        "inverse iteration at shift {shift} did not converge in {} steps (Ritz values {values:?})",
        opts.max_outer
    )))
}

fn iterative(space: &WeightedSpace, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    let grid = space.grid();
    let (top, top_vecs) = inverse_iteration(space, TOP_SHIFT, 1, opts, opts.seed)?;
    let (kern, kern_vecs) =
        inverse_iteration(space, KERNEL_SHIFT, 2, opts, opts.seed.wrapping_add(1))?;
    let lambda1 = top[0];
    let kernel_cut = opts.kernel_relative * lambda1.abs();
    let kernel_values: Vec<f64> = kern
        .iter()
        .copied()
        .filter(|v| v.abs() <= kernel_cut)
        .collect();
    let lambda2 = kern.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut eigenvalues = top.clone();
    eigenvalues.extend(&kern);
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let mut pairs: Vec<EigenPair> = top_vecs.iter().map(|x| pair_from(space, x)).collect();
    pairs.extend(kern_vecs.iter().map(|x| pair_from(space, x)));
    // The three eigenvalues nearest 1/2 include any eigenvalue inside the band.
    let (probe, _) = inverse_iteration(space, BAND_SHIFT, 3, opts, opts.seed.wrapping_add(2))?;
    let band_violations = probe
        .iter()
        .copied()
        .filter(|&v| v > opts.band && v < 1.0 - opts.band)
        .collect();
    Ok(SpectrumReport {
        theta: grid.theta(),
        n_rho: grid.n_rho(),
        n_phi: grid.n_phi(),
        method: "iterative".into(),
        unknowns: space.interior_len(),
        eigenvalues,
        complex_count: 0,
        max_imag: 0.0,
        max_complex_real: None,
        lambda1,
        lambda2,
        gap: lambda1 - lambda2,
        lambda1_simple: lambda1 - lambda2 > 1.0 - 2.0 * opts.band,
        kernel_cosines: kernel_cosines(space, &kern_vecs),
        kernel_values,
        nonpositive_tail: 0,
        band: opts.band,
        band_checked: true,
        band_violations,
        asymmetry: None,
        schur_tolerance: None,
        pairs,
    })
}
