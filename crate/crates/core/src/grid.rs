//! Geodesic polar grid on the spherical cap `C_theta` and its calculus.
//!
//! Layers sit at `rho_i = (i + 1/2) * theta / n_rho` for `i < n_rho`, plus an
//! explicit boundary layer at `rho = theta`. Node `(i, j)` has flat index
//! `i * n_phi + j`. The pole is never a node; radial stencils that reach past
//! it use the reflected node `(rho, phi + pi)` at position `-rho`.
//!
//! Radial derivatives and the radial quadrature rule are built from seven-point
//! trigonometric interpolation, so `1`, `cos rho`, `sin rho` (and their
//! products up to degree three) are handled exactly. Azimuthal derivatives
//! are Fourier collocation.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{CapError, Result};
use crate::stencil;
use crate::sum::neumaier;

pub const RADIAL_STENCIL: usize = 7;
pub const MIN_N_RHO: usize = 8;
pub const MIN_N_PHI: usize = 8;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tap {
    pub layer: usize,
    pub reflected: bool,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug)]
struct ExtNode {
    pos: f64,
    layer: usize,
    reflected: bool,
}

#[derive(Debug)]
pub struct CapGrid {
    theta: f64,
    n_rho: usize,
    n_phi: usize,
    rho_nodes: Vec<f64>,
    phi_nodes: Vec<f64>,
    radial_weights: Vec<f64>,
    quad_weights: Vec<f64>,
    boundary_index: Vec<usize>,
    d1: Vec<Vec<Tap>>,
    d2: Vec<Vec<Tap>>,
    fourier_d1: Vec<f64>,
    fourier_d2: Vec<f64>,
}

/// Symmetric 2x2 tensor in the orthonormal frame `(e_rho, e_phi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub rr: f64,
    pub rp: f64,
    pub pp: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        rr: 1.0,
        rp: 0.0,
        pp: 1.0,
    };

    pub fn new(rr: f64, rp: f64, pp: f64) -> Self {
        Sym2 { rr, rp, pp }
    }

    pub fn trace(&self) -> f64 {
        self.rr + self.pp
    }

    pub fn det(&self) -> f64 {
        self.rr * self.pp - self.rp * self.rp
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.rr + self.pp);
        let d = (0.5 * (self.rr - self.pp)).hypot(self.rp);
        (m - d, m + d)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().0
    }

    /// Mixed discriminant with another tensor, `Q(A, B) = tr(A adj B) / 2`.
    pub fn mixed(&self, other: &Sym2) -> f64 {
        0.5 * (self.rr * other.pp + self.pp * other.rr - 2.0 * self.rp * other.rp)
    }

    pub fn plus_scalar(&self, c: f64) -> Sym2 {
        Sym2 {
            rr: self.rr + c,
            rp: self.rp,
            pp: self.pp + c,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.rr.abs().max(self.rp.abs()).max(self.pp.abs())
    }

    pub fn to_matrix(&self) -> nalgebra::Matrix2<f64> {
        nalgebra::Matrix2::new(self.rr, self.rp, self.rp, self.pp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    values: Vec<Sym2>,
}

/// Tangent vectors as `[e_rho, e_phi]` components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    values: Vec<[f64; 2]>,
}

pub(crate) struct Derivatives {
    pub fr: Vec<f64>,
    pub frr: Vec<f64>,
    pub fp: Vec<f64>,
    pub fpp: Vec<f64>,
    pub frp: Vec<f64>,
}

pub fn build_grid(theta: f64, n_rho: usize, n_phi: usize) -> Result<CapGrid> {
    CapGrid::new(theta, n_rho, n_phi)
}

/// Volume of the solid unit cap, `pi (1 - cos t)^2 (2 + cos t) / 3`.
pub fn b_theta(theta: f64) -> f64 {
    let c = theta.cos();
    PI * (1.0 - c).powi(2) * (2.0 + c) / 3.0
}

/// Area of the unit cap, `2 pi (1 - cos t)`.
pub fn cap_area(theta: f64) -> f64 {
    2.0 * PI * (1.0 - theta.cos())
}

impl CapGrid {
    pub fn new(theta: f64, n_rho: usize, n_phi: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < PI) {
            return Err(CapError::InvalidAngle(theta));
        }
        if n_rho < MIN_N_RHO || n_phi < MIN_N_PHI || !n_phi.is_multiple_of(2) {
            return Err(CapError::GridTooCoarse { n_rho, n_phi });
        }
        let h = theta / n_rho as f64;
        let mut rho_nodes: Vec<f64> = (0..n_rho).map(|i| (i as f64 + 0.5) * h).collect();
        rho_nodes.push(theta);
        let phi_nodes: Vec<f64> = (0..n_phi)
            .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
            .collect();

        let mut ext: Vec<ExtNode> = (0..n_rho)
            .rev()
            .map(|i| ExtNode {
                pos: -rho_nodes[i],
                layer: i,
                reflected: true,
            })
            .collect();
        ext.extend(rho_nodes.iter().enumerate().map(|(i, &pos)| ExtNode {
            pos,
            layer: i,
            reflected: false,
        }));

        let mut d1 = Vec::with_capacity(n_rho + 1);
        let mut d2 = Vec::with_capacity(n_rho + 1);
        for (i, &rho) in rho_nodes.iter().enumerate() {
            let centre = n_rho + i;
            let mut lo = centre - RADIAL_STENCIL / 2;
            if lo + RADIAL_STENCIL > ext.len() {
                lo = ext.len() - RADIAL_STENCIL;
            }
            let window = &ext[lo..lo + RADIAL_STENCIL];
            let pos: Vec<f64> = window.iter().map(|e| e.pos).collect();
            let (w1, w2) = stencil::derivative_weights(&pos, rho);
            let taps = |w: &[f64]| -> Vec<Tap> {
                window
                    .iter()
                    .zip(w)
                    .map(|(e, &weight)| Tap {
                        layer: e.layer,
                        reflected: e.reflected,
                        weight,
                    })
                    .collect()
            };
            d1.push(taps(&w1));
            d2.push(taps(&w2));
        }

        let mut radial_weights = vec![0.0; n_rho + 1];
        let mut bounds = vec![0.0];
        bounds.extend_from_slice(&rho_nodes);
        for pair in bounds.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let lo = nearest_window(&ext, 0.5 * (a + b));
            let window = &ext[lo..lo + RADIAL_STENCIL];
            let pos: Vec<f64> = window.iter().map(|e| e.pos).collect();
            let w = stencil::sine_moment_weights(&pos, a, b);
            for (e, wi) in window.iter().zip(w) {
                radial_weights[e.layer] += wi;
            }
        }
        let dphi = 2.0 * PI / n_phi as f64;
        let quad_weights = radial_weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w * dphi, n_phi))
            .collect();
        let boundary_index = (0..n_phi).map(|j| n_rho * n_phi + j).collect();
        let (fourier_d1, fourier_d2) = fourier_matrices(n_phi);

        Ok(CapGrid {
            theta,
            n_rho,
            n_phi,
            rho_nodes,
            phi_nodes,
            radial_weights,
            quad_weights,
            boundary_index,
            d1,
            d2,
            fourier_d1,
            fourier_d2,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Number of interior layers; the grid has `n_rho + 1` layers in total.
    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn n_layers(&self) -> usize {
        self.n_rho + 1
    }

    pub fn node_count(&self) -> usize {
        (self.n_rho + 1) * self.n_phi
    }

    pub fn interior_count(&self) -> usize {
        self.n_rho * self.n_phi
    }

    pub fn rho_nodes(&self) -> &[f64] {
        &self.rho_nodes
    }

    pub fn phi_nodes(&self) -> &[f64] {
        &self.phi_nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Radial weights `w_i` with `int f dsigma ~ sum_i w_i sum_j f_ij dphi`.
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn boundary_index(&self) -> &[usize] {
        &self.boundary_index
    }

    pub fn index(&self, layer: usize, j: usize) -> usize {
        layer * self.n_phi + j
    }

    /// `(layer, azimuth)` of a flat node index.
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_phi, idx % self.n_phi)
    }

    pub fn dphi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    pub fn cot_theta(&self) -> f64 {
        self.theta.cos() / self.theta.sin()
    }

    /// Cap point `xi = (sin rho cos phi, sin rho sin phi, cos rho - cos theta)`.
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let (i, j) = self.split(idx);
        let (sr, cr) = self.rho_nodes[i].sin_cos();
        let (sp, cp) = self.phi_nodes[j].sin_cos();
        [sr * cp, sr * sp, cr - self.theta.cos()]
    }

    /// Unit normal `nu = xi - cos(theta) e` with `e = (0, 0, -1)`.
    pub fn normal(&self, idx: usize) -> [f64; 3] {
        let (i, j) = self.split(idx);
        let (sr, cr) = self.rho_nodes[i].sin_cos();
        let (sp, cp) = self.phi_nodes[j].sin_cos();
        [sr * cp, sr * sp, cr]
    }

    /// Ambient frame vectors `(e_rho, e_phi)` at a node.
    pub fn frame(&self, idx: usize) -> ([f64; 3], [f64; 3]) {
        let (i, j) = self.split(idx);
        let (sr, cr) = self.rho_nodes[i].sin_cos();
        let (sp, cp) = self.phi_nodes[j].sin_cos();
        ([cr * cp, cr * sp, -sr], [-sp, cp, 0.0])
    }

    pub fn same_layout(&self, other: &CapGrid) -> bool {
        self.theta.to_bits() == other.theta.to_bits()
            && self.n_rho == other.n_rho
            && self.n_phi == other.n_phi
    }

    pub fn check(&self, f: &ScalarField) -> Result<()> {
        if f.len() != self.node_count() {
            return Err(CapError::ShapeMismatch {
                expected: self.node_count(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// First- and second-derivative taps of a layer.
    pub(crate) fn radial_taps(&self, layer: usize) -> (&[Tap], &[Tap]) {
        (&self.d1[layer], &self.d2[layer])
    }

    pub(crate) fn fourier_d1(&self) -> &[f64] {
        &self.fourier_d1
    }

    pub(crate) fn fourier_d2(&self) -> &[f64] {
        &self.fourier_d2
    }

    fn radial(&self, f: &[f64], stencils: &[Vec<Tap>]) -> Vec<f64> {
        let np = self.n_phi;
        let half = np / 2;
        let mut out = vec![0.0; f.len()];
        for (i, taps) in stencils.iter().enumerate() {
            let row = &mut out[i * np..(i + 1) * np];
            for tap in taps {
                let src = &f[tap.layer * np..(tap.layer + 1) * np];
                if tap.reflected {
                    for (j, r) in row.iter_mut().enumerate() {
                        *r += tap.weight * src[(j + half) % np];
                    }
                } else {
                    for (r, s) in row.iter_mut().zip(src) {
                        *r += tap.weight * s;
                    }
                }
            }
        }
        out
    }

    /// Applies a Fourier differentiation matrix ring by ring. Ring means are
    /// removed first so that constants give exactly zero.
    fn azimuthal(&self, f: &[f64], matrix: &[f64]) -> Vec<f64> {
        let np = self.n_phi;
        let mut out = vec![0.0; f.len()];
        let mut centred = vec![0.0; np];
        for (src, dst) in f.chunks_exact(np).zip(out.chunks_exact_mut(np)) {
            let mean = neumaier(src.iter().copied()) / np as f64;
            for (c, s) in centred.iter_mut().zip(src) {
                *c = s - mean;
            }
            for (j, d) in dst.iter_mut().enumerate() {
                let row = &matrix[j * np..(j + 1) * np];
                *d = row.iter().zip(&centred).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    pub(crate) fn derivatives(&self, f: &[f64]) -> Derivatives {
        let fr = self.radial(f, &self.d1);
        let frr = self.radial(f, &self.d2);
        let fp = self.azimuthal(f, &self.fourier_d1);
        let fpp = self.azimuthal(f, &self.fourier_d2);
        let frp = self.azimuthal(&fr, &self.fourier_d1);
        Derivatives {
            fr,
            frr,
            fp,
            fpp,
            frp,
        }
    }

    pub(crate) fn hessian_values(&self, f: &[f64]) -> Vec<Sym2> {
        let d = self.derivatives(f);
        let np = self.n_phi;
        (0..f.len())
            .map(|idx| {
                let (s, c) = self.rho_nodes[idx / np].sin_cos();
                let cot = c / s;
                Sym2 {
                    rr: d.frr[idx],
                    rp: (d.frp[idx] - cot * d.fp[idx]) / s,
                    pp: d.fpp[idx] / (s * s) + cot * d.fr[idx],
                }
            })
            .collect()
    }

    pub(crate) fn a_values(&self, f: &[f64]) -> Vec<Sym2> {
        let mut h = self.hessian_values(f);
        for (t, &v) in h.iter_mut().zip(f) {
            *t = t.plus_scalar(v);
        }
        h
    }

    pub(crate) fn integrate_values(&self, f: &[f64]) -> f64 {
        neumaier(f.iter().zip(&self.quad_weights).map(|(v, w)| v * w))
    }

    pub(crate) fn robin_residual_values(&self, f: &[f64]) -> Vec<f64> {
        let np = self.n_phi;
        let half = np / 2;
        let cot = self.cot_theta();
        let base = self.n_rho * np;
        (0..np)
            .map(|j| {
                let d: f64 = self.d1[self.n_rho]
                    .iter()
                    .map(|t| {
                        let jj = if t.reflected { (j + half) % np } else { j };
                        t.weight * f[t.layer * np + jj]
                    })
                    .sum();
                d - cot * f[base + j]
            })
            .collect()
    }

    /// Overwrites the boundary layer so the discrete Robin residual vanishes.
    pub(crate) fn robin_extend_in_place(&self, f: &mut [f64]) {
        let np = self.n_phi;
        let half = np / 2;
        let n = self.n_rho;
        let cot = self.cot_theta();
        let taps = &self.d1[n];
        let w_self: f64 = taps
            .iter()
            .filter(|t| t.layer == n && !t.reflected)
            .map(|t| t.weight)
            .sum();
        for j in 0..np {
            let acc: f64 = taps
                .iter()
                .filter(|t| !(t.layer == n && !t.reflected))
                .map(|t| {
                    let jj = if t.reflected { (j + half) % np } else { j };
                    t.weight * f[t.layer * np + jj]
                })
                .sum();
            f[n * np + j] = acc / (cot - w_self);
        }
    }

    pub fn hessian(&self, f: &ScalarField) -> Result<SymTensorField> {
        self.check(f)?;
        Ok(SymTensorField {
            values: self.hessian_values(&f.values),
        })
    }

    pub fn a_of(&self, f: &ScalarField) -> Result<SymTensorField> {
        self.check(f)?;
        Ok(SymTensorField {
            values: self.a_values(&f.values),
        })
    }

    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        self.check(f)?;
        Ok(self.integrate_values(&f.values))
    }

    /// `d_rho f - cot(theta) f` on the boundary ring, one value per azimuth.
    pub fn robin_residual(&self, f: &ScalarField) -> Result<Vec<f64>> {
        self.check(f)?;
        Ok(self.robin_residual_values(&f.values))
    }

    /// Copy of `f` whose boundary ring is replaced by the value that makes the
    /// discrete Robin condition hold exactly.
    pub fn robin_extend(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let mut v = f.values.clone();
        self.robin_extend_in_place(&mut v);
        Ok(ScalarField { values: v })
    }

    pub fn surface_gradient(&self, f: &ScalarField) -> Result<VectorField> {
        self.check(f)?;
        let fr = self.radial(&f.values, &self.d1);
        let fp = self.azimuthal(&f.values, &self.fourier_d1);
        let np = self.n_phi;
        let values = (0..f.len())
            .map(|idx| [fr[idx], fp[idx] / self.rho_nodes[idx / np].sin()])
            .collect();
        Ok(VectorField { values })
    }

    /// Radial derivative `d_rho f` at every node.
    pub fn radial_derivative(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        Ok(ScalarField {
            values: self.radial(&f.values, &self.d1),
        })
    }
}

fn nearest_window(ext: &[ExtNode], x: f64) -> usize {
    let k = ext
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.pos - x).abs().total_cmp(&(b.1.pos - x).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let (mut lo, mut hi) = (k, k);
    while hi - lo + 1 < RADIAL_STENCIL {
        let left_ok = lo > 0;
        let right_ok = hi + 1 < ext.len();
        let take_left = left_ok && (!right_ok || x - ext[lo - 1].pos <= ext[hi + 1].pos - x);
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    lo
}

fn fourier_matrices(n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * PI / n as f64;
    let mut d1 = vec![0.0; n * n];
    let mut d2 = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            if j == k {
                d2[j * n + k] = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
            } else {
                let d = j as i64 - k as i64;
                let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let half = d as f64 * h / 2.0;
                d1[j * n + k] = 0.5 * sign / half.tan();
                d2[j * n + k] = -0.5 * sign / half.sin().powi(2);
            }
        }
    }
    (d1, d2)
}

impl ScalarField {
    pub fn new(grid: &CapGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(CapError::ShapeMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(CapError::NonFinite(k));
        }
        Ok(ScalarField { values })
    }

    pub(crate) fn from_vec(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    /// Samples `f(rho, phi)` at every node.
    pub fn from_fn(grid: &CapGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid
            .rho_nodes
            .iter()
            .flat_map(|&r| grid.phi_nodes.iter().map(move |&p| (r, p)))
            .map(|(r, p)| f(r, p))
            .collect();
        ScalarField { values }
    }

    pub fn constant(grid: &CapGrid, c: f64) -> Self {
        ScalarField {
            values: vec![c; grid.node_count()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        ScalarField { values }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.combine(1.0, other, 1.0)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        ScalarField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .collect(),
        }
    }
}

impl SymTensorField {
    pub fn values(&self) -> &[Sym2] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: usize) -> Sym2 {
        self.values[idx]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .map(Sym2::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute entry over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, t| m.max(t.max_abs()))
    }
}

impl VectorField {
    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> [f64; 2] {
        self.values[idx]
    }
}
