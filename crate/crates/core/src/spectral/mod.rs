//! The operator `Af = f2 Q(A[f], A[f2]) / det A[f2]` on `L^2(C_theta, omega)`,
//! with `d omega = det A[f2] / (3 f2) d sigma`.
//!
//! `<f, A g>_omega = V(f, g, f2)`, so the Alexandrov-Fenchel inequality for
//! mixed volumes is the reverse Cauchy-Schwarz inequality of this form.
//! Unknowns of the discrete operator are the interior nodes; the boundary
//! ring is eliminated through the Robin condition.

mod af;
mod eigen;
mod krylov;

pub use af::{
    af_chain_check, af_check, equality_decompose, AfReport, AfStatus, ChainReport, ChainTriple,
    ConjecturePair, Decomposition,
};
pub use eigen::{spectrum, EigenPair, SpectrumOptions, SpectrumReport};
pub use krylov::{gmres, GmresOutcome};

use std::sync::Arc;

use crate::error::{CapError, Result};
use crate::grid::{CapGrid, ScalarField, Sym2};
use crate::mixedvol::volume_from_tensors;
use crate::reconstruct::embed_field;
use crate::sum::neumaier;

#[derive(Clone, Debug)]
pub struct WeightedSpace {
    grid: Arc<CapGrid>,
    /// Reference function after any horizontal translation.
    reference: ScalarField,
    /// `reference` with its boundary ring projected onto the discrete Robin condition.
    f2: ScalarField,
    translation: [f64; 2],
    b: Vec<Sym2>,
    /// Coefficients of `A_rr`, `A_rp`, `A_pp` in the operator.
    coef: Vec<[f64; 3]>,
    omega: Vec<f64>,
}

impl WeightedSpace {
    /// Builds the space for reference support `f2`. A body that is not
    /// positive everywhere is first translated horizontally so that the
    /// origin sits at the centroid of its boundary curve.
    pub fn new(grid: &Arc<CapGrid>, f2: &ScalarField) -> Result<Self> {
        grid.check(f2)?;
        let mut reference = f2.clone();
        let mut translation = [0.0, 0.0];
        if reference.min() <= 0.0 {
            let patch = embed_field(grid, f2)?;
            let np = grid.n_phi() as f64;
            let px = neumaier(patch.boundary.iter().map(|&k| patch.positions[k][0])) / np;
            let py = neumaier(patch.boundary.iter().map(|&k| patch.positions[k][1])) / np;
            translation = [-px, -py];
            let shift = ScalarField::from_fn(grid, |r, p| r.sin() * (px * p.cos() + py * p.sin()));
            reference = reference.combine(1.0, &shift, -1.0);
            if reference.min() <= 0.0 {
                return Err(CapError::Precondition(format!(
                    "reference support stays nonpositive after translation (min {:.3e})",
                    reference.min()
                )));
            }
        }
        let proj = grid.robin_extend(&reference)?;
        if proj.min() <= 0.0 {
            return Err(CapError::Precondition(
                "projected reference support is nonpositive".into(),
            ));
        }
        let b = grid.a_values(proj.values());
        let min_eig = b
            .iter()
            .map(Sym2::min_eigenvalue)
            .fold(f64::INFINITY, f64::min);
        if !(min_eig > 0.0) {
            return Err(CapError::DegenerateWeight(min_eig));
        }
        let coef = b
            .iter()
            .zip(proj.values())
            .map(|(t, &f)| {
                let s = f / t.det();
                [0.5 * s * t.pp, -s * t.rp, 0.5 * s * t.rr]
            })
            .collect();
        let omega = b
            .iter()
            .zip(proj.values())
            .zip(grid.quad_weights())
            .map(|((t, &f), &w)| t.det() / (3.0 * f) * w)
            .collect();
        Ok(WeightedSpace {
            grid: Arc::clone(grid),
            reference,
            f2: proj,
            translation,
            b,
            coef,
            omega,
        })
    }

    pub fn grid(&self) -> &Arc<CapGrid> {
        &self.grid
    }

    pub fn reference(&self) -> &ScalarField {
        &self.reference
    }

    pub fn f2(&self) -> &ScalarField {
        &self.f2
    }

    /// Horizontal translation applied to the reference body.
    pub fn translation(&self) -> [f64; 2] {
        self.translation
    }

    /// `A[f2]` at every node.
    pub fn reference_tensor(&self) -> &[Sym2] {
        &self.b
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn interior_len(&self) -> usize {
        self.grid.interior_count()
    }

    pub(crate) fn coefficients(&self) -> &[[f64; 3]] {
        &self.coef
    }

    /// Applies the operator pointwise to a full-grid vector.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let a = self.grid.a_values(f);
        a.iter()
            .zip(&self.coef)
            .map(|(t, c)| c[0] * t.rr + c[1] * t.rp + c[2] * t.pp)
            .collect()
    }

    pub fn apply_field(&self, f: &ScalarField) -> Result<ScalarField> {
        self.grid.check(f)?;
        Ok(ScalarField::from_vec(self.apply(f.values())))
    }

    /// Full-grid vector from interior unknowns, boundary filled by the Robin condition.
    pub fn extend(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.grid.node_count()];
        f[..x.len()].copy_from_slice(x);
        self.grid.robin_extend_in_place(&mut f);
        f
    }

    /// Discrete operator on interior unknowns.
    pub fn apply_interior(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.apply(&self.extend(x));
        y.truncate(x.len());
        y
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        neumaier(self.omega.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b))
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    /// `<f, A g>_omega`.
    pub fn form(&self, f: &[f64], g: &[f64]) -> f64 {
        self.inner(f, &self.apply(g))
    }

    /// `V(f, g, f2)` with the reference as given (translated, not projected).
    pub fn mixed_volume(&self, f: &[f64], g: &[f64]) -> f64 {
        let ag = self.grid.a_values(g);
        let ar = self.grid.a_values(self.reference.values());
        volume_from_tensors(&self.grid, f, &ag, &ar)
    }

    fn check_pair(&self, f: &ScalarField, g: &ScalarField) -> Result<()> {
        self.grid.check(f)?;
        self.grid.check(g)
    }
}

/// `|<f, A g> - <g, A f>| / scale` with
/// `scale = max(|<f, A g>|, |<g, A f>|, |f|_omega |g|_omega)`.
pub fn self_adjoint_residual(
    space: &WeightedSpace,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<f64> {
    space.check_pair(f, g)?;
    let fg = space.form(f.values(), g.values());
    let gf = space.form(g.values(), f.values());
    let scale = fg
        .abs()
        .max(gf.abs())
        .max(space.norm(f.values()) * space.norm(g.values()));
    Ok(if scale == 0.0 {
        0.0
    } else {
        (fg - gf).abs() / scale
    })
}

/// `|<f, A g> - V(f, g, f2)| / scale`, scale as in [`self_adjoint_residual`].
pub fn form_consistency(space: &WeightedSpace, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    space.check_pair(f, g)?;
    let fg = space.form(f.values(), g.values());
    let v = space.mixed_volume(f.values(), g.values());
    let scale = fg
        .abs()
        .max(v.abs())
        .max(space.norm(f.values()) * space.norm(g.values()));
    Ok(if scale == 0.0 {
        0.0
    } else {
        (fg - v).abs() / scale
    })
}
