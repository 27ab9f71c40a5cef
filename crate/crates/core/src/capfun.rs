//! Capillary functions and capillary convex bodies.
//!
//! A capillary function satisfies the Robin condition
//! `d_rho f = cot(theta) f` on the boundary ring; a capillary convex body is
//! represented by its support function `h`, a capillary function with
//! `A[h] = Hess h + h Id` positive definite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use crate::error::{CapError, Result};
use crate::grid::{CapGrid, ScalarField};
use crate::tolerance::Tolerances;

/// Relative convexity margin required of generated bodies.
pub const GENERATOR_MARGIN: f64 = 0.05;
pub const MAX_HALVINGS: usize = 50;

#[derive(Clone, Debug)]
pub struct CapillaryField {
    grid: Arc<CapGrid>,
    values: ScalarField,
    robin_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct CapillaryBody {
    support: CapillaryField,
    min_eig: f64,
    theta: f64,
    provenance: Provenance,
}

/// Why [`certify`] refused a support function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub robin_max: f64,
    pub robin_scaled: f64,
    pub robin_bound: f64,
    pub min_eig: f64,
    pub convexity_bound: f64,
    /// Boundary nodes whose scaled Robin residual exceeds the bound.
    pub robin_nodes: Vec<usize>,
    /// Nodes where the smaller eigenvalue of `A[h]` is below the floor.
    pub nonconvex_nodes: Vec<usize>,
    pub message: Option<String>,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(m) = &self.message {
            return f.write_str(m);
        }
        write!(
            f,
            "rejected: scaled Robin residual {:.3e} (bound {:.3e}, {} nodes), min eigenvalue {:.3e} (floor {:.3e}, {} nodes)",
            self.robin_scaled,
            self.robin_bound,
            self.robin_nodes.len(),
            self.min_eig,
            self.convexity_bound,
            self.nonconvex_nodes.len()
        )
    }
}

impl CapillaryField {
    pub fn grid(&self) -> &Arc<CapGrid> {
        &self.grid
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    pub fn robin_max(&self) -> f64 {
        self.robin_max
    }

    /// Wraps a field after measuring its Robin residual; no tolerance check.
    pub fn measured(grid: &Arc<CapGrid>, values: ScalarField) -> Result<Self> {
        let robin_max = max_abs(&grid.robin_residual(&values)?);
        Ok(CapillaryField {
            grid: Arc::clone(grid),
            values,
            robin_max,
        })
    }

    /// Wraps a field after checking the scaled Robin residual against `tol`.
    pub fn checked(grid: &Arc<CapGrid>, values: ScalarField, tol: &Tolerances) -> Result<Self> {
        let field = Self::measured(grid, values)?;
        let scaled = field.robin_scaled();
        let bound = tol.robin_bound(grid);
        if scaled > bound {
            return Err(CapError::RobinViolation {
                max: scaled,
                tolerance: bound,
            });
        }
        Ok(field)
    }

    /// `robin_max * theta / max|f|`, dimensionless.
    pub fn robin_scaled(&self) -> f64 {
        scaled_residual(self.robin_max, self.grid.theta(), self.values.max_abs())
    }

    pub fn combine(&self, a: f64, other: &CapillaryField, b: f64) -> Result<CapillaryField> {
        if !self.grid.same_layout(&other.grid) {
            return Err(CapError::GridMismatch);
        }
        Self::measured(&self.grid, self.values.combine(a, &other.values, b))
    }
}

impl CapillaryBody {
    pub fn support(&self) -> &CapillaryField {
        &self.support
    }

    pub fn h(&self) -> &ScalarField {
        &self.support.values
    }

    pub fn grid(&self) -> &Arc<CapGrid> {
        &self.support.grid
    }

    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Body translated horizontally by `b`: support `h + <b, xi>`.
    pub fn translated(&self, b: [f64; 2], tol: &Tolerances) -> Result<CapillaryBody> {
        let grid = self.grid();
        let shift = ScalarField::from_fn(grid, |r, p| r.sin() * (b[0] * p.cos() + b[1] * p.sin()));
        let body = certify(grid, &self.h().add(&shift), tol)
            .map_err(|r| CapError::Precondition(r.to_string()))?;
        Ok(body.with_provenance(self.provenance.clone()))
    }

    pub fn to_file(&self) -> BodyFile {
        let g = self.grid();
        BodyFile {
            theta: g.theta(),
            n_rho: g.n_rho(),
            n_phi: g.n_phi(),
            values: self.h().values().to_vec(),
            provenance: self.provenance.clone(),
        }
    }
}

/// On-disk body representation; values are row-major, `rho` then `phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyFile {
    pub theta: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl BodyFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build_grid(&self) -> Result<Arc<CapGrid>> {
        Ok(Arc::new(CapGrid::new(self.theta, self.n_rho, self.n_phi)?))
    }

    /// Re-certifies the stored support function on `grid`.
    pub fn into_body(self, grid: &Arc<CapGrid>, tol: &Tolerances) -> Result<CapillaryBody> {
        if self.theta.to_bits() != grid.theta().to_bits()
            || self.n_rho != grid.n_rho()
            || self.n_phi != grid.n_phi()
        {
            return Err(CapError::GridMismatch);
        }
        let h = ScalarField::new(grid, self.values)?;
        let body = certify(grid, &h, tol).map_err(|r| CapError::Precondition(r.to_string()))?;
        Ok(body.with_provenance(self.provenance))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn scaled_residual(res: f64, theta: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        res * theta / scale
    } else {
        res
    }
}

pub fn ell_values(grid: &CapGrid) -> ScalarField {
    let c = grid.theta().cos();
    ScalarField::from_fn(grid, |r, _| 1.0 - c * r.cos())
}

/// Support function of the unit cap body, `l = 1 - cos(theta) cos(rho)`.
pub fn ell(grid: &Arc<CapGrid>) -> CapillaryBody {
    let values = ell_values(grid);
    let min_eig = grid
        .a_values(values.values())
        .iter()
        .map(|t| t.min_eigenvalue())
        .fold(f64::INFINITY, f64::min);
    let robin_max = max_abs(&grid.robin_residual_values(values.values()));
    CapillaryBody {
        support: CapillaryField {
            grid: Arc::clone(grid),
            values,
            robin_max,
        },
        min_eig,
        theta: grid.theta(),
        provenance: Provenance::default(),
    }
}

/// Restriction of a horizontal linear function `<xi, E>`.
pub fn horizontal_linear(grid: &Arc<CapGrid>, direction: [f64; 3]) -> Result<CapillaryField> {
    let norm = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
    if direction[2].abs() > 1e-12 || (norm - 1.0).abs() > 1e-12 {
        return Err(CapError::NonHorizontal(direction));
    }
    let [a, b, _] = direction;
    let values = ScalarField::from_fn(grid, |r, p| r.sin() * (a * p.cos() + b * p.sin()));
    CapillaryField::measured(grid, values)
}

/// Lifts a Neumann function `u` to the capillary function `l u`.
pub fn from_neumann(
    grid: &Arc<CapGrid>,
    u: &ScalarField,
    tol: &Tolerances,
) -> Result<CapillaryField> {
    let du = grid.radial_derivative(u)?;
    let boundary = max_abs(
        &grid
            .boundary_index()
            .iter()
            .map(|&k| du.values()[k])
            .collect::<Vec<_>>(),
    );
    let scaled = scaled_residual(boundary, grid.theta(), u.max_abs());
    let bound = tol.neumann_bound(grid);
    if scaled > bound {
        return Err(CapError::NeumannViolation {
            max: scaled,
            tolerance: bound,
        });
    }
    CapillaryField::measured(grid, ell_values(grid).mul(u))
}

/// Checks the Robin condition and strict convexity of `h`.
pub fn certify(
    grid: &Arc<CapGrid>,
    h: &ScalarField,
    tol: &Tolerances,
) -> std::result::Result<CapillaryBody, Rejection> {
    if let Err(e) = grid.check(h) {
        return Err(Rejection::message(e.to_string()));
    }
    if let Some(k) = h.values().iter().position(|v| !v.is_finite()) {
        return Err(Rejection::message(format!(
            "non-finite support value at node {k}"
        )));
    }
    let scale = h.max_abs();
    let res = grid.robin_residual_values(h.values());
    let robin_max = max_abs(&res);
    let robin_scaled = scaled_residual(robin_max, grid.theta(), scale);
    let robin_bound = tol.robin_bound(grid);
    let a = grid.a_values(h.values());
    let eigs: Vec<f64> = a.iter().map(|t| t.min_eigenvalue()).collect();
    let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let convexity_bound = tol.convexity_floor * scale;

    let robin_nodes: Vec<usize> = res
        .iter()
        .zip(grid.boundary_index())
        .filter(|(r, _)| scaled_residual(r.abs(), grid.theta(), scale) > robin_bound)
        .map(|(_, &k)| k)
        .collect();
    let nonconvex_nodes: Vec<usize> = eigs
        .iter()
        .enumerate()
        .filter(|(_, &e)| !(e > convexity_bound))
        .map(|(k, _)| k)
        .collect();

    if robin_nodes.is_empty() && nonconvex_nodes.is_empty() {
        Ok(CapillaryBody {
            support: CapillaryField {
                grid: Arc::clone(grid),
                values: h.clone(),
                robin_max,
            },
            min_eig,
            theta: grid.theta(),
            provenance: Provenance::default(),
        })
    } else {
        Err(Rejection {
            robin_max,
            robin_scaled,
            robin_bound,
            min_eig,
            convexity_bound,
            robin_nodes,
            nonconvex_nodes,
            message: None,
        })
    }
}

impl Rejection {
    fn message(m: String) -> Self {
        Rejection {
            robin_max: f64::NAN,
            robin_scaled: f64::NAN,
            robin_bound: f64::NAN,
            min_eig: f64::NAN,
            convexity_bound: f64::NAN,
            robin_nodes: Vec::new(),
            nonconvex_nodes: Vec::new(),
            message: Some(m),
        }
    }
}

/// Smooth Neumann perturbation `u` with `max|u| = 1`, built from the modes
/// `cos(k pi rho / theta) sin^m(pi rho / (2 theta)) {cos, sin}(m phi)`.
/// The `sin^m` factor keeps every mode smooth through the pole.
pub fn random_neumann(grid: &CapGrid, seed: u64, mode_cap: usize) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = grid.theta();
    let mut terms: Vec<(usize, usize, bool, f64)> = Vec::new();
    for k in 0..=mode_cap {
        for m in 0..=mode_cap {
            if k == 0 && m == 0 {
                continue;
            }
            let scale = 1.0 / ((1 + k + m) as f64).powi(2);
            terms.push((k, m, false, rng.random_range(-1.0..=1.0) * scale));
            if m > 0 {
                terms.push((k, m, true, rng.random_range(-1.0..=1.0) * scale));
            }
        }
    }
    let u = ScalarField::from_fn(grid, |r, p| {
        let s = (PI * r / (2.0 * theta)).sin();
        terms
            .iter()
            .map(|&(k, m, sine, c)| {
                let ang = if sine {
                    (m as f64 * p).sin()
                } else {
                    (m as f64 * p).cos()
                };
                c * (k as f64 * PI * r / theta).cos() * s.powi(m as i32) * ang
            })
            .sum()
    });
    let peak = u.max_abs();
    if peak > 0.0 {
        u.scaled(1.0 / peak)
    } else {
        u
    }
}

/// Seeded random body `h = base l + a l u`, halving `a` until the smaller
/// eigenvalue of `A[h]` is at least `0.05 * base` everywhere. The boundary
/// ring is re-solved from the discrete Robin condition.
pub fn random_body(
    grid: &Arc<CapGrid>,
    seed: u64,
    base_radius: f64,
    amplitude: f64,
    mode_cap: usize,
    tol: &Tolerances,
) -> Result<CapillaryBody> {
    if !(base_radius > 0.0 && base_radius.is_finite()) {
        return Err(CapError::InvalidParameter(format!(
            "base radius must be positive, got {base_radius}"
        )));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(CapError::InvalidParameter(format!(
            "amplitude must be nonnegative, got {amplitude}"
        )));
    }
    let l = ell_values(grid);
    let lu = l.mul(&random_neumann(grid, seed, mode_cap));
    let mut a = amplitude;
    for _ in 0..=MAX_HALVINGS {
        // The scaled cap already satisfies the Robin condition exactly.
        let h = if a == 0.0 {
            l.scaled(base_radius)
        } else {
            grid.robin_extend(&l.combine(base_radius, &lu, a))?
        };
        let min = grid
            .a_values(h.values())
            .iter()
            .map(|t| t.min_eigenvalue())
            .fold(f64::INFINITY, f64::min);
        if min >= GENERATOR_MARGIN * base_radius {
            let body = certify(grid, &h, tol).map_err(|r| CapError::Precondition(r.to_string()))?;
            let mut params = BTreeMap::new();
            params.insert("base_radius".to_string(), base_radius);
            params.insert("amplitude".to_string(), amplitude);
            params.insert("effective_amplitude".to_string(), a);
            params.insert("mode_cap".to_string(), mode_cap as f64);
            return Ok(body.with_provenance(Provenance {
                seed: Some(seed),
                params,
            }));
        }
        a *= 0.5;
    }
    Err(CapError::GenerationFailed(MAX_HALVINGS))
}

/// Seeded capillary function `l (c + u)`, not necessarily convex, with
/// `c` uniform in `[-1, 1]` and `u` from [`random_neumann`].
pub fn random_capillary(grid: &Arc<CapGrid>, seed: u64, mode_cap: usize) -> Result<CapillaryField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let c: f64 = rng.random_range(-1.0..=1.0);
    let u = random_neumann(grid, seed, mode_cap);
    let lu = ell_values(grid).mul(&u.combine(1.0, &ScalarField::constant(grid, c), 1.0));
    CapillaryField::measured(grid, grid.robin_extend(&lu)?)
}

/// Body with support `sum_i lambda_i h_i`.
pub fn minkowski_combine(
    bodies: &[&CapillaryBody],
    lambdas: &[f64],
    tol: &Tolerances,
) -> Result<CapillaryBody> {
    if bodies.len() != lambdas.len() {
        return Err(CapError::LengthMismatch {
            bodies: bodies.len(),
            lambdas: lambdas.len(),
        });
    }
    if let Some(&l) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(CapError::NegativeLambda(l));
    }
    if bodies.is_empty() || lambdas.iter().all(|&l| l == 0.0) {
        return Err(CapError::AllZeroLambdas);
    }
    let grid = bodies[0].grid();
    if bodies.iter().any(|b| !b.grid().same_layout(grid)) {
        return Err(CapError::GridMismatch);
    }
    let mut h = ScalarField::constant(grid, 0.0);
    for (b, &l) in bodies.iter().zip(lambdas) {
        h = h.combine(1.0, b.h(), l);
    }
    certify(grid, &h, tol).map_err(|r| CapError::Precondition(r.to_string()))
}
