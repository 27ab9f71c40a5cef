//! Mixed volumes, quermassintegrals and their integral identities.
//!
//! For support-type functions on the cap,
//! `V(f1, f2, f3) = (1/3) int f1 Q(A[f2], A[f3]) dsigma`.
//! Quermassintegrals put the copies of `l` first:
//! `Vq_j = V(l, .., l, h, .., h)` with `j` copies of `l`, so that
//! `Vq_3 = (1/3) int l = b_theta` holds exactly on every grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::capfun::{ell_values, CapillaryBody, CapillaryField};
use crate::error::{CapError, Result};
use crate::grid::{b_theta, CapGrid, ScalarField, Sym2};
use crate::sum::neumaier;

pub const B_THETA_FORMULA: &str = "pi (1 - cos theta)^2 (2 + cos theta) / 3";

pub(crate) fn volume_from_tensors(grid: &CapGrid, f1: &[f64], a2: &[Sym2], a3: &[Sym2]) -> f64 {
    let w = grid.quad_weights();
    neumaier((0..f1.len()).map(|k| f1[k] * a2[k].mixed(&a3[k]) * w[k])) / 3.0
}

fn check_all(grid: &CapGrid, fields: &[&ScalarField]) -> Result<()> {
    fields.iter().try_for_each(|f| grid.check(f))
}

/// `V(f1, rest[0], rest[1])`; `rest` must hold exactly two fields.
pub fn mixed_volume(grid: &CapGrid, f1: &ScalarField, rest: &[&ScalarField]) -> Result<f64> {
    if rest.len() != 2 {
        return Err(CapError::DimensionMismatch(format!(
            "mixed volume in 3-space takes 3 fields, got {}",
            rest.len() + 1
        )));
    }
    check_all(grid, &[f1, rest[0], rest[1]])?;
    let a2 = grid.a_values(rest[0].values());
    let a3 = if rest[1] == rest[0] {
        a2.clone()
    } else {
        grid.a_values(rest[1].values())
    };
    Ok(volume_from_tensors(grid, f1.values(), &a2, &a3))
}

/// `Vq_j` for `j = 0..=3`, with `3 - j` copies of `h`.
pub fn quermassintegral(grid: &CapGrid, body: &CapillaryBody, j: usize) -> Result<f64> {
    quermass_of_field(grid, body.h(), j)
}

pub(crate) fn quermass_of_field(grid: &CapGrid, h: &ScalarField, j: usize) -> Result<f64> {
    if j > 3 {
        return Err(CapError::IndexOutOfRange { index: j, max: 3 });
    }
    grid.check(h)?;
    let l = ell_values(grid);
    if j == 3 {
        return Ok(grid.integrate_values(l.values()) / 3.0);
    }
    let a = grid.a_values(h.values());
    let id = vec![Sym2::IDENTITY; a.len()];
    Ok(match j {
        0 => volume_from_tensors(grid, h.values(), &a, &a),
        1 => volume_from_tensors(grid, l.values(), &a, &a),
        _ => volume_from_tensors(grid, l.values(), &a, &id),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuermassRow {
    pub k: usize,
    pub value: f64,
    pub reference: Option<f64>,
    pub reference_source: Option<String>,
    pub rel_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuermassReport {
    pub theta: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub b_theta: f64,
    pub b_theta_formula: String,
    pub rows: Vec<QuermassRow>,
}

impl QuermassReport {
    /// All four quermassintegrals; row 3 is referenced against `b_theta`.
    pub fn compute(grid: &CapGrid, body: &CapillaryBody) -> Result<Self> {
        let b = b_theta(grid.theta());
        let rows = (0..=3)
            .map(|k| {
                Ok(QuermassRow {
                    k,
                    value: quermassintegral(grid, body, k)?,
                    reference: None,
                    reference_source: None,
                    rel_err: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut report = QuermassReport {
            theta: grid.theta(),
            n_rho: grid.n_rho(),
            n_phi: grid.n_phi(),
            b_theta: b,
            b_theta_formula: B_THETA_FORMULA.to_string(),
            rows,
        };
        report.set_reference(3, b, "b_theta closed form");
        Ok(report)
    }

    pub fn set_reference(&mut self, k: usize, value: f64, source: &str) {
        if let Some(row) = self.rows.iter_mut().find(|r| r.k == k) {
            row.reference = Some(value);
            row.reference_source = Some(source.to_string());
            row.rel_err = Some(rel_err(row.value, value));
        }
    }

    pub fn max_rel_err(&self) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| r.rel_err)
            .fold(0.0, f64::max)
    }
}

pub fn rel_err(value: f64, reference: f64) -> f64 {
    let scale = reference.abs().max(value.abs());
    if scale == 0.0 {
        0.0
    } else {
        (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
    }
}

fn h_k(t: &Sym2, k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 0.5 * t.trace(),
        _ => t.det(),
    }
}

/// Normalized elementary symmetric function `H_k` of the eigenvalues of `A[h]`.
pub fn h_k_field(grid: &CapGrid, h: &ScalarField, k: usize) -> Result<ScalarField> {
    if k > 2 {
        return Err(CapError::IndexOutOfRange { index: k, max: 2 });
    }
    grid.check(h)?;
    let a = grid.a_values(h.values());
    Ok(ScalarField::from_vec(a.iter().map(|t| h_k(t, k)).collect()))
}

/// Relative mismatch in `int f H_{k-1}(A[f]) = int l H_k(A[f])`.
pub fn minkowski_identity_residual(grid: &CapGrid, f: &CapillaryField, k: usize) -> Result<f64> {
    if !(1..=2).contains(&k) {
        return Err(CapError::IndexOutOfRange { index: k, max: 2 });
    }
    let v = f.values();
    grid.check(v)?;
    let a = grid.a_values(v.values());
    let l = ell_values(grid);
    let w = grid.quad_weights();
    let lhs = neumaier((0..a.len()).map(|i| v.values()[i] * h_k(&a[i], k - 1) * w[i]));
    let rhs = neumaier((0..a.len()).map(|i| l.values()[i] * h_k(&a[i], k) * w[i]));
    let scale = lhs.abs().max(rhs.abs());
    Ok(if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteinerReport {
    pub t_values: Vec<f64>,
    pub volumes: Vec<f64>,
    /// Fitted coefficients of `1, t, t^2, t^3`.
    pub coefficients: [f64; 4],
    /// `binom(3, k) Vq_k`.
    pub expected: [f64; 4],
    pub rel_err: [f64; 4],
    pub fit_residual: f64,
}

impl SteinerReport {
    pub fn max_rel_err(&self) -> f64 {
        self.rel_err.iter().copied().fold(0.0, f64::max)
    }
}

/// Fits `|K + t C| = V(h + t l, h + t l, h + t l)` by a least-squares cubic.
pub fn steiner_check(
    grid: &CapGrid,
    body: &CapillaryBody,
    t_values: &[f64],
) -> Result<SteinerReport> {
    let mut distinct: Vec<f64> = t_values
        .iter()
        .copied()
        .filter(|t| *t > 0.0 && t.is_finite())
        .collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(CapError::InsufficientSamples {
            needed: 4,
            got: distinct.len(),
        });
    }
    let h = body.h();
    grid.check(h)?;
    let l = ell_values(grid);
    let volumes: Vec<f64> = t_values
        .iter()
        .map(|&t| {
            let ht = h.combine(1.0, &l, t);
            let a = grid.a_values(ht.values());
            volume_from_tensors(grid, ht.values(), &a, &a)
        })
        .collect();
    let m = t_values.len();
    let design = DMatrix::from_fn(m, 4, |r, c| t_values[r].powi(c as i32));
    let rhs = DVector::from_column_slice(&volumes);
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| CapError::SolverFailure(format!("Steiner fit: {e}")))?;
    let fit_residual = (&design * &coef - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    let mut coefficients = [0.0; 4];
    let mut expected = [0.0; 4];
    let mut errs = [0.0; 4];
    let binom = [1.0, 3.0, 3.0, 1.0];
    for k in 0..4 {
        coefficients[k] = coef[k];
        expected[k] = binom[k] * quermass_of_field(grid, h, k)?;
        errs[k] = rel_err(coefficients[k], expected[k]);
    }
    Ok(SteinerReport {
        t_values: t_values.to_vec(),
        volumes,
        coefficients,
        expected,
        rel_err: errs,
        fit_residual,
    })
}

/// Largest relative deviation of `V` over the six argument orders.
pub fn symmetry_residual(
    grid: &CapGrid,
    f1: &ScalarField,
    f2: &ScalarField,
    f3: &ScalarField,
) -> Result<f64> {
    check_all(grid, &[f1, f2, f3])?;
    let fields = [f1, f2, f3];
    let a: Vec<Vec<Sym2>> = fields.iter().map(|f| grid.a_values(f.values())).collect();
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let vals: Vec<f64> = perms
        .iter()
        .map(|p| volume_from_tensors(grid, fields[p[0]].values(), &a[p[1]], &a[p[2]]))
        .collect();
    let base = vals[0];
    let dev = vals.iter().map(|v| (v - base).abs()).fold(0.0, f64::max);
    Ok(if base == 0.0 { dev } else { dev / base.abs() })
}
