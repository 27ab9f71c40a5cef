//! Alexandrov-Fenchel checks: the two-function inequality, its equality
//! family, and the chained inequalities between mixed volumes.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::WeightedSpace;
use crate::capfun::{ell_values, CapillaryBody, CapillaryField};
use crate::error::{CapError, Result};
use crate::grid::{b_theta, CapGrid, ScalarField, Sym2};
use crate::mixedvol::volume_from_tensors;
use crate::tolerance::Tolerances;

/// Condition number above which the equality basis counts as degenerate.
pub const MAX_CONDITION: f64 = 1e10;
/// Relative roundoff floor added to every error estimate.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AfStatus {
    #[serde(rename = "holds")]
    Holds,
    #[serde(rename = "equality within resolution")]
    EqualityWithinResolution,
    #[serde(rename = "violated")]
    Violated,
}

impl AfStatus {
    fn classify(gap: f64, estimate: f64, factor: f64) -> Self {
        if gap.abs() <= factor * estimate {
            AfStatus::EqualityWithinResolution
        } else if gap > 0.0 {
            AfStatus::Holds
        } else {
            AfStatus::Violated
        }
    }
}

impl std::fmt::Display for AfStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AfStatus::Holds => "holds",
            AfStatus::EqualityWithinResolution => "equality within resolution",
            AfStatus::Violated => "violated",
        })
    }
}

/// Least-squares fit `f ~ a f1 + a_1 <xi, E_1> + a_2 <xi, E_2>` in the omega norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub a: f64,
    pub linear: [f64; 2],
    pub residual_norm: f64,
    /// `residual_norm / |f|_omega`.
    pub relative_residual: f64,
    pub condition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AfReport {
    /// `V(f, f1, f2)^2`.
    pub lhs: f64,
    /// `V(f, f, f2) V(f1, f1, f2)`.
    pub rhs: f64,
    pub gap: f64,
    pub relative_gap: f64,
    /// The same three quantities through `<., A .>_omega`.
    pub form_lhs: f64,
    pub form_rhs: f64,
    pub form_gap: f64,
    /// `max(|lhs - form_lhs| / |lhs|, |rhs - form_rhs| / |rhs|)`.
    pub form_disagreement: f64,
    pub error_estimate: f64,
    pub status: AfStatus,
    /// Within the allowed negative slack `-af_relative |rhs|`.
    pub within_budget: bool,
    pub decomposition: Option<Decomposition>,
}

fn capillary(grid: &Arc<CapGrid>, f: &ScalarField, tol: &Tolerances, what: &str) -> Result<()> {
    CapillaryField::checked(grid, f.clone(), tol)
        .map(|_| ())
        .map_err(|e| CapError::Precondition(format!("{what} is not capillary: {e}")))
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Checks `V(f, f1, f2)^2 >= V(f, f, f2) V(f1, f1, f2)` with `f2` the reference of `space`.
pub fn af_check(
    space: &WeightedSpace,
    f: &ScalarField,
    f1: &ScalarField,
    tol: &Tolerances,
) -> Result<AfReport> {
    let grid = space.grid();
    capillary(grid, f, tol, "f")?;
    capillary(grid, f1, tol, "f1")?;
    let a1 = grid.a_values(f1.values());
    let min_eig = a1
        .iter()
        .map(Sym2::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let floor = tol.convexity_floor * f1.max_abs();
    if min_eig < floor {
        return Err(CapError::Precondition(format!(
            "f1 is not convex (min eigenvalue {min_eig:.3e})"
        )));
    }

    let v = |a: &ScalarField, b: &ScalarField| space.mixed_volume(a.values(), b.values());
    let v_ff1 = v(f, f1);
    let v_f1f = v(f1, f);
    let v_ff = v(f, f);
    let v_11 = v(f1, f1);
    let lhs = v_ff1 * v_ff1;
    let rhs = v_ff * v_11;
    let gap = lhs - rhs;

    let form = |a: &ScalarField, b: &ScalarField| space.form(a.values(), b.values());
    let form_lhs = form(f, f1).powi(2);
    let form_rhs = form(f, f) * form(f1, f1);
    let form_disagreement = rel(lhs, form_lhs).max(rel(rhs, form_rhs));

    let error_estimate = 2.0 * v_ff1.abs() * (v_ff1 - v_f1f).abs()
        + (lhs - form_lhs).abs()
        + (rhs - form_rhs).abs()
        + ROUNDOFF_FLOOR * (lhs.abs() + rhs.abs());
    let status = AfStatus::classify(gap, error_estimate, tol.equality_factor);
    let decomposition = match status {
        AfStatus::EqualityWithinResolution => Some(equality_decompose(space, f, f1)?),
        _ => None,
    };
    Ok(AfReport {
        lhs,
        rhs,
        gap,
        relative_gap: if rhs == 0.0 { gap } else { gap / rhs.abs() },
        form_lhs,
        form_rhs,
        form_gap: form_lhs - form_rhs,
        form_disagreement,
        error_estimate,
        status,
        within_budget: gap >= -tol.af_relative * rhs.abs(),
        decomposition,
    })
}

/// Projects `f` onto `span{f1, <xi, E_1>, <xi, E_2>}` in the omega inner product.
pub fn equality_decompose(
    space: &WeightedSpace,
    f: &ScalarField,
    f1: &ScalarField,
) -> Result<Decomposition> {
    let grid = space.grid();
    grid.check(f)?;
    grid.check(f1)?;
    let basis = [
        f1.values().to_vec(),
        ScalarField::from_fn(grid, |r, p| r.sin() * p.cos()).into_values(),
        ScalarField::from_fn(grid, |r, p| r.sin() * p.sin()).into_values(),
    ];
    let gram = Matrix3::from_fn(|i, j| space.inner(&basis[i], &basis[j]));
    let scale = Vector3::from_fn(|i, _| gram[(i, i)].max(f64::MIN_POSITIVE).sqrt());
    let normalized = Matrix3::from_fn(|i, j| gram[(i, j)] / (scale[i] * scale[j]));
    let sv = normalized.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(CapError::IllConditioned(condition));
    }
    let rhs = Vector3::from_fn(|i, _| space.inner(&basis[i], f.values()) / scale[i]);
    let y = normalized
        .lu()
        .solve(&rhs)
        .ok_or(CapError::IllConditioned(condition))?;
    let c = Vector3::from_fn(|i, _| y[i] / scale[i]);
    let residual: Vec<f64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v - c[0] * basis[0][k] - c[1] * basis[1][k] - c[2] * basis[2][k])
        .collect();
    let residual_norm = space.norm(&residual);
    let fnorm = space.norm(f.values());
    Ok(Decomposition {
        a: c[0],
        linear: [c[1], c[2]],
        residual_norm,
        relative_residual: if fnorm == 0.0 {
            residual_norm
        } else {
            residual_norm / fnorm
        },
        condition,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTriple {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    /// `(k - i) ln V_(j)`.
    pub lhs_log: f64,
    /// `(k - j) ln V_(i) + (j - i) ln V_(k)`.
    pub rhs_log: f64,
    pub slack: f64,
    pub error_estimate: f64,
    pub status: AfStatus,
}

/// `V_k / b >= (V_l / b)^((3 - k) / (3 - l))` for the quermassintegrals of `body0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjecturePair {
    pub l: usize,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `ln(lhs) - ln(rhs)`.
    pub slack: f64,
    pub error_estimate: f64,
    pub status: AfStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub theta: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub m: usize,
    pub b_theta: f64,
    /// `V_(i) = V(h1 x i, h0 x (m - i), refs)` for `i = 0..=m`.
    pub volumes: Vec<f64>,
    pub volume_errors: Vec<f64>,
    pub triples: Vec<ChainTriple>,
    /// Quermassintegrals `V_0..V_3` of `body0`.
    pub quermass: Vec<f64>,
    pub quermass_errors: Vec<f64>,
    pub conjecture: Vec<ConjecturePair>,
    /// Most negative slack over triples and pairs.
    pub min_slack: f64,
}

/// Mixed volume of three slots and the disagreement with the reversed slot order.
fn three_slot(grid: &CapGrid, slots: [&ScalarField; 3], a: [&[Sym2]; 3]) -> (f64, f64) {
    let v = volume_from_tensors(grid, slots[0].values(), a[1], a[2]);
    let w = volume_from_tensors(grid, slots[2].values(), a[1], a[0]);
    (v, (v - w).abs() + ROUNDOFF_FLOOR * v.abs())
}

/// Evaluates every chained inequality between `V_(i)`, `V_(j)`, `V_(k)`
/// for `0 <= i < j < k <= m`, plus the normalized quermassintegral
/// inequalities for `body0`. Missing reference bodies default to the unit cap.
pub fn af_chain_check(
    grid: &Arc<CapGrid>,
    body0: &CapillaryBody,
    body1: &CapillaryBody,
    m: usize,
    refs: &[&CapillaryBody],
    tol: &Tolerances,
) -> Result<ChainReport> {
    if !(2..=3).contains(&m) {
        return Err(CapError::IndexOutOfRange { index: m, max: 3 });
    }
    if refs.len() > 3 - m {
        return Err(CapError::LengthMismatch {
            bodies: refs.len(),
            lambdas: 3 - m,
        });
    }
    for b in [body0, body1].into_iter().chain(refs.iter().copied()) {
        if !b.grid().same_layout(grid) {
            return Err(CapError::GridMismatch);
        }
    }
    let ell = ell_values(grid);
    let mut ref_fields: Vec<&ScalarField> = refs.iter().map(|b| b.h()).collect();
    while ref_fields.len() < 3 - m {
        ref_fields.push(&ell);
    }
    let h0 = body0.h();
    let h1 = body1.h();
    let a0 = grid.a_values(h0.values());
    let a1 = grid.a_values(h1.values());
    let aref: Vec<Vec<Sym2>> = ref_fields
        .iter()
        .map(|f| grid.a_values(f.values()))
        .collect();

    let mut volumes = Vec::with_capacity(m + 1);
    let mut volume_errors = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let mut slots: Vec<(&ScalarField, &[Sym2])> = Vec::with_capacity(3);
        slots.extend(std::iter::repeat_n((h1, a1.as_slice()), i));
        slots.extend(std::iter::repeat_n((h0, a0.as_slice()), m - i));
        slots.extend(
            ref_fields
                .iter()
                .zip(&aref)
                .map(|(f, a)| (*f, a.as_slice())),
        );
        let (v, e) = three_slot(
            grid,
            [slots[0].0, slots[1].0, slots[2].0],
            [slots[0].1, slots[1].1, slots[2].1],
        );
        if !(v > 0.0) {
            return Err(CapError::Precondition(format!(
                "V_({i}) = {v:.3e} is not positive"
            )));
        }
        volumes.push(v);
        volume_errors.push(e);
    }

    let mut triples = Vec::new();
    for i in 0..=m {
        for j in i + 1..=m {
            for k in j + 1..=m {
                let (fi, fj, fk) = ((j - i) as f64, (k - i) as f64, (k - j) as f64);
                let lhs_log = fj * volumes[j].ln();
                let rhs_log = fk * volumes[i].ln() + fi * volumes[k].ln();
                let error_estimate = fj * volume_errors[j] / volumes[j]
                    + fk * volume_errors[i] / volumes[i]
                    + fi * volume_errors[k] / volumes[k];
                let slack = lhs_log - rhs_log;
                triples.push(ChainTriple {
                    i,
                    j,
                    k,
                    lhs_log,
                    rhs_log,
                    slack,
                    error_estimate,
                    status: AfStatus::classify(slack, error_estimate, tol.equality_factor),
                });
            }
        }
    }

    let b = b_theta(grid.theta());
    let a_ell = grid.a_values(ell.values());
    let mut quermass = Vec::with_capacity(4);
    let mut quermass_errors = Vec::with_capacity(4);
    for k in 0..=3 {
        let slots: Vec<(&ScalarField, &[Sym2])> = std::iter::repeat_n((&ell, a_ell.as_slice()), k)
            .chain(std::iter::repeat_n((h0, a0.as_slice()), 3 - k))
            .collect();
        let (v, e) = three_slot(
            grid,
            [slots[0].0, slots[1].0, slots[2].0],
            [slots[0].1, slots[1].1, slots[2].1],
        );
        quermass.push(v);
        quermass_errors.push(e);
    }
    let mut conjecture = Vec::new();
    for l in 0..3 {
        for k in l + 1..3 {
            let p = (3 - k) as f64 / (3 - l) as f64;
            let lhs = quermass[k] / b;
            let base = quermass[l] / b;
            if !(lhs > 0.0 && base > 0.0) {
                return Err(CapError::Precondition(format!(
                    "quermassintegrals {l}, {k} not positive"
                )));
            }
            let rhs = base.powf(p);
            let slack = lhs.ln() - rhs.ln();
            let error_estimate =
                quermass_errors[k] / quermass[k] + p * quermass_errors[l] / quermass[l];
            conjecture.push(ConjecturePair {
                l,
                k,
                lhs,
                rhs,
                slack,
                error_estimate,
                status: AfStatus::classify(slack, error_estimate, tol.equality_factor),
            });
        }
    }
    let min_slack = triples
        .iter()
        .map(|t| t.slack)
        .chain(conjecture.iter().map(|c| c.slack))
        .fold(f64::INFINITY, f64::min);
    Ok(ChainReport {
        theta: grid.theta(),
        n_rho: grid.n_rho(),
        n_phi: grid.n_phi(),
        m,
        b_theta: b,
        volumes,
        volume_errors,
        triples,
        quermass,
        quermass_errors,
        conjecture,
        min_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capfun::{ell, horizontal_linear, random_body};
    use crate::grid::build_grid;

    fn grid(theta: f64) -> Arc<CapGrid> {
        Arc::new(build_grid(theta, 16, 16).unwrap())
    }

    #[test]
    fn equality_family_is_recognized() {
        let g = grid(2.2);
        let tol = Tolerances::default();
        let l = ell_values(&g);
        let space = WeightedSpace::new(&g, &l).unwrap();
        let lin = horizontal_linear(&g, [1.0, 0.0, 0.0]).unwrap();
        let f = l.combine(2.0, lin.values(), 0.3);
        let r = af_check(&space, &f, &l, &tol).unwrap();
        assert!(r.gap.abs() <= 1e-8 * r.rhs.abs(), "{r:?}");
        assert_eq!(r.status, AfStatus::EqualityWithinResolution);
        let d = r.decomposition.unwrap();
        assert!(
            (d.a - 2.0).abs() < 1e-9
                && (d.linear[0] - 0.3).abs() < 1e-9
                && d.linear[1].abs() < 1e-9
        );
        assert!(d.relative_residual < 1e-9);
    }

    #[test]
    fn identical_arguments_give_zero_gap() {
        let g = grid(0.8);
        let tol = Tolerances::default();
        let f1 = random_body(&g, 3, 1.0, 1.0, 3, &tol).unwrap();
        let f2 = random_body(&g, 4, 1.0, 1.0, 3, &tol).unwrap();
        let space = WeightedSpace::new(&g, f2.h()).unwrap();
        let r = af_check(&space, f1.h(), f1.h(), &tol).unwrap();
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn random_triple_satisfies_inequality() {
        let g = grid(2.9);
        let tol = Tolerances::default();
        let f = random_body(&g, 10, 1.0, 1.0, 3, &tol).unwrap();
        let f1 = random_body(&g, 11, 1.0, 1.0, 3, &tol).unwrap();
        let f2 = random_body(&g, 12, 1.0, 1.0, 3, &tol).unwrap();
        let space = WeightedSpace::new(&g, f2.h()).unwrap();
        let r = af_check(&space, f.h(), f1.h(), &tol).unwrap();
        assert!(r.within_budget && r.status == AfStatus::Holds, "{r:?}");
        assert!(r.form_disagreement < 1e-6);
    }

    #[test]
    fn non_capillary_input_is_rejected() {
        let g = grid(1.0);
        let space = WeightedSpace::new(&g, &ell_values(&g)).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let err = af_check(&space, &one, &ell_values(&g), &Tolerances::default()).unwrap_err();
        assert!(matches!(err, CapError::Precondition(_)));
    }

    #[test]
    fn decomposition_of_multiple() {
        let g = grid(1.4);
        let space = WeightedSpace::new(&g, &ell_values(&g)).unwrap();
        let f1 = random_body(&g, 8, 1.0, 1.0, 3, &Tolerances::default()).unwrap();
        let d = equality_decompose(&space, &f1.h().scaled(3.0), f1.h()).unwrap();
        assert!((d.a - 3.0).abs() < 1e-10 && d.relative_residual < 1e-10);
        let lin = ScalarField::from_fn(&g, |r, p| r.sin() * p.cos());
        assert!(matches!(
            equality_decompose(&space, &lin, &lin),
            Err(CapError::IllConditioned(_))
        ));
    }

    #[test]
    fn chain_on_caps_is_equality() {
        let g = grid(2.0);
        let tol = Tolerances::default();
        let cap = ell(&g);
        let big = minkowski(&cap, 2.0, &tol);
        let r = af_chain_check(&g, &big, &cap, 3, &[], &tol).unwrap();
        assert!(
            r.triples
                .iter()
                .all(|t| t.status == AfStatus::EqualityWithinResolution),
            "{r:?}"
        );
        assert!(r
            .conjecture
            .iter()
            .all(|t| t.status == AfStatus::EqualityWithinResolution));
    }

    #[test]
    fn chain_on_random_body_is_strict() {
        let g = grid(2.0);
        let tol = Tolerances::default();
        let body = random_body(&g, 21, 1.0, 1.0, 3, &tol).unwrap();
        let r = af_chain_check(&g, &body, &ell(&g), 3, &[], &tol).unwrap();
        let t = r
            .triples
            .iter()
            .find(|t| (t.i, t.j, t.k) == (0, 1, 2))
            .unwrap();
        assert!(t.slack > 0.0 && t.status == AfStatus::Holds, "{t:?}");
        assert!(r.conjecture.iter().all(|c| c.slack > 0.0));
        assert!(af_chain_check(&g, &body, &body, 4, &[], &tol).is_err());
    }

    fn minkowski(body: &CapillaryBody, r: f64, tol: &Tolerances) -> CapillaryBody {
        crate::capfun::minkowski_combine(&[body], &[r], tol).unwrap()
    }
}
