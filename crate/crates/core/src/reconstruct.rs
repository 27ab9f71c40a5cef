//! Reconstruction of the capillary surface from its support function.
//!
//! The inverse capillary Gauss map is `X(xi) = grad h + h nu`, with
//! `nu = xi - cos(theta) e` the unit normal. Everything extrinsic (mesh
//! volume, contact angle, planarity of the boundary, boundary-curve integrals)
//! is computed from this embedding and serves as an independent check of the
//! intrinsic formulas in [`crate::mixedvol`].

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::capfun::{certify, ell_values, CapillaryBody};
use crate::error::{CapError, Result};
use crate::grid::{CapGrid, ScalarField};
use crate::mixedvol::quermassintegral;
use crate::sum::neumaier;
use crate::tolerance::Tolerances;

/// Triangles with area below this fraction of the squared patch size are degenerate.
pub const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedPatch {
    pub theta: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub positions: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Planarity {
    /// Largest `|x_3|` on the boundary ring.
    pub boundary_max: f64,
    /// Smallest `x_3` over interior nodes.
    pub interior_min_height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSummary {
    pub theta: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub contact_angle_residual: f64,
    pub planarity: Planarity,
    pub enclosed_volume: f64,
    pub quermass_volume: f64,
    pub volume_rel_diff: f64,
    pub normal_deviation: f64,
    pub min_principal_radius: f64,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn triangulate(n_rho: usize, n_phi: usize) -> Vec<[usize; 3]> {
    let idx = |i: usize, j: usize| i * n_phi + (j % n_phi);
    let mut tris = Vec::with_capacity(2 * n_rho * n_phi);
    for j in 1..n_phi - 1 {
        tris.push([idx(0, 0), idx(0, j), idx(0, j + 1)]);
    }
    for i in 0..n_rho {
        for j in 0..n_phi {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    tris
}

pub(crate) fn embed_field(grid: &CapGrid, h: &ScalarField) -> Result<EmbeddedPatch> {
    let grad = grid.surface_gradient(h)?;
    let n = grid.node_count();
    let mut positions = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for k in 0..n {
        let nu = grid.normal(k);
        let (er, ep) = grid.frame(k);
        let [gr, gp] = grad.get(k);
        let hv = h.values()[k];
        positions.push(std::array::from_fn(|c| {
            gr * er[c] + gp * ep[c] + hv * nu[c]
        }));
        normals.push(nu);
    }
    Ok(EmbeddedPatch {
        theta: grid.theta(),
        n_rho: grid.n_rho(),
        n_phi: grid.n_phi(),
        positions,
        normals,
        triangles: triangulate(grid.n_rho(), grid.n_phi()),
        boundary: grid.boundary_index().to_vec(),
    })
}

pub fn embed(grid: &CapGrid, body: &CapillaryBody) -> Result<EmbeddedPatch> {
    embed_field(grid, body.h())
}

/// `max |<nu, e> + cos(theta)|` over the boundary ring, with `e = (0, 0, -1)`.
pub fn contact_angle_residual(patch: &EmbeddedPatch) -> f64 {
    let c = patch.theta.cos();
    patch
        .boundary
        .iter()
        .map(|&k| (-patch.normals[k][2] + c).abs())
        .fold(0.0, f64::max)
}

pub fn planarity_residual(patch: &EmbeddedPatch) -> Planarity {
    let boundary_max = patch
        .boundary
        .iter()
        .map(|&k| patch.positions[k][2].abs())
        .fold(0.0, f64::max);
    let first_boundary = patch.n_rho * patch.n_phi;
    let interior_min_height = patch.positions[..first_boundary]
        .iter()
        .map(|p| p[2])
        .fold(f64::INFINITY, f64::min);
    Planarity {
        boundary_max,
        interior_min_height,
    }
}

fn patch_scale(patch: &EmbeddedPatch) -> f64 {
    patch.positions.iter().map(|&p| norm(p)).fold(0.0, f64::max)
}

/// Volume between the surface and the boundary plane by the divergence
/// theorem; the flat bottom face contributes nothing.
pub fn enclosed_volume(patch: &EmbeddedPatch) -> Result<f64> {
    let scale = patch_scale(patch);
    let p = &patch.positions;
    let mut degenerate = 0;
    let vol = neumaier(patch.triangles.iter().map(|t| {
        let (a, b, c) = (p[t[0]], p[t[1]], p[t[2]]);
        if norm(cross(sub(b, a), sub(c, a))) <= 2.0 * DEGENERATE_AREA * scale * scale {
            degenerate += 1;
        }
        dot(a, cross(b, c))
    })) / 6.0;
    if degenerate > 0 {
        return Err(CapError::DegenerateTriangles(degenerate));
    }
    Ok(vol)
}

/// Largest distance between `nu` and the area-weighted mean of adjacent face normals.
pub fn vertex_normal_deviation(patch: &EmbeddedPatch) -> f64 {
    let mut acc = vec![[0.0; 3]; patch.positions.len()];
    let p = &patch.positions;
    for t in &patch.triangles {
        let n = cross(sub(p[t[1]], p[t[0]]), sub(p[t[2]], p[t[0]]));
        for &v in t {
            for c in 0..3 {
                acc[v][c] += n[c];
            }
        }
    }
    acc.iter()
        .zip(&patch.normals)
        .map(|(a, nu)| {
            let l = norm(*a);
            if l == 0.0 {
                return 2.0;
            }
            norm(sub([a[0] / l, a[1] / l, a[2] / l], *nu))
        })
        .fold(0.0, f64::max)
}

/// Principal radii of the surface: eigenvalues of `A[h]`, ascending.
pub fn principal_radii(grid: &CapGrid, body: &CapillaryBody) -> Result<(ScalarField, ScalarField)> {
    let a = grid.a_of(body.h())?;
    let (lo, hi): (Vec<f64>, Vec<f64>) = a.values().iter().map(|t| t.eigenvalues()).unzip();
    Ok((ScalarField::from_vec(lo), ScalarField::from_vec(hi)))
}

/// Derivatives of the boundary curve `phi -> (x, y)` by Fourier collocation.
fn ring_derivatives(
    grid: &CapGrid,
    patch: &EmbeddedPatch,
) -> (Vec<[f64; 2]>, Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let np = grid.n_phi();
    let ring: Vec<[f64; 2]> = patch
        .boundary
        .iter()
        .map(|&k| [patch.positions[k][0], patch.positions[k][1]])
        .collect();
    let apply = |m: &[f64], c: usize| -> Vec<f64> {
        (0..np)
            .map(|j| (0..np).map(|k| m[j * np + k] * ring[k][c]).sum())
            .collect()
    };
    let (dx, dy) = (apply(grid.fourier_d1(), 0), apply(grid.fourier_d1(), 1));
    let (ddx, ddy) = (apply(grid.fourier_d2(), 0), apply(grid.fourier_d2(), 1));
    let d1 = dx.into_iter().zip(dy).map(|(a, b)| [a, b]).collect();
    let d2 = ddx.into_iter().zip(ddy).map(|(a, b)| [a, b]).collect();
    (ring, d1, d2)
}

/// Length of the boundary curve.
pub fn boundary_length(grid: &CapGrid, patch: &EmbeddedPatch) -> f64 {
    let (_, d1, _) = ring_derivatives(grid, patch);
    neumaier(d1.iter().map(|d| d[0].hypot(d[1]))) * grid.dphi()
}

/// Area enclosed by the boundary curve in the plane.
pub fn boundary_area(grid: &CapGrid, patch: &EmbeddedPatch) -> f64 {
    let (ring, d1, _) = ring_derivatives(grid, patch);
    0.5 * neumaier(ring.iter().zip(&d1).map(|(p, d)| p[0] * d[1] - p[1] * d[0])) * grid.dphi()
}

/// Total signed curvature of the boundary curve, counterclockwise positive.
pub fn boundary_total_curvature(grid: &CapGrid, patch: &EmbeddedPatch) -> f64 {
    let (_, d1, d2) = ring_derivatives(grid, patch);
    neumaier(
        d1.iter()
            .zip(&d2)
            .map(|(a, b)| (a[0] * b[1] - a[1] * b[0]) / (a[0] * a[0] + a[1] * a[1])),
    ) * grid.dphi()
}

/// `Vq_{k+1}` from the surface and boundary-curve integrals, `k` in `1..=2`:
/// `(1/3) (int H_k dA - (cos t sin^k t / 2) int H_{k-1} ds)`.
/// The surface integral is pulled back to the cap with `dA = det A[h] dsigma`.
pub fn boundary_form_quermass(grid: &CapGrid, body: &CapillaryBody, k: usize) -> Result<f64> {
    if !(1..=2).contains(&k) {
        return Err(CapError::IndexOutOfRange { index: k, max: 2 });
    }
    let a = grid.a_of(body.h())?;
    let patch = embed(grid, body)?;
    let (s, c) = grid.theta().sin_cos();
    let surface = if k == 1 {
        neumaier(
            a.values()
                .iter()
                .zip(grid.quad_weights())
                .map(|(t, w)| 0.5 * t.trace() * w),
        )
    } else {
        neumaier(grid.quad_weights().iter().copied())
    };
    let curve = if k == 1 {
        boundary_length(grid, &patch)
    } else {
        boundary_total_curvature(grid, &patch)
    };
    Ok((surface - c * s.powi(k as i32) / 2.0 * curve) / 3.0)
}

/// `Vq_1 = (1/3) (|surface| - cos(theta) |flat face|)`.
pub fn capillary_area_quermass(grid: &CapGrid, body: &CapillaryBody) -> Result<f64> {
    let a = grid.a_of(body.h())?;
    let patch = embed(grid, body)?;
    let area = neumaier(
        a.values()
            .iter()
            .zip(grid.quad_weights())
            .map(|(t, w)| t.det() * w),
    );
    Ok((area - grid.theta().cos() * boundary_area(grid, &patch)) / 3.0)
}

#[derive(Clone, Debug)]
pub struct ParallelBody {
    pub body: CapillaryBody,
    /// Largest deviation of `X_t - X - t xi` over nodes.
    pub displacement_error: f64,
}

/// Body with support `h + t l`, checked against the pointwise displacement
/// `X_t = X + t (nu + cos(theta) e)`.
pub fn parallel_body(
    grid: &Arc<CapGrid>,
    body: &CapillaryBody,
    t: f64,
    tol: &Tolerances,
) -> Result<ParallelBody> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(CapError::InvalidParameter(format!(
            "parallel distance must be positive, got {t}"
        )));
    }
    let ht = body.h().combine(1.0, &ell_values(grid), t);
    let moved = certify(grid, &ht, tol).map_err(|r| CapError::Precondition(r.to_string()))?;
    let p0 = embed(grid, body)?;
    let p1 = embed(grid, &moved)?;
    let displacement_error = (0..grid.node_count())
        .map(|k| {
            let xi = grid.xi(k);
            let expect: [f64; 3] = std::array::from_fn(|c| p0.positions[k][c] + t * xi[c]);
            norm(sub(p1.positions[k], expect))
        })
        .fold(0.0, f64::max);
    Ok(ParallelBody {
        body: moved.with_provenance(body.provenance().clone()),
        displacement_error,
    })
}

pub fn summarize(grid: &CapGrid, body: &CapillaryBody) -> Result<PatchSummary> {
    let patch = embed(grid, body)?;
    let enclosed = enclosed_volume(&patch)?;
    let vq0 = quermassintegral(grid, body, 0)?;
    let (lo, _) = principal_radii(grid, body)?;
    Ok(PatchSummary {
        theta: grid.theta(),
        n_rho: grid.n_rho(),
        n_phi: grid.n_phi(),
        contact_angle_residual: contact_angle_residual(&patch),
        planarity: planarity_residual(&patch),
        enclosed_volume: enclosed,
        quermass_volume: vq0,
        volume_rel_diff: (enclosed - vq0).abs() / vq0.abs(),
        normal_deviation: vertex_normal_deviation(&patch),
        min_principal_radius: lo.min(),
    })
}

/// Writes vertices, normals and faces as ASCII OBJ with 17 significant digits.
pub fn export_mesh(patch: &EmbeddedPatch, path: &Path) -> Result<()> {
    std::fs::write(path, to_obj(patch))?;
    Ok(())
}

pub fn to_obj(patch: &EmbeddedPatch) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# capillary patch theta={:.16e} grid={}x{}",
        patch.theta, patch.n_rho, patch.n_phi
    );
    for p in &patch.positions {
        let _ = writeln!(s, "v {:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
    }
    for n in &patch.normals {
        let _ = writeln!(s, "vn {:.16e} {:.16e} {:.16e}", n[0], n[1], n[2]);
    }
    for t in &patch.triangles {
        let _ = writeln!(
            s,
            "f {0}//{0} {1}//{1} {2}//{2}",
            t[0] + 1,
            t[1] + 1,
            t[2] + 1
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjMesh {
    pub positions: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

pub fn import_mesh(path: &Path) -> Result<ObjMesh> {
    parse_obj(&std::fs::read_to_string(path)?)
}

pub fn parse_obj(text: &str) -> Result<ObjMesh> {
    let mut mesh = ObjMesh {
        positions: Vec::new(),
        normals: Vec::new(),
        triangles: Vec::new(),
    };
    let triple = |parts: &[&str], line: usize| -> Result<[f64; 3]> {
        if parts.len() != 3 {
            return Err(CapError::Obj(format!(
                "line {line}: expected three coordinates"
            )));
        }
        let mut out = [0.0; 3];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p
                .parse()
                .map_err(|_| CapError::Obj(format!("line {line}: bad number '{p}'")))?;
        }
        Ok(out)
    };
    for (ln, line) in text.lines().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.first() {
            Some(&"v") => mesh.positions.push(triple(&parts[1..], ln + 1)?),
            Some(&"vn") => mesh.normals.push(triple(&parts[1..], ln + 1)?),
            Some(&"f") => {
                if parts.len() != 4 {
                    return Err(CapError::Obj(format!(
                        "line {}: only triangles are supported",
                        ln + 1
                    )));
                }
                let mut t = [0usize; 3];
                for (o, p) in t.iter_mut().zip(&parts[1..]) {
                    let v = p.split('/').next().unwrap_or("");
                    let k: usize = v
                        .parse()
                        .map_err(|_| CapError::Obj(format!("line {}: bad index '{p}'", ln + 1)))?;
                    if k == 0 || k > mesh.positions.len() {
                        return Err(CapError::Obj(format!(
                            "line {}: index {k} out of range",
                            ln + 1
                        )));
                    }
                    *o = k - 1;
                }
                mesh.triangles.push(t);
            }
            _ => {}
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capfun::{ell, minkowski_combine, random_body};
    use crate::grid::{b_theta, build_grid};
    use std::f64::consts::PI;

    fn grid(theta: f64, n: usize) -> Arc<CapGrid> {
        Arc::new(build_grid(theta, n, n).unwrap())
    }

    #[test]
    fn cap_embeds_to_itself() {
        let g = grid(1.1, 16);
        let patch = embed(&g, &ell(&g)).unwrap();
        for (k, p) in patch.positions.iter().enumerate() {
            assert!(norm(sub(*p, g.xi(k))) < 1e-13);
        }
        assert_eq!(contact_angle_residual(&patch), 0.0);
        let pl = planarity_residual(&patch);
        assert!(
            pl.boundary_max < 1e-12 && pl.interior_min_height > 0.0,
            "{pl:?}"
        );
    }

    #[test]
    fn scaled_cap_is_a_sphere() {
        let g = grid(2.3, 16);
        let tol = Tolerances::default();
        let body = minkowski_combine(&[&ell(&g)], &[1.7], &tol).unwrap();
        let patch = embed(&g, &body).unwrap();
        let centre = [0.0, 0.0, -1.7 * 2.3f64.cos()];
        for p in &patch.positions {
            assert!((norm(sub(*p, centre)) - 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn translation_moves_positions() {
        let g = grid(0.9, 16);
        let tol = Tolerances::default();
        let body = random_body(&g, 3, 1.0, 1.0, 3, &tol).unwrap();
        let moved = body.translated([0.3, -0.2], &tol).unwrap();
        let (p0, p1) = (embed(&g, &body).unwrap(), embed(&g, &moved).unwrap());
        for (a, b) in p0.positions.iter().zip(&p1.positions) {
            assert!(norm(sub(*b, [a[0] + 0.3, a[1] - 0.2, a[2]])) < 1e-12);
        }
    }

    #[test]
    fn mesh_volume_of_hemisphere() {
        let g = grid(PI / 2.0, 64);
        let v = enclosed_volume(&embed(&g, &ell(&g)).unwrap()).unwrap();
        assert!((v - 2.0 * PI / 3.0).abs() / (2.0 * PI / 3.0) < 2e-3, "{v}");
    }

    #[test]
    fn boundary_forms_for_cap() {
        for theta in [0.6, PI / 2.0, 2.4] {
            let g = grid(theta, 16);
            let cap = ell(&g);
            for k in 1..=2 {
                let v = boundary_form_quermass(&g, &cap, k).unwrap();
                assert!(
                    (v - b_theta(theta)).abs() < 1e-10 * b_theta(theta),
                    "{theta} {k} {v}"
                );
            }
            let v1 = capillary_area_quermass(&g, &cap).unwrap();
            assert!((v1 - b_theta(theta)).abs() < 1e-10 * b_theta(theta));
        }
        let g = grid(1.0, 8);
        assert!(matches!(
            boundary_form_quermass(&g, &ell(&g), 3),
            Err(CapError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn parallel_displacement_is_exact() {
        let g = grid(2.0, 16);
        let tol = Tolerances::default();
        let body = random_body(&g, 9, 1.0, 1.0, 3, &tol).unwrap();
        let p = parallel_body(&g, &body, 0.5, &tol).unwrap();
        assert!(p.displacement_error < 1e-13, "{}", p.displacement_error);
        let cap = parallel_body(&g, &ell(&g), 1.0, &tol).unwrap();
        assert_eq!(cap.body.h(), &ell_values(&g).scaled(2.0));
    }

    #[test]
    fn obj_round_trip() {
        let g = grid(1.3, 8);
        let tol = Tolerances::default();
        let body = random_body(&g, 1, 1.0, 1.0, 3, &tol).unwrap();
        let patch = embed(&g, &body).unwrap();
        let mesh = parse_obj(&to_obj(&patch)).unwrap();
        assert_eq!(mesh.positions.len(), 8 * 8 + 8);
        assert_eq!(mesh.positions, patch.positions);
        assert_eq!(mesh.normals, patch.normals);
        assert_eq!(mesh.triangles, patch.triangles);
    }
}
