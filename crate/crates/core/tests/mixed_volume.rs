use std::f64::consts::PI;
use std::sync::Arc;

use capaf::capfun::{
    ell, ell_values, horizontal_linear, minkowski_combine, random_body, random_capillary,
};
use capaf::mixedvol::{
    minkowski_identity_residual, mixed_volume, quermassintegral, rel_err, steiner_check,
    symmetry_residual, QuermassReport,
};
use capaf::{b_theta, build_grid, CapGrid, Tolerances};
use proptest::prelude::*;

/// Below this, residuals are treated as roundoff and excluded from order fits.
const ROUNDOFF: f64 = 1e-11;
const MIN_ORDER: f64 = 3.5;

fn grid(theta: f64, n: usize) -> Arc<CapGrid> {
    Arc::new(build_grid(theta, n, n).unwrap())
}

fn observed_order(coarse: f64, fine: f64) -> Option<f64> {
    (fine > ROUNDOFF).then(|| (coarse / fine).log2())
}

#[test]
fn solid_cap_volume() {
    for theta in [PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, 5.0 * PI / 6.0] {
        let g = grid(theta, 32);
        let l = ell_values(&g);
        let v = mixed_volume(&g, &l, &[&l, &l]).unwrap();
        let oracle = PI * (1.0 - theta.cos()).powi(2) * (2.0 + theta.cos()) / 3.0;
        assert!(rel_err(v, oracle) < 1e-10, "theta {theta}: {v} vs {oracle}");
    }
    let g = grid(PI / 2.0, 16);
    let l = ell_values(&g);
    assert!((mixed_volume(&g, &l, &[&l, &l]).unwrap() - 2.0 * PI / 3.0).abs() < 1e-12);
}

#[test]
fn scaled_cap_quermassintegrals() {
    let tol = Tolerances::default();
    for theta in [PI / 3.0, 2.5] {
        let g = grid(theta, 24);
        let cap = ell(&g);
        for r in [0.5, 1.0, 2.0] {
            let body = minkowski_combine(&[&cap], &[r], &tol).unwrap();
            for j in 0..=3 {
                let v = quermassintegral(&g, &body, j).unwrap();
                let expected = r.powi(3 - j as i32) * b_theta(theta);
                assert!(rel_err(v, expected) < 1e-10, "theta {theta} r {r} j {j}");
            }
        }
    }
}

#[test]
fn last_quermassintegral_is_body_independent() {
    let tol = Tolerances::default();
    for theta in [0.7, 2.4] {
        let g = grid(theta, 24);
        for seed in 0..5 {
            let body = random_body(&g, seed, 1.0, 1.0, 3, &tol).unwrap();
            let report = QuermassReport::compute(&g, &body).unwrap();
            let last = report.rows.iter().find(|r| r.k == 3).unwrap();
            assert!(rel_err(last.value, b_theta(theta)) < 1e-10);
        }
    }
}

#[test]
fn translation_invariance() {
    let tol = Tolerances::default();
    let g = grid(2.2, 24);
    let a = random_body(&g, 1, 1.0, 1.0, 3, &tol).unwrap();
    let b = random_body(&g, 2, 1.0, 1.0, 3, &tol).unwrap();
    let c = random_body(&g, 3, 1.0, 1.0, 3, &tol).unwrap();
    let lin = horizontal_linear(&g, [0.6, -0.8, 0.0]).unwrap();
    let shifted = a.h().combine(1.0, lin.values(), 0.4);
    let v = mixed_volume(&g, a.h(), &[b.h(), c.h()]).unwrap();
    for w in [
        mixed_volume(&g, &shifted, &[b.h(), c.h()]).unwrap(),
        mixed_volume(&g, b.h(), &[&shifted, c.h()]).unwrap(),
        mixed_volume(&g, c.h(), &[b.h(), &shifted]).unwrap(),
    ] {
        assert!(rel_err(w, v) < 1e-6, "{w} vs {v}");
    }
}

#[test]
fn wrong_argument_count_is_rejected() {
    let g = grid(1.0, 16);
    let l = ell_values(&g);
    assert!(mixed_volume(&g, &l, &[&l]).is_err());
    assert!(mixed_volume(&g, &l, &[&l, &l, &l]).is_err());
    assert!(quermassintegral(&g, &ell(&g), 4).is_err());
}

#[test]
fn identities_converge() {
    let tol = Tolerances::default();
    for theta in [0.5, PI / 2.0, 2.2, 2.9] {
        let mut prev: Option<[f64; 4]> = None;
        for n in [16, 32, 64] {
            let g = grid(theta, n);
            let b1 = random_body(&g, 11, 1.0, 1.0, 3, &tol).unwrap();
            let b2 = random_body(&g, 12, 1.0, 1.0, 3, &tol).unwrap();
            let b3 = random_body(&g, 13, 1.0, 1.0, 3, &tol).unwrap();
            let now = [
                minkowski_identity_residual(&g, b1.support(), 1).unwrap(),
                minkowski_identity_residual(&g, b1.support(), 2).unwrap(),
                symmetry_residual(&g, b1.h(), b2.h(), b3.h()).unwrap(),
                steiner_check(&g, &b1, &[0.25, 0.5, 1.0, 1.5, 2.0])
                    .unwrap()
                    .max_rel_err(),
            ];
            if let Some(p) = prev {
                for (c, f) in p.iter().zip(&now) {
                    if let Some(order) = observed_order(*c, *f) {
                        assert!(order >= MIN_ORDER, "theta {theta} n {n}: {c:e} -> {f:e}");
                    }
                }
            }
            prev = Some(now);
        }
        assert!(
            prev.unwrap().iter().all(|&r| r < 1e-8),
            "theta {theta}: {prev:?}"
        );
    }
}

#[test]
fn minkowski_identity_holds_for_nonconvex_capillary_functions() {
    for seed in 0..4 {
        let res: Vec<[f64; 2]> = [24, 48]
            .iter()
            .map(|&n| {
                let g = grid(2.0, n);
                let f = random_capillary(&g, seed, 3).unwrap();
                [1, 2].map(|k| minkowski_identity_residual(&g, &f, k).unwrap())
            })
            .collect();
        for k in 0..2 {
            let (c, f) = (res[0][k], res[1][k]);
            assert!(f < 1e-5, "seed {seed}: {f:e}");
            if let Some(order) = observed_order(c, f) {
                assert!(order >= MIN_ORDER, "seed {seed}: {c:e} -> {f:e}");
            }
        }
    }
}

fn fields(g: &Arc<CapGrid>, seeds: [u64; 3]) -> Vec<capaf::ScalarField> {
    seeds
        .iter()
        .map(|&s| random_capillary(g, s, 2).unwrap().values().clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn multilinear_in_every_slot(
        theta in 0.3f64..2.9,
        seed in 0u64..1000,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        slot in 0usize..3,
    ) {
        let g = grid(theta, 12);
        let f = fields(&g, [seed, seed + 1, seed + 2]);
        let extra = random_capillary(&g, seed + 3, 2).unwrap().values().clone();
        let mixed = f[slot].combine(a, &extra, b);
        let eval = |x: &capaf::ScalarField| {
            let mut args: Vec<&capaf::ScalarField> = f.iter().collect();
            args[slot] = x;
            mixed_volume(&g, args[0], &[args[1], args[2]]).unwrap()
        };
        let lhs = eval(&mixed);
        let rhs = a * eval(&f[slot]) + b * eval(&extra);
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        prop_assert!((lhs - rhs).abs() < 1e-10 * scale, "{} vs {}", lhs, rhs);
    }
}
