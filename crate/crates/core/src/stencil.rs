//! Trigonometric interpolation weights on angular nodes.
//!
//! With an odd number `2K+1` of nodes the Lagrange basis
//! `L_i(t) = prod_{j != i} sin((t - t_j)/2) / sin((t_i - t_j)/2)`
//! spans `{1, cos kt, sin kt : k <= K}`. Restrictions of low-degree ambient
//! polynomials to the sphere (for instance `cos(rho)`, `sin(rho)`) are then
//! differentiated and integrated without truncation error.

/// Value, first and second derivative of the basis function `L_i` at `x`.
pub(crate) fn lagrange_derivatives(nodes: &[f64], i: usize, x: f64) -> [f64; 3] {
    let (mut p, mut p1, mut p2) = (1.0, 0.0, 0.0);
    for (j, &tj) in nodes.iter().enumerate() {
        if j == i {
            continue;
        }
        let s = ((nodes[i] - tj) / 2.0).sin();
        let (sn, cs) = ((x - tj) / 2.0).sin_cos();
        let g = sn / s;
        let g1 = 0.5 * cs / s;
        let g2 = -0.25 * sn / s;
        let next = (p * g, p1 * g + p * g1, p2 * g + 2.0 * p1 * g1 + p * g2);
        p = next.0;
        p1 = next.1;
        p2 = next.2;
    }
    [p, p1, p2]
}

/// First- and second-derivative weights at `x` for the given nodes.
pub(crate) fn derivative_weights(nodes: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut d1 = Vec::with_capacity(nodes.len());
    let mut d2 = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        let [_, a, b] = lagrange_derivatives(nodes, i, x);
        d1.push(a);
        d2.push(b);
    }
    (d1, d2)
}

const GAUSS_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

const GAUSS_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Weights `w_i = int_a^b L_i(t) sin(t) dt` by 8-point Gauss-Legendre.
pub(crate) fn sine_moment_weights(nodes: &[f64], a: f64, b: f64) -> Vec<f64> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (0..nodes.len())
        .map(|i| {
            GAUSS_X
                .iter()
                .zip(GAUSS_W.iter())
                .map(|(&x, &w)| {
                    let t = mid + half * x;
                    w * half * lagrange_derivatives(nodes, i, t)[0] * t.sin()
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes() -> Vec<f64> {
        (0..7).map(|k| 0.1 + 0.13 * k as f64).collect()
    }

    #[test]
    fn differentiates_trig_polynomials_exactly() {
        let t = nodes();
        let x = 0.47;
        let (d1, d2) = derivative_weights(&t, x);
        let f = |s: f64| 0.3 + (2.0 * s).cos() - 0.7 * (3.0 * s).sin();
        let df = -2.0 * (2.0 * x).sin() - 2.1 * (3.0 * x).cos();
        let ddf = -4.0 * (2.0 * x).cos() + 6.3 * (3.0 * x).sin();
        let a: f64 = t.iter().zip(&d1).map(|(s, w)| w * f(*s)).sum();
        let b: f64 = t.iter().zip(&d2).map(|(s, w)| w * f(*s)).sum();
        assert!((a - df).abs() < 1e-10, "{a} vs {df}");
        assert!((b - ddf).abs() < 1e-9, "{b} vs {ddf}");
    }

    #[test]
    fn basis_is_cardinal() {
        let t = nodes();
        for i in 0..t.len() {
            for (j, &tj) in t.iter().enumerate() {
                let v = lagrange_derivatives(&t, i, tj)[0];
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sine_moments_integrate_cosine_exactly() {
        let t = nodes();
        let (a, b) = (0.2, 0.4);
        let w = sine_moment_weights(&t, a, b);
        let approx: f64 = t.iter().zip(&w).map(|(s, wi)| wi * s.cos()).sum();
        // int cos t sin t = (sin^2 b - sin^2 a)/2
        let exact = 0.5 * (b.sin().powi(2) - a.sin().powi(2));
        assert!((approx - exact).abs() < 1e-15);
    }
}
