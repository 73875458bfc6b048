//! Independent oracles shared by the integration tests: closed-form harmonics and
//! finite-difference derivatives at the spacing of a dense 512×1024 latitude-longitude grid.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphereflow::harmonics::{n_coeffs, SpectralField};

/// Colatitude step of the dense reference grid.
pub const H_THETA: f64 = PI / 512.0;
/// Longitude step of the dense reference grid.
pub const H_PHI: f64 = 2.0 * PI / 1024.0;

pub fn cart(theta: f64, phi: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [s * phi.cos(), s * phi.sin(), c]
}

pub fn angles(p: [f64; 3]) -> (f64, f64) {
    let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
    (rho.atan2(p[2]), p[1].atan2(p[0]))
}

/// Real orthonormal harmonics written out as polynomials in `(x, y, z)`.
pub fn y_closed(l: usize, m: i64, p: [f64; 3]) -> f64 {
    let [x, y, z] = p;
    match (l, m) {
        (0, 0) => (1.0 / (4.0 * PI)).sqrt(),
        (1, -1) => (3.0 / (4.0 * PI)).sqrt() * y,
        (1, 0) => (3.0 / (4.0 * PI)).sqrt() * z,
        (1, 1) => (3.0 / (4.0 * PI)).sqrt() * x,
        (2, -2) => (15.0 / (4.0 * PI)).sqrt() * x * y,
        (2, -1) => (15.0 / (4.0 * PI)).sqrt() * y * z,
        (2, 0) => (5.0 / (16.0 * PI)).sqrt() * (3.0 * z * z - 1.0),
        (2, 1) => (15.0 / (4.0 * PI)).sqrt() * x * z,
        (2, 2) => (15.0 / (16.0 * PI)).sqrt() * (x * x - y * y),
        (3, 0) => (7.0 / (16.0 * PI)).sqrt() * (5.0 * z * z * z - 3.0 * z),
        (3, 1) => (21.0 / (32.0 * PI)).sqrt() * x * (5.0 * z * z - 1.0),
        (3, 2) => (105.0 / (16.0 * PI)).sqrt() * (x * x - y * y) * z,
        (4, 2) => (45.0 / (64.0 * PI)).sqrt() * (x * x - y * y) * (7.0 * z * z - 1.0),
        _ => panic!("no closed form for ({l}, {m})"),
    }
}

/// Fourth-order central first derivative.
pub fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

/// Fourth-order central second derivative.
pub fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (16.0 * (f(x + h) + f(x - h)) - (f(x + 2.0 * h) + f(x - 2.0 * h)) - 30.0 * f(x)) / (12.0 * h * h)
}

/// Fourth-order mixed derivative `∂_θ ∂_φ`.
pub fn d_mixed(f: impl Fn(f64, f64) -> f64, t: f64, p: f64, ht: f64, hp: f64) -> f64 {
    d1(|tt| d1(|pp| f(tt, pp), p, hp), t, ht)
}

/// `(∂_θ f, (1/sinθ) ∂_φ f)` by finite differences.
pub fn fd_gradient(f: &impl Fn(f64, f64) -> f64, t: f64, p: f64) -> (f64, f64) {
    (
        d1(|x| f(x, p), t, H_THETA),
        d1(|y| f(t, y), p, H_PHI) / t.sin(),
    )
}

/// Round Laplacian in spherical coordinates by finite differences.
pub fn fd_laplacian(f: &impl Fn(f64, f64) -> f64, t: f64, p: f64) -> f64 {
    let s = t.sin();
    d2(|x| f(x, p), t, H_THETA) + t.cos() / s * d1(|x| f(x, p), t, H_THETA) + d2(|y| f(t, y), p, H_PHI) / (s * s)
}

/// Covariant Hessian of `f` for `g = e^{2u}(dθ² + sin²θ dφ²)` built from coordinate
/// Christoffel symbols of finite-differenced metric components, returned in the round
/// orthonormal frame as `(tt, tp, pp)`.
pub fn fd_hessian_g(
    f: &impl Fn(f64, f64) -> f64,
    u: &impl Fn(f64, f64) -> f64,
    t: f64,
    p: f64,
) -> (f64, f64, f64) {
    let g11 = |a: f64, b: f64| (2.0 * u(a, b)).exp();
    let g22 = |a: f64, b: f64| (2.0 * u(a, b)).exp() * a.sin().powi(2);
    let (ht, hp) = (H_THETA, H_PHI);
    // metric derivatives (diagonal metric)
    let g11_t = d1(|a| g11(a, p), t, ht);
    let g11_p = d1(|b| g11(t, b), p, hp);
    let g22_t = d1(|a| g22(a, p), t, ht);
    let g22_p = d1(|b| g22(t, b), p, hp);
    let (a, b) = (g11(t, p), g22(t, p));
    // Γ^k_ij for a diagonal metric
    let g1_11 = 0.5 * g11_t / a;
    let g1_12 = 0.5 * g11_p / a;
    let g1_22 = -0.5 * g22_t / a;
    let g2_11 = -0.5 * g11_p / b;
    let g2_12 = 0.5 * g22_t / b;
    let g2_22 = 0.5 * g22_p / b;

    let f_t = d1(|x| f(x, p), t, ht);
    let f_p = d1(|y| f(t, y), p, hp);
    let f_tt = d2(|x| f(x, p), t, ht);
    let f_pp = d2(|y| f(t, y), p, hp);
    let f_tp = d_mixed(f, t, p, ht, hp);

    let h11 = f_tt - g1_11 * f_t - g2_11 * f_p;
    let h12 = f_tp - g1_12 * f_t - g2_12 * f_p;
    let h22 = f_pp - g1_22 * f_t - g2_22 * f_p;
    let s = t.sin();
    (h11, h12 / s, h22 / (s * s))
}

/// Seeded generator for test data.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Band-limited field with uniform random coefficients in `[-1, 1)` up to degree `l`,
/// zero above, stored at bandlimit `l_max`.
pub fn random_field(l_max: usize, l: usize, seed: u64) -> SpectralField {
    let mut r = rng(seed);
    let mut f = SpectralField::zeros(l_max);
    for c in f.coeffs_mut()[..n_coeffs(l)].iter_mut() {
        *c = r.gen_range(-1.0..1.0);
    }
    f
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
