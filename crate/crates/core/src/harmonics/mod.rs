//! Spectral machinery on the unit sphere: Gauss grid, real orthonormal harmonics,
//! analysis/synthesis and the round-metric differential operators.
//!
//! Coefficients use the real orthonormal convention `∫ Y_lm² dA = 1`, `Y_00 = 1/√(4π)`,
//! stored l-major with `m` running from `-l` to `l` (index `l² + l + m`). Grid values are
//! stored latitude-major (index `i * nlon + j`).

pub mod io;
pub mod legendre;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use io::{read_spectral_field, write_spectral_field, SpectralHeader};
use legendre::{gauss_legendre, tri, tri_len, LegendreRecurrence};

/// Smallest supported bandlimit.
pub const MIN_BANDLIMIT: usize = 4;

/// Index of `(l, m)` in an l-major coefficient vector.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= l);
    ((l * l + l) as i64 + m) as usize
}

/// Number of coefficients of a field with bandlimit `l_max`.
#[inline]
pub fn n_coeffs(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Gauss–Legendre × equispaced-longitude grid with precomputed Legendre tables.
pub struct SphereGrid {
    l_max: usize,
    nlat: usize,
    nlon: usize,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    theta: Vec<f64>,
    weights: Vec<f64>,
    phi: Vec<f64>,
    dphi: f64,
    plm: Vec<f64>,
    dplm: Vec<f64>,
    d2plm: Vec<f64>,
    recurrence: LegendreRecurrence,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SphereGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereGrid")
            .field("l_max", &self.l_max)
            .field("nlat", &self.nlat)
            .field("nlon", &self.nlon)
            .finish()
    }
}

/// Builds the Gauss grid for bandlimit `l_max` (`nlat = L+1`, `nlon = 2L+2`).
pub fn build_grid(l_max: usize) -> Result<Arc<SphereGrid>> {
    SphereGrid::new(l_max).map(Arc::new)
}

#[derive(Clone, Copy)]
enum Table {
    P,
    DP,
    D2P,
}

#[derive(Clone, Copy)]
enum PhiOp {
    Identity,
    D1,
    D2,
}

impl SphereGrid {
    pub fn new(l_max: usize) -> Result<Self> {
        if l_max < MIN_BANDLIMIT {
            return Err(Error::Config(format!(
                "bandlimit L={l_max} is below the minimum {MIN_BANDLIMIT}"
            )));
        }
        let nlat = l_max + 1;
        let nlon = 2 * l_max + 2;
        let (cos_theta, weights) = gauss_legendre(nlat);
        let sin_theta: Vec<f64> = cos_theta.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let theta: Vec<f64> = cos_theta
            .iter()
            .zip(&sin_theta)
            .map(|(c, s)| s.atan2(*c))
            .collect();
        let dphi = 2.0 * PI / nlon as f64;
        let phi = (0..nlon).map(|j| j as f64 * dphi).collect();

        let recurrence = LegendreRecurrence::new(l_max);
        let nt = tri_len(l_max);
        let mut plm = vec![0.0; nlat * nt];
        let mut dplm = vec![0.0; nlat * nt];
        let mut d2plm = vec![0.0; nlat * nt];
        for i in 0..nlat {
            let (x, s) = (cos_theta[i], sin_theta[i]);
            let p = &mut plm[i * nt..(i + 1) * nt];
            recurrence.values(x, s, p);
            let dp = &mut dplm[i * nt..(i + 1) * nt];
            recurrence.theta_derivatives(&plm[i * nt..(i + 1) * nt], dp);
            // Legendre ODE: P'' = -l(l+1)P - cotθ P' + m²/sin²θ P
            let cot = x / s;
            for l in 0..=l_max {
                for m in 0..=l {
                    let k = i * nt + tri(l, m);
                    let (lf, mf) = (l as f64, m as f64);
                    d2plm[k] =
                        -lf * (lf + 1.0) * plm[k] - cot * dplm[k] + mf * mf / (s * s) * plm[k];
                }
            }
        }

        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(nlon);
        let fft_inverse = planner.plan_fft_inverse(nlon);
        Ok(Self {
            l_max,
            nlat,
            nlon,
            cos_theta,
            sin_theta,
            theta,
            weights,
            phi,
            dphi,
            plm,
            dplm,
            d2plm,
            recurrence,
            fft_forward,
            fft_inverse,
        })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }
    pub fn nlat(&self) -> usize {
        self.nlat
    }
    pub fn nlon(&self) -> usize {
        self.nlon
    }
    pub fn len(&self) -> usize {
        self.nlat * self.nlon
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }
    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    /// Gauss–Legendre weights in `cos θ` (they sum to 2).
    pub fn gauss_weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn dphi(&self) -> f64 {
        self.dphi
    }
    pub fn recurrence(&self) -> &LegendreRecurrence {
        &self.recurrence
    }

    /// Area weight of node `(i, j)`; independent of `j`.
    #[inline]
    pub fn node_weight(&self, i: usize) -> f64 {
        self.weights[i] * self.dphi
    }

    /// Unit vector of node `k = i * nlon + j`.
    pub fn node(&self, k: usize) -> [f64; 3] {
        let (i, j) = (k / self.nlon, k % self.nlon);
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        let (sp, cp) = self.phi[j].sin_cos();
        [s * cp, s * sp, c]
    }

    /// All node positions in storage order.
    pub fn nodes(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Quadrature of grid values against the round area element, summed in storage order.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let mut total = 0.0;
        for i in 0..self.nlat {
            let row: f64 = values[i * self.nlon..(i + 1) * self.nlon].iter().sum();
            total += self.node_weight(i) * row;
        }
        total
    }

    /// Quadrature of `a · b` against the round area element.
    pub fn integrate_product(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        let mut total = 0.0;
        for i in 0..self.nlat {
            let lo = i * self.nlon;
            let row: f64 = a[lo..lo + self.nlon]
                .iter()
                .zip(&b[lo..lo + self.nlon])
                .map(|(x, y)| x * y)
                .sum();
            total += self.node_weight(i) * row;
        }
        total
    }

    fn table(&self, t: Table) -> &[f64] {
        match t {
            Table::P => &self.plm,
            Table::DP => &self.dplm,
            Table::D2P => &self.d2plm,
        }
    }

    fn synth_raw(&self, c: &[f64], c_lmax: usize, table: Table, op: PhiOp) -> Vec<f64> {
        let l_max = self.l_max;
        let nt = tri_len(l_max);
        let nlon = self.nlon;
        let tab = self.table(table);
        let lmax_c = c_lmax.min(l_max);
        let rows: Vec<Vec<f64>> = (0..self.nlat)
            .into_par_iter()
            .map(|i| {
                let t = &tab[i * nt..(i + 1) * nt];
                let mut buf = vec![Complex::new(0.0, 0.0); nlon];
                for m in 0..=lmax_c {
                    let (mut cm, mut sm) = (0.0, 0.0);
                    for l in m..=lmax_c {
                        let v = t[tri(l, m)];
                        let base = l * l + l;
                        cm += c[base + m] * v;
                        if m > 0 {
                            sm += c[base - m] * v;
                        }
                    }
                    if m > 0 {
                        cm *= std::f64::consts::SQRT_2;
                        sm *= std::f64::consts::SQRT_2;
                    }
                    let mf = m as f64;
                    let (cm, sm) = match op {
                        PhiOp::Identity => (cm, sm),
                        PhiOp::D1 => (mf * sm, -mf * cm),
                        PhiOp::D2 => (-mf * mf * cm, -mf * mf * sm),
                    };
                    buf[m] = Complex::new(cm, -sm);
                }
                self.fft_inverse.process(&mut buf);
                buf.iter().map(|z| z.re).collect()
            })
            .collect();
        rows.concat()
    }

    fn synth_coeffs(&self, c: &SpectralField, table: Table, op: PhiOp) -> Result<Vec<f64>> {
        if c.l_max > self.l_max {
            return Err(Error::BandlimitMismatch {
                expected: self.l_max,
                found: c.l_max,
            });
        }
        Ok(self.synth_raw(&c.coeffs, c.l_max, table, op))
    }

    /// Grid values of a band-limited field (fields with a smaller bandlimit are zero-padded).
    pub fn synthesize_values(&self, c: &SpectralField) -> Result<Vec<f64>> {
        self.synth_coeffs(c, Table::P, PhiOp::Identity)
    }

    /// Coefficients up to the grid bandlimit from grid values.
    pub fn analyze_values(&self, values: &[f64]) -> Result<SpectralField> {
        if values.len() != self.len() {
            return Err(Error::Config(format!(
                "expected {} grid values, got {}",
                self.len(),
                values.len()
            )));
        }
        let l_max = self.l_max;
        let nlon = self.nlon;
        let rows: Vec<Vec<(f64, f64)>> = (0..self.nlat)
            .into_par_iter()
            .map(|i| {
                let mut buf: Vec<Complex<f64>> = values[i * nlon..(i + 1) * nlon]
                    .iter()
                    .map(|&v| Complex::new(v, 0.0))
                    .collect();
                self.fft_forward.process(&mut buf);
                (0..=l_max).map(|m| (buf[m].re, -buf[m].im)).collect()
            })
            .collect();
        let nt = tri_len(l_max);
        let mut coeffs = vec![0.0; n_coeffs(l_max)];
        for (i, row) in rows.iter().enumerate() {
            let w = self.node_weight(i);
            let t = &self.plm[i * nt..(i + 1) * nt];
            for m in 0..=l_max {
                let (a, b) = row[m];
                let scale = if m == 0 { w } else { w * std::f64::consts::SQRT_2 };
                let (a, b) = (a * scale, b * scale);
                for l in m..=l_max {
                    let v = t[tri(l, m)];
                    let base = l * l + l;
                    coeffs[base + m] += a * v;
                    if m > 0 {
                        coeffs[base - m] += b * v;
                    }
                }
            }
        }
        Ok(SpectralField { l_max, coeffs })
    }

    /// `(∂_θ f, (1/sin θ) ∂_φ f)` at every node.
    pub fn gradient_values(&self, c: &SpectralField) -> Result<(Vec<f64>, Vec<f64>)> {
        let gt = self.synth_coeffs(c, Table::DP, PhiOp::Identity)?;
        let mut gp = self.synth_coeffs(c, Table::P, PhiOp::D1)?;
        self.scale_rows(&mut gp, |i| 1.0 / self.sin_theta[i]);
        Ok((gt, gp))
    }

    /// Frame components `(H_θθ, H_θφ, H_φφ)` of the round covariant Hessian at every node.
    pub fn hessian_values(&self, c: &SpectralField) -> Result<[Vec<f64>; 3]> {
        let f_tt = self.synth_coeffs(c, Table::D2P, PhiOp::Identity)?;
        let f_t = self.synth_coeffs(c, Table::DP, PhiOp::Identity)?;
        let f_p = self.synth_coeffs(c, Table::P, PhiOp::D1)?;
        let f_tp = self.synth_coeffs(c, Table::DP, PhiOp::D1)?;
        let f_pp = self.synth_coeffs(c, Table::P, PhiOp::D2)?;
        let n = self.len();
        let mut h_tp = vec![0.0; n];
        let mut h_pp = vec![0.0; n];
        for k in 0..n {
            let i = k / self.nlon;
            let (s, cth) = (self.sin_theta[i], self.cos_theta[i]);
            let cot = cth / s;
            h_tp[k] = (f_tp[k] - cot * f_p[k]) / s;
            h_pp[k] = f_pp[k] / (s * s) + cot * f_t[k];
        }
        Ok([f_tt, h_tp, h_pp])
    }

    fn scale_rows(&self, values: &mut [f64], factor: impl Fn(usize) -> f64) {
        for (i, row) in values.chunks_mut(self.nlon).enumerate() {
            let f = factor(i);
            row.iter_mut().for_each(|v| *v *= f);
        }
    }

    /// Round orthonormal frame `(e_θ, e_φ)` at node `k`.
    pub fn frame(&self, k: usize) -> ([f64; 3], [f64; 3]) {
        let (i, j) = (k / self.nlon, k % self.nlon);
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        let (sp, cp) = self.phi[j].sin_cos();
        ([c * cp, c * sp, -s], [-sp, cp, 0.0])
    }
}

/// Band-limited scalar function stored as real orthonormal harmonic coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    l_max: usize,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(l_max: usize) -> Self {
        Self {
            l_max,
            coeffs: vec![0.0; n_coeffs(l_max)],
        }
    }

    pub fn from_coeffs(l_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != n_coeffs(l_max) {
            return Err(Error::Config(format!(
                "bandlimit {l_max} needs {} coefficients, got {}",
                n_coeffs(l_max),
                coeffs.len()
            )));
        }
        Ok(Self { l_max, coeffs })
    }

    /// Single harmonic `amplitude · Y_lm` with the given bandlimit.
    pub fn mode(l_max: usize, l: usize, m: i64, amplitude: f64) -> Self {
        let mut f = Self::zeros(l_max);
        f.set(l, m, amplitude);
        f
    }

    /// The constant function `value`.
    pub fn constant(l_max: usize, value: f64) -> Self {
        Self::mode(l_max, 0, 0, value * (4.0 * PI).sqrt())
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    #[inline]
    pub fn index(l: usize, m: i64) -> usize {
        lm_index(l, m)
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        if l > self.l_max {
            0.0
        } else {
            self.coeffs[lm_index(l, m)]
        }
    }

    pub fn set(&mut self, l: usize, m: i64, value: f64) {
        assert!(l <= self.l_max, "degree {l} exceeds bandlimit {}", self.l_max);
        self.coeffs[lm_index(l, m)] = value;
    }

    /// Mean value over the round sphere, `a_00 / √(4π)`.
    pub fn mean_can(&self) -> f64 {
        self.coeffs[0] / (4.0 * PI).sqrt()
    }

    /// Truncated or zero-padded copy with bandlimit `l_max`.
    pub fn resized(&self, l_max: usize) -> Self {
        let mut out = Self::zeros(l_max);
        let n = n_coeffs(l_max.min(self.l_max));
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            l_max: self.l_max,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self + factor · other` (bandlimits must match).
    pub fn axpy(&self, factor: f64, other: &SpectralField) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            l_max: self.l_max,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    fn check_same(&self, other: &SpectralField) -> Result<()> {
        if self.l_max != other.l_max {
            return Err(Error::BandlimitMismatch {
                expected: self.l_max,
                found: other.l_max,
            });
        }
        Ok(())
    }

    /// Euclidean norm of the coefficient vector (= L² norm on the round sphere).
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Sum of squared coefficients of degree `l`.
    pub fn degree_energy(&self, l: usize) -> f64 {
        if l > self.l_max {
            return 0.0;
        }
        self.coeffs[l * l..(l + 1) * (l + 1)]
            .iter()
            .map(|c| c * c)
            .sum()
    }

    /// Highest degree carrying a coefficient above `threshold` in absolute value.
    pub fn effective_degree(&self, threshold: f64) -> usize {
        (0..=self.l_max)
            .rev()
            .find(|&l| {
                self.coeffs[l * l..(l + 1) * (l + 1)]
                    .iter()
                    .any(|c| c.abs() > threshold)
            })
            .unwrap_or(0)
    }

    /// Zeroes every degree above `l_keep`.
    pub fn truncate_above(&mut self, l_keep: usize) {
        if l_keep < self.l_max {
            let start = n_coeffs(l_keep);
            self.coeffs[start..].iter_mut().for_each(|c| *c = 0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Pointwise function on the grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "expected {} grid values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("scalar field has non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<SphereGrid>, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![value; n],
        }
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.node(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Tangent vector field in the round orthonormal frame `(e_θ, e_φ)` at every node.
#[derive(Debug, Clone)]
pub struct TangentVectorField {
    grid: Arc<SphereGrid>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl TangentVectorField {
    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    /// Multiplies both components by a pointwise factor.
    pub fn scaled_by(&self, factor: &[f64]) -> Self {
        Self {
            grid: self.grid.clone(),
            theta: self.theta.iter().zip(factor).map(|(v, f)| v * f).collect(),
            phi: self.phi.iter().zip(factor).map(|(v, f)| v * f).collect(),
        }
    }

    /// Round inner product with another field, node by node.
    pub fn dot_can(&self, other: &TangentVectorField) -> Vec<f64> {
        (0..self.theta.len())
            .map(|k| self.theta[k] * other.theta[k] + self.phi[k] * other.phi[k])
            .collect()
    }

    /// Round norm at every node.
    pub fn norm_can(&self) -> Vec<f64> {
        self.theta
            .iter()
            .zip(&self.phi)
            .map(|(a, b)| a.hypot(*b))
            .collect()
    }

    /// Ambient 3-vector at node `k`.
    pub fn cartesian(&self, k: usize) -> [f64; 3] {
        let (et, ep) = self.grid.frame(k);
        let (a, b) = (self.theta[k], self.phi[k]);
        [
            a * et[0] + b * ep[0],
            a * et[1] + b * ep[1],
            a * et[2] + b * ep[2],
        ]
    }

    pub fn max_norm_can(&self) -> f64 {
        self.norm_can().into_iter().fold(0.0, f64::max)
    }
}

/// Synthesizes `c` on `grid`; bandlimits above the grid's are rejected.
pub fn synthesize(c: &SpectralField, grid: &Arc<SphereGrid>) -> Result<ScalarField> {
    let values = grid.synthesize_values(c)?;
    Ok(ScalarField {
        grid: grid.clone(),
        values,
    })
}

/// Harmonic coefficients of a grid function, up to the grid bandlimit.
pub fn analyze(f: &ScalarField) -> Result<SpectralField> {
    f.grid.analyze_values(&f.values)
}

/// Round Laplacian: multiplies `a_lm` by `-l(l+1)`.
pub fn laplacian_can(c: &SpectralField) -> SpectralField {
    let mut out = c.clone();
    for l in 0..=c.l_max {
        let ev = -((l * (l + 1)) as f64);
        for v in &mut out.coeffs[l * l..(l + 1) * (l + 1)] {
            *v *= ev;
        }
    }
    out
}

/// Default relative tolerance on the mean of a Poisson source.
pub const POISSON_MEAN_TOL: f64 = 1e-9;

/// Solves `Δ_can ξ = source` with `a_00(ξ) = 0`.
///
/// The source mean must vanish: `|a_00| ≤ mean_tol · max(‖source‖, 1)` where `mean_tol`
/// defaults to [`POISSON_MEAN_TOL`].
pub fn poisson_solve_can(source: &SpectralField, mean_tol: Option<f64>) -> Result<SpectralField> {
    let tol = mean_tol.unwrap_or(POISSON_MEAN_TOL) * source.norm().max(1.0);
    let mean = source.coeffs[0];
    if mean.abs() > tol {
        return Err(Error::Solvability { mean, tol });
    }
    let mut out = SpectralField::zeros(source.l_max);
    for l in 1..=source.l_max {
        let ev = -((l * (l + 1)) as f64);
        for idx in l * l..(l + 1) * (l + 1) {
            out.coeffs[idx] = source.coeffs[idx] / ev;
        }
    }
    Ok(out)
}

/// Round gradient `(∂_θ f, (1/sin θ) ∂_φ f)` on the grid.
pub fn gradient_can(c: &SpectralField, grid: &Arc<SphereGrid>) -> Result<TangentVectorField> {
    let (theta, phi) = grid.gradient_values(c)?;
    Ok(TangentVectorField {
        grid: grid.clone(),
        theta,
        phi,
    })
}

/// Quadrature of `f · density` over the sphere.
pub fn integrate(f: &ScalarField, density: &ScalarField) -> f64 {
    f.grid.integrate_product(&f.values, &density.values)
}

pub(crate) fn tangent_field(grid: Arc<SphereGrid>, theta: Vec<f64>, phi: Vec<f64>) -> TangentVectorField {
    TangentVectorField { grid, theta, phi }
}
