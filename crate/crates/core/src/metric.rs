//! Conformal metrics `g = e^{2u} g_can` on the sphere: curvature, volume, gradients,
//! covariant Hessians and eigenvalues of bilinear forms relative to `g`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::harmonics::{
    laplacian_can, tangent_field, ScalarField, SpectralField, SphereGrid, TangentVectorField,
};

/// Metric `e^{2u} g_can` with eagerly cached grid values of `u`, `e^{2u}` and `R`.
#[derive(Debug, Clone)]
pub struct ConformalMetric {
    grid: Arc<SphereGrid>,
    u: SpectralField,
    u_values: Vec<f64>,
    e2u: Vec<f64>,
    curvature: Vec<f64>,
    volume: f64,
    grad_u: OnceLock<(Vec<f64>, Vec<f64>)>,
}

impl ConformalMetric {
    /// Builds the metric; `u` is zero-padded to the grid bandlimit.
    pub fn new(u: SpectralField, grid: Arc<SphereGrid>) -> Result<Self> {
        if u.l_max() > grid.l_max() {
            return Err(Error::BandlimitMismatch {
                expected: grid.l_max(),
                found: u.l_max(),
            });
        }
        if !u.is_finite() {
            return Err(Error::Config("log-conformal factor has non-finite coefficients".into()));
        }
        let u = u.resized(grid.l_max());
        let u_values = grid.synthesize_values(&u)?;
        let lap = grid.synthesize_values(&laplacian_can(&u))?;
        let e2u: Vec<f64> = u_values.iter().map(|v| (2.0 * v).exp()).collect();
        let curvature = e2u
            .iter()
            .zip(&lap)
            .map(|(w, l)| (2.0 - 2.0 * l) / w)
            .collect();
        let volume = grid.integrate_values(&e2u);
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::Config(format!("metric volume {volume} is not positive")));
        }
        Ok(Self {
            grid,
            u,
            u_values,
            e2u,
            curvature,
            volume,
            grad_u: OnceLock::new(),
        })
    }

    /// Round metric of radius `rho`.
    pub fn round(grid: Arc<SphereGrid>, rho: f64) -> Result<Self> {
        let u = SpectralField::constant(grid.l_max(), rho.ln());
        Self::new(u, grid)
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }
    pub fn u(&self) -> &SpectralField {
        &self.u
    }
    pub fn u_values(&self) -> &[f64] {
        &self.u_values
    }
    /// Grid values of the area density `e^{2u}`.
    pub fn e2u(&self) -> &[f64] {
        &self.e2u
    }
    pub fn curvature_values(&self) -> &[f64] {
        &self.curvature
    }

    /// Scalar curvature `R = e^{-2u}(2 - 2 Δ_can u)` at the grid nodes.
    pub fn scalar_curvature(&self) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.curvature.clone())
            .expect("curvature values are finite by construction")
    }

    /// Riemannian volume density `e^{2u}` as a field.
    pub fn density(&self) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.e2u.clone()).expect("finite density")
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// `r = 8π / volume`, the mean scalar curvature.
    pub fn mean_curvature_r(&self) -> f64 {
        8.0 * PI / self.volume
    }

    /// `∫ R dν`, equal to `8π` by Gauss–Bonnet.
    pub fn total_curvature(&self) -> f64 {
        self.grid.integrate_product(&self.curvature, &self.e2u)
    }

    pub fn min_curvature(&self) -> f64 {
        self.curvature.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max_curvature(&self) -> f64 {
        self.curvature.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `‖R − r‖_∞` over the grid.
    pub fn curvature_deviation(&self) -> f64 {
        let r = self.mean_curvature_r();
        self.curvature.iter().fold(0.0, |a, c| a.max((c - r).abs()))
    }

    /// Round gradient of `u`, cached on first use.
    pub fn grad_u(&self) -> &(Vec<f64>, Vec<f64>) {
        self.grad_u.get_or_init(|| {
            self.grid
                .gradient_values(&self.u)
                .expect("u has the grid bandlimit")
        })
    }

    /// `∇_g f = e^{-2u} ∇_can f` in the round frame.
    pub fn gradient_g(&self, f: &SpectralField) -> Result<TangentVectorField> {
        let (gt, gp) = self.grid.gradient_values(f)?;
        let s: Vec<f64> = self.e2u.iter().map(|w| 1.0 / w).collect();
        let gt = gt.iter().zip(&s).map(|(a, b)| a * b).collect();
        let gp = gp.iter().zip(&s).map(|(a, b)| a * b).collect();
        Ok(tangent_field(self.grid.clone(), gt, gp))
    }

    /// `Δ_g f = e^{-2u} Δ_can f` at the grid nodes.
    pub fn laplacian_g_values(&self, f: &SpectralField) -> Result<Vec<f64>> {
        let lap = self.grid.synthesize_values(&laplacian_can(f))?;
        Ok(lap.iter().zip(&self.e2u).map(|(l, w)| l / w).collect())
    }

    /// Covariant Hessian of `f` for `g`:
    /// `Hess_can f − du⊗df − df⊗du + ⟨∇u, ∇f⟩_can g_can`.
    pub fn hessian_g(&self, f: &SpectralField) -> Result<SymmetricBilinearField> {
        let mut h = hessian_can(f, &self.grid)?;
        let (ft, fp) = self.grid.gradient_values(f)?;
        let (ut, up) = self.grad_u();
        for k in 0..h.tt.len() {
            let dot = ut[k] * ft[k] + up[k] * fp[k];
            h.tt[k] += dot - 2.0 * ut[k] * ft[k];
            h.tp[k] -= ut[k] * fp[k] + up[k] * ft[k];
            h.pp[k] += dot - 2.0 * up[k] * fp[k];
        }
        Ok(h)
    }

    /// Frame components of `c · g` for pointwise coefficients `c`.
    pub fn metric_form(&self, c: &[f64]) -> SymmetricBilinearField {
        let diag: Vec<f64> = c.iter().zip(&self.e2u).map(|(c, w)| c * w).collect();
        SymmetricBilinearField {
            grid: self.grid.clone(),
            tt: diag.clone(),
            tp: vec![0.0; diag.len()],
            pp: diag,
        }
    }

    /// Smaller eigenvalue of `A` relative to `g` at every node.
    pub fn min_eigenvalue_rel(&self, a: &SymmetricBilinearField) -> ScalarField {
        let values = a.min_eigenvalues_scaled(&self.e2u);
        ScalarField::new(self.grid.clone(), values).expect("finite eigenvalues")
    }

    /// Largest absolute eigenvalue of `A` relative to `g`, i.e. the pointwise `|A|_g`.
    pub fn norm_rel(&self, a: &SymmetricBilinearField) -> Vec<f64> {
        a.abs_eigenvalues_scaled(&self.e2u)
    }

    /// `sup_x |A|_g` over the grid.
    pub fn sup_norm_rel(&self, a: &SymmetricBilinearField) -> f64 {
        self.norm_rel(a).into_iter().fold(0.0, f64::max)
    }

    /// `tr_g A = e^{-2u}(A_θθ + A_φφ)`.
    pub fn trace_rel(&self, a: &SymmetricBilinearField) -> Vec<f64> {
        (0..a.tt.len())
            .map(|k| (a.tt[k] + a.pp[k]) / self.e2u[k])
            .collect()
    }
}

/// Symmetric 2-tensor in the round orthonormal frame `(e_θ, e_φ)` at every node.
#[derive(Debug, Clone)]
pub struct SymmetricBilinearField {
    grid: Arc<SphereGrid>,
    pub tt: Vec<f64>,
    pub tp: Vec<f64>,
    pub pp: Vec<f64>,
}

impl SymmetricBilinearField {
    pub fn zeros(grid: Arc<SphereGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            tt: vec![0.0; n],
            tp: vec![0.0; n],
            pp: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.tt.len()
    }
    pub fn is_empty(&self) -> bool {
        self.tt.is_empty()
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, factor: f64, other: &SymmetricBilinearField) -> Self {
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + factor * y).collect();
        Self {
            grid: self.grid.clone(),
            tt: comb(&self.tt, &other.tt),
            tp: comb(&self.tp, &other.tp),
            pp: comb(&self.pp, &other.pp),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let sc = |a: &[f64]| a.iter().map(|x| x * factor).collect();
        Self {
            grid: self.grid.clone(),
            tt: sc(&self.tt),
            tp: sc(&self.tp),
            pp: sc(&self.pp),
        }
    }

    fn eig_scaled(&self, k: usize, scale: f64) -> (f64, f64) {
        let (a, b, c) = (self.tt[k] * scale, self.tp[k] * scale, self.pp[k] * scale);
        let mean = 0.5 * (a + c);
        let rad = (0.5 * (a - c)).hypot(b);
        (mean - rad, mean + rad)
    }

    fn min_eigenvalues_scaled(&self, e2u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.eig_scaled(k, 1.0 / e2u[k]).0)
            .collect()
    }

    fn abs_eigenvalues_scaled(&self, e2u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (lo, hi) = self.eig_scaled(k, 1.0 / e2u[k]);
                lo.abs().max(hi.abs())
            })
            .collect()
    }

    /// Smaller eigenvalue relative to the round metric.
    pub fn min_eigenvalues_can(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.eig_scaled(k, 1.0).0).collect()
    }

    /// Evaluates `A(v, w)` at node `k` for frame components `v`, `w`.
    pub fn apply(&self, k: usize, v: [f64; 2], w: [f64; 2]) -> f64 {
        self.tt[k] * v[0] * w[0]
            + self.tp[k] * (v[0] * w[1] + v[1] * w[0])
            + self.pp[k] * v[1] * w[1]
    }
}

/// Covariant Hessian for the unit round metric, in the orthonormal frame.
pub fn hessian_can(f: &SpectralField, grid: &Arc<SphereGrid>) -> Result<SymmetricBilinearField> {
    let [tt, tp, pp] = grid.hessian_values(f)?;
    Ok(SymmetricBilinearField {
        grid: grid.clone(),
        tt,
        tp,
        pp,
    })
}

/// Per-node smaller eigenvalue of `A` relative to `m`.
pub fn min_eigenvalue_rel(m: &ConformalMetric, a: &SymmetricBilinearField) -> ScalarField {
    m.min_eigenvalue_rel(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::build_grid;

    #[test]
    fn round_metrics() {
        let g = build_grid(8).unwrap();
        let m = ConformalMetric::new(SpectralField::zeros(8), g.clone()).unwrap();
        assert!((m.volume() - 4.0 * PI).abs() < 1e-12);
        assert!((m.mean_curvature_r() - 2.0).abs() < 1e-13);
        assert!(m.curvature_values().iter().all(|r| (r - 2.0).abs() < 1e-13));

        let rho = 0.5f64.sqrt();
        let m = ConformalMetric::round(g, rho).unwrap();
        assert!((m.volume() - 2.0 * PI).abs() < 1e-12);
        assert!((m.mean_curvature_r() - 4.0).abs() < 1e-12);
        assert!(m.curvature_values().iter().all(|r| (r - 4.0).abs() < 1e-12));
    }

    #[test]
    fn gauss_bonnet_for_a_bumpy_metric() {
        let g = build_grid(24).unwrap();
        let mut u = SpectralField::mode(24, 2, 0, 0.1);
        u.set(3, 1, -0.05);
        u.set(4, -2, 0.03);
        let m = ConformalMetric::new(u, g).unwrap();
        assert!((m.total_curvature() / (8.0 * PI) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hessian_of_linear_function_is_minus_f_times_metric() {
        let g = build_grid(8).unwrap();
        let m = ConformalMetric::new(SpectralField::zeros(8), g.clone()).unwrap();
        let z = SpectralField::mode(8, 1, 0, 1.0);
        let zv = g.synthesize_values(&z).unwrap();
        let h = m.hessian_g(&z).unwrap();
        for k in 0..g.len() {
            assert!((h.tt[k] + zv[k]).abs() < 1e-12);
            assert!((h.pp[k] + zv[k]).abs() < 1e-12);
            assert!(h.tp[k].abs() < 1e-12);
        }
        let min = m.min_eigenvalue_rel(&h);
        for k in 0..g.len() {
            assert!((min.values()[k] + zv[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_has_unit_relative_eigenvalue() {
        let g = build_grid(8).unwrap();
        let m = ConformalMetric::new(SpectralField::mode(8, 2, 1, 0.2), g.clone()).unwrap();
        let ones = vec![1.0; g.len()];
        let gform = m.metric_form(&ones);
        assert!(m.min_eigenvalue_rel(&gform).values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let zero = SymmetricBilinearField::zeros(g);
        assert!(m.min_eigenvalue_rel(&zero).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn trace_of_hessian_is_laplacian() {
        let g = build_grid(16).unwrap();
        let m = ConformalMetric::new(SpectralField::mode(16, 2, 0, 0.05), g).unwrap();
        let f = SpectralField::mode(16, 2, 1, 1.0);
        let tr = m.trace_rel(&m.hessian_g(&f).unwrap());
        let lap = m.laplacian_g_values(&f).unwrap();
        for (a, b) in tr.iter().zip(&lap) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
