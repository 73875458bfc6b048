//! Independent checks: the pushforward property of the transport map, the first
//! Laplace eigenvalue of the initial metric, and the linearized decay rates of the flow.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::harmonics::{lm_index, n_coeffs, SpectralField};
use crate::metric::ConformalMetric;
use crate::transport::{mat_vec, SpherePoint, TransportAtlas};

/// Identifier of the quadrature rule used by the pushforward test.
pub const PUSHFORWARD_RULE: &str = "gauss-legendre nodes of the trajectory grid, weights w_i * dphi";

/// Fixed rotation applied to the degree-2 test harmonic (Euler angles z-y-z).
const TEST_ROTATION: (f64, f64, f64) = (0.7, 1.1, -0.4);

fn euler_zyz(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let rz = |t: f64| {
        let (s, c) = t.sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    };
    let ry = |t: f64| {
        let (s, c) = t.sin_cos();
        [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
    };
    mat_mul(&mat_mul(&rz(a), &ry(b)), &rz(c))
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Named test functions of the pushforward check.
pub fn pushforward_test_functions() -> Vec<(&'static str, Box<dyn Fn(SpherePoint) -> f64 + Send + Sync>)> {
    let rot = euler_zyz(TEST_ROTATION.0, TEST_ROTATION.1, TEST_ROTATION.2);
    let c20 = (5.0 / (16.0 * PI)).sqrt();
    vec![
        ("one", Box::new(|_| 1.0)),
        ("x", Box::new(|p| p[0])),
        ("y", Box::new(|p| p[1])),
        ("z", Box::new(|p| p[2])),
        ("xy", Box::new(|p| p[0] * p[1])),
        (
            "y20_rotated",
            Box::new(move |p| {
                let q = mat_vec(&rot, p);
                c20 * (3.0 * q[2] * q[2] - 1.0)
            }),
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardEntry {
    pub function: String,
    /// `Σ w_i (v/4π) f(T(y_i))`.
    pub transported: f64,
    /// `Σ w_i e^{2u_0(y_i)} f(y_i)`.
    pub direct: f64,
    /// `|transported − direct| / (1 + |direct|)`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub entries: Vec<PushforwardEntry>,
    pub quadrature_size: usize,
    pub rule: String,
    pub worst_error: f64,
}

/// Compares `∫ f∘T d(ρ² vol_can)` with `∫ f dν_0` by grid quadrature, given the images
/// `T(y_i)` of the trajectory's grid nodes in storage order.
pub fn pushforward_from_images(traj: &FlowTrajectory, images: &[SpherePoint]) -> Result<PushforwardReport> {
    let grid = traj.grid();
    if images.len() != grid.len() {
        return Err(Error::Config(format!(
            "pushforward needs {} grid images, got {}",
            grid.len(),
            images.len()
        )));
    }
    let m0 = traj.metric_at_checkpoint(0)?;
    let v = m0.volume();
    let nodes = grid.nodes();
    let scale = vec![v / (4.0 * PI); grid.len()];
    let entries: Vec<PushforwardEntry> = pushforward_test_functions()
        .into_iter()
        .map(|(name, f)| {
            let ft: Vec<f64> = images.iter().map(|&p| f(p)).collect();
            let fd: Vec<f64> = nodes.iter().map(|&p| f(p)).collect();
            let transported = grid.integrate_product(&ft, &scale);
            let direct = grid.integrate_product(&fd, m0.e2u());
            PushforwardEntry {
                function: name.to_string(),
                transported,
                direct,
                error: (transported - direct).abs() / (1.0 + direct.abs()),
            }
        })
        .collect();
    let worst_error = entries.iter().map(|e| e.error).fold(0.0, f64::max);
    Ok(PushforwardReport {
        entries,
        quadrature_size: grid.len(),
        rule: PUSHFORWARD_RULE.into(),
        worst_error,
    })
}

/// Pushforward check on an atlas whose first samples are the trajectory's grid nodes.
pub fn pushforward_test(traj: &FlowTrajectory, atlas: &TransportAtlas) -> Result<PushforwardReport> {
    let grid = traj.grid();
    if atlas.samples.len() < grid.len() {
        return Err(Error::Config("atlas does not cover the quadrature grid".into()));
    }
    let mut images = Vec::with_capacity(grid.len());
    for (k, s) in atlas.samples[..grid.len()].iter().enumerate() {
        let node = grid.node(k);
        let dist = (0..3).map(|i| (node[i] - s.y[i]).abs()).fold(0.0, f64::max);
        if dist > 1e-12 {
            return Err(Error::Config(format!(
                "atlas sample {k} is not grid node {k} (distance {dist:.2e})"
            )));
        }
        if !s.is_ok() {
            return Err(Error::Config(format!("atlas sample {k} failed to integrate")));
        }
        images.push(s.x);
    }
    pushforward_from_images(traj, &images)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LichnerowiczReport {
    pub min_r: f64,
    pub band: usize,
    pub lambda1: Option<f64>,
    /// `λ₁ ≥ 2 − 1e−6`, when the check ran.
    pub verdict: Option<bool>,
    pub skipped: Option<String>,
}

/// Default number of degrees in the eigenvalue basis.
pub const LICHNEROWICZ_BAND: usize = 16;

/// First nonzero eigenvalue of `Δ_g` by a Galerkin generalized eigenproblem over harmonics
/// up to degree `band`; skipped unless `min R ≥ 2`.
pub fn lichnerowicz_check(m: &ConformalMetric, band: Option<usize>) -> Result<LichnerowiczReport> {
    let min_r = m.min_curvature();
    let band = band
        .unwrap_or(LICHNEROWICZ_BAND)
        .min(m.grid().l_max())
        .max(1);
    if min_r < 2.0 {
        log::info!("Lichnerowicz check skipped: min R = {min_r:.6} < 2");
        return Ok(LichnerowiczReport {
            min_r,
            band,
            lambda1: None,
            verdict: None,
            skipped: Some(format!("min R = {min_r:.6e} < 2")),
        });
    }
    let lambda1 = first_eigenvalue(m, band)?;
    Ok(LichnerowiczReport {
        min_r,
        band,
        lambda1: Some(lambda1),
        verdict: Some(lambda1 >= 2.0 - 1e-6),
        skipped: None,
    })
}

/// Second-smallest eigenvalue of `K x = λ M x` with `K = diag(l(l+1))` (the Dirichlet
/// energy, conformally invariant in two dimensions) and `M_ij = ∫ Y_i Y_j e^{2u} dA`.
pub fn first_eigenvalue(m: &ConformalMetric, band: usize) -> Result<f64> {
    let grid = m.grid();
    let n = n_coeffs(band);
    let basis: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut f = SpectralField::zeros(band);
            f.coeffs_mut()[i] = 1.0;
            grid.synthesize_values(&f)
        })
        .collect::<Result<_>>()?;
    let mut mass = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let wi: Vec<f64> = basis[i].iter().zip(m.e2u()).map(|(a, b)| a * b).collect();
        for j in i..n {
            let v = grid.integrate_product(&wi, &basis[j]);
            mass[(i, j)] = v;
            mass[(j, i)] = v;
        }
    }
    let chol = mass
        .cholesky()
        .ok_or_else(|| Error::Config("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let mut stiff = DMatrix::<f64>::zeros(n, n);
    for deg in 0..=band {
        let ev = (deg * (deg + 1)) as f64;
        for mm in -(deg as i64)..=(deg as i64) {
            let k = lm_index(deg, mm);
            stiff[(k, k)] = ev;
        }
    }
    // C = L⁻¹ K L⁻ᵀ
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Config("singular Cholesky factor".into()))?;
    let c = &linv * stiff * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    Ok(eig[1])
}

/// Linear decay rate `r (1 − l(l+1)/2)` of the degree-`l` curvature mode about the round
/// metric with mean curvature `r`.
pub fn linearized_decay_oracle(l: usize, r: f64) -> Result<f64> {
    if l < 1 {
        return Err(Error::Config("decay oracle needs degree l >= 1".into()));
    }
    Ok(r * (1.0 - (l * (l + 1)) as f64 / 2.0))
}
