//! Transport map `T = S_{t_f}^{-1}` obtained by integrating the characteristics of
//! `∇_{g_s} ξ_s` backward in time, together with its differential from the variational
//! equation.
//!
//! Points and tangent vectors are carried as ambient 3-vectors. The velocity is stored per
//! checkpoint as three scalar fields `W_k = e^{-2u} (e_k · ∇_can ξ)` so that evaluating it
//! and its derivative at an arbitrary point is a single basis evaluation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{lagrange_weights, FlowTrajectory};
use crate::harmonics::legendre::{frame_from_angles, BasisScratch, LegendreRecurrence, PointBasis};
use crate::harmonics::{build_grid, n_coeffs, SpectralField, SphereGrid};
use crate::metric::ConformalMetric;

pub type SpherePoint = [f64; 3];

/// Coefficients below this fraction of the largest one are dropped from velocity tables.
const TRIM_RELATIVE: f64 = 1e-14;

/// Extra degrees used when expanding the velocity components, which are products and
/// therefore not band-limited.
const VELOCITY_PADDING: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportOptions {
    /// Absolute local error allowed per step (estimated by step doubling).
    pub ode_tol: f64,
    /// Steps shorter than this abort the integration.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            ode_tol: 1e-10,
            min_step: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

impl TransportOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.ode_tol > 0.0 && self.min_step > 0.0 && self.max_steps > 0) {
            return Err(Error::Config(
                "transport tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Velocity fields of a trajectory, ready for evaluation at arbitrary points and times.
#[derive(Debug)]
pub struct VelocityTable {
    times: Vec<f64>,
    l_eff: usize,
    fields: Vec<[Vec<f64>; 3]>,
    recurrence: LegendreRecurrence,
    u0: Vec<f64>,
    u0_recurrence: LegendreRecurrence,
    l_u0: usize,
}

impl VelocityTable {
    pub fn new(traj: &FlowTrajectory) -> Result<Self> {
        if !traj.potentials_filled {
            return Err(Error::Config("trajectory potentials have not been solved".into()));
        }
        let l = traj.grid().l_max();
        let wgrid = build_grid(l + VELOCITY_PADDING)?;
        let full: Vec<Result<[SpectralField; 3]>> = traj
            .checkpoints
            .par_iter()
            .map(|cp| velocity_components(&cp.u, &cp.xi, &wgrid))
            .collect();
        let full = full.into_iter().collect::<Result<Vec<_>>>()?;
        let scale = full
            .iter()
            .flat_map(|f| f.iter().map(|c| c.max_abs()))
            .fold(0.0, f64::max);
        let l_eff = if scale > 0.0 {
            full.iter()
                .flat_map(|f| f.iter().map(|c| c.effective_degree(TRIM_RELATIVE * scale)))
                .max()
                .unwrap_or(0)
        } else {
            0
        };
        let n = n_coeffs(l_eff);
        let fields = full
            .into_iter()
            .map(|[a, b, c]| {
                [
                    a.coeffs()[..n].to_vec(),
                    b.coeffs()[..n].to_vec(),
                    c.coeffs()[..n].to_vec(),
                ]
            })
            .collect();
        let u0 = traj.checkpoints[0].u.clone();
        let l_u0 = u0.effective_degree(0.0);
        Ok(Self {
            times: traj.times(),
            l_eff,
            fields,
            recurrence: LegendreRecurrence::new(l_eff),
            u0: u0.coeffs()[..n_coeffs(l_u0)].to_vec(),
            u0_recurrence: LegendreRecurrence::new(l_u0),
            l_u0,
        })
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    /// Highest degree retained in the velocity expansion.
    pub fn effective_degree(&self) -> usize {
        self.l_eff
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            basis: PointBasis::new(self.l_eff),
            scratch: BasisScratch::default(),
            combined: [
                vec![0.0; n_coeffs(self.l_eff)],
                vec![0.0; n_coeffs(self.l_eff)],
                vec![0.0; n_coeffs(self.l_eff)],
            ],
            u0_basis: PointBasis::new(self.l_u0),
            u0_scratch: BasisScratch::default(),
        }
    }

    /// `W(s, x)` and, when requested, the round gradients of its three components.
    fn eval(&self, s: f64, x: [f64; 3], with_grad: bool, ws: &mut Workspace) -> ([f64; 3], [[f64; 3]; 3]) {
        let stencil = lagrange_weights(&self.times, s);
        for (k, comb) in ws.combined.iter_mut().enumerate() {
            comb.iter_mut().for_each(|c| *c = 0.0);
            for &(i, w) in &stencil {
                for (c, f) in comb.iter_mut().zip(&self.fields[i][k]) {
                    *c += w * f;
                }
            }
        }
        let p = normalize(x);
        ws.basis.evaluate(&self.recurrence, &mut ws.scratch, p, with_grad);
        let mut w = [0.0; 3];
        let mut grads = [[0.0; 3]; 3];
        for k in 0..3 {
            w[k] = ws.basis.value(&ws.combined[k]);
            if with_grad {
                grads[k] = ws.basis.gradient(&ws.combined[k]);
            }
        }
        (w, grads)
    }

    /// `e^{u_0(x)}`, the length scale of the initial metric at `x`.
    pub fn conformal_scale_initial(&self, x: SpherePoint, ws: &mut Workspace) -> f64 {
        ws.u0_basis
            .evaluate(&self.u0_recurrence, &mut ws.u0_scratch, normalize(x), false);
        ws.u0_basis.value(&self.u0).exp()
    }

    /// Right-hand side of the joint point/differential system.
    fn rhs(&self, s: f64, y: &State, with_diff: bool, ws: &mut Workspace) -> State {
        let x = y.x;
        let (w, grads) = self.eval(s, x, with_diff, ws);
        let wx = dot3(w, x);
        let mut out = State {
            x: sub3(w, scale3(wx, x)),
            d: [[0.0; 3]; 2],
        };
        if with_diff {
            for a in 0..2 {
                let delta = y.d[a];
                let dw = [
                    dot3(grads[0], delta),
                    dot3(grads[1], delta),
                    dot3(grads[2], delta),
                ];
                let coef_x = -dot3(dw, x) - dot3(w, delta);
                for i in 0..3 {
                    out.d[a][i] = dw[i] + coef_x * x[i] - wx * delta[i];
                }
            }
        }
        out
    }
}

/// Per-thread buffers for velocity evaluation.
pub struct Workspace {
    basis: PointBasis,
    scratch: BasisScratch,
    combined: [Vec<f64>; 3],
    u0_basis: PointBasis,
    u0_scratch: BasisScratch,
}

fn velocity_components(
    u: &SpectralField,
    xi: &SpectralField,
    grid: &Arc<SphereGrid>,
) -> Result<[SpectralField; 3]> {
    let m = ConformalMetric::new(u.clone(), grid.clone())?;
    let (gt, gp) = grid.gradient_values(xi)?;
    let n = grid.len();
    let mut comps = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        let (et, ep) = grid.frame(k);
        let s = 1.0 / m.e2u()[k];
        for c in 0..3 {
            comps[c][k] = s * (gt[k] * et[c] + gp[k] * ep[c]);
        }
    }
    let [a, b, c] = comps;
    Ok([
        grid.analyze_values(&a)?,
        grid.analyze_values(&b)?,
        grid.analyze_values(&c)?,
    ])
}

#[derive(Debug, Clone, Copy)]
struct State {
    x: [f64; 3],
    d: [[f64; 3]; 2],
}

impl State {
    fn axpy(&self, h: f64, k: &State) -> State {
        let mut out = *self;
        for i in 0..3 {
            out.x[i] += h * k.x[i];
            out.d[0][i] += h * k.d[0][i];
            out.d[1][i] += h * k.d[1][i];
        }
        out
    }

    fn max_diff(&self, other: &State, with_diff: bool) -> f64 {
        let mut e = 0.0f64;
        for i in 0..3 {
            e = e.max((self.x[i] - other.x[i]).abs());
            if with_diff {
                e = e.max((self.d[0][i] - other.d[0][i]).abs());
                e = e.max((self.d[1][i] - other.d[1][i]).abs());
            }
        }
        e
    }

    /// Back onto the sphere, with the differential projected to the tangent plane.
    fn project(&mut self) {
        self.x = normalize(self.x);
        for a in 0..2 {
            let c = dot3(self.d[a], self.x);
            self.d[a] = sub3(self.d[a], scale3(c, self.x));
        }
    }
}

fn rk4(table: &VelocityTable, s: f64, h: f64, y: &State, k1: &State, with_diff: bool, ws: &mut Workspace) -> State {
    let k2 = table.rhs(s + 0.5 * h, &y.axpy(0.5 * h, k1), with_diff, ws);
    let k3 = table.rhs(s + 0.5 * h, &y.axpy(0.5 * h, &k2), with_diff, ws);
    let k4 = table.rhs(s + h, &y.axpy(h, &k3), with_diff, ws);
    let mut out = *y;
    for i in 0..3 {
        out.x[i] += h / 6.0 * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
        for a in 0..2 {
            out.d[a][i] += h / 6.0 * (k1.d[a][i] + 2.0 * k2.d[a][i] + 2.0 * k3.d[a][i] + k4.d[a][i]);
        }
    }
    out
}

/// Result of one characteristic integration.
#[derive(Debug, Clone, Copy)]
pub struct Characteristic {
    pub x: SpherePoint,
    /// Images of the two initial tangent vectors.
    pub d: [[f64; 3]; 2],
    pub steps: usize,
}

/// Integrates the characteristic system from time `s0` to `s1` (either direction)
/// with adaptive RK4 step doubling.
pub fn integrate_characteristic(
    table: &VelocityTable,
    s0: f64,
    s1: f64,
    x0: SpherePoint,
    d0: Option<[[f64; 3]; 2]>,
    opts: &TransportOptions,
    ws: &mut Workspace,
) -> Result<Characteristic> {
    let with_diff = d0.is_some();
    let mut y = State {
        x: normalize(x0),
        d: d0.unwrap_or([[0.0; 3]; 2]),
    };
    let span = s1 - s0;
    if span == 0.0 {
        return Ok(Characteristic {
            x: y.x,
            d: y.d,
            steps: 0,
        });
    }
    let dir = span.signum();
    let mut s = s0;
    let mut h = (span.abs() / 16.0).min(0.05);
    let mut steps = 0usize;
    let mut worst = 0.0f64;
    while (s1 - s) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::Integration { worst_error: worst, s });
        }
        let remaining = (s1 - s).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;
        let k1 = table.rhs(s, &y, with_diff, ws);
        let big = rk4(table, s, hs, &y, &k1, with_diff, ws);
        let half = rk4(table, s, 0.5 * hs, &y, &k1, with_diff, ws);
        let k1h = table.rhs(s + 0.5 * hs, &half, with_diff, ws);
        let small = rk4(table, s + 0.5 * hs, 0.5 * hs, &half, &k1h, with_diff, ws);
        let err = small.max_diff(&big, with_diff) / 15.0;
        if !err.is_finite() {
            return Err(Error::Integration { worst_error: err, s });
        }
        if err <= opts.ode_tol {
            let mut next = small;
            // Richardson extrapolation of the two estimates.
            for i in 0..3 {
                next.x[i] += (small.x[i] - big.x[i]) / 15.0;
                for a in 0..2 {
                    next.d[a][i] += (small.d[a][i] - big.d[a][i]) / 15.0;
                }
            }
            next.project();
            y = next;
            s = if last { s1 } else { s + hs };
            steps += 1;
            worst = worst.max(err);
        } else if hs.abs() <= opts.min_step {
            return Err(Error::Integration { worst_error: err, s });
        }
        let factor = if err > 0.0 {
            (0.9 * (opts.ode_tol / err).powf(0.2)).clamp(0.2, 4.0)
        } else {
            4.0
        };
        h = (hs.abs() * factor).max(opts.min_step);
    }
    Ok(Characteristic {
        x: y.x,
        d: y.d,
        steps,
    })
}

/// `T(y) = S_{t_f}^{-1}(y)` by backward integration from `t_f` to 0.
pub fn flow_backward(
    table: &VelocityTable,
    y: SpherePoint,
    opts: &TransportOptions,
    ws: &mut Workspace,
) -> Result<SpherePoint> {
    integrate_characteristic(table, table.t_final(), 0.0, y, None, opts, ws).map(|c| c.x)
}

/// `S_{t_f}(x)` by forward integration from 0 to `t_f`.
pub fn flow_forward(
    table: &VelocityTable,
    x: SpherePoint,
    opts: &TransportOptions,
    ws: &mut Workspace,
) -> Result<SpherePoint> {
    integrate_characteristic(table, 0.0, table.t_final(), x, None, opts, ws).map(|c| c.x)
}

/// Round orthonormal frame `(e_θ, e_φ)` at a unit vector.
pub fn frame_at(p: SpherePoint) -> ([f64; 3], [f64; 3]) {
    let theta = (p[0] * p[0] + p[1] * p[1]).sqrt().atan2(p[2]);
    let phi = p[1].atan2(p[0]);
    frame_from_angles(theta, phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    Failed { worst_error: f64, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportSample {
    pub y: SpherePoint,
    pub x: SpherePoint,
    /// `dT` from the round frame at `y` to the round frame at `x`; `j[b][a] = ⟨e_b(x), dT e_a(y)⟩`.
    pub j: [[f64; 2]; 2],
    /// Operator norm of `dT` composed with the dilation, unit round sphere → `g_0`.
    pub opnorm: f64,
    pub status: SampleStatus,
    pub ode_tol_used: f64,
    pub steps: usize,
}

impl TransportSample {
    pub fn det(&self) -> f64 {
        self.j[0][0] * self.j[1][1] - self.j[0][1] * self.j[1][0]
    }
    pub fn is_ok(&self) -> bool {
        matches!(self.status, SampleStatus::Ok)
    }
}

/// Largest singular value of a 2×2 matrix.
pub fn sigma_max(j: &[[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    let s1 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (s1 + disc)).sqrt()
}

/// Transport map and differential at `y`.
pub fn differential(
    table: &VelocityTable,
    y: SpherePoint,
    opts: &TransportOptions,
    ws: &mut Workspace,
) -> Result<TransportSample> {
    let y = normalize(y);
    let (e_t, e_p) = frame_at(y);
    let c = integrate_characteristic(table, table.t_final(), 0.0, y, Some([e_t, e_p]), opts, ws)?;
    let (f_t, f_p) = frame_at(c.x);
    let j = [
        [dot3(f_t, c.d[0]), dot3(f_t, c.d[1])],
        [dot3(f_p, c.d[0]), dot3(f_p, c.d[1])],
    ];
    let opnorm = table.conformal_scale_initial(c.x, ws) * sigma_max(&j);
    Ok(TransportSample {
        y,
        x: c.x,
        j,
        opnorm,
        status: SampleStatus::Ok,
        ode_tol_used: opts.ode_tol,
        steps: c.steps,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportAtlas {
    pub samples: Vec<TransportSample>,
    pub rho: f64,
    /// Hash of the trajectory manifest the atlas was built from, when known.
    pub manifest_ref: Option<String>,
    pub ode_tol: f64,
    pub velocity_degree: usize,
}

impl TransportAtlas {
    pub fn failures(&self) -> usize {
        self.samples.iter().filter(|s| !s.is_ok()).count()
    }
}

/// Computes transport samples at every point; integration failures are flagged per sample.
pub fn build_atlas(
    traj: &FlowTrajectory,
    points: &[SpherePoint],
    opts: &TransportOptions,
) -> Result<TransportAtlas> {
    opts.validate()?;
    traj.ensure_converged()?;
    let table = VelocityTable::new(traj)?;
    let samples = points
        .par_iter()
        .map_init(
            || table.workspace(),
            |ws, &y| match differential(&table, y, opts, ws) {
                Ok(s) => s,
                Err(Error::Integration { worst_error, s }) => TransportSample {
                    y: normalize(y),
                    x: [f64::NAN; 3],
                    j: [[f64::NAN; 2]; 2],
                    opnorm: f64::NAN,
                    status: SampleStatus::Failed { worst_error, s },
                    ode_tol_used: opts.ode_tol,
                    steps: 0,
                },
                Err(e) => panic!("unexpected transport error: {e}"),
            },
        )
        .collect();
    Ok(TransportAtlas {
        samples,
        rho: traj.rho(),
        manifest_ref: None,
        ode_tol: opts.ode_tol,
        velocity_degree: table.effective_degree(),
    })
}

/// Transport images only (no differential) at every point, in order.
pub fn transport_points(
    table: &VelocityTable,
    points: &[SpherePoint],
    opts: &TransportOptions,
) -> Result<Vec<SpherePoint>> {
    points
        .par_iter()
        .map_init(|| table.workspace(), |ws, &y| flow_backward(table, y, opts, ws))
        .collect()
}

/// Supremum of the per-sample operator norms over successful samples.
pub fn lipschitz_measured(atlas: &TransportAtlas) -> Result<f64> {
    let ok: Vec<f64> = atlas
        .samples
        .iter()
        .filter(|s| s.is_ok())
        .map(|s| s.opnorm)
        .collect();
    if ok.is_empty() {
        return Err(Error::Empty("atlas has no successful samples"));
    }
    Ok(ok.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Quasi-uniform spherical Fibonacci points, rotated by a seed-dependent rotation.
pub fn fibonacci_points(n: usize, seed: u64) -> Vec<SpherePoint> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rot = random_rotation(seed);
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            mat_vec(&rot, [r * c, r * s, z])
        })
        .collect()
}

/// Independent uniform random points on the sphere.
pub fn random_points(n: usize, seed: u64) -> Vec<SpherePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).sqrt();
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Nodes of a quadrature grid followed by `extra` quasi-uniform points.
pub fn default_sample_points(grid: &SphereGrid, extra: usize, seed: u64) -> Vec<SpherePoint> {
    let mut pts = grid.nodes();
    pts.extend(fibonacci_points(extra, seed));
    pts
}

fn random_rotation(seed: u64) -> [[f64; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Uniform unit quaternion.
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    );
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

#[inline]
pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn scale3(c: f64, a: [f64; 3]) -> [f64; 3] {
    [c * a[0], c * a[1], c * a[2]]
}

#[inline]
pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot3(a, a).sqrt();
    scale3(1.0 / n, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_max_of_known_matrices() {
        assert!((sigma_max(&[[1.0, 0.0], [0.0, 1.0]]) - 1.0).abs() < 1e-15);
        assert!((sigma_max(&[[3.0, 0.0], [0.0, -2.0]]) - 3.0).abs() < 1e-15);
        // rotation times 2
        let (s, c) = 0.3f64.sin_cos();
        assert!((sigma_max(&[[2.0 * c, -2.0 * s], [2.0 * s, 2.0 * c]]) - 2.0).abs() < 1e-14);
        // [[1,1],[0,1]] has σ_max = golden ratio
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        assert!((sigma_max(&[[1.0, 1.0], [0.0, 1.0]]) - phi).abs() < 1e-14);
    }

    #[test]
    fn sample_points_are_unit_and_deterministic() {
        let a = fibonacci_points(100, 7);
        let b = fibonacci_points(100, 7);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| (dot3(*p, *p) - 1.0).abs() < 1e-14));
        let r = random_points(50, 3);
        assert!(r.iter().all(|p| (dot3(*p, *p) - 1.0).abs() < 1e-14));
        assert_ne!(fibonacci_points(10, 1), fibonacci_points(10, 2));
    }

    #[test]
    fn frames_are_orthonormal_and_tangent() {
        for p in random_points(20, 11) {
            let (a, b) = frame_at(p);
            assert!((dot3(a, a) - 1.0).abs() < 1e-14);
            assert!((dot3(b, b) - 1.0).abs() < 1e-14);
            assert!(dot3(a, b).abs() < 1e-14);
            assert!(dot3(a, p).abs() < 1e-14 && dot3(b, p).abs() < 1e-14);
        }
    }
}
