//! Gauss–Legendre nodes and fully normalized associated Legendre functions.
//!
//! The normalized functions `P̄_lm(cos θ)` satisfy `∫ P̄_lm² d(cos θ) = 1/(2π)`,
//! so that the real harmonics `Y_l0 = P̄_l0` and `Y_l±m = √2 P̄_lm {cos, sin}(mφ)`
//! are orthonormal on the unit sphere. No Condon–Shortley phase is applied,
//! hence `Y_11 ∝ x`, `Y_1,-1 ∝ y` and `Y_10 ∝ z`.

use std::f64::consts::PI;

/// Index of `(l, m)` with `0 ≤ m ≤ l` in a triangular table.
#[inline]
pub fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Number of entries of a triangular table up to degree `lmax`.
#[inline]
pub fn tri_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

/// Gauss–Legendre nodes (descending in `x`, i.e. ascending colatitude) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 1..=n {
        let mut x = (PI * (k as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for iter in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 && iter > 2 {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        if p.abs() > 0.0 {
            dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `(P_n(x), P_{n-1}(x))` for the unnormalized Legendre polynomials.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Precomputed recurrence constants for `P̄_lm` up to a bandlimit.
#[derive(Debug, Clone)]
pub struct LegendreRecurrence {
    lmax: usize,
    /// `sqrt((2m+1)/(2m))`, diagonal step.
    diag: Vec<f64>,
    /// `sqrt(2m+3)`, first off-diagonal step.
    sub: Vec<f64>,
    /// `a_lm = sqrt((4l²-1)/(l²-m²))`.
    a: Vec<f64>,
    /// `b_lm = sqrt(((l-1)²-m²)/(4(l-1)²-1))`.
    b: Vec<f64>,
    /// `sqrt((l+m)(l-m+1))`, lowering coefficient of the θ-derivative.
    lower: Vec<f64>,
    /// `sqrt((l+m+1)(l-m))`, raising coefficient of the θ-derivative.
    raise: Vec<f64>,
}

impl LegendreRecurrence {
    pub fn new(lmax: usize) -> Self {
        let n = tri_len(lmax);
        let mut diag = vec![0.0; lmax + 1];
        let mut sub = vec![0.0; lmax + 1];
        for m in 0..=lmax {
            let mf = m as f64;
            if m > 0 {
                diag[m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
            }
            sub[m] = (2.0 * mf + 3.0).sqrt();
        }
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut lower = vec![0.0; n];
        let mut raise = vec![0.0; n];
        for l in 0..=lmax {
            for m in 0..=l {
                let (lf, mf) = (l as f64, m as f64);
                let k = tri(l, m);
                if l >= m + 2 {
                    a[k] = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                    let l1 = lf - 1.0;
                    b[k] = ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
                }
                lower[k] = ((lf + mf) * (lf - mf + 1.0)).sqrt();
                raise[k] = ((lf + mf + 1.0) * (lf - mf)).sqrt();
            }
        }
        Self {
            lmax,
            diag,
            sub,
            a,
            b,
            lower,
            raise,
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// Fills `out` (triangular, length `tri_len(lmax)`) with `P̄_lm(x)` where `s = sqrt(1-x²) ≥ 0`.
    pub fn values(&self, x: f64, s: f64, out: &mut [f64]) {
        let lmax = self.lmax;
        out[0] = 1.0 / (4.0 * PI).sqrt();
        for m in 1..=lmax {
            out[tri(m, m)] = self.diag[m] * s * out[tri(m - 1, m - 1)];
        }
        self.fill_columns(x, out, 0);
    }

    /// Fills `out` with `P̄_lm(x) / sin θ` for `m ≥ 1`; entries with `m = 0` are set to zero.
    /// Stays finite at the poles.
    pub fn values_over_sin(&self, x: f64, s: f64, out: &mut [f64]) {
        let lmax = self.lmax;
        for l in 0..=lmax {
            out[tri(l, 0)] = 0.0;
        }
        if lmax == 0 {
            return;
        }
        out[tri(1, 1)] = self.diag[1] / (4.0 * PI).sqrt();
        for m in 2..=lmax {
            out[tri(m, m)] = self.diag[m] * s * out[tri(m - 1, m - 1)];
        }
        self.fill_columns(x, out, 1);
    }

    fn fill_columns(&self, x: f64, out: &mut [f64], m_start: usize) {
        let lmax = self.lmax;
        for m in m_start..=lmax {
            if m < lmax {
                out[tri(m + 1, m)] = self.sub[m] * x * out[tri(m, m)];
            }
            for l in (m + 2)..=lmax {
                let k = tri(l, m);
                out[k] = self.a[k] * (x * out[tri(l - 1, m)] - self.b[k] * out[tri(l - 2, m)]);
            }
        }
    }

    /// θ-derivatives `dP̄_lm/dθ` from a filled value table.
    pub fn theta_derivatives(&self, p: &[f64], out: &mut [f64]) {
        let lmax = self.lmax;
        for l in 0..=lmax {
            // m = 0: dP̄_l0/dθ = -sqrt(l(l+1)) P̄_l1
            out[tri(l, 0)] = if l == 0 {
                0.0
            } else {
                -self.raise[tri(l, 0)] * p[tri(l, 1)]
            };
            for m in 1..=l {
                let k = tri(l, m);
                let up = if m < l { p[tri(l, m + 1)] } else { 0.0 };
                out[k] = 0.5 * (self.lower[k] * p[tri(l, m - 1)] - self.raise[k] * up);
            }
        }
    }
}

/// Real-harmonic basis values and first derivatives at one point of the sphere.
///
/// Derivative entries are `∂_θ Y_lm` and `(1/sin θ) ∂_φ Y_lm`, the components of the round
/// gradient in the frame `(e_θ, e_φ)`. Both stay finite at the poles.
#[derive(Debug, Clone)]
pub struct PointBasis {
    lmax: usize,
    pub theta: f64,
    pub phi: f64,
    pub values: Vec<f64>,
    pub d_theta: Vec<f64>,
    pub d_phi_over_sin: Vec<f64>,
    with_gradient: bool,
}

impl PointBasis {
    pub fn new(lmax: usize) -> Self {
        let n = (lmax + 1) * (lmax + 1);
        Self {
            lmax,
            theta: 0.0,
            phi: 0.0,
            values: vec![0.0; n],
            d_theta: vec![0.0; n],
            d_phi_over_sin: vec![0.0; n],
            with_gradient: false,
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// Recomputes the basis at the unit vector `p`. Scratch tables are reused.
    pub fn evaluate(
        &mut self,
        rec: &LegendreRecurrence,
        scratch: &mut BasisScratch,
        p: [f64; 3],
        with_gradient: bool,
    ) {
        debug_assert!(rec.lmax() >= self.lmax);
        let lmax = self.lmax;
        let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let x = p[2].clamp(-1.0, 1.0);
        let s = rho;
        self.theta = s.atan2(x);
        self.phi = p[1].atan2(p[0]);
        self.with_gradient = with_gradient;

        scratch.ensure(rec.lmax());
        rec.values(x, s, &mut scratch.p);
        if with_gradient {
            rec.theta_derivatives(&scratch.p, &mut scratch.dp);
            rec.values_over_sin(x, s, &mut scratch.q);
        }
        // cos(mφ), sin(mφ) by the angle-addition recurrence
        let (c1, s1) = if rho > 0.0 {
            (p[0] / rho, p[1] / rho)
        } else {
            (1.0, 0.0)
        };
        scratch.cos_m[0] = 1.0;
        scratch.sin_m[0] = 0.0;
        for m in 1..=lmax {
            let (c, sn) = (scratch.cos_m[m - 1], scratch.sin_m[m - 1]);
            scratch.cos_m[m] = c * c1 - sn * s1;
            scratch.sin_m[m] = sn * c1 + c * s1;
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        for l in 0..=lmax {
            let base = l * l + l;
            let k0 = tri(l, 0);
            self.values[base] = scratch.p[k0];
            if with_gradient {
                self.d_theta[base] = scratch.dp[k0];
                self.d_phi_over_sin[base] = 0.0;
            }
            for m in 1..=l {
                let k = tri(l, m);
                let (cm, sm) = (scratch.cos_m[m], scratch.sin_m[m]);
                let pv = sqrt2 * scratch.p[k];
                self.values[base + m] = pv * cm;
                self.values[base - m] = pv * sm;
                if with_gradient {
                    let dv = sqrt2 * scratch.dp[k];
                    self.d_theta[base + m] = dv * cm;
                    self.d_theta[base - m] = dv * sm;
                    let qv = sqrt2 * m as f64 * scratch.q[k];
                    self.d_phi_over_sin[base + m] = -qv * sm;
                    self.d_phi_over_sin[base - m] = qv * cm;
                }
            }
        }
    }

    /// Value of the field with coefficients `c` (l-major ordering, degree ≤ `self.lmax`).
    #[inline]
    pub fn value(&self, c: &[f64]) -> f64 {
        dot(&self.values[..c.len()], c)
    }

    /// Round gradient of the field as an ambient 3-vector tangent to the sphere.
    pub fn gradient(&self, c: &[f64]) -> [f64; 3] {
        debug_assert!(self.with_gradient);
        let n = c.len();
        let gt = dot(&self.d_theta[..n], c);
        let gp = dot(&self.d_phi_over_sin[..n], c);
        let (e_t, e_p) = frame_from_angles(self.theta, self.phi);
        [
            gt * e_t[0] + gp * e_p[0],
            gt * e_t[1] + gp * e_p[1],
            gt * e_t[2] + gp * e_p[2],
        ]
    }
}

/// Reusable scratch buffers for [`PointBasis::evaluate`].
#[derive(Debug, Clone, Default)]
pub struct BasisScratch {
    p: Vec<f64>,
    dp: Vec<f64>,
    q: Vec<f64>,
    cos_m: Vec<f64>,
    sin_m: Vec<f64>,
}

impl BasisScratch {
    fn ensure(&mut self, lmax: usize) {
        let n = tri_len(lmax);
        if self.p.len() != n {
            self.p = vec![0.0; n];
            self.dp = vec![0.0; n];
            self.q = vec![0.0; n];
            self.cos_m = vec![0.0; lmax + 1];
            self.sin_m = vec![0.0; lmax + 1];
        }
    }
}

/// Round orthonormal frame `(e_θ, e_φ)` at colatitude `theta`, longitude `phi`.
#[inline]
pub fn frame_from_angles(theta: f64, phi: f64) -> ([f64; 3], [f64; 3]) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators; the order is fixed so results are reproducible
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
