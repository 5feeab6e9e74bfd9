//! Wedge and shock perturbations and the boundary-flattening change of
//! variables `x ↔ y`.
//!
//! The map is `y2 = x2 − w(x1, x3)`, `y3 = x3` and `x1 = y1 + δs̄(y)`, where
//! `δs̄` is the mollified extension of the shock perturbation `δŝ(y2, y3)`
//! off the shock plane `y2 = σ y1`. The inverse `y → x` is explicit.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ZAxis};
use crate::spline::CubicSpline;

const QUAD_ORDER: usize = 32;

/// Quadrature nodes and normalised mollifier weights `w_q ξ(t_q) / Σ`.
fn kernel() -> &'static [(f64, f64)] {
    static K: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    K.get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(QUAD_ORDER).expect("nonzero"));
        let raw: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(t, w)| (t, w * (-1.0 / (1.0 - t * t)).exp()))
            .collect();
        let total: f64 = raw.iter().map(|p| p.1).sum();
        raw.into_iter().map(|(t, w)| (t, w / total)).collect()
    })
}

/// Quintic smoothstep `6x⁵ − 15x⁴ + 10x³` and its first two derivatives.
fn smoothstep(x: f64) -> [f64; 3] {
    let x2 = x * x;
    [
        x2 * x * (10.0 - 15.0 * x + 6.0 * x2),
        30.0 * x2 * (x - 1.0) * (x - 1.0),
        60.0 * x * (1.0 - 3.0 * x + 2.0 * x2),
    ]
}

/// Cutoff: 1 on `[−1, 1]`, 0 outside `(−2, 2)`, `C²` in between.
pub fn cutoff(t: f64) -> [f64; 3] {
    let a = t.abs();
    if a <= 1.0 {
        [1.0, 0.0, 0.0]
    } else if a >= 2.0 {
        [0.0; 3]
    } else {
        let s = smoothstep(a - 1.0);
        [1.0 - s[0], -t.signum() * s[1], -s[2]]
    }
}

/// Normalised bump `exp(1 − 1/(1−t²))` on `(−1, 1)` with three derivatives.
pub fn bump(t: f64) -> [f64; 4] {
    if t.abs() >= 1.0 {
        return [0.0; 4];
    }
    let q = 1.0 - t * t;
    let b = (1.0 - 1.0 / q).exp();
    // derivatives of the exponent
    let g1 = -2.0 * t / (q * q);
    let g2 = -2.0 / (q * q) - 8.0 * t * t / (q * q * q);
    let g3 = -24.0 * t / (q * q * q) - 48.0 * t * t * t / (q * q * q * q);
    [b, b * g1, b * (g1 * g1 + g2), b * (g1 * g1 * g1 + 3.0 * g1 * g2 + g3)]
}

/// `bump((x − c)/r)` differentiated in `x`, with `x − c` wrapped into
/// `[−P/2, P/2)` when a period is given.
fn scaled_bump(x: f64, c: f64, r: f64, period: Option<f64>) -> [f64; 4] {
    let mut d = x - c;
    if let Some(p) = period {
        d = (d + 0.5 * p).rem_euclid(p) - 0.5 * p;
    }
    let b = bump(d / r);
    [b[0], b[1] / r, b[2] / (r * r), b[3] / (r * r * r)]
}

/// Factor `amplitude · bump((x1−c1)/r1) · bump((x3−c3)/r3)` of the wedge
/// height; without `r3` it is `x3`-independent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeBump {
    pub amplitude: f64,
    pub c1: f64,
    pub r1: f64,
    #[serde(default)]
    pub c3: f64,
    #[serde(default)]
    pub r3: Option<f64>,
}

/// Edge displacement `amplitude · bump((x3−c3)/r3)`, constant without `r3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeBump {
    pub amplitude: f64,
    #[serde(default)]
    pub c3: f64,
    #[serde(default)]
    pub r3: Option<f64>,
}

/// Wedge surface `x2 = w(x1, x3)` and its edge `x1 = e1(x3)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WedgeGeometry {
    pub wedge: Vec<WedgeBump>,
    pub edge: Vec<EdgeBump>,
    /// Period in `x3` used to wrap the bumps.
    pub period: Option<f64>,
}

/// `w` with all first and second derivatives in `(x1, x3)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WedgeDerivs {
    pub w: f64,
    pub w1: f64,
    pub w3: f64,
    pub w11: f64,
    pub w13: f64,
    pub w33: f64,
}

impl WedgeGeometry {
    pub fn flat() -> Self {
        Self::default()
    }

    pub fn is_flat(&self) -> bool {
        self.wedge.iter().all(|b| b.amplitude == 0.0) && self.edge.iter().all(|b| b.amplitude == 0.0)
    }

    /// Copy with every amplitude multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        let mut g = self.clone();
        g.wedge.iter_mut().for_each(|b| b.amplitude *= t);
        g.edge.iter_mut().for_each(|b| b.amplitude *= t);
        g
    }

    pub fn w_derivs(&self, x1: f64, x3: f64) -> WedgeDerivs {
        let mut d = WedgeDerivs::default();
        for b in &self.wedge {
            let f = scaled_bump(x1, b.c1, b.r1, None);
            let g = match b.r3 {
                Some(r3) => scaled_bump(x3, b.c3, r3, self.period),
                None => [1.0, 0.0, 0.0, 0.0],
            };
            let a = b.amplitude;
            d.w += a * f[0] * g[0];
            d.w1 += a * f[1] * g[0];
            d.w3 += a * f[0] * g[1];
            d.w11 += a * f[2] * g[0];
            d.w13 += a * f[1] * g[1];
            d.w33 += a * f[0] * g[2];
        }
        d
    }

    pub fn w(&self, x1: f64, x3: f64) -> f64 {
        self.w_derivs(x1, x3).w
    }

    /// `∂^{p+q} w / ∂x1^p ∂x3^q` for `p + q ≤ 3`.
    pub fn w_partial(&self, x1: f64, x3: f64, p: usize, q: usize) -> f64 {
        assert!(p + q <= 3, "wedge derivatives are available up to order 3");
        self.wedge
            .iter()
            .map(|b| {
                let f = scaled_bump(x1, b.c1, b.r1, None);
                let g = match b.r3 {
                    Some(r3) => scaled_bump(x3, b.c3, r3, self.period),
                    None => [1.0, 0.0, 0.0, 0.0],
                };
                b.amplitude * f[p] * g[q]
            })
            .sum()
    }

    /// `e1^{(p)}` for `p ≤ 3`.
    pub fn e1_partial(&self, x3: f64, p: usize) -> f64 {
        self.edge
            .iter()
            .map(|b| {
                let g = match b.r3 {
                    Some(r3) => scaled_bump(x3, b.c3, r3, self.period),
                    None => [1.0, 0.0, 0.0, 0.0],
                };
                b.amplitude * g[p]
            })
            .sum()
    }

    /// `e1` and its first two derivatives.
    pub fn e1_derivs(&self, x3: f64) -> [f64; 3] {
        let mut e = [0.0; 3];
        for b in &self.edge {
            let g = match b.r3 {
                Some(r3) => scaled_bump(x3, b.c3, r3, self.period),
                None => [1.0, 0.0, 0.0, 0.0],
            };
            for k in 0..3 {
                e[k] += b.amplitude * g[k];
            }
        }
        e
    }

    pub fn e1(&self, x3: f64) -> f64 {
        self.e1_derivs(x3)[0]
    }

    /// `e2(x3) = w(e1(x3), x3)`.
    pub fn e2(&self, x3: f64) -> f64 {
        self.w(self.e1(x3), x3)
    }

    pub fn edge_point(&self, x3: f64) -> [f64; 3] {
        let e1 = self.e1(x3);
        [e1, self.w(e1, x3), x3]
    }

    /// Largest `|w|, |Dw|, |D²w|` and `|e1|, |e1'|, |e1''|`, a crude size
    /// measure independent of the grid.
    pub fn size(&self) -> f64 {
        let mut m: f64 = 0.0;
        for b in &self.wedge {
            let s = b.r3.map_or(1.0, |r| r.min(1.0));
            m = m.max(b.amplitude.abs() / (b.r1.min(1.0) * s).powi(2));
        }
        for b in &self.edge {
            let s = b.r3.map_or(1.0, |r| r.min(1.0));
            m = m.max(b.amplitude.abs() / (s * s));
        }
        m
    }
}

/// Shock perturbation `δŝ(y2, y3)` sampled on the shock plane at the shock
/// nodes of a grid, with the attachment node `y2 = 0` prepended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockPerturbation {
    pub sigma: f64,
    /// `y2` sample positions, strictly increasing, `y2[0] = 0`.
    pub y2: Vec<f64>,
    pub z: ZAxis,
    /// `values[k * y2.len() + m]` is `δŝ(y2[m], z_k)`.
    pub values: Vec<f64>,
}

/// Values of `S = δŝ` and partials along one `y2` column, as `y3`-splines.
enum Column {
    Planar([f64; 3]),
    Splines([CubicSpline; 3]),
}

impl Column {
    /// `[S, S_a, S_b, S_aa, S_ab, S_bb]` at `b = y3` (`a = y2`).
    fn eval(&self, b: f64) -> [f64; 6] {
        match self {
            Column::Planar(v) => [v[0], v[1], 0.0, v[2], 0.0, 0.0],
            Column::Splines([s, sa, saa]) => {
                let e = s.eval(b);
                let ea = sa.eval(b);
                [e[0], ea[0], e[1], saa.eval(b)[0], ea[1], e[2]]
            }
        }
    }
}

impl ShockPerturbation {
    /// Zero perturbation on the shock nodes of `grid`.
    pub fn zero(grid: &Grid, sigma: f64) -> Self {
        let mut y2 = Vec::with_capacity(grid.ns + 1);
        y2.push(0.0);
        y2.extend((0..grid.ns).map(|i| grid.shock_y2(i)));
        Self {
            sigma,
            values: vec![0.0; y2.len() * grid.nz()],
            y2,
            z: grid.z,
        }
    }

    /// Samples `f(y2, y3)` on the shock nodes of `grid`.
    pub fn from_fn(grid: &Grid, sigma: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut sp = Self::zero(grid, sigma);
        let n = sp.y2.len();
        for k in 0..grid.nz() {
            let z = grid.zc(k);
            for m in 0..n {
                sp.values[k * n + m] = f(sp.y2[m], z);
            }
        }
        sp
    }

    pub fn n_y2(&self) -> usize {
        self.y2.len()
    }

    pub fn at(&self, m: usize, k: usize) -> f64 {
        self.values[k * self.y2.len() + m]
    }

    pub fn set(&mut self, m: usize, k: usize, v: f64) {
        let n = self.y2.len();
        self.values[k * n + m] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest deviation of the attachment node from `e1`.
    pub fn attachment_error(&self, wedge: &WedgeGeometry) -> f64 {
        (0..self.z.len())
            .map(|k| (self.at(0, k) - wedge.e1(self.z.coord(k))).abs())
            .fold(0.0, f64::max)
    }

    fn y2_spline(&self, k: usize) -> CubicSpline {
        let n = self.y2.len();
        CubicSpline::natural(self.y2.clone(), self.values[k * n..(k + 1) * n].to_vec())
    }

    fn z_spline(&self, data: Vec<f64>) -> CubicSpline {
        match self.z {
            ZAxis::Periodic { z0, period, .. } => CubicSpline::periodic(z0, period, data),
            ZAxis::Capped { .. } => CubicSpline::natural_compact(self.z.coords(), data),
            ZAxis::Planar => unreachable!("planar column has no z spline"),
        }
    }

    fn y2_splines(&self) -> Vec<CubicSpline> {
        (0..self.z.len()).map(|k| self.y2_spline(k)).collect()
    }

    fn column(&self, splines: &[CubicSpline], y2: f64) -> Column {
        let samples: Vec<[f64; 3]> = splines.iter().map(|s| s.eval(y2)).collect();
        if self.z.is_planar() {
            return Column::Planar(samples[0]);
        }
        let comp = |c: usize| samples.iter().map(|s| s[c]).collect::<Vec<_>>();
        Column::Splines([self.z_spline(comp(0)), self.z_spline(comp(1)), self.z_spline(comp(2))])
    }

    /// `δŝ(y2, y3)` by tensor cubic interpolation.
    pub fn eval(&self, y2: f64, y3: f64) -> f64 {
        self.column(&self.y2_splines(), y2).eval(y3)[0]
    }

    /// `[S, S_2, S_3, S_22, S_23, S_33]` at every node, ordered like `values`.
    pub fn node_derivatives(&self) -> Vec<[f64; 6]> {
        let splines = self.y2_splines();
        let n = self.y2.len();
        let mut out = vec![[0.0; 6]; self.values.len()];
        for m in 0..n {
            let col = self.column(&splines, self.y2[m]);
            for k in 0..self.z.len() {
                out[k * n + m] = col.eval(self.z.coord(k));
            }
        }
        out
    }

    /// The mollified extension `δs̄` over the quadrant `y1, y2 > 0`.
    pub fn mollify_extend(&self) -> Extension<'_> {
        Extension {
            sp: self,
            splines: self.y2_splines(),
        }
    }
}

/// `δs̄` with its gradient and Hessian in `y`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExtDerivs {
    pub v: f64,
    pub d: [f64; 3],
    pub dd: [[f64; 3]; 3],
}

/// Mollified extension `δs̄(y) = η(ζ) ∫ δŝ(a, y3 + tζ) ξ(t) dt` with
/// `ζ = σy1 − y2` and `a = (σy1 + y2)/2`.
///
/// `a` equals `y2` on the shock plane and is comparable to `|(y1, y2)|` on
/// the quadrant, so the edge behaviour of `δŝ` stays at the edge instead of
/// spreading along the wedge `y2 = 0`.
pub struct Extension<'a> {
    sp: &'a ShockPerturbation,
    splines: Vec<CubicSpline>,
}

/// Evaluates `δs̄` at points sharing `(y1, y2)`.
pub struct ExtensionColumn {
    sigma: f64,
    zeta: f64,
    eta: [f64; 3],
    col: Option<Column>,
}

impl ExtensionColumn {
    pub fn eval(&self, y3: f64) -> ExtDerivs {
        let Some(col) = &self.col else {
            return ExtDerivs::default();
        };
        let zeta = self.zeta;
        // I and partials in (a, b = y3, ζ)
        let (mut i0, mut i2, mut i3, mut iz) = (0.0, 0.0, 0.0, 0.0);
        let (mut i22, mut i23, mut i33, mut i2z, mut i3z, mut izz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        match col {
            Column::Planar(v) => {
                i0 = v[0];
                i2 = v[1];
                i22 = v[2];
            }
            Column::Splines(_) => {
                for &(t, w) in kernel() {
                    let s = col.eval(y3 + t * zeta);
                    i0 += w * s[0];
                    i2 += w * s[1];
                    i3 += w * s[2];
                    iz += w * t * s[2];
                    i22 += w * s[3];
                    i23 += w * s[4];
                    i33 += w * s[5];
                    i2z += w * t * s[4];
                    i3z += w * t * s[5];
                    izz += w * t * t * s[5];
                }
            }
        }
        let [e, e1, e2] = self.eta;
        let g = e * i0;
        let gz = e1 * i0 + e * iz;
        let gzz = e2 * i0 + 2.0 * e1 * iz + e * izz;
        let g2 = e * i2;
        let g2z = e1 * i2 + e * i2z;
        let g22 = e * i22;
        let g3 = e * i3;
        let g3z = e1 * i3 + e * i3z;
        let g33 = e * i33;
        let g23 = e * i23;
        let s = self.sigma;
        // ∂(a, ζ)/∂(y1, y2) with a = (σy1 + y2)/2, ζ = σy1 − y2
        let p = [0.5 * s, 0.5];
        let q = [s, -1.0];
        let d = [p[0] * g2 + q[0] * gz, p[1] * g2 + q[1] * gz, g3];
        let mut dd = [[0.0; 3]; 3];
        for a in 0..2 {
            for b in 0..2 {
                dd[a][b] = p[a] * p[b] * g22 + (p[a] * q[b] + q[a] * p[b]) * g2z + q[a] * q[b] * gzz;
            }
            dd[a][2] = p[a] * g23 + q[a] * g3z;
            dd[2][a] = dd[a][2];
        }
        dd[2][2] = g33;
        ExtDerivs { v: g, d, dd }
    }
}

impl Extension<'_> {
    pub fn column(&self, y1: f64, y2: f64) -> ExtensionColumn {
        let zeta = self.sp.sigma * y1 - y2;
        let eta = cutoff(zeta);
        let a = 0.5 * (self.sp.sigma * y1 + y2);
        let col = (eta[0] != 0.0 || eta[1] != 0.0 || eta[2] != 0.0).then(|| self.sp.column(&self.splines, a));
        ExtensionColumn {
            sigma: self.sp.sigma,
            zeta,
            eta,
            col,
        }
    }

    pub fn eval(&self, y: [f64; 3]) -> ExtDerivs {
        self.column(y[0], y[1]).eval(y[2])
    }
}

/// Jacobian `∂y_i/∂x_j` and second derivatives `∂²y_i/∂x_k∂x_m` at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JacobianData {
    pub x: [f64; 3],
    pub j: [[f64; 3]; 3],
    /// `h[i][k][m] = ∂²y_i/∂x_k∂x_m`.
    pub h: [[[f64; 3]; 3]; 3],
    pub wedge: WedgeDerivs,
}

impl JacobianData {
    pub fn det(&self) -> f64 {
        let j = &self.j;
        j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
    }

    /// `D_x u = D_y u · J`.
    pub fn grad_x(&self, dy: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (m, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|l| dy[l] * self.j[l][m]).sum();
        }
        out
    }
}

/// The change of variables built from a wedge and a shock perturbation.
pub struct Transform<'a> {
    pub wedge: &'a WedgeGeometry,
    pub shock: &'a ShockPerturbation,
}

impl<'a> Transform<'a> {
    pub fn new(wedge: &'a WedgeGeometry, shock: &'a ShockPerturbation) -> Self {
        Self { wedge, shock }
    }

    /// `x(y)`: explicit.
    pub fn inverse(&self, y: [f64; 3]) -> [f64; 3] {
        let x1 = y[0] + self.shock.mollify_extend().eval(y).v;
        [x1, y[1] + self.wedge.w(x1, y[2]), y[2]]
    }

    /// `y(x)` by damped Newton on `x1 = y1 + δs̄(y1, x2 − w(x1, x3), x3)`.
    pub fn forward(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let y2 = x[1] - self.wedge.w(x[0], x[2]);
        let y3 = x[2];
        let ext = self.shock.mollify_extend();
        let resid = |y1: f64| {
            let e = ext.eval([y1, y2, y3]);
            (y1 + e.v - x[0], 1.0 + e.d[0])
        };
        let mut y1 = x[0];
        let (mut r, mut dr) = resid(y1);
        for _ in 0..50 {
            if r.abs() <= 1e-14 * (1.0 + x[0].abs()) {
                return Ok([y1, y2, y3]);
            }
            if dr <= 0.0 {
                break;
            }
            let step = r / dr;
            let mut lam = 1.0;
            loop {
                let cand = y1 - lam * step;
                let (rc, dc) = resid(cand);
                if rc.abs() < r.abs() || lam < 1e-6 {
                    y1 = cand;
                    r = rc;
                    dr = dc;
                    break;
                }
                lam *= 0.5;
            }
        }
        if r.abs() <= 1e-12 * (1.0 + x[0].abs()) {
            return Ok([y1, y2, y3]);
        }
        Err(Error::TransformSingular(format!(
            "inverse of x1 = y1 + ds(y) failed at x = {x:?} (residual {r:e})"
        )))
    }

    /// Jacobian data at `y`; `ext` is `δs̄` with its derivatives there.
    pub fn jacobian_from(&self, y: [f64; 3], ext: &ExtDerivs) -> Result<JacobianData> {
        let x1 = y[0] + ext.v;
        let x3 = y[2];
        let wd = self.wedge.w_derivs(x1, x3);
        let dden = 1.0 + ext.d[0];
        if dden <= 0.5 {
            return Err(Error::TransformSingular(format!(
                "1 + d(ds)/dy1 = {dden} at y = {y:?}"
            )));
        }
        let [_, s2, s3] = ext.d;
        let (w1, w3) = (wd.w1, wd.w3);
        let j = [
            [(1.0 + s2 * w1) / dden, -s2 / dden, (s2 * w3 - s3) / dden],
            [-w1, 1.0, -w3],
            [0.0, 0.0, 1.0],
        ];
        // ∂S_i/∂x_m = Σ_l S_il J_lm
        let mut ds = [[0.0; 3]; 3];
        for i in 0..3 {
            for m in 0..3 {
                ds[i][m] = (0..3).map(|l| ext.dd[i][l] * j[l][m]).sum();
            }
        }
        let dw1 = [wd.w11, 0.0, wd.w13];
        let dw3 = [wd.w13, 0.0, wd.w33];
        let mut h = [[[0.0; 3]; 3]; 3];
        for m in 0..3 {
            let dd = ds[0][m];
            let d2 = ds[1][m];
            let d3 = ds[2][m];
            let n1 = 1.0 + s2 * w1;
            let n2 = -s2;
            let n3 = s2 * w3 - s3;
            let dn1 = d2 * w1 + s2 * dw1[m];
            let dn2 = -d2;
            let dn3 = d2 * w3 + s2 * dw3[m] - d3;
            let q = dden * dden;
            h[0][0][m] = (dn1 * dden - n1 * dd) / q;
            h[0][1][m] = (dn2 * dden - n2 * dd) / q;
            h[0][2][m] = (dn3 * dden - n3 * dd) / q;
            h[1][0][m] = -dw1[m];
            h[1][2][m] = -dw3[m];
        }
        Ok(JacobianData {
            x: [x1, y[1] + wd.w, x3],
            j,
            h,
            wedge: wd,
        })
    }

    pub fn jacobian(&self, y: [f64; 3]) -> Result<JacobianData> {
        let e = self.shock.mollify_extend().eval(y);
        self.jacobian_from(y, &e)
    }

    /// Jacobian data at every node of `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<JacobianData>> {
        let ext = self.shock.mollify_extend();
        let mut out = vec![JacobianData::default(); grid.len()];
        for i in 0..grid.ns {
            for jn in 0..grid.nt {
                let y = grid.y(i, jn, 0);
                let col = ext.column(y[0], y[1]);
                for k in 0..grid.nz() {
                    let yk = [y[0], y[1], grid.zc(k)];
                    out[grid.idx(i, jn, k)] = self.jacobian_from(yk, &col.eval(yk[2]))?;
                }
            }
        }
        Ok(out)
    }
}
