#![allow(dead_code)]

use wedgeshock::elliptic::{BvpData, LinearSystem, Operator, TruncatedDomain};
use wedgeshock::fixpoint::{FixedPointProblem, IterationOptions, UpstreamFlow};
use wedgeshock::geometry::{WedgeBump, WedgeGeometry};
use wedgeshock::grid::{GridField, NodeKind, ZAxis};
use wedgeshock::polar::{background, critical_angles, UpstreamSpec};
use wedgeshock::stability::{certify, StabilityCertificate};
use wedgeshock::{BackgroundSolution, GasModel};

/// Certified weak-shock background at a fraction of the transonic window.
pub fn fixture(gamma: f64, q0: f64, theta_i: f64, frac: f64) -> (BackgroundSolution, StabilityCertificate<f64>) {
    let gas = GasModel::new(gamma).unwrap();
    let spec = UpstreamSpec::new(gas, q0, theta_i).unwrap();
    let c = critical_angles(&spec).unwrap();
    let tw = c.theta_s_star + frac * (c.theta_w_star - c.theta_s_star);
    let bg = background(&spec, tw).unwrap();
    let cert = certify(&gas, &bg).unwrap();
    (bg, cert)
}

/// Planar reference case.
pub fn planar() -> (BackgroundSolution, StabilityCertificate<f64>) {
    fixture(1.4, 1.1, std::f64::consts::FRAC_PI_2, 0.5)
}

/// Oblique incidence, so the edge-parallel velocity is nonzero.
pub fn oblique() -> (BackgroundSolution, StabilityCertificate<f64>) {
    fixture(1.4, 1.2, 1.3, 0.5)
}

pub fn operator(c: &StabilityCertificate<f64>) -> Operator {
    Operator::new(c.a0, c.mu).unwrap()
}

/// Manufactured field `exp(−|ȳ − c|²/w²)·(1 + 0.3 sin(2π y3/P))` with its
/// gradient and Hessian in `y`.
pub struct Manufactured {
    pub d1: f64,
    pub d2: f64,
    pub c: [f64; 2],
    pub w: f64,
    pub period: Option<f64>,
}

impl Manufactured {
    pub fn eval(&self, y: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let yb = [self.d1 * y[0] - self.c[0], self.d2 * y[1] - self.c[1]];
        let w2 = self.w * self.w;
        let g = (-(yb[0] * yb[0] + yb[1] * yb[1]) / w2).exp();
        let d = [self.d1, self.d2];
        let gy = [-2.0 * yb[0] / w2 * g * d[0], -2.0 * yb[1] / w2 * g * d[1]];
        let mut gyy = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let delta = if a == b { 2.0 / w2 } else { 0.0 };
                gyy[a][b] = (4.0 * yb[a] * yb[b] / (w2 * w2) - delta) * g * d[a] * d[b];
            }
        }
        let (z, dz, ddz) = match self.period {
            Some(p) => {
                let k = 2.0 * std::f64::consts::PI / p;
                (1.0 + 0.3 * (k * y[2]).sin(), 0.3 * k * (k * y[2]).cos(), -0.3 * k * k * (k * y[2]).sin())
            }
            None => (1.0, 0.0, 0.0),
        };
        let grad = [gy[0] * z, gy[1] * z, g * dz];
        let hess = [
            [gyy[0][0] * z, gyy[0][1] * z, gy[0] * dz],
            [gyy[1][0] * z, gyy[1][1] * z, gy[1] * dz],
            [gy[0] * dz, gy[1] * dz, g * ddz],
        ];
        (g * z, grad, hess)
    }

    /// Data of the mixed problem reproducing this field, and the field itself.
    pub fn data(&self, op: &Operator, dom: &TruncatedDomain) -> (BvpData, GridField) {
        let g = &dom.grid;
        let mut data = BvpData::zeros(g);
        let mut exact = GridField::new(*g, "exact");
        for n in 0..g.len() {
            let (i, j, k) = g.unidx(n);
            let y = g.y(i, j, k);
            let (v, dv, h) = self.eval(y);
            exact.values[n] = v;
            data.f1[n] = op.contract(&h);
            data.cut[n] = v;
            data.g[n] = match g.kind(i, j, k) {
                NodeKind::Wedge => dv[1],
                NodeKind::Shock => (0..3).map(|c| op.mu[c] * dv[c]).sum(),
                _ => 0.0,
            };
        }
        (data, exact)
    }
}

/// Max error over nodes with `r̄ ≥ r_min`.
pub fn max_error_away(v: &GridField, exact: &GridField, r_min: f64) -> f64 {
    let g = &v.grid;
    let mut e: f64 = 0.0;
    for n in 0..g.len() {
        let (i, _, _) = g.unidx(n);
        if g.rbar(i) >= r_min {
            e = e.max((v.values[n] - exact.values[n]).abs());
        }
    }
    e
}

/// Manufactured-solution errors on grids refined by 2 from `(ns, nt, nz)`.
pub fn mms_errors(
    c: &StabilityCertificate<f64>,
    base: (usize, usize, usize),
    levels: usize,
    radius: f64,
    period: Option<f64>,
    width: f64,
) -> Vec<f64> {
    let op = operator(c);
    let geom = c.sector();
    (0..levels)
        .map(|l| {
            let m = 1usize << l;
            let ns = (base.0 - 1) * m + 1;
            let nt = (base.1 - 1) * m + 1;
            let z = match period {
                Some(p) => ZAxis::Periodic { z0: 0.0, period: p, n: base.2 * m },
                None => ZAxis::Planar,
            };
            let dom = TruncatedDomain::symmetric(&geom, c.sigma, ns, nt, z, radius).unwrap();
            let sys = LinearSystem::assemble(&op, &dom).unwrap();
            let mf = Manufactured {
                d1: c.d1,
                d2: c.d2,
                c: [1.0, 0.25],
                w: width,
                period,
            };
            let (data, exact) = mf.data(&op, &dom);
            let (v, _) = sys.solve(&data).unwrap();
            max_error_away(&v, &exact, 0.1)
        })
        .collect()
}

/// Interior forcing `exp(−(ln r̄ / w)²)·4t(1−t)`, `t = θ̄/ω̄`: smooth, vanishing
/// towards the edge faster than any power.
pub fn smooth_forcing(sys: &LinearSystem, w: f64) -> BvpData {
    let g = sys.grid();
    let mut d = BvpData::zeros(g);
    for n in 0..g.len() {
        let (i, j, k) = g.unidx(n);
        if g.kind(i, j, k) == NodeKind::Interior {
            let x = g.rbar(i).ln() / w;
            let t = g.theta(j) / g.omega_bar;
            d.f1[n] = (-x * x).exp() * 4.0 * t * (1.0 - t);
        }
    }
    d
}

/// Radial node count giving `per_octave` nodes per factor 2 on `[1/R, R]`.
pub fn ns_for(radius: f64, per_octave: usize) -> usize {
    (2.0 * radius.log2() * per_octave as f64).round() as usize + 1
}

/// Well-conditioned case for nonlinear runs: the downstream state sits
/// close to detachment, away from sonic.
pub fn run_fixture() -> (BackgroundSolution, StabilityCertificate<f64>) {
    fixture(1.4, 1.5, std::f64::consts::FRAC_PI_2, 0.9)
}

/// Broad `x3`-independent wedge bump on `x1 ∈ (0, 8)`.
pub fn broad_bump(amplitude: f64) -> WedgeGeometry {
    WedgeGeometry {
        wedge: vec![WedgeBump {
            amplitude,
            c1: 4.0,
            r1: 4.0,
            c3: 0.0,
            r3: None,
        }],
        edge: vec![],
        period: None,
    }
}

/// Planar problem on `r̄ ∈ [1/32, 32]`.
pub fn planar_problem(
    bg: BackgroundSolution,
    c: StabilityCertificate<f64>,
    wedge: WedgeGeometry,
    upstream: UpstreamFlow,
    per_octave: usize,
    nt: usize,
) -> FixedPointProblem {
    let dom = TruncatedDomain::symmetric(&c.sector(), c.sigma, ns_for(32.0, per_octave), nt, ZAxis::Planar, 32.0).unwrap();
    FixedPointProblem::new(bg, c, wedge, upstream, &dom, IterationOptions::default()).unwrap()
}

/// `ρ(q²)` written out independently of the library.
pub fn rho(gamma: f64, q2: f64) -> f64 {
    (1.0 - 0.5 * (gamma - 1.0) * q2).powf(1.0 / (gamma - 1.0))
}

/// Wedge angle whose weak or strong root is the in-plane speed `u`: the
/// polar equation solved for `cos θw`.
pub fn theta_w_of_u(gamma: f64, q0: f64, theta_i: f64, u: f64) -> f64 {
    let a = q0 * theta_i.sin();
    let b = q0 * theta_i.cos();
    let rm = rho(gamma, q0 * q0);
    let rp = rho(gamma, u * u + b * b);
    ((rm * a * a + rp * u * u) / (a * u * (rm + rp))).acos()
}

/// `(θs*, θw*)` from a dense scan and golden-section refinement of
/// `θw(u)`; the sonic angle is `θw` at `u² + b² = 2/(γ+1)`.
pub fn critical_angles_oracle(gamma: f64, q0: f64, theta_i: f64) -> (f64, f64) {
    let a = q0 * theta_i.sin();
    let b = q0 * theta_i.cos();
    let f = |u: f64| theta_w_of_u(gamma, q0, theta_i, u);
    let cs2 = 2.0 / (gamma + 1.0);
    let u_sonic = (cs2 - b * b).sqrt();
    let theta_s = f(u_sonic);
    // the maximum of θw(u) lies between the normal-shock speed and a
    let (mut lo, mut hi) = (1e-6, a);
    let n = 4000;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..n {
        let u = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(u);
        if v.is_finite() && v > best.0 {
            best = (v, u);
        }
    }
    let h = (hi - lo) / n as f64;
    lo = best.1 - h;
    hi = best.1 + h;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(x1) > f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    (theta_s, f(0.5 * (lo + hi)))
}

/// `H(u, v)` written out independently.
pub fn jump(gamma: f64, u: [f64; 3], v: [f64; 3]) -> f64 {
    let q2 = |w: [f64; 3]| w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let (ru, rv) = (rho(gamma, q2(u)), rho(gamma, q2(v)));
    (0..3).map(|i| (ru * u[i] - rv * v[i]) * (u[i] - v[i])).sum()
}

/// Central-difference `H_v`.
pub fn jump_gradient_fd(gamma: f64, u: [f64; 3], v: [f64; 3], h: f64) -> [f64; 3] {
    let mut g = [0.0; 3];
    for k in 0..3 {
        let (mut p, mut m) = (v, v);
        p[k] += h;
        m[k] -= h;
        g[k] = (jump(gamma, u, p) - jump(gamma, u, m)) / (2.0 * h);
    }
    g
}

/// Ascending eigenvalues of a symmetric 3×3 matrix.
pub fn sym_eigenvalues(a: [[f64; 3]; 3]) -> [f64; 3] {
    let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
    let mut e: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|x, y| x.partial_cmp(y).unwrap());
    [e[0], e[1], e[2]]
}
