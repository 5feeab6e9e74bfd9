//! Structured grid of the truncated wedge domain in scaled log-polar
//! coordinates `(s, θ̄, y3)` with `s = ln r̄`, `ȳ1 = d1 y1 = r̄ cos θ̄`,
//! `ȳ2 = d2 y2 = r̄ sin θ̄`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment of the edge-parallel direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ZAxis {
    /// `y3`-invariant reduction with a single node layer.
    Planar,
    /// Periodic cell `[z0, z0 + period)` with `n` nodes.
    Periodic { z0: f64, period: f64, n: usize },
    /// `[z_min, z_max]` with `n` nodes including the homogeneous Dirichlet caps.
    Capped { z_min: f64, z_max: f64, n: usize },
}

impl ZAxis {
    pub fn len(&self) -> usize {
        match *self {
            ZAxis::Planar => 1,
            ZAxis::Periodic { n, .. } | ZAxis::Capped { n, .. } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_planar(&self) -> bool {
        matches!(self, ZAxis::Planar)
    }

    pub fn spacing(&self) -> f64 {
        match *self {
            ZAxis::Planar => 1.0,
            ZAxis::Periodic { period, n, .. } => period / n as f64,
            ZAxis::Capped { z_min, z_max, n } => (z_max - z_min) / (n - 1) as f64,
        }
    }

    pub fn coord(&self, k: usize) -> f64 {
        match *self {
            ZAxis::Planar => 0.0,
            ZAxis::Periodic { z0, .. } => z0 + self.spacing() * k as f64,
            ZAxis::Capped { z_min, .. } => z_min + self.spacing() * k as f64,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.coord(k)).collect()
    }

    pub fn period(&self) -> Option<f64> {
        match *self {
            ZAxis::Periodic { period, .. } => Some(period),
            _ => None,
        }
    }

    /// Neighbour index `k + off`, wrapping in the periodic case.
    pub fn offset(&self, k: usize, off: isize) -> Option<usize> {
        let n = self.len() as isize;
        let kk = k as isize + off;
        match self {
            ZAxis::Planar => (off == 0).then_some(k),
            ZAxis::Periodic { .. } => Some(kk.rem_euclid(n) as usize),
            ZAxis::Capped { .. } => (0..n).contains(&kk).then_some(kk as usize),
        }
    }

    pub fn is_cap(&self, k: usize) -> bool {
        matches!(self, ZAxis::Capped { n, .. } if k == 0 || k + 1 == *n)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ZAxis::Planar => Ok(()),
            ZAxis::Periodic { period, n, .. } => {
                if n < 4 || !(period > 0.0) {
                    return Err(Error::Domain("periodic axis needs n >= 4 and a positive period".into()));
                }
                Ok(())
            }
            ZAxis::Capped { z_min, z_max, n } => {
                if n < 5 || !(z_max > z_min) {
                    return Err(Error::Domain("capped axis needs n >= 5 and z_max > z_min".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Interior,
    /// `θ̄ = 0`.
    Wedge,
    /// `θ̄ = ω̄`.
    Shock,
    /// `r̄ = r_in`.
    InnerCut,
    /// `r̄ = r_out`.
    OuterCut,
    /// End of a capped `y3` axis.
    Cap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub ns: usize,
    pub nt: usize,
    pub z: ZAxis,
    pub s_min: f64,
    pub s_max: f64,
    pub omega_bar: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Grid {
    pub fn new(ns: usize, nt: usize, z: ZAxis, r_in: f64, r_out: f64, omega_bar: f64, d1: f64, d2: f64) -> Result<Self> {
        if ns < 5 || nt < 5 {
            return Err(Error::Domain(format!("grid {ns}x{nt} too small (need at least 5x5)")));
        }
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(Error::Domain(format!("radii must satisfy 0 < r_in < r_out, got {r_in}, {r_out}")));
        }
        if !(omega_bar > 0.0 && omega_bar < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Domain(format!("opening angle {omega_bar} outside (0, pi/2)")));
        }
        z.validate()?;
        Ok(Self {
            ns,
            nt,
            z,
            s_min: r_in.ln(),
            s_max: r_out.ln(),
            omega_bar,
            d1,
            d2,
        })
    }

    pub fn nz(&self) -> usize {
        self.z.len()
    }

    pub fn len(&self) -> usize {
        self.ns * self.nt * self.nz()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_planar(&self) -> bool {
        self.z.is_planar()
    }

    /// Linear index; `θ̄` runs fastest, then `s`, then `y3`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        j + self.nt * (i + self.ns * k)
    }

    #[inline]
    pub fn unidx(&self, n: usize) -> (usize, usize, usize) {
        let j = n % self.nt;
        let rest = n / self.nt;
        (rest % self.ns, j, rest / self.ns)
    }

    pub fn hs(&self) -> f64 {
        (self.s_max - self.s_min) / (self.ns - 1) as f64
    }

    pub fn ht(&self) -> f64 {
        self.omega_bar / (self.nt - 1) as f64
    }

    pub fn hz(&self) -> f64 {
        self.z.spacing()
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_min + self.hs() * i as f64
    }

    pub fn rbar(&self, i: usize) -> f64 {
        self.s(i).exp()
    }

    pub fn r_in(&self) -> f64 {
        self.s_min.exp()
    }

    pub fn r_out(&self) -> f64 {
        self.s_max.exp()
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.ht() * j as f64
    }

    pub fn zc(&self, k: usize) -> f64 {
        self.z.coord(k)
    }

    /// Unscaled coordinates `(y1, y2, y3)` of a node.
    pub fn y(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let r = self.rbar(i);
        let t = self.theta(j);
        [r * t.cos() / self.d1, r * t.sin() / self.d2, self.zc(k)]
    }

    pub fn kind(&self, i: usize, j: usize, k: usize) -> NodeKind {
        if self.z.is_cap(k) {
            NodeKind::Cap
        } else if i == 0 {
            NodeKind::InnerCut
        } else if i + 1 == self.ns {
            NodeKind::OuterCut
        } else if j == 0 {
            NodeKind::Wedge
        } else if j + 1 == self.nt {
            NodeKind::Shock
        } else {
            NodeKind::Interior
        }
    }

    /// Shock-plane coordinate `y2` of shock node `i`.
    pub fn kind_of(&self, n: usize) -> NodeKind {
        let (i, j, k) = self.unidx(n);
        self.kind(i, j, k)
    }

    pub fn shock_y2(&self, i: usize) -> f64 {
        self.rbar(i) * self.omega_bar.sin() / self.d2
    }

    /// Same geometry with a different resolution.
    pub fn with_resolution(&self, ns: usize, nt: usize, nz: Option<usize>) -> Result<Self> {
        let z = match (self.z, nz) {
            (ZAxis::Periodic { z0, period, .. }, Some(n)) => ZAxis::Periodic { z0, period, n },
            (ZAxis::Capped { z_min, z_max, .. }, Some(n)) => ZAxis::Capped { z_min, z_max, n },
            (z, _) => z,
        };
        Grid::new(ns, nt, z, self.r_in(), self.r_out(), self.omega_bar, self.d1, self.d2)
    }
}

/// First and second `y`-derivatives at a node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct YDerivs {
    pub d: [f64; 3],
    pub dd: [[f64; 3]; 3],
}

/// Derivatives in the computational coordinates `(s, θ̄, z)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompDerivs {
    pub s: f64,
    pub t: f64,
    pub z: f64,
    pub ss: f64,
    pub tt: f64,
    pub zz: f64,
    pub st: f64,
    pub sz: f64,
    pub tz: f64,
}

pub const GRID_MAGIC: &[u8; 8] = b"WFGRID01";

/// Scalar field on a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub label: String,
    pub iteration: Option<usize>,
}

/// Weights of a first derivative from three consecutive samples at offsets
/// `o, o+1, o+2` relative to the evaluation node, spacing `h`.
fn one_sided(o: isize, h: f64) -> [f64; 3] {
    match o {
        0 => [-1.5 / h, 2.0 / h, -0.5 / h],
        -1 => [-0.5 / h, 0.0, 0.5 / h],
        -2 => [0.5 / h, -2.0 / h, 1.5 / h],
        _ => unreachable!("stencil offset"),
    }
}

/// Second-order second-derivative weights for a three-point stencil start
/// `o`; the one-sided forms need a fourth sample.
fn second(o: isize, h: f64) -> (isize, [f64; 4]) {
    let h2 = h * h;
    match o {
        0 => (0, [2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2]),
        -1 => (-1, [1.0 / h2, -2.0 / h2, 1.0 / h2, 0.0]),
        -2 => (-3, [-1.0 / h2, 4.0 / h2, -5.0 / h2, 2.0 / h2]),
        _ => unreachable!("stencil offset"),
    }
}

/// Three-point stencil start for node `i` of `n` (central when possible).
fn stencil_start(i: usize, n: usize) -> isize {
    if i == 0 {
        0
    } else if i + 1 == n {
        -2
    } else {
        -1
    }
}

impl GridField {
    pub fn new(grid: Grid, label: &str) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
            label: label.to_string(),
            iteration: None,
        }
    }

    pub fn from_fn(grid: Grid, label: &str, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut out = Self::new(grid, label);
        for k in 0..grid.nz() {
            for i in 0..grid.ns {
                for j in 0..grid.nt {
                    out.values[grid.idx(i, j, k)] = f(i, j, k);
                }
            }
        }
        out
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.idx(i, j, k)]
    }

    /// Rows `(i, j, k, y1, y2, y3, value)` after a comment header line.
    pub fn to_csv(&self, header: &str) -> String {
        let mut s = format!("{header}\ni,j,k,y1,y2,y3,{}\n", self.label);
        for k in 0..self.grid.nz() {
            for i in 0..self.grid.ns {
                for j in 0..self.grid.nt {
                    let y = self.grid.y(i, j, k);
                    s.push_str(&format!(
                        "{i},{j},{k},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                        y[0],
                        y[1],
                        y[2],
                        self.at(i, j, k)
                    ));
                }
            }
        }
        s
    }

    /// Binary dump: magic `WFGRID01`, a 32-byte tag, `nz`, `ns`, `nt` as
    /// little-endian `u64`, then the values as little-endian `f64` in
    /// row-major `[nz][ns][nt]` order.
    pub fn to_binary(&self, tag: &[u8; 32]) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.values.len());
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(tag);
        for n in [self.grid.nz(), self.grid.ns, self.grid.nt] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Inverse of [`GridField::to_binary`] for a known grid.
    pub fn from_binary(grid: Grid, label: &str, bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Domain(format!("grid dump: {m}"));
        if bytes.len() < 64 || &bytes[..8] != GRID_MAGIC {
            return Err(bad("missing header"));
        }
        let dim = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()) as usize;
        if [dim(40), dim(48), dim(56)] != [grid.nz(), grid.ns, grid.nt] {
            return Err(bad("dimensions do not match the grid"));
        }
        let body = &bytes[64..];
        if body.len() != 8 * grid.len() {
            return Err(bad("truncated body"));
        }
        let mut out = Self::new(grid, label);
        for (v, c) in out.values.iter_mut().zip(body.chunks_exact(8)) {
            *v = f64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn kind(&self, n: usize) -> NodeKind {
        let (i, j, k) = self.grid.unidx(n);
        self.grid.kind(i, j, k)
    }

    /// Second-order finite differences in `(s, θ̄, z)`, one-sided at the grid edges.
    pub fn comp_derivs(&self, i: usize, j: usize, k: usize) -> CompDerivs {
        let g = &self.grid;
        let (hs, ht, hz) = (g.hs(), g.ht(), g.hz());
        let os = stencil_start(i, g.ns);
        let ot = stencil_start(j, g.nt);
        let ws1 = one_sided(os, hs);
        let wt1 = one_sided(ot, ht);
        let (os2, ws2) = second(os, hs);
        let (ot2, wt2) = second(ot, ht);
        let ii = |o: isize| (i as isize + o) as usize;
        let jj = |o: isize| (j as isize + o) as usize;
        let mut d = CompDerivs::default();
        for a in 0..4 {
            if ws2[a] != 0.0 {
                d.ss += ws2[a] * self.at(ii(os2 + a as isize), j, k);
            }
            if wt2[a] != 0.0 {
                d.tt += wt2[a] * self.at(i, jj(ot2 + a as isize), k);
            }
        }
        for a in 0..3 {
            d.s += ws1[a] * self.at(ii(os + a as isize), j, k);
            d.t += wt1[a] * self.at(i, jj(ot + a as isize), k);
            for b in 0..3 {
                d.st += ws1[a] * wt1[b] * self.at(ii(os + a as isize), jj(ot + b as isize), k);
            }
        }
        if !g.is_planar() {
            let nz = g.nz();
            let (oz, zidx): (isize, Box<dyn Fn(isize) -> usize>) = match g.z {
                ZAxis::Periodic { .. } => (-1, Box::new(move |o| g.z.offset(k, o).expect("periodic"))),
                _ => (stencil_start(k, nz), Box::new(move |o| (k as isize + o) as usize)),
            };
            let wz1 = one_sided(oz, hz);
            let (oz2, wz2) = second(oz, hz);
            for c in 0..4 {
                if wz2[c] != 0.0 {
                    d.zz += wz2[c] * self.at(i, j, zidx(oz2 + c as isize));
                }
            }
            for c in 0..3 {
                let kk = zidx(oz + c as isize);
                d.z += wz1[c] * self.at(i, j, kk);
                for a in 0..3 {
                    d.sz += ws1[a] * wz1[c] * self.at(ii(os + a as isize), j, kk);
                    d.tz += wt1[a] * wz1[c] * self.at(i, jj(ot + a as isize), kk);
                }
            }
        }
        d
    }

    /// `y`-gradient and Hessian at a node by the chain rule applied to
    /// [`GridField::comp_derivs`].
    pub fn y_derivs(&self, i: usize, j: usize, k: usize) -> YDerivs {
        let g = &self.grid;
        let c = self.comp_derivs(i, j, k);
        chain_rule(&c, g.s(i), g.theta(j), g.d1, g.d2)
    }
}

/// Converts `(s, θ̄, z)` derivatives into `y`-derivatives.
pub fn chain_rule(c: &CompDerivs, s: f64, theta: f64, d1: f64, d2: f64) -> YDerivs {
    let e1 = (-s).exp();
    let e2 = e1 * e1;
    let (co, sn) = (theta.cos(), theta.sin());
    // scaled-plane derivatives
    let vx = e1 * (co * c.s - sn * c.t);
    let vy = e1 * (sn * c.s + co * c.t);
    let vxx = e2 * (co * co * (c.ss - c.s) + sn * sn * (c.s + c.tt) - 2.0 * sn * co * (c.st - c.t));
    let vyy = e2 * (sn * sn * (c.ss - c.s) + co * co * (c.s + c.tt) + 2.0 * sn * co * (c.st - c.t));
    let vxy = e2 * (sn * co * (c.ss - 2.0 * c.s - c.tt) + (co * co - sn * sn) * (c.st - c.t));
    let vxz = e1 * (co * c.sz - sn * c.tz);
    let vyz = e1 * (sn * c.sz + co * c.tz);
    YDerivs {
        d: [d1 * vx, d2 * vy, c.z],
        dd: [
            [d1 * d1 * vxx, d1 * d2 * vxy, d1 * vxz],
            [d1 * d2 * vxy, d2 * d2 * vyy, d2 * vyz],
            [d1 * vxz, d2 * vyz, c.zz],
        ],
    }
}
