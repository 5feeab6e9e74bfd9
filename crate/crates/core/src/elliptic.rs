//! Finite-difference solver for the constant-coefficient mixed problem
//!
//! ```text
//! Σ a0_ij v_{y_i y_j} = f1      in 0 < y2 < σ y1, r_in < r̄ < r_out
//! v_{y2}              = g1      on the wedge θ̄ = 0
//! μ · Dv              = g2      on the shock θ̄ = ω̄
//! v                   = data    on the cuts r̄ = r_in, r̄ = r_out (and caps)
//! ```
//!
//! on the log-polar grid of [`Grid`], plus the barrier comparison harness.
//! Interior rows carry the operator multiplied by `r̄²`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, NodeKind, ZAxis};
use crate::sparse::{gmres, CsrBuilder, CsrMatrix, Ilu0, KrylovOptions, KrylovReport};
use crate::stability::SectorGeometry;

/// Condition imposed on the outer cut `r̄ = r_out`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarField {
    /// Prescribed values (zero unless cut data says otherwise).
    #[default]
    Dirichlet,
    /// `r̄ ∂_r̄ v = v`, exact for fields homogeneous of degree one.
    Homogeneous,
}

/// Truncated computational wedge with its grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncatedDomain {
    pub grid: Grid,
    pub sigma: f64,
    pub far_field: FarField,
}

impl TruncatedDomain {
    /// Grid of `ns × nt` (× `z`) nodes on `r̄ ∈ [r_in, r_out]` for the sector
    /// described by `geom`.
    pub fn new(
        geom: &SectorGeometry<f64>,
        sigma: f64,
        ns: usize,
        nt: usize,
        z: ZAxis,
        r_in: f64,
        r_out: f64,
    ) -> Result<Self> {
        if !(r_out > 4.0) {
            return Err(Error::Domain(format!("outer radius {r_out} must exceed 4")));
        }
        let grid = Grid::new(ns, nt, z, r_in, r_out, geom.omega_bar, geom.d1, geom.d2)?;
        Ok(Self {
            grid,
            sigma,
            far_field: FarField::Dirichlet,
        })
    }

    /// Symmetric truncation `r̄ ∈ [1/R, R]`.
    pub fn symmetric(geom: &SectorGeometry<f64>, sigma: f64, ns: usize, nt: usize, z: ZAxis, radius: f64) -> Result<Self> {
        Self::new(geom, sigma, ns, nt, z, 1.0 / radius, radius)
    }

    pub fn with_far_field(mut self, far_field: FarField) -> Self {
        self.far_field = far_field;
        self
    }

    pub fn radius(&self) -> f64 {
        self.grid.r_out()
    }

    pub fn is_dirichlet(&self, n: usize) -> bool {
        let (i, j, k) = self.grid.unidx(n);
        match self.grid.kind(i, j, k) {
            NodeKind::Cap | NodeKind::InnerCut => true,
            NodeKind::OuterCut => self.far_field == FarField::Dirichlet,
            _ => false,
        }
    }
}

/// Principal coefficients and obliqueness vector of the frozen problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Operator {
    pub a0: [[f64; 3]; 3],
    pub mu: [f64; 3],
}

impl Operator {
    pub fn new(a0: [[f64; 3]; 3], mu: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                if (a0[i][j] - a0[j][i]).abs() > 1e-12 * (1.0 + a0[i][j].abs()) {
                    return Err(Error::Domain("coefficient matrix is not symmetric".into()));
                }
            }
        }
        let m1 = a0[0][0];
        let m2 = a0[0][0] * a0[1][1] - a0[0][1] * a0[1][0];
        let m3 = a0[0][0] * (a0[1][1] * a0[2][2] - a0[1][2] * a0[2][1])
            - a0[0][1] * (a0[1][0] * a0[2][2] - a0[1][2] * a0[2][0])
            + a0[0][2] * (a0[1][0] * a0[2][1] - a0[1][1] * a0[2][0]);
        if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
            return Err(Error::Domain(format!(
                "coefficient matrix is not positive definite (leading minors {m1}, {m2}, {m3})"
            )));
        }
        Ok(Self { a0, mu })
    }

    /// `Σ a0_ij h_ij` for a Hessian `h`.
    pub fn contract(&self, h: &[[f64; 3]; 3]) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.a0[i][j] * h[i][j];
            }
        }
        acc
    }
}

/// Coefficients of `r̄² Σ a0_ij ∂_ij` in `(s, θ̄, z)`.
#[derive(Clone, Copy, Debug, Default)]
struct PolarCoefs {
    ss: f64,
    tt: f64,
    st: f64,
    s: f64,
    t: f64,
    sz: f64,
    tz: f64,
    zz: f64,
}

fn polar_coefs(a: &[[f64; 3]; 3], d1: f64, d2: f64, s: f64, theta: f64, planar: bool) -> PolarCoefs {
    let p = a[0][0] * d1 * d1;
    let q = a[1][1] * d2 * d2;
    let m = a[0][1] * d1 * d2;
    let (c, sn) = (theta.cos(), theta.sin());
    let mut out = PolarCoefs {
        ss: p * c * c + q * sn * sn + 2.0 * m * sn * c,
        tt: p * sn * sn + q * c * c - 2.0 * m * sn * c,
        st: 2.0 * (q - p) * sn * c + 2.0 * m * (c * c - sn * sn),
        s: (q - p) * (c * c - sn * sn) - 4.0 * m * sn * c,
        t: 2.0 * (p - q) * sn * c - 2.0 * m * (c * c - sn * sn),
        ..Default::default()
    };
    if !planar {
        let e = s.exp();
        out.sz = 2.0 * e * (a[0][2] * d1 * c + a[1][2] * d2 * sn);
        out.tz = 2.0 * e * (-a[0][2] * d1 * sn + a[1][2] * d2 * c);
        out.zz = a[2][2] * e * e;
    }
    out
}

/// Boundary and source data of one solve, all as full-length node vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct BvpData {
    /// Right-hand side, used at interior, wedge and shock nodes.
    pub f1: Vec<f64>,
    /// `g1` at wedge nodes, `g2` at shock nodes; ignored elsewhere.
    pub g: Vec<f64>,
    /// Values imposed at Dirichlet nodes.
    pub cut: Vec<f64>,
}

impl BvpData {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.len();
        Self {
            f1: vec![0.0; n],
            g: vec![0.0; n],
            cut: vec![0.0; n],
        }
    }
}

/// Edge trace data for the inner cut: `g3` and the edge values of `g1`,
/// `g2` per `y3` node.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeData {
    pub g3: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

/// Assembled linear system of the discrete mixed problem.
pub struct LinearSystem {
    pub dom: TruncatedDomain,
    pub op: Operator,
    pub matrix: CsrMatrix,
    ilu: Ilu0,
    /// Multiplier of `f1` per row.
    row_f: Vec<f64>,
    /// Contribution of the boundary datum per row (moved to the right side).
    row_g: Vec<f64>,
    dirichlet: Vec<bool>,
    /// Rows with an off-diagonal entry of the same sign as the diagonal.
    pub sign_violations: usize,
    pub opts: KrylovOptions,
}

/// Second-order one-sided weights of `∂` at the first (`fwd`) or last node.
const FWD: [f64; 3] = [-1.5, 2.0, -0.5];

struct Row {
    entries: Vec<(usize, f64)>,
    g: f64,
}

impl Row {
    fn add(&mut self, n: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((n, v));
        }
    }
}

fn upwind_weights(
    idx: usize,
    len: usize,
    upwind_back: bool,
    h: f64,
    periodic: bool,
) -> Vec<(isize, f64)> {
    // first derivative using points on the upwind side (second order when available)
    let sgn = if upwind_back { -1 } else { 1 };
    let room = if periodic {
        2
    } else if upwind_back {
        idx.min(2)
    } else {
        (len - 1 - idx).min(2)
    };
    let f = -(sgn as f64);
    match room {
        0 => vec![],
        1 => vec![(0, f / h), (sgn, -f / h)],
        _ => vec![(0, 1.5 * f / h), (sgn, -2.0 * f / h), (2 * sgn, 0.5 * f / h)],
    }
}

impl LinearSystem {
    pub fn assemble(op: &Operator, dom: &TruncatedDomain) -> Result<Self> {
        let g = &dom.grid;
        let n = g.len();
        let planar = g.is_planar();
        let (hs, ht, hz) = (g.hs(), g.ht(), g.hz());
        let (d1, d2) = (g.d1, g.d2);
        let cw = g.omega_bar.cos();
        let sw = g.omega_bar.sin();
        let (mu1, mu2, mu3) = (op.mu[0], op.mu[1], op.mu[2]);
        let a_sh = mu1 * d1 * cw + mu2 * d2 * sw;
        let b_sh = mu2 * d2 * cw - mu1 * d1 * sw;
        if !(b_sh > 0.0) {
            return Err(Error::Domain(format!(
                "obliqueness vector does not point out of the shock (B = {b_sh})"
            )));
        }
        let nz = g.nz();
        let periodic = matches!(g.z, ZAxis::Periodic { .. });
        let mut bld = CsrBuilder::new(n, n * if planar { 11 } else { 27 });
        let mut row_f = vec![0.0; n];
        let mut row_g = vec![0.0; n];
        let mut dirichlet = vec![false; n];
        let mut sign_violations = 0;
        let zoff = |k: usize, o: isize| g.z.offset(k, o).expect("interior z neighbour");
        for nn in 0..n {
            let (i, j, k) = g.unidx(nn);
            let kind = g.kind(i, j, k);
            let mut row = Row { entries: Vec::with_capacity(27), g: 0.0 };
            match kind {
                NodeKind::Cap | NodeKind::InnerCut => {
                    dirichlet[nn] = true;
                    bld.push_row(&[(nn, 1.0)]);
                    continue;
                }
                NodeKind::OuterCut => {
                    if dom.far_field == FarField::Dirichlet {
                        dirichlet[nn] = true;
                        bld.push_row(&[(nn, 1.0)]);
                    } else {
                        // (3v_i − 4v_{i−1} + v_{i−2})/(2hs) − v_i = 0
                        bld.push_row(&[
                            (nn, 1.5 / hs - 1.0),
                            (g.idx(i - 1, j, k), -2.0 / hs),
                            (g.idx(i - 2, j, k), 0.5 / hs),
                        ]);
                    }
                    continue;
                }
                _ => {}
            }
            let s = g.s(i);
            let es = s.exp();
            let c = polar_coefs(&op.a0, d1, d2, s, g.theta(j), planar);
            row_f[nn] = es * es;
            let at = |ii: usize, jj: usize, kk: usize| g.idx(ii, jj, kk);
            // s-derivatives
            row.add(at(i + 1, j, k), c.ss / (hs * hs) + c.s / (2.0 * hs));
            row.add(at(i - 1, j, k), c.ss / (hs * hs) - c.s / (2.0 * hs));
            row.add(nn, -2.0 * c.ss / (hs * hs));
            // θ-derivatives: central, with a ghost node at the boundary
            let w_tt = c.tt / (ht * ht);
            let w_t = c.t / (2.0 * ht);
            row.add(nn, -2.0 * w_tt);
            let nt = g.nt;
            match kind {
                NodeKind::Wedge => {
                    // ghost v_{−1} = v_1 − 2 ht e^s g1 / d2
                    row.add(at(i, 1, k), w_tt + w_t);
                    let ghost = w_tt - w_t;
                    row.add(at(i, 1, k), ghost);
                    row.g += ghost * (-2.0 * ht * es / d2);
                }
                NodeKind::Shock => {
                    // ghost v_{J+1} = v_{J−1} + (2ht/B)(e^s g2 − A D_s v − μ3 e^s D_z v)
                    let jm = nt - 2;
                    row.add(at(i, jm, k), w_tt - w_t);
                    let ghost = w_tt + w_t;
                    row.add(at(i, jm, k), ghost);
                    let fac = ghost * 2.0 * ht / b_sh;
                    row.g += fac * es;
                    for (o, w) in upwind_weights(i, g.ns, a_sh > 0.0, hs, false) {
                        row.add(at((i as isize + o) as usize, j, k), -fac * a_sh * w);
                    }
                    if !planar && mu3 != 0.0 {
                        for (o, w) in upwind_weights(k, nz, mu3 > 0.0, hz, periodic) {
                            row.add(at(i, j, zoff(k, o)), -fac * mu3 * es * w);
                        }
                    }
                }
                _ => {
                    row.add(at(i, j + 1, k), w_tt + w_t);
                    row.add(at(i, j - 1, k), w_tt - w_t);
                }
            }
            // θ first-derivative weights for mixed terms
            let tw: Vec<(usize, f64)> = match kind {
                NodeKind::Wedge => (0..3).map(|b| (b, FWD[b] / ht)).collect(),
                NodeKind::Shock => (0..3).map(|b| (nt - 1 - b, -FWD[b] / ht)).collect(),
                _ => vec![(j + 1, 0.5 / ht), (j - 1, -0.5 / ht)],
            };
            if c.st != 0.0 {
                for &(jj, wt) in &tw {
                    row.add(at(i + 1, jj, k), c.st * wt * 0.5 / hs);
                    row.add(at(i - 1, jj, k), -c.st * wt * 0.5 / hs);
                }
            }
            if !planar {
                let (kp, km) = (zoff(k, 1), zoff(k, -1));
                row.add(at(i, j, kp), c.zz / (hz * hz));
                row.add(at(i, j, km), c.zz / (hz * hz));
                row.add(nn, -2.0 * c.zz / (hz * hz));
                let q = 1.0 / (4.0 * hs * hz);
                row.add(at(i + 1, j, kp), c.sz * q);
                row.add(at(i + 1, j, km), -c.sz * q);
                row.add(at(i - 1, j, kp), -c.sz * q);
                row.add(at(i - 1, j, km), c.sz * q);
                if c.tz != 0.0 {
                    for &(jj, wt) in &tw {
                        row.add(at(i, jj, kp), c.tz * wt * 0.5 / hz);
                        row.add(at(i, jj, km), -c.tz * wt * 0.5 / hz);
                    }
                }
            }
            row_g[nn] = row.g;
            bld.push_row(&row.entries);
        }
        let matrix = bld.finish();
        for r in 0..n {
            if dirichlet[r] {
                continue;
            }
            let (cols, vals) = matrix.row(r);
            let diag = cols.iter().position(|&cc| cc == r).map(|p| vals[p]).unwrap_or(0.0);
            if cols
                .iter()
                .zip(vals)
                .any(|(&cc, &v)| cc != r && v * diag > 0.0 && v.abs() > 1e-12 * diag.abs())
            {
                sign_violations += 1;
            }
        }
        let ilu = Ilu0::new(&matrix)?;
        Ok(Self {
            dom: *dom,
            op: *op,
            matrix,
            ilu,
            row_f,
            row_g,
            dirichlet,
            sign_violations,
            opts: KrylovOptions::default(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.dom.grid
    }

    pub fn is_dirichlet(&self, n: usize) -> bool {
        self.dirichlet[n]
    }

    /// Right-hand side vector for `data`.
    pub fn rhs(&self, data: &BvpData) -> Vec<f64> {
        (0..self.matrix.n)
            .map(|n| {
                if self.dirichlet[n] {
                    data.cut[n]
                } else {
                    self.row_f[n] * data.f1[n] - self.row_g[n] * data.g[n]
                }
            })
            .collect()
    }

    /// `A v`, the discrete operator including boundary rows.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul(v)
    }

    /// Interior rows of `A v` divided by `r̄²`: the discrete `Σ a0_ij v_ij`.
    pub fn apply_operator(&self, v: &GridField) -> GridField {
        let av = self.apply(&v.values);
        let mut out = GridField::new(v.grid, "operator");
        for n in 0..av.len() {
            out.values[n] = if self.row_f[n] != 0.0 { av[n] / self.row_f[n] } else { 0.0 };
        }
        out
    }

    pub fn solve_vector(&self, b: &[f64], x0: Option<&[f64]>) -> Result<(Vec<f64>, KrylovReport)> {
        let mut x = match x0 {
            Some(x) => x.to_vec(),
            None => vec![0.0; b.len()],
        };
        let rep = gmres(&self.matrix, &self.ilu, b, &mut x, &self.opts)?;
        Ok((x, rep))
    }

    pub fn solve(&self, data: &BvpData) -> Result<(GridField, KrylovReport)> {
        let b = self.rhs(data);
        let (x, rep) = self.solve_vector(&b, None)?;
        let mut f = GridField::new(self.dom.grid, "v");
        f.values = x;
        Ok((f, rep))
    }

    /// Inner-cut values of the linear extension
    /// `g3 + y2 g1(0) + y1 (g2(0) − μ2 g1(0) − μ3 g3′)/μ1` of the edge data.
    pub fn edge_extension(&self, edge: &EdgeData) -> Vec<f64> {
        let g = &self.dom.grid;
        let [mu1, mu2, mu3] = self.op.mu;
        let nz = g.nz();
        let dg3: Vec<f64> = (0..nz)
            .map(|k| match g.z {
                ZAxis::Planar => 0.0,
                _ => {
                    let (kp, km) = (g.z.offset(k, 1), g.z.offset(k, -1));
                    match (kp, km) {
                        (Some(p), Some(m)) => (edge.g3[p] - edge.g3[m]) / (2.0 * g.hz()),
                        (Some(p), None) => (edge.g3[p] - edge.g3[k]) / g.hz(),
                        (None, Some(m)) => (edge.g3[k] - edge.g3[m]) / g.hz(),
                        _ => 0.0,
                    }
                }
            })
            .collect();
        let mut cut = vec![0.0; g.len()];
        for k in 0..nz {
            let h = (edge.g2[k] - mu2 * edge.g1[k] - mu3 * dg3[k]) / mu1;
            for j in 0..g.nt {
                let y = g.y(0, j, k);
                cut[g.idx(0, j, k)] = edge.g3[k] + y[1] * edge.g1[k] + y[0] * h;
            }
        }
        cut
    }
}

/// Solves the mixed problem with edge data `g3` realised through the linear
/// extension on the inner cut. Edge values of `g1`, `g2` are read from the
/// innermost wedge and shock nodes of `data.g`.
pub fn solve_mixed_bvp(sys: &LinearSystem, data: &BvpData, g3: Option<&[f64]>) -> Result<(GridField, KrylovReport)> {
    let g = sys.grid();
    let mut d = data.clone();
    if let Some(g3) = g3 {
        let nz = g.nz();
        let edge = EdgeData {
            g3: g3.to_vec(),
            g1: (0..nz).map(|k| data.g[g.idx(1, 0, k)]).collect(),
            g2: (0..nz).map(|k| data.g[g.idx(1, g.nt - 1, k)]).collect(),
        };
        let ext = sys.edge_extension(&edge);
        for k in 0..nz {
            for j in 0..g.nt {
                let n = g.idx(0, j, k);
                d.cut[n] = ext[n];
            }
        }
    }
    sys.solve(&d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    pub points: usize,
    /// `ln(r_max / r_min)` of the fitted range.
    pub log_range: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub near_edge: Option<PowerFit>,
    pub far_field: Option<PowerFit>,
    /// Set when a fit has fewer than 4 points or less than a factor 2 of range.
    pub warning: bool,
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<PowerFit> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Some(PowerFit {
        slope: sxy / sxx,
        points: pts.len(),
        log_range: hi - lo,
    })
}

/// Ring maxima `max_{θ̄, y3} |v|` per radial index.
pub fn ring_max(v: &GridField) -> Vec<f64> {
    let g = &v.grid;
    (0..g.ns)
        .map(|i| {
            let mut m: f64 = 0.0;
            for k in 0..g.nz() {
                for j in 0..g.nt {
                    m = m.max(v.at(i, j, k).abs());
                }
            }
            m
        })
        .collect()
}

/// Log-log slopes of the ring maxima over `r̄ ∈ [2/R, 0.1]` and, against
/// `Δ = |(y1, y2)| + 1`, over `r̄ ∈ [4, R/4]`.
pub fn decay_fit(v: &GridField, dom: &TruncatedDomain) -> DecayFit {
    let g = &v.grid;
    let radius = dom.radius();
    let rm = ring_max(v);
    let mut near = Vec::new();
    let mut far = Vec::new();
    for i in 0..g.ns {
        let r = g.rbar(i);
        if rm[i] <= 0.0 || !rm[i].is_finite() {
            continue;
        }
        if r >= 2.0 / radius * (1.0 - 1e-12) && r <= 0.1 * (1.0 + 1e-12) {
            near.push((r.ln(), rm[i].ln()));
        }
        if r >= 4.0 * (1.0 - 1e-12) && r <= radius / 4.0 * (1.0 + 1e-12) {
            let y = g.y(i, g.nt / 2, 0);
            let delta = (y[0] * y[0] + y[1] * y[1]).sqrt() + 1.0;
            far.push((delta.ln(), rm[i].ln()));
        }
    }
    let near_edge = least_squares_slope(&near);
    let far_field = least_squares_slope(&far);
    let weak = |f: &Option<PowerFit>| f.is_none_or(|p| p.points < 4 || p.log_range < 2f64.ln());
    DecayFit {
        warning: weak(&near_edge) || weak(&far_field),
        near_edge,
        far_field,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierRole {
    Decay,
    Regularity,
    Uniqueness,
}

/// Comparison function `scale · r̄^l sin(t θ̄ + θ0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierSpec {
    pub l: f64,
    pub t: f64,
    pub theta0: f64,
    pub scale: f64,
    pub role: BarrierRole,
}

impl BarrierSpec {
    /// `v1`-type barrier `r̄^β sin((β+τ)θ̄ + π/2 + τ)`.
    pub fn decay(beta: f64, tau: f64, scale: f64) -> Self {
        Self {
            l: beta,
            t: beta + tau,
            theta0: std::f64::consts::FRAC_PI_2 + tau,
            scale,
            role: BarrierRole::Decay,
        }
    }

    /// `v2`-type barrier `r̄^{1+α} sin((1+α+τ)θ̄ + π/2 + τ)`.
    pub fn regularity(alpha: f64, tau: f64, scale: f64) -> Self {
        Self {
            role: BarrierRole::Regularity,
            ..Self::decay(1.0 + alpha, tau, scale)
        }
    }

    pub fn eval(&self, rbar: f64, theta: f64) -> f64 {
        self.scale * rbar.powf(self.l) * (self.t * theta + self.theta0).sin()
    }

    pub fn sample(&self, grid: &Grid) -> GridField {
        GridField::from_fn(*grid, "barrier", |i, j, _| self.eval(grid.rbar(i), grid.theta(j)))
    }

    /// Smallest `sin(tθ̄ + θ0)` over `[0, ω̄]`.
    pub fn sine_floor(&self, omega_bar: f64) -> f64 {
        let a = self.theta0;
        let b = self.t * omega_bar + self.theta0;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut m = lo.sin().min(hi.sin());
        let pi = std::f64::consts::PI;
        let mut k = ((lo - 1.5 * pi) / (2.0 * pi)).ceil();
        while 1.5 * pi + 2.0 * pi * k <= hi {
            m = -1.0;
            k += 1.0;
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `|v| ≤ barrier` at every node.
    pub dominated: bool,
    /// `min (barrier − |v|)` over nodes.
    pub worst_margin: f64,
    /// Largest value of `A·V` (should be ≤ 0) over interior, wedge and shock rows.
    pub interior_excess: f64,
    pub wedge_excess: f64,
    pub shock_excess: f64,
    pub supersolution: bool,
}

/// Checks `|v| ≤ V` nodewise, up to the linear solver tolerance, and the
/// discrete supersolution inequalities of `V` for the homogeneous boundary
/// operators.
pub fn comparison_check(v: &GridField, barrier: &BarrierSpec, sys: &LinearSystem) -> ComparisonReport {
    let g = sys.grid();
    let bv = barrier.sample(g);
    let tol = 10.0 * sys.opts.rel_tol * bv.max_abs();
    let mut worst = f64::INFINITY;
    for n in 0..g.len() {
        worst = worst.min(bv.values[n] - v.values[n].abs());
    }
    let av = sys.apply(&bv.values);
    let (mut ie, mut we, mut se) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for n in 0..g.len() {
        let (i, j, k) = g.unidx(n);
        let scale = 1.0 / sys.row_f[n].max(f64::MIN_POSITIVE);
        match g.kind(i, j, k) {
            NodeKind::Interior => ie = ie.max(av[n] * scale),
            NodeKind::Wedge => we = we.max(av[n] * scale),
            NodeKind::Shock => se = se.max(av[n] * scale),
            _ => {}
        }
    }
    let eps = 1e-12 * bv.max_abs().max(1.0);
    ComparisonReport {
        dominated: worst >= -tol,
        worst_margin: worst,
        interior_excess: ie,
        wedge_excess: we,
        shock_excess: se,
        supersolution: ie <= eps && we <= eps && se <= eps,
    }
}

/// Solves with data generated by the barrier: `b = ρ ⊙ (A V)` on equation
/// rows and `ρ V` at Dirichlet rows, `|ρ| ≤ 1`.
pub fn solve_barrier_data(sys: &LinearSystem, barrier: &BarrierSpec, rho: &[f64]) -> Result<(GridField, KrylovReport)> {
    let g = sys.grid();
    let bv = barrier.sample(g);
    let av = sys.apply(&bv.values);
    let b: Vec<f64> = (0..g.len())
        .map(|n| if sys.is_dirichlet(n) { rho[n] * bv.values[n] } else { rho[n] * av[n] })
        .collect();
    let (x, rep) = sys.solve_vector(&b, None)?;
    let mut f = GridField::new(*g, "v");
    f.values = x;
    Ok((f, rep))
}

/// Radius beyond which `τ |y|^{β′}` exceeds `C2 |y|^β`.
pub fn uniqueness_crossing_radius(c2: f64, tau: f64, beta: f64, beta_prime: f64) -> f64 {
    (c2 / tau).powf(1.0 / (beta_prime - beta))
}

/// Uniqueness barrier `τ (C1 v3 + |y|^{β′})` on the grid, with `v3` the decay barrier.
pub fn uniqueness_barrier(grid: &Grid, v3: &BarrierSpec, c1: f64, tau: f64, beta_prime: f64) -> GridField {
    GridField::from_fn(*grid, "uniqueness", |i, j, k| {
        let y = grid.y(i, j, k);
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        tau * (c1 * v3.eval(grid.rbar(i), grid.theta(j)) + r.powf(beta_prime))
    })
}
