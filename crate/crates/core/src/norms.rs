//! Discrete weighted Hölder norms with corner weight `δ` (distance to the
//! edge, capped at 1) and far-field weight `Δ`.
//!
//! Derivatives come from finite differences (grid fields) or from the
//! interpolating splines (shock perturbations). The Hölder seminorm is a sup
//! over a deterministic sample of node pairs, hence a lower bound of the
//! continuum quantity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ShockPerturbation, WedgeGeometry};
use crate::grid::GridField;

/// Exponents of `[·]_{k,α;(l)}^{(τ)}`.
///
/// `planar` selects the variant for functions of two variables `(a, b)` whose
/// edge is the line `a = 0`: then `Δ = |a| + 1`. Otherwise the edge is the
/// `y3`-axis and `Δ = |(y1, y2)| + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub tau: f64,
    pub l: f64,
    pub k: usize,
    pub alpha: f64,
    pub planar: bool,
}

impl WeightSpec {
    /// `C^{k,α;(−β)}_{(−k+1−α)}`-type spec used for potentials and shocks.
    pub fn new(k: usize, alpha: f64, tau: f64, l: f64) -> Self {
        Self {
            tau,
            l,
            k,
            alpha,
            planar: false,
        }
    }

    pub fn planar(mut self) -> Self {
        self.planar = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || self.k > 3 {
            return Err(Error::Domain(format!(
                "weight spec needs alpha in (0,1) and k <= 3, got alpha = {}, k = {}",
                self.alpha, self.k
            )));
        }
        Ok(())
    }
}

/// `(δ_x, Δ_x)`.
pub fn weights(x: [f64; 3], spec: &WeightSpec) -> (f64, f64) {
    let d = if spec.planar { x[0].abs() } else { x[0].hypot(x[1]) };
    (d.min(1.0), d + 1.0)
}

/// `(δ_{x,x′}, Δ_{x,x′})`.
pub fn pair_weights(x: [f64; 3], xp: [f64; 3], spec: &WeightSpec) -> (f64, f64) {
    let (a, b) = weights(x, spec);
    let (c, d) = weights(xp, spec);
    (a.min(c), b.min(d))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    /// `[f]_{j,0}` for `j = 0..=k`.
    pub seminorms: Vec<f64>,
    /// Node attaining each `[f]_{j,0}`.
    pub seminorm_at: Vec<[f64; 3]>,
    /// `[f]_{k,α}` over the sampled pairs.
    pub holder: f64,
    pub holder_pair: ([f64; 3], [f64; 3]),
    pub total: f64,
    pub pairs: usize,
}

/// Nodal values of all derivatives of a function on a structured
/// `n0 × n1 × n2` set of points (index `a + n0 (b + n1 c)`).
pub struct SampledField {
    pub dims: [usize; 3],
    pub coords: Vec<[f64; 3]>,
    /// `derivs[j]` lists one nodal vector per multi-index of order `j`.
    pub derivs: Vec<Vec<Vec<f64>>>,
    /// Nodes taking part in the sups; all by default.
    pub active: Vec<bool>,
}

impl SampledField {
    /// Restricts all sups to the nodes whose coordinates satisfy `keep`.
    pub fn restrict(mut self, keep: impl Fn([f64; 3]) -> bool) -> Self {
        for (a, x) in self.active.iter_mut().zip(&self.coords) {
            *a = *a && keep(*x);
        }
        self
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        a + self.dims[0] * (b + self.dims[1] * c)
    }
}

fn powi_weight(d: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        d.powf(e)
    }
}

/// Evaluates the norm of pre-sampled derivative data.
pub fn weighted_norm_samples(f: &SampledField, spec: &WeightSpec) -> Result<NormReport> {
    spec.validate()?;
    if f.derivs.len() <= spec.k {
        return Err(Error::Domain(format!(
            "derivatives of order {} are not available",
            spec.k
        )));
    }
    let n = f.len();
    let w: Vec<(f64, f64)> = f.coords.iter().map(|x| weights(*x, spec)).collect();
    let mut seminorms = Vec::with_capacity(spec.k + 1);
    let mut seminorm_at = Vec::with_capacity(spec.k + 1);
    for j in 0..=spec.k {
        let e_d = (j as f64 + spec.tau).max(0.0);
        let e_l = spec.l + j as f64;
        let mut best = 0.0;
        let mut at = 0;
        for p in (0..n).filter(|&p| f.active[p]) {
            let m = f.derivs[j].iter().fold(0.0f64, |acc, d| acc.max(d[p].abs()));
            let val = powi_weight(w[p].0, e_d) * w[p].1.powf(e_l) * m;
            if val > best {
                best = val;
                at = p;
            }
        }
        seminorms.push(best);
        seminorm_at.push(f.coords[at]);
    }
    // Hölder pairs: 5×5×5 neighbourhoods plus a strided long-range lattice
    let e_d = (spec.k as f64 + spec.alpha + spec.tau).max(0.0);
    let e_l = spec.l + spec.k as f64 + spec.alpha;
    let dk = &f.derivs[spec.k];
    let [n0, n1, n2] = f.dims;
    let mut holder = 0.0;
    let mut pair = (0, 0);
    let mut pairs = 0usize;
    let mut visit = |p: usize, q: usize, holder: &mut f64, pair: &mut (usize, usize)| {
        if !(f.active[p] && f.active[q]) {
            return;
        }
        let (x, y) = (f.coords[p], f.coords[q]);
        let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        if dist == 0.0 {
            return;
        }
        pairs += 1;
        let dd = dk.iter().fold(0.0f64, |acc, d| acc.max((d[p] - d[q]).abs()));
        let (dl, dg) = (w[p].0.min(w[q].0), w[p].1.min(w[q].1));
        let val = powi_weight(dl, e_d) * dg.powf(e_l) * dd / dist.powf(spec.alpha);
        if val > *holder {
            *holder = val;
            *pair = (p, q);
        }
    };
    let r2 = if n2 > 1 { 2isize } else { 0 };
    for c in 0..n2 {
        for b in 0..n1 {
            for a in 0..n0 {
                let p = f.idx(a, b, c);
                for oc in -r2..=r2 {
                    for ob in -2isize..=2 {
                        for oa in -2isize..=2 {
                            if (oc, ob, oa) <= (0, 0, 0) {
                                continue;
                            }
                            let (aa, bb, cc) = (a as isize + oa, b as isize + ob, c as isize + oc);
                            if aa < 0 || bb < 0 || cc < 0 || aa >= n0 as isize || bb >= n1 as isize || cc >= n2 as isize {
                                continue;
                            }
                            let q = f.idx(aa as usize, bb as usize, cc as usize);
                            visit(p, q, &mut holder, &mut pair);
                        }
                    }
                }
            }
        }
    }
    let strata = |len: usize, target: usize| -> Vec<usize> {
        let step = len.div_ceil(target).max(1);
        (0..len).step_by(step).collect()
    };
    let (sa, sb, sc) = (strata(n0, 12), strata(n1, 8), strata(n2, 8));
    let mut lattice = Vec::with_capacity(sa.len() * sb.len() * sc.len());
    for &c in &sc {
        for &b in &sb {
            for &a in &sa {
                lattice.push(f.idx(a, b, c));
            }
        }
    }
    for (u, &p) in lattice.iter().enumerate() {
        for &q in &lattice[u + 1..] {
            visit(p, q, &mut holder, &mut pair);
        }
    }
    let total = seminorms.iter().sum::<f64>() + holder;
    Ok(NormReport {
        seminorms,
        seminorm_at,
        holder,
        holder_pair: (f.coords[pair.0], f.coords[pair.1]),
        total,
        pairs,
    })
}

/// Derivative data of a grid field in `y`, up to order `k`.
pub fn sample_grid_field(f: &GridField, k: usize) -> Result<SampledField> {
    let g = &f.grid;
    let need = k + 2;
    if g.ns < need || g.nt < need || (!g.is_planar() && g.nz() < need) {
        return Err(Error::Domain(format!("grid too coarse for derivatives of order {k}")));
    }
    let n = g.len();
    let comps = if g.is_planar() { 2 } else { 3 };
    let mut coords = Vec::with_capacity(n);
    let mut d1 = vec![vec![0.0; n]; comps];
    let mut d2 = vec![vec![0.0; n]; comps * (comps + 1) / 2];
    for p in 0..n {
        let (i, j, kk) = g.unidx(p);
        coords.push(g.y(i, j, kk));
        if k >= 1 {
            let yd = f.y_derivs(i, j, kk);
            let mut m = 0;
            for a in 0..comps {
                d1[a][p] = yd.d[a];
                for b in a..comps {
                    d2[m][p] = yd.dd[a][b];
                    m += 1;
                }
            }
        }
    }
    let mut derivs = vec![vec![f.values.clone()]];
    if k >= 1 {
        derivs.push(d1);
    }
    if k >= 2 {
        derivs.push(d2.clone());
    }
    if k >= 3 {
        let mut d3 = Vec::new();
        for comp in &d2 {
            let mut gf = GridField::new(*g, "d2");
            gf.values.clone_from(comp);
            let mut parts = vec![vec![0.0; n]; comps];
            for p in 0..n {
                let (i, j, kk) = g.unidx(p);
                let yd = gf.y_derivs(i, j, kk);
                for a in 0..comps {
                    parts[a][p] = yd.d[a];
                }
            }
            d3.extend(parts);
        }
        derivs.push(d3);
    }
    // (θ̄, s, y3) index order of the grid maps to dims (nt, ns, nz)
    Ok(SampledField {
        dims: [g.nt, g.ns, g.nz()],
        active: vec![true; coords.len()],
        coords,
        derivs,
    })
}

/// Norm of a grid field in the `y`-variables with edge `y1 = y2 = 0`.
pub fn weighted_norm(f: &GridField, spec: &WeightSpec) -> Result<NormReport> {
    spec.validate()?;
    weighted_norm_samples(&sample_grid_field(f, spec.k)?, spec)
}

/// Norm over the part of the grid where `keep` holds.
pub fn weighted_norm_on(f: &GridField, spec: &WeightSpec, keep: impl Fn([f64; 3]) -> bool) -> Result<NormReport> {
    spec.validate()?;
    weighted_norm_samples(&sample_grid_field(f, spec.k)?.restrict(keep), spec)
}

/// Norm of a shock perturbation as a function of `(y2, y3)` (edge `y2 = 0`).
pub fn shock_norm(sp: &ShockPerturbation, spec: &WeightSpec) -> Result<NormReport> {
    spec.validate()?;
    if spec.k > 2 {
        return Err(Error::Domain("shock norms support k <= 2".into()));
    }
    let spec = WeightSpec { planar: true, ..*spec };
    let nd = sp.node_derivatives();
    let (n0, n2) = (sp.n_y2(), sp.z.len());
    let mut coords = Vec::with_capacity(n0 * n2);
    for k in 0..n2 {
        for m in 0..n0 {
            coords.push([sp.y2[m], sp.z.coord(k), 0.0]);
        }
    }
    let comp = |c: usize| nd.iter().map(|d| d[c]).collect::<Vec<f64>>();
    let mut derivs = vec![vec![comp(0)]];
    if sp.z.is_planar() {
        derivs.push(vec![comp(1)]);
        derivs.push(vec![comp(3)]);
    } else {
        derivs.push(vec![comp(1), comp(2)]);
        derivs.push(vec![comp(3), comp(4), comp(5)]);
    }
    derivs.truncate(spec.k + 1);
    let f = SampledField {
        dims: [n0, 1, n2],
        active: vec![true; coords.len()],
        coords,
        derivs,
    };
    weighted_norm_samples(&f, &spec)
}

/// Norm of the wedge height `w(x1, x3)` over `x1 > e1(x3)`, edge distance
/// `x1 − e1(x3)`. Samples `n1` points per `x3` station with spacing growing
/// quadratically from the edge up to `x1 − e1 = extent`; `x3` stations are
/// `z` (a single station for `x3`-independent geometry).
pub fn wedge_norm(wedge: &WedgeGeometry, spec: &WeightSpec, extent: f64, n1: usize, z: &[f64]) -> Result<NormReport> {
    spec.validate()?;
    if n1 < 4 || z.is_empty() {
        return Err(Error::Domain("wedge norm needs at least 4 samples per station".into()));
    }
    let spec = WeightSpec { planar: true, ..*spec };
    let varies = z.len() > 1;
    // multi-indices (p, q) of ∂x1^p ∂x3^q per order
    let orders: Vec<Vec<(usize, usize)>> = (0..=spec.k)
        .map(|j| {
            if varies {
                (0..=j).map(|q| (j - q, q)).collect()
            } else {
                vec![(j, 0)]
            }
        })
        .collect();
    let mut coords = Vec::with_capacity(n1 * z.len());
    let mut derivs: Vec<Vec<Vec<f64>>> = orders.iter().map(|o| vec![Vec::with_capacity(n1 * z.len()); o.len()]).collect();
    for &x3 in z {
        let e1 = wedge.e1(x3);
        for i in 0..n1 {
            let t = i as f64 / (n1 - 1) as f64;
            let a = extent * t * t;
            coords.push([a, x3, 0.0]);
            for (j, o) in orders.iter().enumerate() {
                for (m, &(p, q)) in o.iter().enumerate() {
                    derivs[j][m].push(wedge.w_partial(e1 + a, x3, p, q));
                }
            }
        }
    }
    let f = SampledField {
        dims: [n1, 1, z.len()],
        active: vec![true; coords.len()],
        coords,
        derivs,
    };
    weighted_norm_samples(&f, &spec)
}

/// Unweighted `C^{2,α}` norm of the edge displacement `e1` sampled at `z`
/// (uniform stations); the Hölder part uses all station pairs.
pub fn edge_norm(wedge: &WedgeGeometry, alpha: f64, z: &[f64]) -> f64 {
    let d: Vec<[f64; 3]> = z.iter().map(|&x| [0, 1, 2].map(|p| wedge.e1_partial(x, p))).collect();
    let mut total = 0.0;
    for p in 0..3 {
        total += d.iter().fold(0.0f64, |m, v| m.max(v[p].abs()));
    }
    let mut holder = 0.0f64;
    for a in 0..z.len() {
        for b in a + 1..z.len() {
            holder = holder.max((d[a][2] - d[b][2]).abs() / (z[b] - z[a]).abs().powf(alpha));
        }
    }
    total + holder
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        let s = WeightSpec::new(2, 0.5, -1.5, 0.0);
        assert_eq!(weights([3.0, 4.0, 7.0], &s), (1.0, 6.0));
        assert_eq!(weights([0.0, 0.0, 2.0], &s).0, 0.0);
        let (d, dd) = pair_weights([0.3, 0.4, 0.0], [3.0, 4.0, 1.0], &s);
        assert!((d - 0.5).abs() < 1e-15 && (dd - 1.5).abs() < 1e-15);
        let p = s.planar();
        assert_eq!(weights([-2.0, 5.0, 0.0], &p), (1.0, 3.0));
    }

    #[test]
    fn rejects_bad_alpha() {
        let s = WeightSpec::new(2, 1.0, -1.5, 0.0);
        assert!(s.validate().is_err());
    }
}
