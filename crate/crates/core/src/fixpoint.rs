//! The iteration map `T(δŝ, δφ) = (δs̃, δφ̃)` for a perturbed wedge and
//! upstream state, its fixed-point driver and the residual check of a
//! converged state.

use serde::Serialize;

use crate::elliptic::{BvpData, EdgeData, LinearSystem, TruncatedDomain};
use crate::error::{Error, Result};
use crate::gas::VelocityState;
use crate::geometry::{cutoff, JacobianData, ShockPerturbation, Transform, WedgeGeometry};
use crate::grid::{GridField, NodeKind, YDerivs};
use crate::norms::{shock_norm, weighted_norm, NormReport, WeightSpec};
use crate::polar::rh_jump;
use crate::{BackgroundSolution, GasModel, StabilityCertificate};

/// Constant upstream state `φ⁻(x) = U⁻·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UpstreamFlow {
    pub velocity: [f64; 3],
}

impl UpstreamFlow {
    pub fn background(bg: &BackgroundSolution) -> Self {
        Self {
            velocity: bg.upstream.0,
        }
    }

    /// `U⁻ = U0⁻ + t e`.
    pub fn perturbed(bg: &BackgroundSolution, e: [f64; 3], t: f64) -> Self {
        let u = bg.upstream.0;
        Self {
            velocity: [u[0] + t * e[0], u[1] + t * e[1], u[2] + t * e[2]],
        }
    }

    pub fn phi(&self, x: [f64; 3]) -> f64 {
        dot(&self.velocity, &x)
    }

    pub fn state(&self) -> VelocityState<f64> {
        VelocityState(self.velocity)
    }

    pub fn is_supersonic(&self, gas: &GasModel) -> bool {
        gas.is_supersonic(&self.state())
    }

    /// `Σ a_ij(Dφ⁻) φ⁻_ij`; zero for linear potentials.
    pub fn pde_residual(&self, gas: &GasModel) -> Result<f64> {
        let a = gas.coefficients(&self.state())?;
        let hess = [[0.0; 3]; 3];
        Ok((0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a[i][j] * hess[i][j]).sum())
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationOptions {
    /// Stop once the weighted distance between successive states is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive steps with `κ ≥ 1` tolerated before giving up.
    pub window: usize,
    pub krylov_tol: f64,
    /// Size `ε` of the perturbation data.
    pub eps: f64,
    /// Radius `C0 ε` of the iteration set, if calibrated.
    pub c0: Option<f64>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            window: 5,
            krylov_tol: 1e-12,
            eps: 1e-3,
            c0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateNorms {
    pub phi: NormReport,
    pub shock: NormReport,
}

#[derive(Clone, Debug)]
pub struct IterationState {
    pub delta_s_hat: ShockPerturbation,
    pub delta_phi: GridField,
    pub iteration: usize,
    pub norms: Option<StateNorms>,
}

/// Everything fixed during one run.
pub struct FixedPointProblem {
    pub bg: BackgroundSolution,
    pub cert: StabilityCertificate,
    pub wedge: WedgeGeometry,
    pub upstream: UpstreamFlow,
    pub sys: LinearSystem,
    pub opts: IterationOptions,
}

/// Per-node derivative and transform data of a state.
struct Frame {
    jac: Vec<JacobianData>,
    dy: Vec<YDerivs>,
}

impl FixedPointProblem {
    pub fn new(
        bg: BackgroundSolution,
        cert: StabilityCertificate,
        wedge: WedgeGeometry,
        upstream: UpstreamFlow,
        dom: &TruncatedDomain,
        opts: IterationOptions,
    ) -> Result<Self> {
        if !upstream.is_supersonic(&bg.gas) {
            return Err(Error::Domain("upstream state is not supersonic".into()));
        }
        let op = crate::elliptic::Operator::new(cert.a0, cert.mu)?;
        let mut sys = LinearSystem::assemble(&op, dom)?;
        sys.opts.rel_tol = opts.krylov_tol;
        Ok(Self {
            bg,
            cert,
            wedge,
            upstream,
            sys,
            opts,
        })
    }

    pub fn gas(&self) -> &GasModel {
        &self.bg.gas
    }

    /// Weight spec of `C^{2,α;(−β)}_{(−1−α)}`.
    pub fn norm_spec(&self) -> WeightSpec {
        WeightSpec::new(2, self.cert.alpha, -1.0 - self.cert.alpha, -self.cert.beta)
    }

    /// Zero potential and `δŝ = e1(y3) η(y2)`, which lies in the iteration set.
    pub fn initial_state(&self) -> Result<IterationState> {
        let g = self.sys.grid();
        let shock = ShockPerturbation::from_fn(g, self.bg.sigma, |y2, y3| self.wedge.e1(y3) * cutoff(y2)[0]);
        self.make_state(shock, GridField::new(*g, "delta_phi"), 0)
    }

    fn make_state(&self, shock: ShockPerturbation, mut phi: GridField, iteration: usize) -> Result<IterationState> {
        phi.iteration = Some(iteration);
        let spec = self.norm_spec();
        let norms = StateNorms {
            phi: weighted_norm(&phi, &spec)?,
            shock: shock_norm(&shock, &spec)?,
        };
        Ok(IterationState {
            delta_s_hat: shock,
            delta_phi: phi,
            iteration,
            norms: Some(norms),
        })
    }

    fn frame(&self, state: &IterationState) -> Result<Frame> {
        let g = self.sys.grid();
        let jac = Transform::new(&self.wedge, &state.delta_s_hat).sample(g)?;
        let dy = (0..g.len())
            .map(|n| {
                let (i, j, k) = g.unidx(n);
                state.delta_phi.y_derivs(i, j, k)
            })
            .collect();
        Ok(Frame { jac, dy })
    }

    fn downstream(&self) -> [f64; 3] {
        self.bg.downstream.0
    }

    /// `D_x(δφ) + U0⁺` at a node.
    fn velocity(&self, f: &Frame, n: usize) -> [f64; 3] {
        let dx = f.jac[n].grad_x(&f.dy[n].d);
        let u = self.downstream();
        [dx[0] + u[0], dx[1] + u[1], dx[2] + u[2]]
    }

    fn interior_from(&self, f: &Frame) -> Result<GridField> {
        let g = self.sys.grid();
        let a0 = self.cert.a0;
        let mut out = GridField::new(*g, "f_s");
        for n in 0..g.len() {
            if self.sys.is_dirichlet(n) {
                continue;
            }
            let a = self.gas().coefficients(&VelocityState(self.velocity(f, n)))?;
            let jd = &f.jac[n];
            let mut val = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let mut at = 0.0;
                    for k in 0..3 {
                        for m in 0..3 {
                            at += a[k][m] * jd.j[i][k] * jd.j[j][m];
                        }
                    }
                    val += (a0[i][j] - at) * f.dy[n].dd[i][j];
                }
                let bt: f64 = (0..3).flat_map(|k| (0..3).map(move |m| (k, m))).map(|(k, m)| a[k][m] * jd.h[i][k][m]).sum();
                val -= bt * f.dy[n].d[i];
            }
            out.values[n] = val;
        }
        Ok(out)
    }

    fn wedge_from(&self, f: &Frame) -> GridField {
        let g = self.sys.grid();
        let u = self.downstream();
        let mut out = GridField::new(*g, "g_w");
        for n in 0..g.len() {
            if g.kind_of(n) != NodeKind::Wedge {
                continue;
            }
            let jd = &f.jac[n];
            let dx = jd.grad_x(&f.dy[n].d);
            let nv = [-jd.wedge.w1, 1.0, -jd.wedge.w3];
            let v = [dx[0] + u[0], dx[1] + u[1], dx[2] + u[2]];
            out.values[n] = f.dy[n].d[1] - dot(&v, &nv);
        }
        out
    }

    fn shock_from(&self, f: &Frame) -> Result<GridField> {
        let g = self.sys.grid();
        let mu = self.cert.mu;
        let um = self.upstream.state();
        let mut out = GridField::new(*g, "g_s");
        for n in 0..g.len() {
            if g.kind_of(n) != NodeKind::Shock {
                continue;
            }
            let dy = &f.dy[n].d;
            let dx = f.jac[n].grad_x(dy);
            let v = self.velocity(f, n);
            let gt = dot(&dx, &mu) - rh_jump(self.gas(), &um, &VelocityState(v))?;
            // D_y(δφ)(I − J)·μ
            let corr = dot(dy, &mu) - dot(&dx, &mu);
            out.values[n] = corr + gt;
        }
        Ok(out)
    }

    /// `f^ŝ` at every equation row.
    pub fn assemble_interior(&self, state: &IterationState) -> Result<GridField> {
        self.interior_from(&self.frame(state)?)
    }

    /// `g_w` at the wedge nodes, zero elsewhere.
    pub fn assemble_wedge(&self, state: &IterationState) -> Result<GridField> {
        Ok(self.wedge_from(&self.frame(state)?))
    }

    /// `g_s` at the shock nodes, zero elsewhere.
    pub fn assemble_shock(&self, state: &IterationState) -> Result<GridField> {
        self.shock_from(&self.frame(state)?)
    }

    /// `g_e(y3) = (φ⁻ − φ0⁺)` at the physical edge point, per `z` node.
    pub fn assemble_edge(&self) -> Vec<f64> {
        let g = self.sys.grid();
        (0..g.nz())
            .map(|k| {
                let x = self.wedge.edge_point(g.zc(k));
                self.upstream.phi(x) - self.bg.phi_plus_at(x)
            })
            .collect()
    }

    /// Largest `|δŝ(0, y3) − e1(y3)|`.
    pub fn attachment_error(&self, shock: &ShockPerturbation) -> f64 {
        shock.attachment_error(&self.wedge)
    }

    /// One application of the map.
    pub fn apply_t(&self, state: &IterationState) -> Result<(IterationState, StepReport)> {
        let scale = 1.0 + self.wedge.edge.iter().map(|b| b.amplitude.abs()).sum::<f64>();
        let att = self.attachment_error(&state.delta_s_hat);
        if att > 1e-8 * scale {
            return Err(Error::Domain(format!("state is not attached: edge error {att:e}")));
        }
        let g = *self.sys.grid();
        let f = self.frame(state)?;
        let f1 = self.interior_from(&f)?;
        let gw = self.wedge_from(&f);
        let gs = self.shock_from(&f)?;
        let ge = self.assemble_edge();
        let mut data = BvpData::zeros(&g);
        data.f1 = f1.values;
        for n in 0..g.len() {
            data.g[n] = gw.values[n] + gs.values[n];
        }
        let nz = g.nz();
        let edge = EdgeData {
            g1: (0..nz).map(|k| data.g[g.idx(1, 0, k)]).collect(),
            g2: (0..nz).map(|k| data.g[g.idx(1, g.nt - 1, k)]).collect(),
            g3: ge.clone(),
        };
        let ext = self.sys.edge_extension(&edge);
        for k in 0..nz {
            for j in 0..g.nt {
                let n = g.idx(0, j, k);
                data.cut[n] = ext[n];
            }
        }
        let b = self.sys.rhs(&data);
        let (x, krylov) = self.sys.solve_vector(&b, Some(&state.delta_phi.values))?;
        let mut phi = GridField::new(g, "delta_phi");
        phi.values = x;
        let shock = self.update_shock(state, &phi, &ge)?;
        let next = self.make_state(shock, phi, state.iteration + 1)?;
        let in_set = match (self.opts.c0, &next.norms) {
            (Some(c0), Some(nm)) => Some(nm.phi.total <= c0 * self.opts.eps && nm.shock.total <= c0 * self.opts.eps),
            _ => None,
        };
        Ok((
            next,
            StepReport {
                krylov_iterations: krylov.iterations,
                krylov_residual: krylov.rel_residual,
                in_iteration_set: in_set,
            },
        ))
    }

    /// Solves `(φ⁻ − φ0⁺)(x1, y2 + w(x1, y3), y3) = δφ̃` for `x1` at every shock
    /// sample; the edge sample uses `δφ̃ = g_e`.
    fn update_shock(&self, state: &IterationState, phi: &GridField, ge: &[f64]) -> Result<ShockPerturbation> {
        let g = self.sys.grid();
        let mut out = state.delta_s_hat.clone();
        let n_y2 = out.n_y2();
        for k in 0..g.nz() {
            let y3 = g.zc(k);
            for m in 0..n_y2 {
                let y2 = out.y2[m];
                let target = if m == 0 { ge[k] } else { phi.at(m - 1, g.nt - 1, k) };
                let guess = state.delta_s_hat.at(m, k);
                let ds = self.solve_shock_point(y2, y3, target, guess)?;
                out.set(m, k, ds);
            }
        }
        Ok(out)
    }

    fn solve_shock_point(&self, y2: f64, y3: f64, target: f64, guess: f64) -> Result<f64> {
        let sigma = self.bg.sigma;
        let up = self.upstream.velocity;
        let u0p = self.downstream();
        let point = |x1: f64| [x1, y2 + self.wedge.w(x1, y3), y3];
        let resid = |x1: f64| {
            let x = point(x1);
            self.upstream.phi(x) - self.bg.phi_plus_at(x) - target
        };
        let tol = 1e-14 * (1.0 + target.abs() + y2.abs());
        let mut x1 = y2 / sigma + guess;
        // iterate to roundoff: the weighted distance differentiates δŝ twice
        // on a fine grid, so a loose stop shows up as noise in κ
        for _ in 0..30 {
            let r = resid(x1);
            let wd = self.wedge.w_derivs(x1, y3);
            let dr = (up[0] - u0p[0]) + (up[1] - u0p[1]) * wd.w1;
            if dr.abs() < 1e-12 {
                break;
            }
            let step = r / dr;
            x1 -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x1.abs().max(f64::MIN_POSITIVE) {
                if resid(x1).abs() <= tol {
                    return Ok(x1 - y2 / sigma);
                }
                break;
            }
        }
        // fixed-point form
        let jump = self.bg.normal_jump();
        let u0m = self.bg.upstream.0;
        let mut ds = guess;
        for _ in 0..200 {
            let x = point(y2 / sigma + ds);
            let dphi_minus = dot(&up, &x) - dot(&u0m, &x);
            let next = self.wedge.w(x[0], y3) / sigma + (target - dphi_minus) / jump;
            if (next - ds).abs() <= 1e-15 * (1.0 + next.abs()) {
                if resid(y2 / sigma + next).abs() <= 1e3 * tol {
                    return Ok(next);
                }
                break;
            }
            ds = next;
        }
        Err(Error::ShockUpdateFailed { y2, y3 })
    }

    /// Weighted distance between two states.
    pub fn distance(&self, a: &IterationState, b: &IterationState) -> Result<f64> {
        let spec = self.norm_spec();
        let mut dphi = a.delta_phi.clone();
        for (x, y) in dphi.values.iter_mut().zip(&b.delta_phi.values) {
            *x -= y;
        }
        let mut ds = a.delta_s_hat.clone();
        for (x, y) in ds.values.iter_mut().zip(&b.delta_s_hat.values) {
            *x -= y;
        }
        Ok(weighted_norm(&dphi, &spec)?.total + shock_norm(&ds, &spec)?.total)
    }

    /// Repeats [`FixedPointProblem::apply_t`] until successive states are
    /// within `tol`.
    pub fn iterate_to_fixed_point(&self, initial: IterationState) -> Result<(IterationState, ConvergenceHistory)> {
        let mut history = ConvergenceHistory::default();
        let mut state = initial;
        let mut bad = 0;
        let mut last_d: Option<f64> = None;
        for it in 0..self.opts.max_iter {
            let (next, step) = self.apply_t(&state)?;
            let d = self.distance(&next, &state)?;
            let kappa = last_d.filter(|p| *p > 0.0).map(|p| d / p);
            let nm = next.norms.as_ref();
            history.records.push(IterationRecord {
                iter: it + 1,
                distance: d,
                kappa,
                phi_norm: nm.map_or(f64::NAN, |n| n.phi.total),
                shock_norm: nm.map_or(f64::NAN, |n| n.shock.total),
                krylov_iterations: step.krylov_iterations,
                in_iteration_set: step.in_iteration_set,
            });
            state = next;
            if d < self.opts.tol {
                history.converged = true;
                return Ok((state, history));
            }
            if let Some(k) = kappa {
                bad = if k >= 1.0 { bad + 1 } else { 0 };
                if bad >= self.opts.window {
                    return Err(Error::NotContracting { steps: bad, kappa: k });
                }
            }
            last_d = Some(d);
        }
        Ok((state, history))
    }

    /// Residuals of the nonlinear free boundary problem at a state, over
    /// nodes with `r̄ ∈ [r_min, r_max]`.
    pub fn residual_check(&self, state: &IterationState, r_min: f64, r_max: f64) -> Result<ResidualReport> {
        let g = *self.sys.grid();
        let f = self.frame(state)?;
        let um = self.upstream.state();
        let gas = self.gas();
        let in_range = |i: usize| {
            let r = g.rbar(i);
            r >= r_min * (1.0 - 1e-12) && r <= r_max * (1.0 + 1e-12)
        };
        let mut rep = ResidualReport {
            r_min,
            r_max,
            entropy_ok: true,
            ..Default::default()
        };
        let rho_minus = gas.density(um.norm_sq())?;
        let mut gap = f64::INFINITY;
        for n in 0..g.len() {
            let (i, j, k) = g.unidx(n);
            let kind = g.kind(i, j, k);
            let v = VelocityState(self.velocity(&f, n));
            if kind == NodeKind::Shock {
                // the density jump is checked over the whole shock
                let rho_plus = gas.density(v.norm_sq())?;
                gap = gap.min(rho_plus - rho_minus);
            }
            if !in_range(i) {
                continue;
            }
            match kind {
                NodeKind::Interior => {
                    let a = gas.coefficients(&v)?;
                    let jd = &f.jac[n];
                    let mut val = 0.0;
                    for p in 0..3 {
                        for q in 0..3 {
                            let mut at = 0.0;
                            for kk in 0..3 {
                                for m in 0..3 {
                                    at += a[kk][m] * jd.j[p][kk] * jd.j[q][m];
                                }
                            }
                            val += at * f.dy[n].dd[p][q];
                        }
                        let bt: f64 = (0..3)
                            .flat_map(|kk| (0..3).map(move |m| (kk, m)))
                            .map(|(kk, m)| a[kk][m] * jd.h[p][kk][m])
                            .sum();
                        val += bt * f.dy[n].d[p];
                    }
                    rep.pde = rep.pde.max(val.abs());
                }
                NodeKind::Wedge => {
                    let jd = &f.jac[n];
                    let nv = [-jd.wedge.w1, 1.0, -jd.wedge.w3];
                    rep.slip = rep.slip.max(dot(&v.0, &nv).abs());
                }
                NodeKind::Shock => {
                    rep.jump = rep.jump.max(rh_jump(gas, &um, &v)?.abs());
                }
                _ => {}
            }
        }
        rep.continuity = self.continuity_residual(state, &in_range);
        rep.min_density_jump = gap;
        rep.entropy_ok = gap > 0.0;
        Ok(rep)
    }

    /// `φ0⁺ + δφ − φ⁻` on the computed shock, halfway between shock nodes,
    /// with `δφ` interpolated by cubics along the shock row.
    fn continuity_residual(&self, state: &IterationState, in_range: &dyn Fn(usize) -> bool) -> f64 {
        let g = self.sys.grid();
        let phi = &state.delta_phi;
        let sp = &state.delta_s_hat;
        let ext = sp.mollify_extend();
        let jt = g.nt - 1;
        let (sin_w, cos_w) = g.omega_bar.sin_cos();
        let mut worst: f64 = 0.0;
        for k in 0..g.nz() {
            let y3 = g.zc(k);
            for i in 1..g.ns.saturating_sub(2) {
                if !(in_range(i) && in_range(i + 1)) {
                    continue;
                }
                // cubic through i−1..i+2 evaluated at i + 1/2
                let v = [-1.0, 9.0, 9.0, -1.0]
                    .iter()
                    .enumerate()
                    .map(|(a, w)| w * phi.at(i + a - 1, jt, k))
                    .sum::<f64>()
                    / 16.0;
                let rb = (0.5 * (g.s(i) + g.s(i + 1))).exp();
                let y = [rb * cos_w / g.d1, rb * sin_w / g.d2, y3];
                let x1 = y[0] + ext.eval(y).v;
                let x = [x1, y[1] + self.wedge.w(x1, y3), y3];
                let r = self.bg.phi_plus_at(x) + v - self.upstream.phi(x);
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub krylov_iterations: usize,
    pub krylov_residual: f64,
    /// Whether the new state stays within `C0 ε`, when `C0` is set.
    pub in_iteration_set: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub distance: f64,
    pub kappa: Option<f64>,
    pub phi_norm: f64,
    pub shock_norm: f64,
    pub krylov_iterations: usize,
    pub in_iteration_set: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl ConvergenceHistory {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn max_kappa(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.kappa).reduce(f64::max)
    }

    pub fn to_csv(&self, header: &str) -> String {
        let mut s = format!("{header}\niter,distance,kappa,phi_norm,shock_norm,krylov_iterations\n");
        for r in &self.records {
            let kappa = r.kappa.map_or(String::new(), |k| format!("{k:.16e}"));
            s.push_str(&format!(
                "{},{:.16e},{},{:.16e},{:.16e},{}\n",
                r.iter, r.distance, kappa, r.phi_norm, r.shock_norm, r.krylov_iterations
            ));
        }
        s
    }
}

/// Max-norm residuals of the nonlinear problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    pub r_min: f64,
    pub r_max: f64,
    /// Potential flow equation at interior nodes.
    pub pde: f64,
    /// Jump function `H(Dφ⁻, Dφ⁺)` at shock nodes.
    pub jump: f64,
    /// `φ⁺ − φ⁻` on the shock.
    pub continuity: f64,
    /// `Dφ⁺·n` on the wedge.
    pub slip: f64,
    /// `min (ρ⁺ − ρ⁻)` over all shock nodes.
    pub min_density_jump: f64,
    pub entropy_ok: bool,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.pde.max(self.jump).max(self.continuity).max(self.slip)
    }
}

/// Converged shock surface rows `(y2, y3, x1 = ŝ)`.
pub fn shock_surface_csv(sp: &ShockPerturbation, header: &str) -> String {
    let mut s = format!("{header}\ny2,y3,x1\n");
    for k in 0..sp.z.len() {
        for m in 0..sp.n_y2() {
            let y2 = sp.y2[m];
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                y2,
                sp.z.coord(k),
                y2 / sp.sigma + sp.at(m, k)
            ));
        }
    }
    s
}
