//! Plane shock polar for an upstream state oblique to a straight wedge edge.
//!
//! Frame: the background wedge is `x2 = 0`, the edge is the `x3` axis, and the
//! upstream velocity makes angle `θi` with the edge and `θw` with the wedge
//! plane. The downstream state `(u0, 0, q0 cos θi)` is parallel to the wedge.

use serde::Serialize;

use crate::error::{Error, Result, WindowSide};
use crate::gas::{FlowType, GasModel, VelocityState};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UpstreamSpec<T> {
    pub gas: GasModel<T>,
    pub q0: T,
    pub theta_i: T,
}

impl<T: Scalar> UpstreamSpec<T> {
    pub fn new(gas: GasModel<T>, q0: T, theta_i: T) -> Result<Self> {
        if !(theta_i > T::zero() && theta_i < T::PI()) {
            return Err(Error::Domain(format!(
                "incidence angle must lie strictly between 0 and pi, got {theta_i}"
            )));
        }
        if !(q0 > gas.critical_speed()) {
            return Err(Error::Domain(format!(
                "upstream speed {q0} is not supersonic (critical speed {})",
                gas.critical_speed()
            )));
        }
        if !(q0 * q0 < gas.vacuum_bound()) {
            return Err(Error::Vacuum {
                q2: (q0 * q0).as_f64(),
                limit: gas.vacuum_bound().as_f64(),
            });
        }
        Ok(Self { gas, q0, theta_i })
    }

    /// Speed component normal to the edge, `q0 sin θi`.
    pub fn normal_speed(&self) -> T {
        self.q0 * self.theta_i.sin()
    }

    /// Speed component along the edge, `q0 cos θi`.
    pub fn edge_speed(&self) -> T {
        self.q0 * self.theta_i.cos()
    }

    pub fn upstream_velocity(&self, theta_w: T) -> VelocityState<T> {
        let a = self.normal_speed();
        VelocityState::new(a * theta_w.cos(), -a * theta_w.sin(), self.edge_speed())
    }

    pub fn downstream_velocity(&self, u0: T) -> VelocityState<T> {
        VelocityState::new(u0, T::zero(), self.edge_speed())
    }

    /// Left side of the scalar polar equation for the downstream in-plane speed `u`.
    pub fn polar_residual(&self, theta_w: T, u: T) -> Result<T> {
        let a = self.normal_speed();
        let b = self.edge_speed();
        let rm = self.gas.density(self.q0 * self.q0)?;
        let rp = self.gas.density(u * u + b * b)?;
        Ok(rm * a * a - a * u * theta_w.cos() * (rm + rp) + rp * u * u)
    }

    fn polar_residual_du(&self, theta_w: T, u: T) -> Result<T> {
        let a = self.normal_speed();
        let b = self.edge_speed();
        let q2 = u * u + b * b;
        let rm = self.gas.density(self.q0 * self.q0)?;
        let rp = self.gas.density(q2)?;
        let drp = self.gas.density_derivative(q2)? * T::lit(2.0) * u;
        let cw = theta_w.cos();
        Ok(-a * cw * (rm + rp) - a * u * cw * drp + drp * u * u + T::lit(2.0) * rp * u)
    }

    /// Location and value of the minimum of the polar residual over
    /// `u ∈ [0, q0 sin θi cos θw]`, where it is unimodal.
    fn residual_minimum(&self, theta_w: T) -> Result<(T, T)> {
        let top = self.normal_speed() * theta_w.cos();
        let n = 256;
        let du = top / T::lit(n as f64);
        let mut best = (T::zero(), self.polar_residual(theta_w, T::zero())?);
        let mut best_i: usize = 0;
        for i in 1..=n {
            let u = du * T::lit(i as f64);
            let f = self.polar_residual(theta_w, u)?;
            if f < best.1 {
                best = (u, f);
                best_i = i;
            }
        }
        let mut lo = du * T::lit(best_i.saturating_sub(1) as f64);
        let mut hi = (du * T::lit((best_i + 1) as f64)).min(top);
        let g = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = self.polar_residual(theta_w, x1)?;
        let mut f2 = self.polar_residual(theta_w, x2)?;
        for _ in 0..200 {
            if hi - lo <= T::epsilon() * T::lit(4.0) * top {
                break;
            }
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = self.polar_residual(theta_w, x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = self.polar_residual(theta_w, x2)?;
            }
        }
        let (u, f) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
        if f < best.1 {
            Ok((u, f))
        } else {
            Ok(best)
        }
    }

    fn has_two_roots(&self, theta_w: T) -> Result<bool> {
        Ok(self.residual_minimum(theta_w)?.1 < T::zero())
    }

    fn bracketed_root(&self, theta_w: T, mut lo: T, mut hi: T) -> Result<T> {
        let mut flo = self.polar_residual(theta_w, lo)?;
        let tol = T::tol(1e-12);
        for _ in 0..400 {
            if hi - lo <= tol {
                break;
            }
            let mid = (lo + hi) / T::lit(2.0);
            let fm = self.polar_residual(theta_w, mid)?;
            if fm == T::zero() {
                lo = mid;
                hi = mid;
                break;
            }
            if (fm < T::zero()) == (flo < T::zero()) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let (blo, bhi) = (lo, hi);
        let mut u = (lo + hi) / T::lit(2.0);
        for _ in 0..3 {
            let f = self.polar_residual(theta_w, u)?;
            let d = self.polar_residual_du(theta_w, u)?;
            if d == T::zero() {
                break;
            }
            let next = u - f / d;
            let width = bhi - blo;
            if next < blo - width || next > bhi + width {
                break;
            }
            if self.polar_residual(theta_w, next)?.abs() <= f.abs() {
                u = next;
            }
        }
        Ok(u)
    }
}

/// The two attached-shock roots at a given wedge angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DownstreamRoots<T> {
    pub u_weak: T,
    pub u_strong: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalAngles<T> {
    /// Detachment angle.
    pub theta_w_star: T,
    /// Angle at which the weak downstream state is sonic.
    pub theta_s_star: T,
}

/// Jump function `H(u, v) = (ρ(|u|²) u − ρ(|v|²) v)·(u − v)`.
pub fn rh_jump<T: Scalar>(gas: &GasModel<T>, u: &VelocityState<T>, v: &VelocityState<T>) -> Result<T> {
    let ru = gas.density(u.norm_sq())?;
    let rv = gas.density(v.norm_sq())?;
    Ok(u.scale(ru).sub(&v.scale(rv)).dot(&u.sub(v)))
}

pub fn solve_downstream<T: Scalar>(spec: &UpstreamSpec<T>, theta_w: T) -> Result<DownstreamRoots<T>> {
    if !(theta_w > T::zero()) {
        return Err(Error::Domain(format!(
            "wedge half-angle must be positive, got {theta_w}"
        )));
    }
    let (u_min, f_min) = spec.residual_minimum(theta_w)?;
    if !(f_min < T::zero()) {
        let star = detachment_angle(spec)?;
        return Err(Error::Detached {
            theta_w: theta_w.as_f64(),
            theta_w_star: star.as_f64(),
        });
    }
    let top = spec.normal_speed() * theta_w.cos();
    let u_strong = spec.bracketed_root(theta_w, T::zero(), u_min)?;
    let u_weak = spec.bracketed_root(theta_w, u_min, top)?;
    Ok(DownstreamRoots { u_weak, u_strong })
}

fn detachment_angle<T: Scalar>(spec: &UpstreamSpec<T>) -> Result<T> {
    let mut lo = T::zero();
    let mut hi = T::FRAC_PI_2();
    let width = T::tol(1e-10);
    while hi - lo > width {
        let mid = (lo + hi) / T::lit(2.0);
        if mid > T::zero() && spec.has_two_roots(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Detachment and sonic angles. Fails with `NoTransonicWindow` when the weak
/// downstream state is still supersonic at detachment, which happens when the
/// edge-parallel speed component is large.
pub fn critical_angles<T: Scalar>(spec: &UpstreamSpec<T>) -> Result<CriticalAngles<T>> {
    let theta_w_star = detachment_angle(spec)?;
    let cs = spec.gas.critical_speed();
    let excess = |tw: T| -> Result<T> {
        let r = solve_downstream(spec, tw)?;
        Ok(spec.downstream_velocity(r.u_weak).speed() - cs)
    };
    if excess(theta_w_star)? >= T::zero() {
        return Err(Error::NoTransonicWindow);
    }
    let mut lo = theta_w_star * T::lit(1e-6);
    let mut hi = theta_w_star;
    if excess(lo)? <= T::zero() {
        return Err(Error::NoTransonicWindow);
    }
    let width = T::tol(1e-13);
    while hi - lo > width {
        let mid = (lo + hi) / T::lit(2.0);
        if excess(mid)? > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalAngles {
        theta_w_star,
        theta_s_star: (lo + hi) / T::lit(2.0),
    })
}

/// Piecewise-constant background: uniform supersonic flow separated from
/// uniform subsonic flow by the plane shock `x2 = σ x1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BackgroundSolution<T> {
    pub gas: GasModel<T>,
    pub q0: T,
    pub theta_i: T,
    pub theta_w: T,
    pub upstream: VelocityState<T>,
    pub downstream: VelocityState<T>,
    pub sigma: T,
    pub u0: T,
    /// Gradient of the linear upstream potential.
    pub phi_minus: [T; 3],
    /// Gradient of the linear downstream potential.
    pub phi_plus: [T; 3],
}

impl<T: Scalar> BackgroundSolution<T> {
    pub fn spec(&self) -> UpstreamSpec<T> {
        UpstreamSpec {
            gas: self.gas,
            q0: self.q0,
            theta_i: self.theta_i,
        }
    }

    pub fn phi_minus_at(&self, x: [T; 3]) -> T {
        self.phi_minus[0] * x[0] + self.phi_minus[1] * x[1] + self.phi_minus[2] * x[2]
    }

    pub fn phi_plus_at(&self, x: [T; 3]) -> T {
        self.phi_plus[0] * x[0] + self.phi_plus[1] * x[1] + self.phi_plus[2] * x[2]
    }

    /// Jump in the `x1` velocity across the shock, `q0 sin θi cos θw − u0`.
    pub fn normal_jump(&self) -> T {
        self.upstream.0[0] - self.u0
    }

    pub fn densities(&self) -> (T, T) {
        (
            self.gas.density(self.upstream.norm_sq()).unwrap_or(T::nan()),
            self.gas.density(self.downstream.norm_sq()).unwrap_or(T::nan()),
        )
    }
}

/// Assembles the weak-branch background at wedge half-angle `theta_w`.
pub fn background<T: Scalar>(spec: &UpstreamSpec<T>, theta_w: T) -> Result<BackgroundSolution<T>> {
    let crit = critical_angles(spec)?;
    if theta_w >= crit.theta_w_star {
        return Err(Error::NotTransonic {
            side: WindowSide::AboveDetachment,
            theta_w: theta_w.as_f64(),
            theta_s_star: crit.theta_s_star.as_f64(),
            theta_w_star: crit.theta_w_star.as_f64(),
        });
    }
    if theta_w <= crit.theta_s_star {
        return Err(Error::NotTransonic {
            side: WindowSide::BelowSonic,
            theta_w: theta_w.as_f64(),
            theta_s_star: crit.theta_s_star.as_f64(),
            theta_w_star: crit.theta_w_star.as_f64(),
        });
    }
    background_on_branch(spec, theta_w, Branch::Weak)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Weak,
    Strong,
}

/// Background on either branch without the transonic-window check; the strong
/// branch is only used for contrast diagnostics.
pub fn background_on_branch<T: Scalar>(
    spec: &UpstreamSpec<T>,
    theta_w: T,
    branch: Branch,
) -> Result<BackgroundSolution<T>> {
    let roots = solve_downstream(spec, theta_w)?;
    let u0 = match branch {
        Branch::Weak => roots.u_weak,
        Branch::Strong => roots.u_strong,
    };
    let upstream = spec.upstream_velocity(theta_w);
    let downstream = spec.downstream_velocity(u0);
    let a = spec.normal_speed();
    let sigma = (a * theta_w.cos() - u0) / (a * theta_w.sin());
    if !(sigma > T::zero()) {
        return Err(Error::Domain(format!(
            "shock slope must be positive, got {sigma}"
        )));
    }
    let bg = BackgroundSolution {
        gas: spec.gas,
        q0: spec.q0,
        theta_i: spec.theta_i,
        theta_w,
        upstream,
        downstream,
        sigma,
        u0,
        phi_minus: upstream.0,
        phi_plus: downstream.0,
    };
    verify_background(&bg, branch)?;
    Ok(bg)
}

fn verify_background<T: Scalar>(bg: &BackgroundSolution<T>, branch: Branch) -> Result<()> {
    let gas = &bg.gas;
    let h = rh_jump(gas, &bg.upstream, &bg.downstream)?;
    if h.abs() > T::tol(1e-10) {
        return Err(Error::Domain(format!("jump residual {h} exceeds tolerance")));
    }
    if gas.classify(&bg.upstream) != FlowType::Supersonic {
        return Err(Error::Domain("upstream state is not supersonic".into()));
    }
    if branch == Branch::Weak && gas.classify(&bg.downstream) != FlowType::Subsonic {
        return Err(Error::Domain("weak downstream state is not subsonic".into()));
    }
    let (rm, rp) = bg.densities();
    if !(rm < rp) {
        return Err(Error::Domain("entropy condition violated".into()));
    }
    // continuity on the shock plane: (U⁻ − U⁺)·(1, σ, 0) = 0
    let jump = bg.upstream.sub(&bg.downstream);
    let c = jump.0[0] + jump.0[1] * bg.sigma;
    if c.abs() > T::tol(1e-12) * (T::one() + bg.q0) {
        return Err(Error::Domain(format!("potential jump {c} on the shock plane")));
    }
    Ok(())
}

/// Sampled polar arc between the strong and weak roots.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolarDiagnostics<T> {
    pub v_s: T,
    pub v_w: T,
    pub theta_w_star: T,
    pub theta_s_star: T,
    /// Points `(v1, v2)` with `v2 ≥ 0`, from `v_s` to `v_w`.
    pub curve: Vec<[T; 2]>,
}

impl<T: Scalar> PolarDiagnostics<T> {
    pub fn to_csv(&self, header_comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = header_comment {
            out.push_str(&format!("# {c}\n"));
        }
        out.push_str("v1,v2\n");
        for p in &self.curve {
            out.push_str(&format!("{:.16e},{:.16e}\n", p[0].as_f64(), p[1].as_f64()));
        }
        out
    }
}

/// Samples the arc `v2(v1)` of `H(U0⁻, (v1, v2, q0 cos θi)) = 0` in the
/// rotated frame of wedge angle `theta_w`.
pub fn polar_curve<T: Scalar>(spec: &UpstreamSpec<T>, theta_w: T, n: usize) -> Result<PolarDiagnostics<T>> {
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 samples, got {n}")));
    }
    let crit = critical_angles(spec)?;
    let roots = solve_downstream(spec, theta_w)?;
    let (v_s, v_w) = (roots.u_strong, roots.u_weak);
    let um = spec.upstream_velocity(theta_w);
    let b = spec.edge_speed();
    let gas = spec.gas;
    let mut curve = Vec::with_capacity(n);
    for k in 0..n {
        let v1 = v_s + (v_w - v_s) * T::lit(k as f64) / T::lit((n - 1) as f64);
        if k == 0 || k == n - 1 {
            curve.push([v1, T::zero()]);
            continue;
        }
        let h = |v2: T| rh_jump(&gas, &um, &VelocityState::new(v1, v2, b));
        let room = gas.vacuum_bound() - v1 * v1 - b * b;
        let vmax = room.max(T::zero()).sqrt() * (T::one() - T::lit(1e-12));
        let top = spec.q0.min(vmax);
        let scan = 64;
        let mut lo = T::zero();
        let mut hlo = h(lo)?;
        let mut hi = None;
        for i in 1..=scan {
            let v2 = top * T::lit(i as f64) / T::lit(scan as f64);
            let hv = h(v2)?;
            if (hv > T::zero()) != (hlo > T::zero()) {
                hi = Some(v2);
                break;
            }
            lo = v2;
            hlo = hv;
        }
        let mut hi = hi.ok_or_else(|| {
            Error::Domain(format!("no polar point above v1 = {v1}"))
        })?;
        for _ in 0..200 {
            if hi - lo <= T::epsilon() * T::lit(4.0) * (T::one() + hi) {
                break;
            }
            let mid = (lo + hi) / T::lit(2.0);
            let hm = h(mid)?;
            if (hm > T::zero()) == (hlo > T::zero()) {
                lo = mid;
                hlo = hm;
            } else {
                hi = mid;
            }
        }
        curve.push([v1, (lo + hi) / T::lit(2.0)]);
    }
    Ok(PolarDiagnostics {
        v_s,
        v_w,
        theta_w_star: crit.theta_w_star,
        theta_s_star: crit.theta_s_star,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(q0: f64, ti: f64) -> UpstreamSpec<f64> {
        UpstreamSpec::new(GasModel::new(1.4).unwrap(), q0, ti).unwrap()
    }

    #[test]
    fn rejects_degenerate_incidence() {
        let g = GasModel::new(1.4).unwrap();
        assert!(UpstreamSpec::new(g, 1.1, 0.0).is_err());
        assert!(UpstreamSpec::new(g, 1.1, std::f64::consts::PI).is_err());
        assert!(UpstreamSpec::new(g, 0.8, 1.0).is_err());
    }

    #[test]
    fn residual_derivative_matches_difference_quotient() {
        let s = spec(1.3, 1.2);
        let (tw, u, h) = (0.1, 0.9, 1e-6);
        let fd = (s.polar_residual(tw, u + h).unwrap() - s.polar_residual(tw, u - h).unwrap()) / (2.0 * h);
        assert!((fd - s.polar_residual_du(tw, u).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn detached_above_star() {
        let s = spec(1.1, std::f64::consts::FRAC_PI_2);
        let c = critical_angles(&s).unwrap();
        assert!(matches!(
            solve_downstream(&s, c.theta_w_star + 1e-6),
            Err(Error::Detached { .. })
        ));
        assert!(solve_downstream(&s, c.theta_w_star - 1e-6).is_ok());
    }

    #[test]
    fn background_rejects_outside_window() {
        let s = spec(1.1, std::f64::consts::FRAC_PI_2);
        let c = critical_angles(&s).unwrap();
        match background(&s, c.theta_s_star * 0.5) {
            Err(Error::NotTransonic { side, .. }) => assert_eq!(side, WindowSide::BelowSonic),
            other => panic!("unexpected {other:?}"),
        }
        match background(&s, c.theta_w_star * 1.01) {
            Err(Error::NotTransonic { side, .. }) => assert_eq!(side, WindowSide::AboveDetachment),
            other => panic!("unexpected {other:?}"),
        }
    }
}
