//! Ellipticity, obliqueness and barrier-exponent certificate for a background state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gas::{FlowType, GasModel, VelocityState};
use crate::polar::BackgroundSolution;
use crate::scalar::Scalar;

/// Two-sided ellipticity constant of `a_ij(U)`: `min(λ_min, 1/λ_max)`.
pub fn ellipticity<T: Scalar>(gas: &GasModel<T>, u_plus: &VelocityState<T>) -> Result<T> {
    if gas.classify(u_plus) != FlowType::Subsonic {
        return Err(Error::NotSubsonic);
    }
    let c2 = gas.sonic_speed_sq(u_plus.norm_sq())?;
    let smallest = c2 - u_plus.norm_sq();
    let largest = c2;
    Ok(smallest.min(T::one() / largest))
}

/// Gradient of the jump function in its second argument, `H_v(u, v)`.
pub fn obliqueness_mu<T: Scalar>(
    gas: &GasModel<T>,
    u_minus: &VelocityState<T>,
    u_plus: &VelocityState<T>,
) -> Result<[T; 3]> {
    let (u, v) = (u_minus, u_plus);
    let ru = gas.density(u.norm_sq())?;
    let rv = gas.density(v.norm_sq())?;
    let drv = gas.density_derivative(v.norm_sq())?;
    let vd = v.dot(&u.sub(v));
    let two = T::lit(2.0);
    let mut mu = [T::zero(); 3];
    for j in 0..3 {
        mu[j] = -two * drv * v.0[j] * vd - rv * (u.0[j] - v.0[j]) - (ru * u.0[j] - rv * v.0[j]);
    }
    Ok(mu)
}

/// Scaled-sector data the barrier inequalities depend on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SectorGeometry<T> {
    pub mu: [T; 3],
    pub d1: T,
    pub d2: T,
    pub omega: T,
    pub omega_bar: T,
    pub phi_cap: T,
}

impl<T: Scalar> SectorGeometry<T> {
    pub fn new(mu: [T; 3], a0: &[[T; 3]; 3], sigma: T) -> Self {
        let d1 = T::one() / a0[0][0].sqrt();
        let d2 = T::one() / a0[1][1].sqrt();
        let omega = sigma.atan();
        let omega_bar = (d2 * sigma).atan2(d1);
        let phi_cap = (mu[1] * d2).atan2(mu[0] * d1);
        Self {
            mu,
            d1,
            d2,
            omega,
            omega_bar,
            phi_cap,
        }
    }

    /// Coefficients `(A, B)` of `e^{-s}(A ∂_s + B ∂_θ)` representing
    /// `μ1 ∂_{y1} + μ2 ∂_{y2}` on the shock ray in scaled log-polar coordinates.
    pub fn shock_coefficients(&self) -> (T, T) {
        let (c, s) = (self.omega_bar.cos(), self.omega_bar.sin());
        let m1 = self.mu[0] * self.d1;
        let m2 = self.mu[1] * self.d2;
        (m1 * c + m2 * s, m2 * c - m1 * s)
    }

    /// `r̄` exponent of the outgoing corner mode: smallest `λ > 0` with
    /// `r̄^λ sin(λθ̄ + θ0)` satisfying both homogeneous boundary conditions.
    pub fn corner_exponent(&self) -> T {
        T::one() + (T::FRAC_PI_2() - self.phi_cap) / self.omega_bar
    }
}

/// Which barrier inequality failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Inequality {
    Interior,
    Wedge,
    Shock,
}

/// Margins of the three supersolution inequalities of one barrier
/// `r̄^l sin(tθ̄ + θ0)`, normalised by the radial power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityMargins<T> {
    pub l: T,
    pub t: T,
    pub theta0: T,
    /// Guaranteed interior bound `τ² sin τ` on `−L v*`.
    pub interior: T,
    /// `min sin(tθ̄ + θ0) − sin τ` over the sector; must be positive.
    pub sine_floor: T,
    /// `−∂_{y2} v*` on the wedge.
    pub wedge: T,
    /// `Dv*·μ` on the shock.
    pub shock: T,
    pub failing: Option<Inequality>,
}

impl<T: Scalar> InequalityMargins<T> {
    pub fn admissible(&self) -> bool {
        self.failing.is_none()
    }

    pub fn min_margin(&self) -> T {
        let interior = if self.sine_floor > T::zero() {
            self.interior
        } else {
            self.sine_floor
        };
        interior.min(self.wedge).min(self.shock)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierParams<T> {
    pub alpha: T,
    pub beta: T,
    pub tau0: T,
    pub tau1: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierMargins<T> {
    /// Decay barrier `r̄^β sin((β+τ0)θ̄ + π/2 + τ0)`.
    pub v1: InequalityMargins<T>,
    /// Corner barrier `r̄^{1+α} sin((1+α+τ1)θ̄ + π/2 + τ1)`.
    pub v2: InequalityMargins<T>,
    pub min_margin: T,
    pub admissible: bool,
}

/// Checks one barrier on a fine `θ̄` grid over `[0, ω̄]`.
pub fn barrier_margins<T: Scalar>(geom: &SectorGeometry<T>, l: T, tau: T) -> InequalityMargins<T> {
    let t = l + tau;
    let theta0 = T::FRAC_PI_2() + tau;
    let n = 2000;
    let mut min_sine = T::infinity();
    for k in 0..=n {
        let th = geom.omega_bar * T::lit(k as f64) / T::lit(n as f64);
        min_sine = min_sine.min((t * th + theta0).sin());
    }
    let interior = tau * tau * tau.sin();
    let sine_floor = min_sine - tau.sin();
    let wedge = -geom.d2 * t * theta0.cos();
    let k_cap = ((geom.mu[0] * geom.d1).powi(2) + (geom.mu[1] * geom.d2).powi(2)).sqrt();
    let wb = geom.omega_bar;
    let s = (t * wb + theta0).sin();
    let c = (t * wb + theta0).cos();
    let shock = k_cap * (l * s * (wb - geom.phi_cap).cos() + t * c * (geom.phi_cap - wb).sin());
    let failing = if !(t > l) || !(sine_floor > T::zero()) {
        Some(Inequality::Interior)
    } else if !(wedge > T::zero()) {
        Some(Inequality::Wedge)
    } else if !(shock > T::zero()) {
        Some(Inequality::Shock)
    } else {
        None
    };
    InequalityMargins {
        l,
        t,
        theta0,
        interior,
        sine_floor,
        wedge,
        shock,
        failing,
    }
}

pub fn verify_barrier_params<T: Scalar>(
    geom: &SectorGeometry<T>,
    params: &BarrierParams<T>,
) -> BarrierMargins<T> {
    let v1 = barrier_margins(geom, params.beta, params.tau0);
    let v2 = barrier_margins(geom, T::one() + params.alpha, params.tau1);
    BarrierMargins {
        v1,
        v2,
        min_margin: v1.min_margin().min(v2.min_margin()),
        admissible: v1.admissible() && v2.admissible(),
    }
}

const EXPONENT_GRID: [f64; 10] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50];
const SLACK_GRID: [f64; 3] = [0.01, 0.02, 0.05];

fn best_slack<T: Scalar>(geom: &SectorGeometry<T>, l: T) -> Option<(T, InequalityMargins<T>)> {
    let mut best: Option<(T, InequalityMargins<T>)> = None;
    for &tau in &SLACK_GRID {
        let m = barrier_margins(geom, l, T::lit(tau));
        if !m.admissible() {
            continue;
        }
        // strict improvement only, so the smallest slack wins ties
        if best.map_or(true, |(_, b)| m.min_margin() > b.min_margin()) {
            best = Some((T::lit(tau), m));
        }
    }
    best
}

/// Grid search for barrier exponents: largest admissible `β`, then the largest
/// admissible `α ≤ β` (or the smallest admissible `α` if none is `≤ β`), each
/// with the slack that maximises its smallest margin.
pub fn select_exponents<T: Scalar>(geom: &SectorGeometry<T>) -> Option<(BarrierParams<T>, BarrierMargins<T>)> {
    let (beta, tau0) = EXPONENT_GRID
        .iter()
        .rev()
        .find_map(|&b| best_slack(geom, T::lit(b)).map(|(tau, _)| (T::lit(b), tau)))?;
    let admissible_alpha: Vec<(T, T)> = EXPONENT_GRID
        .iter()
        .filter_map(|&a| best_slack(geom, T::one() + T::lit(a)).map(|(tau, _)| (T::lit(a), tau)))
        .collect();
    let (alpha, tau1) = admissible_alpha
        .iter()
        .rev()
        .find(|(a, _)| *a <= beta)
        .or_else(|| admissible_alpha.first())
        .copied()?;
    let params = BarrierParams {
        alpha,
        beta,
        tau0,
        tau1,
    };
    Some((params, verify_barrier_params(geom, &params)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityCertificate<T> {
    pub lambda: T,
    pub mu: [T; 3],
    pub n_sh: [T; 3],
    pub mu_dot_n: T,
    pub omega: T,
    pub omega_bar: T,
    pub phi_cap: T,
    pub d1: T,
    pub d2: T,
    pub alpha: T,
    pub beta: T,
    pub tau0: T,
    pub tau1: T,
    /// Downstream coefficient matrix `a_ij(U0⁺)`.
    pub a0: [[T; 3]; 3],
    pub sigma: T,
    pub margins: BarrierMargins<T>,
}

impl<T: Scalar> StabilityCertificate<T> {
    pub fn sector(&self) -> SectorGeometry<T> {
        SectorGeometry {
            mu: self.mu,
            d1: self.d1,
            d2: self.d2,
            omega: self.omega,
            omega_bar: self.omega_bar,
            phi_cap: self.phi_cap,
        }
    }

    pub fn params(&self) -> BarrierParams<T> {
        BarrierParams {
            alpha: self.alpha,
            beta: self.beta,
            tau0: self.tau0,
            tau1: self.tau1,
        }
    }
}

/// Outer unit normal of the shock plane `x2 = σ x1` seen from the subsonic side.
pub fn shock_normal<T: Scalar>(sigma: T) -> [T; 3] {
    let n = (T::one() + sigma * sigma).sqrt();
    [-sigma / n, T::one() / n, T::zero()]
}

pub fn certify<T: Scalar>(gas: &GasModel<T>, bg: &BackgroundSolution<T>) -> Result<StabilityCertificate<T>> {
    let lambda = ellipticity(gas, &bg.downstream)?;
    let mu = obliqueness_mu(gas, &bg.upstream, &bg.downstream)?;
    let a0 = gas.coefficients(&bg.downstream)?;
    let n_sh = shock_normal(bg.sigma);
    let mu_dot_n = mu[0] * n_sh[0] + mu[1] * n_sh[1] + mu[2] * n_sh[2];
    if !(mu[0] > T::zero()) {
        return Err(Error::NotWeakTransonic(format!("mu1 = {} is not positive", mu[0])));
    }
    if !(mu[1] > T::zero()) {
        return Err(Error::NotWeakTransonic(format!("mu2 = {} is not positive", mu[1])));
    }
    if !(mu_dot_n > T::zero()) {
        return Err(Error::NotWeakTransonic(format!(
            "mu . n_sh = {mu_dot_n} is not positive"
        )));
    }
    let geom = SectorGeometry::new(mu, &a0, bg.sigma);
    let quarter = T::FRAC_PI_2();
    for (name, v) in [
        ("omega", geom.omega),
        ("omega_bar", geom.omega_bar),
        ("Phi", geom.phi_cap),
    ] {
        if !(v > T::zero() && v < quarter) {
            return Err(Error::NotWeakTransonic(format!(
                "{name} = {v} outside (0, pi/2)"
            )));
        }
    }
    let (params, margins) = select_exponents(&geom).ok_or_else(|| {
        Error::NotWeakTransonic("no admissible barrier exponents on the search grid".into())
    })?;
    Ok(StabilityCertificate {
        lambda,
        mu,
        n_sh,
        mu_dot_n,
        omega: geom.omega,
        omega_bar: geom.omega_bar,
        phi_cap: geom.phi_cap,
        d1: geom.d1,
        d2: geom.d2,
        alpha: params.alpha,
        beta: params.beta,
        tau0: params.tau0,
        tau1: params.tau1,
        a0,
        sigma: bg.sigma,
        margins,
    })
}
