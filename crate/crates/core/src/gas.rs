//! Polytropic closures of steady potential flow, nondimensionalised so the
//! stagnation density and sound speed are 1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GasModel<T> {
    gamma: T,
}

/// Velocity vector `(u1, u2, u3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VelocityState<T>(pub [T; 3]);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FlowType {
    Supersonic,
    Subsonic,
    Sonic,
}

impl<T: Scalar> VelocityState<T> {
    pub fn new(u1: T, u2: T, u3: T) -> Self {
        Self([u1, u2, u3])
    }

    pub fn zero() -> Self {
        Self([T::zero(); 3])
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn speed(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    pub fn add(&self, other: &Self) -> Self {
        Self([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }

    pub fn scale(&self, s: T) -> Self {
        Self([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl<T: Scalar> GasModel<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if !(gamma > T::one()) || !gamma.is_finite() {
            return Err(Error::Domain(format!(
                "adiabatic exponent must exceed 1, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// Largest admissible squared speed, `2/(γ−1)`.
    pub fn vacuum_bound(&self) -> T {
        T::lit(2.0) / (self.gamma - T::one())
    }

    fn check(&self, q2: T) -> Result<()> {
        let limit = self.vacuum_bound();
        if !(q2 >= T::zero()) || q2 > limit {
            return Err(Error::Vacuum {
                q2: q2.as_f64(),
                limit: limit.as_f64(),
            });
        }
        Ok(())
    }

    /// `c² = 1 − (γ−1) q²/2`.
    pub fn sonic_speed_sq(&self, q2: T) -> Result<T> {
        self.check(q2)?;
        Ok((T::one() - (self.gamma - T::one()) * q2 / T::lit(2.0)).max(T::zero()))
    }

    /// `ρ = (c²)^{1/(γ−1)}`.
    pub fn density(&self, q2: T) -> Result<T> {
        let c2 = self.sonic_speed_sq(q2)?;
        Ok(c2.powf(T::one() / (self.gamma - T::one())))
    }

    /// `dρ/d(q²) = −ρ/(2c²)`.
    pub fn density_derivative(&self, q2: T) -> Result<T> {
        let c2 = self.sonic_speed_sq(q2)?;
        let e = T::one() / (self.gamma - T::one()) - T::one();
        Ok(-c2.powf(e) / T::lit(2.0))
    }

    /// The speed at which `q² = c²(q²)`.
    pub fn critical_speed(&self) -> T {
        (T::lit(2.0) / (self.gamma + T::one())).sqrt()
    }

    /// `a_ij = c² δ_ij − u_i u_j`.
    pub fn coefficients(&self, u: &VelocityState<T>) -> Result<[[T; 3]; 3]> {
        let c2 = self.sonic_speed_sq(u.norm_sq())?;
        let mut a = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = -u.0[i] * u.0[j];
            }
            a[i][i] = a[i][i] + c2;
        }
        Ok(a)
    }

    pub fn classify(&self, u: &VelocityState<T>) -> FlowType {
        let cs = self.critical_speed();
        let q = u.speed();
        if (q - cs).abs() <= T::tol(1e-12) * cs {
            FlowType::Sonic
        } else if q > cs {
            FlowType::Supersonic
        } else {
            FlowType::Subsonic
        }
    }

    pub fn is_supersonic(&self, u: &VelocityState<T>) -> bool {
        self.classify(u) == FlowType::Supersonic
    }

    pub fn is_subsonic(&self, u: &VelocityState<T>) -> bool {
        self.classify(u) == FlowType::Subsonic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stagnation_and_vacuum() {
        let g = GasModel::<f64>::new(1.4).unwrap();
        assert_eq!(g.density(0.0).unwrap(), 1.0);
        assert_eq!(g.density(g.vacuum_bound()).unwrap(), 0.0);
        assert!(g.density(g.vacuum_bound() * 1.001).is_err());
        assert!(g.density(-1e-3).is_err());
    }

    #[test]
    fn rejects_gamma_at_most_one() {
        assert!(GasModel::<f64>::new(1.0).is_err());
        assert!(GasModel::<f64>::new(0.9).is_err());
        assert!(GasModel::<f64>::new(f64::NAN).is_err());
    }

    #[test]
    fn gamma_two_density_is_linear() {
        let g = GasModel::<f64>::new(2.0).unwrap();
        assert!((g.density(2.0 / 3.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_three_sound_speed() {
        let g = GasModel::<f64>::new(3.0).unwrap();
        assert!((g.sonic_speed_sq(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((g.critical_speed() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_precision_works() {
        let g = GasModel::<f32>::new(1.4).unwrap();
        assert!((g.critical_speed() - 0.912_870_9).abs() < 1e-6);
        assert_eq!(
            g.classify(&VelocityState::new(1.1f32, 0.0, 0.0)),
            FlowType::Supersonic
        );
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let g = GasModel::<f64>::new(1.4).unwrap();
        let q2 = 0.7;
        let h = 1e-6;
        let fd = (g.density(q2 + h).unwrap() - g.density(q2 - h).unwrap()) / (2.0 * h);
        assert!((fd - g.density_derivative(q2).unwrap()).abs() < 1e-9);
    }
}
