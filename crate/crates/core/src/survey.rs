//! Seeded random survey of weak transonic backgrounds, used by the
//! `--seed` option and by the property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::polar::{background, critical_angles, polar_curve, solve_downstream, UpstreamSpec};
use crate::{BackgroundSolution, GasModel};

/// One sampled case with the quantities the polar checks look at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurveyCase {
    pub gamma: f64,
    pub q0: f64,
    pub theta_i: f64,
    pub theta_w: f64,
    pub theta_s_star: f64,
    pub theta_w_star: f64,
    pub v_strong: f64,
    pub v_weak: f64,
    /// Polar residual at the strong and weak roots.
    pub residual_strong: f64,
    pub residual_weak: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// `|U0⁺|² / c²(|U0⁺|²)` on the weak branch.
    pub weak_mach_sq: f64,
    /// Largest discrete second difference of the sampled polar arc.
    pub max_second_difference: f64,
    #[serde(skip)]
    pub bg: BackgroundSolution,
}

/// Ranges of the survey.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurveyRanges {
    pub gamma: (f64, f64),
    /// `q0` as a multiple of the critical speed.
    pub mach: (f64, f64),
    pub theta_i_deg: (f64, f64),
    /// Position of `θw` inside the window.
    pub fraction: (f64, f64),
    pub curve_samples: usize,
}

impl Default for SurveyRanges {
    fn default() -> Self {
        Self {
            gamma: (1.1, 2.0),
            mach: (1.1, 2.5),
            theta_i_deg: (60.0, 120.0),
            fraction: (0.05, 0.95),
            curve_samples: 41,
        }
    }
}

fn sample_case(rng: &mut ChaCha8Rng, r: &SurveyRanges) -> Option<SurveyCase> {
    let gamma = rng.gen_range(r.gamma.0..r.gamma.1);
    let gas = GasModel::new(gamma).ok()?;
    let q0 = gas.critical_speed() * rng.gen_range(r.mach.0..r.mach.1);
    let theta_i = rng.gen_range(r.theta_i_deg.0..r.theta_i_deg.1).to_radians();
    let spec = UpstreamSpec::new(gas, q0, theta_i).ok()?;
    let ang = critical_angles(&spec).ok()?;
    let f = rng.gen_range(r.fraction.0..r.fraction.1);
    let theta_w = ang.theta_s_star + f * (ang.theta_w_star - ang.theta_s_star);
    let roots = solve_downstream(&spec, theta_w).ok()?;
    let bg = background(&spec, theta_w).ok()?;
    let curve = polar_curve(&spec, theta_w, r.curve_samples).ok()?;
    let (rho_minus, rho_plus) = bg.densities();
    let q2 = bg.downstream.norm_sq();
    let c2 = gas.sonic_speed_sq(q2).ok()?;
    let max_second_difference = curve
        .curve
        .windows(3)
        .map(|w| w[0][1] - 2.0 * w[1][1] + w[2][1])
        .fold(f64::NEG_INFINITY, f64::max);
    Some(SurveyCase {
        gamma,
        q0,
        theta_i,
        theta_w,
        theta_s_star: ang.theta_s_star,
        theta_w_star: ang.theta_w_star,
        v_strong: roots.u_strong,
        v_weak: roots.u_weak,
        residual_strong: spec.polar_residual(theta_w, roots.u_strong).ok()?,
        residual_weak: spec.polar_residual(theta_w, roots.u_weak).ok()?,
        rho_minus,
        rho_plus,
        weak_mach_sq: q2 / c2,
        max_second_difference,
        bg,
    })
}

/// `n` cases from `seed`. Draws without a transonic window are skipped, so
/// the sequence depends only on the seed.
pub fn survey(seed: u64, n: usize, ranges: &SurveyRanges) -> Vec<SurveyCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut draws = 0;
    while out.len() < n && draws < 100 * n.max(1) {
        draws += 1;
        if let Some(c) = sample_case(&mut rng, ranges) {
            out.push(c);
        }
    }
    out
}

pub fn survey_csv(cases: &[SurveyCase], header: &str) -> String {
    let mut s = format!(
        "{header}\ngamma,q0,theta_i,theta_w,theta_s_star,theta_w_star,v_strong,v_weak,residual_strong,residual_weak,rho_minus,rho_plus,weak_mach_sq,max_second_difference\n"
    );
    for c in cases {
        let row = [
            c.gamma,
            c.q0,
            c.theta_i,
            c.theta_w,
            c.theta_s_star,
            c.theta_w_star,
            c.v_strong,
            c.v_weak,
            c.residual_strong,
            c.residual_weak,
            c.rho_minus,
            c.rho_plus,
            c.weak_mach_sq,
            c.max_second_difference,
        ];
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
