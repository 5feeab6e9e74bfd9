//! Experiment configuration: a TOML file with one section per concern.
//!
//! Angles are written in degrees and converted to radians by
//! [`ExperimentConfig::resolve`], which also runs every precondition check
//! and reports all failures at once.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::elliptic::FarField;
use crate::error::{Error, Result, WindowSide};
use crate::geometry::{EdgeBump, WedgeBump, WedgeGeometry};
use crate::grid::ZAxis;
use crate::polar::{background_on_branch, critical_angles, Branch, CriticalAngles};
use crate::stability::certify;
use crate::{BackgroundSolution, GasModel, StabilityCertificate, UpstreamSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Polar,
    Certify,
    SolveLinear,
    #[default]
    Run,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Mode,
    pub gas: GasSection,
    pub upstream: UpstreamSection,
    pub wedge: WedgeSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub polar: PolarSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpstreamSection {
    pub q0: f64,
    pub theta_i_deg: f64,
    /// Constant change of the upstream state, `U⁻ = U0⁻ + t e`.
    #[serde(default)]
    pub perturbation: Option<UpstreamPerturbation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpstreamPerturbation {
    pub direction: [f64; 3],
    pub t: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WedgeSection {
    /// Exactly one of `theta_w_deg` and `window_fraction` must be set.
    #[serde(default)]
    pub theta_w_deg: Option<f64>,
    /// Position inside the transonic window, 0 at the sonic angle and 1 at
    /// detachment.
    #[serde(default)]
    pub window_fraction: Option<f64>,
    #[serde(default)]
    pub period: Option<f64>,
    #[serde(default, rename = "bump")]
    pub bumps: Vec<WedgeBump>,
    #[serde(default, rename = "edge_bump")]
    pub edge_bumps: Vec<EdgeBump>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Radial nodes; derived from `per_octave` when absent.
    pub ns: Option<usize>,
    pub per_octave: usize,
    pub nt: usize,
    /// Nodes in `x3`; absent means the planar reduction.
    pub nz: Option<usize>,
    /// Truncation radius `R`: the grid spans `r̄ ∈ [1/R, R]` unless `r_in`
    /// overrides the inner cut.
    pub radius: f64,
    pub r_in: Option<f64>,
    pub far_field: FarField,
    pub tol: f64,
    pub max_iter: usize,
    pub window: usize,
    pub krylov_tol: f64,
    /// Nominal data size, used when all perturbations vanish.
    pub eps: f64,
    /// Iteration-set constant; calibrated from a pilot run when absent.
    pub c0: Option<f64>,
    /// Data scale of the calibration run relative to the configured data.
    pub pilot_scale: f64,
    /// Data norm above which `validate` warns.
    pub contraction_limit: f64,
    /// Residuals are reported over `r̄ ∈ [residual_r_min, residual_r_max]`.
    pub residual_r_min: f64,
    pub residual_r_max: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            ns: None,
            per_octave: 8,
            nt: 17,
            nz: None,
            radius: 32.0,
            r_in: None,
            far_field: FarField::Dirichlet,
            tol: 1e-8,
            max_iter: 50,
            window: 5,
            krylov_tol: 1e-12,
            eps: 1e-3,
            c0: None,
            pilot_scale: 0.5,
            contraction_limit: 600.0,
            residual_r_min: 0.5,
            residual_r_max: 8.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarSection {
    pub samples: usize,
}

impl Default for PolarSection {
    fn default() -> Self {
        Self { samples: 201 }
    }
}

/// Each sweep point multiplies every perturbation amplitude (bumps and
/// upstream `t`) by one entry of `amplitudes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub amplitudes: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            amplitudes: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write the potential as CSV and binary dump.
    pub fields: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            fields: true,
        }
    }
}

/// Grid override `NSxNT` or `NSxNTxNZ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridArg {
    pub ns: usize,
    pub nt: usize,
    pub nz: Option<usize>,
}

impl std::str::FromStr for GridArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', 'X']).collect();
        let num = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad grid '{s}': expected NSxNT or NSxNTxNZ")))
        };
        match parts.as_slice() {
            [a, b] => Ok(Self { ns: num(a)?, nt: num(b)?, nz: None }),
            [a, b, c] => Ok(Self {
                ns: num(a)?,
                nt: num(b)?,
                nz: Some(num(c)?),
            }),
            _ => Err(Error::Config(format!("bad grid '{s}': expected NSxNT or NSxNTxNZ"))),
        }
    }
}

/// Outcome of the dry-run checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub config_hash: String,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    /// `θs*`, `θw*` and the requested `θw`, in degrees, when computable.
    pub window_deg: Option<[f64; 3]>,
    pub data_norm: Option<f64>,
    #[serde(skip)]
    pub window_error: Option<WindowFailure>,
}

/// Typed window failure kept alongside the text report so callers can map
/// it to an exit status.
#[derive(Clone, Debug, PartialEq)]
pub enum WindowFailure {
    Detached { theta_w: f64, theta_w_star: f64 },
    BelowSonic { theta_w: f64, theta_s_star: f64, theta_w_star: f64 },
    NoWindow,
    NotWeakTransonic(String),
}

impl WindowFailure {
    pub fn to_error(&self) -> Error {
        match *self {
            WindowFailure::Detached { theta_w, theta_w_star } => Error::Detached { theta_w, theta_w_star },
            WindowFailure::BelowSonic {
                theta_w,
                theta_s_star,
                theta_w_star,
            } => Error::NotTransonic {
                side: WindowSide::BelowSonic,
                theta_w,
                theta_s_star,
                theta_w_star,
            },
            WindowFailure::NoWindow => Error::NoTransonicWindow,
            WindowFailure::NotWeakTransonic(ref m) => Error::NotWeakTransonic(m.clone()),
        }
    }
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Everything a run needs, in radians and solver units.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub gas: GasModel,
    pub spec: UpstreamSpec,
    pub angles: CriticalAngles<f64>,
    pub theta_w: f64,
    pub bg: BackgroundSolution,
    pub cert: StabilityCertificate,
    pub wedge: WedgeGeometry,
    pub upstream_change: Option<([f64; 3], f64)>,
    pub ns: usize,
    pub nt: usize,
    pub z: ZAxis,
    pub r_in: f64,
    pub r_out: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply_grid(&mut self, g: GridArg) {
        self.solver.ns = Some(g.ns);
        self.solver.nt = g.nt;
        if g.nz.is_some() {
            self.solver.nz = g.nz;
        }
    }

    /// SHA-256 over the canonical JSON form of the config and the crate
    /// version, as lowercase hex. The output directory is left out: where
    /// results go does not change them.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(serde_json::to_vec(&c).expect("config serializes"));
        hex::encode(h.finalize())
    }

    pub fn hash_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        hex::decode_to_slice(self.hash(), &mut out).expect("hex digest");
        out
    }

    /// Copy with every perturbation amplitude multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut c = self.clone();
        for b in &mut c.wedge.bumps {
            b.amplitude *= s;
        }
        for b in &mut c.wedge.edge_bumps {
            b.amplitude *= s;
        }
        if let Some(p) = &mut c.upstream.perturbation {
            p.t *= s;
        }
        c
    }

    pub fn geometry(&self) -> WedgeGeometry {
        WedgeGeometry {
            wedge: self.wedge.bumps.clone(),
            edge: self.wedge.edge_bumps.clone(),
            period: self.wedge.period,
        }
    }

    fn is_three_dimensional(&self) -> bool {
        self.wedge.bumps.iter().any(|b| b.r3.is_some()) || self.wedge.edge_bumps.iter().any(|b| b.r3.is_some())
    }

    pub fn radial_nodes(&self) -> usize {
        self.solver.ns.unwrap_or_else(|| {
            let r_in = self.solver.r_in.unwrap_or(1.0 / self.solver.radius);
            ((self.solver.radius / r_in).log2() * self.solver.per_octave as f64).round() as usize + 1
        })
    }

    /// Checks every precondition without solving anything. With
    /// `data_norm`, the caller supplies the size of the perturbation data
    /// so the contraction warning can be issued.
    pub fn validate_with(&self, data_norm: impl Fn(&Scenario) -> Option<f64>) -> (ValidationReport, Option<Scenario>) {
        let mut rep = ValidationReport {
            config_hash: self.hash(),
            ..Default::default()
        };
        let deg = std::f64::consts::PI / 180.0;
        let s = &self.solver;

        let gas = match GasModel::new(self.gas.gamma) {
            Ok(g) => Some(g),
            Err(e) => {
                rep.errors.push(format!("gas: {e}"));
                None
            }
        };
        if !(self.upstream.theta_i_deg > 0.0 && self.upstream.theta_i_deg < 180.0) {
            rep.errors.push(format!("upstream: theta_i_deg = {} outside (0, 180)", self.upstream.theta_i_deg));
        }
        match (self.wedge.theta_w_deg, self.wedge.window_fraction) {
            (Some(_), Some(_)) => rep.errors.push("wedge: set only one of theta_w_deg and window_fraction".into()),
            (None, None) => rep.errors.push("wedge: one of theta_w_deg and window_fraction is required".into()),
            (None, Some(f)) if !(f > 0.0 && f < 1.0) => {
                rep.errors.push(format!("wedge: window_fraction = {f} outside (0, 1)"))
            }
            _ => {}
        }
        for (i, b) in self.wedge.bumps.iter().enumerate() {
            if !(b.r1 > 0.0) || b.r3.is_some_and(|r| !(r > 0.0)) || !b.amplitude.is_finite() {
                rep.errors.push(format!("wedge.bump[{i}]: widths must be positive and the amplitude finite"));
            }
            if b.c1 - b.r1 < 0.0 {
                rep.errors.push(format!("wedge.bump[{i}]: support reaches behind the edge (c1 - r1 < 0)"));
            }
        }
        for (i, b) in self.wedge.edge_bumps.iter().enumerate() {
            if b.r3.is_some_and(|r| !(r > 0.0)) || !b.amplitude.is_finite() {
                rep.errors.push(format!("wedge.edge_bump[{i}]: width must be positive and the amplitude finite"));
            }
        }
        if let Some(p) = self.upstream.perturbation {
            if !p.t.is_finite() || p.direction.iter().any(|v| !v.is_finite()) {
                rep.errors.push("upstream.perturbation: values must be finite".into());
            }
        }
        let three_d = self.is_three_dimensional();
        match (s.nz, self.wedge.period) {
            (Some(n), Some(p)) => {
                if n < 4 {
                    rep.errors.push(format!("solver: nz = {n} below 4"));
                }
                if !(p > 0.0) {
                    rep.errors.push(format!("wedge: period = {p} must be positive"));
                }
            }
            (Some(_), None) => rep.errors.push("solver: nz needs wedge.period for the periodic x3 cell".into()),
            (None, _) if three_d => {
                rep.errors.push("solver: x3-dependent bumps need nz and wedge.period".into())
            }
            _ => {}
        }
        let ns = self.radial_nodes();
        if ns < 5 || s.nt < 5 {
            rep.errors.push(format!("solver: grid {ns}x{} too small (need at least 5x5)", s.nt));
        }
        let r_in = s.r_in.unwrap_or(1.0 / s.radius);
        if !(s.radius > 4.0) {
            rep.errors.push(format!("solver: radius = {} must exceed 4", s.radius));
        }
        if !(r_in > 0.0 && r_in < 1.0) {
            rep.errors.push(format!("solver: r_in = {r_in} outside (0, 1)"));
        }
        if !(s.residual_r_min >= r_in && s.residual_r_max <= s.radius && s.residual_r_min < s.residual_r_max) {
            rep.errors.push("solver: residual range must lie inside [r_in, radius]".into());
        }
        if !(s.tol > 0.0 && s.krylov_tol > 0.0 && s.eps > 0.0 && s.pilot_scale > 0.0) {
            rep.errors.push("solver: tol, krylov_tol, eps and pilot_scale must be positive".into());
        }
        if s.max_iter == 0 || s.window == 0 {
            rep.errors.push("solver: max_iter and window must be at least 1".into());
        }
        if s.c0.is_some_and(|c| !(c > 0.0)) {
            rep.errors.push("solver: c0 must be positive".into());
        }
        if self.polar.samples < 3 {
            rep.errors.push("polar: samples must be at least 3".into());
        }
        if self.mode == Mode::Sweep && (self.sweep.amplitudes.is_empty() || self.sweep.amplitudes.iter().any(|a| !(*a > 0.0))) {
            rep.errors.push("sweep: amplitudes must be a non-empty list of positive values".into());
        }

        let Some(gas) = gas else { return (rep, None) };
        let spec = match UpstreamSpec::new(gas, self.upstream.q0, self.upstream.theta_i_deg * deg) {
            Ok(sp) => sp,
            Err(e) => {
                rep.errors.push(format!("upstream: {e}"));
                return (rep, None);
            }
        };
        let angles = match critical_angles(&spec) {
            Ok(a) => a,
            Err(e) => {
                rep.errors.push(format!("window: {e}"));
                if matches!(e, Error::NoTransonicWindow) {
                    rep.window_error = Some(WindowFailure::NoWindow);
                }
                return (rep, None);
            }
        };
        let theta_w = match (self.wedge.theta_w_deg, self.wedge.window_fraction) {
            (Some(t), None) => t * deg,
            (None, Some(f)) if f > 0.0 && f < 1.0 => angles.theta_s_star + f * (angles.theta_w_star - angles.theta_s_star),
            _ => return (rep, None),
        };
        rep.window_deg = Some([angles.theta_s_star / deg, angles.theta_w_star / deg, theta_w / deg]);
        let fail = if theta_w >= angles.theta_w_star {
            Some(WindowFailure::Detached {
                theta_w,
                theta_w_star: angles.theta_w_star,
            })
        } else if theta_w <= angles.theta_s_star {
            Some(WindowFailure::BelowSonic {
                theta_w,
                theta_s_star: angles.theta_s_star,
                theta_w_star: angles.theta_w_star,
            })
        } else {
            None
        };
        if let Some(f) = fail {
            rep.errors.push(format!("window: {}", f.to_error()));
            rep.window_error = Some(f);
            return (rep, None);
        }
        let bg = match background_on_branch(&spec, theta_w, Branch::Weak) {
            Ok(b) => b,
            Err(e) => {
                rep.errors.push(format!("background: {e}"));
                return (rep, None);
            }
        };
        let cert = match certify(&gas, &bg) {
            Ok(c) => c,
            Err(e) => {
                rep.errors.push(format!("certificate: {e}"));
                if let Error::NotWeakTransonic(m) = e {
                    rep.window_error = Some(WindowFailure::NotWeakTransonic(m));
                }
                return (rep, None);
            }
        };
        if let Some(p) = self.upstream.perturbation {
            let u = bg.upstream.0;
            let v = crate::VelocityState::new(
                u[0] + p.t * p.direction[0],
                u[1] + p.t * p.direction[1],
                u[2] + p.t * p.direction[2],
            );
            if !gas.is_supersonic(&v) {
                rep.errors.push("upstream.perturbation: perturbed upstream state is not supersonic".into());
            }
        }
        if !rep.errors.is_empty() {
            return (rep, None);
        }
        let z = match (s.nz, self.wedge.period) {
            (Some(n), Some(p)) => ZAxis::Periodic { z0: 0.0, period: p, n },
            _ => ZAxis::Planar,
        };
        let sc = Scenario {
            gas,
            spec,
            angles,
            theta_w,
            bg,
            cert,
            wedge: self.geometry(),
            upstream_change: self.upstream.perturbation.map(|p| (p.direction, p.t)),
            ns,
            nt: s.nt,
            z,
            r_in,
            r_out: s.radius,
        };
        if let Some(d) = data_norm(&sc) {
            // a sweep scales the configured data by each entry
            let d = if self.mode == Mode::Sweep {
                d * self.sweep.amplitudes.iter().fold(0.0f64, |m, a| m.max(*a))
            } else {
                d
            };
            rep.data_norm = Some(d);
            if d > s.contraction_limit {
                rep.warnings.push(format!(
                    "data norm {d:.3e} exceeds {:.3e}: outside contraction regime, run may fail",
                    s.contraction_limit
                ));
            }
        }
        (rep, Some(sc))
    }

    /// Resolves the config into a [`Scenario`], or returns one error that
    /// lists every failed check. A window failure alone keeps its own
    /// error kind.
    pub fn resolve(&self) -> Result<Scenario> {
        let (rep, sc) = self.validate_with(|_| None);
        match sc {
            Some(sc) => Ok(sc),
            None => Err(report_error(&rep)),
        }
    }
}

/// Error for a failed report: the typed window error when that is the only
/// problem, otherwise a configuration error listing everything.
pub fn report_error(rep: &ValidationReport) -> Error {
    match (&rep.window_error, rep.errors.len()) {
        (Some(f), 1) => f.to_error(),
        _ => Error::Config(rep.errors.join("; ")),
    }
}
