//! Run pipeline behind the command line: background and certificate, the
//! fixed-point solve, norms, residuals and the files written for each mode.
//!
//! Every file starts with the config hash: CSV files carry a
//! `# config_hash=<hex>` line, JSON files a leading `config_hash` key and
//! binary dumps the raw digest in their header. Wall-clock time goes to a
//! separate `timing.json` so that everything else is reproducible byte for
//! byte.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{report_error, ExperimentConfig, Mode, Scenario, ValidationReport};
use crate::elliptic::TruncatedDomain;
use crate::error::{Error, Result};
use crate::fixpoint::{
    shock_surface_csv, ConvergenceHistory, FixedPointProblem, IterationOptions, IterationState, ResidualReport,
    UpstreamFlow,
};
use crate::norms::{edge_norm, wedge_norm, WeightSpec};
use crate::polar::{critical_angles, polar_curve, solve_downstream};
use crate::survey::{survey, survey_csv, SurveyRanges};
use crate::{GasModel, StabilityCertificate, UpstreamSpec};

pub const SURVEY_CASES: usize = 20;

/// Size of the perturbation data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InputNorms {
    /// `‖w‖` in `C^{3,α;(−β)}_{(−2−α)}` over the wedge.
    pub wedge: f64,
    /// Unweighted `C^{2,α}` norm of `e1`.
    pub edge: f64,
    /// `|U⁻ − U0⁻|`. A constant change has no finite weighted norm, so its
    /// plain magnitude stands in.
    pub upstream: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OutputNorms {
    pub phi: f64,
    pub shock: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BackgroundReport {
    pub theta_w: f64,
    pub theta_s_star: f64,
    pub theta_w_star: f64,
    pub sigma: f64,
    pub upstream: [f64; 3],
    pub downstream: [f64; 3],
    pub rho_minus: f64,
    pub rho_plus: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridReport {
    pub ns: usize,
    pub nt: usize,
    pub nz: usize,
    pub r_in: f64,
    pub r_out: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryRef {
    /// File name relative to the output directory, if written.
    pub file: Option<String>,
    pub iterations: usize,
    pub converged: bool,
    pub max_kappa: Option<f64>,
    pub final_distance: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum C0Source {
    Config,
    Pilot,
    /// No data, nothing to calibrate.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub mode: Mode,
    pub version: String,
    pub background: BackgroundReport,
    pub certificate: StabilityCertificate,
    pub grid: GridReport,
    pub input_norms: InputNorms,
    pub output_norms: OutputNorms,
    /// `output / input`: the measured stability constant.
    pub gain: Option<f64>,
    pub eps: f64,
    pub c0: Option<f64>,
    pub c0_source: C0Source,
    pub pilot_gain: Option<f64>,
    /// Every iterate stayed within `C0 ε`.
    pub within_iteration_set: Option<bool>,
    pub attachment_error: f64,
    pub residuals: ResidualReport,
    pub history: HistoryRef,
    #[serde(skip)]
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub scale: f64,
    pub input_norm: f64,
    pub output_norm: f64,
    pub gain: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub max_kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln output` against `ln input`.
    pub slope: Option<f64>,
    /// `max gain / min gain − 1`.
    pub gain_spread: Option<f64>,
    #[serde(skip)]
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolarReport {
    pub config_hash: String,
    pub theta_s_star: f64,
    pub theta_w_star: f64,
    pub theta_w: f64,
    pub theta_s_star_deg: f64,
    pub theta_w_star_deg: f64,
    pub theta_w_deg: f64,
    pub v_strong: f64,
    pub v_weak: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyReport {
    pub config_hash: String,
    pub background: BackgroundReport,
    pub certificate: StabilityCertificate,
}

/// Result of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Polar(PolarReport),
    Certify(CertifyReport),
    Run(Box<RunSummary>),
    Sweep(SweepSummary),
}

pub fn input_norms(sc: &Scenario) -> Result<InputNorms> {
    let (alpha, beta) = (sc.cert.alpha, sc.cert.beta);
    let z = sc.z.coords();
    let wedge = if sc.wedge.wedge.is_empty() {
        0.0
    } else {
        let spec = WeightSpec::new(3, alpha, -2.0 - alpha, -beta);
        wedge_norm(&sc.wedge, &spec, sc.r_out, 4 * sc.ns + 1, &z)?.total
    };
    let edge = edge_norm(&sc.wedge, alpha, &z);
    let upstream = sc
        .upstream_change
        .map_or(0.0, |(e, t)| t.abs() * (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt());
    Ok(InputNorms {
        wedge,
        edge,
        upstream,
        total: wedge + edge + upstream,
    })
}

/// Dry run: every precondition plus the contraction warning. Never solves.
pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    cfg.validate_with(|sc| input_norms(sc).ok().map(|n| n.total)).0
}

fn background_report(sc: &Scenario) -> BackgroundReport {
    let (rho_minus, rho_plus) = sc.bg.densities();
    BackgroundReport {
        theta_w: sc.theta_w,
        theta_s_star: sc.angles.theta_s_star,
        theta_w_star: sc.angles.theta_w_star,
        sigma: sc.bg.sigma,
        upstream: sc.bg.upstream.0,
        downstream: sc.bg.downstream.0,
        rho_minus,
        rho_plus,
    }
}

pub fn build_problem(cfg: &ExperimentConfig, sc: &Scenario, eps: f64, c0: Option<f64>) -> Result<FixedPointProblem> {
    let s = &cfg.solver;
    let dom = TruncatedDomain::new(&sc.cert.sector(), sc.bg.sigma, sc.ns, sc.nt, sc.z, sc.r_in, sc.r_out)?
        .with_far_field(s.far_field);
    let upstream = match sc.upstream_change {
        Some((e, t)) => UpstreamFlow::perturbed(&sc.bg, e, t),
        None => UpstreamFlow::background(&sc.bg),
    };
    let opts = IterationOptions {
        tol: s.tol,
        max_iter: s.max_iter,
        window: s.window,
        krylov_tol: s.krylov_tol,
        eps,
        c0,
    };
    FixedPointProblem::new(sc.bg, sc.cert, sc.wedge.clone(), upstream, &dom, opts)
}

fn output_norms(state: &IterationState) -> OutputNorms {
    let (phi, shock) = state.norms.as_ref().map_or((f64::NAN, f64::NAN), |n| (n.phi.total, n.shock.total));
    OutputNorms {
        phi,
        shock,
        total: phi + shock,
    }
}

struct Solved {
    problem: FixedPointProblem,
    state: IterationState,
    history: ConvergenceHistory,
}

fn solve(cfg: &ExperimentConfig, sc: &Scenario, eps: f64, c0: Option<f64>, linear: bool) -> Result<Solved> {
    let problem = build_problem(cfg, sc, eps, c0)?;
    let init = problem.initial_state()?;
    let (state, history) = if linear {
        let (next, step) = problem.apply_t(&init)?;
        let d = problem.distance(&next, &init)?;
        let nm = output_norms(&next);
        let history = ConvergenceHistory {
            records: vec![crate::fixpoint::IterationRecord {
                iter: 1,
                distance: d,
                kappa: None,
                phi_norm: nm.phi,
                shock_norm: nm.shock,
                krylov_iterations: step.krylov_iterations,
                in_iteration_set: step.in_iteration_set,
            }],
            converged: true,
        };
        (next, history)
    } else {
        problem.iterate_to_fixed_point(init)?
    };
    Ok(Solved { problem, state, history })
}

fn gain_of(input: f64, output: f64) -> Option<f64> {
    (input > 0.0).then(|| output / input)
}

/// Solves one scenario; calibrates `C0` first when the config leaves it open.
fn run_scenario(cfg: &ExperimentConfig, linear: bool) -> Result<(RunSummary, Solved)> {
    let start = Instant::now();
    let sc = cfg.resolve()?;
    let inputs = input_norms(&sc)?;
    let eps = if inputs.total > 0.0 { inputs.total } else { cfg.solver.eps };
    let (c0, c0_source, pilot_gain) = match cfg.solver.c0 {
        Some(c) => (Some(c), C0Source::Config, None),
        None if inputs.total > 0.0 && !linear => {
            let pilot_cfg = cfg.scaled(cfg.solver.pilot_scale);
            let psc = pilot_cfg.resolve()?;
            let pin = input_norms(&psc)?;
            let p = solve(&pilot_cfg, &psc, pin.total, None, false)?;
            let g = output_norms(&p.state).total / pin.total;
            (Some(2.0 * g), C0Source::Pilot, Some(g))
        }
        None => (None, C0Source::None, None),
    };
    let solved = solve(cfg, &sc, eps, c0, linear)?;
    let outputs = output_norms(&solved.state);
    let residuals = solved
        .problem
        .residual_check(&solved.state, cfg.solver.residual_r_min, cfg.solver.residual_r_max)?;
    let within = c0.map(|_| solved.history.records.iter().all(|r| r.in_iteration_set != Some(false)));
    let g = solved.problem.sys.grid();
    let summary = RunSummary {
        config_hash: cfg.hash(),
        mode: cfg.mode,
        version: env!("CARGO_PKG_VERSION").to_string(),
        background: background_report(&sc),
        certificate: sc.cert,
        grid: GridReport {
            ns: g.ns,
            nt: g.nt,
            nz: g.nz(),
            r_in: sc.r_in,
            r_out: sc.r_out,
        },
        input_norms: inputs,
        output_norms: outputs,
        gain: gain_of(inputs.total, outputs.total),
        eps,
        c0,
        c0_source,
        pilot_gain,
        within_iteration_set: within,
        attachment_error: solved.problem.attachment_error(&solved.state.delta_s_hat),
        residuals,
        history: HistoryRef {
            file: None,
            iterations: solved.history.iterations(),
            converged: solved.history.converged,
            max_kappa: solved.history.max_kappa(),
            final_distance: solved.history.records.last().map(|r| r.distance),
        },
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok((summary, solved))
}

/// Writes files under one output directory, each tagged with the hash.
struct Writer {
    dir: PathBuf,
    hash: String,
}

impl Writer {
    fn new(dir: &Path, hash: String) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
        })
    }

    fn header(&self) -> String {
        format!("# config_hash={}", self.hash)
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }

    fn timing(&self, seconds: f64) -> Result<()> {
        self.json(
            "timing.json",
            &serde_json::json!({ "config_hash": self.hash, "wall_clock_s": seconds }),
        )
    }
}

/// Polar curve and critical angles; with `seed`, also a random survey of
/// `SURVEY_CASES` backgrounds in `survey.csv`.
pub fn polar(cfg: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<PolarReport> {
    let deg = std::f64::consts::PI / 180.0;
    let gas = GasModel::new(cfg.gas.gamma)?;
    let spec = UpstreamSpec::new(gas, cfg.upstream.q0, cfg.upstream.theta_i_deg * deg)?;
    let angles = critical_angles(&spec)?;
    let theta_w = match (cfg.wedge.theta_w_deg, cfg.wedge.window_fraction) {
        (Some(t), None) => t * deg,
        (None, Some(f)) => angles.theta_s_star + f * (angles.theta_w_star - angles.theta_s_star),
        _ => return Err(Error::Config("wedge: set exactly one of theta_w_deg and window_fraction".into())),
    };
    if theta_w >= angles.theta_w_star {
        return Err(Error::Detached {
            theta_w,
            theta_w_star: angles.theta_w_star,
        });
    }
    let roots = solve_downstream(&spec, theta_w)?;
    let curve = polar_curve(&spec, theta_w, cfg.polar.samples)?;
    let w = Writer::new(out, cfg.hash())?;
    w.text("polar.csv", &curve.to_csv(Some(&format!("config_hash={}", w.hash))))?;
    let rep = PolarReport {
        config_hash: w.hash.clone(),
        theta_s_star: angles.theta_s_star,
        theta_w_star: angles.theta_w_star,
        theta_w,
        theta_s_star_deg: angles.theta_s_star / deg,
        theta_w_star_deg: angles.theta_w_star / deg,
        theta_w_deg: theta_w / deg,
        v_strong: roots.u_strong,
        v_weak: roots.u_weak,
        samples: cfg.polar.samples,
    };
    w.json("angles.json", &rep)?;
    if let Some(seed) = seed {
        let cases = survey(seed, SURVEY_CASES, &SurveyRanges::default());
        w.text("survey.csv", &survey_csv(&cases, &w.header()))?;
    }
    Ok(rep)
}

pub fn certify(cfg: &ExperimentConfig, out: &Path) -> Result<CertifyReport> {
    let sc = cfg.resolve()?;
    let rep = CertifyReport {
        config_hash: cfg.hash(),
        background: background_report(&sc),
        certificate: sc.cert,
    };
    Writer::new(out, cfg.hash())?.json("certificate.json", &rep)?;
    Ok(rep)
}

/// Full fixed-point run (or a single linear step with `linear`), writing
/// `summary.json`, `history.csv`, `shock.csv` and, when enabled, the field.
pub fn run(cfg: &ExperimentConfig, out: &Path, linear: bool) -> Result<RunSummary> {
    let (mut summary, solved) = run_scenario(cfg, linear)?;
    let w = Writer::new(out, summary.config_hash.clone())?;
    let h = w.header();
    w.text("history.csv", &solved.history.to_csv(&h))?;
    summary.history.file = Some("history.csv".into());
    w.text("shock.csv", &shock_surface_csv(&solved.state.delta_s_hat, &h))?;
    if cfg.output.fields {
        w.text("delta_phi.csv", &solved.state.delta_phi.to_csv(&h))?;
        let bin = solved.state.delta_phi.to_binary(&cfg.hash_bytes());
        std::fs::write(out.join("delta_phi.bin"), bin)?;
    }
    w.json("summary.json", &summary)?;
    w.timing(summary.wall_clock_s)?;
    Ok(summary)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs the config with its perturbation data scaled by each sweep
/// amplitude in turn; writes `sweep.csv` and `sweep.json`.
pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepSummary> {
    let start = Instant::now();
    let rep = validate(cfg);
    if !rep.is_ok() {
        return Err(report_error(&rep));
    }
    let mut rows = Vec::new();
    for &a in &cfg.sweep.amplitudes {
        let mut c = cfg.scaled(a);
        c.mode = Mode::Run;
        let (s, _) = run_scenario(&c, false)?;
        rows.push(SweepRow {
            scale: a,
            input_norm: s.input_norms.total,
            output_norm: s.output_norms.total,
            gain: s.gain,
            iterations: s.history.iterations,
            converged: s.history.converged,
            max_kappa: s.history.max_kappa,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.input_norm).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.output_norm).collect();
    let gains: Vec<f64> = rows.iter().filter_map(|r| r.gain).collect();
    let gain_spread = (!gains.is_empty()).then(|| {
        let (lo, hi) = gains.iter().fold((f64::INFINITY, 0.0f64), |(l, h), g| (l.min(*g), h.max(*g)));
        hi / lo - 1.0
    });
    let summary = SweepSummary {
        config_hash: cfg.hash(),
        slope: log_log_slope(&x, &y),
        gain_spread,
        rows,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let w = Writer::new(out, summary.config_hash.clone())?;
    let mut csv = format!("{}\nt,input_norm,output_norm,gain,iterations,converged,max_kappa\n", w.header());
    for r in &summary.rows {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{},{},{},{}\n",
            r.scale,
            r.input_norm,
            r.output_norm,
            opt(r.gain),
            r.iterations,
            r.converged,
            opt(r.max_kappa)
        ));
    }
    w.text("sweep.csv", &csv)?;
    w.json("sweep.json", &summary)?;
    w.timing(summary.wall_clock_s)?;
    Ok(summary)
}

/// Dispatches on `cfg.mode`.
pub fn execute(cfg: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    Ok(match cfg.mode {
        Mode::Polar => Outcome::Polar(polar(cfg, out, seed)?),
        Mode::Certify => Outcome::Certify(certify(cfg, out)?),
        Mode::SolveLinear => Outcome::Run(Box::new(run(cfg, out, true)?)),
        Mode::Run => Outcome::Run(Box::new(run(cfg, out, false)?)),
        Mode::Sweep => Outcome::Sweep(sweep(cfg, out)?),
    })
}
