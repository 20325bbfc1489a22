//! Run configuration, run modes and output files.
//!
//! A run is described by a TOML file:
//!
//! ```toml
//! mode = "sweep"
//! output_dir = "out"
//!
//! [geometry]
//! kind = "ellipse"
//! a = 2.0
//!
//! [forcing]
//! cos = [1.0]
//!
//! [sweep]
//! epsilons = [1e-2, 5e-3, 2.5e-3]
//! ```
//!
//! Unknown keys are rejected. Every default is filled in and echoed back in
//! `summary.json`, so a summary is enough to reproduce its run.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{dft_s, trig_interpolate, write_field_dump, Field, Grid};
use crate::discretization::{DEFAULT_N_PSI, DEFAULT_PSI_MAX};
use crate::error::{Error, Result};
use crate::geometry::{
    custom_geometry, disk_geometry, ellipse_geometry, identity_convergence, load_geometry,
    verify_unit_vorticity, BoundaryGeometry, Embedding,
};
use crate::iteration::{fl_leading, picard_solve, wood_disk, PicardOptions, PicardSolution, SlipForcing};
use crate::linear_solver::DEFAULT_COMPAT_TOL;
use crate::norms::{pde_residual, pointwise_identity_residual, xkm_report, NormSpec};
use crate::oracle::{shoot_omega, MarchConfig};

/// psi values at which the pointwise identity is reported.
pub const IDENTITY_PSI: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];

/// Tolerance for agreement with a closed form (disk).
pub const CLOSED_FORM_TOL: f64 = 1e-8;

const IDENTITY_STEPS: [f64; 3] = [0.02, 0.01, 0.005];
const IDENTITY_PROBES: usize = 16;
const ORDER_TOL: f64 = 0.2;
const UNIT_VORTICITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Sweep,
    Crosscheck,
    Identities,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Sweep => "sweep",
            Mode::Crosscheck => "crosscheck",
            Mode::Identities => "identities",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Disk,
    Ellipse,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    /// Disk radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Ellipse semi-axis ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Tabulated `q_e` file, resampled onto `grid.n_s` points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

/// `g(s) = mean + sum_k cos[k-1] cos(2 pi k s / L) + sin[k-1] sin(2 pi k s / L)`,
/// or samples read from `g_file`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    pub epsilon: f64,
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_s: usize,
    pub n_psi: usize,
    pub psi_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_s: 128, n_psi: DEFAULT_N_PSI, psi_max: DEFAULT_PSI_MAX }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub compatibility_tol: f64,
    /// Bound on the pointwise identity at [`IDENTITY_PSI`].
    pub pointwise_tol: f64,
    pub enforce_safety_bound: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = PicardOptions::default();
        Self {
            tol: p.tol,
            max_iter: p.max_iter,
            compatibility_tol: DEFAULT_COMPAT_TOL,
            pointwise_tol: 1e-7,
            enforce_safety_bound: p.enforce_safety_bound,
        }
    }
}

impl SolverConfig {
    pub fn picard_options(&self) -> PicardOptions {
        PicardOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            compat_tol: self.compatibility_tol,
            enforce_safety_bound: self.enforce_safety_bound,
        }
    }
}

/// Oracle switch, agreement tolerance and the marching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Also run the oracle in `single` and `sweep` modes. `crosscheck` always runs it.
    pub enabled: bool,
    pub agreement_tol: f64,
    pub steps_per_period: usize,
    pub theta: f64,
    pub poincare_max_iters: usize,
    pub poincare_tol: f64,
    pub anderson_depth: usize,
    pub shoot_tol: f64,
    pub shoot_max_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shoot_bracket: Option<[f64; 2]>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let m = MarchConfig::default();
        Self {
            enabled: false,
            agreement_tol: 1e-6,
            steps_per_period: m.steps_per_period,
            theta: m.theta,
            poincare_max_iters: m.poincare_max_iters,
            poincare_tol: m.poincare_tol,
            anderson_depth: m.anderson_depth,
            shoot_tol: m.shoot_tol,
            shoot_max_iters: m.shoot_max_iters,
            shoot_bracket: None,
        }
    }
}

impl OracleConfig {
    pub fn march_config(&self) -> MarchConfig {
        MarchConfig {
            steps_per_period: self.steps_per_period,
            theta: self.theta,
            poincare_max_iters: self.poincare_max_iters,
            poincare_tol: self.poincare_tol,
            anderson_depth: self.anderson_depth,
            shoot_tol: self.shoot_tol,
            shoot_max_iters: self.shoot_max_iters,
            shoot_bracket: self.shoot_bracket.map(|[a, b]| (a, b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Include wall time in the summary (breaks bit-identical summaries).
    #[serde(default)]
    pub report_timing: bool,
    /// psi range written to the heatmap file.
    #[serde(default = "default_heatmap_psi_max")]
    pub heatmap_psi_max: f64,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_mode() -> Mode {
    Mode::Single
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("prandtl-out")
}

fn default_heatmap_psi_max() -> f64 {
    10.0
}

fn nonnegative_epsilon(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Config("epsilon must be nonnegative".into()));
    }
    Ok(())
}

impl RunConfig {
    /// Checks everything that does not need the file system.
    pub fn validate(&self) -> Result<()> {
        nonnegative_epsilon(self.forcing.epsilon)?;
        for &e in &self.sweep.epsilons {
            nonnegative_epsilon(e)?;
        }
        if self.mode == Mode::Sweep && self.sweep.epsilons.is_empty() {
            return Err(Error::Config("sweep mode needs a non-empty sweep.epsilons list".into()));
        }
        let g = &self.geometry;
        match g.kind {
            GeometryKind::Disk => {
                if let Some(r) = g.radius {
                    if !(r.is_finite() && r > 0.0) {
                        return Err(Error::Config(format!("geometry.radius must be positive, got {r}")));
                    }
                }
            }
            GeometryKind::Ellipse => match g.a {
                Some(a) if a.is_finite() && a > 0.0 => {}
                Some(a) => return Err(Error::Config(format!("geometry.a must be positive, got {a}"))),
                None => return Err(Error::Config("ellipse geometry needs `a`".into())),
            },
            GeometryKind::Custom => {
                if g.file.is_none() {
                    return Err(Error::Config("custom geometry needs `file`".into()));
                }
            }
        }
        if self.grid.n_s < 4 {
            return Err(Error::Config(format!("grid.n_s must be at least 4, got {}", self.grid.n_s)));
        }
        Grid::uniform(self.grid.n_psi, self.grid.psi_max)?;
        if !(self.solver.tol > 0.0 && self.solver.compatibility_tol > 0.0 && self.solver.pointwise_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.solver.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be positive".into()));
        }
        if !(self.oracle.agreement_tol > 0.0) {
            return Err(Error::Config("oracle.agreement_tol must be positive".into()));
        }
        self.oracle.march_config().validate()?;
        if !(self.heatmap_psi_max > 0.0) {
            return Err(Error::Config("heatmap_psi_max must be positive".into()));
        }
        Ok(())
    }

    /// Makes relative file paths relative to `base` and checks they exist.
    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        for p in [&mut self.geometry.file, &mut self.forcing.g_file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.is_file() {
                return Err(Error::Config(format!("file not found: {}", p.display())));
            }
        }
        Ok(())
    }
}

/// Strict parse with defaults filled in.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Reads and parses a config file; relative paths inside it are taken
/// relative to the file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    config.resolve_paths(base)?;
    Ok(config)
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let v = crate::discretization::parse_finite(tok)
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
            out.push(v);
        }
    }
    if out.len() < 4 {
        return Err(Error::Parse(format!("{}: need at least 4 samples", path.display())));
    }
    Ok(out)
}

/// Resamples periodic samples onto `n` points, warning when the input is
/// not resolved (energy above a quarter of its band).
fn resample(samples: &[f64], n: usize, what: &str) -> Vec<f64> {
    let m = samples.len();
    let c = dft_s(samples);
    let total: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let high: f64 = (0..m)
        .filter(|&k| k.min(m - k) > m / 4)
        .map(|k| c[k].norm_sqr())
        .sum();
    if total > 0.0 && high > 1e-20 * total {
        log::warn!("{what} samples may not be band-limited: high-mode share {:.2e}", high / total);
    }
    if m == n {
        return samples.to_vec();
    }
    let targets: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    trig_interpolate(samples, 1.0, &targets)
}

pub fn build_geometry(config: &RunConfig) -> Result<BoundaryGeometry> {
    let g = &config.geometry;
    let n_s = config.grid.n_s;
    match g.kind {
        GeometryKind::Disk => disk_geometry(g.radius.unwrap_or(1.0), n_s),
        GeometryKind::Ellipse => ellipse_geometry(g.a.unwrap_or(1.0), n_s),
        GeometryKind::Custom => {
            let path = g.file.as_ref().ok_or_else(|| Error::Config("custom geometry needs `file`".into()))?;
            let raw = load_geometry(path)?;
            if raw.n_s() == n_s {
                return Ok(raw);
            }
            custom_geometry(raw.length(), resample(raw.q_e(), n_s, "q_e"))
        }
    }
}

pub fn build_forcing(config: &RunConfig, geometry: &BoundaryGeometry, epsilon: f64) -> Result<SlipForcing> {
    let f = &config.forcing;
    match &f.g_file {
        Some(path) => {
            let g = resample(&read_samples(path)?, geometry.n_s(), "g");
            SlipForcing::new(geometry, epsilon, g)
        }
        None => SlipForcing::from_coefficients(geometry, epsilon, f.mean, &f.cos, &f.sin),
    }
}

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, tol, passed: value.abs() < tol }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tol: 1.0, passed: ok }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n_s: usize,
    pub n_psi: usize,
    pub psi_max: f64,
    pub h: f64,
    pub boundary_length: f64,
}

/// Results of one Picard solve (and optionally the oracle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub epsilon: f64,
    pub omega0: f64,
    /// `sqrt(int q_e f^2 / int q_e^3)`.
    pub omega0_leading: f64,
    /// `omega0^2 - omega0_leading^2`.
    pub omega_err: f64,
    pub omega_bar_star: f64,
    pub omega_bar_err: f64,
    pub q_norm_x14: f64,
    /// Natural log of the X_{2,50} norm; absent when `Q = 0`.
    pub q_log_norm_x250: Option<f64>,
    pub compatibility_residual: f64,
    pub pde_residual: f64,
    pub pointwise_identity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// First contraction ratio of the X_{1,4} updates, when defined.
    pub first_contraction: Option<f64>,
    pub max_contraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_omega0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_omega0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_difference: Option<f64>,
}

/// Least-squares slopes of the log-log sweep scalings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSlopes {
    /// `|omega_err|` against epsilon.
    pub omega_err: Option<f64>,
    /// `|Q|_{X_{1,4}}` against epsilon.
    pub q_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub identity: String,
    pub steps: Vec<f64>,
    pub discrepancies: Vec<f64>,
    pub orders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub depth: f64,
    pub rows: Vec<IdentityRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit_vorticity_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub grid: GridMeta,
    pub entries: Vec<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slopes: Option<SweepSlopes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identities: Option<IdentitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub config: RunConfig,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary fields are finite")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("summary: {e}")))
    }
}

/// Overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    /// Worker threads for sweeps; `None` uses the rayon default.
    pub workers: Option<usize>,
    /// Skip writing files.
    pub dry: bool,
}

/// Solver output kept in memory for the caller.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub solutions: Vec<PicardSolution>,
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && b.abs() > 0.0)
        .map(|(a, b)| (a.ln(), b.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

struct Entry {
    summary: SolveSummary,
    checks: Vec<Check>,
    solution: PicardSolution,
}

fn solve_entry(
    config: &RunConfig,
    geometry: &BoundaryGeometry,
    grid: &Grid,
    epsilon: f64,
    with_oracle: bool,
) -> Result<Entry> {
    let forcing = build_forcing(config, geometry, epsilon)?;
    let sol = picard_solve(geometry, &forcing, grid, &config.solver.picard_options())?;
    let omega0 = sol.state.omega0;
    let lead = fl_leading(forcing.f_slip(), geometry);
    let period = geometry.length();
    let x14 = xkm_report(&sol.q, NormSpec::X14, grid, period)?;
    let x250 = xkm_report(&sol.q, NormSpec::X250, grid, period)?;
    let last = sol.trace.rows.last().ok_or_else(|| Error::InconsistentState("empty iteration trace".into()))?;
    let compat = last.compatibility_residual;
    let pde = pde_residual(&sol.q, omega0, geometry, grid)?.max;
    let pointwise = pointwise_identity_residual(&sol.q, omega0, geometry, grid, &IDENTITY_PSI)?
        .into_iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let ratios = &sol.trace.contraction_ratios;
    let closed_form = match &config.geometry.kind {
        GeometryKind::Disk => Some(wood_disk(forcing.f_slip(), config.geometry.radius.unwrap_or(1.0))),
        _ => None,
    };
    let tag = |name: &str| format!("{name}[eps={epsilon:e}]");
    let mut checks = vec![
        Check::flag(tag("picard_converged"), sol.trace.converged),
        Check::flag(tag("omega0_positive"), omega0 > 0.0),
        Check::below(tag("compatibility_residual"), compat, config.solver.compatibility_tol),
        Check::below(tag("pointwise_identity"), pointwise, config.solver.pointwise_tol),
    ];
    if let Some(w) = closed_form {
        checks.push(Check::below(tag("closed_form_omega0"), omega0 - w, CLOSED_FORM_TOL));
    }
    let (mut oracle_omega0, mut oracle_difference) = (None, None);
    if with_oracle {
        let shot = shoot_omega(&forcing, geometry, grid, &config.oracle.march_config())?;
        let diff = omega0 - shot.omega0;
        checks.push(Check::below(tag("oracle_agreement"), diff, config.oracle.agreement_tol));
        oracle_omega0 = Some(shot.omega0);
        oracle_difference = Some(diff);
    }
    let summary = SolveSummary {
        epsilon,
        omega0,
        omega0_leading: lead,
        omega_err: omega0 * omega0 - lead * lead,
        omega_bar_star: sol.state.omega_bar_star,
        omega_bar_err: sol.state.omega_bar_err,
        q_norm_x14: x14.value,
        q_log_norm_x250: finite(x250.log_value),
        compatibility_residual: compat,
        pde_residual: pde,
        pointwise_identity: pointwise,
        iterations: sol.trace.iterations(),
        converged: sol.trace.converged,
        first_contraction: ratios.first().copied().and_then(finite),
        max_contraction: ratios.iter().copied().filter(|r| r.is_finite()).reduce(f64::max),
        closed_form_omega0: closed_form,
        oracle_omega0,
        oracle_difference,
    };
    Ok(Entry { summary, checks, solution: sol })
}

fn identity_field(x: [f64; 2]) -> [f64; 2] {
    [
        (1.3 * x[0] + 0.4 * x[1]).sin() + 0.3 * x[0] * x[1] * x[1],
        (0.7 * x[0] - 1.1 * x[1]).cos() + 0.2 * x[0].powi(3),
    ]
}

fn run_identities(geometry: &BoundaryGeometry, checks: &mut Vec<Check>) -> Result<IdentitySummary> {
    let emb: &Embedding = geometry
        .embedding()
        .ok_or_else(|| Error::Config("identities mode needs a disk or ellipse geometry".into()))?;
    let depth = 0.5 * emb.tubular_radius();
    let orders = identity_convergence(emb, identity_field, &IDENTITY_STEPS, &[depth], IDENTITY_PROBES)?;
    let mut rows = Vec::new();
    for o in orders {
        let worst = o.orders.iter().fold(0.0f64, |m, p| m.max((p - 2.0).abs()));
        checks.push(Check::below(format!("identity_order[{}]", o.kind.name()), worst, ORDER_TOL));
        rows.push(IdentityRow {
            identity: o.kind.name().to_string(),
            steps: o.steps,
            discrepancies: o.discrepancies,
            orders: o.orders,
        });
    }
    let unit_vorticity_residual = match emb {
        Embedding::Ellipse(arc) => {
            let rep = verify_unit_vorticity(arc.a(), UNIT_VORTICITY_TOL)?;
            checks.push(Check::below("unit_vorticity", rep.max_residual, UNIT_VORTICITY_TOL));
            Some(rep.max_residual)
        }
        Embedding::Disk { .. } => None,
    };
    Ok(IdentitySummary { depth, rows, unit_vorticity_residual })
}

/// Executes the configured mode without touching the file system.
pub fn execute(config: &RunConfig, workers: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    let start = std::time::Instant::now();
    let geometry = build_geometry(config)?;
    let grid = Grid::uniform(config.grid.n_psi, config.grid.psi_max)?;
    let mut checks = Vec::new();
    let mut entries = Vec::new();
    let mut solutions = Vec::new();
    let mut slopes = None;
    let mut identities = None;
    match config.mode {
        Mode::Single | Mode::Crosscheck => {
            let oracle = config.mode == Mode::Crosscheck || config.oracle.enabled;
            let e = solve_entry(config, &geometry, &grid, config.forcing.epsilon, oracle)?;
            checks.extend(e.checks);
            entries.push(e.summary);
            solutions.push(e.solution);
        }
        Mode::Sweep => {
            let job = || {
                config
                    .sweep
                    .epsilons
                    .par_iter()
                    .map(|&eps| solve_entry(config, &geometry, &grid, eps, config.oracle.enabled))
                    .collect::<Result<Vec<_>>>()
            };
            let done = match workers {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
                    .install(job)?,
                None => job()?,
            };
            for e in done {
                checks.extend(e.checks);
                entries.push(e.summary);
                solutions.push(e.solution);
            }
            let eps: Vec<f64> = entries.iter().map(|e| e.epsilon).collect();
            let err: Vec<f64> = entries.iter().map(|e| e.omega_err).collect();
            let qn: Vec<f64> = entries.iter().map(|e| e.q_norm_x14).collect();
            slopes = Some(SweepSlopes { omega_err: loglog_slope(&eps, &err), q_norm: loglog_slope(&eps, &qn) });
        }
        Mode::Identities => {
            identities = Some(run_identities(&geometry, &mut checks)?);
        }
    }
    let summary = RunSummary {
        mode: config.mode,
        passed: checks.iter().all(|c| c.passed),
        checks,
        grid: GridMeta {
            n_s: geometry.n_s(),
            n_psi: grid.n_psi(),
            psi_max: grid.psi_max(),
            h: grid.h(),
            boundary_length: geometry.length(),
        },
        entries,
        slopes,
        identities,
        wall_time_s: config.report_timing.then(|| start.elapsed().as_secs_f64()),
        config: config.clone(),
    };
    Ok(RunOutput { summary, solutions })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Heatmap rows `s psi Q` up to `psi_max`, blank line between s-rows.
pub fn write_heatmap<W: Write>(mut out: W, q: &Field, s_grid: &[f64], grid: &Grid, psi_max: f64) -> Result<()> {
    writeln!(out, "# s psi Q")?;
    for (i, s) in s_grid.iter().enumerate() {
        for (j, psi) in grid.nodes().iter().enumerate().take_while(|(_, p)| **p <= psi_max) {
            writeln!(out, "{:.10e} {:.10e} {:.10e}", s, psi, q.get(i, j))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn sweep_table(entries: &[SolveSummary], slopes: &SweepSlopes) -> String {
    let mut out = String::from(
        "epsilon\tomega0\tomega0_leading\tomega_err\tq_norm_x14\tcompatibility_residual\tpde_residual\titerations\n",
    );
    for e in entries {
        out.push_str(&format!(
            "{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{}\n",
            e.epsilon,
            e.omega0,
            e.omega0_leading,
            e.omega_err,
            e.q_norm_x14,
            e.compatibility_residual,
            e.pde_residual,
            e.iterations
        ));
    }
    let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
    out.push_str(&format!("# slope omega_err vs epsilon: {}\n", show(slopes.omega_err)));
    out.push_str(&format!("# slope q_norm_x14 vs epsilon: {}\n", show(slopes.q_norm)));
    out
}

fn write_outputs(dir: &Path, config: &RunConfig, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = Grid::uniform(config.grid.n_psi, config.grid.psi_max)?;
    let s_grid: Vec<f64> = {
        let n = output.summary.grid.n_s;
        let l = output.summary.grid.boundary_length;
        (0..n).map(|i| l * i as f64 / n as f64).collect()
    };
    let many = output.solutions.len() > 1;
    for (k, sol) in output.solutions.iter().enumerate() {
        let suffix = if many { format!("_{k}") } else { String::new() };
        fs::write(dir.join(format!("trace{suffix}.tsv")), sol.trace.to_tsv())?;
        let mut f = create(&dir.join(format!("field{suffix}.dat")))?;
        write_field_dump(&mut f, &sol.q, &s_grid, &grid)?;
        f.flush()?;
        let mut h = create(&dir.join(format!("heatmap{suffix}.dat")))?;
        write_heatmap(&mut h, &sol.q, &s_grid, &grid, config.heatmap_psi_max)?;
        h.flush()?;
    }
    if let Some(slopes) = &output.summary.slopes {
        fs::write(dir.join("sweep.tsv"), sweep_table(&output.summary.entries, slopes))?;
    }
    fs::write(dir.join("summary.json"), output.summary.to_json() + "\n")?;
    Ok(())
}

/// Machine-readable error record.
pub fn error_record(err: &Error) -> String {
    serde_json::json!({ "status": "error", "kind": err.kind(), "message": err.to_string() }).to_string()
}

/// Runs the configured mode and writes `summary.json`, `trace.tsv`,
/// `field.dat`, `heatmap.dat` (and `sweep.tsv` for sweeps) to the output
/// directory. On failure `error.json` is written instead of the summary.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunOutput> {
    let dir = opts.output_dir.clone().unwrap_or_else(|| config.output_dir.clone());
    let result = execute(config, opts.workers);
    if opts.dry {
        return result;
    }
    match result {
        Ok(output) => {
            write_outputs(&dir, config, &output)?;
            Ok(output)
        }
        Err(err) => {
            if fs::create_dir_all(&dir).is_ok() {
                let _ = fs::write(dir.join("error.json"), error_record(&err) + "\n");
            }
            Err(err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[geometry]\nkind = \"disk\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.mode, Mode::Single);
        assert_eq!((c.grid.n_s, c.grid.n_psi, c.grid.psi_max), (128, 301, 30.0));
        assert_eq!(c.solver.tol, 1e-10);
        assert_eq!(c.forcing.epsilon, 0.0);
        assert!(!c.oracle.enabled);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config("foo = 1\n[geometry]\nkind = \"disk\"\n").unwrap_err().to_string();
        assert!(err.contains("foo"), "{err}");
        let err = parse_config("[geometry]\nkind = \"disk\"\nradios = 2.0\n").unwrap_err().to_string();
        assert!(err.contains("radios"), "{err}");
        let err = parse_config("[geometry]\nkind = \"disk\"\n[solver]\ntoll = 1e-9\n").unwrap_err().to_string();
        assert!(err.contains("toll"), "{err}");
    }

    #[test]
    fn negative_epsilon_is_rejected() {
        let err = parse_config("[geometry]\nkind = \"disk\"\n[forcing]\nepsilon = -0.1\n").unwrap_err();
        assert!(err.to_string().contains("epsilon must be nonnegative"), "{err}");
        let err = parse_config("mode = \"sweep\"\n[geometry]\nkind = \"disk\"\n[sweep]\nepsilons = [0.1, -1]\n")
            .unwrap_err();
        assert!(err.to_string().contains("epsilon must be nonnegative"), "{err}");
    }

    #[test]
    fn structural_errors() {
        assert!(parse_config("mode = \"sweep\"\n[geometry]\nkind = \"disk\"\n").is_err());
        assert!(parse_config("[geometry]\nkind = \"ellipse\"\n").is_err());
        assert!(parse_config("[geometry]\nkind = \"custom\"\n").is_err());
        assert!(parse_config("[geometry]\nkind = \"square\"\n").is_err());
        assert!(parse_config("[geometry]\nkind = \"disk\"\n[grid]\npsi_max = 5.0\n").is_err());
        assert!(parse_config("[forcing]\nepsilon = 0.1\n").is_err());
        let err = parse_config("[geometry]\nkind = \"disk\"\n[forcing]\nepsilon = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn missing_files_are_reported() {
        let mut c = parse_config("[geometry]\nkind = \"custom\"\nfile = \"nope.txt\"\n").unwrap();
        let err = c.resolve_paths(Path::new("/nonexistent")).unwrap_err();
        assert!(err.to_string().contains("file not found"), "{err}");
    }

    #[test]
    fn trivial_disk_run() {
        let c = parse_config(MINIMAL).unwrap();
        let out = execute(&c, None).unwrap();
        let e = &out.summary.entries[0];
        assert_eq!(e.omega0, 1.0);
        assert_eq!(e.q_norm_x14, 0.0);
        assert_eq!(e.q_log_norm_x250, None);
        assert!(out.summary.passed);
    }

    #[test]
    fn summary_round_trips() {
        let c = parse_config("[geometry]\nkind = \"disk\"\n[forcing]\nepsilon = 0.05\ncos = [1.0]\n").unwrap();
        let out = execute(&c, None).unwrap();
        let text = out.summary.to_json();
        let back = RunSummary::from_json(&text).unwrap();
        assert_eq!(back, out.summary);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.config, c);
    }

    #[test]
    fn slope_fit() {
        let x = [1e-2, 5e-3, 2.5e-3];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e * e).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[1.0], &[1.0]), None);
        assert_eq!(loglog_slope(&[0.0, 0.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn resampling_keeps_band_limited_samples() {
        let m = 24;
        let s: Vec<f64> = (0..m).map(|i| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * i as f64 / m as f64).cos()).collect();
        let r = resample(&s, 48, "test");
        for (i, v) in r.iter().enumerate() {
            let x = 2.0 * std::f64::consts::PI * i as f64 / 48.0;
            assert!((v - (1.0 + 0.3 * x.cos())).abs() < 1e-13);
        }
    }

    #[test]
    fn identities_need_an_embedding() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let mut text = format!("L {}\n", 2.0 * std::f64::consts::PI);
        for _ in 0..16 {
            text.push_str("0.5\n");
        }
        fs::write(&path, text).unwrap();
        let mut c = parse_config(&format!(
            "mode = \"identities\"\n[geometry]\nkind = \"custom\"\nfile = \"{}\"\n",
            path.display()
        ))
        .unwrap();
        c.resolve_paths(dir.path()).unwrap();
        assert!(matches!(execute(&c, None), Err(Error::Config(_))));
    }
}
