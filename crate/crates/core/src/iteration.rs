//! Nonlinearity, Feynman-Lagerstrom vorticity update and the Picard loop.
//!
//! The nonlinear equation `d_s Q = q d_psi^2 Q` is rewritten as
//!
//! ```text
//! d_s Q - omega q_e d_psi^2 Q = f(Q, s; omega),   f = (1 - omega q_e / q) d_s Q,
//! ```
//!
//! and iterated as `(omega_{n-1}, Q_{n-1}) -> omega_n -> Q_n`, starting from
//! `Q_{-1} = 0`, `omega_{-1} = 1`. Integrating over one period gives
//! `int q_e Q(psi) ds = -(1/omega) int_psi^inf (y - psi) int f ds dy`, whose value
//! at `psi = 0` selects
//!
//! ```text
//! omega_n^2 = [ int q_e f_slip^2 ds + (1/omega_{n-1}) int_0^inf y int f(Q_{n-1}) ds dy ] / int q_e^3 ds.
//! ```

use std::f64::consts::PI;

use crate::discretization::{d_ds, integrate_s, tail_moment, Field, Grid};
use crate::error::{Error, Result};
use crate::geometry::BoundaryGeometry;
use crate::linear_solver::{solve_linear_with, LinearOptions, LinearProblem, DEFAULT_COMPAT_TOL};
use crate::norms::{compatibility_residual, pde_residual, xkm_norm, NormSpec};

/// Slip perturbation `f = q_e + epsilon g` on the geometry's s-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipForcing {
    epsilon: f64,
    g: Vec<f64>,
    f_slip: Vec<f64>,
}

impl SlipForcing {
    pub fn new(geometry: &BoundaryGeometry, epsilon: f64, g: Vec<f64>) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Config("epsilon must be nonnegative".into()));
        }
        if g.len() != geometry.n_s() {
            return Err(Error::LengthMismatch { expected: geometry.n_s(), got: g.len() });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("forcing profile has non-finite samples".into()));
        }
        let f_slip: Vec<f64> = geometry.q_e().iter().zip(&g).map(|(q, g)| q + epsilon * g).collect();
        if let Some((index, &value)) = f_slip.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::SlipVanishes { index, value });
        }
        Ok(Self { epsilon, g, f_slip })
    }

    /// `g(s) = mean + sum_k cos[k-1] cos(2 pi k s / L) + sin[k-1] sin(2 pi k s / L)`.
    pub fn from_coefficients(
        geometry: &BoundaryGeometry,
        epsilon: f64,
        mean: f64,
        cos: &[f64],
        sin: &[f64],
    ) -> Result<Self> {
        let l = geometry.length();
        let g = geometry
            .s_grid()
            .iter()
            .map(|&s| {
                let x = 2.0 * PI * s / l;
                let c: f64 = cos.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x).cos()).sum();
                let d: f64 = sin.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x).sin()).sum();
                mean + c + d
            })
            .collect();
        Self::new(geometry, epsilon, g)
    }

    /// Unforced case `epsilon = 0`.
    pub fn none(geometry: &BoundaryGeometry) -> Self {
        Self::new(geometry, 0.0, vec![0.0; geometry.n_s()]).expect("q_e is positive")
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn f_slip(&self) -> &[f64] {
        &self.f_slip
    }

    /// Heuristic smallness bound `0.05 min(q_e)^2 / max|g|`.
    pub fn safety_bound(&self, geometry: &BoundaryGeometry) -> f64 {
        let gmax = self.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax == 0.0 {
            return f64::INFINITY;
        }
        0.05 * geometry.min_q_e().powi(2) / gmax
    }

    /// Same forcing with the parametrization origin moved by `shift` cells.
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.g.len();
        let rot = |v: &[f64]| (0..n).map(|i| v[(i + shift) % n]).collect();
        Self { epsilon: self.epsilon, g: rot(&self.g), f_slip: rot(&self.f_slip) }
    }
}

/// Selected vorticity with `1 - omega0^2 = epsilon omega_bar` and
/// `omega_bar = omega_bar_star + omega_bar_err`.
///
/// `omega_bar_star` depends on the slip data only; `omega_bar_err` carries the
/// nonlinear integral. At `epsilon = 0` both are reported as their
/// `epsilon -> 0` limits (the integral term then vanishes identically).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VorticityState {
    pub epsilon: f64,
    pub omega0: f64,
    pub omega_bar: f64,
    pub omega_bar_star: f64,
    pub omega_bar_err: f64,
}

impl VorticityState {
    /// `omega0^2` minus the leading-order value, i.e. `-epsilon omega_bar_err`.
    pub fn nonlinear_shift(&self) -> f64 {
        -self.epsilon * self.omega_bar_err
    }
}

/// `f(Q, s; omega) = (1 - omega q_e / sqrt(omega^2 q_e^2 + Q)) d_s Q`, evaluated
/// as `Q / (r (r + a)) d_s Q` with `a = omega q_e`, `r = sqrt(a^2 + Q)` to avoid
/// cancellation for small `Q`.
pub fn nonlinearity_f(q: &Field, omega: f64, geometry: &BoundaryGeometry) -> Result<Field> {
    if q.n_s() != geometry.n_s() {
        return Err(Error::LengthMismatch { expected: geometry.n_s(), got: q.n_s() });
    }
    let dq = d_ds(q, geometry.length(), 1);
    let mut out = Field::zeros(q.n_s(), q.n_psi());
    for i in 0..q.n_s() {
        let a = omega * geometry.q_e()[i];
        for j in 0..q.n_psi() {
            let qij = q.get(i, j);
            let r2 = a * a + qij;
            if !(r2 > 0.0) {
                return Err(Error::StagnantLayer { s_index: i, psi_index: j, value: r2 });
            }
            let r = r2.sqrt();
            out.set(i, j, qij / (r * (r + a)) * dq.get(i, j));
        }
    }
    Ok(out)
}

fn s_integrals(field: &Field, period: f64) -> Vec<f64> {
    (0..field.n_psi()).map(|j| integrate_s(&field.column(j), period)).collect()
}

/// `N(psi) = (1/omega) int_0^L f(Q, s; omega) ds`.
pub fn big_n(q: &Field, omega: f64, geometry: &BoundaryGeometry) -> Result<Vec<f64>> {
    let f = nonlinearity_f(q, omega, geometry)?;
    Ok(s_integrals(&f, geometry.length()).into_iter().map(|v| v / omega).collect())
}

/// Wood's formula on a disk of radius `r`: `omega0^2 = mean(f^2) / (r/2)^2`.
pub fn wood_disk(f_slip: &[f64], r: f64) -> f64 {
    let mean_sq = f_slip.iter().map(|f| f * f).sum::<f64>() / f_slip.len() as f64;
    (mean_sq / (0.25 * r * r)).sqrt()
}

/// Leading-order selection `omega0^2 = int q_e f^2 / int q_e^3`.
pub fn fl_leading(f_slip: &[f64], geometry: &BoundaryGeometry) -> f64 {
    let num: Vec<f64> = geometry.q_e().iter().zip(f_slip).map(|(q, f)| q * f * f).collect();
    (integrate_s(&num, geometry.length()) / geometry.q_e_cubed_integral()).sqrt()
}

fn update_from_source(
    source: &Field,
    omega_prev: f64,
    forcing: &SlipForcing,
    geometry: &BoundaryGeometry,
    grid: &Grid,
) -> Result<VorticityState> {
    let l = geometry.length();
    let cube = geometry.q_e_cubed_integral();
    let eps = forcing.epsilon();
    let explicit: Vec<f64> = geometry
        .q_e()
        .iter()
        .zip(forcing.g())
        .map(|(q, g)| 2.0 * g * q * q + eps * g * g * q)
        .collect();
    let omega_bar_star = -integrate_s(&explicit, l) / cube;
    let moment = tail_moment(&s_integrals(source, l), grid)[0];
    let shift = moment / (omega_prev * cube);
    let leading_sq: Vec<f64> = geometry.q_e().iter().zip(forcing.f_slip()).map(|(q, f)| q * f * f).collect();
    let omega_sq = integrate_s(&leading_sq, l) / cube + shift;
    if !(omega_sq > 0.0) {
        return Err(Error::NegativeDiscriminant(omega_sq));
    }
    let omega0 = omega_sq.sqrt();
    let omega_bar_err = if eps > 0.0 { -shift / eps } else { 0.0 };
    let omega_bar = if eps > 0.0 { (1.0 - omega_sq) / eps } else { omega_bar_star };
    Ok(VorticityState { epsilon: eps, omega0, omega_bar, omega_bar_star, omega_bar_err })
}

/// The vorticity update from `(Q_{n-1}, omega_{n-1})`.
pub fn fl_update(
    q_prev: &Field,
    omega_prev: f64,
    forcing: &SlipForcing,
    geometry: &BoundaryGeometry,
    grid: &Grid,
) -> Result<VorticityState> {
    let source = nonlinearity_f(q_prev, omega_prev, geometry)?;
    update_from_source(&source, omega_prev, forcing, geometry, grid)
}

/// `Q(s, 0) = f^2 - omega0^2 q_e^2`, cross-checked against
/// `epsilon omega_bar q_e^2 + 2 epsilon g q_e + epsilon^2 g^2`.
pub fn boundary_data(state: &VorticityState, forcing: &SlipForcing, geometry: &BoundaryGeometry) -> Result<Vec<f64>> {
    let eps = forcing.epsilon();
    let w2 = state.omega0 * state.omega0;
    if eps > 0.0 && (1.0 - w2 - eps * state.omega_bar).abs() > 1e-12 {
        return Err(Error::InconsistentState(format!(
            "1 - omega0^2 = {:e} but epsilon * omega_bar = {:e}",
            1.0 - w2,
            eps * state.omega_bar
        )));
    }
    let mut out = Vec::with_capacity(geometry.n_s());
    for ((q, f), g) in geometry.q_e().iter().zip(forcing.f_slip()).zip(forcing.g()) {
        let direct = f * f - w2 * q * q;
        let expanded = if eps > 0.0 {
            eps * state.omega_bar * q * q + 2.0 * eps * g * q + eps * eps * g * g
        } else {
            (1.0 - w2) * q * q
        };
        if (direct - expanded).abs() > 1e-12 {
            return Err(Error::InconsistentState(format!(
                "boundary data forms differ by {:e}",
                (direct - expanded).abs()
            )));
        }
        out.push(direct);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub compat_tol: f64,
    /// Refuse `epsilon` above [`SlipForcing::safety_bound`] instead of warning.
    pub enforce_safety_bound: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, compat_tol: DEFAULT_COMPAT_TOL, enforce_safety_bound: false }
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub omega0: f64,
    pub q_norm: f64,
    pub dq_norm: f64,
    pub d_omega: f64,
    pub d_omega_bar: f64,
    pub compatibility_residual: f64,
    pub pde_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    /// `dq_norm[n] / dq_norm[n-1]` for `n >= 2`.
    pub contraction_ratios: Vec<f64>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    /// Tab-separated table with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "n\tomega0\tq_norm_x14\tdq_norm_x14\td_omega\td_omega_bar\tcompatibility_residual\tpde_residual\tcontraction\n",
        );
        for r in &self.rows {
            let ratio = if r.n >= 2 {
                format!("{:.16e}", self.contraction_ratios[r.n - 2])
            } else {
                "-".into()
            };
            out.push_str(&format!(
                "{}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{}\n",
                r.n,
                r.omega0,
                r.q_norm,
                r.dq_norm,
                r.d_omega,
                r.d_omega_bar,
                r.compatibility_residual,
                r.pde_residual,
                ratio
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub state: VorticityState,
    pub q: Field,
    pub trace: IterationTrace,
}

/// Runs the staggered iteration until
/// `|Q_n - Q_{n-1}|_{X_{1,4}} + |omega_n - omega_{n-1}| < tol`.
pub fn picard_solve(
    geometry: &BoundaryGeometry,
    forcing: &SlipForcing,
    grid: &Grid,
    opts: &PicardOptions,
) -> Result<PicardSolution> {
    if forcing.g().len() != geometry.n_s() {
        return Err(Error::LengthMismatch { expected: geometry.n_s(), got: forcing.g().len() });
    }
    let bound = forcing.safety_bound(geometry);
    if forcing.epsilon() > bound {
        if opts.enforce_safety_bound {
            return Err(Error::Config(format!(
                "epsilon {} exceeds the safety bound {bound:.3e}",
                forcing.epsilon()
            )));
        }
        log::warn!("epsilon {} exceeds the heuristic safety bound {bound:.3e}", forcing.epsilon());
    }
    let l = geometry.length();
    let eps = forcing.epsilon();
    let lin = LinearOptions { compat_tol: opts.compat_tol };
    let mut q = Field::zeros(geometry.n_s(), grid.n_psi());
    let mut omega_prev = 1.0;
    let mut omega_bar_prev: Option<f64> = None;
    let mut trace = IterationTrace::default();
    let mut last_update = f64::INFINITY;

    for n in 0..opts.max_iter {
        let source = nonlinearity_f(&q, omega_prev, geometry)?;
        let state = update_from_source(&source, omega_prev, forcing, geometry, grid)?;
        let b = boundary_data(&state, forcing, geometry)?;
        let problem = LinearProblem { geometry, omega: omega_prev, f: source, g: None, b };
        let q_new = solve_linear_with(&problem, grid, &lin)?;

        let dq_norm = xkm_norm(&q_new.sub(&q), NormSpec::X14, grid, l)?;
        let d_omega = (state.omega0 - omega_prev).abs();
        let d_omega_bar = match omega_bar_prev {
            Some(prev) if eps > 0.0 => (state.omega_bar - prev).abs(),
            _ => 0.0,
        };
        let row = TraceRow {
            n,
            omega0: state.omega0,
            q_norm: xkm_norm(&q_new, NormSpec::X14, grid, l)?,
            dq_norm,
            d_omega,
            d_omega_bar,
            compatibility_residual: compatibility_residual(&q_new, state.omega0, forcing, geometry, grid)?,
            pde_residual: pde_residual(&q_new, state.omega0, geometry, grid)?.max,
        };
        if n >= 2 {
            let prev = trace.rows[n - 1].dq_norm;
            trace.contraction_ratios.push(if prev > 0.0 { dq_norm / prev } else { 0.0 });
        }
        log::debug!("picard n={n} omega0={:.15} dq={dq_norm:.3e} domega={d_omega:.3e}", state.omega0);
        trace.rows.push(row);

        q = q_new;
        omega_prev = state.omega0;
        omega_bar_prev = Some(state.omega_bar);
        last_update = dq_norm + d_omega;
        if last_update < opts.tol {
            trace.converged = true;
            return Ok(PicardSolution { state, q, trace });
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iter, last_update })
}
