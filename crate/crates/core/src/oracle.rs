//! Independent check of the Picard solver: march `d_s Q = q d_psi^2 Q` in `s`
//! as an evolution, find the s-periodic profile as a fixed point of the
//! period map, and select `omega` by shooting on the drift.
//!
//! On the truncated interval `[0, psi_max]` with `Q(psi_max) = 0` a periodic
//! profile exists for every `omega`; what singles out the selected vorticity
//! is the far-wall flux of that profile,
//!
//! ```text
//! r(omega) = -psi_max int_0^L q_e(s) d_psi Q(s, psi_max) ds,
//! ```
//!
//! which equals the compatibility residual `int q_e Q(s,0) ds + int y N dy`
//! (multiply the equation by `y`, integrate twice by parts). The discrete
//! version below is exact for the marching scheme by summation by parts.

use crate::discretization::{trig_interpolate, Field, Grid};
use crate::error::{Error, Result};
use crate::geometry::BoundaryGeometry;
use crate::iteration::{fl_leading, SlipForcing};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarchConfig {
    pub steps_per_period: usize,
    /// 0.5 is Crank-Nicolson, 1 fully implicit.
    pub theta: f64,
    pub poincare_max_iters: usize,
    pub poincare_tol: f64,
    pub anderson_depth: usize,
    pub shoot_tol: f64,
    pub shoot_max_iters: usize,
    /// Defaults to the leading-order value plus or minus `max(5 epsilon, 1e-3)`.
    pub shoot_bracket: Option<(f64, f64)>,
}

impl Default for MarchConfig {
    fn default() -> Self {
        Self {
            steps_per_period: 1024,
            theta: 0.5,
            poincare_max_iters: 400,
            poincare_tol: 1e-13,
            anderson_depth: 8,
            shoot_tol: 1e-12,
            shoot_max_iters: 60,
            shoot_bracket: None,
        }
    }
}

impl MarchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period < 64 {
            return Err(Error::Config(format!(
                "steps_per_period must be at least 64, got {}",
                self.steps_per_period
            )));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0.5, 1], got {}", self.theta)));
        }
        if let Some((lo, hi)) = self.shoot_bracket {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Config(format!("shoot bracket ({lo}, {hi}) must satisfy 0 < lo < hi")));
            }
        }
        Ok(())
    }
}

/// Cap on coefficient sweeps per step; two or three suffice in practice.
const MAX_SWEEPS: usize = 20;

/// Precomputed coefficients of one period of marching at fixed `omega`.
struct Marcher<'a> {
    grid: &'a Grid,
    omega: f64,
    theta: f64,
    ds: f64,
    /// `omega q_e` at half steps.
    a_half: Vec<f64>,
    /// `b = f^2 - omega^2 q_e^2` at the step points `s_0 .. s_M`.
    b: Vec<f64>,
}

/// Output of one marched period.
struct PeriodRun {
    end: Vec<f64>,
    drift: f64,
    field: Option<Field>,
}

impl<'a> Marcher<'a> {
    fn new(
        omega: f64,
        forcing: &SlipForcing,
        geometry: &BoundaryGeometry,
        grid: &'a Grid,
        config: &MarchConfig,
    ) -> Result<Self> {
        config.validate()?;
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Parabolicity { index: 0, value: omega });
        }
        let m = config.steps_per_period;
        let l = geometry.length();
        let ds = l / m as f64;
        let halves: Vec<f64> = (0..m).map(|n| (n as f64 + 0.5) * ds).collect();
        let steps: Vec<f64> = (0..=m).map(|n| n as f64 * ds).collect();
        let a_half = trig_interpolate(geometry.q_e(), l, &halves).into_iter().map(|q| omega * q).collect();
        let qe = trig_interpolate(geometry.q_e(), l, &steps);
        let f = trig_interpolate(forcing.f_slip(), l, &steps);
        let b = qe.iter().zip(&f).map(|(q, f)| f * f - omega * omega * q * q).collect();
        Ok(Self { grid, omega, theta: config.theta, ds, a_half, b })
    }

    /// One theta-scheme step with frozen coefficient `coef`; writes the new
    /// profile into `out`.
    #[allow(clippy::too_many_arguments)]
    fn solve_step(
        &self,
        cur: &[f64],
        coef: &[f64],
        b_next: f64,
        lambda: f64,
        cp: &mut [f64],
        dp: &mut [f64],
        out: &mut [f64],
    ) {
        let n = cur.len();
        let th = self.theta;
        // Thomas algorithm on the interior nodes 1..n-2
        for j in 1..n - 1 {
            let c = lambda * coef[j];
            let off = -th * c;
            let diag = 1.0 + 2.0 * th * c;
            let mut rhs = cur[j] + (1.0 - th) * c * (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]);
            if j == 1 {
                rhs -= off * b_next;
                cp[j] = off / diag;
                dp[j] = rhs / diag;
            } else {
                let denom = diag - off * cp[j - 1];
                cp[j] = off / denom;
                dp[j] = (rhs - off * dp[j - 1]) / denom;
            }
        }
        out[n - 1] = 0.0;
        out[n - 2] = dp[n - 2];
        for j in (1..n - 2).rev() {
            out[j] = dp[j] - cp[j] * out[j + 1];
        }
        out[0] = b_next;
    }

    fn steps(&self) -> usize {
        self.a_half.len()
    }

    /// Marches one period from `start` (its first entry is replaced by the
    /// wall value). Records `n_record` equally spaced rows when asked.
    fn run(&self, start: &[f64], n_record: Option<usize>) -> Result<PeriodRun> {
        let n = self.grid.n_psi();
        let h = self.grid.h();
        let lambda = self.ds / (h * h);
        let th = self.theta;
        let mut cur = start.to_vec();
        cur[0] = self.b[0];
        cur[n - 1] = 0.0;
        let mut prev = cur.clone();
        let mut next = vec![0.0; n];
        let mut coef = vec![0.0; n];
        // tridiagonal work arrays
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let m = self.steps();
        let record_every = match n_record {
            Some(k) if k > 0 && m.is_multiple_of(k) => Some(m / k),
            Some(k) => {
                return Err(Error::InvalidGrid(format!(
                    "cannot record {k} rows from {m} steps per period"
                )))
            }
            None => None,
        };
        let mut field = n_record.map(|k| Field::zeros(k, n));
        let mut flux = 0.0;
        let wall = |q: &[f64]| -q[n - 2] / h;

        for step in 0..m {
            if let (Some(every), Some(f)) = (record_every, field.as_mut()) {
                if step % every == 0 {
                    f.row_mut(step / every).copy_from_slice(&cur);
                }
            }
            let a = self.a_half[step];
            let b_next = self.b[step + 1];
            // first guess for the new profile by linear extrapolation
            for j in 0..n {
                next[j] = if step == 0 { cur[j] } else { 2.0 * cur[j] - prev[j] };
            }
            let scale = 1.0 + cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for _ in 0..MAX_SWEEPS {
                // q averaged over the step keeps (a / q) dQ an exact difference of 2 a q
                for j in 0..n {
                    let r_new = a * a + next[j];
                    let r_old = a * a + cur[j];
                    if !(r_new > 0.0 && r_old > 0.0) {
                        return Err(Error::StagnantLayer { s_index: step, psi_index: j, value: r_new.min(r_old) });
                    }
                    coef[j] = 0.5 * (r_new.sqrt() + r_old.sqrt());
                }
                self.solve_step(&cur, &coef, b_next, lambda, &mut cp, &mut dp, &mut trial);
                let delta = trial.iter().zip(&next).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                std::mem::swap(&mut next, &mut trial);
                if delta <= 1e-15 * scale {
                    break;
                }
            }
            next[0] = b_next;
            flux += self.ds * (a / self.omega) * (th * wall(&next) + (1.0 - th) * wall(&cur));
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(PeriodRun { end: cur, drift: -self.grid.psi_max() * flux, field })
    }
}

/// Advances a psi-profile by one period of the nonlinear equation.
pub fn march_period(
    q_init: &[f64],
    omega: f64,
    forcing: &SlipForcing,
    geometry: &BoundaryGeometry,
    grid: &Grid,
    config: &MarchConfig,
) -> Result<Vec<f64>> {
    if q_init.len() != grid.n_psi() {
        return Err(Error::LengthMismatch { expected: grid.n_psi(), got: q_init.len() });
    }
    Ok(Marcher::new(omega, forcing, geometry, grid, config)?.run(q_init, None)?.end)
}

/// Periodic profile at fixed `omega` and its drift.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub omega: f64,
    /// Profile at `s = 0`.
    pub profile: Vec<f64>,
    /// `r(omega)`; zero exactly at the selected vorticity.
    pub drift: f64,
    /// `max |P(x) - x|` at exit.
    pub defect: f64,
    /// Periods marched.
    pub periods: usize,
    /// The profile on the geometry's s-grid, when the step count allows it.
    pub field: Option<Field>,
}

/// Least-squares solve by modified Gram-Schmidt; columns are `cols[k]`.
fn least_squares(cols: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    for (c, col) in cols.iter().enumerate() {
        let mut v = col.clone();
        for (p, qp) in q.iter().enumerate() {
            let d: f64 = qp.iter().zip(&v).map(|(a, b)| a * b).sum();
            r[p][c] = d;
            v.iter_mut().zip(qp).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        r[c][c] = norm;
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        q.push(v);
    }
    let qtb: Vec<f64> = q.iter().map(|qc| qc.iter().zip(rhs).map(|(a, b)| a * b).sum()).collect();
    let mut x = vec![0.0; k];
    for c in (0..k).rev() {
        let mut s = qtb[c];
        for p in c + 1..k {
            s -= r[c][p] * x[p];
        }
        x[c] = if r[c][c] > 1e-14 * r[0][0].abs().max(1e-300) { s / r[c][c] } else { 0.0 };
    }
    x
}

fn fixed_point_from(
    marcher: &Marcher,
    start: &[f64],
    geometry: &BoundaryGeometry,
    config: &MarchConfig,
) -> Result<PeriodicSolution> {
    let n = marcher.grid.n_psi();
    let mut x = start.to_vec();
    x[0] = marcher.b[0];
    x[n - 1] = 0.0;
    let mut d_res: Vec<Vec<f64>> = Vec::new();
    let mut d_img: Vec<Vec<f64>> = Vec::new();
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut defect = f64::INFINITY;
    for it in 1..=config.poincare_max_iters {
        let run = marcher.run(&x, None)?;
        let px = run.end;
        let res: Vec<f64> = px.iter().zip(&x).map(|(a, b)| a - b).collect();
        defect = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if defect < config.poincare_tol {
            let n_s = geometry.n_s();
            let recorded = if marcher.steps().is_multiple_of(n_s) {
                Some(marcher.run(&px, Some(n_s))?)
            } else {
                None
            };
            let drift = recorded.as_ref().map_or(run.drift, |r| r.drift);
            return Ok(PeriodicSolution {
                omega: marcher.omega,
                profile: px,
                drift,
                defect,
                periods: it + usize::from(recorded.is_some()),
                field: recorded.and_then(|r| r.field),
            });
        }
        if let Some((prev_res, prev_img)) = &last {
            d_res.push(res.iter().zip(prev_res).map(|(a, b)| a - b).collect());
            d_img.push(px.iter().zip(prev_img).map(|(a, b)| a - b).collect());
            if d_res.len() > config.anderson_depth {
                d_res.remove(0);
                d_img.remove(0);
            }
        }
        let mut xn = px.clone();
        if !d_res.is_empty() {
            let gamma = least_squares(&d_res, &res);
            for (g, col) in gamma.iter().zip(&d_img) {
                xn.iter_mut().zip(col).for_each(|(a, c)| *a -= g * c);
            }
        }
        last = Some((res, px));
        x = xn;
    }
    Err(Error::NoContraction { iterations: config.poincare_max_iters, defect })
}

/// Finds the periodic profile at fixed `omega`, starting from the zero profile.
pub fn poincare_fixed_point(
    omega: f64,
    forcing: &SlipForcing,
    geometry: &BoundaryGeometry,
    grid: &Grid,
    config: &MarchConfig,
) -> Result<PeriodicSolution> {
    let marcher = Marcher::new(omega, forcing, geometry, grid, config)?;
    fixed_point_from(&marcher, &vec![0.0; grid.n_psi()], geometry, config)
}

#[derive(Debug, Clone)]
pub struct ShootResult {
    pub omega0: f64,
    /// Every `(omega, r(omega))` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
    pub solution: PeriodicSolution,
}

/// Selects `omega` as the root of the drift by a bracketed secant
/// (Illinois) iteration.
pub fn shoot_omega(
    forcing: &SlipForcing,
    geometry: &BoundaryGeometry,
    grid: &Grid,
    config: &MarchConfig,
) -> Result<ShootResult> {
    config.validate()?;
    let (lo, hi) = config.shoot_bracket.unwrap_or_else(|| {
        let lead = fl_leading(forcing.f_slip(), geometry);
        let half = (5.0 * forcing.epsilon()).max(1e-3);
        ((lead - half).max(0.5 * lead), lead + half)
    });
    let eval = |omega: f64, start: Option<&[f64]>| -> Result<PeriodicSolution> {
        let marcher = Marcher::new(omega, forcing, geometry, grid, config)?;
        let zero = vec![0.0; grid.n_psi()];
        fixed_point_from(&marcher, start.unwrap_or(&zero), geometry, config)
    };
    let (s_lo, s_hi) = rayon::join(|| eval(lo, None), || eval(hi, None));
    let (s_lo, s_hi) = (s_lo?, s_hi?);
    let mut evaluations = vec![(lo, s_lo.drift), (hi, s_hi.drift)];
    if s_lo.drift.signum() == s_hi.drift.signum() {
        return Err(Error::NoSignChange { lo, hi, r_lo: s_lo.drift, r_hi: s_hi.drift });
    }
    let mid = 0.5 * (lo + hi);
    let s_mid = eval(mid, Some(&s_lo.profile))?;
    evaluations.push((mid, s_mid.drift));
    let dir = (s_hi.drift - s_lo.drift).signum();
    if (s_mid.drift - s_lo.drift).signum() != dir || (s_hi.drift - s_mid.drift).signum() != dir {
        return Err(Error::NonMonotoneDrift(format!(
            "r({lo}) = {:e}, r({mid}) = {:e}, r({hi}) = {:e}",
            s_lo.drift, s_mid.drift, s_hi.drift
        )));
    }
    // bracket from the midpoint evaluation
    let (mut a, mut fa, mut b, mut fb, mut best) = if s_mid.drift.signum() == s_lo.drift.signum() {
        (mid, s_mid.drift, hi, s_hi.drift, s_mid)
    } else {
        (lo, s_lo.drift, mid, s_mid.drift, s_mid)
    };
    if best.drift == 0.0 {
        return Ok(ShootResult { omega0: best.omega, evaluations, solution: best });
    }
    let mut side = 0i32;
    for _ in 0..config.shoot_max_iters {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let sol = eval(c, Some(&best.profile))?;
        let fc = sol.drift;
        evaluations.push((c, fc));
        let step = (c - best.omega).abs();
        best = sol;
        if fc == 0.0 || step < config.shoot_tol || (b - a).abs() < config.shoot_tol {
            return Ok(ShootResult { omega0: c, evaluations, solution: best });
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    Ok(ShootResult { omega0: best.omega, evaluations, solution: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::disk_geometry;
    use crate::iteration::wood_disk;

    fn quick() -> MarchConfig {
        MarchConfig { steps_per_period: 256, ..Default::default() }
    }

    #[test]
    fn unforced_march_stays_zero() {
        let geom = disk_geometry(1.0, 32).unwrap();
        let grid = Grid::default();
        let out = march_period(&vec![0.0; 301], 1.0, &SlipForcing::none(&geom), &geom, &grid, &quick()).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
        let p = poincare_fixed_point(1.0, &SlipForcing::none(&geom), &geom, &grid, &quick()).unwrap();
        assert_eq!(p.drift, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(MarchConfig { steps_per_period: 32, ..Default::default() }.validate().is_err());
        assert!(MarchConfig { theta: 0.3, ..Default::default() }.validate().is_err());
        assert!(MarchConfig { shoot_bracket: Some((1.0, 0.9)), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn drift_vanishes_at_wood_and_responds_linearly() {
        let geom = disk_geometry(1.0, 32).unwrap();
        let grid = Grid::default();
        let forcing = SlipForcing::from_coefficients(&geom, 0.05, 0.0, &[1.0], &[]).unwrap();
        let w = wood_disk(forcing.f_slip(), 1.0);
        let at = poincare_fixed_point(w, &forcing, &geom, &grid, &quick()).unwrap();
        assert!(at.drift.abs() < 1e-8, "{}", at.drift);
        let wp = w * (1.0 + 1e-3);
        let off = poincare_fixed_point(wp, &forcing, &geom, &grid, &quick()).unwrap();
        let predicted = -(wp * wp - w * w) * geom.q_e_cubed_integral();
        assert_eq!(off.drift.signum(), predicted.signum());
        assert!((off.drift / predicted - 1.0).abs() < 0.05, "{} vs {}", off.drift, predicted);
    }

    #[test]
    fn shooting_recovers_wood() {
        let geom = disk_geometry(1.0, 32).unwrap();
        let grid = Grid::default();
        let forcing = SlipForcing::from_coefficients(&geom, 0.05, 0.0, &[1.0], &[]).unwrap();
        let r = shoot_omega(&forcing, &geom, &grid, &quick()).unwrap();
        assert!((r.omega0 - (1.0f64 + 2.0 * 0.05 * 0.05).sqrt()).abs() < 1e-6);
        let none = SlipForcing::none(&geom);
        let r0 = shoot_omega(&none, &geom, &grid, &quick()).unwrap();
        assert!((r0.omega0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_bracket_reports_both_ends() {
        let geom = disk_geometry(1.0, 32).unwrap();
        let grid = Grid::default();
        let forcing = SlipForcing::from_coefficients(&geom, 0.05, 0.0, &[1.0], &[]).unwrap();
        let cfg = MarchConfig { shoot_bracket: Some((1.01, 1.02)), ..quick() };
        assert!(matches!(shoot_omega(&forcing, &geom, &grid, &cfg), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn time_step_refinement_is_second_order() {
        // defect of the period map at a converged coarse profile vs finer marches
        let geom = disk_geometry(1.0, 16).unwrap();
        let grid = Grid::uniform(151, 30.0).unwrap();
        let forcing = SlipForcing::from_coefficients(&geom, 0.05, 0.0, &[1.0], &[]).unwrap();
        let w = wood_disk(forcing.f_slip(), 1.0);
        let fine = poincare_fixed_point(w, &forcing, &geom, &grid, &MarchConfig { steps_per_period: 2048, ..Default::default() }).unwrap();
        let errs: Vec<f64> = [128, 256, 512]
            .iter()
            .map(|&m| {
                let cfg = MarchConfig { steps_per_period: m, ..Default::default() };
                let p = poincare_fixed_point(w, &forcing, &geom, &grid, &cfg).unwrap();
                p.profile.iter().zip(&fine.profile).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()))
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.7, "{errs:?}");
        }
    }
}
