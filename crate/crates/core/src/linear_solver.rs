//! The linear periodic problem
//!
//! ```text
//! d_s Q - omega q_e d_psi^2 Q = F + d_psi^2 G,   Q(s, 0) = b(s),   Q(s, inf) = 0.
//! ```
//!
//! With `t = J(s) = int_0^s omega q_e` the operator becomes the heat operator
//! `d_t - d_psi^2` on a circle of length `L_t = omega <q_e> L`. Each nonzero
//! t-mode `V` with wavenumber `xi = 2 pi k / L_t` solves
//! `i xi V - V'' = H`, `V(0) = b_k`, whose half-line solution is
//!
//! ```text
//! V(psi) = e^{-mu psi} b_k + int_0^inf (e^{-mu |psi - y|} - e^{-mu (psi + y)}) / (2 mu) H(y) dy
//! ```
//!
//! with `mu = sqrt(i xi)`, `Re mu > 0`. The s-average is fixed separately by
//! integrating the equation over one period, which is where the
//! Feynman-Lagerstrom compatibility condition appears.

use num_complex::Complex64;

use crate::discretization::{d2_dpsi2, integrate_s, tail_moment, Dft, Field, Grid, PeriodicMap};
use crate::error::{Error, Result};
use crate::geometry::BoundaryGeometry;

/// Default tolerance on the compatibility residual, relative to `int q_e^3`.
pub const DEFAULT_COMPAT_TOL: f64 = 1e-8;

/// The change of variable `t = J(s)` with `dJ/ds = omega q_e(s)`.
#[derive(Debug, Clone)]
pub struct TMap {
    map: PeriodicMap,
}

impl TMap {
    /// `J(s_i)` on the uniform arc-length grid.
    pub fn j_samples(&self) -> &[f64] {
        self.map.j_samples()
    }

    pub fn l_t(&self) -> f64 {
        self.map.period_t()
    }

    pub fn mean_speed(&self) -> f64 {
        self.map.mean_speed()
    }

    pub fn is_uniform(&self) -> bool {
        self.map.is_uniform()
    }

    pub fn periodic_map(&self) -> &PeriodicMap {
        &self.map
    }
}

/// Builds `J` from the spectral antiderivative of `omega q_e`.
pub fn build_t_map(geometry: &BoundaryGeometry, omega: f64) -> Result<TMap> {
    let speed: Vec<f64> = geometry.q_e().iter().map(|q| omega * q).collect();
    if let Some((index, &value)) =
        speed.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::Parabolicity { index, value });
    }
    Ok(TMap { map: PeriodicMap::from_speed(&speed, geometry.length())? })
}

/// Data of one linear solve. `g` may be omitted when it vanishes.
#[derive(Debug, Clone)]
pub struct LinearProblem<'a> {
    pub geometry: &'a BoundaryGeometry,
    pub omega: f64,
    pub f: Field,
    pub g: Option<Field>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    pub compat_tol: f64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self { compat_tol: DEFAULT_COMPAT_TOL }
    }
}

impl LinearProblem<'_> {
    fn validate(&self, grid: &Grid) -> Result<()> {
        let n_s = self.geometry.n_s();
        if self.b.len() != n_s {
            return Err(Error::LengthMismatch { expected: n_s, got: self.b.len() });
        }
        for field in std::iter::once(&self.f).chain(self.g.as_ref()) {
            if field.n_s() != n_s {
                return Err(Error::LengthMismatch { expected: n_s, got: field.n_s() });
            }
            if field.n_psi() != grid.n_psi() {
                return Err(Error::LengthMismatch { expected: grid.n_psi(), got: field.n_psi() });
            }
            let tail = field.column(grid.n_psi() - 1).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if tail > 1e-8 {
                log::warn!("source does not decay at psi_max: max |value| = {tail:e}");
            }
        }
        Ok(())
    }

    /// `int_0^L F ds` and `int_0^L G ds` as profiles in psi.
    fn source_integrals(&self) -> (Vec<f64>, Vec<f64>) {
        let l = self.geometry.length();
        let n_psi = self.f.n_psi();
        let fs = (0..n_psi).map(|j| integrate_s(&self.f.column(j), l)).collect();
        let gs = match &self.g {
            Some(g) => (0..n_psi).map(|j| integrate_s(&g.column(j), l)).collect(),
            None => vec![0.0; n_psi],
        };
        (fs, gs)
    }

    /// Raw compatibility residual
    /// `int q_e b ds + (1/omega) (int_0^inf y int F ds dy + int G(s, 0) ds)`.
    pub fn compatibility_residual(&self, grid: &Grid) -> f64 {
        let (fs, gs) = self.source_integrals();
        let tf = tail_moment(&fs, grid);
        let qb: Vec<f64> = self.geometry.q_e().iter().zip(&self.b).map(|(q, b)| q * b).collect();
        integrate_s(&qb, self.geometry.length()) + (tf[0] + gs[0]) / self.omega
    }
}

/// `phi_1(z) = (1 - e^{-z}) / z` and `phi_2(z) = (e^{-z} - 1 + z) / z^2`.
fn phi12(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.5 {
        // sum_k (-z)^k / (k + p)!
        let mut p1 = Complex64::new(0.0, 0.0);
        let mut p2 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 0..24 {
            fact *= (k + 1) as f64;
            p1 += term / fact;
            p2 += term / (fact * (k + 2) as f64);
            term *= -z;
        }
        (p1, p2)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (e - 1.0 + z) / (z * z))
    }
}

/// Solves `i xi V - V'' = H` on the psi nodes with `V(0) = b_hat`.
///
/// The kernel is integrated exactly against the piecewise-linear interpolant
/// of `H`, in two O(N) sweeps, so a mode with `H = 0` is reproduced to
/// rounding for any step.
pub fn solve_mode(xi: f64, b_hat: Complex64, h_hat: &[Complex64], grid: &Grid) -> Result<Vec<Complex64>> {
    if xi == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let n = grid.n_psi();
    if h_hat.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: h_hat.len() });
    }
    let mu = Complex64::new(0.0, xi).sqrt();
    let h = grid.h();
    let z = mu * h;
    let decay = (-z).exp();
    let (p1, p2) = phi12(z);
    // weights of the near and far end of a cell
    let (near, far) = (h * p2, h * (p1 - p2));

    // forward: A_j = int_0^{psi_j} e^{-mu (psi_j - y)} H dy
    let mut fwd = vec![Complex64::new(0.0, 0.0); n];
    for j in 1..n {
        fwd[j] = decay * fwd[j - 1] + far * h_hat[j - 1] + near * h_hat[j];
    }
    // backward: B_j = int_{psi_j}^{psi_max} e^{-mu (y - psi_j)} H dy
    let mut bwd = vec![Complex64::new(0.0, 0.0); n];
    for j in (0..n - 1).rev() {
        bwd[j] = decay * bwd[j + 1] + near * h_hat[j] + far * h_hat[j + 1];
    }
    let inv2mu = 0.5 / mu;
    Ok(grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &psi)| {
            let e = (-mu * psi).exp();
            e * b_hat + (fwd[j] + bwd[j] - e * bwd[0]) * inv2mu
        })
        .collect())
}

/// Reconstructs the s-constant part `Q0(psi)` from
/// `int q_e Q ds = -(1/omega)(T_F(psi) + int G ds)` with
/// `T_F(psi) = int_psi^inf (y - psi) int F ds dy`, given the mean-free part.
///
/// Fails when the compatibility residual at `psi = 0`, relative to
/// `int q_e^3`, exceeds `compat_tol`.
pub fn solve_zero_mode(
    problem: &LinearProblem,
    q_nonzero: &Field,
    grid: &Grid,
    compat_tol: f64,
) -> Result<Vec<f64>> {
    let geom = problem.geometry;
    let scale = geom.q_e_cubed_integral();
    let residual = problem.compatibility_residual(grid) / scale;
    if !(residual.abs() <= compat_tol) {
        return Err(Error::Compatibility { residual, tol: compat_tol });
    }
    let (fs, gs) = problem.source_integrals();
    let tf = tail_moment(&fs, grid);
    let l = geom.length();
    let mass = l * geom.mean_q_e();
    Ok((0..grid.n_psi())
        .map(|j| {
            let weighted: Vec<f64> =
                geom.q_e().iter().enumerate().map(|(i, q)| q * q_nonzero.get(i, j)).collect();
            let cross = integrate_s(&weighted, l);
            (-(tf[j] + gs[j]) / problem.omega - cross) / mass
        })
        .collect())
}

/// Solves the linear problem with the default compatibility tolerance.
pub fn solve_linear(problem: &LinearProblem, grid: &Grid) -> Result<Field> {
    solve_linear_with(problem, grid, &LinearOptions::default())
}

pub fn solve_linear_with(problem: &LinearProblem, grid: &Grid, opts: &LinearOptions) -> Result<Field> {
    problem.validate(grid)?;
    let geom = problem.geometry;
    let n_s = geom.n_s();
    let n_psi = grid.n_psi();
    let tmap = build_t_map(geom, problem.omega)?;
    let map = tmap.periodic_map();

    let mut rhs = problem.f.clone();
    if let Some(g) = &problem.g {
        rhs = rhs.add(&d2_dpsi2(g, grid)?);
    }
    let speed: Vec<f64> = geom.q_e().iter().map(|q| problem.omega * q).collect();
    for (i, v) in speed.iter().enumerate() {
        rhs.row_mut(i).iter_mut().for_each(|x| *x /= v);
    }
    let rhs_t = map.field_s_to_t(&rhs)?;
    let b_t = map.s_to_t(&problem.b)?;

    let dft = Dft::new(n_s);
    let b_hat = dft.forward(&b_t)?;
    // h_hat[j][k]: mode k of the psi_j column
    let h_hat: Vec<Vec<Complex64>> =
        (0..n_psi).map(|j| dft.forward(&rhs_t.column(j))).collect::<Result<_>>()?;

    let zero = Complex64::new(0.0, 0.0);
    let mut v_hat = vec![vec![zero; n_s]; n_psi];
    let l_t = tmap.l_t();
    let mut profile = vec![zero; n_psi];
    for k in 1..=n_s / 2 {
        for j in 0..n_psi {
            profile[j] = h_hat[j][k];
        }
        let xi = 2.0 * std::f64::consts::PI * k as f64 / l_t;
        let v = solve_mode(xi, b_hat[k], &profile, grid)?;
        let nyquist = n_s.is_multiple_of(2) && k == n_s / 2;
        for j in 0..n_psi {
            if nyquist {
                v_hat[j][k] = Complex64::new(v[j].re, 0.0);
            } else {
                v_hat[j][k] = v[j];
                v_hat[j][n_s - k] = v[j].conj();
            }
        }
    }
    let mut p_t = Field::zeros(n_s, n_psi);
    for (j, coeffs) in v_hat.iter().enumerate() {
        p_t.set_column(j, &dft.inverse(coeffs)?);
    }
    let p = map.field_t_to_s(&p_t)?;
    let mean = p.s_mean();
    let q_nonzero = Field::from_fn(n_s, n_psi, |i, j| p.get(i, j) - mean[j]);

    let q0 = solve_zero_mode(problem, &q_nonzero, grid, opts.compat_tol)?;
    let mut q = Field::from_fn(n_s, n_psi, |i, j| q_nonzero.get(i, j) + q0[j]);
    for (i, b) in problem.b.iter().enumerate() {
        q.set(i, 0, *b);
    }
    Ok(q)
}
