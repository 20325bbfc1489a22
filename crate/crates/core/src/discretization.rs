//! Shared numerical kernels: the `(s, psi)` tensor grid, fields, the periodic
//! DFT in the boundary coordinate, psi stencils and quadrature, and the
//! resampling between arc length `s` and the uniform-speed variable `t`.
//!
//! Fields are stored dense and row-major by `s`: row `i` holds the psi
//! profile at `s_i`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default number of psi nodes.
pub const DEFAULT_N_PSI: usize = 301;
/// Default truncation of the half-line in psi.
pub const DEFAULT_PSI_MAX: f64 = 30.0;
/// Smallest admissible truncation of the half-line.
pub const MIN_PSI_MAX: f64 = 20.0;

/// Uniform grid on `[0, psi_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_psi: usize,
    psi_max: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn uniform(n_psi: usize, psi_max: f64) -> Result<Self> {
        if n_psi < 5 {
            return Err(Error::InvalidGrid(format!("need at least 5 psi nodes, got {n_psi}")));
        }
        if !psi_max.is_finite() || psi_max < MIN_PSI_MAX {
            return Err(Error::InvalidGrid(format!(
                "psi_max must be at least {MIN_PSI_MAX}, got {psi_max}"
            )));
        }
        let h = psi_max / (n_psi - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_psi).map(|j| j as f64 * h).collect();
        nodes[n_psi - 1] = psi_max;
        Ok(Self { n_psi, psi_max, h, nodes })
    }

    pub fn n_psi(&self) -> usize {
        self.n_psi
    }

    pub fn psi_max(&self) -> f64 {
        self.psi_max
    }

    /// Node spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoid weights on the nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.n_psi];
        w[0] *= 0.5;
        w[self.n_psi - 1] *= 0.5;
        w
    }

    /// Index of the node equal to `psi` (within `1e-9`), if any.
    pub fn node_index(&self, psi: f64) -> Option<usize> {
        let j = (psi / self.h).round();
        if j < 0.0 || j as usize >= self.n_psi {
            return None;
        }
        let j = j as usize;
        ((self.nodes[j] - psi).abs() < 1e-9).then_some(j)
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::uniform(DEFAULT_N_PSI, DEFAULT_PSI_MAX).expect("default grid is valid")
    }
}

/// Real function on the `(s, psi)` tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n_s: usize,
    n_psi: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(n_s: usize, n_psi: usize) -> Self {
        Self { n_s, n_psi, data: vec![0.0; n_s * n_psi] }
    }

    pub fn from_fn(n_s: usize, n_psi: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_s * n_psi);
        for i in 0..n_s {
            for j in 0..n_psi {
                data.push(f(i, j));
            }
        }
        Self { n_s, n_psi, data }
    }

    pub fn from_vec(n_s: usize, n_psi: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_s * n_psi {
            return Err(Error::LengthMismatch { expected: n_s * n_psi, got: data.len() });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse(format!(
                "non-finite field value at s index {}, psi index {}",
                k / n_psi,
                k % n_psi
            )));
        }
        Ok(Self { n_s, n_psi, data })
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_psi(&self) -> usize {
        self.n_psi
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_psi + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_psi + j] = v;
    }

    /// The psi profile at `s_i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_psi..(i + 1) * self.n_psi]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_psi..(i + 1) * self.n_psi]
    }

    /// The s profile at `psi_j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_s).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.set(i, j, *v);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { n_s: self.n_s, n_psi: self.n_psi, data: self.data.iter().map(|v| f(*v)).collect() }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Field {
        assert_eq!((self.n_s, self.n_psi), (other.n_s, other.n_psi), "field shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Field { n_s: self.n_s, n_psi: self.n_psi, data }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.combine(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.combine(1.0, other, 1.0)
    }

    /// s-average at every psi node.
    pub fn s_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_psi];
        for i in 0..self.n_s {
            for (mj, v) in m.iter_mut().zip(self.row(i)) {
                *mj += v;
            }
        }
        let inv = 1.0 / self.n_s as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        m
    }

    /// Applies `f` to every psi profile.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Field {
        let mut out = Field::zeros(self.n_s, self.n_psi);
        for i in 0..self.n_s {
            let r = f(self.row(i));
            out.row_mut(i).copy_from_slice(&r);
        }
        out
    }

    /// Applies `f` to every s profile.
    pub fn map_columns(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Field {
        let mut out = Field::zeros(self.n_s, self.n_psi);
        for j in 0..self.n_psi {
            let c = f(&self.column(j));
            out.set_column(j, &c);
        }
        out
    }
}

/// Forward/inverse DFT of a fixed length.
///
/// Coefficient `k` multiplies `exp(2 pi i k x / P)`; the forward transform is
/// normalized by `1/N`, so a constant profile `c` has mode 0 equal to `c`.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        self.check(x.len())?;
        let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.forward.process(&mut buf);
        let inv = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= inv);
        Ok(buf)
    }

    pub fn forward_complex(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(x.len())?;
        let mut buf = x.to_vec();
        self.forward.process(&mut buf);
        let inv = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= inv);
        Ok(buf)
    }

    /// Inverse transform; returns the real part.
    pub fn inverse(&self, c: &[Complex64]) -> Result<Vec<f64>> {
        Ok(self.inverse_complex(c)?.into_iter().map(|z| z.re).collect())
    }

    pub fn inverse_complex(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(c.len())?;
        let mut buf = c.to_vec();
        self.inverse.process(&mut buf);
        Ok(buf)
    }

    /// Spectral derivative of order `order` of a real periodic profile with
    /// the given period. The Nyquist mode is dropped for odd orders.
    pub fn derivative(&self, x: &[f64], period: f64, order: u32) -> Result<Vec<f64>> {
        if order == 0 {
            self.check(x.len())?;
            return Ok(x.to_vec());
        }
        let mut c = self.forward(x)?;
        let n = self.n;
        for (k, ck) in c.iter_mut().enumerate() {
            let kk = signed_wavenumber(k, n);
            if n.is_multiple_of(2) && k == n / 2 && order % 2 == 1 {
                *ck = Complex64::new(0.0, 0.0);
                continue;
            }
            let xi = 2.0 * PI * kk as f64 / period;
            *ck *= Complex64::new(0.0, xi).powu(order);
        }
        self.inverse(&c)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: len });
        }
        Ok(())
    }
}

/// Integer wavenumber of FFT slot `k` (slots above `n/2` are negative).
pub fn signed_wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Normalized forward DFT of a uniformly sampled periodic profile.
pub fn dft_s(x: &[f64]) -> Vec<Complex64> {
    Dft::new(x.len()).forward(x).expect("length matches plan")
}

/// Inverse of [`dft_s`]; returns the real part.
pub fn idft_s(c: &[Complex64]) -> Vec<f64> {
    Dft::new(c.len()).inverse(c).expect("length matches plan")
}

/// Spectral s-derivative of every column of a field.
pub fn d_ds(field: &Field, period: f64, order: u32) -> Field {
    let dft = Dft::new(field.n_s());
    field.map_columns(|c| dft.derivative(c, period, order).expect("column length"))
}

fn check_stencil_len(n: usize) -> Result<()> {
    if n < 5 {
        return Err(Error::InvalidGrid(format!("psi stencils need at least 5 nodes, got {n}")));
    }
    Ok(())
}

/// First psi-derivative: centered in the interior, second-order one-sided at
/// both ends.
pub fn d_dpsi_profile(q: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = q.len();
    check_stencil_len(n)?;
    let mut d = vec![0.0; n];
    let inv = 1.0 / (2.0 * h);
    d[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) * inv;
    for j in 1..n - 1 {
        d[j] = (q[j + 1] - q[j - 1]) * inv;
    }
    d[n - 1] = (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) * inv;
    Ok(d)
}

/// Second psi-derivative: centered in the interior, second-order one-sided at
/// both ends.
pub fn d2_dpsi2_profile(q: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = q.len();
    check_stencil_len(n)?;
    let mut d = vec![0.0; n];
    let inv = 1.0 / (h * h);
    d[0] = (2.0 * q[0] - 5.0 * q[1] + 4.0 * q[2] - q[3]) * inv;
    for j in 1..n - 1 {
        d[j] = (q[j + 1] - 2.0 * q[j] + q[j - 1]) * inv;
    }
    d[n - 1] = (2.0 * q[n - 1] - 5.0 * q[n - 2] + 4.0 * q[n - 3] - q[n - 4]) * inv;
    Ok(d)
}

pub fn d_dpsi(field: &Field, grid: &Grid) -> Result<Field> {
    check_stencil_len(field.n_psi())?;
    Ok(field.map_rows(|r| d_dpsi_profile(r, grid.h()).expect("checked length")))
}

pub fn d2_dpsi2(field: &Field, grid: &Grid) -> Result<Field> {
    check_stencil_len(field.n_psi())?;
    Ok(field.map_rows(|r| d2_dpsi2_profile(r, grid.h()).expect("checked length")))
}

/// Trapezoid rule in psi with weight `(1 + psi)^m`.
pub fn integrate_psi(profile: &[f64], grid: &Grid, m: u32) -> f64 {
    let w = grid.trapezoid_weights();
    profile
        .iter()
        .zip(grid.nodes())
        .zip(&w)
        .map(|((v, psi), wj)| wj * (1.0 + psi).powi(m as i32) * v)
        .sum()
}

/// Rectangle rule over one period (spectrally accurate for smooth periodic
/// integrands).
pub fn integrate_s(profile: &[f64], period: f64) -> f64 {
    let n = profile.len() as f64;
    profile.iter().sum::<f64>() * period / n
}

/// `T(psi_j) = int_{psi_j}^{psi_max} (y - psi_j) h(y) dy` on every node, by the
/// trapezoid rule on the nodes.
///
/// This is the double integral "from infinity" of `h`, so `T'' = h` and
/// `T(psi_max) = T'(psi_max) = 0`.
pub fn tail_moment(profile: &[f64], grid: &Grid) -> Vec<f64> {
    let n = profile.len();
    let nodes = grid.nodes();
    let mut out = vec![0.0; n];
    // running trapezoid sums of int y h and int h over [psi_j, psi_max]
    let mut first = 0.0;
    let mut zeroth = 0.0;
    for j in (0..n.saturating_sub(1)).rev() {
        let dy = nodes[j + 1] - nodes[j];
        zeroth += 0.5 * dy * (profile[j] + profile[j + 1]);
        first += 0.5 * dy * (nodes[j] * profile[j] + nodes[j + 1] * profile[j + 1]);
        out[j] = first - nodes[j] * zeroth;
    }
    out
}

/// Band-limited interpolation kernel on `n` uniform nodes of period `period`,
/// evaluated at offset `y` from a node.
fn periodic_sinc(n: usize, period: f64, y: f64) -> f64 {
    let x = PI * y / period;
    let s = x.sin();
    if s.abs() < 1e-14 {
        // y sits on a node of the periodic lattice
        let m = (y / period).round();
        return if (y - m * period).abs() < 1e-12 * period { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if n.is_multiple_of(2) {
        (nf * x).sin() * x.cos() / (nf * s)
    } else {
        (nf * x).sin() / (nf * s)
    }
}

/// Dense trigonometric interpolation operator from `n` uniform samples of
/// period `period` to the points `targets`; row-major `targets.len() x n`.
pub fn interpolation_matrix(n: usize, period: f64, targets: &[f64]) -> Vec<f64> {
    let dx = period / n as f64;
    let mut m = Vec::with_capacity(targets.len() * n);
    for &x in targets {
        for l in 0..n {
            m.push(periodic_sinc(n, period, x - l as f64 * dx));
        }
    }
    m
}

/// Evaluates the trigonometric interpolant of uniformly sampled periodic data
/// at arbitrary points.
pub fn trig_interpolate(samples: &[f64], period: f64, targets: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let m = interpolation_matrix(n, period, targets);
    apply_matrix(&m, n, samples)
}

fn apply_matrix(m: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    m.chunks_exact(n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Smooth increasing periodic-drift map `t = J(s)` with `J(0) = 0` and
/// `dJ/ds = speed(s) > 0`, given by the speed on a uniform s-grid.
///
/// `J(s + L) = J(s) + L_t`. The map, its inverse and both resampling
/// operators are built from the trigonometric interpolant of the speed.
#[derive(Debug, Clone)]
pub struct PeriodicMap {
    n: usize,
    period_s: f64,
    mean_speed: f64,
    coeffs: Vec<Complex64>,
    uniform: bool,
    j_samples: Vec<f64>,
    preimages: Vec<f64>,
    to_t: Vec<f64>,
    to_s: Vec<f64>,
}

impl PeriodicMap {
    pub fn from_speed(speed: &[f64], period_s: f64) -> Result<Self> {
        let n = speed.len();
        if let Some((index, &v)) =
            speed.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonMonotoneMap { index, speed: v });
        }
        let coeffs = dft_s(speed);
        let mean_speed = coeffs[0].re;
        let uniform = coeffs.iter().skip(1).all(|c| c.norm() <= 1e-15 * mean_speed);
        let mut map = Self {
            n,
            period_s,
            mean_speed,
            coeffs,
            uniform,
            j_samples: Vec::new(),
            preimages: Vec::new(),
            to_t: Vec::new(),
            to_s: Vec::new(),
        };
        let ds = period_s / n as f64;
        map.j_samples = (0..n).map(|i| map.eval(i as f64 * ds)).collect();
        for w in map.j_samples.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::NonMonotoneMap { index: 0, speed: 0.0 });
            }
        }
        let dt = map.period_t() / n as f64;
        if uniform {
            map.preimages = (0..n).map(|j| j as f64 * ds).collect();
        } else {
            map.preimages = (0..n).map(|j| map.inverse(j as f64 * dt)).collect();
            map.to_t = interpolation_matrix(n, period_s, &map.preimages);
            map.to_s = interpolation_matrix(n, map.period_t(), &map.j_samples);
        }
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    pub fn period_t(&self) -> f64 {
        self.mean_speed * self.period_s
    }

    pub fn mean_speed(&self) -> f64 {
        self.mean_speed
    }

    /// `J(s_i)` on the uniform s-grid.
    pub fn j_samples(&self) -> &[f64] {
        &self.j_samples
    }

    /// s-preimages of the uniform t-grid.
    pub fn preimages(&self) -> &[f64] {
        &self.preimages
    }

    /// True when the speed is constant, so resampling is the identity.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `J(s)` for any real `s`.
    pub fn eval(&self, s: f64) -> f64 {
        let n = self.n;
        let mut j = self.mean_speed * s;
        for k in 1..n.div_ceil(2) {
            let xi = 2.0 * PI * k as f64 / self.period_s;
            let e = Complex64::new(0.0, xi * s).exp() - 1.0;
            j += 2.0 * (self.coeffs[k] * e / Complex64::new(0.0, xi)).re;
        }
        if n.is_multiple_of(2) {
            let xi = PI * n as f64 / self.period_s;
            j += self.coeffs[n / 2].re * (xi * s).sin() / xi;
        }
        j
    }

    /// `dJ/ds` at any `s`.
    pub fn speed(&self, s: f64) -> f64 {
        let n = self.n;
        let mut v = self.mean_speed;
        for k in 1..n.div_ceil(2) {
            let xi = 2.0 * PI * k as f64 / self.period_s;
            v += 2.0 * (self.coeffs[k] * Complex64::new(0.0, xi * s).exp()).re;
        }
        if n.is_multiple_of(2) {
            let xi = PI * n as f64 / self.period_s;
            v += self.coeffs[n / 2].re * (xi * s).cos();
        }
        v
    }

    /// `J^{-1}(t)` by safeguarded Newton iteration.
    pub fn inverse(&self, t: f64) -> f64 {
        let lt = self.period_t();
        let wraps = (t / lt).floor();
        let tr = t - wraps * lt;
        let (mut lo, mut hi) = (0.0, self.period_s);
        let mut s = tr / self.mean_speed;
        for _ in 0..100 {
            let r = self.eval(s) - tr;
            if r > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let v = self.speed(s);
            let mut next = s - r / v;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-15 * self.period_s {
                s = next;
                break;
            }
            s = next;
        }
        s + wraps * self.period_s
    }

    /// Resamples an s-profile onto the uniform t-grid.
    pub fn s_to_t(&self, profile: &[f64]) -> Result<Vec<f64>> {
        self.check(profile.len())?;
        if self.uniform {
            return Ok(profile.to_vec());
        }
        Ok(apply_matrix(&self.to_t, self.n, profile))
    }

    /// Resamples a profile on the uniform t-grid back onto the s-grid.
    pub fn t_to_s(&self, profile: &[f64]) -> Result<Vec<f64>> {
        self.check(profile.len())?;
        if self.uniform {
            return Ok(profile.to_vec());
        }
        Ok(apply_matrix(&self.to_s, self.n, profile))
    }

    pub fn field_s_to_t(&self, field: &Field) -> Result<Field> {
        self.check(field.n_s())?;
        Ok(field.map_columns(|c| self.s_to_t(c).expect("checked length")))
    }

    pub fn field_t_to_s(&self, field: &Field) -> Result<Field> {
        self.check(field.n_s())?;
        Ok(field.map_columns(|c| self.t_to_s(c).expect("checked length")))
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: len });
        }
        Ok(())
    }
}

/// Writes a field as `s psi Q` triples, row-major, with 17 significant digits.
pub fn write_field_dump<W: Write>(
    mut out: W,
    field: &Field,
    s_grid: &[f64],
    grid: &Grid,
) -> Result<()> {
    if s_grid.len() != field.n_s() {
        return Err(Error::LengthMismatch { expected: field.n_s(), got: s_grid.len() });
    }
    writeln!(out, "# s psi Q")?;
    for (i, s) in s_grid.iter().enumerate() {
        for (j, psi) in grid.nodes().iter().enumerate() {
            writeln!(out, "{:.16e} {:.16e} {:.16e}", s, psi, field.get(i, j))?;
        }
    }
    Ok(())
}

/// Parsed contents of a field dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub s: Vec<f64>,
    pub psi: Vec<f64>,
    pub field: Field,
}

/// Reads a dump written by [`write_field_dump`].
pub fn read_field_dump<R: BufRead>(input: R) -> Result<FieldDump> {
    let mut triples = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('#') {
            if !saw_header && t.trim_start_matches('#').split_whitespace().eq(["s", "psi", "Q"]) {
                saw_header = true;
            }
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 columns", lineno + 1)));
        }
        let mut v = [0.0; 3];
        for (k, p) in parts.iter().enumerate() {
            v[k] = parse_finite(p).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        triples.push(v);
    }
    if !saw_header {
        return Err(Error::Parse("missing `# s psi Q` header".into()));
    }
    if triples.is_empty() {
        return Err(Error::Parse("empty field dump".into()));
    }
    let s0 = triples[0][0];
    let n_psi = triples.iter().take_while(|t| t[0] == s0).count();
    if triples.len() % n_psi != 0 {
        return Err(Error::Parse("ragged field dump".into()));
    }
    let n_s = triples.len() / n_psi;
    let psi: Vec<f64> = triples[..n_psi].iter().map(|t| t[1]).collect();
    let s: Vec<f64> = (0..n_s).map(|i| triples[i * n_psi][0]).collect();
    for (k, t) in triples.iter().enumerate() {
        if t[0] != s[k / n_psi] || t[1] != psi[k % n_psi] {
            return Err(Error::Parse(format!("entry {} is out of row-major order", k + 1)));
        }
    }
    let field = Field::from_vec(n_s, n_psi, triples.iter().map(|t| t[2]).collect())?;
    Ok(FieldDump { s, psi, field })
}

/// Parses a finite `f64`, rejecting NaN and infinities.
pub fn parse_finite(token: &str) -> std::result::Result<f64, String> {
    let v: f64 = token.parse().map_err(|_| format!("invalid number `{token}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value `{token}`"));
    }
    Ok(v)
}
