//! Weighted Sobolev norms and residual diagnostics.
//!
//! ```text
//! |f|^2_{X_{k,m}} = sum_{k' <= k} sum_{m' <= m} int int <psi>^{2m'} (
//!     |d_s^{k'} f|^2 + |d_s^{k'+1} f|^2 + |d_psi d_s^{k'} f|^2 + |d_psi^2 d_s^{k'} f|^2 )
//! ```
//!
//! with `<psi> = 1 + psi`. The weight sum is accumulated in log form so
//! `m = 50` stays finite on a `psi_max = 30` grid.

use crate::discretization::{d2_dpsi2, d_dpsi, d_ds, integrate_s, tail_moment, Field, Grid};
use crate::error::{Error, Result};
use crate::geometry::BoundaryGeometry;
use crate::iteration::{big_n, SlipForcing};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormSpec {
    k: u32,
    m: u32,
}

impl NormSpec {
    /// Termination norm of the Picard loop.
    pub const X14: NormSpec = NormSpec { k: 1, m: 4 };
    /// Two derivatives with weight degree 50; diagnostic only.
    pub const X250: NormSpec = NormSpec { k: 2, m: 50 };

    pub fn new(k: u32, m: u32) -> Result<Self> {
        if k > 2 || m > 50 {
            return Err(Error::InvalidGrid(format!("norm X_{{{k},{m}}} outside k <= 2, m <= 50")));
        }
        Ok(Self { k, m })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn m(&self) -> u32 {
        self.m
    }
}

/// Norm value, its natural log, and the share of the squared norm carried by
/// the outer tenth of the psi range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub value: f64,
    pub log_value: f64,
    pub tail_fraction: f64,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln sum_{m' <= m} (1 + psi)^{2 m'}`.
fn log_weight(psi: f64, m: u32) -> f64 {
    let l = 2.0 * (1.0 + psi).ln();
    let terms: Vec<f64> = (0..=m).map(|mm| mm as f64 * l).collect();
    log_sum_exp(&terms)
}

/// Full report for `|q|_{X_{k,m}}` on a field of period `period` in s.
pub fn xkm_report(q: &Field, spec: NormSpec, grid: &Grid, period: f64) -> Result<NormReport> {
    let n_psi = grid.n_psi();
    if q.n_psi() != n_psi {
        return Err(Error::LengthMismatch { expected: n_psi, got: q.n_psi() });
    }
    // per-node s-integral of the four derivative families
    let mut density = vec![0.0; n_psi];
    let mut ds_k = q.clone();
    for kk in 0..=spec.k {
        if kk > 0 {
            ds_k = d_ds(&ds_k, period, 1);
        }
        let ds_k1 = d_ds(&ds_k, period, 1);
        let dpsi = d_dpsi(&ds_k, grid)?;
        let dpsi2 = d2_dpsi2(&ds_k, grid)?;
        for (j, dj) in density.iter_mut().enumerate() {
            let sq: Vec<f64> = (0..q.n_s())
                .map(|i| {
                    ds_k.get(i, j).powi(2)
                        + ds_k1.get(i, j).powi(2)
                        + dpsi.get(i, j).powi(2)
                        + dpsi2.get(i, j).powi(2)
                })
                .collect();
            *dj += integrate_s(&sq, period);
        }
    }
    let tw = grid.trapezoid_weights();
    let terms: Vec<f64> = (0..n_psi)
        .map(|j| {
            if density[j] > 0.0 {
                tw[j].ln() + log_weight(grid.nodes()[j], spec.m) + density[j].ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let log_sq = log_sum_exp(&terms);
    if log_sq == f64::NEG_INFINITY {
        return Ok(NormReport { value: 0.0, log_value: f64::NEG_INFINITY, tail_fraction: 0.0 });
    }
    let tail_start = n_psi - n_psi / 10;
    let tail_fraction = (log_sum_exp(&terms[tail_start..]) - log_sq).exp();
    if tail_fraction > 1e-6 {
        // polynomial weights of high degree always peak at psi_max
        let level = if spec.m <= 8 { log::Level::Warn } else { log::Level::Debug };
        log::log!(
            level,
            "X_{{{},{}}} norm: outer psi range carries {tail_fraction:.2e} of the total; psi_max may be too small",
            spec.k,
            spec.m
        );
    }
    let log_value = 0.5 * log_sq;
    Ok(NormReport { value: log_value.exp(), log_value, tail_fraction })
}

/// `|q|_{X_{k,m}}`; may be `inf` only if the log form overflows `f64`.
pub fn xkm_norm(q: &Field, spec: NormSpec, grid: &Grid, period: f64) -> Result<f64> {
    Ok(xkm_report(q, spec, grid, period)?.value)
}

/// Max and root-mean-square of a residual over the interior psi nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub max: f64,
    pub l2: f64,
}

fn check_shape(q: &Field, geometry: &BoundaryGeometry, grid: &Grid) -> Result<()> {
    if q.n_s() != geometry.n_s() {
        return Err(Error::LengthMismatch { expected: geometry.n_s(), got: q.n_s() });
    }
    if q.n_psi() != grid.n_psi() {
        return Err(Error::LengthMismatch { expected: grid.n_psi(), got: q.n_psi() });
    }
    Ok(())
}

/// Discrete residual of `d_s Q - q d_psi^2 Q` with `q = sqrt(omega^2 q_e^2 + Q)`,
/// spectral in s and by the shared stencils in psi.
pub fn pde_residual(q: &Field, omega: f64, geometry: &BoundaryGeometry, grid: &Grid) -> Result<ResidualNorms> {
    check_shape(q, geometry, grid)?;
    let dq = d_ds(q, geometry.length(), 1);
    let d2 = d2_dpsi2(q, grid)?;
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..q.n_s() {
        let a2 = (omega * geometry.q_e()[i]).powi(2);
        for j in 1..grid.n_psi() - 1 {
            let r2 = a2 + q.get(i, j);
            if !(r2 > 0.0) {
                return Err(Error::StagnantLayer { s_index: i, psi_index: j, value: r2 });
            }
            let r = dq.get(i, j) - r2.sqrt() * d2.get(i, j);
            max = max.max(r.abs());
            sum += r * r;
            count += 1;
        }
    }
    Ok(ResidualNorms { max, l2: (sum / count as f64).sqrt() })
}

/// Signed compatibility residual
/// `int q_e (f^2 - omega^2 q_e^2) ds + int_0^inf y N[Q](y) dy`.
///
/// Vanishes exactly when `omega` is the selected vorticity for `Q`; a
/// perturbation of `omega^2` moves it by `-delta(omega^2) int q_e^3`.
pub fn compatibility_residual(
    q: &Field,
    omega: f64,
    forcing: &SlipForcing,
    geometry: &BoundaryGeometry,
    grid: &Grid,
) -> Result<f64> {
    check_shape(q, geometry, grid)?;
    let data: Vec<f64> = geometry
        .q_e()
        .iter()
        .zip(forcing.f_slip())
        .map(|(qe, f)| qe * (f * f - omega * omega * qe * qe))
        .collect();
    let n = big_n(q, omega, geometry)?;
    Ok(integrate_s(&data, geometry.length()) + tail_moment(&n, grid)[0])
}

/// `int q_e Q(s, psi) ds + int_psi^inf (y - psi) N[Q](y) dy` on every psi node.
/// At `psi = 0` this is [`compatibility_residual`] when `Q(., 0)` carries the
/// boundary data.
pub fn pointwise_identity_profile(
    q: &Field,
    omega: f64,
    geometry: &BoundaryGeometry,
    grid: &Grid,
) -> Result<Vec<f64>> {
    check_shape(q, geometry, grid)?;
    let n = big_n(q, omega, geometry)?;
    let tail = tail_moment(&n, grid);
    Ok((0..grid.n_psi())
        .map(|j| {
            let w: Vec<f64> = geometry.q_e().iter().enumerate().map(|(i, qe)| qe * q.get(i, j)).collect();
            integrate_s(&w, geometry.length()) + tail[j]
        })
        .collect())
}

/// The pointwise identity residual at arbitrary `psi_samples` (linear
/// interpolation between nodes).
pub fn pointwise_identity_residual(
    q: &Field,
    omega: f64,
    geometry: &BoundaryGeometry,
    grid: &Grid,
    psi_samples: &[f64],
) -> Result<Vec<f64>> {
    let profile = pointwise_identity_profile(q, omega, geometry, grid)?;
    let h = grid.h();
    psi_samples
        .iter()
        .map(|&p| {
            if !(0.0..=grid.psi_max()).contains(&p) {
                return Err(Error::InvalidGrid(format!("psi sample {p} outside [0, {}]", grid.psi_max())));
            }
            if let Some(j) = grid.node_index(p) {
                return Ok(profile[j]);
            }
            let j = ((p / h).floor() as usize).min(grid.n_psi() - 2);
            let w = (p - grid.nodes()[j]) / h;
            Ok((1.0 - w) * profile[j] + w * profile[j + 1])
        })
        .collect()
}
