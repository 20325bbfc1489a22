//! Near-wall curvilinear coordinates `(s, z)` and the vector-calculus
//! identities they induce.
//!
//! With `x(s, z) = x(s) + z n(s)`, `J = 1 + z gamma`, `tau' = -gamma n`,
//! `n' = gamma tau` and `D = (u_tau / J) d_s + u_n d_z`:
//!
//! ```text
//! (u.grad u).tau = D u_tau + (gamma/J) u_tau u_n
//! (u.grad u).n   = D u_n   - (gamma/J) u_tau^2
//! div u          = (d_s u_tau + gamma u_n)/J + d_z u_n
//! curl u         = d_s u_n / J - d_z u_tau - (gamma/J) u_tau
//! (Lap u).tau    = d_z(J d_z u_tau)/J + d_s(d_s u_tau / J)/J
//!                  + d_s(gamma u_n / J)/J + (gamma/J^2)(d_s u_n - gamma u_tau)
//! ```
//!
//! Both sides are evaluated by second-order centered differences (Cartesian
//! on the left, nested in `(s, z)` on the right), so the discrepancy of a
//! correct identity decays like `h^2`.

use super::Embedding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdentityKind {
    AdvectionTangential,
    AdvectionNormal,
    LaplacianTangential,
    Divergence,
    Curl,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 5] = [
        IdentityKind::AdvectionTangential,
        IdentityKind::AdvectionNormal,
        IdentityKind::LaplacianTangential,
        IdentityKind::Divergence,
        IdentityKind::Curl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityKind::AdvectionTangential => "advection_tangential",
            IdentityKind::AdvectionNormal => "advection_normal",
            IdentityKind::LaplacianTangential => "laplacian_tangential",
            IdentityKind::Divergence => "divergence",
            IdentityKind::Curl => "curl",
        }
    }
}

/// Largest discrepancy over all probes for one identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub kind: IdentityKind,
    pub max_discrepancy: f64,
}

/// Discrepancies at successively halved steps and the observed orders
/// `log2(d(h) / d(h/2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityOrder {
    pub kind: IdentityKind,
    pub steps: Vec<f64>,
    pub discrepancies: Vec<f64>,
    pub orders: Vec<f64>,
}

type Vf<'a> = &'a dyn Fn([f64; 2]) -> [f64; 2];

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Cartesian evaluation of the five left-hand sides at `x`.
fn cartesian(u: Vf, x: [f64; 2], tau: [f64; 2], n: [f64; 2], h: f64) -> [f64; 5] {
    let at = |dx: f64, dy: f64| u([x[0] + dx, x[1] + dy]);
    let (e, w, no, so, c) = (at(h, 0.0), at(-h, 0.0), at(0.0, h), at(0.0, -h), at(0.0, 0.0));
    let mut d1 = [0.0; 2];
    let mut d2 = [0.0; 2];
    let mut lap = [0.0; 2];
    for k in 0..2 {
        d1[k] = (e[k] - w[k]) / (2.0 * h);
        d2[k] = (no[k] - so[k]) / (2.0 * h);
        lap[k] = (e[k] + w[k] + no[k] + so[k] - 4.0 * c[k]) / (h * h);
    }
    let adv = [c[0] * d1[0] + c[1] * d2[0], c[0] * d1[1] + c[1] * d2[1]];
    [
        dot(adv, tau),
        dot(adv, n),
        dot(lap, tau),
        d1[0] + d2[1],
        d1[1] - d2[0],
    ]
}

/// Curvilinear evaluation of the five right-hand sides at `(s, z)`.
fn curvilinear(u: Vf, emb: &Embedding, s: f64, z: f64, h: f64) -> [f64; 5] {
    // (u_tau, u_n, gamma) at (s, z)
    let comp = |s: f64, z: f64| {
        let f = emb.frame(s);
        let v = u([f.x[0] + z * f.normal[0], f.x[1] + z * f.normal[1]]);
        (dot(v, f.tangent), dot(v, f.normal), f.gamma)
    };
    let jac = |g: f64, z: f64| 1.0 + z * g;
    let (ut, un, g) = comp(s, z);
    let j = jac(g, z);
    let (ut_sp, un_sp, g_sp) = comp(s + h, z);
    let (ut_sm, un_sm, g_sm) = comp(s - h, z);
    let (ut_zp, un_zp, _) = comp(s, z + h);
    let (ut_zm, un_zm, _) = comp(s, z - h);

    let ds_ut = (ut_sp - ut_sm) / (2.0 * h);
    let ds_un = (un_sp - un_sm) / (2.0 * h);
    let dz_ut = (ut_zp - ut_zm) / (2.0 * h);
    let dz_un = (un_zp - un_zm) / (2.0 * h);

    let adv_t = ut / j * ds_ut + un * dz_ut + g / j * ut * un;
    let adv_n = ut / j * ds_un + un * dz_un - g / j * ut * ut;
    let div = (ds_ut + g * un) / j + dz_un;
    let curl = ds_un / j - dz_ut - g / j * ut;

    let zz = (jac(g, z + 0.5 * h) * (ut_zp - ut) - jac(g, z - 0.5 * h) * (ut - ut_zm)) / (h * h);
    let (_, _, g_hp) = comp(s + 0.5 * h, z);
    let (_, _, g_hm) = comp(s - 0.5 * h, z);
    let ss = ((ut_sp - ut) / jac(g_hp, z) - (ut - ut_sm) / jac(g_hm, z)) / (h * h);
    let mixed = (g_sp * un_sp / jac(g_sp, z) - g_sm * un_sm / jac(g_sm, z)) / (2.0 * h);
    let lap_t = zz / j + ss / j + mixed / j + g / (j * j) * (ds_un - g * ut);

    [adv_t, adv_n, lap_t, div, curl]
}

fn check_depths(emb: &Embedding, depths: &[f64]) -> Result<()> {
    let delta = emb.tubular_radius();
    if let Some(&depth) = depths.iter().find(|d| !(d.is_finite() && **d >= 0.0 && **d <= delta)) {
        return Err(Error::CollarTooWide { depth, delta });
    }
    Ok(())
}

/// Compares both sides of every identity at `n_probes` equally spaced arc
/// lengths times each depth in `depths`, using step `h` on both sides.
///
/// Depths must lie in `[0, delta]` with `delta = 0.1 min(1/|gamma|)`.
pub fn curvilinear_identity_check(
    emb: &Embedding,
    u: impl Fn([f64; 2]) -> [f64; 2],
    h: f64,
    depths: &[f64],
    n_probes: usize,
) -> Result<Vec<IdentityResidual>> {
    check_depths(emb, depths)?;
    let len = emb.length();
    let mut worst = [0.0f64; 5];
    for p in 0..n_probes {
        // offset avoids landing only on symmetry points
        let s = len * (p as f64 + 0.37) / n_probes as f64;
        let f = emb.frame(s);
        for &z in depths {
            let x = [f.x[0] + z * f.normal[0], f.x[1] + z * f.normal[1]];
            let lhs = cartesian(&u, x, f.tangent, f.normal, h);
            let rhs = curvilinear(&u, emb, s, z, h);
            for k in 0..5 {
                worst[k] = worst[k].max((lhs[k] - rhs[k]).abs());
            }
        }
    }
    Ok(IdentityKind::ALL
        .iter()
        .zip(worst)
        .map(|(&kind, max_discrepancy)| IdentityResidual { kind, max_discrepancy })
        .collect())
}

/// Runs [`curvilinear_identity_check`] for each step in `steps` and reports
/// the observed convergence orders.
pub fn identity_convergence(
    emb: &Embedding,
    u: impl Fn([f64; 2]) -> [f64; 2],
    steps: &[f64],
    depths: &[f64],
    n_probes: usize,
) -> Result<Vec<IdentityOrder>> {
    let runs = steps
        .iter()
        .map(|&h| curvilinear_identity_check(emb, &u, h, depths, n_probes))
        .collect::<Result<Vec<_>>>()?;
    Ok(IdentityKind::ALL
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let discrepancies: Vec<f64> = runs.iter().map(|r| r[k].max_discrepancy).collect();
            let orders = discrepancies
                .windows(2)
                .zip(steps.windows(2))
                .map(|(d, h)| (d[0] / d[1]).ln() / (h[0] / h[1]).ln())
                .collect();
            IdentityOrder { kind, steps: steps.to_vec(), discrepancies, orders }
        })
        .collect())
}
