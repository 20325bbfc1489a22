//! Boundary data for the boundary-layer problem.
//!
//! A [`BoundaryGeometry`] carries the boundary length `L`, a uniform
//! arc-length grid `s_i = i L / N_s`, and the slip `q_e(s)` of the
//! unit-vorticity Euler flow `u_* = grad^perp psi_*` with `Laplacian psi_* = 1`
//! and `psi_*` constant on the boundary.
//!
//! Curvature convention: `gamma = x1'' x2' - x1' x2''` for the counterclockwise
//! arc-length parametrization, so the unit disk has `gamma = -1` and the
//! near-wall Jacobian is `J(z, s) = 1 + z gamma(s)` with `z` the inward
//! distance. This is the negative of the usual signed curvature.

mod curvilinear;

use std::f64::consts::PI;
use std::io::BufRead;
use std::path::Path;

pub use curvilinear::{
    curvilinear_identity_check, identity_convergence, IdentityKind, IdentityOrder,
    IdentityResidual,
};

use crate::discretization::{dft_s, parse_finite, trig_interpolate, PeriodicMap};
use crate::error::{Error, Result};

/// Boundary embedding of the domains that have one (disk and ellipse).
#[derive(Debug, Clone)]
pub enum Embedding {
    Disk { radius: f64 },
    Ellipse(EllipseArc),
}

/// Position, counterclockwise unit tangent, inward unit normal and curvature
/// `gamma` at one boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFrame {
    pub x: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub gamma: f64,
}

impl Embedding {
    pub fn length(&self) -> f64 {
        match self {
            Embedding::Disk { radius } => 2.0 * PI * radius,
            Embedding::Ellipse(e) => e.perimeter(),
        }
    }

    /// Semi-axes `(A, B)` along `x1` and `x2`.
    pub fn semi_axes(&self) -> (f64, f64) {
        match self {
            Embedding::Disk { radius } => (*radius, *radius),
            Embedding::Ellipse(e) => (e.a, 1.0),
        }
    }

    pub fn frame(&self, s: f64) -> BoundaryFrame {
        match self {
            Embedding::Disk { radius } => {
                let th = s / radius;
                let (sn, cs) = th.sin_cos();
                BoundaryFrame {
                    x: [radius * cs, radius * sn],
                    tangent: [-sn, cs],
                    normal: [-cs, -sn],
                    gamma: -1.0 / radius,
                }
            }
            Embedding::Ellipse(e) => {
                let th = e.theta_of_s(s);
                let (sn, cs) = th.sin_cos();
                let sigma = e.speed(th);
                let tangent = [-e.a * sn / sigma, cs / sigma];
                BoundaryFrame {
                    x: [e.a * cs, sn],
                    tangent,
                    normal: [-tangent[1], tangent[0]],
                    gamma: -e.a / sigma.powi(3),
                }
            }
        }
    }

    /// `x(s, z) = x(s) + z n(s)`.
    pub fn point(&self, s: f64, z: f64) -> [f64; 2] {
        let f = self.frame(s);
        [f.x[0] + z * f.normal[0], f.x[1] + z * f.normal[1]]
    }

    pub fn max_abs_curvature(&self) -> f64 {
        match self {
            Embedding::Disk { radius } => 1.0 / radius,
            // |gamma| = a / sigma^3 with sigma in [min(a,1), max(a,1)]
            Embedding::Ellipse(e) => e.a / e.a.min(1.0).powi(3),
        }
    }

    /// Collar depth used for identity checks: `0.1 min(1/|gamma|)`.
    pub fn tubular_radius(&self) -> f64 {
        0.1 / self.max_abs_curvature()
    }

    /// Unit-vorticity stream function `psi_*`.
    pub fn stream_function(&self, x: [f64; 2]) -> f64 {
        let (a, b) = self.semi_axes();
        let c = a * a * b * b / (2.0 * (a * a + b * b));
        c * (x[0] * x[0] / (a * a) + x[1] * x[1] / (b * b))
    }

    /// `u_* = grad^perp psi_* = (-d2 psi_*, d1 psi_*)`.
    pub fn euler_velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = self.semi_axes();
        let c = a * a * b * b / (2.0 * (a * a + b * b));
        let dx = 2.0 * c * x[0] / (a * a);
        let dy = 2.0 * c * x[1] / (b * b);
        [-dy, dx]
    }
}

/// Arc length of the ellipse `x = a cos(theta), y = sin(theta)`.
///
/// `s(theta)` is the antiderivative of the speed
/// `sigma(theta) = sqrt(a^2 sin^2 + cos^2)`, computed from its Fourier series
/// (exact to rounding once the series is resolved); `theta(s)` is obtained by
/// safeguarded Newton inversion.
#[derive(Debug, Clone)]
pub struct EllipseArc {
    a: f64,
    map: PeriodicMap,
}

impl EllipseArc {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidGeometry(format!("semi-axis ratio must be positive, got {a}")));
        }
        let speed = |th: f64| (a * a * th.sin().powi(2) + th.cos().powi(2)).sqrt();
        let mut m = 64;
        loop {
            let samples: Vec<f64> = (0..m).map(|k| speed(2.0 * PI * k as f64 / m as f64)).collect();
            let c = dft_s(&samples);
            let tail = c[m / 4..=m / 2].iter().map(|z| z.norm()).fold(0.0, f64::max);
            if tail <= 1e-16 * c[0].re || m >= 1024 {
                let map = PeriodicMap::from_speed(&samples, 2.0 * PI)?;
                return Ok(Self { a, map });
            }
            m *= 2;
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn perimeter(&self) -> f64 {
        self.map.period_t()
    }

    pub fn speed(&self, theta: f64) -> f64 {
        (self.a * self.a * theta.sin().powi(2) + theta.cos().powi(2)).sqrt()
    }

    pub fn s_of_theta(&self, theta: f64) -> f64 {
        self.map.eval(theta)
    }

    pub fn theta_of_s(&self, s: f64) -> f64 {
        self.map.inverse(s)
    }
}

/// Periodic boundary data on a uniform arc-length grid.
#[derive(Debug, Clone)]
pub struct BoundaryGeometry {
    length: f64,
    s_grid: Vec<f64>,
    q_e: Vec<f64>,
    curvature: Option<Vec<f64>>,
    embedding: Option<Embedding>,
}

fn check_count(n: usize) -> Result<()> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGeometry(format!(
            "sample count must be even and at least 8, got {n}"
        )));
    }
    Ok(())
}

fn uniform_grid(length: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * length / n as f64).collect()
}

impl BoundaryGeometry {
    fn from_embedding(embedding: Embedding, n_s: usize) -> Result<Self> {
        check_count(n_s)?;
        let length = embedding.length();
        let s_grid = uniform_grid(length, n_s);
        let mut q_e = Vec::with_capacity(n_s);
        let mut curvature = Vec::with_capacity(n_s);
        for &s in &s_grid {
            let f = embedding.frame(s);
            let u = embedding.euler_velocity(f.x);
            q_e.push(u[0] * f.tangent[0] + u[1] * f.tangent[1]);
            curvature.push(f.gamma);
        }
        let g = Self { length, s_grid, q_e, curvature: Some(curvature), embedding: Some(embedding) };
        g.check_slip()?;
        Ok(g)
    }

    fn check_slip(&self) -> Result<()> {
        if let Some((index, &value)) =
            self.q_e.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::SlipVanishes { index, value });
        }
        Ok(())
    }

    pub fn n_s(&self) -> usize {
        self.s_grid.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn ds(&self) -> f64 {
        self.length / self.n_s() as f64
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s_grid
    }

    pub fn q_e(&self) -> &[f64] {
        &self.q_e
    }

    pub fn curvature(&self) -> Option<&[f64]> {
        self.curvature.as_deref()
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    pub fn min_q_e(&self) -> f64 {
        self.q_e.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_q_e(&self) -> f64 {
        self.q_e.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// s-average of `q_e`.
    pub fn mean_q_e(&self) -> f64 {
        self.q_e.iter().sum::<f64>() / self.n_s() as f64
    }

    /// `int_0^L q_e^3 ds`.
    pub fn q_e_cubed_integral(&self) -> f64 {
        self.q_e.iter().map(|q| q * q * q).sum::<f64>() * self.ds()
    }

    /// Trigonometric interpolant of `q_e` at arbitrary arc lengths.
    pub fn q_e_at(&self, s: &[f64]) -> Vec<f64> {
        trig_interpolate(&self.q_e, self.length, s)
    }

    /// Same boundary with the parametrization origin moved forward by `shift`
    /// grid cells; curvature and embedding are dropped.
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.n_s();
        let q_e = (0..n).map(|i| self.q_e[(i + shift) % n]).collect();
        Self {
            length: self.length,
            s_grid: self.s_grid.clone(),
            q_e,
            curvature: self.curvature.as_ref().map(|c| (0..n).map(|i| c[(i + shift) % n]).collect()),
            embedding: None,
        }
    }
}

/// Disk of radius `radius`: `q_e = R/2`, `L = 2 pi R`, `gamma = -1/R`.
pub fn disk_geometry(radius: f64, n_s: usize) -> Result<BoundaryGeometry> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidGeometry(format!("radius must be positive, got {radius}")));
    }
    let mut g = BoundaryGeometry::from_embedding(Embedding::Disk { radius }, n_s)?;
    // exact constants; the frame evaluation only agrees to rounding
    g.q_e.iter_mut().for_each(|q| *q = 0.5 * radius);
    Ok(g)
}

/// Ellipse `x^2/a^2 + y^2 = 1` resampled on a uniform arc-length grid.
pub fn ellipse_geometry(a: f64, n_s: usize) -> Result<BoundaryGeometry> {
    check_count(n_s)?;
    let arc = EllipseArc::new(a)?;
    BoundaryGeometry::from_embedding(Embedding::Ellipse(arc), n_s)
}

/// Tabulated slip on a uniform grid of the given length; no curvature.
pub fn custom_geometry(length: f64, q_e: Vec<f64>) -> Result<BoundaryGeometry> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidGeometry(format!("length must be positive, got {length}")));
    }
    check_count(q_e.len())?;
    let g = BoundaryGeometry {
        length,
        s_grid: uniform_grid(length, q_e.len()),
        q_e,
        curvature: None,
        embedding: None,
    };
    g.check_slip()?;
    Ok(g)
}

/// Parses a tabulated geometry: a header line `L <value>` followed by one
/// `q_e` sample per line. Blank lines are ignored; anything else that is not
/// a finite number is rejected.
pub fn parse_geometry<R: BufRead>(input: R) -> Result<BoundaryGeometry> {
    let mut length = None;
    let mut samples = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse(format!("geometry line {}: {msg}", lineno + 1));
        match length {
            None => {
                let mut parts = t.split_whitespace();
                if parts.next() != Some("L") {
                    return Err(err("expected header `L <value>`".into()));
                }
                let v = parts.next().ok_or_else(|| err("missing length".into()))?;
                if parts.next().is_some() {
                    return Err(err("trailing tokens after length".into()));
                }
                length = Some(parse_finite(v).map_err(err)?);
            }
            Some(_) => samples.push(parse_finite(t).map_err(err)?),
        }
    }
    let length = length.ok_or_else(|| Error::Parse("geometry file is empty".into()))?;
    custom_geometry(length, samples)
}

pub fn load_geometry(path: &Path) -> Result<BoundaryGeometry> {
    let f = std::fs::File::open(path)?;
    parse_geometry(std::io::BufReader::new(f))
}

/// Residuals of the unit-vorticity Euler solution on an ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVorticityReport {
    /// `max |Laplacian psi_* - 1|` over boundary samples and interior probes.
    pub laplacian: f64,
    /// `max |u_* . n|` over boundary samples.
    pub normal_flux: f64,
    pub max_residual: f64,
    pub passed: bool,
}

/// Checks by centered differences that `psi_*` on the ellipse with ratio `a`
/// has unit Laplacian and that `u_*` is tangent to the boundary.
pub fn verify_unit_vorticity(a: f64, tol: f64) -> Result<UnitVorticityReport> {
    let emb = Embedding::Ellipse(EllipseArc::new(a)?);
    // psi_* is quadratic, so any step is exact up to rounding
    let h = 0.25 * a.min(1.0);
    let psi = |x: [f64; 2]| emb.stream_function(x);
    let lap = |x: [f64; 2]| {
        (psi([x[0] + h, x[1]]) + psi([x[0] - h, x[1]]) + psi([x[0], x[1] + h]) + psi([x[0], x[1] - h])
            - 4.0 * psi(x))
            / (h * h)
    };
    let vel = |x: [f64; 2]| {
        let dx = (psi([x[0] + h, x[1]]) - psi([x[0] - h, x[1]])) / (2.0 * h);
        let dy = (psi([x[0], x[1] + h]) - psi([x[0], x[1] - h])) / (2.0 * h);
        [-dy, dx]
    };
    let mut laplacian: f64 = 0.0;
    let mut normal_flux: f64 = 0.0;
    let n = 256;
    for k in 0..n {
        let th = 2.0 * PI * (k as f64 + 0.25) / n as f64;
        let x = [a * th.cos(), th.sin()];
        // outward normal of x^2/a^2 + y^2 = 1
        let g = [x[0] / (a * a), x[1]];
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let u = vel(x);
        normal_flux = normal_flux.max(((u[0] * g[0] + u[1] * g[1]) / gn).abs());
        laplacian = laplacian.max((lap(x) - 1.0).abs());
        for r in [0.0, 0.3, 0.6, 0.9] {
            laplacian = laplacian.max((lap([r * x[0], r * x[1]]) - 1.0).abs());
        }
    }
    let max_residual = laplacian.max(normal_flux);
    Ok(UnitVorticityReport { laplacian, normal_flux, max_residual, passed: max_residual < tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_data() {
        let g = disk_geometry(1.0, 64).unwrap();
        assert!((g.length() - 2.0 * PI).abs() < 1e-15);
        assert!(g.q_e().iter().all(|q| *q == 0.5));
        assert!(g.curvature().unwrap().iter().all(|c| (c + 1.0).abs() < 1e-15));
        let g2 = disk_geometry(2.0, 64).unwrap();
        assert!(g2.q_e().iter().all(|q| *q == 1.0));
        assert!((g2.length() - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn disk_rejects_bad_input() {
        assert!(disk_geometry(0.0, 64).is_err());
        assert!(disk_geometry(-1.0, 64).is_err());
        assert!(disk_geometry(1.0, 63).is_err());
        assert!(disk_geometry(1.0, 6).is_err());
    }

    #[test]
    fn uniform_spacing_is_exact() {
        for g in [disk_geometry(1.5, 32).unwrap(), ellipse_geometry(2.0, 64).unwrap()] {
            for (i, s) in g.s_grid().iter().enumerate() {
                assert_eq!(*s, i as f64 * g.length() / g.n_s() as f64);
            }
        }
    }

    #[test]
    fn ellipse_with_unit_ratio_is_the_unit_disk() {
        let e = ellipse_geometry(1.0, 64).unwrap();
        let d = disk_geometry(1.0, 64).unwrap();
        for (a, b) in e.q_e().iter().zip(d.q_e()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((e.length() - d.length()).abs() < 1e-12);
    }

    #[test]
    fn ellipse_slip_extremes_and_closed_form() {
        let a: f64 = 2.0;
        let g = ellipse_geometry(a, 128).unwrap();
        assert!((g.min_q_e() - 0.4).abs() < 1e-12);
        assert!((g.q_e()[0] - 0.4).abs() < 1e-12);
        // s = L/4 is theta = pi/2 by symmetry
        assert!((g.q_e()[32] - 0.8).abs() < 1e-12);
        assert!((g.max_q_e() - 0.8).abs() < 1e-12);
        let Some(Embedding::Ellipse(arc)) = g.embedding() else { panic!() };
        for &s in g.s_grid() {
            let th = arc.theta_of_s(s);
            let closed = a / (1.0 + a * a) * (a * a * th.sin().powi(2) + th.cos().powi(2)).sqrt();
            let i = (s / g.ds()).round() as usize;
            assert!((g.q_e()[i] - closed).abs() < 1e-13);
        }
    }

    /// Composite Simpson on the arc-length integrand, Richardson-refined.
    fn perimeter_oracle(a: f64) -> f64 {
        let simpson = |n: usize| {
            let h = 2.0 * PI / n as f64;
            let f = |t: f64| (a * a * t.sin().powi(2) + t.cos().powi(2)).sqrt();
            let mut acc = f(0.0) + f(2.0 * PI);
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
            }
            acc * h / 3.0
        };
        let (c, f) = (simpson(200), simpson(400));
        f + (f - c) / 15.0
    }

    #[test]
    fn ellipse_perimeter() {
        let g = ellipse_geometry(2.0, 128).unwrap();
        assert!((g.length() - 9.6884).abs() < 1e-3);
        assert!((g.length() - perimeter_oracle(2.0)).abs() < 1e-10);
        let g2 = ellipse_geometry(2.0, 256).unwrap();
        assert!((g.length() - g2.length()).abs() < 1e-12);
        let g3 = ellipse_geometry(0.3, 64).unwrap();
        assert!((g3.length() - perimeter_oracle(0.3)).abs() < 1e-9);
    }

    #[test]
    fn ellipse_curvature_matches_formula_on_axes() {
        let g = ellipse_geometry(2.0, 128).unwrap();
        let c = g.curvature().unwrap();
        // theta = 0: sigma = 1, gamma = -a; theta = pi/2: sigma = a, gamma = -1/a^2
        assert!((c[0] + 2.0).abs() < 1e-12);
        assert!((c[32] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn custom_geometry_validation() {
        let l = 2.0 * PI;
        let g = custom_geometry(l, vec![0.5; 64]).unwrap();
        assert!(g.curvature().is_none());
        let s = uniform_grid(l, 64);
        let q: Vec<f64> = s.iter().map(|s| 0.5 + 0.1 * s.cos()).collect();
        let g = custom_geometry(l, q).unwrap();
        assert!((g.min_q_e() - 0.4).abs() < 1e-15);
        let mut q = vec![0.5; 64];
        q[10] = 0.0;
        let err = custom_geometry(l, q).unwrap_err();
        assert!(err.to_string().contains("slip vanishes"));
        assert!(custom_geometry(l, vec![0.5; 7]).is_err());
    }

    #[test]
    fn geometry_file_parsing() {
        let mut text = String::from("L 6.283185307179586\n");
        for _ in 0..8 {
            text.push_str("0.5\n");
        }
        let g = parse_geometry(text.as_bytes()).unwrap();
        assert_eq!(g.n_s(), 8);
        assert!(parse_geometry("L 1\n0.5\nNaN\n0.5\n0.5\n0.5\n0.5\n0.5\n0.5\n".as_bytes()).is_err());
        assert!(parse_geometry("L inf\n".as_bytes()).is_err());
        assert!(parse_geometry("0.5\n".as_bytes()).is_err());
        assert!(parse_geometry("L 1 2\n".as_bytes()).is_err());
    }

    #[test]
    fn unit_vorticity_residuals() {
        for (a, tol) in [(1.0, 1e-8), (2.0, 1e-8), (3.0, 1e-10)] {
            let r = verify_unit_vorticity(a, tol).unwrap();
            assert!(r.passed, "a = {a}: {r:?}");
        }
    }

    #[test]
    fn rotation_shifts_slip() {
        let g = ellipse_geometry(2.0, 16).unwrap().rotated(3);
        let h = ellipse_geometry(2.0, 16).unwrap();
        assert_eq!(g.q_e()[0], h.q_e()[3]);
        assert!(g.embedding().is_none());
    }
}
