//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use prandtl_core::discretization::tail_moment;
use prandtl_core::geometry::{
    disk_geometry, ellipse_geometry, identity_convergence, verify_unit_vorticity, EllipseArc, Embedding,
};
use prandtl_core::iteration::big_n;
use prandtl_core::linear_solver::solve_mode;
use prandtl_core::norms::pointwise_identity_residual;
use prandtl_core::oracle::{shoot_omega, MarchConfig};
use prandtl_core::run::{parse_config, run, RunOptions};
use prandtl_core::{
    picard_solve, solve_linear, xkm_norm, BoundaryGeometry, Field, Grid, LinearProblem, NormSpec, PicardOptions,
    PicardSolution, SlipForcing,
};

const DISK_EPS: [f64; 3] = [0.01, 0.05, 0.1];
const SWEEP_EPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
const IDENTITY_PSI: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct Run {
    geom: BoundaryGeometry,
    forcing: SlipForcing,
    sol: PicardSolution,
    seconds: f64,
}

fn solve(geom: BoundaryGeometry, eps: f64) -> Run {
    let forcing = SlipForcing::from_coefficients(&geom, eps, 0.0, &[1.0], &[]).unwrap();
    let t = Instant::now();
    let sol = picard_solve(&geom, &forcing, &Grid::default(), &PicardOptions::default()).unwrap();
    Run { geom, forcing, sol, seconds: t.elapsed().as_secs_f64() }
}

/// s-derivative by a direct O(N^2) trigonometric sum.
fn ds_direct(col: &[f64], period: f64) -> Vec<f64> {
    let n = col.len();
    let half = n / 2;
    let mut out = vec![0.0; n];
    for k in 1..half {
        let (mut a, mut b) = (0.0, 0.0);
        for (i, v) in col.iter().enumerate() {
            let x = 2.0 * PI * (k * i) as f64 / n as f64;
            a += v * x.cos();
            b += v * x.sin();
        }
        let (a, b) = (2.0 * a / n as f64, 2.0 * b / n as f64);
        let w = 2.0 * PI * k as f64 / period;
        for (i, o) in out.iter_mut().enumerate() {
            let x = 2.0 * PI * (k * i) as f64 / n as f64;
            *o += w * (-a * x.sin() + b * x.cos());
        }
    }
    out
}

/// `int q_e (f^2 - omega^2 q_e^2) ds + int y N dy`, recomputed from scratch.
fn independent_compatibility(r: &Run, grid: &Grid) -> f64 {
    let (q, geom, omega) = (&r.sol.q, &r.geom, r.sol.state.omega0);
    let (n_s, l) = (geom.n_s(), geom.length());
    let ds = l / n_s as f64;
    let mut big_n = vec![0.0; grid.n_psi()];
    for (j, nj) in big_n.iter_mut().enumerate() {
        let col = q.column(j);
        let d = ds_direct(&col, l);
        let mut acc = 0.0;
        for i in 0..n_s {
            let a = omega * geom.q_e()[i];
            acc += (1.0 - a / (a * a + col[i]).sqrt()) * d[i] * ds;
        }
        *nj = acc / omega;
    }
    let h = grid.h();
    let moment: f64 = (0..grid.n_psi() - 1)
        .map(|j| 0.5 * h * (grid.nodes()[j] * big_n[j] + grid.nodes()[j + 1] * big_n[j + 1]))
        .sum();
    let data: f64 = (0..n_s)
        .map(|i| {
            let (qe, f) = (geom.q_e()[i], r.forcing.f_slip()[i]);
            qe * (f * f - omega * omega * qe * qe) * ds
        })
        .sum();
    data + moment
}

fn leading_squared(r: &Run) -> f64 {
    let num: f64 = r.geom.q_e().iter().zip(r.forcing.f_slip()).map(|(q, f)| q * f * f).sum();
    let den: f64 = r.geom.q_e().iter().map(|q| q.powi(3)).sum();
    num / den
}

fn sci(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", "))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn c1_wood(disk: &[Run]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, eps) in disk.iter().zip(DISK_EPS) {
        let exact = (1.0 + 2.0 * eps * eps).sqrt();
        let err = (r.sol.state.omega0 - exact).abs();
        let omega_iter = r.sol.trace.rows.iter().position(|row| (row.omega0 - exact).abs() < 1e-8).map(|k| k + 1);
        ok &= err < 1e-8 && omega_iter.is_some_and(|k| k <= 3) && r.seconds < 5.0 && r.sol.trace.converged;
        parts.push(format!(
            "eps={eps}: |err|={err:.1e}, omega0 converged at iteration {}, Q tolerance after {} iterations, {:.2}s",
            omega_iter.map_or("-".into(), |k| k.to_string()),
            r.sol.trace.iterations(),
            r.seconds
        ));
    }
    outcome(ok, parts.join("; "))
}

fn c2_disk_nonlinearity(disk: &[Run]) -> Outcome {
    let worst = disk
        .iter()
        .map(|r| big_n(&r.sol.q, r.sol.state.omega0, &r.geom).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0f64, f64::max);
    outcome(worst < 1e-11, format!("max |N| = {worst:.2e} (tol 1e-11)"))
}

fn c3_leading_order(sweep: &[Run], seconds: f64) -> Outcome {
    let errs: Vec<f64> = sweep.iter().map(|r| r.sol.state.omega0.powi(2) - leading_squared(r)).collect();
    let p = slope(&SWEEP_EPS, &errs);
    outcome(
        (p - 2.0).abs() <= 0.3 && seconds < 120.0,
        format!("slope {p:.4} (2.0 +- 0.3), |omega_err| = {}, sweep {seconds:.2}s", sci(&errs)),
    )
}

fn c4_smallness(sweep: &[Run]) -> Outcome {
    let grid = Grid::default();
    let norms: Vec<f64> =
        sweep.iter().map(|r| xkm_norm(&r.sol.q, NormSpec::X14, &grid, r.geom.length()).unwrap()).collect();
    let x250: Vec<f64> = sweep
        .iter()
        .map(|r| prandtl_core::norms::xkm_report(&r.sol.q, NormSpec::X250, &grid, r.geom.length()).unwrap().log_value)
        .collect();
    let p = slope(&SWEEP_EPS, &norms);
    outcome(
        (p - 1.0).abs() <= 0.1,
        format!("slope {p:.4} (1.0 +- 0.1), X14 = {norms:.4?}, ln X250 = {x250:.2?}"),
    )
}

fn c5_compatibility(all: &[&Run]) -> Outcome {
    let grid = Grid::default();
    let (mut worst_c, mut worst_i, mut worst_p) = (0.0f64, 0.0f64, 0.0f64);
    for r in all {
        let last = r.sol.trace.rows.last().unwrap();
        worst_c = worst_c.max(last.compatibility_residual.abs());
        worst_i = worst_i.max(independent_compatibility(r, &grid).abs());
        let p = pointwise_identity_residual(&r.sol.q, r.sol.state.omega0, &r.geom, &grid, &IDENTITY_PSI).unwrap();
        worst_p = p.iter().fold(worst_p, |m, v| m.max(v.abs()));
    }
    let ok = all.iter().all(|r| r.sol.trace.converged) && worst_c < 1e-8 && worst_i < 1e-8 && worst_p < 1e-7;
    outcome(
        ok,
        format!(
            "{} runs: residual {worst_c:.1e} (independent {worst_i:.1e}, tol 1e-8), pointwise {worst_p:.1e} (tol 1e-7)",
            all.len()
        ),
    )
}

fn c6_oracle() -> Outcome {
    let t = Instant::now();
    let grid = Grid::default();
    let cfg = MarchConfig::default();
    let eps = 1e-2;
    let disk = solve(disk_geometry(1.0, 128).unwrap(), eps);
    let ell = solve(ellipse_geometry(2.0, 128).unwrap(), eps);
    let (d, e) = rayon::join(
        || shoot_omega(&disk.forcing, &disk.geom, &grid, &cfg).unwrap(),
        || shoot_omega(&ell.forcing, &ell.geom, &grid, &cfg).unwrap(),
    );
    let exact = (1.0f64 + 2.0 * eps * eps).sqrt();
    let d_closed = (d.omega0 - exact).abs();
    let d_picard = (d.omega0 - disk.sol.state.omega0).abs();
    let e_picard = (e.omega0 - ell.sol.state.omega0).abs();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        d_closed < 1e-6 && d_picard < 1e-6 && e_picard < 1e-6 && secs < 300.0,
        format!(
            "disk |oracle-closed| {d_closed:.1e}, |oracle-picard| {d_picard:.1e}; ellipse |oracle-picard| {e_picard:.1e}; {secs:.1}s"
        ),
    )
}

fn c7_contraction(sweep: &[Run]) -> Outcome {
    let max_ratio = sweep
        .iter()
        .flat_map(|r| r.sol.trace.contraction_ratios.iter().copied())
        .fold(0.0f64, f64::max);
    let first: Vec<f64> = sweep.iter().map(|r| r.sol.trace.contraction_ratios[0]).collect();
    let decreasing = first.windows(2).all(|w| w[1] < w[0]);
    outcome(
        max_ratio <= 0.5 && decreasing,
        format!("max ratio {max_ratio:.3e} (<= 0.5), first ratio per eps {} (decreasing: {decreasing})", sci(&first)),
    )
}

/// Adds `kappa e^{-psi}` to `F` so the discrete compatibility holds exactly.
fn make_compatible(p: &mut LinearProblem, grid: &Grid) {
    let e: Vec<f64> = grid.nodes().iter().map(|y| (-y).exp()).collect();
    let te = tail_moment(&e, grid)[0];
    let kappa = -p.omega * p.compatibility_residual(grid) / (p.geometry.length() * te);
    for i in 0..p.f.n_s() {
        for (j, ej) in e.iter().enumerate() {
            let v = p.f.get(i, j) + kappa * ej;
            p.f.set(i, j, v);
        }
    }
}

fn mms_error(geom: &BoundaryGeometry, n_psi: usize, omega: f64) -> f64 {
    let grid = Grid::uniform(n_psi, 30.0).unwrap();
    let k = 2.0 * PI / geom.length();
    let exact = |s: f64, y: f64| (-y).exp() * (1.0 + 0.5 * (k * s).cos());
    let f = Field::from_fn(geom.n_s(), n_psi, |i, j| {
        let (s, y) = (geom.s_grid()[i], grid.nodes()[j]);
        -0.5 * k * (k * s).sin() * (-y).exp() - omega * geom.q_e()[i] * exact(s, y)
    });
    let b = geom.s_grid().iter().map(|&s| exact(s, 0.0)).collect();
    let mut p = LinearProblem { geometry: geom, omega, f, g: None, b };
    make_compatible(&mut p, &grid);
    let q = solve_linear(&p, &grid).unwrap();
    let mut err: f64 = 0.0;
    for i in 0..geom.n_s() {
        for j in 0..n_psi {
            err = err.max((q.get(i, j) - exact(geom.s_grid()[i], grid.nodes()[j])).abs());
        }
    }
    err
}

fn c8_linear_solver() -> Outcome {
    let mut orders = Vec::new();
    for (geom, omega) in [(disk_geometry(1.0, 32).unwrap(), 1.0), (ellipse_geometry(2.0, 64).unwrap(), 0.9)] {
        let errs: Vec<f64> = [151, 301, 601].iter().map(|&n| mms_error(&geom, n, omega)).collect();
        orders.extend(errs.windows(2).map(|w| (w[0] / w[1]).log2()));
    }
    let grid = Grid::default();
    let zero = vec![Complex64::new(0.0, 0.0); grid.n_psi()];
    let mut kernel: f64 = 0.0;
    for xi in [0.5, 1.0, 2.0, 8.0, 17.0, -3.0] {
        let v = solve_mode(xi, Complex64::new(1.0, 0.0), &zero, &grid).unwrap();
        for (vj, psi) in v.iter().zip(grid.nodes()) {
            kernel = kernel.max((vj.norm() - (-(xi.abs() / 2.0).sqrt() * psi).exp()).abs());
        }
    }
    let ok = orders.iter().all(|p| (p - 2.0).abs() <= 0.2) && kernel < 1e-10;
    outcome(ok, format!("MMS orders {orders:.3?} (2.0 +- 0.2), kernel |V| error {kernel:.1e} (tol 1e-10)"))
}

fn identity_field(x: [f64; 2]) -> [f64; 2] {
    [
        (1.3 * x[0] + 0.4 * x[1]).sin() + 0.3 * x[0] * x[1] * x[1],
        (0.7 * x[0] - 1.1 * x[1]).cos() + 0.2 * x[0].powi(3),
    ]
}

fn c9_identities() -> Outcome {
    let steps = [0.02, 0.01, 0.005];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for emb in [Embedding::Disk { radius: 1.0 }, Embedding::Ellipse(EllipseArc::new(2.0).unwrap())] {
        let depth = 0.5 * emb.tubular_radius();
        for o in identity_convergence(&emb, identity_field, &steps, &[0.0, depth], 16).unwrap() {
            count += 1;
            worst = o.orders.iter().fold(worst, |m, p| m.max((p - 2.0).abs()));
        }
    }
    let uv = verify_unit_vorticity(2.0, 1e-10).unwrap();
    outcome(
        worst <= 0.2 && uv.max_residual < 1e-10,
        format!(
            "{count} identity checks, max |order - 2| = {worst:.3} (<= 0.2); unit-vorticity residual {:.1e} (tol 1e-10)",
            uv.max_residual
        ),
    )
}

fn c10_trivial(all: &[&Run]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for geom in [disk_geometry(1.0, 128).unwrap(), ellipse_geometry(2.0, 128).unwrap()] {
        let r = solve(geom, 0.0);
        let (w, q) = (r.sol.state.omega0, r.sol.q.max_abs());
        ok &= (w - 1.0).abs() <= 1e-10 && q <= 1e-10;
        parts.push(format!("omega0-1 = {:.1e}, max|Q| = {q:.1e}", w - 1.0));
    }
    let min_omega = all.iter().map(|r| r.sol.state.omega0).fold(f64::INFINITY, f64::min);
    ok &= min_omega > 0.0;
    outcome(ok, format!("eps=0: {}; min omega0 over all runs {min_omega:.6}", parts.join(", ")))
}

fn c11_determinism() -> Outcome {
    let text = "mode = \"sweep\"\n[geometry]\nkind = \"ellipse\"\na = 2.0\n[forcing]\ncos = [1.0]\n[sweep]\nepsilons = [1e-2, 5e-3, 2.5e-3]\n";
    let config = parse_config(text).unwrap();
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, workers) in dirs.iter().zip([Some(1), Some(3), None]) {
        run(&config, &RunOptions { output_dir: Some(d.path().to_path_buf()), workers, dry: false }).unwrap();
    }
    let mut names: Vec<String> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        let base = fs::read(dirs[0].path().join(name)).unwrap();
        for d in &dirs[1..] {
            if fs::read(d.path().join(name)).ok().as_deref() != Some(&base[..]) {
                differing.push(name.clone());
            }
        }
    }
    outcome(
        differing.is_empty() && names.len() >= 5,
        format!("{} files compared across 3 runs (1, 3, default workers); differing: {differing:?}", names.len()),
    )
}

fn main() -> ExitCode {
    let disk: Vec<Run> = DISK_EPS.iter().map(|&e| solve(disk_geometry(1.0, 128).unwrap(), e)).collect();
    let t = Instant::now();
    let sweep: Vec<Run> = SWEEP_EPS.iter().map(|&e| solve(ellipse_geometry(2.0, 128).unwrap(), e)).collect();
    let sweep_secs = t.elapsed().as_secs_f64();
    let all: Vec<&Run> = disk.iter().chain(&sweep).collect();

    let results = [
        ("wood_disk_exactness", c1_wood(&disk)),
        ("disk_nonlinearity_vanishes", c2_disk_nonlinearity(&disk)),
        ("leading_order_vorticity", c3_leading_order(&sweep, sweep_secs)),
        ("solution_smallness", c4_smallness(&sweep)),
        ("compatibility_at_convergence", c5_compatibility(&all)),
        ("oracle_equivalence", c6_oracle()),
        ("empirical_contraction", c7_contraction(&sweep)),
        ("linear_solver_verification", c8_linear_solver()),
        ("curvilinear_identities", c9_identities()),
        ("sign_and_trivial_cases", c10_trivial(&all)),
        ("determinism", c11_determinism()),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("{} [{:>2}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
