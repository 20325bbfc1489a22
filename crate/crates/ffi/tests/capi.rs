use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use prandtl_ffi::*;

fn message() -> String {
    let p = prandtl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cos_g(n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

#[test]
fn disk_solve_matches_closed_form() {
    let n = 128;
    let mut geom = ptr::null_mut();
    assert_eq!(prandtl_geometry_disk(1.0, n, &mut geom), PrandtlStatus::Ok);
    unsafe {
        assert_eq!(prandtl_geometry_n_s(geom), n);
        assert!((prandtl_geometry_length(geom) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        let eps = 0.05;
        let g = cos_g(n);
        let mut sol = ptr::null_mut();
        assert_eq!(prandtl_solve(geom, eps, g.as_ptr(), n, ptr::null(), &mut sol), PrandtlStatus::Ok);
        let omega = prandtl_solution_omega0(sol);
        assert!((omega - (1.0f64 + 2.0 * eps * eps).sqrt()).abs() < 1e-8, "{omega}");

        let f: Vec<f64> = g.iter().map(|v| 0.5 + eps * v).collect();
        let wood = prandtl_wood_disk(f.as_ptr(), n, 1.0);
        assert!((wood - omega).abs() < 1e-8);
        let mut lead = 0.0;
        assert_eq!(prandtl_fl_leading(geom, f.as_ptr(), n, &mut lead), PrandtlStatus::Ok);
        assert!((lead - wood).abs() < 1e-12);

        let (mut ns, mut np) = (0, 0);
        assert_eq!(prandtl_solution_shape(sol, &mut ns, &mut np), PrandtlStatus::Ok);
        assert_eq!((ns, np), (n, 301));
        let mut q = vec![0.0; ns * np];
        assert_eq!(prandtl_solution_field(sol, q.as_mut_ptr(), q.len() - 1), PrandtlStatus::BufferTooSmall);
        assert_eq!(prandtl_solution_field(sol, q.as_mut_ptr(), q.len()), PrandtlStatus::Ok);
        // boundary row carries f^2 - omega^2 q_e^2
        assert!((q[0] - (f[0] * f[0] - omega * omega * 0.25)).abs() < 1e-12);
        assert!(q[np - 1].abs() < 1e-12);

        let (mut star, mut err) = (0.0, 0.0);
        assert_eq!(prandtl_solution_omega_bar(sol, &mut star, &mut err), PrandtlStatus::Ok);
        assert!((1.0 - omega * omega - eps * (star + err)).abs() < 1e-12);
        assert!(prandtl_solution_iterations(sol) >= 1);

        prandtl_solution_free(sol);
        prandtl_geometry_free(geom);
    }
}

#[test]
fn ellipse_and_custom_geometries() {
    let mut geom = ptr::null_mut();
    assert_eq!(prandtl_geometry_ellipse(2.0, 64, &mut geom), PrandtlStatus::Ok);
    let mut q = vec![0.0; 64];
    unsafe {
        assert_eq!(prandtl_geometry_q_e(geom, q.as_mut_ptr(), 64), PrandtlStatus::Ok);
        prandtl_geometry_free(geom);
    }
    assert!(q.iter().all(|v| *v > 0.0));

    let mut custom = ptr::null_mut();
    unsafe {
        assert_eq!(prandtl_geometry_custom(9.0, q.as_ptr(), 64, &mut custom), PrandtlStatus::Ok);
        assert_eq!(prandtl_geometry_n_s(custom), 64);
        prandtl_geometry_free(custom);
    }
}

#[test]
fn errors_are_reported() {
    let mut geom = ptr::null_mut();
    assert_eq!(prandtl_geometry_disk(-1.0, 64, &mut geom), PrandtlStatus::InvalidGeometry);
    assert!(geom.is_null());
    assert!(!message().is_empty());
    assert_eq!(prandtl_geometry_disk(1.0, 64, ptr::null_mut()), PrandtlStatus::NullPointer);
    assert!(message().contains("null"));

    assert_eq!(prandtl_geometry_disk(1.0, 64, &mut geom), PrandtlStatus::Ok);
    let g = cos_g(64);
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(prandtl_solve(geom, -0.1, g.as_ptr(), 64, ptr::null(), &mut sol), PrandtlStatus::InvalidArgument);
        assert!(message().contains("epsilon must be nonnegative"));
        assert_eq!(prandtl_solve(geom, 0.1, g.as_ptr(), 32, ptr::null(), &mut sol), PrandtlStatus::InvalidArgument);
        // slip q_e + eps g = 0.5 + 1.0 cos vanishes
        assert_eq!(prandtl_solve(geom, 1.0, g.as_ptr(), 64, ptr::null(), &mut sol), PrandtlStatus::InvalidGeometry);
        let mut opts = prandtl_options_default();
        opts.psi_max = 5.0;
        assert_eq!(prandtl_solve(geom, 0.01, g.as_ptr(), 64, &opts, &mut sol), PrandtlStatus::InvalidArgument);
        assert!(sol.is_null());
        assert_eq!(prandtl_solve(ptr::null(), 0.01, g.as_ptr(), 64, ptr::null(), &mut sol), PrandtlStatus::NullPointer);
        assert!(prandtl_solution_omega0(ptr::null()).is_nan());
        assert_eq!(prandtl_geometry_n_s(ptr::null()), 0);
        prandtl_geometry_free(geom);
        prandtl_geometry_free(ptr::null_mut());
        prandtl_solution_free(ptr::null_mut());
    }
    let name = unsafe { CStr::from_ptr(prandtl_status_name(PrandtlStatus::NotConverged)) };
    assert_eq!(name.to_str().unwrap(), "not_converged");
}

#[test]
fn defaults_are_exposed() {
    let o = prandtl_options_default();
    assert_eq!((o.n_psi, o.psi_max, o.tol, o.max_iter), (301, 30.0, 1e-10, 50));
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "prandtl.h"

int main(void) {
    PrandtlGeometry *geom = NULL;
    if (prandtl_geometry_disk(1.0, 64, &geom) != PRANDTL_STATUS_OK) return 1;
    double g[64];
    for (int i = 0; i < 64; i++) g[i] = cos(2.0 * M_PI * i / 64.0);
    PrandtlOptions opts = prandtl_options_default();
    PrandtlSolution *sol = NULL;
    if (prandtl_solve(geom, 0.1, g, 64, &opts, &sol) != PRANDTL_STATUS_OK) return 2;
    double omega = prandtl_solution_omega0(sol);
    if (fabs(omega - sqrt(1.02)) > 1e-8) return 3;
    if (prandtl_geometry_disk(0.0, 64, &geom) != PRANDTL_STATUS_INVALID_GEOMETRY) return 4;
    if (prandtl_last_error_message() == NULL) return 5;
    printf("%.15f\n", omega);
    prandtl_solution_free(sol);
    prandtl_geometry_free(geom);
    return 0;
}
"#;

fn static_lib() -> Option<PathBuf> {
    // tests live in target/<profile>/deps; the library sits one level up
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libprandtl_ffi.a");
    lib.is_file().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let Some(lib) = static_lib() else {
        eprintln!("static library not found; skipping C link test");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping C link test");
        return;
    }
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let out = Command::new("cc")
        .args(["-std=c11", "-D_DEFAULT_SOURCE", "-Wall", "-Werror"])
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let omega: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!((omega - 1.02f64.sqrt()).abs() < 1e-8);
}
