//! Analytic backward-Euler roots, Jacobian verification against central
//! finite differences, and convergence-order checks for the coupled reduced
//! solver, on synthetic systems with known behaviour.

mod common;

use common::rng;
use nalgebra::{DMatrix, DVector};
use podfv::romassembly::{compose_system, ReducedBlocks, ReducedSystem};
use podfv::romsolver::{
    integrate, newton_step_solve, residual, NewtonParams, ReducedState, RomRunConfig,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn empty_blocks(n_u: usize, n_p: usize) -> ReducedBlocks {
    ReducedBlocks {
        n_u,
        n_p,
        diffusion: DMatrix::zeros(n_u, n_u),
        convection: vec![DMatrix::zeros(n_u, n_u); n_u],
        pressure_gradient: DMatrix::zeros(n_u, n_p),
        poisson_laplacian: DMatrix::identity(n_p, n_p),
        poisson_mean: DVector::zeros(n_p),
        poisson_convection: vec![DMatrix::zeros(n_u, n_u); n_p],
        lift_diffusion: DVector::zeros(n_u),
        lift_convection: DVector::zeros(n_u),
        flux_lift_convection: DMatrix::zeros(n_u, n_u),
        lift_velocity_convection: DMatrix::zeros(n_u, n_u),
        poisson_lift: DVector::zeros(n_p),
        poisson_flux_lift: DMatrix::zeros(n_p, n_u),
        poisson_lift_velocity: DMatrix::zeros(n_p, n_u),
    }
}

fn random_blocks(n_u: usize, n_p: usize, r: &mut ChaCha8Rng) -> ReducedBlocks {
    let mut b = empty_blocks(n_u, n_p);
    let rand_m = |r: &mut ChaCha8Rng, rows: usize, cols: usize| {
        DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0))
    };
    b.diffusion = rand_m(r, n_u, n_u);
    b.convection = (0..n_u).map(|_| rand_m(r, n_u, n_u)).collect();
    b.pressure_gradient = rand_m(r, n_u, n_p);
    let half = rand_m(r, n_p, n_p);
    b.poisson_laplacian = half.tr_mul(&half) + DMatrix::identity(n_p, n_p);
    b.poisson_mean = DVector::from_fn(n_p, |_, _| r.gen_range(-1.0..1.0));
    b.poisson_convection = (0..n_p).map(|_| rand_m(r, n_u, n_u)).collect();
    b.lift_diffusion = DVector::from_fn(n_u, |_, _| r.gen_range(-1.0..1.0));
    b.lift_convection = DVector::from_fn(n_u, |_, _| r.gen_range(-1.0..1.0));
    b.flux_lift_convection = rand_m(r, n_u, n_u);
    b.lift_velocity_convection = rand_m(r, n_u, n_u);
    b.poisson_lift = DVector::from_fn(n_p, |_, _| r.gen_range(-1.0..1.0));
    b.poisson_flux_lift = rand_m(r, n_p, n_u);
    b.poisson_lift_velocity = rand_m(r, n_p, n_u);
    b
}

fn state(a: &[f64], b: &[f64], t: f64) -> ReducedState {
    ReducedState {
        a: DVector::from_vec(a.to_vec()),
        b: DVector::from_vec(b.to_vec()),
        t,
    }
}

#[test]
fn zero_system_has_fixed_point_residual() {
    let sys = compose_system(empty_blocks(3, 1), 1.0, 0.0).unwrap();
    let s = state(&[0.4, -0.2, 1.0], &[0.0], 0.0);
    let next = state(&[0.4, -0.2, 1.0], &[0.0], 0.1);
    let (ra, rb) = residual(&next, &s, &sys, 0.1);
    assert!(ra.amax() == 0.0);
    assert!(rb.amax() == 0.0);
}

#[test]
fn linear_decay_has_analytic_backward_euler_root() {
    // nu B = -I: the implicit step solves a+ = a / (1 + dt), exactly, in a
    // single Newton iteration.
    let mut blocks = empty_blocks(2, 1);
    blocks.diffusion = -DMatrix::identity(2, 2);
    let sys = compose_system(blocks, 1.0, 0.0).unwrap();
    let dt = 0.25;
    let s0 = state(&[1.0, -3.0], &[0.0], 0.0);
    let (s1, report) = newton_step_solve(&s0, &sys, dt, &NewtonParams::default()).unwrap();
    assert_eq!(report.iterations, 1);
    assert!((s1.a[0] - 1.0 / 1.25).abs() <= 1e-12);
    assert!((s1.a[1] + 3.0 / 1.25).abs() <= 1e-12);
}

fn quadratic_system() -> ReducedSystem {
    // Single-mode system with only the quadratic term: the implicit step
    // from a = 1 with dt = 1 solves a+^2 + a+ - 1 = 0.
    let mut blocks = empty_blocks(1, 1);
    blocks.convection[0][(0, 0)] = 1.0;
    compose_system(blocks, 1.0, 0.0).unwrap()
}

#[test]
fn quadratic_root_is_golden_ratio_conjugate() {
    let sys = quadratic_system();
    let s0 = state(&[1.0], &[0.0], 0.0);
    let (s1, _) = newton_step_solve(&s0, &sys, 1.0, &NewtonParams::default()).unwrap();
    let root = (5f64.sqrt() - 1.0) / 2.0;
    assert!((s1.a[0] - root).abs() <= 1e-12, "got {}", s1.a[0]);
}

#[test]
fn newton_converges_quadratically() {
    // Track the per-iteration error on the scalar quadratic: each iteration
    // roughly squares it.
    let sys = quadratic_system();
    let s0 = state(&[1.0], &[0.0], 0.0);
    let tight = NewtonParams {
        tol_abs: 1e-15,
        tol_rel: 1e-15,
        max_iter: 12,
    };
    let (_, report) = newton_step_solve(&s0, &sys, 1.0, &tight).unwrap();
    // Residual r(x) = x^2 + x - 1 behaves like C (x - root), so residual
    // norms show the digit doubling directly.
    let norms = &report.residual_norms;
    assert!(norms.len() >= 4, "expected several iterations: {norms:?}");
    for k in 1..norms.len().min(4) {
        let prev = norms[k - 1];
        let next = norms[k];
        assert!(
            next <= 1.2 * prev * prev,
            "iteration {k}: {next:e} not quadratic vs {prev:e} ({norms:?})"
        );
    }
}

#[test]
fn jacobian_matches_central_differences() {
    let mut r = rng(51);
    for seed in 0..3 {
        let blocks = random_blocks(3, 2, &mut r);
        let sys = compose_system(blocks, 0.07, 1.0 + seed as f64 * 0.5).unwrap();
        let dt = 0.2;
        let current = ReducedState {
            a: DVector::from_fn(3, |_, _| r.gen_range(-1.0..1.0)),
            b: DVector::from_fn(2, |_, _| r.gen_range(-1.0..1.0)),
            t: 0.0,
        };
        let z0 = ReducedState {
            a: DVector::from_fn(3, |_, _| r.gen_range(-1.0..1.0)),
            b: DVector::from_fn(2, |_, _| r.gen_range(-1.0..1.0)),
            t: dt,
        };
        let n = 5;
        // Analytic Jacobian via the residual's linearisation: probe with the
        // Newton machinery by finite differences on `residual`.
        let eval = |z: &ReducedState| -> DVector<f64> {
            let (ra, rb) = residual(z, &current, &sys, dt);
            let mut out = DVector::zeros(n);
            for i in 0..3 {
                out[i] = ra[i];
            }
            for i in 0..2 {
                out[3 + i] = rb[i];
            }
            out
        };
        let h = 1e-6;
        let mut fd = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut zp = z0.clone();
            let mut zm = z0.clone();
            if j < 3 {
                zp.a[j] += h;
                zm.a[j] -= h;
            } else {
                zp.b[j - 3] += h;
                zm.b[j - 3] -= h;
            }
            let d = (eval(&zp) - eval(&zm)) / (2.0 * h);
            fd.column_mut(j).copy_from(&d);
        }
        // Recover the analytic Jacobian by solving for the Newton update
        // direction of unit residuals: easier to rebuild it from residual
        // differences of the exact linear map. One Newton step from z0 on a
        // shifted problem reproduces J^-1; instead compare J*e_j via exact
        // directional derivatives using the analytic formulas mirrored here.
        let mut analytic = DMatrix::zeros(n, n);
        for i in 0..3 {
            for j in 0..3 {
                let mut dca = 0.0;
                for k in 0..3 {
                    dca += (sys.blocks.convection[i][(j, k)] + sys.blocks.convection[i][(k, j)])
                        * z0.a[k];
                }
                let lin = sys.nu * sys.blocks.diffusion[(i, j)]
                    + sys.bc_momentum_linear[(i, j)]
                    - dca;
                analytic[(i, j)] = if i == j { 1.0 } else { 0.0 } - dt * lin;
            }
            for j in 0..2 {
                analytic[(i, 3 + j)] = dt * sys.blocks.pressure_gradient[(i, j)];
            }
        }
        for i in 0..2 {
            for j in 0..3 {
                let mut dga = 0.0;
                for k in 0..3 {
                    dga += (sys.blocks.poisson_convection[i][(j, k)]
                        + sys.blocks.poisson_convection[i][(k, j)])
                        * z0.a[k];
                }
                analytic[(3 + i, j)] = -sys.bc_poisson_linear[(i, j)] - dga;
            }
            for j in 0..2 {
                analytic[(3 + i, 3 + j)] = sys.poisson_matrix[(i, j)];
            }
        }
        let scale = analytic.amax().max(1.0);
        assert!(
            (&fd - &analytic).amax() <= 1e-6 * scale,
            "finite differences disagree: {:e}",
            (&fd - &analytic).amax()
        );
    }
}

#[test]
fn zero_initial_state_stays_zero() {
    let mut blocks = empty_blocks(2, 2);
    blocks.diffusion = -DMatrix::identity(2, 2);
    let sys = compose_system(blocks, 1.0, 0.0).unwrap();
    let s0 = state(&[0.0, 0.0], &[0.0, 0.0], 0.0);
    let traj = integrate(&s0, &sys, &RomRunConfig::new(0.1, 2.0)).unwrap();
    assert!(traj.failure.is_none());
    assert_eq!(traj.n_states(), 21);
    assert!(traj.a.amax() == 0.0 && traj.b.amax() == 0.0);
}

#[test]
fn integration_is_deterministic() {
    let mut r = rng(52);
    let blocks = random_blocks(3, 2, &mut r);
    let sys = compose_system(blocks, 0.05, 0.4).unwrap();
    let s0 = state(&[0.1, -0.2, 0.05], &[0.0, 0.0], 0.0);
    let cfg = RomRunConfig::new(0.05, 3.0);
    let t1 = integrate(&s0, &sys, &cfg).unwrap();
    let t2 = integrate(&s0, &sys, &cfg).unwrap();
    assert_eq!(t1.a, t2.a);
    assert_eq!(t1.b, t2.b);
    assert_eq!(t1.times, t2.times);
}

#[test]
fn backward_euler_is_first_order() {
    // Smooth scalar system da/dt = -a - a^2 from a0 = 1: terminal errors
    // against a dt/8 reference shrink at first order when dt is halved.
    let mut blocks = empty_blocks(1, 1);
    blocks.diffusion[(0, 0)] = -1.0;
    blocks.convection[0][(0, 0)] = 1.0;
    let sys = compose_system(blocks, 1.0, 0.0).unwrap();
    let s0 = state(&[1.0], &[0.0], 0.0);
    let terminal = |dt: f64| -> f64 {
        let traj = integrate(&s0, &sys, &RomRunConfig::new(dt, 1.0)).unwrap();
        assert!(traj.failure.is_none());
        traj.a[(0, traj.n_states() - 1)]
    };
    let reference = terminal(0.1 / 8.0);
    let e1 = (terminal(0.1) - reference).abs();
    let e2 = (terminal(0.05) - reference).abs();
    // With the reference offset the expected ratio is (1 - 1/8)/(1/2 - 1/8)
    // = 7/3 for a first-order method.
    let ratio = e1 / e2;
    assert!(
        (1.7..=3.1).contains(&ratio),
        "ratio {ratio} outside first-order band (e1 = {e1:e}, e2 = {e2:e})"
    );
}

#[test]
fn step_failure_reports_partial_series() {
    // Strong quadratic growth blows up; the trajectory keeps the states
    // computed before the failure and records the cause.
    let mut blocks = empty_blocks(1, 1);
    blocks.convection[0][(0, 0)] = -50.0; // da/dt = +50 a^2
    let sys = compose_system(blocks, 1.0, 0.0).unwrap();
    let s0 = state(&[1.0], &[0.0], 0.0);
    let traj = integrate(&s0, &sys, &RomRunConfig::new(0.5, 20.0)).unwrap();
    assert!(traj.failure.is_some());
    assert!(traj.n_states() >= 1);
    assert!(traj.n_states() < 41);
}

#[test]
fn accepted_steps_satisfy_both_residual_blocks() {
    let mut r = rng(53);
    let blocks = random_blocks(3, 2, &mut r);
    let sys = compose_system(blocks, 0.05, 0.3).unwrap();
    let mut s = state(&[0.05, -0.1, 0.2], &[0.0, 0.0], 0.0);
    // Consistent b for the initial a.
    s.b = podfv::romsolver::solve_pressure_coefficients(&sys, &s.a).unwrap();
    let params = NewtonParams::default();
    for _ in 0..20 {
        let (next, _) = newton_step_solve(&s, &sys, 0.05, &params).unwrap();
        let (ra, rb) = residual(&next, &s, &sys, 0.05);
        let tol = params.tol_abs + params.tol_rel; // residuals start O(1)
        assert!(ra.amax() <= tol && rb.amax() <= tol);
        s = next;
    }
}
