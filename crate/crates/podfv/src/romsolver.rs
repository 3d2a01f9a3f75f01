//! Time integration of the coupled reduced system and reconstruction of
//! full-order fields.
//!
//! The velocity coefficients obey
//! `da/dt = A_bc + (nu B + B_bc) a - a^T C a - K b`
//! coupled monolithically with the algebraic pressure equation
//! `D b + E = E_bc + F_bc a + a^T G a`.
//! Backward Euler in time; the nonlinear per-step system is solved by
//! Newton-Raphson with the analytic Jacobian, warm-started from the previous
//! step.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{CellField, FaceField};
use crate::fvops;
use crate::mesh::Mesh;
use crate::pod::PodBasis;
use crate::romassembly::ReducedSystem;
use crate::vec2::Vec2;

/// Reduced coefficients at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub t: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonParams {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            tol_abs: 1e-10,
            tol_rel: 1e-8,
            max_iter: 25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RomRunConfig {
    pub dt: f64,
    pub t_end: f64,
    pub newton: NewtonParams,
    /// Online parameter overrides; when set, the system is recomposed from
    /// its raw blocks before integration.
    pub u_d: Option<f64>,
    pub nu: Option<f64>,
}

impl RomRunConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            newton: NewtonParams::default(),
            u_d: None,
            nu: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Rom("dt must be positive".into()));
        }
        if !(self.newton.tol_abs > 0.0 && self.newton.tol_rel > 0.0) {
            return Err(Error::Rom("newton tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Per-solve Newton diagnostics: residual norms per iteration, starting with
/// the initial residual.
#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
}

/// Coefficient trajectory. On step failure the series up to the failure is
/// retained and `failure` describes the abort.
#[derive(Clone, Debug)]
pub struct RomTrajectory {
    pub times: Vec<f64>,
    /// One state per column, including the initial one.
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub wall_seconds: f64,
    pub newton_iterations: usize,
    pub failure: Option<String>,
}

impl RomTrajectory {
    pub fn n_states(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, k: usize) -> ReducedState {
        ReducedState {
            a: self.a.column(k).into_owned(),
            b: self.b.column(k).into_owned(),
            t: self.times[k],
        }
    }
}

/// `out_i = a^T T_i a` for a stacked quadratic tensor.
fn quad_contract(tensors: &[DMatrix<f64>], a: &DVector<f64>, out: &mut DVector<f64>) {
    for (i, t) in tensors.iter().enumerate() {
        let mut s = 0.0;
        for j in 0..a.len() {
            let aj = a[j];
            if aj != 0.0 {
                for k in 0..a.len() {
                    s += aj * t[(j, k)] * a[k];
                }
            }
        }
        out[i] = s;
    }
}

/// `out[i][j] = sum_k (T_i[j,k] + T_i[k,j]) a_k`, the derivative of the
/// quadratic contraction.
fn quad_jacobian(tensors: &[DMatrix<f64>], a: &DVector<f64>, out: &mut DMatrix<f64>) {
    for (i, t) in tensors.iter().enumerate() {
        for j in 0..a.len() {
            let mut s = 0.0;
            for k in 0..a.len() {
                s += (t[(j, k)] + t[(k, j)]) * a[k];
            }
            out[(i, j)] = s;
        }
    }
}

/// Backward-Euler residual of the coupled system. `r_a` is the momentum
/// block, `r_b` the algebraic pressure block.
pub fn residual(
    next: &ReducedState,
    current: &ReducedState,
    system: &ReducedSystem,
    dt: f64,
) -> (DVector<f64>, DVector<f64>) {
    let n_u = system.n_u();
    let n_p = system.n_p();
    let a = &next.a;
    let b = &next.b;

    let mut ca = DVector::zeros(n_u);
    quad_contract(&system.blocks.convection, a, &mut ca);
    let mut rhs = system.bc_momentum_const.clone();
    rhs += &system.blocks.diffusion * a * system.nu;
    rhs += &system.bc_momentum_linear * a;
    rhs -= &ca;
    if n_p > 0 {
        rhs -= &system.blocks.pressure_gradient * b;
    }
    let r_a = a - &current.a - rhs * dt;

    let mut ga = DVector::zeros(n_p);
    quad_contract(&system.blocks.poisson_convection, a, &mut ga);
    let r_b = if n_p > 0 {
        &system.poisson_matrix * b + &system.blocks.poisson_mean
            - &system.bc_poisson_const
            - &system.bc_poisson_linear * a
            - ga
    } else {
        DVector::zeros(0)
    };
    (r_a, r_b)
}

fn jacobian(state: &ReducedState, system: &ReducedSystem, dt: f64) -> DMatrix<f64> {
    let n_u = system.n_u();
    let n_p = system.n_p();
    let n = n_u + n_p;
    let mut jac = DMatrix::zeros(n, n);

    let mut dca = DMatrix::zeros(n_u, n_u);
    quad_jacobian(&system.blocks.convection, &state.a, &mut dca);
    for i in 0..n_u {
        for j in 0..n_u {
            let lin = system.nu * system.blocks.diffusion[(i, j)]
                + system.bc_momentum_linear[(i, j)]
                - dca[(i, j)];
            jac[(i, j)] = if i == j { 1.0 } else { 0.0 } - dt * lin;
        }
        for j in 0..n_p {
            jac[(i, n_u + j)] = dt * system.blocks.pressure_gradient[(i, j)];
        }
    }

    let mut dga = DMatrix::zeros(n_p, n_u);
    quad_jacobian(&system.blocks.poisson_convection, &state.a, &mut dga);
    for i in 0..n_p {
        for j in 0..n_u {
            jac[(n_u + i, j)] = -system.bc_poisson_linear[(i, j)] - dga[(i, j)];
        }
        for j in 0..n_p {
            jac[(n_u + i, n_u + j)] = system.poisson_matrix[(i, j)];
        }
    }
    jac
}

fn stacked_norm(r_a: &DVector<f64>, r_b: &DVector<f64>) -> f64 {
    (r_a.norm_squared() + r_b.norm_squared()).sqrt()
}

/// One backward-Euler step solved by Newton-Raphson on the monolithic
/// `(a, b)` residual. Warm-started from the current state.
pub fn newton_step_solve(
    current: &ReducedState,
    system: &ReducedSystem,
    dt: f64,
    params: &NewtonParams,
) -> Result<(ReducedState, NewtonReport)> {
    let n_u = system.n_u();
    let n_p = system.n_p();
    let mut next = ReducedState {
        a: current.a.clone(),
        b: current.b.clone(),
        t: current.t + dt,
    };
    let (mut r_a, mut r_b) = residual(&next, current, system, dt);
    let r0 = stacked_norm(&r_a, &r_b);
    let tol = params.tol_abs + params.tol_rel * r0;
    let mut norms = vec![r0];

    for it in 1..=params.max_iter {
        if *norms.last().unwrap() <= tol {
            return Ok((
                next,
                NewtonReport {
                    iterations: it - 1,
                    residual_norms: norms,
                },
            ));
        }
        let jac = jacobian(&next, system, dt);
        let mut rhs = DVector::zeros(n_u + n_p);
        for i in 0..n_u {
            rhs[i] = -r_a[i];
        }
        for i in 0..n_p {
            rhs[n_u + i] = -r_b[i];
        }
        let delta = jac.lu().solve(&rhs).ok_or_else(|| {
            Error::Rom(format!(
                "newton: singular jacobian at t = {} (residuals {:?})",
                next.t, norms
            ))
        })?;
        for i in 0..n_u {
            next.a[i] += delta[i];
        }
        for i in 0..n_p {
            next.b[i] += delta[n_u + i];
        }
        let r = residual(&next, current, system, dt);
        r_a = r.0;
        r_b = r.1;
        norms.push(stacked_norm(&r_a, &r_b));
        if !norms.last().unwrap().is_finite() {
            return Err(Error::Rom(format!(
                "newton: residual not finite at t = {} (residuals {:?})",
                next.t, norms
            )));
        }
    }
    if *norms.last().unwrap() <= tol {
        let its = norms.len() - 1;
        return Ok((
            next,
            NewtonReport {
                iterations: its,
                residual_norms: norms,
            },
        ));
    }
    Err(Error::Rom(format!(
        "newton: no convergence in {} iterations at t = {} (residuals {:?})",
        params.max_iter, next.t, norms
    )))
}

/// Initial reduced coefficients from a full-order velocity snapshot:
/// `a_i = (phi_i, u0 - u_d phi_c)` by orthonormality, with `b` solved from
/// the algebraic pressure equation.
pub fn initialize(
    mesh: &Mesh,
    basis: &PodBasis,
    system: &ReducedSystem,
    u0: &CellField<Vec2>,
) -> Result<ReducedState> {
    if basis.n_u() != system.n_u() || basis.n_p() != system.n_p() {
        return Err(Error::Dimension(
            "basis and system dimensions disagree".into(),
        ));
    }
    let n_u = system.n_u();
    let u_d = system.u_d;
    let mut homog = u0.values.clone();
    for (h, c) in homog.iter_mut().zip(&basis.lifting.phi_c.values) {
        *h -= *c * u_d;
    }
    let homog = CellField::from_values(mesh, homog, u0.bcs.clone())?;
    let mut a = DVector::zeros(n_u);
    for i in 0..n_u {
        a[i] = fvops::inner_product(mesh, &basis.phi[i], &homog)?;
    }
    let b = solve_pressure_coefficients(system, &a)?;
    Ok(ReducedState { a, b, t: 0.0 })
}

/// Solves the algebraic pressure block for `b` given `a`.
pub fn solve_pressure_coefficients(
    system: &ReducedSystem,
    a: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n_p = system.n_p();
    if n_p == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut ga = DVector::zeros(n_p);
    quad_contract(&system.blocks.poisson_convection, a, &mut ga);
    let rhs = &system.bc_poisson_const + &system.bc_poisson_linear * a + ga
        - &system.blocks.poisson_mean;
    system
        .poisson_matrix
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Rom("pressure Gram matrix is singular".into()))
}

/// Integrates the coupled system from `state0` to `t_end`. Parameter
/// overrides in the config recompose the system from its raw blocks without
/// re-projection. Step failures abort the run, retaining the partial series.
pub fn integrate(
    state0: &ReducedState,
    system: &ReducedSystem,
    cfg: &RomRunConfig,
) -> Result<RomTrajectory> {
    cfg.validate()?;
    let system = match (cfg.nu, cfg.u_d) {
        (None, None) => system.clone(),
        (nu, u_d) => system.with_parameters(
            nu.unwrap_or(system.nu),
            u_d.unwrap_or(system.u_d),
        ),
    };
    let n_steps = ((cfg.t_end - state0.t) / cfg.dt).round().max(0.0) as usize;
    let start = Instant::now();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut a_cols = Vec::with_capacity(n_steps + 1);
    let mut b_cols = Vec::with_capacity(n_steps + 1);
    times.push(state0.t);
    a_cols.push(state0.a.clone());
    b_cols.push(state0.b.clone());

    let mut state = state0.clone();
    let mut newton_total = 0;
    let mut failure = None;
    let guard = 1e9 * (1.0 + state0.a.norm());
    for _ in 0..n_steps {
        match newton_step_solve(&state, &system, cfg.dt, &cfg.newton) {
            Ok((next, report)) => {
                newton_total += report.iterations;
                state = next;
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
        times.push(state.t);
        a_cols.push(state.a.clone());
        b_cols.push(state.b.clone());
        if state.a.norm() > guard {
            failure = Some(format!(
                "trajectory diverged at t = {}: |a| = {:e}",
                state.t,
                state.a.norm()
            ));
            break;
        }
    }

    let n = times.len();
    let mut a = DMatrix::zeros(system.n_u(), n);
    let mut b = DMatrix::zeros(system.n_p(), n);
    for (k, (ac, bc)) in a_cols.iter().zip(&b_cols).enumerate() {
        a.column_mut(k).copy_from(ac);
        b.column_mut(k).copy_from(bc);
    }
    Ok(RomTrajectory {
        times,
        a,
        b,
        wall_seconds: start.elapsed().as_secs_f64(),
        newton_iterations: newton_total,
        failure,
    })
}

/// Reconstructed full-order fields for one reduced state:
/// `u = u_d phi_c + sum a_i phi_i`, `p = p_mean + sum b_i chi_i`,
/// `F = u_d F_c + sum a_i psi_i`.
pub fn reconstruct(
    mesh: &Mesh,
    basis: &PodBasis,
    state: &ReducedState,
    u_d: f64,
) -> Result<(CellField<Vec2>, CellField<f64>, FaceField)> {
    if state.a.len() != basis.n_u() || state.b.len() != basis.n_p() {
        return Err(Error::Dimension(
            "state dimensions do not match the basis".into(),
        ));
    }
    let mut u_terms: Vec<(f64, &CellField<Vec2>)> = vec![(u_d, &basis.lifting.phi_c)];
    for (i, phi) in basis.phi.iter().enumerate() {
        u_terms.push((state.a[i], phi));
    }
    let u = CellField::linear_combination(mesh, &u_terms)?;

    let mut p_terms: Vec<(f64, &CellField<f64>)> = vec![(1.0, &basis.p_mean)];
    for (i, chi) in basis.chi.iter().enumerate() {
        p_terms.push((state.b[i], chi));
    }
    let p = CellField::linear_combination(mesh, &p_terms)?;

    let mut f_terms: Vec<(f64, &FaceField)> = vec![(u_d, &basis.lifting.f_c)];
    for (i, psi) in basis.psi.iter().enumerate() {
        f_terms.push((state.a[i], psi));
    }
    let flux = FaceField::linear_combination(&f_terms)?;
    Ok((u, p, flux))
}
