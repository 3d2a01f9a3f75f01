//! Galerkin projection of the momentum and pressure-Poisson equations onto
//! the POD spaces.
//!
//! Every reduced object is assembled by applying the discrete operators of
//! [`crate::fvops`] to the basis fields and pairing in the volume-weighted
//! inner product, so each block is the exact projection of the corresponding
//! full-order operator. Convected face values use linear interpolation.
//!
//! Sign convention of the reduced pressure equation: projecting the Poisson
//! equation and integrating the Laplacian term by parts gives
//! `D b + E = E_bc + F_bc a + a^T G a`, i.e. the mean-pressure forcing
//! enters with a minus sign when solving for `b`. The residual oracles in
//! the test suite pin this convention against the full-order operators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fvops::{self, Scheme};
use crate::mesh::Mesh;
use crate::pod::PodBasis;

/// Hard cap on the velocity space dimension: the convection tensors grow
/// with the cube of the mode count.
pub const MAX_MODES: usize = 64;

/// Raw projection blocks, independent of viscosity and of the boundary
/// scaling, so parameters can be swapped online without re-projection.
#[derive(Clone, Debug)]
pub struct ReducedBlocks {
    pub n_u: usize,
    pub n_p: usize,
    /// `(phi_i, lap phi_j)`; viscosity is applied in the dynamical system.
    pub diffusion: DMatrix<f64>,
    /// `[i](j, k) = (phi_i, conv(psi_j, phi_k))`.
    pub convection: Vec<DMatrix<f64>>,
    /// `(phi_i, grad chi_j)`, `n_u x n_p`.
    pub pressure_gradient: DMatrix<f64>,
    /// `(grad chi_i, grad chi_j)`, symmetric PSD Gram matrix.
    pub poisson_laplacian: DMatrix<f64>,
    /// `(grad chi_i, grad p_mean)`.
    pub poisson_mean: DVector<f64>,
    /// `[i](j, k) = (chi_i, div conv(psi_j, phi_k))`.
    pub poisson_convection: Vec<DMatrix<f64>>,
    /// `(phi_i, lap phi_c)`.
    pub lift_diffusion: DVector<f64>,
    /// `(phi_i, conv(F_c, phi_c))`.
    pub lift_convection: DVector<f64>,
    /// `(phi_i, conv(psi_j, phi_c))`.
    pub flux_lift_convection: DMatrix<f64>,
    /// `(phi_i, conv(F_c, phi_j))`.
    pub lift_velocity_convection: DMatrix<f64>,
    /// `(chi_i, div conv(F_c, phi_c))`.
    pub poisson_lift: DVector<f64>,
    /// `(chi_i, div conv(psi_j, phi_c))`.
    pub poisson_flux_lift: DMatrix<f64>,
    /// `(chi_i, div conv(F_c, phi_j))`.
    pub poisson_lift_velocity: DMatrix<f64>,
}

/// Composed reduced system for one `(nu, u_d)` parameter pair.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub blocks: ReducedBlocks,
    pub nu: f64,
    pub u_d: f64,
    /// `nu u_d * lift_diffusion - u_d^2 * lift_convection`.
    pub bc_momentum_const: DVector<f64>,
    /// `-u_d (flux_lift_convection + lift_velocity_convection)`.
    pub bc_momentum_linear: DMatrix<f64>,
    /// `u_d^2 * poisson_lift`.
    pub bc_poisson_const: DVector<f64>,
    /// `u_d (poisson_flux_lift + poisson_lift_velocity)`.
    pub bc_poisson_linear: DMatrix<f64>,
    /// Pressure Gram matrix, Tikhonov-shifted when ill-conditioned.
    pub poisson_matrix: DMatrix<f64>,
    pub poisson_cond: f64,
    pub poisson_shift: f64,
}

impl ReducedSystem {
    pub fn n_u(&self) -> usize {
        self.blocks.n_u
    }

    pub fn n_p(&self) -> usize {
        self.blocks.n_p
    }

    /// Same projection blocks recomposed for new parameters.
    pub fn with_parameters(&self, nu: f64, u_d: f64) -> ReducedSystem {
        compose_system(self.blocks.clone(), nu, u_d).expect("blocks already validated")
    }
}

/// Diffusion projection `(phi_i, lap phi_j)` with unit diffusivity.
pub fn assemble_b(mesh: &Mesh, basis: &PodBasis) -> Result<DMatrix<f64>> {
    let n_u = basis.n_u();
    let mut b = DMatrix::zeros(n_u, n_u);
    for j in 0..n_u {
        let lap = fvops::laplacian(mesh, 1.0, &basis.phi[j])?;
        for i in 0..n_u {
            b[(i, j)] = fvops::inner_product(mesh, &basis.phi[i], &lap)?;
        }
    }
    Ok(b)
}

/// Convection tensor `(phi_i, conv(psi_j, phi_k))` with linear face
/// interpolation, stored as one `n_u x n_u` matrix per projection mode.
pub fn assemble_c(mesh: &Mesh, basis: &PodBasis) -> Result<Vec<DMatrix<f64>>> {
    let n_u = basis.n_u();
    let mut c = vec![DMatrix::zeros(n_u, n_u); n_u];
    for j in 0..n_u {
        for k in 0..n_u {
            let conv = fvops::convection(mesh, &basis.psi[j], &basis.phi[k], Scheme::Linear)?;
            for (i, ci) in c.iter_mut().enumerate() {
                ci[(j, k)] = fvops::inner_product(mesh, &basis.phi[i], &conv)?;
            }
        }
    }
    Ok(c)
}

/// Pressure-gradient projection `(phi_i, grad chi_j)`.
pub fn assemble_k(mesh: &Mesh, basis: &PodBasis) -> Result<DMatrix<f64>> {
    let n_u = basis.n_u();
    let n_p = basis.n_p();
    let mut k = DMatrix::zeros(n_u, n_p);
    for j in 0..n_p {
        let grad = fvops::gauss_gradient(mesh, &basis.chi[j])?;
        for i in 0..n_u {
            k[(i, j)] = fvops::inner_product(mesh, &basis.phi[i], &grad)?;
        }
    }
    Ok(k)
}

/// Pressure-Poisson blocks: the gradient Gram matrix, the mean-pressure
/// forcing and the divergence-of-convection tensor.
pub fn assemble_pressure_block(
    mesh: &Mesh,
    basis: &PodBasis,
) -> Result<(DMatrix<f64>, DVector<f64>, Vec<DMatrix<f64>>)> {
    let n_u = basis.n_u();
    let n_p = basis.n_p();
    let mut d = DMatrix::zeros(n_p, n_p);
    for i in 0..n_p {
        for j in i..n_p {
            let v = fvops::grad_inner_product(mesh, &basis.chi[i], &basis.chi[j])?;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let mut e = DVector::zeros(n_p);
    for i in 0..n_p {
        e[i] = fvops::grad_inner_product(mesh, &basis.chi[i], &basis.p_mean)?;
    }
    let mut g = vec![DMatrix::zeros(n_u, n_u); n_p];
    for j in 0..n_u {
        for k in 0..n_u {
            let conv = fvops::convection(mesh, &basis.psi[j], &basis.phi[k], Scheme::Linear)?;
            let div = fvops::divergence_of_flux(mesh, &fvops::face_flux(mesh, &conv)?)?;
            for (i, gi) in g.iter_mut().enumerate() {
                gi[(j, k)] = fvops::inner_product(mesh, &basis.chi[i], &div)?;
            }
        }
    }
    Ok((d, e, g))
}

/// The seven lifting projections feeding the boundary terms of the coupled
/// system.
pub struct BcBlocks {
    pub lift_diffusion: DVector<f64>,
    pub lift_convection: DVector<f64>,
    pub flux_lift_convection: DMatrix<f64>,
    pub lift_velocity_convection: DMatrix<f64>,
    pub poisson_lift: DVector<f64>,
    pub poisson_flux_lift: DMatrix<f64>,
    pub poisson_lift_velocity: DMatrix<f64>,
}

pub fn assemble_bc_terms(mesh: &Mesh, basis: &PodBasis) -> Result<BcBlocks> {
    let n_u = basis.n_u();
    let n_p = basis.n_p();
    let phi_c = &basis.lifting.phi_c;
    let f_c = &basis.lifting.f_c;

    let lap_c = fvops::laplacian(mesh, 1.0, phi_c)?;
    let conv_cc = fvops::convection(mesh, f_c, phi_c, Scheme::Linear)?;
    let div_cc = fvops::divergence_of_flux(mesh, &fvops::face_flux(mesh, &conv_cc)?)?;

    let mut lift_diffusion = DVector::zeros(n_u);
    let mut lift_convection = DVector::zeros(n_u);
    let mut poisson_lift = DVector::zeros(n_p);
    for i in 0..n_u {
        lift_diffusion[i] = fvops::inner_product(mesh, &basis.phi[i], &lap_c)?;
        lift_convection[i] = fvops::inner_product(mesh, &basis.phi[i], &conv_cc)?;
    }
    for i in 0..n_p {
        poisson_lift[i] = fvops::inner_product(mesh, &basis.chi[i], &div_cc)?;
    }

    let mut flux_lift_convection = DMatrix::zeros(n_u, n_u);
    let mut poisson_flux_lift = DMatrix::zeros(n_p, n_u);
    for j in 0..n_u {
        let conv = fvops::convection(mesh, &basis.psi[j], phi_c, Scheme::Linear)?;
        for i in 0..n_u {
            flux_lift_convection[(i, j)] = fvops::inner_product(mesh, &basis.phi[i], &conv)?;
        }
        let div = fvops::divergence_of_flux(mesh, &fvops::face_flux(mesh, &conv)?)?;
        for i in 0..n_p {
            poisson_flux_lift[(i, j)] = fvops::inner_product(mesh, &basis.chi[i], &div)?;
        }
    }

    let mut lift_velocity_convection = DMatrix::zeros(n_u, n_u);
    let mut poisson_lift_velocity = DMatrix::zeros(n_p, n_u);
    for j in 0..n_u {
        let conv = fvops::convection(mesh, f_c, &basis.phi[j], Scheme::Linear)?;
        for i in 0..n_u {
            lift_velocity_convection[(i, j)] = fvops::inner_product(mesh, &basis.phi[i], &conv)?;
        }
        let div = fvops::divergence_of_flux(mesh, &fvops::face_flux(mesh, &conv)?)?;
        for i in 0..n_p {
            poisson_lift_velocity[(i, j)] = fvops::inner_product(mesh, &basis.chi[i], &div)?;
        }
    }

    Ok(BcBlocks {
        lift_diffusion,
        lift_convection,
        flux_lift_convection,
        lift_velocity_convection,
        poisson_lift,
        poisson_flux_lift,
        poisson_lift_velocity,
    })
}

/// Assembles all projection blocks against one basis.
pub fn assemble_blocks(mesh: &Mesh, basis: &PodBasis) -> Result<ReducedBlocks> {
    let n_u = basis.n_u();
    let n_p = basis.n_p();
    if n_u > MAX_MODES {
        return Err(Error::Dimension(format!(
            "velocity space dimension {n_u} exceeds the tensor-storage cap {MAX_MODES}"
        )));
    }
    if basis.psi.len() != n_u {
        return Err(Error::Dimension(
            "flux modes must pair one-to-one with velocity modes".into(),
        ));
    }
    let diffusion = assemble_b(mesh, basis)?;
    let convection = assemble_c(mesh, basis)?;
    let pressure_gradient = assemble_k(mesh, basis)?;
    let (poisson_laplacian, poisson_mean, poisson_convection) =
        assemble_pressure_block(mesh, basis)?;
    let bc = assemble_bc_terms(mesh, basis)?;
    Ok(ReducedBlocks {
        n_u,
        n_p,
        diffusion,
        convection,
        pressure_gradient,
        poisson_laplacian,
        poisson_mean,
        poisson_convection,
        lift_diffusion: bc.lift_diffusion,
        lift_convection: bc.lift_convection,
        flux_lift_convection: bc.flux_lift_convection,
        lift_velocity_convection: bc.lift_velocity_convection,
        poisson_lift: bc.poisson_lift,
        poisson_flux_lift: bc.poisson_flux_lift,
        poisson_lift_velocity: bc.poisson_lift_velocity,
    })
}

impl ReducedBlocks {
    pub fn validate(&self) -> Result<()> {
        let (n_u, n_p) = (self.n_u, self.n_p);
        let ok = self.diffusion.shape() == (n_u, n_u)
            && self.convection.len() == n_u
            && self.convection.iter().all(|m| m.shape() == (n_u, n_u))
            && self.pressure_gradient.shape() == (n_u, n_p)
            && self.poisson_laplacian.shape() == (n_p, n_p)
            && self.poisson_mean.len() == n_p
            && self.poisson_convection.len() == n_p
            && self.poisson_convection.iter().all(|m| m.shape() == (n_u, n_u))
            && self.lift_diffusion.len() == n_u
            && self.lift_convection.len() == n_u
            && self.flux_lift_convection.shape() == (n_u, n_u)
            && self.lift_velocity_convection.shape() == (n_u, n_u)
            && self.poisson_lift.len() == n_p
            && self.poisson_flux_lift.shape() == (n_p, n_u)
            && self.poisson_lift_velocity.shape() == (n_p, n_u);
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("inconsistent reduced block shapes".into()))
        }
    }

    /// Leading `(n_u, n_p)` sub-blocks; exact because every entry is an
    /// independent projection.
    pub fn truncated(&self, n_u: usize, n_p: usize) -> Result<ReducedBlocks> {
        if n_u > self.n_u || n_p > self.n_p {
            return Err(Error::Dimension(format!(
                "cannot truncate blocks of size {}/{} to {n_u}/{n_p}",
                self.n_u, self.n_p
            )));
        }
        let sub = |m: &DMatrix<f64>, r: usize, c: usize| m.view((0, 0), (r, c)).into_owned();
        Ok(ReducedBlocks {
            n_u,
            n_p,
            diffusion: sub(&self.diffusion, n_u, n_u),
            convection: self.convection[..n_u]
                .iter()
                .map(|m| sub(m, n_u, n_u))
                .collect(),
            pressure_gradient: sub(&self.pressure_gradient, n_u, n_p),
            poisson_laplacian: sub(&self.poisson_laplacian, n_p, n_p),
            poisson_mean: self.poisson_mean.rows(0, n_p).into_owned(),
            poisson_convection: self.poisson_convection[..n_p]
                .iter()
                .map(|m| sub(m, n_u, n_u))
                .collect(),
            lift_diffusion: self.lift_diffusion.rows(0, n_u).into_owned(),
            lift_convection: self.lift_convection.rows(0, n_u).into_owned(),
            flux_lift_convection: sub(&self.flux_lift_convection, n_u, n_u),
            lift_velocity_convection: sub(&self.lift_velocity_convection, n_u, n_u),
            poisson_lift: self.poisson_lift.rows(0, n_p).into_owned(),
            poisson_flux_lift: sub(&self.poisson_flux_lift, n_p, n_u),
            poisson_lift_velocity: sub(&self.poisson_lift_velocity, n_p, n_u),
        })
    }
}

/// Composes the parameter-dependent system from raw blocks. The pressure
/// Gram matrix gets a Tikhonov shift of `1e-12 trace(D)/n_p` when its
/// condition number exceeds `1e12`.
pub fn compose_system(blocks: ReducedBlocks, nu: f64, u_d: f64) -> Result<ReducedSystem> {
    blocks.validate()?;
    let bc_momentum_const = &blocks.lift_diffusion * (nu * u_d) - &blocks.lift_convection * (u_d * u_d);
    let bc_momentum_linear =
        (&blocks.flux_lift_convection + &blocks.lift_velocity_convection) * (-u_d);
    let bc_poisson_const = &blocks.poisson_lift * (u_d * u_d);
    let bc_poisson_linear = (&blocks.poisson_flux_lift + &blocks.poisson_lift_velocity) * u_d;

    let n_p = blocks.n_p;
    let mut poisson_matrix = blocks.poisson_laplacian.clone();
    let mut poisson_cond = 0.0;
    let mut poisson_shift = 0.0;
    if n_p > 0 {
        let eig = nalgebra::SymmetricEigen::new(poisson_matrix.clone());
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        poisson_cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        if !(poisson_cond <= 1e12) {
            poisson_shift = 1e-12 * poisson_matrix.trace() / n_p as f64;
            for i in 0..n_p {
                poisson_matrix[(i, i)] += poisson_shift;
            }
        }
    }

    Ok(ReducedSystem {
        blocks,
        nu,
        u_d,
        bc_momentum_const,
        bc_momentum_linear,
        bc_poisson_const,
        bc_poisson_linear,
        poisson_matrix,
        poisson_cond,
        poisson_shift,
    })
}
