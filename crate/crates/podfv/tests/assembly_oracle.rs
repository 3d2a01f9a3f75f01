//! Full-order projection oracles for the reduced blocks: every assembled
//! matrix and tensor contraction must reproduce the direct projection of
//! reconstructed fields for random coefficient vectors.

mod common;

use common::{random_face_field, random_scalar_field, random_vector_field, rng};
use nalgebra::{DMatrix, DVector};
use podfv::field::{Bcs, CellField, FaceField, PatchBc};
use podfv::fvops::{
    convection, divergence_of_flux, face_flux, gauss_gradient, grad_inner_product,
    inner_product, laplacian, Scheme,
};
use podfv::hfsolver::{homogeneous_velocity_bcs, pressure_bcs};
use podfv::mesh::{generate_channel_mesh, Mesh, PatchKind, Rect, SideBc};
use podfv::pod::{Lifting, PodBasis};
use podfv::romassembly::{assemble_blocks, compose_system, ReducedSystem};
use podfv::romsolver;
use podfv::vec2::Vec2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn test_mesh() -> Mesh {
    generate_channel_mesh(
        10,
        8,
        5.0,
        4.0,
        Some(Rect::new(2.0, 1.5, 3.0, 2.5)),
        SideBc::Slip,
    )
    .unwrap()
}

/// Synthetic basis with the boundary structure of a real one: homogeneous
/// modes, pressure-closure modes and an inhomogeneous lifting field. The
/// projection identities hold for arbitrary field values.
fn synthetic_basis(mesh: &Mesh, n_u: usize, n_p: usize, r: &mut ChaCha8Rng) -> PodBasis {
    let ubcs = homogeneous_velocity_bcs(mesh);
    let pbcs = pressure_bcs(mesh);
    let phi: Vec<_> = (0..n_u)
        .map(|_| random_vector_field(mesh, ubcs.clone(), r))
        .collect();
    let psi: Vec<_> = (0..n_u).map(|_| random_face_field(mesh, r)).collect();
    let chi: Vec<_> = (0..n_p)
        .map(|_| random_scalar_field(mesh, pbcs.clone(), r))
        .collect();
    let p_mean = random_scalar_field(mesh, pbcs, r);

    let per_patch = mesh
        .patches
        .iter()
        .map(|p| match p.kind {
            PatchKind::Inlet => PatchBc::FixedValue(Vec2::new(1.0, 0.0)),
            PatchKind::Wall => PatchBc::FixedValue(Vec2::ZERO),
            PatchKind::Outlet => PatchBc::ZeroGradient,
            PatchKind::SlipSide => PatchBc::Slip,
        })
        .collect();
    let phi_c = CellField::from_values(
        mesh,
        (0..mesh.n_cells())
            .map(|_| Vec2::new(1.0 + 0.2 * r.gen_range(-1.0..1.0), 0.2 * r.gen_range(-1.0..1.0)))
            .collect(),
        Bcs { per_patch },
    )
    .unwrap();
    let f_c = face_flux(mesh, &phi_c).unwrap();
    PodBasis {
        phi,
        psi,
        chi,
        lambda_u: Vec::new(),
        lambda_p: Vec::new(),
        q_u: DMatrix::zeros(0, 0),
        q_p: DMatrix::zeros(0, 0),
        p_mean,
        lifting: Lifting {
            phi_c,
            f_c,
            reference_face: mesh.patches[mesh.patch_by_kind(PatchKind::Inlet).unwrap()].faces[0],
            u_mr: 1.0,
        },
        n_s: 0,
    }
}

fn rand_vec(n: usize, r: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0))
}

fn assert_vec_close(got: &DVector<f64>, want: &DVector<f64>, tol: f64, what: &str) {
    let scale = got.amax().max(want.amax()).max(1e-6);
    for i in 0..got.len() {
        assert!(
            (got[i] - want[i]).abs() <= tol * scale,
            "{what}[{i}]: {} vs {} (scale {scale})",
            got[i],
            want[i]
        );
    }
}

/// Reconstructions used by the oracles.
fn reconstruct_velocity(
    mesh: &Mesh,
    basis: &PodBasis,
    a: &DVector<f64>,
    u_d: f64,
) -> CellField<Vec2> {
    let mut terms: Vec<(f64, &CellField<Vec2>)> = vec![(u_d, &basis.lifting.phi_c)];
    for (i, phi) in basis.phi.iter().enumerate() {
        terms.push((a[i], phi));
    }
    CellField::linear_combination(mesh, &terms).unwrap()
}

fn reconstruct_flux(basis: &PodBasis, a: &DVector<f64>, u_d: f64) -> FaceField {
    let mut terms: Vec<(f64, &FaceField)> = vec![(u_d, &basis.lifting.f_c)];
    for (i, psi) in basis.psi.iter().enumerate() {
        terms.push((a[i], psi));
    }
    FaceField::linear_combination(&terms).unwrap()
}

fn reconstruct_pressure_fluct(
    mesh: &Mesh,
    basis: &PodBasis,
    b: &DVector<f64>,
) -> CellField<f64> {
    let terms: Vec<(f64, &CellField<f64>)> = basis
        .chi
        .iter()
        .enumerate()
        .map(|(i, chi)| (b[i], chi))
        .collect();
    CellField::linear_combination(mesh, &terms).unwrap()
}

#[test]
fn diffusion_block_matches_full_order_projection() {
    let mesh = test_mesh();
    let mut r = rng(31);
    let basis = synthetic_basis(&mesh, 4, 3, &mut r);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    let a = rand_vec(4, &mut r);

    let got = &blocks.diffusion * &a;
    let u_sum = reconstruct_velocity(&mesh, &basis, &a, 0.0);
    let lap = laplacian(&mesh, 1.0, &u_sum).unwrap();
    let want = DVector::from_fn(4, |i, _| inner_product(&mesh, &basis.phi[i], &lap).unwrap());
    assert_vec_close(&got, &want, 1e-10, "diffusion");
}

#[test]
fn diffusion_of_dirichlet_mode_is_dissipative() {
    // A mode pinned to zero on every patch: the projected diffusion diagonal
    // must be negative.
    let mesh = test_mesh();
    let mut r = rng(32);
    let mut basis = synthetic_basis(&mesh, 1, 1, &mut r);
    let bcs = Bcs::uniform(mesh.patches.len(), PatchBc::FixedValue(Vec2::ZERO));
    basis.phi[0] = random_vector_field(&mesh, bcs, &mut r);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    assert!(blocks.diffusion[(0, 0)] < 0.0);
}

#[test]
fn zero_mode_gives_zero_row_and_column() {
    let mesh = test_mesh();
    let mut r = rng(33);
    let mut basis = synthetic_basis(&mesh, 3, 2, &mut r);
    basis.phi[1] = CellField::new(&mesh, Vec2::ZERO, homogeneous_velocity_bcs(&mesh)).unwrap();
    basis.psi[1] = FaceField::zeros(&mesh);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    for j in 0..3 {
        assert_eq!(blocks.diffusion[(1, j)], 0.0);
        assert!(blocks.diffusion[(j, 1)].abs() <= 1e-12);
    }
    // Zero flux mode wipes the middle slice of the convection tensor.
    for ci in &blocks.convection {
        for k in 0..3 {
            assert_eq!(ci[(1, k)], 0.0);
        }
    }
}

#[test]
fn convection_tensor_matches_bilinear_oracle() {
    let mesh = test_mesh();
    let mut r = rng(34);
    let basis = synthetic_basis(&mesh, 4, 3, &mut r);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    let a = rand_vec(4, &mut r);

    let mut got = DVector::zeros(4);
    for (i, ci) in blocks.convection.iter().enumerate() {
        got[i] = (a.transpose() * ci * &a)[(0, 0)];
    }
    let f_sum = reconstruct_flux(&basis, &a, 0.0);
    let u_sum = reconstruct_velocity(&mesh, &basis, &a, 0.0);
    let conv = convection(&mesh, &f_sum, &u_sum, Scheme::Linear).unwrap();
    let want = DVector::from_fn(4, |i, _| inner_product(&mesh, &basis.phi[i], &conv).unwrap());
    assert_vec_close(&got, &want, 1e-10, "convection");
}

#[test]
fn pressure_gradient_block_matches_projection() {
    let mesh = test_mesh();
    let mut r = rng(35);
    let basis = synthetic_basis(&mesh, 3, 4, &mut r);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    let b = rand_vec(4, &mut r);

    let got = &blocks.pressure_gradient * &b;
    let p_sum = reconstruct_pressure_fluct(&mesh, &basis, &b);
    let grad = gauss_gradient(&mesh, &p_sum).unwrap();
    let want = DVector::from_fn(3, |i, _| inner_product(&mesh, &basis.phi[i], &grad).unwrap());
    assert_vec_close(&got, &want, 1e-10, "pressure gradient");

    // Constant pressure mode: zero column. Scaling a mode scales the column.
    let mut basis2 = synthetic_basis(&mesh, 2, 2, &mut r);
    basis2.chi[0] = CellField::new(&mesh, 4.0, basis2.chi[0].bcs.clone()).unwrap();
    // A constant only has zero discrete gradient if the fixed-value closure
    // matches it, so use zero-gradient closures everywhere for this one.
    basis2.chi[0].bcs = Bcs::uniform(mesh.patches.len(), PatchBc::ZeroGradient);
    let blocks2 = assemble_blocks(&mesh, &basis2).unwrap();
    for i in 0..2 {
        assert!(blocks2.pressure_gradient[(i, 0)].abs() <= 1e-12);
    }
}

#[test]
fn poisson_blocks_match_projection() {
    let mesh = test_mesh();
    let mut r = rng(36);
    let basis = synthetic_basis(&mesh, 3, 3, &mut r);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();

    // Gram matrix symmetric and PSD.
    let d = &blocks.poisson_laplacian;
    for i in 0..3 {
        for j in 0..3 {
            assert!((d[(i, j)] - d[(j, i)]).abs() <= 1e-13);
        }
    }
    for _ in 0..5 {
        let x = rand_vec(3, &mut r);
        assert!((x.transpose() * d * &x)[(0, 0)] >= -1e-12);
    }

    // Mean forcing against the direct pairing.
    for i in 0..3 {
        let want = grad_inner_product(&mesh, &basis.chi[i], &basis.p_mean).unwrap();
        assert!((blocks.poisson_mean[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    // Quadratic contraction of the divergence tensor.
    let a = rand_vec(3, &mut r);
    let mut got = DVector::zeros(3);
    for (i, gi) in blocks.poisson_convection.iter().enumerate() {
        got[i] = (a.transpose() * gi * &a)[(0, 0)];
    }
    let f_sum = reconstruct_flux(&basis, &a, 0.0);
    let u_sum = reconstruct_velocity(&mesh, &basis, &a, 0.0);
    let conv = convection(&mesh, &f_sum, &u_sum, Scheme::Linear).unwrap();
    let div = divergence_of_flux(&mesh, &face_flux(&mesh, &conv).unwrap()).unwrap();
    let want = DVector::from_fn(3, |i, _| inner_product(&mesh, &basis.chi[i], &div).unwrap());
    assert_vec_close(&got, &want, 1e-10, "poisson convection");

    // Constant mean pressure forces nothing.
    let mut basis2 = synthetic_basis(&mesh, 2, 2, &mut r);
    basis2.p_mean = CellField::new(&mesh, 2.5, basis2.p_mean.bcs.clone()).unwrap();
    basis2.p_mean.bcs = Bcs::uniform(mesh.patches.len(), PatchBc::ZeroGradient);
    let blocks2 = assemble_blocks(&mesh, &basis2).unwrap();
    assert!(blocks2.poisson_mean.amax() <= 1e-12);
}

#[test]
fn bc_terms_vanish_for_zero_lifting() {
    let mesh = test_mesh();
    let mut r = rng(37);
    let mut basis = synthetic_basis(&mesh, 2, 2, &mut r);
    basis.lifting.phi_c =
        CellField::new(&mesh, Vec2::ZERO, homogeneous_velocity_bcs(&mesh)).unwrap();
    basis.lifting.f_c = FaceField::zeros(&mesh);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    assert!(blocks.lift_diffusion.amax() == 0.0);
    assert!(blocks.lift_convection.amax() == 0.0);
    assert!(blocks.flux_lift_convection.amax() == 0.0);
    assert!(blocks.lift_velocity_convection.amax() == 0.0);
    assert!(blocks.poisson_lift.amax() == 0.0);
    assert!(blocks.poisson_flux_lift.amax() == 0.0);
    assert!(blocks.poisson_lift_velocity.amax() == 0.0);
}

#[test]
fn composed_bc_terms_follow_scaling_pattern() {
    let mesh = test_mesh();
    let mut r = rng(38);
    let basis = synthetic_basis(&mesh, 3, 2, &mut r);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    let nu = 0.034;
    for u_d in [0.0, 1.0, 2.0] {
        let sys = compose_system(blocks.clone(), nu, u_d).unwrap();
        let want_a = &blocks.lift_diffusion * (nu * u_d) - &blocks.lift_convection * (u_d * u_d);
        assert_vec_close(&sys.bc_momentum_const, &want_a, 1e-14, "bc momentum");
        let want_e = &blocks.poisson_lift * (u_d * u_d);
        assert_vec_close(&sys.bc_poisson_const, &want_e, 1e-14, "bc poisson");
        let want_b = (&blocks.flux_lift_convection + &blocks.lift_velocity_convection) * (-u_d);
        let want_f = (&blocks.poisson_flux_lift + &blocks.poisson_lift_velocity) * u_d;
        assert!((sys.bc_momentum_linear.clone() - want_b).amax() <= 1e-14);
        assert!((sys.bc_poisson_linear.clone() - want_f).amax() <= 1e-14);
        if u_d == 0.0 {
            assert!(sys.bc_momentum_const.amax() == 0.0);
            assert!(sys.bc_momentum_linear.amax() == 0.0);
            assert!(sys.bc_poisson_const.amax() == 0.0);
            assert!(sys.bc_poisson_linear.amax() == 0.0);
        }
    }
}

/// End-to-end identity: both residual blocks of the composed system must
/// equal the projection of the full-order momentum and Poisson residuals of
/// the lifted reconstruction, for random coefficients.
fn check_full_residual_oracle(mesh: &Mesh, basis: &PodBasis, sys: &ReducedSystem, seed: u64) {
    let mut r = rng(seed);
    let n_u = basis.n_u();
    let n_p = basis.n_p();
    let a = rand_vec(n_u, &mut r);
    let b = rand_vec(n_p, &mut r);
    let u_d = sys.u_d;
    let nu = sys.nu;

    // Momentum side of the reduced system.
    let mut ca = DVector::zeros(n_u);
    for (i, ci) in sys.blocks.convection.iter().enumerate() {
        ca[i] = (a.transpose() * ci * &a)[(0, 0)];
    }
    let got_mom = &sys.bc_momentum_const
        + &sys.blocks.diffusion * &a * nu
        + &sys.bc_momentum_linear * &a
        - &ca
        - &sys.blocks.pressure_gradient * &b;

    // Direct full-order projection of the reconstructed fields.
    let u_r = reconstruct_velocity(mesh, basis, &a, u_d);
    let f_r = reconstruct_flux(basis, &a, u_d);
    let p_fluct = reconstruct_pressure_fluct(mesh, basis, &b);
    let lap = laplacian(mesh, 1.0, &u_r).unwrap();
    let conv = convection(mesh, &f_r, &u_r, Scheme::Linear).unwrap();
    let gradp = gauss_gradient(mesh, &p_fluct).unwrap();
    let want_mom = DVector::from_fn(n_u, |i, _| {
        nu * inner_product(mesh, &basis.phi[i], &lap).unwrap()
            - inner_product(mesh, &basis.phi[i], &conv).unwrap()
            - inner_product(mesh, &basis.phi[i], &gradp).unwrap()
    });
    assert_vec_close(&got_mom, &want_mom, 1e-9, "momentum residual");

    // Pressure side: D b + E - E_bc - F_bc a - a^T G a must equal
    // (grad chi_i, grad p_r) - (chi_i, div conv(F_r, u_r)).
    let mut ga = DVector::zeros(n_p);
    for (i, gi) in sys.blocks.poisson_convection.iter().enumerate() {
        ga[i] = (a.transpose() * gi * &a)[(0, 0)];
    }
    let got_pois = &sys.blocks.poisson_laplacian * &b + &sys.blocks.poisson_mean
        - &sys.bc_poisson_const
        - &sys.bc_poisson_linear * &a
        - &ga;
    let mut p_terms: Vec<(f64, &CellField<f64>)> = vec![(1.0, &basis.p_mean)];
    for (i, chi) in basis.chi.iter().enumerate() {
        p_terms.push((b[i], chi));
    }
    let p_r = CellField::linear_combination(mesh, &p_terms).unwrap();
    let div = divergence_of_flux(mesh, &face_flux(mesh, &conv).unwrap()).unwrap();
    let want_pois = DVector::from_fn(n_p, |i, _| {
        grad_inner_product(mesh, &basis.chi[i], &p_r).unwrap()
            - inner_product(mesh, &basis.chi[i], &div).unwrap()
    });
    assert_vec_close(&got_pois, &want_pois, 1e-9, "poisson residual");
}

#[test]
fn composed_system_is_exact_projection_of_full_order_residuals() {
    let mesh = test_mesh();
    let mut r = rng(39);
    let basis = synthetic_basis(&mesh, 4, 3, &mut r);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    for (seed, u_d) in [(101u64, 0.0), (102, 1.0), (103, 1.7)] {
        let sys = compose_system(blocks.clone(), 0.01, u_d).unwrap();
        check_full_residual_oracle(&mesh, &basis, &sys, seed);
    }
}

#[test]
fn truncation_is_exact() {
    let mesh = test_mesh();
    let mut r = rng(40);
    let basis = synthetic_basis(&mesh, 4, 4, &mut r);
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    let small_basis = basis.truncated(2, 3).unwrap();
    let direct = assemble_blocks(&mesh, &small_basis).unwrap();
    let cut = blocks.truncated(2, 3).unwrap();
    assert_eq!(direct.diffusion, cut.diffusion);
    assert_eq!(direct.pressure_gradient, cut.pressure_gradient);
    assert_eq!(direct.poisson_laplacian, cut.poisson_laplacian);
    for (a, b) in direct.convection.iter().zip(&cut.convection) {
        assert_eq!(a, b);
    }
    for (a, b) in direct.poisson_convection.iter().zip(&cut.poisson_convection) {
        assert_eq!(a, b);
    }
}

#[test]
fn mode_cap_is_enforced() {
    let mesh = generate_channel_mesh(4, 3, 2.0, 1.5, None, SideBc::Slip).unwrap();
    let mut r = rng(41);
    let basis = synthetic_basis(&mesh, 65, 1, &mut r);
    let err = assemble_blocks(&mesh, &basis).unwrap_err();
    assert!(err.to_string().contains("tensor-storage cap"));
}

#[test]
fn initialize_recovers_orthonormal_coefficients() {
    // With orthonormalised synthetic modes, projecting u_d phi_c + phi_1
    // returns the first unit vector.
    let mesh = test_mesh();
    let mut r = rng(42);
    let mut basis = synthetic_basis(&mesh, 3, 2, &mut r);
    // Gram-Schmidt in the mesh inner product.
    for i in 0..3 {
        for j in 0..i {
            let c = inner_product(&mesh, &basis.phi[i], &basis.phi[j]).unwrap();
            let vals: Vec<Vec2> = basis.phi[i]
                .values
                .iter()
                .zip(&basis.phi[j].values)
                .map(|(a, b)| *a - *b * c)
                .collect();
            basis.phi[i] = CellField::from_values(&mesh, vals, basis.phi[i].bcs.clone()).unwrap();
        }
        let n = inner_product(&mesh, &basis.phi[i], &basis.phi[i])
            .unwrap()
            .sqrt();
        let vals: Vec<Vec2> = basis.phi[i].values.iter().map(|v| *v * (1.0 / n)).collect();
        basis.phi[i] = CellField::from_values(&mesh, vals, basis.phi[i].bcs.clone()).unwrap();
    }
    let blocks = assemble_blocks(&mesh, &basis).unwrap();
    let sys = compose_system(blocks, 0.01, 1.3).unwrap();

    let u0 = CellField::linear_combination(
        &mesh,
        &[(1.3, &basis.lifting.phi_c), (1.0, &basis.phi[0])],
    )
    .unwrap();
    let state = romsolver::initialize(&mesh, &basis, &sys, &u0).unwrap();
    assert!((state.a[0] - 1.0).abs() <= 1e-10);
    assert!(state.a[1].abs() <= 1e-10 && state.a[2].abs() <= 1e-10);
    // And u_d phi_c alone projects to zero.
    let pure = CellField::linear_combination(&mesh, &[(1.3, &basis.lifting.phi_c)]).unwrap();
    let z = romsolver::initialize(&mesh, &basis, &sys, &pure).unwrap();
    assert!(z.a.amax() <= 1e-10);
}
