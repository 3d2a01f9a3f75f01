//! Method-of-snapshots POD checked against independent dense oracles: a
//! cyclic-Jacobi eigensolver for the correlation spectrum and a one-sided
//! Jacobi SVD of the volume-weighted snapshot matrix for modes and
//! eigenvalues.

mod common;

use common::{jacobi_eig, matches_up_to_sign, onesided_jacobi_svd, rng, stretched_strip_mesh};
use nalgebra::DMatrix;
use podfv::fvops::inner_product;
use podfv::mesh::{generate_channel_mesh, Mesh, SideBc};
use podfv::pod::{
    correlation_matrix, eig_spectrum, scalar_row_weights, usable_modes, velocity_modes,
    velocity_row_weights,
};
use rand::Rng;

fn random_symmetric_psd(n: usize, seed: u64) -> DMatrix<f64> {
    // Random symmetric entries, shifted well into the positive-definite
    // range (same eigenvectors as the unshifted matrix).
    let mut r = rng(seed);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = r.gen_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m + DMatrix::identity(n, n) * (n as f64)
}

#[test]
fn eig_spectrum_matches_jacobi_oracle() {
    for seed in [1u64, 2, 3] {
        let c = random_symmetric_psd(8, seed);
        let got = eig_spectrum(&c).unwrap();
        let (lam, q) = jacobi_eig(&c);
        let scale = lam[0].abs();
        for i in 0..8 {
            assert!(
                (got.lambda[i] - lam[i]).abs() <= 1e-9 * scale,
                "seed {seed} eigenvalue {i}: {} vs {}",
                got.lambda[i],
                lam[i]
            );
            let gcol: Vec<f64> = got.q.column(i).iter().cloned().collect();
            let ocol: Vec<f64> = q.column(i).iter().cloned().collect();
            assert!(
                matches_up_to_sign(&gcol, &ocol, 1e-9),
                "seed {seed} eigenvector {i}"
            );
        }
    }
}

#[test]
fn eig_spectrum_residual_on_psd_matrix() {
    // PSD matrix: A = B^T B.
    let mut r = rng(7);
    let b = DMatrix::from_fn(12, 8, |_, _| r.gen_range(-1.0..1.0));
    let c = b.tr_mul(&b);
    let e = eig_spectrum(&c).unwrap();
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.lambda.clone()));
    let resid = (&c * &e.q - &e.q * lam).norm();
    assert!(resid <= 1e-10 * c.norm());
    // And the clamped spectrum is nonnegative, sorted descending.
    for w in e.lambda.windows(2) {
        assert!(w[0] >= w[1]);
    }
    assert!(e.lambda.iter().all(|&l| l >= 0.0));
}

/// Weighted snapshots on a mesh with nonuniform volumes: the
/// method-of-snapshots modes must match the left singular vectors of
/// `W^(1/2) S` up to sign, with eigenvalues equal to squared singular
/// values.
fn check_against_svd(mesh: &Mesh, snaps: &DMatrix<f64>, weights: &[f64], vector_field: bool) {
    let c = correlation_matrix(snaps, weights).unwrap();
    let eig = eig_spectrum(&c).unwrap();
    let k = usable_modes(&eig.lambda);
    assert!(k >= 2, "test instance should have at least two usable modes");

    let mut weighted = snaps.clone();
    for (i, &w) in weights.iter().enumerate() {
        for j in 0..weighted.ncols() {
            weighted[(i, j)] *= w.sqrt();
        }
    }
    let (sigma, left) = onesided_jacobi_svd(&weighted);

    let scale = eig.lambda[0];
    for i in 0..k {
        assert!(
            (eig.lambda[i] - sigma[i] * sigma[i]).abs() <= 1e-9 * scale,
            "eigenvalue {i}: {} vs sigma^2 {}",
            eig.lambda[i],
            sigma[i] * sigma[i]
        );
    }

    if vector_field {
        let modes = velocity_modes(mesh, snaps, &eig.lambda, &eig.q, k).unwrap();
        for (i, m) in modes.iter().enumerate() {
            // Weighted flattened mode vs left singular vector.
            let flat = m.flatten();
            let wmode: Vec<f64> = flat
                .iter()
                .zip(weights)
                .map(|(v, w)| v * w.sqrt())
                .collect();
            let ocol: Vec<f64> = left.column(i).iter().cloned().collect();
            assert!(
                matches_up_to_sign(&wmode, &ocol, 1e-9),
                "mode {i} disagrees with the SVD oracle"
            );
            // Orthonormality in the mesh inner product.
            for (j, mj) in modes.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = inner_product(mesh, m, mj).unwrap();
                assert!((got - want).abs() <= 1e-8, "({i},{j}) = {got}");
            }
        }
    }
}

#[test]
fn velocity_pod_matches_weighted_svd_oracle() {
    // Nonuniform volumes so the weighting genuinely matters.
    let mesh = stretched_strip_mesh(&[0.3, 0.7, 1.3, 0.5, 0.9, 1.1, 0.4, 0.8]);
    let mut r = rng(21);
    let ns = 6;
    let snaps = DMatrix::from_fn(2 * mesh.n_cells(), ns, |_, _| r.gen_range(-1.0..1.0));
    check_against_svd(&mesh, &snaps, &velocity_row_weights(&mesh), true);
}

#[test]
fn scalar_pod_matches_weighted_svd_oracle() {
    let mesh = stretched_strip_mesh(&[0.4, 1.2, 0.6, 1.0, 0.8, 1.4]);
    let mut r = rng(22);
    let ns = 5;
    let snaps = DMatrix::from_fn(mesh.n_cells(), ns, |_, _| r.gen_range(-1.0..1.0));
    check_against_svd(&mesh, &snaps, &scalar_row_weights(&mesh), false);
}

#[test]
fn reconstruction_error_nonincreasing_in_mode_count() {
    let mesh = generate_channel_mesh(8, 6, 2.0, 1.5, None, SideBc::Slip).unwrap();
    let mut r = rng(23);
    let ns = 8;
    let weights = velocity_row_weights(&mesh);
    let snaps = DMatrix::from_fn(2 * mesh.n_cells(), ns, |_, _| r.gen_range(-1.0..1.0));
    let c = correlation_matrix(&snaps, &weights).unwrap();
    let eig = eig_spectrum(&c).unwrap();
    let kmax = usable_modes(&eig.lambda);
    let modes = velocity_modes(&mesh, &snaps, &eig.lambda, &eig.q, kmax).unwrap();

    let wdot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(&weights).map(|((x, y), w)| x * y * w).sum()
    };
    for j in 0..ns {
        let col: Vec<f64> = snaps.column(j).iter().cloned().collect();
        let mut prev = f64::INFINITY;
        let mut recon = vec![0.0; col.len()];
        for m in modes.iter().take(kmax) {
            let flat = m.flatten();
            let coef = wdot(&col, &flat);
            for (r, f) in recon.iter_mut().zip(&flat) {
                *r += coef * f;
            }
            let diff: Vec<f64> = col.iter().zip(&recon).map(|(a, b)| a - b).collect();
            let err = wdot(&diff, &diff).sqrt();
            assert!(err <= prev * (1.0 + 1e-10));
            prev = err;
        }
        // Full basis reproduces the snapshot.
        let norm = wdot(&col, &col).sqrt();
        assert!(prev <= 1e-8 * norm, "snapshot {j}: residual {prev:e}");
    }
}
