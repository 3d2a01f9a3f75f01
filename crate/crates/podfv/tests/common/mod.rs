//! Shared fixtures and independent oracles for the integration tests.
//!
//! The eigensolver and SVD here are deliberately written from scratch
//! (cyclic Jacobi rotations) so they share no code path with the library
//! implementations they check.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use podfv::field::{Bcs, CellField, FaceField, PatchBc};
use podfv::mesh::{BoundaryPatch, Face, Mesh, OrthoVariant, PatchKind};
use podfv::vec2::Vec2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic-Jacobi symmetric eigensolver: returns eigenvalues sorted
/// descending with matching eigenvector columns.
pub fn jacobi_eig(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = DMatrix::identity(n, n);
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[(i, j)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let lambda: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut q = DMatrix::zeros(n, n);
    for (pos, &i) in order.iter().enumerate() {
        for r in 0..n {
            q[(r, pos)] = v[(r, i)];
        }
    }
    (lambda, q)
}

/// One-sided Jacobi SVD: orthogonalises the columns of `a` by plane
/// rotations and returns singular values (descending) with the matching
/// left singular vectors.
pub fn onesided_jacobi_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut u = a.clone();
    let nc = u.ncols();
    let nr = u.nrows();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..nc {
            for q in (p + 1)..nc {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for k in 0..nr {
                    let (x, y) = (u[(k, p)], u[(k, q)]);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= 1e-15 * (app * aqq).sqrt().max(1e-300) {
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..nr {
                    let (x, y) = (u[(k, p)], u[(k, q)]);
                    u[(k, p)] = c * x - s * y;
                    u[(k, q)] = s * x + c * y;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sig: Vec<(f64, usize)> = (0..nc).map(|j| (u.column(j).norm(), j)).collect();
    sig.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut left = DMatrix::zeros(nr, nc);
    let mut values = Vec::with_capacity(nc);
    for (pos, &(s, j)) in sig.iter().enumerate() {
        values.push(s);
        if s > 0.0 {
            for r in 0..nr {
                left[(r, pos)] = u[(r, j)] / s;
            }
        }
    }
    (values, left)
}

/// Same vector up to a global sign flip.
pub fn matches_up_to_sign(x: &[f64], y: &[f64], tol: f64) -> bool {
    assert_eq!(x.len(), y.len());
    let d_plus = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let d_minus = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a + b).abs())
        .fold(0.0f64, f64::max);
    d_plus.min(d_minus) <= tol
}

pub fn rel_close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// Strip of `widths.len()` cells of varying width and unit height: a small
/// mesh with genuinely nonuniform volumes and interpolation weights.
pub fn stretched_strip_mesh(widths: &[f64]) -> Mesh {
    let n = widths.len();
    assert!(n >= 2);
    let mut x0 = 0.0;
    let mut centers = Vec::with_capacity(n);
    let mut volumes = Vec::with_capacity(n);
    let mut edges = vec![0.0];
    for &w in widths {
        centers.push(Vec2::new(x0 + 0.5 * w, 0.5));
        volumes.push(w);
        x0 += w;
        edges.push(x0);
    }
    let zero = Vec2::ZERO;
    let mut faces = Vec::new();
    for i in 0..n - 1 {
        faces.push(Face {
            area: Vec2::new(1.0, 0.0),
            center: Vec2::new(edges[i + 1], 0.5),
            owner: i,
            neighbour: Some(i + 1),
            patch: None,
            d: zero,
            delta: zero,
            correction: zero,
            weight: 0.0,
        });
    }
    let mut mk_boundary = |area: Vec2, center: Vec2, owner: usize, patch: usize, f: &mut Vec<Face>| {
        f.push(Face {
            area,
            center,
            owner,
            neighbour: None,
            patch: Some(patch),
            d: zero,
            delta: zero,
            correction: zero,
            weight: 0.0,
        });
        f.len() - 1
    };
    let inlet = vec![mk_boundary(
        Vec2::new(-1.0, 0.0),
        Vec2::new(0.0, 0.5),
        0,
        0,
        &mut faces,
    )];
    let outlet = vec![mk_boundary(
        Vec2::new(1.0, 0.0),
        Vec2::new(*edges.last().unwrap(), 0.5),
        n - 1,
        1,
        &mut faces,
    )];
    let mut bottom = Vec::new();
    for i in 0..n {
        bottom.push(mk_boundary(
            Vec2::new(0.0, -widths[i]),
            Vec2::new(centers[i].x, 0.0),
            i,
            2,
            &mut faces,
        ));
    }
    let mut top = Vec::new();
    for i in 0..n {
        top.push(mk_boundary(
            Vec2::new(0.0, widths[i]),
            Vec2::new(centers[i].x, 1.0),
            i,
            3,
            &mut faces,
        ));
    }
    let patches = vec![
        BoundaryPatch {
            name: "inlet".into(),
            kind: PatchKind::Inlet,
            faces: inlet,
        },
        BoundaryPatch {
            name: "outlet".into(),
            kind: PatchKind::Outlet,
            faces: outlet,
        },
        BoundaryPatch {
            name: "bottom".into(),
            kind: PatchKind::Wall,
            faces: bottom,
        },
        BoundaryPatch {
            name: "top".into(),
            kind: PatchKind::Wall,
            faces: top,
        },
    ];
    Mesh::from_parts(centers, volumes, faces, patches, OrthoVariant::default()).unwrap()
}

pub fn zg_scalar(mesh: &Mesh) -> Bcs<f64> {
    Bcs::uniform(mesh.patches.len(), PatchBc::ZeroGradient)
}

pub fn random_scalar_field(
    mesh: &Mesh,
    bcs: Bcs<f64>,
    rng: &mut ChaCha8Rng,
) -> CellField<f64> {
    let values = (0..mesh.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    CellField::from_values(mesh, values, bcs).unwrap()
}

pub fn random_vector_field(
    mesh: &Mesh,
    bcs: Bcs<Vec2>,
    rng: &mut ChaCha8Rng,
) -> CellField<Vec2> {
    let values = (0..mesh.n_cells())
        .map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    CellField::from_values(mesh, values, bcs).unwrap()
}

pub fn random_face_field(mesh: &Mesh, rng: &mut ChaCha8Rng) -> FaceField {
    FaceField::from_values(
        mesh,
        (0..mesh.n_faces()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}
