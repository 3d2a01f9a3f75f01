//! Discrete finite-volume operators over a [`Mesh`], plus the
//! volume-weighted inner product shared by the flow solver and the Galerkin
//! projection.
//!
//! Every operator is linear in its field argument (for a fixed scheme and
//! flux), reduces by the Gauss theorem to boundary sums under global volume
//! weighting, and uses a fixed cell/face ordering so results are
//! deterministic.

use crate::error::{Error, Result};
use crate::field::{Bcs, CellField, FaceField, FieldValue, PatchBc};
use crate::mesh::Mesh;
use crate::vec2::Vec2;

/// Face interpolation scheme for convected quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    /// Distance-weighted linear interpolation.
    Linear,
    /// Flux-upstream cell value.
    Upwind,
    /// `beta * linear + (1 - beta) * upwind`, `beta` in `[0, 1]`.
    Blend(f64),
}

fn derived_bcs<T: FieldValue>(mesh: &Mesh) -> Bcs<T> {
    // Fields produced by operators (gradients, convection, ...) carry a
    // plain extrapolation closure on every patch.
    Bcs::uniform(mesh.patches.len(), PatchBc::ZeroGradient)
}

/// Interpolates cell values to all faces. Boundary faces take the patch
/// closure value. Upwind-type schemes need the face flux to pick the
/// upstream side.
pub fn interpolate_to_faces<T: FieldValue>(
    mesh: &Mesh,
    field: &CellField<T>,
    scheme: Scheme,
    flux: Option<&FaceField>,
) -> Result<Vec<T>> {
    check_field(mesh, field)?;
    let beta = match scheme {
        Scheme::Linear => 1.0,
        Scheme::Upwind => 0.0,
        Scheme::Blend(b) => {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::Field(format!("blend factor {b} outside [0, 1]")));
            }
            b
        }
    };
    let needs_flux = beta < 1.0;
    let flux = match (needs_flux, flux) {
        (true, None) => {
            return Err(Error::Field(
                "upwind-type interpolation requires a face flux".into(),
            ))
        }
        (true, Some(f)) => {
            if f.values.len() != mesh.n_faces() {
                return Err(Error::Field("flux length mismatch".into()));
            }
            Some(f)
        }
        (false, f) => f,
    };
    let mut out = Vec::with_capacity(mesh.n_faces());
    for (fid, face) in mesh.faces.iter().enumerate() {
        let v = match face.neighbour {
            Some(n) => {
                let vp = field.values[face.owner];
                let vn = field.values[n];
                let lin = vp.scale(face.weight).add(vn.scale(1.0 - face.weight));
                if beta >= 1.0 {
                    lin
                } else {
                    let up = if flux.unwrap().values[fid] >= 0.0 { vp } else { vn };
                    lin.scale(beta).add(up.scale(1.0 - beta))
                }
            }
            None => field.boundary_face_value(mesh, fid),
        };
        out.push(v);
    }
    Ok(out)
}

/// Per-cell Gauss gradient of a scalar field: `(sum_f S_f p_f) / V`.
/// Exact for globally linear fields on uniform orthogonal meshes away from
/// extrapolated boundaries.
pub fn gauss_gradient(mesh: &Mesh, field: &CellField<f64>) -> Result<CellField<Vec2>> {
    let grads = gradient_values(mesh, field)?;
    CellField::from_values(mesh, grads, derived_bcs(mesh))
}

/// Raw per-cell gradient values (generic over scalar/vector fields).
pub(crate) fn gradient_values<T: FieldValue>(
    mesh: &Mesh,
    field: &CellField<T>,
) -> Result<Vec<T::Grad>> {
    check_field(mesh, field)?;
    let mut acc: Vec<T::Grad> = vec![T::Grad::default(); mesh.n_cells()];
    for (fid, face) in mesh.faces.iter().enumerate() {
        match face.neighbour {
            Some(n) => {
                let vf = field.values[face.owner].scale(face.weight).add(
                    field.values[n].scale(1.0 - face.weight),
                );
                let contrib = T::outer(face.area, vf);
                acc[face.owner] = T::grad_add(acc[face.owner], contrib);
                acc[n] = T::grad_add(acc[n], T::grad_scale(contrib, -1.0));
            }
            None => {
                let vf = field.boundary_face_value(mesh, fid);
                acc[face.owner] = T::grad_add(acc[face.owner], T::outer(face.area, vf));
            }
        }
    }
    for (g, &v) in acc.iter_mut().zip(&mesh.cell_volumes) {
        *g = T::grad_scale(*g, 1.0 / v);
    }
    Ok(acc)
}

/// Mass flux through each face, `F_f = S_f . u_f`, with linear face
/// interpolation and the patch closures at the boundary.
pub fn face_flux(mesh: &Mesh, u: &CellField<Vec2>) -> Result<FaceField> {
    let vals = interpolate_to_faces(mesh, u, Scheme::Linear, None)?;
    let values = mesh
        .faces
        .iter()
        .zip(&vals)
        .map(|(f, &v)| f.area.dot(v))
        .collect();
    Ok(FaceField { values })
}

/// Convective operator: per cell, `(sum_f F_f u_f) / V` with the face value
/// `u_f` taken from the requested scheme.
pub fn convection<T: FieldValue>(
    mesh: &Mesh,
    flux: &FaceField,
    u: &CellField<T>,
    scheme: Scheme,
) -> Result<CellField<T>> {
    if flux.values.len() != mesh.n_faces() {
        return Err(Error::Field("flux length mismatch".into()));
    }
    let face_vals = interpolate_to_faces(mesh, u, scheme, Some(flux))?;
    let mut out = vec![T::zero(); mesh.n_cells()];
    for (fid, face) in mesh.faces.iter().enumerate() {
        let t = face_vals[fid].scale(flux.values[fid]);
        out[face.owner] = out[face.owner].add(t);
        if let Some(n) = face.neighbour {
            out[n] = out[n].sub(t);
        }
    }
    for (v, &vol) in out.iter_mut().zip(&mesh.cell_volumes) {
        *v = v.scale(1.0 / vol);
    }
    CellField::from_values(mesh, out, derived_bcs(mesh))
}

/// Diffusion operator: per cell, `(sum_f nu S_f . (grad u)_f) / V`, split
/// into an implicit-style orthogonal part `|delta| (u_N - u_P) / |d|` and an
/// explicit transverse correction `k . (grad u)_f` interpolated from cell
/// gradients.
pub fn laplacian<T: FieldValue>(mesh: &Mesh, nu: f64, u: &CellField<T>) -> Result<CellField<T>> {
    check_field(mesh, u)?;
    let has_correction = mesh
        .faces
        .iter()
        .any(|f| f.correction.abs_max() > 1e-14 * (1.0 + f.area_mag()));
    let grads = if has_correction {
        Some(gradient_values(mesh, u)?)
    } else {
        None
    };
    let mut out = vec![T::zero(); mesh.n_cells()];
    for (fid, face) in mesh.faces.iter().enumerate() {
        let gdiff = face.delta.norm() / face.d.norm();
        let flux = match face.neighbour {
            Some(n) => {
                let mut t = u.values[n].sub(u.values[face.owner]).scale(gdiff);
                if let Some(g) = &grads {
                    let gf = T::grad_add(
                        T::grad_scale(g[face.owner], face.weight),
                        T::grad_scale(g[n], 1.0 - face.weight),
                    );
                    t = t.add(T::grad_dot(face.correction, gf));
                }
                t
            }
            None => {
                let vb = u.boundary_face_value(mesh, fid);
                let mut t = vb.sub(u.values[face.owner]).scale(gdiff);
                if let Some(g) = &grads {
                    t = t.add(T::grad_dot(face.correction, g[face.owner]));
                }
                t
            }
        };
        let flux = flux.scale(nu);
        out[face.owner] = out[face.owner].add(flux);
        if let Some(n) = face.neighbour {
            out[n] = out[n].sub(flux);
        }
    }
    for (v, &vol) in out.iter_mut().zip(&mesh.cell_volumes) {
        *v = v.scale(1.0 / vol);
    }
    CellField::from_values(mesh, out, derived_bcs(mesh))
}

/// Per-cell divergence of a face flux: `(sum_f +/- F_f) / V` with sign by
/// ownership.
pub fn divergence_of_flux(mesh: &Mesh, flux: &FaceField) -> Result<CellField<f64>> {
    if flux.values.len() != mesh.n_faces() {
        return Err(Error::Field("flux length mismatch".into()));
    }
    let mut out = vec![0.0; mesh.n_cells()];
    for (fid, face) in mesh.faces.iter().enumerate() {
        out[face.owner] += flux.values[fid];
        if let Some(n) = face.neighbour {
            out[n] -= flux.values[fid];
        }
    }
    for (v, &vol) in out.iter_mut().zip(&mesh.cell_volumes) {
        *v /= vol;
    }
    CellField::from_values(mesh, out, derived_bcs(mesh))
}

/// Volume-weighted inner product `sum_i (a_i . b_i) V_i`. Symmetric,
/// bilinear and positive definite; the discrete L2 pairing used everywhere.
pub fn inner_product<T: FieldValue>(
    mesh: &Mesh,
    a: &CellField<T>,
    b: &CellField<T>,
) -> Result<f64> {
    check_field(mesh, a)?;
    check_field(mesh, b)?;
    let mut s = 0.0;
    for i in 0..mesh.n_cells() {
        s += a.values[i].dot(b.values[i]) * mesh.cell_volumes[i];
    }
    Ok(s)
}

/// Inner product of the Gauss gradients of two scalar fields.
pub fn grad_inner_product(
    mesh: &Mesh,
    p: &CellField<f64>,
    q: &CellField<f64>,
) -> Result<f64> {
    let gp = gauss_gradient(mesh, p)?;
    let gq = gauss_gradient(mesh, q)?;
    inner_product(mesh, &gp, &gq)
}

fn check_field<T: FieldValue>(mesh: &Mesh, f: &CellField<T>) -> Result<()> {
    if f.values.len() != mesh.n_cells() {
        return Err(Error::Field(format!(
            "field has {} values, mesh has {} cells",
            f.values.len(),
            mesh.n_cells()
        )));
    }
    if f.bcs.per_patch.len() != mesh.patches.len() {
        return Err(Error::Field("bc table does not cover all patches".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_channel_mesh, SideBc};

    fn zg<T: FieldValue>(mesh: &Mesh) -> Bcs<T> {
        Bcs::uniform(mesh.patches.len(), PatchBc::ZeroGradient)
    }

    /// 1D-like strip of `n` unit cells along x.
    fn strip(n: usize) -> Mesh {
        generate_channel_mesh(n, 2, n as f64, 2.0, None, SideBc::Slip).unwrap()
    }

    fn profile_bcs(mesh: &Mesh) -> Bcs<f64> {
        // Closure matching p = x: Dirichlet on the x-normal patches (where
        // the profile is constant per patch), zero-gradient on the sides.
        let per_patch = mesh
            .patches
            .iter()
            .map(|p| match p.kind {
                crate::mesh::PatchKind::Inlet | crate::mesh::PatchKind::Outlet => {
                    PatchBc::FixedValue(mesh.faces[p.faces[0]].center.x)
                }
                _ => PatchBc::ZeroGradient,
            })
            .collect();
        Bcs { per_patch }
    }

    #[test]
    fn constant_field_interpolates_to_constant() {
        let m = strip(4);
        let f = CellField::new(&m, 3.25, zg(&m)).unwrap();
        let flux = FaceField::from_values(&m, vec![1.0; m.n_faces()]).unwrap();
        for scheme in [Scheme::Linear, Scheme::Upwind, Scheme::Blend(0.7)] {
            let vals = interpolate_to_faces(&m, &f, scheme, Some(&flux)).unwrap();
            assert!(vals.iter().all(|&v| (v - 3.25).abs() <= 1e-15));
        }
    }

    #[test]
    fn linear_scheme_exact_on_linear_field() {
        // p(x) = x on a uniform grid: the face at x = 1 interpolates to 1.
        let m = strip(3);
        let vals: Vec<f64> = m.cell_centers.iter().map(|c| c.x).collect();
        let f = CellField::from_values(&m, vals, zg(&m)).unwrap();
        let face_vals = interpolate_to_faces(&m, &f, Scheme::Linear, None).unwrap();
        let fid = m
            .faces
            .iter()
            .position(|f| f.is_internal() && (f.center.x - 1.0).abs() < 1e-12)
            .unwrap();
        assert!((face_vals[fid] - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn upwind_takes_upstream_value() {
        // Cells (1, 2, 3) along x with positive flux: internal faces carry
        // the left-cell values (1, 2).
        let m = strip(3);
        let vals: Vec<f64> = m.cell_centers.iter().map(|c| c.x + 0.5).collect();
        let f = CellField::from_values(&m, vals, zg(&m)).unwrap();
        let flux = FaceField::from_values(&m, vec![1.0; m.n_faces()]).unwrap();
        let face_vals = interpolate_to_faces(&m, &f, Scheme::Upwind, Some(&flux)).unwrap();
        for (fid, face) in m.faces.iter().enumerate() {
            if face.is_internal() && face.area.x != 0.0 {
                let expected = f.values[face.owner];
                assert_eq!(face_vals[fid], expected);
            }
        }
    }

    #[test]
    fn upwind_without_flux_rejected() {
        let m = strip(3);
        let f = CellField::new(&m, 1.0, zg(&m)).unwrap();
        assert!(interpolate_to_faces(&m, &f, Scheme::Upwind, None).is_err());
    }

    #[test]
    fn gradient_of_uniform_field_is_zero() {
        let m = generate_channel_mesh(4, 3, 2.0, 1.5, None, SideBc::Wall).unwrap();
        let f = CellField::new(&m, 7.0, zg(&m)).unwrap();
        let g = gauss_gradient(&m, &f).unwrap();
        assert!(g.values.iter().all(|v| v.abs_max() <= 1e-14));
    }

    #[test]
    fn gradient_of_linear_field_interior_exact() {
        let m = generate_channel_mesh(5, 5, 5.0, 5.0, None, SideBc::Wall).unwrap();
        let vals: Vec<f64> = m.cell_centers.iter().map(|c| c.x).collect();
        let f = CellField::from_values(&m, vals, zg(&m)).unwrap();
        let g = gauss_gradient(&m, &f).unwrap();
        // Interior cell: all four faces internal.
        let interior = (0..m.n_cells())
            .find(|&c| m.cell_faces(c).iter().all(|&(fid, _)| m.faces[fid as usize].is_internal()))
            .unwrap();
        assert!((g.values[interior] - Vec2::new(1.0, 0.0)).abs_max() <= 1e-12);
    }

    #[test]
    fn gradient_telescopes_to_boundary_sum() {
        let m = generate_channel_mesh(6, 4, 3.0, 2.0, None, SideBc::Slip).unwrap();
        let vals: Vec<f64> = m
            .cell_centers
            .iter()
            .map(|c| (3.1 * c.x).sin() + 0.7 * c.y * c.y)
            .collect();
        let f = CellField::from_values(&m, vals, zg(&m)).unwrap();
        let g = gauss_gradient(&m, &f).unwrap();
        let mut lhs = Vec2::ZERO;
        for i in 0..m.n_cells() {
            lhs += g.values[i] * m.cell_volumes[i];
        }
        let mut rhs = Vec2::ZERO;
        for fid in m.n_internal..m.n_faces() {
            rhs += m.faces[fid].area * f.boundary_face_value(&m, fid);
        }
        assert!((lhs - rhs).abs_max() <= 1e-12);
    }

    #[test]
    fn face_flux_of_uniform_velocity() {
        let m = strip(4);
        let u = CellField::new(&m, Vec2::new(1.0, 0.0), zg(&m)).unwrap();
        let flux = face_flux(&m, &u).unwrap();
        let fid = m.faces.iter().position(|f| f.is_internal()).unwrap();
        // S_f = (1, 0) for x-normal faces of unit height.
        assert!((flux.values[fid] - 1.0).abs() <= 1e-14);
        let zero_u = CellField::new(&m, Vec2::ZERO, zg(&m)).unwrap();
        let zero_flux = face_flux(&m, &zero_u).unwrap();
        assert!(zero_flux.values.iter().all(|&v| v == 0.0));
        // Divergence of a constant-velocity flux vanishes cell by cell.
        let div = divergence_of_flux(&m, &flux).unwrap();
        assert!(div.values.iter().all(|&v| v.abs() <= 1e-13));
    }

    #[test]
    fn convection_of_uniform_field_vanishes() {
        let m = strip(4);
        let u = CellField::new(&m, Vec2::new(1.0, 0.0), zg(&m)).unwrap();
        let flux = face_flux(&m, &u).unwrap(); // zero divergence
        let c = CellField::new(&m, 2.5, zg(&m)).unwrap();
        let conv = convection(&m, &flux, &c, Scheme::Linear).unwrap();
        assert!(conv.values.iter().all(|&v| v.abs() <= 1e-13));
        let zero_flux = FaceField::zeros(&m);
        let conv0 = convection(&m, &zero_flux, &c, Scheme::Upwind).unwrap();
        assert!(conv0.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convection_hand_sum_upwind() {
        // Cells (1, 2, 3), unit positive flux on x-faces, unit volumes:
        // the middle cell receives (1*2 - 1*1)/1 = 1.
        let m = strip(3);
        let vals: Vec<f64> = m.cell_centers.iter().map(|c| c.x + 0.5).collect();
        let f = CellField::from_values(&m, vals, zg(&m)).unwrap();
        let mut flux = FaceField::zeros(&m);
        for (fid, face) in m.faces.iter().enumerate() {
            if face.area.x != 0.0 {
                flux.values[fid] = face.area.x.signum();
            }
        }
        let conv = convection(&m, &flux, &f, Scheme::Upwind).unwrap();
        let mid = m
            .cell_centers
            .iter()
            .position(|c| (c.x - 1.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12)
            .unwrap();
        assert!((conv.values[mid] - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn laplacian_of_linear_field_interior_zero() {
        let m = generate_channel_mesh(6, 6, 3.0, 3.0, None, SideBc::Wall).unwrap();
        let vals: Vec<f64> = m.cell_centers.iter().map(|c| 2.0 * c.x - c.y).collect();
        let f = CellField::from_values(&m, vals, zg(&m)).unwrap();
        let lap = laplacian(&m, 1.0, &f).unwrap();
        for c in 0..m.n_cells() {
            if m.cell_faces(c).iter().all(|&(fid, _)| m.faces[fid as usize].is_internal()) {
                assert!(lap.values[c].abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn laplacian_of_quadratic_is_two() {
        // u = x^2 on a strip with spacing h: the interior second difference
        // (u_E - 2u_P + u_W)/h^2 equals 2 exactly.
        let m = strip(5);
        let vals: Vec<f64> = m.cell_centers.iter().map(|c| c.x * c.x).collect();
        let f = CellField::from_values(&m, vals, zg(&m)).unwrap();
        let lap = laplacian(&m, 1.0, &f).unwrap();
        for c in 0..m.n_cells() {
            let all_x_internal = m.cell_faces(c).iter().all(|&(fid, _)| {
                let fc = &m.faces[fid as usize];
                fc.is_internal() || fc.area.x == 0.0
            });
            // Slip sides contribute nothing for a y-independent scalar.
            if all_x_internal {
                assert!((lap.values[c] - 2.0).abs() <= 1e-12, "cell {c}");
            }
        }
    }

    #[test]
    fn orthogonal_mesh_has_zero_correction() {
        let m = strip(4);
        for f in &m.faces {
            assert!(f.correction.abs_max() <= 1e-14);
        }
    }

    #[test]
    fn divergence_telescopes() {
        let m = generate_channel_mesh(5, 4, 2.5, 2.0, None, SideBc::Wall).unwrap();
        let flux = FaceField::from_values(
            &m,
            (0..m.n_faces()).map(|i| ((i * 37 + 11) % 17) as f64 - 8.0).collect(),
        )
        .unwrap();
        let div = divergence_of_flux(&m, &flux).unwrap();
        let lhs: f64 = div
            .values
            .iter()
            .zip(&m.cell_volumes)
            .map(|(d, v)| d * v)
            .sum();
        let rhs: f64 = (m.n_internal..m.n_faces()).map(|f| flux.values[f]).sum();
        assert!((lhs - rhs).abs() <= 1e-12);
        let zero = divergence_of_flux(&m, &FaceField::zeros(&m)).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inner_product_basics() {
        let m = generate_channel_mesh(3, 2, 3.0, 1.0, None, SideBc::Wall).unwrap();
        // Total volume 3: (1, 2) -> 6.
        let a = CellField::new(&m, 1.0, zg(&m)).unwrap();
        let b = CellField::new(&m, 2.0, zg(&m)).unwrap();
        assert!((inner_product(&m, &a, &b).unwrap() - 6.0).abs() <= 1e-14);
        let zero = CellField::new(&m, 0.0, zg(&m)).unwrap();
        assert_eq!(inner_product(&m, &zero, &zero).unwrap(), 0.0);
        let mut vals = vec![0.0; m.n_cells()];
        vals[1] = 1e-8;
        let nz = CellField::from_values(&m, vals, zg(&m)).unwrap();
        assert!(inner_product(&m, &nz, &nz).unwrap() > 0.0);
    }

    #[test]
    fn grad_inner_product_of_linear_profile() {
        // p = q = x with an exact closure: the gradient is (1, 0)
        // everywhere, so the product equals the total volume.
        let m = generate_channel_mesh(4, 4, 1.0, 1.0, None, SideBc::Wall).unwrap();
        let vals: Vec<f64> = m.cell_centers.iter().map(|c| c.x).collect();
        let bcs = profile_bcs(&m);
        let p = CellField::from_values(&m, vals, bcs).unwrap();
        let got = grad_inner_product(&m, &p, &p).unwrap();
        assert!((got - m.total_volume()).abs() <= 1e-12);
        // Constant field pairs to zero against anything.
        let c = CellField::new(&m, 4.0, zg(&m)).unwrap();
        assert!(grad_inner_product(&m, &c, &p).unwrap().abs() <= 1e-13);
        // Symmetry.
        let vals_q: Vec<f64> = m.cell_centers.iter().map(|c| c.y * c.x).collect();
        let q = CellField::from_values(&m, vals_q, zg(&m)).unwrap();
        let pq = grad_inner_product(&m, &p, &q).unwrap();
        let qp = grad_inner_product(&m, &q, &p).unwrap();
        assert!((pq - qp).abs() <= 1e-13);
    }
}
