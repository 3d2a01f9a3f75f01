//! Proper orthogonal decomposition of velocity, pressure and mass-flux
//! snapshots by the method of snapshots.
//!
//! The velocity space is built from snapshots made homogeneous by
//! subtracting a scaled lifting field (the arithmetic snapshot average,
//! normalised to unit streamwise value at a reference inlet face). Pressure
//! modes are built from mean-removed snapshots. Mass-flux modes reuse the
//! velocity eigenvectors so that flux and velocity share reduced
//! coefficients.
//!
//! All pairings are taken in the volume-weighted discrete L2 inner product
//! of [`crate::fvops::inner_product`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{Bcs, CellField, FaceField, PatchBc};
use crate::fvops;
use crate::hfsolver::{homogeneous_velocity_bcs, pressure_bcs, SnapshotSet};
use crate::mesh::{Mesh, PatchKind};
use crate::vec2::Vec2;

/// Modes with eigenvalues below `EPS_CUT * lambda_1` are numerically
/// unusable: the `1/sqrt(lambda)` scaling amplifies roundoff.
pub const EPS_CUT: f64 = 1e-12;

/// Dirichlet lifting pair: a velocity field with unit streamwise value at
/// the reference inlet face and its associated mass flux.
#[derive(Clone, Debug)]
pub struct Lifting {
    pub phi_c: CellField<Vec2>,
    pub f_c: FaceField,
    pub reference_face: usize,
    /// Streamwise value of the raw snapshot average at the reference face.
    pub u_mr: f64,
}

/// POD basis for one mesh: velocity modes `phi`, flux modes `psi` (sharing
/// the velocity coefficients), pressure modes `chi`, the eigens of both
/// correlation problems, the pressure mean and the lifting pair.
#[derive(Clone, Debug)]
pub struct PodBasis {
    pub phi: Vec<CellField<Vec2>>,
    pub psi: Vec<FaceField>,
    pub chi: Vec<CellField<f64>>,
    pub lambda_u: Vec<f64>,
    pub lambda_p: Vec<f64>,
    pub q_u: DMatrix<f64>,
    pub q_p: DMatrix<f64>,
    pub p_mean: CellField<f64>,
    pub lifting: Lifting,
    pub n_s: usize,
}

impl PodBasis {
    pub fn n_u(&self) -> usize {
        self.phi.len()
    }

    pub fn n_p(&self) -> usize {
        self.chi.len()
    }

    /// First `n_u` velocity/flux modes and `n_p` pressure modes. Modes are
    /// nested, so truncation is exact.
    pub fn truncated(&self, n_u: usize, n_p: usize) -> Result<PodBasis> {
        if n_u > self.n_u() || n_p > self.n_p() {
            return Err(Error::Dimension(format!(
                "requested {n_u}/{n_p} modes, basis has {}/{}",
                self.n_u(),
                self.n_p()
            )));
        }
        Ok(PodBasis {
            phi: self.phi[..n_u].to_vec(),
            psi: self.psi[..n_u].to_vec(),
            chi: self.chi[..n_p].to_vec(),
            lambda_u: self.lambda_u.clone(),
            lambda_p: self.lambda_p.clone(),
            q_u: self.q_u.clone(),
            q_p: self.q_p.clone(),
            p_mean: self.p_mean.clone(),
            lifting: self.lifting.clone(),
            n_s: self.n_s,
        })
    }
}

/// Row weights turning plain dot products on component-interleaved velocity
/// columns into the volume-weighted inner product.
pub fn velocity_row_weights(mesh: &Mesh) -> Vec<f64> {
    let mut w = Vec::with_capacity(2 * mesh.n_cells());
    for &v in &mesh.cell_volumes {
        w.push(v);
        w.push(v);
    }
    w
}

pub fn scalar_row_weights(mesh: &Mesh) -> Vec<f64> {
    mesh.cell_volumes.clone()
}

/// Snapshot correlation matrix `C_ij = (s_i, s_j)` under the given row
/// weights. The result is exactly symmetric (computed once per unordered
/// pair) and positive semidefinite up to roundoff.
pub fn correlation_matrix(snaps: &DMatrix<f64>, row_weights: &[f64]) -> Result<DMatrix<f64>> {
    if snaps.nrows() != row_weights.len() {
        return Err(Error::Dimension(format!(
            "snapshot rows {} != weight entries {}",
            snaps.nrows(),
            row_weights.len()
        )));
    }
    let mut weighted = snaps.clone();
    for (i, &w) in row_weights.iter().enumerate() {
        for j in 0..weighted.ncols() {
            weighted[(i, j)] *= w;
        }
    }
    let mut c = snaps.tr_mul(&weighted);
    for i in 0..c.nrows() {
        for j in (i + 1)..c.ncols() {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }
    Ok(c)
}

/// Eigendecomposition of a symmetric correlation matrix.
#[derive(Clone, Debug)]
pub struct EigSpectrum {
    /// Nonnegative eigenvalues, sorted descending.
    pub lambda: Vec<f64>,
    /// Matching eigenvector columns.
    pub q: DMatrix<f64>,
}

/// Symmetric eigensolve with a reproducible ordering: eigenvalues sorted
/// descending, exact ties ordered by the row index of each eigenvector's
/// dominant entry, and every eigenvector signed so its dominant entry is
/// positive. Small negative eigenvalues (roundoff of a PSD matrix) are
/// clamped to zero.
pub fn eig_spectrum(c: &DMatrix<f64>) -> Result<EigSpectrum> {
    if c.nrows() != c.ncols() || c.nrows() == 0 {
        return Err(Error::Dimension("eig_spectrum needs a square matrix".into()));
    }
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..c.nrows() {
        for j in (i + 1)..c.ncols() {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * scale.max(1e-300) {
                return Err(Error::Pod("eig_spectrum: matrix is not symmetric".into()));
            }
        }
    }
    let se = nalgebra::SymmetricEigen::new(c.clone());
    let n = c.nrows();
    let argmax = |col: nalgebra::DVectorView<f64>| -> usize {
        let mut best = 0;
        let mut bestv = col[0].abs();
        for (i, v) in col.iter().enumerate().skip(1) {
            if v.abs() > bestv {
                bestv = v.abs();
                best = i;
            }
        }
        best
    };
    let mut order: Vec<usize> = (0..n).collect();
    let keys: Vec<(f64, usize)> = (0..n)
        .map(|i| (se.eigenvalues[i], argmax(se.eigenvectors.column(i))))
        .collect();
    order.sort_by(|&a, &b| {
        keys[b]
            .0
            .partial_cmp(&keys[a].0)
            .unwrap()
            .then(keys[a].1.cmp(&keys[b].1))
    });

    let lambda_scale = keys.iter().fold(0.0f64, |m, k| m.max(k.0.abs()));
    let mut lambda = Vec::with_capacity(n);
    let mut q = DMatrix::zeros(n, n);
    for (pos, &idx) in order.iter().enumerate() {
        let mut l = se.eigenvalues[idx];
        if l < -1e-12 * lambda_scale {
            return Err(Error::Pod(format!(
                "eig_spectrum: significantly negative eigenvalue {l:e}"
            )));
        }
        l = l.max(0.0);
        lambda.push(l);
        let col = se.eigenvectors.column(idx);
        let sign = if col[argmax(col)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            q[(r, pos)] = sign * col[r];
        }
    }
    Ok(EigSpectrum { lambda, q })
}

/// Number of modes usable under the eigenvalue cutoff.
pub fn usable_modes(lambda: &[f64]) -> usize {
    match lambda.first() {
        Some(&l1) if l1 > 0.0 => lambda.iter().take_while(|&&l| l >= EPS_CUT * l1).count(),
        _ => 0,
    }
}

/// Inlet face nearest the inlet centroid; the default lifting reference.
pub fn default_reference_face(mesh: &Mesh) -> Result<usize> {
    let inlet = mesh
        .patch_by_kind(PatchKind::Inlet)
        .ok_or_else(|| Error::Pod("mesh has no inlet patch".into()))?;
    let faces = &mesh.patches[inlet].faces;
    if faces.is_empty() {
        return Err(Error::Pod("inlet patch has no faces".into()));
    }
    let mut centroid = Vec2::ZERO;
    for &fid in faces {
        centroid += mesh.faces[fid].center;
    }
    centroid = centroid / faces.len() as f64;
    let mut best = faces[0];
    let mut bestd = f64::INFINITY;
    for &fid in faces {
        let d = (mesh.faces[fid].center - centroid).norm();
        if d < bestd {
            bestd = d;
            best = fid;
        }
    }
    Ok(best)
}

/// Builds the lifting pair from raw velocity snapshots: the arithmetic
/// snapshot average scaled so its streamwise inlet value at the reference
/// face is one, together with its mass flux.
///
/// `inlet_values` holds the streamwise inlet boundary value of each column.
pub fn lifting_function(
    mesh: &Mesh,
    u_snaps: &DMatrix<f64>,
    inlet_values: &[f64],
    reference_face: usize,
) -> Result<Lifting> {
    if u_snaps.nrows() != 2 * mesh.n_cells() {
        return Err(Error::Dimension("velocity snapshot rows != 2 n_cells".into()));
    }
    let ns = u_snaps.ncols();
    if ns == 0 || inlet_values.len() != ns {
        return Err(Error::Dimension("one inlet value per snapshot required".into()));
    }
    let face = mesh
        .faces
        .get(reference_face)
        .ok_or_else(|| Error::Pod("reference face out of range".into()))?;
    let on_inlet = face
        .patch
        .map(|p| mesh.patches[p].kind == PatchKind::Inlet)
        .unwrap_or(false);
    if !on_inlet {
        return Err(Error::Pod("reference face is not on the inlet patch".into()));
    }
    let u_mr = inlet_values.iter().sum::<f64>() / ns as f64;
    if u_mr.abs() < 1e-300 {
        return Err(Error::Pod(
            "lifting: zero snapshot-average value at the reference face".into(),
        ));
    }
    let mut flat = vec![0.0; u_snaps.nrows()];
    for j in 0..ns {
        for (i, v) in flat.iter_mut().enumerate() {
            *v += u_snaps[(i, j)];
        }
    }
    let scale = 1.0 / (ns as f64 * u_mr);
    for v in flat.iter_mut() {
        *v *= scale;
    }
    // Boundary closure of the scaled average: unit streamwise inlet value,
    // homogeneous elsewhere.
    let per_patch = mesh
        .patches
        .iter()
        .map(|p| match p.kind {
            PatchKind::Inlet => PatchBc::FixedValue(Vec2::new(u_mr / u_mr, 0.0)),
            PatchKind::Wall => PatchBc::FixedValue(Vec2::ZERO),
            PatchKind::Outlet => PatchBc::ZeroGradient,
            PatchKind::SlipSide => PatchBc::Slip,
        })
        .collect();
    let phi_c = CellField::from_flat(mesh, &flat, Bcs { per_patch })?;
    let f_c = fvops::face_flux(mesh, &phi_c)?;
    Ok(Lifting {
        phi_c,
        f_c,
        reference_face,
        u_mr,
    })
}

/// Removes the scaled lifting column from every snapshot:
/// `s'_j = s_j - u_d_j * lifting`. Works for velocity snapshots against the
/// flattened lifting field and for flux snapshots against its mass flux.
pub fn homogenize(
    snaps: &DMatrix<f64>,
    u_d: &[f64],
    lifting_flat: &[f64],
) -> Result<DMatrix<f64>> {
    if snaps.ncols() != u_d.len() {
        return Err(Error::Dimension("one scaling value per column required".into()));
    }
    if snaps.nrows() != lifting_flat.len() {
        return Err(Error::Dimension("lifting length != snapshot rows".into()));
    }
    let mut out = snaps.clone();
    for j in 0..out.ncols() {
        let s = u_d[j];
        if s != 0.0 {
            for i in 0..out.nrows() {
                out[(i, j)] -= s * lifting_flat[i];
            }
        }
    }
    Ok(out)
}

fn scaled_mode_column(
    snaps: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lambda: f64,
    col: usize,
) -> Vec<f64> {
    let scale = 1.0 / lambda.sqrt();
    let mut out = vec![0.0; snaps.nrows()];
    for j in 0..snaps.ncols() {
        let w = q[(j, col)] * scale;
        if w != 0.0 {
            for (i, v) in out.iter_mut().enumerate() {
                *v += snaps[(i, j)] * w;
            }
        }
    }
    out
}

fn check_mode_request(lambda: &[f64], n: usize, what: &str) -> Result<()> {
    let usable = usable_modes(lambda);
    if n > usable {
        return Err(Error::Dimension(format!(
            "{what}: requested {n} modes but only {usable} are numerically usable"
        )));
    }
    Ok(())
}

/// Velocity modes `phi_i = (1/sqrt(lambda_i)) U' q_i` from homogenised
/// snapshots. Modes carry homogeneous boundary conditions.
pub fn velocity_modes(
    mesh: &Mesh,
    u_prime: &DMatrix<f64>,
    lambda: &[f64],
    q: &DMatrix<f64>,
    n_u: usize,
) -> Result<Vec<CellField<Vec2>>> {
    check_mode_request(lambda, n_u, "velocity_modes")?;
    let bcs = homogeneous_velocity_bcs(mesh);
    (0..n_u)
        .map(|i| {
            let col = scaled_mode_column(u_prime, q, lambda[i], i);
            CellField::from_flat(mesh, &col, bcs.clone())
        })
        .collect()
}

/// Pressure decomposition: snapshot mean plus orthonormal fluctuation modes.
#[derive(Clone, Debug)]
pub struct PressurePod {
    pub p_mean: CellField<f64>,
    pub chi: Vec<CellField<f64>>,
    pub lambda: Vec<f64>,
    pub q: DMatrix<f64>,
}

/// Mean-removal POD of the pressure snapshots.
pub fn pressure_modes(mesh: &Mesh, p_snaps: &DMatrix<f64>, n_p: usize) -> Result<PressurePod> {
    if p_snaps.nrows() != mesh.n_cells() {
        return Err(Error::Dimension("pressure snapshot rows != n_cells".into()));
    }
    let ns = p_snaps.ncols();
    if ns == 0 {
        return Err(Error::Dimension("no pressure snapshots".into()));
    }
    let mut mean = vec![0.0; p_snaps.nrows()];
    for j in 0..ns {
        for (i, m) in mean.iter_mut().enumerate() {
            *m += p_snaps[(i, j)];
        }
    }
    for m in mean.iter_mut() {
        *m /= ns as f64;
    }
    let mut fluct = p_snaps.clone();
    for j in 0..ns {
        for i in 0..fluct.nrows() {
            fluct[(i, j)] -= mean[i];
        }
    }
    // Identical snapshots leave only mean-removal roundoff behind; the
    // correlation of that debris carries no usable spectrum.
    let snap_scale = p_snaps.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fluct_scale = fluct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eig = if fluct_scale <= 1e-14 * snap_scale.max(1e-300) {
        EigSpectrum {
            lambda: vec![0.0; ns],
            q: DMatrix::identity(ns, ns),
        }
    } else {
        let c = correlation_matrix(&fluct, &scalar_row_weights(mesh))?;
        eig_spectrum(&c)?
    };
    check_mode_request(&eig.lambda, n_p, "pressure_modes")?;
    let bcs = pressure_bcs(mesh);
    let chi = (0..n_p)
        .map(|i| {
            let col = scaled_mode_column(&fluct, &eig.q, eig.lambda[i], i);
            CellField::from_flat(mesh, &col, bcs.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PressurePod {
        p_mean: CellField::from_flat(mesh, &mean, bcs)?,
        chi,
        lambda: eig.lambda,
        q: eig.q,
    })
}

/// Mass-flux modes built with the velocity eigenpairs, so flux and velocity
/// share reduced coefficients. Not orthonormalised independently.
pub fn flux_modes(
    mesh: &Mesh,
    f_prime: &DMatrix<f64>,
    lambda_u: &[f64],
    q_u: &DMatrix<f64>,
    n_u: usize,
) -> Result<Vec<FaceField>> {
    if f_prime.nrows() != mesh.n_faces() {
        return Err(Error::Dimension("flux snapshot rows != n_faces".into()));
    }
    check_mode_request(lambda_u, n_u, "flux_modes")?;
    Ok((0..n_u)
        .map(|i| FaceField {
            values: scaled_mode_column(f_prime, q_u, lambda_u[i], i),
        })
        .collect())
}

/// Fraction of the total eigenvalue sum captured by the first `n` modes.
pub fn cumulative_energy(lambda: &[f64], n: usize) -> Result<f64> {
    let total: f64 = lambda.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Pod("cumulative_energy: all-zero spectrum".into()));
    }
    let n = n.min(lambda.len());
    Ok(lambda[..n].iter().sum::<f64>() / total)
}

/// Builds the complete basis from one or more snapshot sets (pooled POD when
/// several parameter values are given). Each set contributes its own inlet
/// value for the lifting scale.
pub fn build_basis(
    mesh: &Mesh,
    sets: &[&SnapshotSet],
    n_u: usize,
    n_p: usize,
    reference_face: Option<usize>,
) -> Result<PodBasis> {
    if sets.is_empty() {
        return Err(Error::Pod("no snapshot sets".into()));
    }
    for s in sets {
        s.validate()?;
        if s.u.nrows() != 2 * mesh.n_cells()
            || s.p.nrows() != mesh.n_cells()
            || s.flux.nrows() != mesh.n_faces()
        {
            return Err(Error::Dimension(
                "snapshot set does not match the mesh".into(),
            ));
        }
    }
    let ns: usize = sets.iter().map(|s| s.n_snapshots()).sum();
    let mut u = DMatrix::zeros(2 * mesh.n_cells(), ns);
    let mut p = DMatrix::zeros(mesh.n_cells(), ns);
    let mut flux = DMatrix::zeros(mesh.n_faces(), ns);
    let mut u_d = Vec::with_capacity(ns);
    let mut col = 0;
    for s in sets {
        for j in 0..s.n_snapshots() {
            u.column_mut(col).copy_from(&s.u.column(j));
            p.column_mut(col).copy_from(&s.p.column(j));
            flux.column_mut(col).copy_from(&s.flux.column(j));
            u_d.push(s.meta.u_in);
            col += 1;
        }
    }

    let reference = match reference_face {
        Some(f) => f,
        None => default_reference_face(mesh)?,
    };
    let lifting = lifting_function(mesh, &u, &u_d, reference)?;
    let u_prime = homogenize(&u, &u_d, &lifting.phi_c.flatten())?;
    let f_prime = homogenize(&flux, &u_d, &lifting.f_c.values)?;

    let c_u = correlation_matrix(&u_prime, &velocity_row_weights(mesh))?;
    let eig_u = eig_spectrum(&c_u)?;
    let phi = velocity_modes(mesh, &u_prime, &eig_u.lambda, &eig_u.q, n_u)?;
    let psi = flux_modes(mesh, &f_prime, &eig_u.lambda, &eig_u.q, n_u)?;
    let ppod = pressure_modes(mesh, &p, n_p)?;

    Ok(PodBasis {
        phi,
        psi,
        chi: ppod.chi,
        lambda_u: eig_u.lambda,
        lambda_p: ppod.lambda,
        q_u: eig_u.q,
        q_p: ppod.q,
        p_mean: ppod.p_mean,
        lifting,
        n_s: ns,
    })
}
