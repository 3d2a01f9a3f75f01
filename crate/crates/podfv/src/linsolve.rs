//! Dependency-free iterative solvers for the face-based sparse systems
//! assembled by the flow solver: preconditioned conjugate gradients for the
//! symmetric pressure equation and symmetric Gauss-Seidel smoothing for the
//! momentum equations. Both are deterministic (fixed sweep/reduction order).

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Sparse matrix in face-coefficient (LDU) storage: one diagonal entry per
/// cell, and for every internal face an `upper` coefficient (owner row,
/// neighbour column) and a `lower` coefficient (neighbour row, owner
/// column). Boundary contributions live on the diagonal / right-hand side.
/// Face endpoints are kept as flat arrays so the iteration kernels stay
/// cache-friendly.
#[derive(Clone, Debug)]
pub struct FaceSystem {
    pub diag: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    owner: Vec<u32>,
    neigh: Vec<u32>,
}

impl FaceSystem {
    pub fn zeros(mesh: &Mesh) -> Self {
        let mut owner = Vec::with_capacity(mesh.n_internal);
        let mut neigh = Vec::with_capacity(mesh.n_internal);
        for fid in 0..mesh.n_internal {
            owner.push(mesh.faces[fid].owner as u32);
            neigh.push(mesh.faces[fid].neighbour.unwrap() as u32);
        }
        Self {
            diag: vec![0.0; mesh.n_cells()],
            lower: vec![0.0; mesh.n_internal],
            upper: vec![0.0; mesh.n_internal],
            owner,
            neigh,
        }
    }

    pub fn from_parts(mesh: &Mesh, diag: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let mut sys = Self::zeros(mesh);
        sys.diag = diag;
        sys.lower = lower;
        sys.upper = upper;
        sys
    }

    pub fn matvec(&self, _mesh: &Mesh, x: &[f64], y: &mut [f64]) {
        for i in 0..x.len() {
            y[i] = self.diag[i] * x[i];
        }
        for fid in 0..self.owner.len() {
            let o = self.owner[fid] as usize;
            let n = self.neigh[fid] as usize;
            y[o] += self.upper[fid] * x[n];
            y[n] += self.lower[fid] * x[o];
        }
    }

    pub fn residual(&self, mesh: &Mesh, x: &[f64], b: &[f64], r: &mut [f64]) {
        self.matvec(mesh, x, r);
        for i in 0..r.len() {
            r[i] = b[i] - r[i];
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
}

/// Simplified incomplete-Cholesky preconditioner for symmetric face systems
/// whose internal faces all satisfy `owner < neighbour` (true for generated
/// channel meshes). Substitution sweeps follow the face list sorted by
/// neighbour index.
pub struct DicPrecon {
    rdiag: Vec<f64>,
    owner: Vec<u32>,
    neigh: Vec<u32>,
    upper: Vec<f64>,
}

impl DicPrecon {
    /// `by_neigh` is the internal face list sorted by ascending neighbour
    /// index (cacheable per mesh via [`dic_face_order`]).
    pub fn build(_mesh: &Mesh, sys: &FaceSystem, by_neigh: &[u32]) -> Self {
        let mut d = sys.diag.clone();
        let mut owner = Vec::with_capacity(by_neigh.len());
        let mut neigh = Vec::with_capacity(by_neigh.len());
        let mut upper = Vec::with_capacity(by_neigh.len());
        for &fid in by_neigh {
            let o = sys.owner[fid as usize] as usize;
            let n = sys.neigh[fid as usize] as usize;
            let u = sys.upper[fid as usize];
            d[n] -= u * u / d[o];
            owner.push(o as u32);
            neigh.push(n as u32);
            upper.push(u);
        }
        for v in d.iter_mut() {
            *v = 1.0 / *v;
        }
        DicPrecon {
            rdiag: d,
            owner,
            neigh,
            upper,
        }
    }

    fn apply(&self, r: &[f64], w: &mut [f64]) {
        for i in 0..r.len() {
            w[i] = self.rdiag[i] * r[i];
        }
        for fid in 0..self.owner.len() {
            let o = self.owner[fid] as usize;
            let n = self.neigh[fid] as usize;
            w[n] -= self.rdiag[n] * self.upper[fid] * w[o];
        }
        for fid in (0..self.owner.len()).rev() {
            let o = self.owner[fid] as usize;
            let n = self.neigh[fid] as usize;
            w[o] -= self.rdiag[o] * self.upper[fid] * w[n];
        }
    }
}

/// Internal faces sorted by neighbour index, or `None` when some face has
/// `owner >= neighbour` (then only Jacobi preconditioning applies).
pub fn dic_face_order(mesh: &Mesh) -> Option<Vec<u32>> {
    for fid in 0..mesh.n_internal {
        let f = &mesh.faces[fid];
        if f.owner >= f.neighbour.unwrap() {
            return None;
        }
    }
    let mut order: Vec<u32> = (0..mesh.n_internal as u32).collect();
    order.sort_by_key(|&f| mesh.faces[f as usize].neighbour.unwrap());
    Some(order)
}

pub enum Precon {
    Jacobi,
    Dic(DicPrecon),
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Jacobi-preconditioned conjugate gradients. Converged when the 2-norm
/// residual drops below `tol_rel` times the larger of `|b|` and the initial
/// residual, and (when given) the max-norm residual drops below
/// `tol_abs_inf`.
pub fn cg_jacobi(
    mesh: &Mesh,
    sys: &FaceSystem,
    b: &[f64],
    x0: &[f64],
    tol_rel: f64,
    tol_abs_inf: Option<f64>,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    cg(mesh, sys, b, x0, tol_rel, tol_abs_inf, max_iter, &Precon::Jacobi)
}

/// Preconditioned conjugate gradients; see [`cg_jacobi`] for the stopping
/// rule.
#[allow(clippy::too_many_arguments)]
pub fn cg(
    mesh: &Mesh,
    sys: &FaceSystem,
    b: &[f64],
    x0: &[f64],
    tol_rel: f64,
    tol_abs_inf: Option<f64>,
    max_iter: usize,
    precon: &Precon,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    sys.residual(mesh, &x, b, &mut r);
    let scale = norm2(b).max(norm2(&r));
    let tol2 = tol_rel * scale;
    let converged = |r: &[f64]| -> bool {
        let ok2 = norm2(r) <= tol2;
        match tol_abs_inf {
            Some(t) => ok2 && norm_inf(r) <= t,
            None => ok2,
        }
    };
    let mut history = vec![norm2(&r)];
    if converged(&r) || scale == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                final_residual: history[0],
                residual_history: history,
            },
        ));
    }

    let inv_diag: Vec<f64> = sys.diag.iter().map(|&d| 1.0 / d).collect();
    let apply = |r: &[f64], z: &mut [f64]| match precon {
        Precon::Jacobi => {
            for i in 0..r.len() {
                z[i] = r[i] * inv_diag[i];
            }
        }
        Precon::Dic(dic) => dic.apply(r, z),
    };
    let mut z = vec![0.0; n];
    apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];

    for it in 1..=max_iter {
        sys.matvec(mesh, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::Solver(format!(
                "cg: matrix not positive definite (p.Ap = {pap:e} at iteration {it})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        history.push(norm2(&r));
        if converged(&r) {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    final_residual: *history.last().unwrap(),
                    residual_history: history,
                },
            ));
        }
        apply(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!(
        "cg: no convergence in {max_iter} iterations (residual {:.3e} -> {:.3e})",
        history[0],
        history.last().unwrap()
    )))
}

/// Symmetric Gauss-Seidel sweeps until the 2-norm residual falls below
/// `tol_rel * max(|b|, |r0|)`.
pub fn gauss_seidel(
    mesh: &Mesh,
    sys: &FaceSystem,
    b: &[f64],
    x0: &[f64],
    tol_rel: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    sys.residual(mesh, &x, b, &mut r);
    let scale = norm2(b).max(norm2(&r));
    let tol = tol_rel * scale;
    let mut history = vec![norm2(&r)];
    if history[0] <= tol || scale == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                final_residual: history[0],
                residual_history: history,
            },
        ));
    }

    for it in 1..=max_iter {
        sweep(mesh, sys, b, &mut x, false);
        sweep(mesh, sys, b, &mut x, true);
        sys.residual(mesh, &x, b, &mut r);
        history.push(norm2(&r));
        if *history.last().unwrap() <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    final_residual: *history.last().unwrap(),
                    residual_history: history,
                },
            ));
        }
    }
    Err(Error::Solver(format!(
        "gauss-seidel: no convergence in {max_iter} sweeps (residual {:.3e} -> {:.3e})",
        history[0],
        history.last().unwrap()
    )))
}

fn sweep(mesh: &Mesh, sys: &FaceSystem, b: &[f64], x: &mut [f64], backward: bool) {
    let n = x.len();
    let body = |i: usize, x: &mut [f64]| {
        let mut acc = b[i];
        for &(fid, sign) in mesh.cell_faces(i) {
            let fid = fid as usize;
            if fid >= mesh.n_internal {
                continue;
            }
            let f = &mesh.faces[fid];
            if sign > 0 {
                acc -= sys.upper[fid] * x[f.neighbour.unwrap()];
            } else {
                acc -= sys.lower[fid] * x[f.owner];
            }
        }
        x[i] = acc / sys.diag[i];
    };
    if backward {
        for i in (0..n).rev() {
            body(i, x);
        }
    } else {
        for i in 0..n {
            body(i, x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_channel_mesh, SideBc};

    /// Discrete Laplacian-like SPD system on a small grid.
    fn poisson_like(mesh: &Mesh) -> FaceSystem {
        let mut sys = FaceSystem::zeros(mesh);
        for fid in 0..mesh.n_internal {
            let f = &mesh.faces[fid];
            let g = f.area_mag() / f.d.norm();
            let n = f.neighbour.unwrap();
            sys.diag[f.owner] += g;
            sys.diag[n] += g;
            sys.upper[fid] -= g;
            sys.lower[fid] -= g;
        }
        // Pin one cell so the system is definite.
        sys.diag[0] += 1.0;
        sys
    }

    #[test]
    fn cg_solves_poisson_like() {
        let m = generate_channel_mesh(8, 6, 2.0, 1.5, None, SideBc::Wall).unwrap();
        let sys = poisson_like(&m);
        let xs: Vec<f64> = (0..m.n_cells()).map(|i| ((i * 13 % 7) as f64) - 3.0).collect();
        let mut b = vec![0.0; m.n_cells()];
        sys.matvec(&m, &xs, &mut b);
        let (x, stats) = cg_jacobi(&m, &sys, &b, &vec![0.0; b.len()], 1e-12, None, 2000).unwrap();
        let err: f64 = x.iter().zip(&xs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "err = {err:e}, iters = {}", stats.iterations);
    }

    #[test]
    fn gs_solves_diagonally_dominant() {
        let m = generate_channel_mesh(6, 4, 3.0, 2.0, None, SideBc::Slip).unwrap();
        let mut sys = poisson_like(&m);
        for d in sys.diag.iter_mut() {
            *d += 2.0; // strengthen dominance, as the time term does
        }
        let xs: Vec<f64> = (0..m.n_cells()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; m.n_cells()];
        sys.matvec(&m, &xs, &mut b);
        let (x, _) = gauss_seidel(&m, &sys, &b, &vec![0.0; b.len()], 1e-12, 500).unwrap();
        let err: f64 = x.iter().zip(&xs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9);
    }

    #[test]
    fn zero_rhs_returns_initial_guess() {
        let m = generate_channel_mesh(4, 3, 1.0, 1.0, None, SideBc::Wall).unwrap();
        let sys = poisson_like(&m);
        let b = vec![0.0; m.n_cells()];
        let (x, stats) = cg_jacobi(&m, &sys, &b, &b, 1e-10, None, 100).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
