//! Unsteady incompressible finite-volume solver with segregated
//! pressure-velocity coupling on a collocated grid.
//!
//! One time step advances the state by a backward-Euler momentum predictor
//! (convection linearised about the current face flux) followed by an inner
//! loop of pressure corrections. Face fluxes are built from the
//! momentum-weighted interpolation of `H/a_P`, which couples the compact
//! pressure stencil to the velocity field and suppresses the collocated-grid
//! checkerboard mode.
//!
//! Linear systems are solved with the dependency-free solvers in
//! [`crate::linsolve`]: diagonally preconditioned conjugate gradients for the
//! pressure equation and symmetric Gauss-Seidel for momentum.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{Bcs, CellField, FaceField, PatchBc};
use crate::fvops;
use crate::linsolve::{cg, dic_face_order, gauss_seidel, DicPrecon, FaceSystem, Precon};
use crate::mesh::{Mesh, PatchKind};
use crate::vec2::Vec2;

/// Physical and numerical parameters of one flow case.
#[derive(Clone, Debug)]
pub struct CaseConfig {
    /// Kinematic viscosity.
    pub nu: f64,
    /// Density, used only to document force normalisation (pressure is
    /// stored density-normalised).
    pub rho: f64,
    /// Inlet velocity magnitude; the scalar parameter of the problem.
    pub u_in: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Pressure corrections per momentum solve.
    pub piso_correctors: usize,
    /// Outer momentum/pressure cycles per step.
    pub outer_correctors: usize,
    /// Snapshots are sampled every `snapshot_stride` steps.
    pub snapshot_stride: usize,
    /// Rolling window length: the last `n_snapshots` samples are kept.
    pub n_snapshots: usize,
    /// Bluff-body reference length for force coefficients.
    pub body_diameter: f64,
    /// Convection face interpolation: `1.0` is pure linear, `0.0` pure
    /// upwind; the implicit part is always upwind with the remainder as a
    /// deferred correction.
    pub convection_blend: f64,
    pub momentum_tol: f64,
    pub pressure_tol: f64,
    /// Per-cell flux-divergence tolerance factor (times `u_in D / V_min`).
    pub div_tol_factor: f64,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            nu: 0.01,
            rho: 1.0,
            u_in: 1.0,
            dt: 0.1,
            t_end: 1.0,
            piso_correctors: 2,
            outer_correctors: 1,
            snapshot_stride: 1,
            n_snapshots: 120,
            body_diameter: 1.0,
            convection_blend: 0.8,
            momentum_tol: 1e-7,
            pressure_tol: 1e-8,
            div_tol_factor: 1e-8,
        }
    }
}

impl CaseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Solver("dt must be positive".into()));
        }
        if self.piso_correctors < 1 || self.outer_correctors < 1 {
            return Err(Error::Solver("corrector counts must be at least 1".into()));
        }
        if !(self.body_diameter > 0.0) {
            return Err(Error::Solver("body diameter must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.convection_blend) {
            return Err(Error::Solver("convection blend outside [0, 1]".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Solver("snapshot stride must be positive".into()));
        }
        Ok(())
    }
}

/// Instantaneous solver state.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub u: CellField<Vec2>,
    pub p: CellField<f64>,
    pub flux: FaceField,
    pub t: f64,
}

/// Case metadata carried with snapshot sets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaseMeta {
    pub u_in: f64,
    pub nu: f64,
    /// Time between consecutive snapshot columns.
    pub dt_snap: f64,
}

/// Velocity, pressure and mass-flux snapshots stored one instant per column.
/// Velocity rows are component-interleaved (`x0, y0, x1, y1, ...`).
#[derive(Clone, Debug)]
pub struct SnapshotSet {
    pub u: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub flux: DMatrix<f64>,
    pub times: Vec<f64>,
    pub meta: CaseMeta,
}

impl SnapshotSet {
    pub fn validate(&self) -> Result<()> {
        let ns = self.times.len();
        if self.u.ncols() != ns || self.p.ncols() != ns || self.flux.ncols() != ns {
            return Err(Error::Dimension(format!(
                "snapshot column counts differ: u {}, p {}, flux {}, times {}",
                self.u.ncols(),
                self.p.ncols(),
                self.flux.ncols(),
                ns
            )));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Dimension("snapshot times not increasing".into()));
        }
        Ok(())
    }

    pub fn n_snapshots(&self) -> usize {
        self.times.len()
    }

    pub fn velocity_field(&self, mesh: &Mesh, col: usize, bcs: Bcs<Vec2>) -> Result<CellField<Vec2>> {
        CellField::from_flat(mesh, self.u.column(col).as_slice(), bcs)
    }

    pub fn pressure_field(&self, mesh: &Mesh, col: usize, bcs: Bcs<f64>) -> Result<CellField<f64>> {
        CellField::from_flat(mesh, self.p.column(col).as_slice(), bcs)
    }

    pub fn flux_field(&self, mesh: &Mesh, col: usize) -> Result<FaceField> {
        FaceField::from_values(mesh, self.flux.column(col).as_slice().to_vec())
    }
}

/// Drag/lift coefficient history, one sample per time step.
#[derive(Clone, Debug, Default)]
pub struct ForceSeries {
    pub times: Vec<f64>,
    pub drag: Vec<f64>,
    pub lift: Vec<f64>,
}

#[derive(Debug)]
pub struct RunResult {
    pub snapshots: SnapshotSet,
    pub forces: ForceSeries,
    pub final_state: FlowState,
    pub wall_seconds: f64,
    pub steps: usize,
}

/// Velocity boundary conditions of the channel problem: fixed profile at the
/// inlet, no-slip walls, zero-gradient outlet, free-slip sides.
pub fn velocity_bcs(mesh: &Mesh, u_in: f64) -> Bcs<Vec2> {
    let per_patch = mesh
        .patches
        .iter()
        .map(|p| match p.kind {
            PatchKind::Inlet => PatchBc::FixedValue(Vec2::new(u_in, 0.0)),
            PatchKind::Wall => PatchBc::FixedValue(Vec2::ZERO),
            PatchKind::Outlet => PatchBc::ZeroGradient,
            PatchKind::SlipSide => PatchBc::Slip,
        })
        .collect();
    Bcs { per_patch }
}

/// Homogeneous counterpart of [`velocity_bcs`]; carried by lifted snapshots
/// and POD modes.
pub fn homogeneous_velocity_bcs(mesh: &Mesh) -> Bcs<Vec2> {
    velocity_bcs(mesh, 0.0)
}

/// Pressure boundary conditions: fixed zero at the outlet, zero normal
/// gradient elsewhere.
pub fn pressure_bcs(mesh: &Mesh) -> Bcs<f64> {
    let per_patch = mesh
        .patches
        .iter()
        .map(|p| match p.kind {
            PatchKind::Outlet => PatchBc::FixedValue(0.0),
            _ => PatchBc::ZeroGradient,
        })
        .collect();
    Bcs { per_patch }
}

/// Momentum system in face-coefficient form. The off-diagonal coefficients
/// are shared by both velocity components; diagonals and right-hand sides
/// differ (slip sides act on the normal component only). The right-hand
/// side excludes the pressure gradient so that `H/a_P` can be formed.
#[derive(Clone, Debug)]
pub struct MomentumMatrix {
    pub diag: [Vec<f64>; 2],
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs_no_p: [Vec<f64>; 2],
}

enum BoundaryFlux {
    /// Known flux (fixed-velocity and slip faces).
    Fixed(f64),
    /// Pressure-corrected outflow (zero-gradient velocity, fixed pressure).
    Free,
}

pub struct Solver<'m> {
    pub mesh: &'m Mesh,
    pub cfg: CaseConfig,
    ubcs: Bcs<Vec2>,
    pbcs: Bcs<f64>,
    /// `|delta| / |d|` per face.
    gdiff: Vec<f64>,
    has_correction: bool,
    div_tol_rate: f64,
    /// Face ordering for the incomplete-Cholesky pressure preconditioner.
    dic_order: Option<Vec<u32>>,
}

impl<'m> Solver<'m> {
    pub fn new(mesh: &'m Mesh, cfg: CaseConfig) -> Result<Self> {
        cfg.validate()?;
        // Slip patches must be axis-aligned for the per-component treatment.
        for p in &mesh.patches {
            if p.kind == PatchKind::SlipSide {
                for &fid in &p.faces {
                    let n = mesh.faces[fid].normal();
                    if n.x.abs() > 1e-12 && n.y.abs() > 1e-12 {
                        return Err(Error::Solver(
                            "slip patches must be axis-aligned".into(),
                        ));
                    }
                }
            }
        }
        let gdiff = mesh
            .faces
            .iter()
            .map(|f| f.delta.norm() / f.d.norm())
            .collect();
        let has_correction = mesh
            .faces
            .iter()
            .any(|f| f.correction.abs_max() > 1e-14 * (1.0 + f.area_mag()));
        let v_min = mesh
            .cell_volumes
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let div_tol_rate =
            cfg.div_tol_factor * cfg.u_in.abs() * cfg.body_diameter / v_min + 1e-13;
        Ok(Self {
            mesh,
            ubcs: velocity_bcs(mesh, cfg.u_in),
            pbcs: pressure_bcs(mesh),
            cfg,
            gdiff,
            has_correction,
            div_tol_rate,
            dic_order: dic_face_order(mesh),
        })
    }

    pub fn velocity_bcs(&self) -> &Bcs<Vec2> {
        &self.ubcs
    }

    pub fn pressure_bcs(&self) -> &Bcs<f64> {
        &self.pbcs
    }

    /// Impulsive start: fluid at rest with the inlet condition active from
    /// the first step.
    pub fn initial_state(&self) -> FlowState {
        let u = CellField::new(self.mesh, Vec2::ZERO, self.ubcs.clone()).unwrap();
        let p = CellField::new(self.mesh, 0.0, self.pbcs.clone()).unwrap();
        let flux = fvops::face_flux(self.mesh, &u).unwrap();
        FlowState { u, p, flux, t: 0.0 }
    }

    fn boundary_flux_kind(&self, fid: usize, u: &CellField<Vec2>) -> BoundaryFlux {
        let face = &self.mesh.faces[fid];
        let patch = face.patch.unwrap();
        match self.ubcs.get(patch) {
            PatchBc::FixedValue(v) => BoundaryFlux::Fixed(face.area.dot(v)),
            PatchBc::Slip => BoundaryFlux::Fixed(0.0),
            PatchBc::ZeroGradient => {
                let _ = u;
                BoundaryFlux::Free
            }
        }
    }

    /// Pressure values at faces with the monotonicity clamp: extrapolated
    /// face values are bounded by the adjacent cell values.
    fn pressure_face_values(&self, p: &CellField<f64>) -> Vec<f64> {
        let mesh = self.mesh;
        let mut out = Vec::with_capacity(mesh.n_faces());
        for (fid, face) in mesh.faces.iter().enumerate() {
            let v = match face.neighbour {
                Some(n) => {
                    let vp = p.values[face.owner];
                    let vn = p.values[n];
                    let lin = face.weight * vp + (1.0 - face.weight) * vn;
                    lin.clamp(vp.min(vn), vp.max(vn))
                }
                None => p.boundary_face_value(mesh, fid),
            };
            out.push(v);
        }
        out
    }

    fn pressure_gradient(&self, p: &CellField<f64>) -> Vec<Vec2> {
        let mesh = self.mesh;
        let pf = self.pressure_face_values(p);
        let mut g = vec![Vec2::ZERO; mesh.n_cells()];
        for (fid, face) in mesh.faces.iter().enumerate() {
            let contrib = face.area * pf[fid];
            g[face.owner] += contrib;
            if let Some(n) = face.neighbour {
                g[n] -= contrib;
            }
        }
        for (gi, &v) in g.iter_mut().zip(&mesh.cell_volumes) {
            *gi = *gi / v;
        }
        g
    }

    /// Assembles the backward-Euler momentum system about the current flux,
    /// excluding the pressure-gradient source. Convection is implicit in the
    /// blended face interpolation; diffusion is implicit in its orthogonal
    /// part with the transverse correction explicit. `u_old` is the
    /// beginning-of-step velocity for the time term, which stays fixed
    /// across outer correctors.
    pub fn assemble_momentum(&self, state: &FlowState, u_old: &CellField<Vec2>) -> MomentumMatrix {
        let mesh = self.mesh;
        let n = mesh.n_cells();
        let nu = self.cfg.nu;
        let beta = self.cfg.convection_blend;
        let mut diag = [vec![0.0; n], vec![0.0; n]];
        let mut lower = vec![0.0; mesh.n_internal];
        let mut upper = vec![0.0; mesh.n_internal];
        let mut rhs = [vec![0.0; n], vec![0.0; n]];

        let grads = if self.has_correction {
            Some(fvops::gradient_values(mesh, &state.u).unwrap())
        } else {
            None
        };

        for fid in 0..mesh.n_internal {
            let face = &mesh.faces[fid];
            let o = face.owner;
            let nb = face.neighbour.unwrap();
            let flux = state.flux.values[fid];

            // Implicit blended convection: the face value mixes linear and
            // upwind weights, `beta linear + (1 - beta) upwind`.
            let (uo, un) = if flux >= 0.0 { (1.0, 0.0) } else { (0.0, 1.0) };
            let wo = beta * face.weight + (1.0 - beta) * uo;
            let wn = beta * (1.0 - face.weight) + (1.0 - beta) * un;
            let (cu_own, cu_nb) = (flux * wo, flux * wn);
            for c in 0..2 {
                diag[c][o] += cu_own;
                diag[c][nb] -= cu_nb;
            }
            upper[fid] += cu_nb;
            lower[fid] -= cu_own;

            // Implicit orthogonal diffusion.
            let g = nu * self.gdiff[fid];
            for c in 0..2 {
                diag[c][o] += g;
                diag[c][nb] += g;
            }
            upper[fid] -= g;
            lower[fid] -= g;

            // Explicit transverse diffusion correction.
            if let Some(gr) = &grads {
                let gf = [
                    gr[o][0] * face.weight + gr[nb][0] * (1.0 - face.weight),
                    gr[o][1] * face.weight + gr[nb][1] * (1.0 - face.weight),
                ];
                let corr = Vec2::new(face.correction.dot(gf[0]), face.correction.dot(gf[1])) * nu;
                rhs[0][o] += corr.x;
                rhs[1][o] += corr.y;
                rhs[0][nb] -= corr.x;
                rhs[1][nb] -= corr.y;
            }
        }

        for fid in self.mesh.n_internal..mesh.n_faces() {
            let face = &mesh.faces[fid];
            let o = face.owner;
            let patch = face.patch.unwrap();
            let flux = state.flux.values[fid];
            let g = nu * self.gdiff[fid];
            match self.ubcs.get(patch) {
                PatchBc::FixedValue(vb) => {
                    // Convection carries the boundary value; diffusion pins it.
                    for c in 0..2 {
                        let vbc = if c == 0 { vb.x } else { vb.y };
                        rhs[c][o] -= flux * vbc;
                        diag[c][o] += g;
                        rhs[c][o] += g * vbc;
                    }
                }
                PatchBc::ZeroGradient => {
                    for c in 0..2 {
                        diag[c][o] += flux;
                    }
                }
                PatchBc::Slip => {
                    // Normal component fixed at zero, tangential free. The
                    // boundary flux is zero so convection drops out.
                    let nrm = face.normal();
                    let c = if nrm.x.abs() > 0.5 { 0 } else { 1 };
                    diag[c][o] += g;
                }
            }
            if let Some(gr) = &grads {
                let corr =
                    Vec2::new(face.correction.dot(gr[o][0]), face.correction.dot(gr[o][1])) * nu;
                rhs[0][o] += corr.x;
                rhs[1][o] += corr.y;
            }
        }

        // Backward-Euler time term.
        let rdt = 1.0 / self.cfg.dt;
        for i in 0..n {
            let vdt = mesh.cell_volumes[i] * rdt;
            for c in 0..2 {
                diag[c][i] += vdt;
                rhs[c][i] += vdt * u_old.values[i].comp2(c);
            }
        }

        MomentumMatrix {
            diag,
            lower,
            upper,
            rhs_no_p: rhs,
        }
    }

    /// Backward-Euler implicit momentum solve with the current pressure
    /// gradient as source. Returns the provisional velocity and the
    /// assembled system for the pressure correctors.
    pub fn momentum_predict(&self, state: &FlowState) -> Result<(CellField<Vec2>, MomentumMatrix)> {
        self.momentum_predict_inner(state, &state.u.clone())
    }

    fn momentum_predict_inner(
        &self,
        state: &FlowState,
        u_old: &CellField<Vec2>,
    ) -> Result<(CellField<Vec2>, MomentumMatrix)> {
        let mesh = self.mesh;
        let mm = self.assemble_momentum(state, u_old);
        let gradp = self.pressure_gradient(&state.p);
        let mut comps: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for c in 0..2 {
            let mut rhs = mm.rhs_no_p[c].clone();
            for i in 0..mesh.n_cells() {
                rhs[i] -= mesh.cell_volumes[i] * gradp[i].comp2(c);
            }
            let sys = FaceSystem::from_parts(
                mesh,
                mm.diag[c].clone(),
                mm.lower.clone(),
                mm.upper.clone(),
            );
            let x0: Vec<f64> = state.u.values.iter().map(|v| v.comp2(c)).collect();
            let (x, _stats) =
                gauss_seidel(mesh, &sys, &rhs, &x0, self.cfg.momentum_tol, 1000).map_err(|e| {
                    Error::Solver(format!("momentum component {c}: {e}"))
                })?;
            comps[c] = x;
        }
        let values = (0..mesh.n_cells())
            .map(|i| Vec2::new(comps[0][i], comps[1][i]))
            .collect();
        let u = CellField::from_values(mesh, values, self.ubcs.clone())?;
        Ok((u, mm))
    }

    fn hbya(&self, mm: &MomentumMatrix, u: &CellField<Vec2>) -> Vec<Vec2> {
        let mesh = self.mesh;
        let n = mesh.n_cells();
        let mut h = [mm.rhs_no_p[0].clone(), mm.rhs_no_p[1].clone()];
        for fid in 0..mesh.n_internal {
            let face = &mesh.faces[fid];
            let nb = face.neighbour.unwrap();
            for c in 0..2 {
                h[c][face.owner] -= mm.upper[fid] * u.values[nb].comp2(c);
                h[c][nb] -= mm.lower[fid] * u.values[face.owner].comp2(c);
            }
        }
        (0..n)
            .map(|i| Vec2::new(h[0][i] / mm.diag[0][i], h[1][i] / mm.diag[1][i]))
            .collect()
    }

    /// One pressure correction: solves the compact-stencil pressure equation
    /// driven by the divergence of the momentum-interpolated flux, then
    /// corrects fluxes and cell velocities.
    pub fn pressure_correct(
        &self,
        state: &FlowState,
        u_prov: &CellField<Vec2>,
        mm: &MomentumMatrix,
    ) -> Result<(CellField<f64>, FaceField, CellField<Vec2>)> {
        self.pressure_correct_inner(state, &state.p, u_prov, mm, true)
    }

    /// Non-final correctors run at a loose relative tolerance; the final one
    /// enforces the per-cell divergence bound. `old` carries the
    /// beginning-of-step fields for the face time-term correction;
    /// `p_guess` seeds the pressure solve.
    fn pressure_correct_inner(
        &self,
        old: &FlowState,
        p_guess: &CellField<f64>,
        u_prov: &CellField<Vec2>,
        mm: &MomentumMatrix,
        tight: bool,
    ) -> Result<(CellField<f64>, FaceField, CellField<Vec2>)> {
        let mesh = self.mesh;
        if !self
            .pbcs
            .per_patch
            .iter()
            .any(|bc| matches!(bc, PatchBc::FixedValue(_)))
        {
            return Err(Error::Solver(
                "singular pressure system: no fixed-value pressure patch".into(),
            ));
        }

        let rua: Vec<f64> = (0..mesh.n_cells())
            .map(|i| mesh.cell_volumes[i] / (0.5 * (mm.diag[0][i] + mm.diag[1][i])))
            .collect();
        let hb = self.hbya(mm, u_prov);

        // Momentum-interpolated flux without the pressure contribution. The
        // second term restores the beginning-of-step face flux in the time
        // term (instead of the interpolated old cell velocity), which keeps
        // the face coupling independent of the time-step size.
        let rdt = 1.0 / self.cfg.dt;
        let mut phi = vec![0.0; mesh.n_faces()];
        for (fid, face) in mesh.faces.iter().enumerate() {
            phi[fid] = match face.neighbour {
                Some(n) => {
                    let w = face.weight;
                    let hf = hb[face.owner] * w + hb[n] * (1.0 - w);
                    let ruaf = rua[face.owner] * w + rua[n] * (1.0 - w);
                    let u_old_f = old.u.values[face.owner] * w + old.u.values[n] * (1.0 - w);
                    face.area.dot(hf)
                        + ruaf * rdt * (old.flux.values[fid] - face.area.dot(u_old_f))
                }
                None => match self.boundary_flux_kind(fid, u_prov) {
                    BoundaryFlux::Fixed(f) => f,
                    BoundaryFlux::Free => face.area.dot(hb[face.owner]),
                },
            };
        }

        // Pressure system: sum_f g_f (p_N - p_P) = div(phi) per cell.
        let mut sys = FaceSystem::zeros(mesh);
        let mut rhs = vec![0.0; mesh.n_cells()];
        let mut gface = vec![0.0; mesh.n_faces()];
        for fid in 0..mesh.n_internal {
            let face = &mesh.faces[fid];
            let n = face.neighbour.unwrap();
            let ruaf = rua[face.owner] * face.weight + rua[n] * (1.0 - face.weight);
            let g = ruaf * self.gdiff[fid];
            gface[fid] = g;
            sys.diag[face.owner] += g;
            sys.diag[n] += g;
            sys.upper[fid] -= g;
            sys.lower[fid] -= g;
            rhs[face.owner] -= phi[fid];
            rhs[n] += phi[fid];
        }
        for fid in mesh.n_internal..mesh.n_faces() {
            let face = &mesh.faces[fid];
            rhs[face.owner] -= phi[fid];
            let patch = face.patch.unwrap();
            if let PatchBc::FixedValue(pfix) = self.pbcs.get(patch) {
                let g = rua[face.owner] * self.gdiff[fid];
                gface[fid] = g;
                sys.diag[face.owner] += g;
                rhs[face.owner] += g * pfix;
            }
        }

        let v_min = mesh
            .cell_volumes
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let precon = match &self.dic_order {
            Some(order) => Precon::Dic(DicPrecon::build(mesh, &sys, order)),
            None => Precon::Jacobi,
        };
        let (tol_rel, tol_inf) = if tight {
            (self.cfg.pressure_tol, Some(0.5 * self.div_tol_rate * v_min))
        } else {
            (self.cfg.pressure_tol.max(1e-9), None)
        };
        let (pvals, _stats) = cg(
            mesh,
            &sys,
            &rhs,
            &p_guess.values,
            tol_rel,
            tol_inf,
            8000,
            &precon,
        )
        .map_err(|e| Error::Solver(format!("pressure: {e}")))?;
        let p = CellField::from_values(mesh, pvals, self.pbcs.clone())?;

        // Corrected face fluxes.
        let mut flux = vec![0.0; mesh.n_faces()];
        for (fid, face) in mesh.faces.iter().enumerate() {
            flux[fid] = match face.neighbour {
                Some(n) => phi[fid] - gface[fid] * (p.values[n] - p.values[face.owner]),
                None => {
                    let patch = face.patch.unwrap();
                    if let PatchBc::FixedValue(pfix) = self.pbcs.get(patch) {
                        phi[fid] - gface[fid] * (pfix - p.values[face.owner])
                    } else {
                        phi[fid]
                    }
                }
            };
        }

        // Corrected cell velocities.
        let gradp = self.pressure_gradient(&p);
        let values = (0..mesh.n_cells())
            .map(|i| hb[i] - gradp[i] * rua[i])
            .collect();
        let u = CellField::from_values(mesh, values, self.ubcs.clone())?;
        Ok((p, FaceField { values: flux }, u))
    }

    /// Maximum per-cell flux divergence rate of a state.
    pub fn max_divergence(&self, flux: &FaceField) -> f64 {
        let div = fvops::divergence_of_flux(self.mesh, flux).unwrap();
        div.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn divergence_tolerance(&self) -> f64 {
        self.div_tol_rate
    }

    /// Advances the state by one time step: outer momentum cycles, each with
    /// an inner loop of pressure corrections.
    pub fn step(&self, state: &FlowState) -> Result<FlowState> {
        let mut work = state.clone();
        for outer in 0..self.cfg.outer_correctors {
            let (mut u_star, mm) = self.momentum_predict_inner(&work, &state.u)?;
            for inner in 0..self.cfg.piso_correctors {
                let tight = outer + 1 == self.cfg.outer_correctors
                    && inner + 1 == self.cfg.piso_correctors;
                let (p, flux, u) =
                    self.pressure_correct_inner(state, &work.p, &u_star, &mm, tight)?;
                work.p = p;
                work.flux = flux;
                u_star = u;
            }
            work.u = u_star;
        }
        work.t = state.t + self.cfg.dt;

        let maxdiv = self.max_divergence(&work.flux);
        if maxdiv > self.div_tol_rate {
            return Err(Error::Solver(format!(
                "mass conservation violated at t = {}: max divergence {maxdiv:e} > {:e}",
                work.t, self.div_tol_rate
            )));
        }
        let umax = work.u.values.iter().fold(0.0f64, |m, v| m.max(v.abs_max()));
        if umax > 1e6 * self.cfg.u_in.abs().max(1.0) {
            return Err(Error::Solver(format!(
                "solution diverged at t = {}: max |u| = {umax:e}",
                work.t
            )));
        }
        Ok(work)
    }

    /// Integrates from `init` (or rest) to `t_end`, recording force
    /// coefficients every step and keeping a rolling window of the last
    /// `n_snapshots` snapshots sampled every `snapshot_stride` steps.
    pub fn run_case(&self, init: Option<FlowState>) -> Result<RunResult> {
        let start = Instant::now();
        let mesh = self.mesh;
        let mut state = init.unwrap_or_else(|| self.initial_state());
        let t0 = state.t;
        let n_steps = ((self.cfg.t_end - t0) / self.cfg.dt).round() as usize;
        let body = mesh.patch_by_name("cylinder");

        let mut forces = ForceSeries::default();
        let mut ring: VecDeque<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> =
            VecDeque::with_capacity(self.cfg.n_snapshots);

        for k in 1..=n_steps {
            state = self.step(&state)?;
            let (dc, lc) = match body {
                Some(patch) => force_coefficients(mesh, &state, &self.cfg, patch)?,
                None => (0.0, 0.0),
            };
            forces.times.push(state.t);
            forces.drag.push(dc);
            forces.lift.push(lc);

            if k % self.cfg.snapshot_stride == 0 {
                if ring.len() == self.cfg.n_snapshots {
                    ring.pop_front();
                }
                ring.push_back((
                    state.t,
                    state.u.flatten(),
                    state.p.values.clone(),
                    state.flux.values.clone(),
                ));
            }
        }

        let ns = ring.len();
        let mut times = Vec::with_capacity(ns);
        let mut u = DMatrix::zeros(2 * mesh.n_cells(), ns);
        let mut p = DMatrix::zeros(mesh.n_cells(), ns);
        let mut flux = DMatrix::zeros(mesh.n_faces(), ns);
        for (j, (t, uc, pc, fc)) in ring.iter().enumerate() {
            times.push(*t);
            u.column_mut(j).copy_from_slice(uc);
            p.column_mut(j).copy_from_slice(pc);
            flux.column_mut(j).copy_from_slice(fc);
        }
        let snapshots = SnapshotSet {
            u,
            p,
            flux,
            times,
            meta: CaseMeta {
                u_in: self.cfg.u_in,
                nu: self.cfg.nu,
                dt_snap: self.cfg.dt * self.cfg.snapshot_stride as f64,
            },
        };
        snapshots.validate()?;
        Ok(RunResult {
            snapshots,
            forces,
            final_state: state,
            wall_seconds: start.elapsed().as_secs_f64(),
            steps: n_steps,
        })
    }
}

/// Drag and lift coefficients from the pressure and viscous traction on a
/// wall patch: `C = 2 F / (u_in^2 D)` per unit depth with density-normalised
/// pressure.
pub fn force_coefficients(
    mesh: &Mesh,
    state: &FlowState,
    cfg: &CaseConfig,
    patch: usize,
) -> Result<(f64, f64)> {
    let p = mesh
        .patches
        .get(patch)
        .ok_or_else(|| Error::Eval(format!("no patch {patch}")))?;
    if p.faces.is_empty() {
        return Err(Error::Eval(format!("patch `{}` has no faces", p.name)));
    }
    let mut force = Vec2::ZERO;
    for &fid in &p.faces {
        let face = &mesh.faces[fid];
        let pf = state.p.boundary_face_value(mesh, fid);
        force += face.area * pf;
        // One-sided wall-normal velocity gradient.
        let nrm = face.normal();
        let dn = face.d.norm();
        let uw = state.u.boundary_face_value(mesh, fid);
        let g = (uw - state.u.values[face.owner]) / dn;
        let visc = (g + nrm * g.dot(nrm)) * (cfg.nu * face.area_mag());
        force -= visc;
    }
    let q = 0.5 * cfg.u_in * cfg.u_in * cfg.body_diameter;
    if q == 0.0 {
        return Err(Error::Eval("zero dynamic pressure scale".into()));
    }
    Ok((force.x / q, force.y / q))
}

trait Comp2 {
    fn comp2(self, c: usize) -> f64;
}

impl Comp2 for Vec2 {
    fn comp2(self, c: usize) -> f64 {
        if c == 0 {
            self.x
        } else {
            self.y
        }
    }
}
