//! Finite-volume tessellation: polygonal cells, faces with owner/neighbour
//! topology, orthogonality decomposition and boundary patches.
//!
//! Meshes produced by [`generate_channel_mesh`] are Cartesian channel grids
//! with an optional rectangular bluff body cut out of the interior. All the
//! downstream operators only rely on the owner/neighbour abstraction, so the
//! structured origin of the grid is invisible to them.
//!
//! Face storage convention: internal faces first (`0..n_internal`), then
//! boundary faces grouped by patch in patch declaration order. Internal face
//! area vectors point from owner to neighbour; boundary face area vectors
//! point out of the fluid domain.

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Boundary patch role. The roles map one-to-one onto the boundary-condition
/// table of the channel problem: fixed velocity at the inlet, fixed pressure
/// at the outlet, no-slip walls (including the bluff body) and free-slip
/// lateral sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchKind {
    Inlet,
    Outlet,
    Wall,
    SlipSide,
}

impl PatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatchKind::Inlet => "inlet",
            PatchKind::Outlet => "outlet",
            PatchKind::Wall => "wall",
            PatchKind::SlipSide => "slip",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "inlet" => PatchKind::Inlet,
            "outlet" => PatchKind::Outlet,
            "wall" => PatchKind::Wall,
            "slip" => PatchKind::SlipSide,
            other => return Err(Error::Format(format!("unknown patch kind `{other}`"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryPatch {
    pub name: String,
    pub kind: PatchKind,
    pub faces: Vec<usize>,
}

/// Split of a face area vector into a part parallel to the owner-neighbour
/// distance vector (treated implicitly by operators) and a transverse
/// remainder (treated explicitly).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum OrthoVariant {
    /// `delta` is the projection of the area vector onto the distance
    /// direction; the correction is orthogonal to the distance vector.
    MinimumCorrection,
    /// `|delta| = |S_f|` along the distance direction.
    #[default]
    OrthogonalCorrection,
    /// `|delta| = |S_f|^2 / (d_hat . S_f)` along the distance direction.
    OverRelaxed,
}

impl OrthoVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            OrthoVariant::MinimumCorrection => "minimum-correction",
            OrthoVariant::OrthogonalCorrection => "orthogonal-correction",
            OrthoVariant::OverRelaxed => "over-relaxed",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "minimum-correction" => OrthoVariant::MinimumCorrection,
            "orthogonal-correction" => OrthoVariant::OrthogonalCorrection,
            "over-relaxed" => OrthoVariant::OverRelaxed,
            other => return Err(Error::Format(format!("unknown decomposition `{other}`"))),
        })
    }
}

/// One face of the tessellation.
///
/// `delta + correction == area` exactly by construction, with `delta`
/// parallel to the distance vector `d`. For internal faces `d` connects the
/// owner and neighbour cell centers; for boundary faces it connects the
/// owner center to the face center.
#[derive(Clone, Debug)]
pub struct Face {
    /// Area vector per unit depth.
    pub area: Vec2,
    pub center: Vec2,
    pub owner: usize,
    /// `None` for boundary faces; use `patch`.
    pub neighbour: Option<usize>,
    /// Patch index for boundary faces.
    pub patch: Option<usize>,
    /// Owner-to-neighbour (or owner-to-face-center) distance vector.
    pub d: Vec2,
    /// Orthogonal part of the area vector, parallel to `d`.
    pub delta: Vec2,
    /// Non-orthogonal remainder, `area - delta`.
    pub correction: Vec2,
    /// Owner weight for linear face interpolation, in `(0, 1]`.
    pub weight: f64,
}

impl Face {
    pub fn is_internal(&self) -> bool {
        self.neighbour.is_some()
    }

    pub fn area_mag(&self) -> f64 {
        self.area.norm()
    }

    pub fn normal(&self) -> Vec2 {
        self.area.unit()
    }
}

/// Immutable finite-volume mesh. Construction validates closure of every
/// cell, positive volumes and patch coverage; afterwards the mesh is safe to
/// share read-only between any number of workers.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub cell_centers: Vec<Vec2>,
    pub cell_volumes: Vec<f64>,
    pub faces: Vec<Face>,
    pub patches: Vec<BoundaryPatch>,
    pub n_internal: usize,
    pub variant: OrthoVariant,
    /// Per cell: (face index, +1 if the cell owns the face, -1 otherwise).
    cell_faces: Vec<Vec<(u32, i8)>>,
}

/// Axis-aligned rectangle used to describe the bluff body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

/// Splits a face area vector into an orthogonal part parallel to the
/// distance vector and a transverse correction, `area = delta + correction`.
pub fn orthogonality_decomposition(
    area: Vec2,
    d: Vec2,
    variant: OrthoVariant,
) -> Result<(Vec2, Vec2)> {
    let smag = area.norm();
    if smag == 0.0 {
        return Err(Error::Mesh("degenerate face: |S_f| = 0".into()));
    }
    if d.norm() == 0.0 {
        return Err(Error::Mesh("degenerate face: |d| = 0".into()));
    }
    let dhat = d.unit();
    let delta = match variant {
        OrthoVariant::MinimumCorrection => dhat * dhat.dot(area),
        OrthoVariant::OrthogonalCorrection => dhat * smag,
        OrthoVariant::OverRelaxed => {
            let proj = dhat.dot(area);
            if proj.abs() < 1e-14 * smag {
                return Err(Error::Mesh(
                    "over-relaxed decomposition: face area orthogonal to d".into(),
                ));
            }
            dhat * (smag * smag / proj)
        }
    };
    Ok((delta, area - delta))
}

impl Mesh {
    /// Assembles a mesh from raw geometry, recomputing the derived face
    /// quantities (`d`, `delta`, `correction`, `weight`) and validating all
    /// structural invariants. Faces must be stored internal-first.
    pub fn from_parts(
        cell_centers: Vec<Vec2>,
        cell_volumes: Vec<f64>,
        mut faces: Vec<Face>,
        patches: Vec<BoundaryPatch>,
        variant: OrthoVariant,
    ) -> Result<Self> {
        let n_cells = cell_centers.len();
        if cell_volumes.len() != n_cells {
            return Err(Error::Mesh("cell_volumes length mismatch".into()));
        }
        let n_internal = faces.iter().take_while(|f| f.is_internal()).count();
        if faces[n_internal..].iter().any(|f| f.is_internal()) {
            return Err(Error::Mesh("faces must be ordered internal-first".into()));
        }
        for f in faces.iter_mut() {
            if f.owner >= n_cells {
                return Err(Error::Mesh("face owner out of range".into()));
            }
            let d = match f.neighbour {
                Some(n) => {
                    if n >= n_cells {
                        return Err(Error::Mesh("face neighbour out of range".into()));
                    }
                    cell_centers[n] - cell_centers[f.owner]
                }
                None => f.center - cell_centers[f.owner],
            };
            f.d = d;
            let (delta, corr) = orthogonality_decomposition(f.area, d, variant)?;
            f.delta = delta;
            f.correction = corr;
            f.weight = match f.neighbour {
                Some(n) => {
                    // Inverse-distance weighting of the two cell centers.
                    let dp = (f.center - cell_centers[f.owner]).norm();
                    let dn = (f.center - cell_centers[n]).norm();
                    dn / (dp + dn)
                }
                None => 1.0,
            };
        }
        let mut cell_faces: Vec<Vec<(u32, i8)>> = vec![Vec::new(); n_cells];
        for (fid, f) in faces.iter().enumerate() {
            cell_faces[f.owner].push((fid as u32, 1));
            if let Some(n) = f.neighbour {
                cell_faces[n].push((fid as u32, -1));
            }
        }
        let mesh = Mesh {
            cell_centers,
            cell_volumes,
            faces,
            patches,
            n_internal,
            variant,
            cell_faces,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn n_cells(&self) -> usize {
        self.cell_centers.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volumes.iter().sum()
    }

    /// Faces adjacent to a cell together with the outward sign of each face
    /// area vector relative to that cell.
    pub fn cell_faces(&self, cell: usize) -> &[(u32, i8)] {
        &self.cell_faces[cell]
    }

    pub fn patch_by_name(&self, name: &str) -> Option<usize> {
        self.patches.iter().position(|p| p.name == name)
    }

    pub fn patch_by_kind(&self, kind: PatchKind) -> Option<usize> {
        self.patches.iter().position(|p| p.kind == kind)
    }

    /// Structural invariants: positive volumes, closed cells, boundary faces
    /// covered by exactly one patch, interpolation weights in range and the
    /// exact decomposition identity.
    pub fn validate(&self) -> Result<()> {
        for (i, &v) in self.cell_volumes.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::Mesh(format!("cell {i} has non-positive volume")));
            }
        }
        for (i, adj) in self.cell_faces.iter().enumerate() {
            let mut sum = Vec2::ZERO;
            let mut perim = 0.0;
            for &(fid, sign) in adj {
                let f = &self.faces[fid as usize];
                sum += f.area * sign as f64;
                perim += f.area_mag();
            }
            if sum.abs_max() > 1e-12 * perim {
                return Err(Error::Mesh(format!("cell {i} is not closed")));
            }
        }
        let mut seen = vec![false; self.n_faces()];
        for (pi, p) in self.patches.iter().enumerate() {
            for &fid in &p.faces {
                let f = &self.faces[fid];
                if f.is_internal() || f.patch != Some(pi) {
                    return Err(Error::Mesh(format!(
                        "patch `{}` references face {fid} inconsistently",
                        p.name
                    )));
                }
                if seen[fid] {
                    return Err(Error::Mesh(format!("face {fid} in two patches")));
                }
                seen[fid] = true;
            }
        }
        for (fid, f) in self.faces.iter().enumerate() {
            if f.is_internal() {
                if !(f.weight > 0.0 && f.weight < 1.0) {
                    return Err(Error::Mesh(format!("face {fid} weight out of range")));
                }
            } else if !seen[fid] {
                return Err(Error::Mesh(format!("boundary face {fid} has no patch")));
            }
            let resid = f.delta + f.correction - f.area;
            if resid.abs_max() > 1e-13 * (1.0 + f.area_mag()) {
                return Err(Error::Mesh(format!("face {fid} decomposition broken")));
            }
        }
        Ok(())
    }
}

/// Lateral boundary role for [`generate_channel_mesh`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SideBc {
    #[default]
    Slip,
    Wall,
}

fn grid_index(v: f64, h: f64, n: usize, what: &str) -> Result<usize> {
    let idx = v / h;
    let rounded = idx.round();
    if (idx - rounded).abs() > 1e-9 * (1.0 + idx.abs()) {
        return Err(Error::Mesh(format!(
            "obstacle {what} = {v} is not aligned to the grid (spacing {h})"
        )));
    }
    let i = rounded as i64;
    if i < 0 || i as usize > n {
        return Err(Error::Mesh(format!("obstacle {what} = {v} outside domain")));
    }
    Ok(i as usize)
}

/// Builds a Cartesian channel mesh of `nx x ny` cells covering
/// `[0, lx] x [0, ly]`, with an optional grid-aligned rectangular obstacle
/// strictly inside the domain. Outer patches are `inlet` (left), `outlet`
/// (right), `bottom` and `top` (walls or slip sides); obstacle faces form a
/// no-slip `cylinder` patch.
pub fn generate_channel_mesh(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    obstacle: Option<Rect>,
    sides: SideBc,
) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::Mesh("nx and ny must both be at least 2".into()));
    }
    if !(lx > 0.0 && ly > 0.0) {
        return Err(Error::Mesh("domain lengths must be positive".into()));
    }
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;

    // Obstacle cell range, if any.
    let hole = match obstacle {
        Some(r) => {
            let i0 = grid_index(r.x0, hx, nx, "x0")?;
            let i1 = grid_index(r.x1, hx, nx, "x1")?;
            let j0 = grid_index(r.y0, hy, ny, "y0")?;
            let j1 = grid_index(r.y1, hy, ny, "y1")?;
            if i0 >= i1 || j0 >= j1 {
                return Err(Error::Mesh("obstacle rectangle is empty".into()));
            }
            if i0 == 0 || j0 == 0 || i1 == nx || j1 == ny {
                return Err(Error::Mesh("obstacle touches the outer boundary".into()));
            }
            Some((i0, i1, j0, j1))
        }
        None => None,
    };
    let solid = |i: usize, j: usize| -> bool {
        match hole {
            Some((i0, i1, j0, j1)) => i >= i0 && i < i1 && j >= j0 && j < j1,
            None => false,
        }
    };

    // Cell ids, row-major over (j, i), skipping solid cells.
    let mut id_of = vec![None; nx * ny];
    let mut centers = Vec::new();
    let mut volumes = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !solid(i, j) {
                id_of[j * nx + i] = Some(centers.len());
                centers.push(Vec2::new((i as f64 + 0.5) * hx, (j as f64 + 0.5) * hy));
                volumes.push(hx * hy);
            }
        }
    }
    let cell = |i: usize, j: usize| id_of[j * nx + i];

    let mut faces = Vec::new();
    fn push_face(
        faces: &mut Vec<Face>,
        area: Vec2,
        center: Vec2,
        owner: usize,
        neighbour: Option<usize>,
    ) -> usize {
        faces.push(Face {
            area,
            center,
            owner,
            neighbour,
            patch: None,
            d: Vec2::ZERO,
            delta: Vec2::ZERO,
            correction: Vec2::ZERO,
            weight: 0.0,
        });
        faces.len() - 1
    }

    // Internal faces: vertical (x-normal) then horizontal (y-normal).
    for j in 0..ny {
        for i in 0..nx.saturating_sub(1) {
            if let (Some(p), Some(n)) = (cell(i, j), cell(i + 1, j)) {
                push_face(
                    &mut faces,
                    Vec2::new(hy, 0.0),
                    Vec2::new((i as f64 + 1.0) * hx, (j as f64 + 0.5) * hy),
                    p,
                    Some(n),
                );
            }
        }
    }
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx {
            if let (Some(p), Some(n)) = (cell(i, j), cell(i, j + 1)) {
                push_face(
                    &mut faces,
                    Vec2::new(0.0, hx),
                    Vec2::new((i as f64 + 0.5) * hx, (j as f64 + 1.0) * hy),
                    p,
                    Some(n),
                );
            }
        }
    }

    // Boundary faces, one patch at a time so the grouped ordering holds.
    let mut patches = Vec::new();
    let mut add_patch = |name: &str, kind: PatchKind, faces_of: Vec<usize>, fcs: &mut Vec<Face>| {
        let pi = patches.len();
        for &fid in &faces_of {
            fcs[fid].patch = Some(pi);
        }
        patches.push(BoundaryPatch {
            name: name.to_string(),
            kind,
            faces: faces_of,
        });
    };

    let mut inlet = Vec::new();
    for j in 0..ny {
        if let Some(p) = cell(0, j) {
            inlet.push(push_face(
                &mut faces,
                Vec2::new(-hy, 0.0),
                Vec2::new(0.0, (j as f64 + 0.5) * hy),
                p,
                None,
            ));
        }
    }
    add_patch("inlet", PatchKind::Inlet, inlet, &mut faces);

    let mut outlet = Vec::new();
    for j in 0..ny {
        if let Some(p) = cell(nx - 1, j) {
            outlet.push(push_face(
                &mut faces,
                Vec2::new(hy, 0.0),
                Vec2::new(lx, (j as f64 + 0.5) * hy),
                p,
                None,
            ));
        }
    }
    add_patch("outlet", PatchKind::Outlet, outlet, &mut faces);

    let side_kind = match sides {
        SideBc::Slip => PatchKind::SlipSide,
        SideBc::Wall => PatchKind::Wall,
    };
    let mut bottom = Vec::new();
    for i in 0..nx {
        if let Some(p) = cell(i, 0) {
            bottom.push(push_face(
                &mut faces,
                Vec2::new(0.0, -hx),
                Vec2::new((i as f64 + 0.5) * hx, 0.0),
                p,
                None,
            ));
        }
    }
    add_patch("bottom", side_kind, bottom, &mut faces);

    let mut top = Vec::new();
    for i in 0..nx {
        if let Some(p) = cell(i, ny - 1) {
            top.push(push_face(
                &mut faces,
                Vec2::new(0.0, hx),
                Vec2::new((i as f64 + 0.5) * hx, ly),
                p,
                None,
            ));
        }
    }
    add_patch("top", side_kind, top, &mut faces);

    if let Some((i0, i1, j0, j1)) = hole {
        let mut body = Vec::new();
        // Left flank: fluid cell (i0-1, j) looking in +x.
        for j in j0..j1 {
            if let Some(p) = cell(i0 - 1, j) {
                body.push(push_face(
                    &mut faces,
                    Vec2::new(hy, 0.0),
                    Vec2::new(i0 as f64 * hx, (j as f64 + 0.5) * hy),
                    p,
                    None,
                ));
            }
        }
        // Right flank: fluid cell (i1, j) looking in -x.
        for j in j0..j1 {
            if let Some(p) = cell(i1, j) {
                body.push(push_face(
                    &mut faces,
                    Vec2::new(-hy, 0.0),
                    Vec2::new(i1 as f64 * hx, (j as f64 + 0.5) * hy),
                    p,
                    None,
                ));
            }
        }
        // Bottom flank: fluid cell (i, j0-1) looking in +y.
        for i in i0..i1 {
            if let Some(p) = cell(i, j0 - 1) {
                body.push(push_face(
                    &mut faces,
                    Vec2::new(0.0, hx),
                    Vec2::new((i as f64 + 0.5) * hx, j0 as f64 * hy),
                    p,
                    None,
                ));
            }
        }
        // Top flank: fluid cell (i, j1) looking in -y.
        for i in i0..i1 {
            if let Some(p) = cell(i, j1) {
                body.push(push_face(
                    &mut faces,
                    Vec2::new(0.0, -hx),
                    Vec2::new((i as f64 + 0.5) * hx, j1 as f64 * hy),
                    p,
                    None,
                ));
            }
        }
        add_patch("cylinder", PatchKind::Wall, body, &mut faces);
    }

    Mesh::from_parts(centers, volumes, faces, patches, OrthoVariant::default())
}
