//! On-disk artifact formats.
//!
//! * `podfv-mesh v1` — whitespace-separated text. Layout:
//!   header line, `variant <name>`, `cells <n>` then one `<cx> <cy> <vol>`
//!   record per cell, `faces <m>` then one
//!   `<Sx> <Sy> <owner> <neighbour-or-pK> <cx> <cy>` record per face
//!   (boundary faces reference their patch as `p<index>`), and a patch
//!   table `patches <k>` with `<name> <kind> <nfaces> <face ids...>` rows.
//!   Floats use the shortest round-trip decimal form, so write/read/write
//!   is byte-identical.
//! * `podfv-snap v1` — binary: magic line, a one-byte field kind
//!   (`u` cell vector, `p` cell scalar, `f` face scalar), row and column
//!   counts as little-endian u64, the matrix as little-endian f64 in
//!   column-major order (one snapshot per column), then the times vector.
//! * `podfv-basis v1` — binary: magic, upstream mesh hash, counts, mode
//!   matrices in the snapshot layout, both eigenvalue sequences, the
//!   lifting block and the pressure mean.
//! * `podfv-rom v1` — binary: magic, upstream basis hash, dimensions,
//!   parameters, all raw projection blocks and the composed matrices.
//!
//! Downstream archives embed the 64-bit FNV-1a hash of the upstream
//! artifact file for staleness detection.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{CellField, FaceField, PatchBc};
use crate::hfsolver::{
    homogeneous_velocity_bcs, pressure_bcs, CaseMeta, ForceSeries, SnapshotSet,
};
use crate::mesh::{BoundaryPatch, Face, Mesh, OrthoVariant, PatchKind};
use crate::pod::{Lifting, PodBasis};
use crate::romassembly::{ReducedBlocks, ReducedSystem};
use crate::romsolver::RomTrajectory;
use crate::vec2::Vec2;

/// 64-bit FNV-1a content hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn file_hash(path: &Path) -> Result<u64> {
    Ok(fnv1a64(&fs::read(path)?))
}

// ---------------------------------------------------------------------------
// Mesh text format.

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "podfv-mesh v1")?;
    writeln!(w, "variant {}", mesh.variant.as_str())?;
    writeln!(w, "cells {}", mesh.n_cells())?;
    for i in 0..mesh.n_cells() {
        let c = mesh.cell_centers[i];
        writeln!(w, "{} {} {}", c.x, c.y, mesh.cell_volumes[i])?;
    }
    writeln!(w, "faces {}", mesh.n_faces())?;
    for f in &mesh.faces {
        let nbr = match f.neighbour {
            Some(n) => n.to_string(),
            None => format!("p{}", f.patch.unwrap()),
        };
        writeln!(
            w,
            "{} {} {} {} {} {}",
            f.area.x, f.area.y, f.owner, nbr, f.center.x, f.center.y
        )?;
    }
    writeln!(w, "patches {}", mesh.patches.len())?;
    for p in &mesh.patches {
        write!(w, "{} {} {}", p.name, p.kind.as_str(), p.faces.len())?;
        for fid in &p.faces {
            write!(w, " {fid}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = fs::read_to_string(path)?;
    let mut tok = text.split_ascii_whitespace();
    let mut next = || -> Result<&str> {
        tok.next()
            .ok_or_else(|| Error::Format("mesh file truncated".into()))
    };
    let magic = (next()?, next()?);
    if magic != ("podfv-mesh", "v1") {
        return Err(Error::Format("not a podfv-mesh v1 file".into()));
    }
    expect(next()?, "variant")?;
    let variant = OrthoVariant::from_str(next()?)?;
    expect(next()?, "cells")?;
    let n_cells: usize = parse(next()?)?;
    let mut centers = Vec::with_capacity(n_cells);
    let mut volumes = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        centers.push(Vec2::new(parse(next()?)?, parse(next()?)?));
        volumes.push(parse(next()?)?);
    }
    expect(next()?, "faces")?;
    let n_faces: usize = parse(next()?)?;
    let mut faces = Vec::with_capacity(n_faces);
    let mut face_patch = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let area = Vec2::new(parse(next()?)?, parse(next()?)?);
        let owner: usize = parse(next()?)?;
        let nbr_tok = next()?;
        let (neighbour, patch) = if let Some(p) = nbr_tok.strip_prefix('p') {
            (None, Some(parse::<usize>(p)?))
        } else {
            (Some(parse::<usize>(nbr_tok)?), None)
        };
        let center = Vec2::new(parse(next()?)?, parse(next()?)?);
        face_patch.push(patch);
        faces.push(Face {
            area,
            center,
            owner,
            neighbour,
            patch,
            d: Vec2::ZERO,
            delta: Vec2::ZERO,
            correction: Vec2::ZERO,
            weight: 0.0,
        });
    }
    expect(next()?, "patches")?;
    let n_patches: usize = parse(next()?)?;
    let mut patches = Vec::with_capacity(n_patches);
    for _ in 0..n_patches {
        let name = next()?.to_string();
        let kind = PatchKind::from_str(next()?)?;
        let nf: usize = parse(next()?)?;
        let mut ids = Vec::with_capacity(nf);
        for _ in 0..nf {
            ids.push(parse(next()?)?);
        }
        patches.push(BoundaryPatch {
            name,
            kind,
            faces: ids,
        });
    }
    Mesh::from_parts(centers, volumes, faces, patches, variant)
}

fn expect(got: &str, want: &str) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Format(format!("expected `{want}`, found `{got}`")))
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("cannot parse `{s}`")))
}

// ---------------------------------------------------------------------------
// Binary helpers.

struct BinWriter<W: Write>(W);

impl<W: Write> BinWriter<W> {
    fn u64(&mut self, v: u64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64s(&mut self, vs: &[f64]) -> Result<()> {
        for &v in vs {
            self.f64(v)?;
        }
        Ok(())
    }
    fn matrix(&mut self, m: &DMatrix<f64>) -> Result<()> {
        self.f64s(m.as_slice())
    }
    fn vector(&mut self, v: &DVector<f64>) -> Result<()> {
        self.f64s(v.as_slice())
    }
}

struct BinReader<R: Read>(R);

impl<R: Read> BinReader<R> {
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        let mut buf = vec![0u8; n * 8];
        self.0.read_exact(&mut buf)?;
        for (i, c) in buf.chunks_exact(8).enumerate() {
            out[i] = f64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(out)
    }
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_vec(rows, cols, self.f64s(rows * cols)?))
    }
    fn vector(&mut self, n: usize) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.f64s(n)?))
    }
    fn magic(&mut self, want: &str) -> Result<()> {
        let mut buf = vec![0u8; want.len()];
        self.0.read_exact(&mut buf)?;
        if buf != want.as_bytes() {
            return Err(Error::Format(format!("bad magic, expected `{}`", want.trim())));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Snapshot binary format.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapKind {
    CellVector,
    CellScalar,
    FaceScalar,
}

impl SnapKind {
    fn tag(self) -> u8 {
        match self {
            SnapKind::CellVector => b'u',
            SnapKind::CellScalar => b'p',
            SnapKind::FaceScalar => b'f',
        }
    }
    fn from_tag(t: u8) -> Result<Self> {
        Ok(match t {
            b'u' => SnapKind::CellVector,
            b'p' => SnapKind::CellScalar,
            b'f' => SnapKind::FaceScalar,
            other => return Err(Error::Format(format!("unknown snapshot kind {other}"))),
        })
    }
}

const SNAP_MAGIC: &str = "podfv-snap v1\n";

pub fn write_snapshots(
    path: &Path,
    kind: SnapKind,
    data: &DMatrix<f64>,
    times: &[f64],
) -> Result<()> {
    if data.ncols() != times.len() {
        return Err(Error::Dimension("one time stamp per column required".into()));
    }
    let mut w = BinWriter(BufWriter::new(fs::File::create(path)?));
    w.0.write_all(SNAP_MAGIC.as_bytes())?;
    w.0.write_all(&[kind.tag()])?;
    w.u64(data.nrows() as u64)?;
    w.u64(data.ncols() as u64)?;
    w.matrix(data)?;
    w.f64s(times)?;
    w.0.flush()?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<(SnapKind, DMatrix<f64>, Vec<f64>)> {
    let mut r = BinReader(std::io::BufReader::new(fs::File::open(path)?));
    r.magic(SNAP_MAGIC)?;
    let mut tag = [0u8; 1];
    r.0.read_exact(&mut tag)?;
    let kind = SnapKind::from_tag(tag[0])?;
    let rows = r.u64()? as usize;
    let cols = r.u64()? as usize;
    let data = r.matrix(rows, cols)?;
    let times = r.f64s(cols)?;
    Ok((kind, data, times))
}

/// Sidecar run metadata (plain `key value` text) written next to snapshot
/// files: inlet value, viscosity, sampling step and the upstream mesh hash.
pub fn write_run_meta(path: &Path, meta: &CaseMeta, mesh_hash: u64, wall_seconds: f64) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "u_in {}", meta.u_in)?;
    writeln!(w, "nu {}", meta.nu)?;
    writeln!(w, "dt_snap {}", meta.dt_snap)?;
    writeln!(w, "mesh_hash {mesh_hash}")?;
    writeln!(w, "wall_seconds {wall_seconds}")?;
    w.flush()?;
    Ok(())
}

pub struct RunMeta {
    pub meta: CaseMeta,
    pub mesh_hash: u64,
    pub wall_seconds: f64,
}

pub fn read_run_meta(path: &Path) -> Result<RunMeta> {
    let text = fs::read_to_string(path)?;
    let mut u_in = None;
    let mut nu = None;
    let mut dt_snap = None;
    let mut mesh_hash = None;
    let mut wall = 0.0;
    for line in text.lines() {
        let mut it = line.split_ascii_whitespace();
        match (it.next(), it.next()) {
            (Some("u_in"), Some(v)) => u_in = Some(parse(v)?),
            (Some("nu"), Some(v)) => nu = Some(parse(v)?),
            (Some("dt_snap"), Some(v)) => dt_snap = Some(parse(v)?),
            (Some("mesh_hash"), Some(v)) => mesh_hash = Some(parse(v)?),
            (Some("wall_seconds"), Some(v)) => wall = parse(v)?,
            _ => {}
        }
    }
    match (u_in, nu, dt_snap, mesh_hash) {
        (Some(u_in), Some(nu), Some(dt_snap), Some(mesh_hash)) => Ok(RunMeta {
            meta: CaseMeta { u_in, nu, dt_snap },
            mesh_hash,
            wall_seconds: wall,
        }),
        _ => Err(Error::Format(format!("incomplete run meta {}", path.display()))),
    }
}

/// Writes one run's three snapshot files (`velocity.snap`, `pressure.snap`,
/// `flux.snap`), force history and metadata into `dir`.
pub fn write_run(dir: &Path, snaps: &SnapshotSet, forces: &ForceSeries, mesh_hash: u64, wall_seconds: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_snapshots(&dir.join("velocity.snap"), SnapKind::CellVector, &snaps.u, &snaps.times)?;
    write_snapshots(&dir.join("pressure.snap"), SnapKind::CellScalar, &snaps.p, &snaps.times)?;
    write_snapshots(&dir.join("flux.snap"), SnapKind::FaceScalar, &snaps.flux, &snaps.times)?;
    write_forces_csv(&dir.join("forces.csv"), forces)?;
    write_run_meta(&dir.join("meta.txt"), &snaps.meta, mesh_hash, wall_seconds)?;
    Ok(())
}

pub fn read_run(dir: &Path) -> Result<(SnapshotSet, ForceSeries, RunMeta)> {
    let (ku, u, times) = read_snapshots(&dir.join("velocity.snap"))?;
    let (kp, p, tp) = read_snapshots(&dir.join("pressure.snap"))?;
    let (kf, flux, tf) = read_snapshots(&dir.join("flux.snap"))?;
    if ku != SnapKind::CellVector || kp != SnapKind::CellScalar || kf != SnapKind::FaceScalar {
        return Err(Error::Format("snapshot kind tags do not match roles".into()));
    }
    if tp != times || tf != times {
        return Err(Error::Format("snapshot time vectors disagree".into()));
    }
    let meta = read_run_meta(&dir.join("meta.txt"))?;
    let set = SnapshotSet {
        u,
        p,
        flux,
        times,
        meta: meta.meta,
    };
    set.validate()?;
    let forces = read_forces_csv(&dir.join("forces.csv"))?;
    Ok((set, forces, meta))
}

// ---------------------------------------------------------------------------
// Force and coefficient CSV.

pub fn write_forces_csv(path: &Path, forces: &ForceSeries) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,Dc,Lc")?;
    for i in 0..forces.times.len() {
        writeln!(w, "{},{},{}", forces.times[i], forces.drag[i], forces.lift[i])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_forces_csv(path: &Path) -> Result<ForceSeries> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t,Dc,Lc") => {}
        _ => return Err(Error::Format("force csv header mismatch".into())),
    }
    let mut out = ForceSeries::default();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let t = parse(it.next().unwrap_or(""))?;
        let d = parse(it.next().unwrap_or(""))?;
        let l = parse(it.next().unwrap_or(""))?;
        out.times.push(t);
        out.drag.push(d);
        out.lift.push(l);
    }
    Ok(out)
}

/// Coefficient history CSV: `t,a_1..a_Nu,b_1..b_Np`.
pub fn write_coeffs_csv(path: &Path, traj: &RomTrajectory) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let n_u = traj.a.nrows();
    let n_p = traj.b.nrows();
    let mut header = String::from("t");
    for i in 1..=n_u {
        header.push_str(&format!(",a_{i}"));
    }
    for i in 1..=n_p {
        header.push_str(&format!(",b_{i}"));
    }
    writeln!(w, "{header}")?;
    for k in 0..traj.n_states() {
        write!(w, "{}", traj.times[k])?;
        for i in 0..n_u {
            write!(w, ",{}", traj.a[(i, k)])?;
        }
        for i in 0..n_p {
            write!(w, ",{}", traj.b[(i, k)])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Key-value timing report in JSON form.
pub fn write_timing_json(path: &Path, entries: &[(&str, f64)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{{")?;
    for (i, (k, v)) in entries.iter().enumerate() {
        let comma = if i + 1 < entries.len() { "," } else { "" };
        writeln!(w, "  \"{k}\": {v}{comma}")?;
    }
    writeln!(w, "}}")?;
    w.flush()?;
    Ok(())
}

/// Two-column plot-data file.
pub fn write_xy(path: &Path, xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension("xy columns differ in length".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (x, y) in xs.iter().zip(ys) {
        writeln!(w, "{x} {y}")?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Basis archive.

const BASIS_MAGIC: &str = "podfv-basis v1\n";

pub fn write_basis(path: &Path, basis: &PodBasis, mesh_hash: u64) -> Result<()> {
    let mut w = BinWriter(BufWriter::new(fs::File::create(path)?));
    w.0.write_all(BASIS_MAGIC.as_bytes())?;
    w.u64(mesh_hash)?;
    w.u64(basis.n_s as u64)?;
    w.u64(basis.n_u() as u64)?;
    w.u64(basis.n_p() as u64)?;
    let n_cells = basis.p_mean.values.len();
    let n_faces = basis.lifting.f_c.values.len();
    w.u64(n_cells as u64)?;
    w.u64(n_faces as u64)?;
    for phi in &basis.phi {
        w.f64s(&phi.flatten())?;
    }
    for psi in &basis.psi {
        w.f64s(&psi.values)?;
    }
    for chi in &basis.chi {
        w.f64s(&chi.values)?;
    }
    w.f64s(&basis.lambda_u)?;
    w.f64s(&basis.lambda_p)?;
    w.matrix(&basis.q_u)?;
    w.matrix(&basis.q_p)?;
    // Lifting block.
    w.u64(basis.lifting.reference_face as u64)?;
    w.f64(basis.lifting.u_mr)?;
    let inlet_bc = inlet_bc_value(basis);
    w.f64(inlet_bc.x)?;
    w.f64(inlet_bc.y)?;
    w.f64s(&basis.lifting.phi_c.flatten())?;
    w.f64s(&basis.lifting.f_c.values)?;
    w.f64s(&basis.p_mean.values)?;
    w.0.flush()?;
    Ok(())
}

fn inlet_bc_value(basis: &PodBasis) -> Vec2 {
    for bc in &basis.lifting.phi_c.bcs.per_patch {
        if let PatchBc::FixedValue(v) = bc {
            if v.abs_max() > 0.0 {
                return *v;
            }
        }
    }
    Vec2::new(1.0, 0.0)
}

pub fn read_basis(path: &Path, mesh: &Mesh) -> Result<(PodBasis, u64)> {
    let mut r = BinReader(std::io::BufReader::new(fs::File::open(path)?));
    r.magic(BASIS_MAGIC)?;
    let mesh_hash = r.u64()?;
    let n_s = r.u64()? as usize;
    let n_u = r.u64()? as usize;
    let n_p = r.u64()? as usize;
    let n_cells = r.u64()? as usize;
    let n_faces = r.u64()? as usize;
    if n_cells != mesh.n_cells() || n_faces != mesh.n_faces() {
        return Err(Error::Dimension(format!(
            "basis built for {n_cells} cells / {n_faces} faces, mesh has {} / {}",
            mesh.n_cells(),
            mesh.n_faces()
        )));
    }
    let ubcs = homogeneous_velocity_bcs(mesh);
    let pbcs = pressure_bcs(mesh);
    let mut phi = Vec::with_capacity(n_u);
    for _ in 0..n_u {
        let flat = r.f64s(2 * n_cells)?;
        phi.push(CellField::from_flat(mesh, &flat, ubcs.clone())?);
    }
    let mut psi = Vec::with_capacity(n_u);
    for _ in 0..n_u {
        psi.push(FaceField {
            values: r.f64s(n_faces)?,
        });
    }
    let mut chi = Vec::with_capacity(n_p);
    for _ in 0..n_p {
        let vals = r.f64s(n_cells)?;
        chi.push(CellField::from_values(mesh, vals, pbcs.clone())?);
    }
    let lambda_u = r.f64s(n_s)?;
    let lambda_p = r.f64s(n_s)?;
    let q_u = r.matrix(n_s, n_s)?;
    let q_p = r.matrix(n_s, n_s)?;
    let reference_face = r.u64()? as usize;
    let u_mr = r.f64()?;
    let inlet_bc = Vec2::new(r.f64()?, r.f64()?);
    let phi_c_flat = r.f64s(2 * n_cells)?;
    let f_c_vals = r.f64s(n_faces)?;
    let p_mean_vals = r.f64s(n_cells)?;

    let per_patch = mesh
        .patches
        .iter()
        .map(|p| match p.kind {
            PatchKind::Inlet => PatchBc::FixedValue(inlet_bc),
            PatchKind::Wall => PatchBc::FixedValue(Vec2::ZERO),
            PatchKind::Outlet => PatchBc::ZeroGradient,
            PatchKind::SlipSide => PatchBc::Slip,
        })
        .collect();
    let phi_c = CellField::from_flat(mesh, &phi_c_flat, crate::field::Bcs { per_patch })?;
    let basis = PodBasis {
        phi,
        psi,
        chi,
        lambda_u,
        lambda_p,
        q_u,
        q_p,
        p_mean: CellField::from_values(mesh, p_mean_vals, pbcs)?,
        lifting: Lifting {
            phi_c,
            f_c: FaceField { values: f_c_vals },
            reference_face,
            u_mr,
        },
        n_s,
    };
    Ok((basis, mesh_hash))
}

// ---------------------------------------------------------------------------
// Reduced-system archive.

const ROM_MAGIC: &str = "podfv-rom v1\n";

pub fn write_rom(path: &Path, system: &ReducedSystem, basis_hash: u64) -> Result<()> {
    let b = &system.blocks;
    let mut w = BinWriter(BufWriter::new(fs::File::create(path)?));
    w.0.write_all(ROM_MAGIC.as_bytes())?;
    w.u64(basis_hash)?;
    w.u64(b.n_u as u64)?;
    w.u64(b.n_p as u64)?;
    w.f64(system.nu)?;
    w.f64(system.u_d)?;
    w.f64(system.poisson_cond)?;
    w.f64(system.poisson_shift)?;
    w.matrix(&b.diffusion)?;
    for m in &b.convection {
        w.matrix(m)?;
    }
    w.matrix(&b.pressure_gradient)?;
    w.matrix(&b.poisson_laplacian)?;
    w.vector(&b.poisson_mean)?;
    for m in &b.poisson_convection {
        w.matrix(m)?;
    }
    w.vector(&b.lift_diffusion)?;
    w.vector(&b.lift_convection)?;
    w.matrix(&b.flux_lift_convection)?;
    w.matrix(&b.lift_velocity_convection)?;
    w.vector(&b.poisson_lift)?;
    w.matrix(&b.poisson_flux_lift)?;
    w.matrix(&b.poisson_lift_velocity)?;
    w.vector(&system.bc_momentum_const)?;
    w.matrix(&system.bc_momentum_linear)?;
    w.vector(&system.bc_poisson_const)?;
    w.matrix(&system.bc_poisson_linear)?;
    w.matrix(&system.poisson_matrix)?;
    w.0.flush()?;
    Ok(())
}

pub fn read_rom(path: &Path) -> Result<(ReducedSystem, u64)> {
    let mut r = BinReader(std::io::BufReader::new(fs::File::open(path)?));
    r.magic(ROM_MAGIC)?;
    let basis_hash = r.u64()?;
    let n_u = r.u64()? as usize;
    let n_p = r.u64()? as usize;
    let nu = r.f64()?;
    let u_d = r.f64()?;
    let poisson_cond = r.f64()?;
    let poisson_shift = r.f64()?;
    let diffusion = r.matrix(n_u, n_u)?;
    let mut convection = Vec::with_capacity(n_u);
    for _ in 0..n_u {
        convection.push(r.matrix(n_u, n_u)?);
    }
    let pressure_gradient = r.matrix(n_u, n_p)?;
    let poisson_laplacian = r.matrix(n_p, n_p)?;
    let poisson_mean = r.vector(n_p)?;
    let mut poisson_convection = Vec::with_capacity(n_p);
    for _ in 0..n_p {
        poisson_convection.push(r.matrix(n_u, n_u)?);
    }
    let lift_diffusion = r.vector(n_u)?;
    let lift_convection = r.vector(n_u)?;
    let flux_lift_convection = r.matrix(n_u, n_u)?;
    let lift_velocity_convection = r.matrix(n_u, n_u)?;
    let poisson_lift = r.vector(n_p)?;
    let poisson_flux_lift = r.matrix(n_p, n_u)?;
    let poisson_lift_velocity = r.matrix(n_p, n_u)?;
    let bc_momentum_const = r.vector(n_u)?;
    let bc_momentum_linear = r.matrix(n_u, n_u)?;
    let bc_poisson_const = r.vector(n_p)?;
    let bc_poisson_linear = r.matrix(n_p, n_u)?;
    let poisson_matrix = r.matrix(n_p, n_p)?;
    let blocks = ReducedBlocks {
        n_u,
        n_p,
        diffusion,
        convection,
        pressure_gradient,
        poisson_laplacian,
        poisson_mean,
        poisson_convection,
        lift_diffusion,
        lift_convection,
        flux_lift_convection,
        lift_velocity_convection,
        poisson_lift,
        poisson_flux_lift,
        poisson_lift_velocity,
    };
    blocks.validate()?;
    Ok((
        ReducedSystem {
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
        },
        basis_hash,
    ))
}
