//! Cell-centered and face-centered field storage with per-patch boundary
//! conditions.
//!
//! Boundary closure rule used by every operator: a fixed-value patch takes
//! the prescribed value at the face, a zero-gradient patch copies the owner
//! cell value, and a slip patch mirrors the owner value (the normal
//! component is dropped; for scalars this reduces to zero-gradient).

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::vec2::Vec2;

/// Value types that can live in a cell field: scalars and plane vectors.
pub trait FieldValue: Copy + Default + PartialEq + std::fmt::Debug + 'static {
    /// Cell-gradient accumulator type for this value.
    type Grad: Copy + Default;
    const N_COMP: usize;

    fn zero() -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn dot(self, o: Self) -> f64;
    fn comp(self, c: usize) -> f64;
    fn from_comps(c: &[f64]) -> Self;
    /// Face value seen by a slip boundary: the tangential part of `self`.
    fn mirror_tangential(self, n_unit: Vec2) -> Self;

    fn grad_add(a: Self::Grad, b: Self::Grad) -> Self::Grad;
    fn grad_scale(g: Self::Grad, s: f64) -> Self::Grad;
    /// Contribution `S_f (x) v` of one face to the Gauss gradient.
    fn outer(s: Vec2, v: Self) -> Self::Grad;
    /// `k . (grad u)_f`, the transverse part of a face-normal derivative.
    fn grad_dot(k: Vec2, g: Self::Grad) -> Self;
}

impl FieldValue for f64 {
    type Grad = Vec2;
    const N_COMP: usize = 1;

    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn dot(self, o: Self) -> f64 {
        self * o
    }
    fn comp(self, _c: usize) -> f64 {
        self
    }
    fn from_comps(c: &[f64]) -> Self {
        c[0]
    }
    fn mirror_tangential(self, _n: Vec2) -> Self {
        self
    }
    fn grad_add(a: Vec2, b: Vec2) -> Vec2 {
        a + b
    }
    fn grad_scale(g: Vec2, s: f64) -> Vec2 {
        g * s
    }
    fn outer(s: Vec2, v: Self) -> Vec2 {
        s * v
    }
    fn grad_dot(k: Vec2, g: Vec2) -> Self {
        k.dot(g)
    }
}

impl FieldValue for Vec2 {
    /// Gradient of each component.
    type Grad = [Vec2; 2];
    const N_COMP: usize = 2;

    fn zero() -> Self {
        Vec2::ZERO
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn dot(self, o: Self) -> f64 {
        Vec2::dot(self, o)
    }
    fn comp(self, c: usize) -> f64 {
        if c == 0 {
            self.x
        } else {
            self.y
        }
    }
    fn from_comps(c: &[f64]) -> Self {
        Vec2::new(c[0], c[1])
    }
    fn mirror_tangential(self, n: Vec2) -> Self {
        self - n * self.dot(n)
    }
    fn grad_add(a: [Vec2; 2], b: [Vec2; 2]) -> [Vec2; 2] {
        [a[0] + b[0], a[1] + b[1]]
    }
    fn grad_scale(g: [Vec2; 2], s: f64) -> [Vec2; 2] {
        [g[0] * s, g[1] * s]
    }
    fn outer(s: Vec2, v: Self) -> [Vec2; 2] {
        [s * v.x, s * v.y]
    }
    fn grad_dot(k: Vec2, g: [Vec2; 2]) -> Self {
        Vec2::new(k.dot(g[0]), k.dot(g[1]))
    }
}

/// Boundary condition on one patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PatchBc<T> {
    FixedValue(T),
    ZeroGradient,
    Slip,
}

/// Per-patch boundary-condition table; one entry per mesh patch.
#[derive(Clone, Debug, PartialEq)]
pub struct Bcs<T> {
    pub per_patch: Vec<PatchBc<T>>,
}

impl<T: FieldValue> Bcs<T> {
    pub fn uniform(n_patches: usize, bc: PatchBc<T>) -> Self {
        Self {
            per_patch: vec![bc; n_patches],
        }
    }

    pub fn get(&self, patch: usize) -> PatchBc<T> {
        self.per_patch[patch]
    }
}

/// Cell-centered field: one value per cell plus the boundary closure.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField<T: FieldValue> {
    pub values: Vec<T>,
    pub bcs: Bcs<T>,
}

impl<T: FieldValue> CellField<T> {
    pub fn new(mesh: &Mesh, init: T, bcs: Bcs<T>) -> Result<Self> {
        Self::from_values(mesh, vec![init; mesh.n_cells()], bcs)
    }

    pub fn from_values(mesh: &Mesh, values: Vec<T>, bcs: Bcs<T>) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(Error::Field(format!(
                "field has {} values, mesh has {} cells",
                values.len(),
                mesh.n_cells()
            )));
        }
        if bcs.per_patch.len() != mesh.patches.len() {
            return Err(Error::Field(format!(
                "bc table covers {} patches, mesh has {}",
                bcs.per_patch.len(),
                mesh.patches.len()
            )));
        }
        Ok(Self { values, bcs })
    }

    /// Value of the field at a boundary face, from the patch closure.
    pub fn boundary_face_value(&self, mesh: &Mesh, face: usize) -> T {
        let f = &mesh.faces[face];
        let patch = f.patch.expect("boundary_face_value on internal face");
        match self.bcs.get(patch) {
            PatchBc::FixedValue(v) => v,
            PatchBc::ZeroGradient => self.values[f.owner],
            PatchBc::Slip => self.values[f.owner].mirror_tangential(f.normal()),
        }
    }

    /// Linear combination of fields, combining both values and boundary
    /// conditions. All terms must use the same closure kind on every patch;
    /// fixed values combine linearly.
    pub fn linear_combination(mesh: &Mesh, terms: &[(f64, &CellField<T>)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Field("empty linear combination".into()))?;
        let n = first.1.values.len();
        let n_patches = first.1.bcs.per_patch.len();
        let mut values = vec![T::zero(); n];
        for &(alpha, f) in terms {
            if f.values.len() != n || f.bcs.per_patch.len() != n_patches {
                return Err(Error::Field("mismatched fields in combination".into()));
            }
            for (v, &x) in values.iter_mut().zip(&f.values) {
                *v = v.add(x.scale(alpha));
            }
        }
        let mut per_patch = Vec::with_capacity(n_patches);
        for p in 0..n_patches {
            let bc = match first.1.bcs.get(p) {
                PatchBc::FixedValue(_) => {
                    let mut acc = T::zero();
                    for &(alpha, f) in terms {
                        match f.bcs.get(p) {
                            PatchBc::FixedValue(v) => acc = acc.add(v.scale(alpha)),
                            _ => {
                                return Err(Error::Field(format!(
                                    "patch {p}: mixed bc kinds in combination"
                                )))
                            }
                        }
                    }
                    PatchBc::FixedValue(acc)
                }
                PatchBc::ZeroGradient => {
                    for &(_, f) in terms {
                        if !matches!(f.bcs.get(p), PatchBc::ZeroGradient) {
                            return Err(Error::Field(format!(
                                "patch {p}: mixed bc kinds in combination"
                            )));
                        }
                    }
                    PatchBc::ZeroGradient
                }
                PatchBc::Slip => {
                    for &(_, f) in terms {
                        if !matches!(f.bcs.get(p), PatchBc::Slip) {
                            return Err(Error::Field(format!(
                                "patch {p}: mixed bc kinds in combination"
                            )));
                        }
                    }
                    PatchBc::Slip
                }
            };
            per_patch.push(bc);
        }
        CellField::from_values(mesh, values, Bcs { per_patch })
    }

    /// Flattened component-interleaved copy of the cell values.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() * T::N_COMP);
        for v in &self.values {
            for c in 0..T::N_COMP {
                out.push(v.comp(c));
            }
        }
        out
    }

    /// Rebuilds cell values from a component-interleaved slice.
    pub fn from_flat(mesh: &Mesh, flat: &[f64], bcs: Bcs<T>) -> Result<Self> {
        if flat.len() != mesh.n_cells() * T::N_COMP {
            return Err(Error::Field(format!(
                "flat data has {} entries, expected {}",
                flat.len(),
                mesh.n_cells() * T::N_COMP
            )));
        }
        let values = flat
            .chunks_exact(T::N_COMP)
            .map(T::from_comps)
            .collect::<Vec<_>>();
        Self::from_values(mesh, values, bcs)
    }
}

/// Face-centered scalar flux field (one value per face, internal and
/// boundary alike).
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    pub values: Vec<f64>,
}

impl FaceField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![0.0; mesh.n_faces()],
        }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_faces() {
            return Err(Error::Field(format!(
                "flux field has {} values, mesh has {} faces",
                values.len(),
                mesh.n_faces()
            )));
        }
        Ok(Self { values })
    }

    pub fn linear_combination(terms: &[(f64, &FaceField)]) -> Result<Self> {
        let n = terms
            .first()
            .ok_or_else(|| Error::Field("empty linear combination".into()))?
            .1
            .values
            .len();
        let mut values = vec![0.0; n];
        for &(alpha, f) in terms {
            if f.values.len() != n {
                return Err(Error::Field("mismatched flux fields".into()));
            }
            for (v, x) in values.iter_mut().zip(&f.values) {
                *v += alpha * x;
            }
        }
        Ok(Self { values })
    }
}
