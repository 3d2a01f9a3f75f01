//! Finite-volume POD-Galerkin reduced order modelling toolkit.
//!
//! The crate covers the full offline/online workflow for unsteady
//! incompressible flow past a bluff body in a channel:
//!
//! * [`mesh`] — Cartesian channel tessellation with owner/neighbour face
//!   topology and boundary patches.
//! * [`fvops`] — discrete finite-volume operators (interpolation, Gauss
//!   gradient, convection, Laplacian, flux divergence) and the
//!   volume-weighted inner product shared by the solver and the projection.
//! * [`hfsolver`] — segregated (PISO-style) pressure-velocity solver used to
//!   generate snapshots and force histories.
//! * [`pod`] — proper orthogonal decomposition of velocity, pressure and
//!   mass-flux snapshots by the method of snapshots, with Dirichlet lifting.
//! * [`romassembly`] — Galerkin projection of the momentum and
//!   pressure-Poisson equations onto the POD spaces.
//! * [`romsolver`] — backward-Euler/Newton integration of the coupled
//!   reduced system and field reconstruction.
//! * [`eval`] — error metrics (WAPE), spectral peak frequency, Strouhal
//!   number, mode sweeps and speedup reporting.
//! * [`io`] — on-disk artifact formats (`podfv-mesh v1`, `podfv-snap v1`,
//!   `podfv-basis v1`, `podfv-rom v1`, CSV reports).

pub mod error;
pub mod eval;
pub mod field;
pub mod fvops;
pub mod hfsolver;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod pod;
pub mod romassembly;
pub mod romsolver;
pub mod vec2;

pub use error::{Error, Result};
pub use field::{Bcs, CellField, FaceField, FieldValue, PatchBc};
pub use hfsolver::{CaseConfig, FlowState, SnapshotSet};
pub use mesh::{BoundaryPatch, Face, Mesh, OrthoVariant, PatchKind, Rect};
pub use pod::PodBasis;
pub use romassembly::{ReducedBlocks, ReducedSystem};
pub use romsolver::{ReducedState, RomRunConfig, RomTrajectory};
pub use vec2::Vec2;
