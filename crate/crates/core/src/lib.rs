//! Label-space (Lagrangian) fluid mechanics.
//!
//! The flow is a time-dependent map `x(ξ, t)` from a label lattice to
//! physical space. Everything else is derived from it: Eulerian fields by
//! deposition or by inverting the map, the barotropic and gravitational
//! dynamics, the label-space conservation laws, the two-component complex
//! (C²) description and a two-species electrostatic plasma.

#![no_std]
extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod linalg;
pub mod lattice;
pub mod grid;
pub mod deposition;
pub mod dynamics;
pub mod invariants;
pub mod fft;
pub mod random;
pub mod c2;
pub mod gravity;
pub mod plasma;
mod par;

pub use error::{Error, Result};
pub use lattice::{build_lattice, inverse_map, Boundary, FlowMap, LabelLattice, StencilOrder};
pub use linalg::{Mat, Vec3};
pub use grid::{GridBoundary, GridField, GridGeometry, Residual};
pub use deposition::Kernel;
