//! Capillary convex bodies on the spherical cap.

pub mod capfun;
pub mod discriminant;
pub mod error;
pub mod grid;
pub mod mixedvol;
pub mod reconstruct;
pub mod spectral;
pub(crate) mod stencil;
pub mod sum;
pub mod tolerance;

pub use capfun::{CapillaryBody, CapillaryField};
pub use error::{CapError, Result};
pub use grid::{
    b_theta, build_grid, cap_area, CapGrid, ScalarField, Sym2, SymTensorField, VectorField,
};
pub use tolerance::{Profile, Tolerances};
