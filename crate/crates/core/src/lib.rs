//! Upwind finite-volume and MAC schemes for the barotropic compressible
//! Navier-Stokes equations on the periodic unit torus.

pub mod analysis;
pub mod error;
pub mod fields;
pub mod fluxes;
pub mod identities;
pub mod io;
pub mod mesh;
pub mod ops;
pub mod physics;
pub mod schemes;
pub mod smooth;
pub mod state;

pub use error::{Error, Result};
pub use fields::{CellField, CellVectorField, StaggeredField, TensorField};
pub use mesh::{BidualIndex, BoxLattice, FaceIndex, Mesh};
pub use physics::{GasLaw, ViscosityLaw};
pub use smooth::{SharedFn, SmoothFunction, TrigPoly};
pub use state::{FluidState, SchemeKind, Velocity};
