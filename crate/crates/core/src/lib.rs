pub mod boundary;
pub mod error;
pub mod family;
pub mod krylov;
pub mod lattice;
pub mod multiplier;
pub mod perturb;
pub mod quadrature;
pub mod spaces;
pub mod sweep;

pub use error::{LapError, Result};
pub use lattice::{Domain, Field, GridSpec};
