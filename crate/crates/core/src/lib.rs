//! Level-set solver for motion of hypersurfaces by general curvature
//! functions, with the verification tools around it.

pub mod analysis;
pub mod arrival;
pub mod cone;
pub mod error;
pub mod evolve;
pub mod front;
pub mod grid;
pub mod harness;
pub mod noncollapse;

pub use error::{Error, Result};
