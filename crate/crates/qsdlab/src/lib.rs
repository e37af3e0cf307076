//! Numerical laboratory for quasi-stationary behaviour of 1-D
//! population diffusions with joint environmental and demographic noise.
pub mod asymptotics;
pub mod density;
pub mod error;
pub mod exec;
pub mod fit;
pub mod grid;
pub mod interp;
pub mod linalg;
pub mod model;
pub mod quad;
pub mod scale;
pub mod sde;
pub mod spectral;

pub use error::{Error, Result};
