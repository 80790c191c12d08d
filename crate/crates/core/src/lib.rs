pub mod brdf;
pub mod checks;
pub mod cli;
pub mod ellipsometry;
pub mod error;
pub mod inverse;
pub mod io;
pub mod numerics;
pub mod polarization;
pub mod renderer;

pub use error::{Error, Result};
