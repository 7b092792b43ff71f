//! Self-similar resistance forms on Sierpinski gaskets with an added rotated
//! triangle.

pub mod approx;
pub mod converge;
pub mod error;
pub mod geometry;
pub mod network;
pub mod renorm;
pub mod scalar;

pub use error::{Error, Result};
