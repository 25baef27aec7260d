//! Broken diffeomorphisms of the circle, the Lie algebroid of broken vector
//! fields, and their Virasoro-type central extensions.

pub mod algebroid;
mod error;
pub mod expr;
pub mod geometry;
pub mod groupoid;
pub mod interval;
pub mod linkage;
pub mod sampling;

pub use error::{Error, Result};
