//! Enclosure-method reconstruction of electromagnetic obstacles.

pub mod cgo;
pub mod config;
pub mod enclosure;
pub mod error;
pub mod fem;
pub mod impedance;
pub mod indicator;
pub mod medium;
pub mod mesh;
pub mod output;
pub mod pipeline;
pub mod registry;
pub mod source;
pub mod validate;
pub mod vec3;
pub mod vtk;

pub use error::{Error, Result};

/// Float formatted with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
