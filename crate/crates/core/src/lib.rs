//! Minimal diagonally concave functions on the strip {|x₂| ≤ ε} with
//! prescribed boundary values, built from diagonal foliations, herringbones
//! and fissures, with a grid oracle to check them against.

pub mod assembly;
pub mod boundary;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod fissure;
pub mod foliation;
pub mod geometry;
pub mod herringbone;
pub mod numeric;
pub mod oracle;
pub mod vectorfield;

pub use error::{Error, Result};
