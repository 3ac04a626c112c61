//! Dyadic trees, Bergman kernels, weights, two-weight constants and the
//! Bergman projection on the Hartogs triangle.

pub mod error;
pub mod constants;
pub mod geometry;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{BergmanTree, DiscPoint, DyadicCell, HartogsPoint, Point, Region, TreeNode};
pub use quadrature::{Integral, Measure, QuadratureSpec};
pub use weights::{ExponentPair, Profile, Weight};
pub use operators::{TestFunction, SampledField};
