//! Lacunary point sets from the coordinatewise doubling map, their exact
//! star discrepancy, bracketing covers, chaining decompositions, the
//! high-probability discrepancy bound, and experiments that test it.

pub mod bounds;
pub mod covers;
pub mod discrepancy;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod harness;
pub mod independence;
pub mod points;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::Corner;
pub use points::{derive_seed, generate_iid, generate_lacunary, PointSet, SeedBits};
