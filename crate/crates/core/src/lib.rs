//! Sparse polynomial multiplication through evaluation in cyclic algebras and a
//! peeling decoder for the hashed terms.

pub mod cyclic;
pub mod dynamics;
pub mod error;
pub mod heuristic;
pub mod numtheory;
pub mod peeling;
pub mod poly;
pub mod rng;
pub mod unconditional;

pub use error::{Error, Result};
pub use poly::{ExponentVec, SparsePoly, Term, UniPoly};
