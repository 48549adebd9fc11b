//! Shear coordinates and length functions for finite-area hyperbolic
//! surfaces equipped with a maximal finite-leaved geodesic lamination.
//!
//! The crate provides:
//! - upper half-plane primitives (cross-ratios, shears, the wedge distance),
//! - combinatorial triangulation schemas with spiraling closed leaves,
//! - the shear polytope of complete finite-area structures,
//! - a developing-map holonomy oracle,
//! - an annular-cover engine computing geodesic lengths as minima of
//!   strictly convex functionals,
//! - Fenchel-Nielsen charts and twist flows,
//! - a Nielsen realization solver for binding curve systems.

pub mod geometry;
pub mod schema;
pub mod shear_space;
pub mod oracle;
pub mod annulus;
pub mod lengths;
pub mod fenchel;
pub mod nielsen;
