//! Mixed finite elements for Darcy flow with Neumann data on curved domains.
//!
//! The discretization uses BDM_k velocities and discontinuous P_{k-1}
//! pressures on a body-fitted triangulation whose boundary edges are chords of
//! the curved boundary. The Neumann condition `u·n = g_N` is imposed weakly on
//! the straight mesh boundary through a truncated Taylor expansion of the
//! discrete velocity along the projection direction onto the true boundary,
//! which restores `O(h^k)` convergence that plain polygonal approximation loses.
//!
//! Module map:
//!
//! - [`geometry`]: boundary curves, closest-point projection.
//! - [`mesh`]: body-fitted mesh generation and topology.
//! - [`poly`], [`quadrature`], [`element`]: reference elements and local operators.
//! - [`correction`]: per-edge trace geometry and the Taylor operator.
//! - [`assembly`]: forms, DOF numbering, the saddle-point system.
//! - [`sparse`]: compressed-row matrices.
//! - [`solver`]: sparse direct solve with iterative fallback.
//! - [`analysis`]: manufactured solutions, error norms, convergence orders.
//! - [`study`]: configuration, refinement studies, file output.

pub mod analysis;
pub mod assembly;
pub mod correction;
pub mod element;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};
pub use geometry::Vec2;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/element.md")]
    mod element {}
    #[doc = include_str!("../../../book/src/correction.md")]
    mod correction {}
    #[doc = include_str!("../../../book/src/system.md")]
    mod system {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
}
