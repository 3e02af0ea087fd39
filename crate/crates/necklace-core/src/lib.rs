//! Band structure, dispersion, group velocity and truncated-chain scattering
//! for periodic necklace quantum graphs with general symplectic vertex
//! conditions, plus the design procedure that places a narrow transparent
//! band at a chosen wavenumber.
//!
//! The graph is a chain of two-arch loops (lengths `l1 >= l2`) joined by
//! straight segments (`l3`), with the same real symmetric 3x3 gluing matrix
//! at every degree-3 vertex. Everything is computed on the sigma axis, the
//! effective 1D wavenumber; [`graph_model::sigma_from_omega`] maps physical
//! frequencies into it.
//!
//! All types are immutable after construction and every operation is a pure
//! function of its inputs, so the whole API is safe to drive from parallel
//! sweeps without coordination.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod designer;
pub mod graph_model;
mod linsolve;
pub mod mat;
pub mod monodromy;
pub mod spectrum;
pub mod truncated_scattering;

pub use graph_model::{NecklaceParams, VertexCondition, WaveContext};
pub use monodromy::{HillPoint, Monodromy};
pub use spectrum::BandStructure;
pub use truncated_scattering::{ScatterResult, TruncatedNecklace};
